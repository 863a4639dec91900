#pragma once

// Independent reference implementations used to cross-check the library.
// Everything here is deliberately naive: O(n^2) transforms, closed-form
// two-level formulas, slow quadrature.  Keep it that way.

#include <dwell/dwell.hpp>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

namespace oracles {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

// --- discrete Fourier transform, textbook definition ------------------

inline Eigen::VectorXcd naive_dft(const Eigen::VectorXcd& in) {
    const int n = static_cast<int>(in.size());
    Eigen::VectorXcd out(n);
    for (int k = 0; k < n; ++k) {
        std::complex<double> acc = 0.0;
        for (int j = 0; j < n; ++j) {
            double ang = -kTwoPi * static_cast<double>(k) * static_cast<double>(j) / n;
            acc += in[j] * std::polar(1.0, ang);
        }
        out[k] = acc;
    }
    return out;
}

// --- harmonic estimate of the on-site level spacing -------------------
//
// For a well minimum at x0 (x in units of the lattice period) with local
// curvature V'' in kHz per unit length squared, the oscillator spacing is
// h_nu = hbar * sqrt(V''_J / m) expressed back in kHz.  Using the recoil
// energy E_R = h^2 / (2 m lambda^2) one gets the clean dimensionless form
//   nu = sqrt(V''[kHz] * E_R[kHz] / (2 pi^2)).
inline double harmonic_spacing_khz(double curvature_khz, double recoil_khz) {
    return std::sqrt(curvature_khz * recoil_khz / (2.0 * M_PI * M_PI));
}

// Depth-V cos^2 lattice: V(x) = V * sin^2(pi x / a) has curvature
// 2 V pi^2 / a^2 at the bottom; with a = 1/2 (the lambda/2 lattice in
// units of lambda) the spacing becomes 2 sqrt(V * E_R).
inline double half_lattice_spacing_khz(double depth_er, double recoil_khz) {
    return 2.0 * std::sqrt(depth_er) * recoil_khz;
}

// --- two-level closed forms -------------------------------------------
//
// rabi_khz and detuning_khz in kHz, t in microseconds.  Probability of
// having left the initial state.
inline double rabi_transfer(double rabi_khz, double detuning_khz, double t_us) {
    double w = std::hypot(rabi_khz, detuning_khz);
    if (w == 0.0) return 0.0;
    double s = std::sin(0.5 * dwell::kPhaseKhzUs * w * t_us);
    double frac = (rabi_khz * rabi_khz) / (w * w);
    return frac * s * s;
}

// Ramsey contrast against a static Gaussian detuning spread (sigma in kHz).
inline double ramsey_gaussian_contrast(double sigma_khz, double t_us) {
    double a = dwell::kPhaseKhzUs * sigma_khz * t_us;
    return std::exp(-0.5 * a * a);
}

// Phase variance accumulated from a frequency random walk of diffusion
// D (kHz^2/us).  Free evolution of length t picks up var = k^2 D t^3 / 3;
// a perfect echo of total length t refocuses the static part and leaves
// k^2 D t^3 / 12.
inline double walk_ramsey_phase_var(double diff, double t_us) {
    double k = dwell::kPhaseKhzUs;
    return k * k * diff * t_us * t_us * t_us / 3.0;
}
inline double walk_echo_phase_var(double diff, double t_us) {
    double k = dwell::kPhaseKhzUs;
    return k * k * diff * t_us * t_us * t_us / 12.0;
}

// --- momentum distribution of two displaced Gaussians ------------------
//
// psi(x) = exp(-(x-x1)^2/(4 s^2)) + e^{i theta} exp(-(x-x2)^2/(4 s^2)),
// x in units of lambda, momentum in units of hbar k = h/lambda.  The
// density is a Gaussian envelope times a fringe of period 1/|x2-x1|.
inline double two_gaussian_density(double p_hk, double x1, double x2,
                                   double sigma_x, double theta) {
    // |FT of exp(-(x-a)^2/(4 s^2))|^2 = const * exp(-2 (2 pi p s)^2)
    double env = std::exp(-2.0 * std::pow(kTwoPi * sigma_x * p_hk, 2.0));
    double phase = kTwoPi * p_hk * (x2 - x1) - theta;
    return env * (1.0 + std::cos(phase));
}

inline double fringe_period_hk(double separation_lambda) {
    return 1.0 / separation_lambda;
}

// --- Richardson order estimate -----------------------------------------
//
// Given errors at step h and h/2, the classical order estimate.
inline double convergence_order(double err_h, double err_h2) {
    return std::log2(err_h / err_h2);
}

// --- field magnitude with a small transverse component ------------------
//
// |B0 zhat + b xhat| = B0 + b^2/(2 B0) + O(b^4).
inline double transverse_shift(double b0, double b_perp) {
    return std::sqrt(b0 * b0 + b_perp * b_perp) - b0;
}

// --- slow scalar quadrature of <psi|V|psi> on a uniform grid ------------
inline double expect_potential(const Eigen::VectorXcd& psi,
                               const Eigen::VectorXd& v, double dx) {
    double acc = 0.0;
    for (int i = 0; i < psi.size(); ++i) acc += std::norm(psi[i]) * v[i];
    return acc * dx;
}

// --- reference damped cosine for fit checks -----------------------------
inline std::vector<double> damped_cosine(const std::vector<double>& t,
                                         double amp, double freq_khz,
                                         double tau_us, double phase,
                                         double offset) {
    std::vector<double> y(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        y[i] = offset + amp * std::exp(-t[i] / tau_us) *
                            std::cos(dwell::kPhaseKhzUs * freq_khz * t[i] + phase);
    }
    return y;
}

}  // namespace oracles
