#pragma once

// Nonlinear least squares (Levenberg-Marquardt, numeric Jacobian) and the
// model fits used by the analysis: damped sinusoid, fixed-time two-level
// lineshape, and Gaussian-envelope interference fringes.  Positivity and
// [0, 1] constraints are enforced by fitting transformed parameters.

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "constants.hpp"

namespace dwell {

using ModelFn = std::function<double(double, const Eigen::VectorXd&)>;

struct LmOptions {
  int max_iterations = 400;
  double tol = 1e-12;
  double jacobian_eps = 1e-6;
};

struct LmResult {
  Eigen::VectorXd params;
  Eigen::VectorXd uncertainties; // sqrt(chi2/dof * diag(JtJ^-1)); zero if dof <= 0
  double chi2 = 0.0;
  int iterations = 0;
  bool converged = false;
};

inline LmResult fit_lm(const ModelFn& model, const std::vector<double>& x,
                       const std::vector<double>& y, const Eigen::VectorXd& p0,
                       const LmOptions& opt = {}) {
  const int n = static_cast<int>(x.size());
  const int np = static_cast<int>(p0.size());
  if (y.size() != x.size()) throw std::invalid_argument("fit_lm: x/y size mismatch");
  if (n < np) throw std::invalid_argument("fit_lm: fewer points than parameters");

  auto residuals = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
    for (int i = 0; i < n; ++i) r(i) = model(x[i], p) - y[i];
  };

  Eigen::VectorXd p = p0, r(n), r_try(n);
  residuals(p, r);
  double chi2 = r.squaredNorm();
  double lambda = 1e-3;
  Eigen::MatrixXd jac(n, np);
  LmResult out;

  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    for (int j = 0; j < np; ++j) {
      const double h = opt.jacobian_eps * std::max(1.0, std::abs(p(j)));
      Eigen::VectorXd pp = p, pm = p;
      pp(j) += h;
      pm(j) -= h;
      for (int i = 0; i < n; ++i)
        jac(i, j) = (model(x[i], pp) - model(x[i], pm)) / (2.0 * h);
    }
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd g = jac.transpose() * r;

    bool stepped = false;
    for (int tries = 0; tries < 16; ++tries) {
      Eigen::MatrixXd a = jtj;
      for (int j = 0; j < np; ++j) a(j, j) += lambda * std::max(jtj(j, j), 1e-12);
      const Eigen::VectorXd delta = a.ldlt().solve(-g);
      const Eigen::VectorXd p_try = p + delta;
      residuals(p_try, r_try);
      const double chi2_try = r_try.squaredNorm();
      if (std::isfinite(chi2_try) && chi2_try <= chi2) {
        const double rel = delta.norm() / std::max(1.0, p.norm());
        const double dchi = chi2 - chi2_try;
        p = p_try;
        r = r_try;
        chi2 = chi2_try;
        lambda = std::max(lambda / 3.0, 1e-12);
        stepped = true;
        if (rel < 1e-9 || dchi < opt.tol * std::max(chi2, 1e-30)) {
          out.converged = true;
          it = it + 1;
        }
        break;
      }
      lambda *= 7.0;
    }
    if (out.converged || !stepped) {
      if (!stepped && chi2 < 1e-28) out.converged = true; // exact fit from the start
      break;
    }
  }

  out.params = p;
  out.chi2 = chi2;
  out.iterations = it;
  out.uncertainties = Eigen::VectorXd::Zero(np);
  const int dof = n - np;
  if (dof > 0) {
    for (int j = 0; j < np; ++j) {
      const double h = opt.jacobian_eps * std::max(1.0, std::abs(p(j)));
      Eigen::VectorXd pp = p, pm = p;
      pp(j) += h;
      pm(j) -= h;
      for (int i = 0; i < n; ++i)
        jac(i, j) = (model(x[i], pp) - model(x[i], pm)) / (2.0 * h);
    }
    const Eigen::MatrixXd cov = (jac.transpose() * jac)
                                    .ldlt()
                                    .solve(Eigen::MatrixXd::Identity(np, np));
    for (int j = 0; j < np; ++j)
      out.uncertainties(j) = std::sqrt(std::max(0.0, cov(j, j) * chi2 / dof));
  }
  return out;
}

// Dominant frequency (kHz) of samples y(t_us) from a dense direct periodogram,
// parabolically refined.  Assumes a roughly uniform time grid for the Nyquist
// estimate but evaluates the transform on the true sample times.
inline double periodogram_peak_khz(const std::vector<double>& t_us,
                                   const std::vector<double>& y) {
  const int n = static_cast<int>(t_us.size());
  if (n < 4) throw std::invalid_argument("periodogram_peak_khz: need >= 4 samples");
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= n;
  const double span = t_us.back() - t_us.front();
  if (span <= 0.0) throw std::invalid_argument("periodogram_peak_khz: zero time span");
  const double dt_min = span / (n - 1);
  const double f_max = 0.5 / dt_min * 1e3; // kHz
  const double f_min = 0.5 / span * 1e3;
  const int ngrid = 1024;
  std::vector<double> power(ngrid);
  int best = 0;
  for (int k = 0; k < ngrid; ++k) {
    const double f = f_min + (f_max - f_min) * k / (ngrid - 1);
    complexd acc(0.0, 0.0);
    for (int i = 0; i < n; ++i)
      acc += (y[i] - mean) * std::polar(1.0, -kPhaseKhzUs * f * t_us[i]);
    power[k] = std::norm(acc);
    if (power[k] > power[best]) best = k;
  }
  double refine = 0.0;
  if (best > 0 && best + 1 < ngrid) {
    const double d = power[best - 1] - 2.0 * power[best] + power[best + 1];
    if (std::abs(d) > 1e-300) refine = 0.5 * (power[best - 1] - power[best + 1]) / d;
  }
  return f_min + (f_max - f_min) * (best + refine) / (ngrid - 1);
}

struct DampedSineFit {
  double amplitude = 0.0;
  double tau_us = 0.0;
  double freq_khz = 0.0;
  double phase_rad = 0.0;
  double offset = 0.0;
  double freq_err_khz = 0.0;
  double tau_err_us = 0.0;
  double chi2 = 0.0;
  bool converged = false;
  bool freq_ambiguous = false; // fit frequency disagrees with the periodogram peak by > 10%
};

// y(t) = A exp(-t/tau) sin(2 pi 1e-3 f t + phi) + c, tau kept positive via
// tau = exp(u).
inline DampedSineFit fit_damped_sine(const std::vector<double>& t_us,
                                     const std::vector<double>& y) {
  const int n = static_cast<int>(t_us.size());
  if (n < 6) throw std::invalid_argument("fit_damped_sine: need >= 6 samples");
  double mean = 0.0, var = 0.0;
  for (double v : y) mean += v;
  mean /= n;
  for (double v : y) var += (v - mean) * (v - mean);
  var /= n;
  const double f_seed = periodogram_peak_khz(t_us, y);
  const double span = t_us.back() - t_us.front();

  // linear phase/amplitude seed at the seeded frequency
  double sa = 0.0, sb = 0.0;
  for (int i = 0; i < n; ++i) {
    sa += (y[i] - mean) * std::sin(kPhaseKhzUs * f_seed * t_us[i]);
    sb += (y[i] - mean) * std::cos(kPhaseKhzUs * f_seed * t_us[i]);
  }
  const double phase_seed = std::atan2(sb, sa);

  const ModelFn model = [](double t, const Eigen::VectorXd& p) {
    const double tau = std::exp(p(1));
    return p(0) * std::exp(-t / tau) * std::sin(kPhaseKhzUs * p(2) * t + p(3)) + p(4);
  };
  Eigen::VectorXd p0(5);
  p0 << std::sqrt(2.0 * var), std::log(std::max(span, 1e-6)), f_seed, phase_seed, mean;
  LmResult lm = fit_lm(model, t_us, y, p0);

  DampedSineFit out;
  out.amplitude = lm.params(0);
  out.tau_us = std::exp(lm.params(1));
  out.freq_khz = lm.params(2);
  out.phase_rad = lm.params(3);
  out.offset = lm.params(4);
  out.freq_err_khz = lm.uncertainties(2);
  out.tau_err_us = out.tau_us * lm.uncertainties(1); // d(e^u) = e^u du
  out.chi2 = lm.chi2;
  out.converged = lm.converged;
  if (out.amplitude < 0.0) { // fold the sign into the phase
    out.amplitude = -out.amplitude;
    out.phase_rad += kPi;
  }
  out.phase_rad = std::remainder(out.phase_rad, kTwoPi);
  out.freq_ambiguous = std::abs(out.freq_khz - f_seed) > 0.1 * std::max(f_seed, 1e-12);
  return out;
}

struct LineshapeFit {
  double center_khz = 0.0;
  double rabi_khz = 0.0;
  double amplitude = 0.0;
  double offset = 0.0;
  double center_err_khz = 0.0;
  double chi2 = 0.0;
  bool converged = false;
};

// Fixed-duration two-level response versus drive frequency:
// p(f) = off + A * W^2/(W^2+d^2) * sin^2(pi 1e-3 sqrt(W^2+d^2) t), d = f - f0.
inline LineshapeFit fit_rabi_lineshape(const std::vector<double>& f_khz,
                                       const std::vector<double>& p0_data,
                                       double t_pulse_us) {
  const int n = static_cast<int>(f_khz.size());
  if (n < 5) throw std::invalid_argument("fit_rabi_lineshape: need >= 5 samples");
  int imax = 0;
  double ymin = p0_data[0], ymax = p0_data[0];
  for (int i = 1; i < n; ++i) {
    if (p0_data[i] > p0_data[imax]) imax = i;
    ymin = std::min(ymin, p0_data[i]);
    ymax = std::max(ymax, p0_data[i]);
  }

  const ModelFn model = [t_pulse_us](double f, const Eigen::VectorXd& p) {
    const double d = f - p(0);
    const double w = std::exp(p(1));
    const double gen = std::sqrt(w * w + d * d);
    const double s = std::sin(kPi * 1e-3 * gen * t_pulse_us);
    return p(3) + p(2) * (w * w) / (gen * gen) * s * s;
  };
  Eigen::VectorXd seed(4);
  seed << f_khz[imax], std::log(500.0 / t_pulse_us), std::max(ymax - ymin, 1e-3), ymin;
  LmResult lm = fit_lm(model, f_khz, p0_data, seed);

  LineshapeFit out;
  out.center_khz = lm.params(0);
  out.rabi_khz = std::exp(lm.params(1));
  out.amplitude = lm.params(2);
  out.offset = lm.params(3);
  out.center_err_khz = lm.uncertainties(0);
  out.chi2 = lm.chi2;
  out.converged = lm.converged;
  return out;
}

struct FringeFit {
  double amplitude = 0.0;
  double center_hk = 0.0;
  double sigma_hk = 0.0;
  double visibility = 0.0; // modulation depth in [0, 1]
  double period_hk = 2.0;  // fringe period in photon-recoil units
  double phase_rad = 0.0;
  double offset = 0.0;
  double visibility_err = 0.0;
  double period_err_hk = 0.0;
  double phase_err_rad = 0.0;
  double chi2 = 0.0;
  bool converged = false;
};

// Gaussian envelope with periodic fringes (momentum in photon-recoil units):
// y(p) = b + A exp(-(p-p0)^2 / 2 s^2) (1 + v cos(2 pi p / P + phi)); v is kept
// in [0, 1] by a logistic transform, s and P positive by exponential ones.
// The period seeds at two recoils, the spacing of a half-wavelength pattern.
inline FringeFit fit_momentum_fringes(const std::vector<double>& p_hk,
                                      const std::vector<double>& y) {
  const int n = static_cast<int>(p_hk.size());
  if (n < 8) throw std::invalid_argument("fit_momentum_fringes: need >= 8 samples");
  double ymax = y[0], ysum = 0.0, psum = 0.0, p2sum = 0.0;
  for (int i = 0; i < n; ++i) {
    ymax = std::max(ymax, y[i]);
    const double w = std::max(y[i], 0.0);
    ysum += w;
    psum += w * p_hk[i];
    p2sum += w * p_hk[i] * p_hk[i];
  }
  const double c_seed = ysum > 0.0 ? psum / ysum : 0.0;
  const double var = ysum > 0.0 ? std::max(p2sum / ysum - c_seed * c_seed, 1e-4) : 1.0;

  const ModelFn model = [](double p, const Eigen::VectorXd& q) {
    const double s = std::exp(q(2));
    const double v = 1.0 / (1.0 + std::exp(-q(3)));
    const double period = std::exp(q(6));
    const double u = (p - q(1)) / s;
    return q(5) + q(0) * std::exp(-0.5 * u * u) * (1.0 + v * std::cos(kTwoPi * p / period + q(4)));
  };

  LmResult best;
  bool have = false;
  for (double phase0 : {0.0, kPi / 2, kPi, -kPi / 2}) {
    Eigen::VectorXd seed(7);
    seed << 0.6 * ymax, c_seed, 0.5 * std::log(var), 0.0, phase0, 0.0, std::log(2.0);
    LmResult lm = fit_lm(model, p_hk, y, seed);
    if (!have || lm.chi2 < best.chi2) {
      best = lm;
      have = true;
    }
  }

  FringeFit out;
  out.amplitude = best.params(0);
  out.center_hk = best.params(1);
  out.sigma_hk = std::exp(best.params(2));
  const double w = best.params(3);
  out.visibility = 1.0 / (1.0 + std::exp(-w));
  out.period_hk = std::exp(best.params(6));
  out.phase_rad = std::remainder(best.params(4), kTwoPi);
  out.offset = best.params(5);
  const double dv_dw = out.visibility * (1.0 - out.visibility);
  out.visibility_err = best.uncertainties(3) * dv_dw;
  out.period_err_hk = best.uncertainties(6) * out.period_hk;
  out.phase_err_rad = best.uncertainties(4);
  out.chi2 = best.chi2;
  out.converged = best.converged;
  return out;
}

} // namespace dwell
