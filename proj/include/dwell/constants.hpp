#pragma once

// Unit conventions used throughout:
//   energy/frequency  kHz      (always E/h, never angular)
//   time              microseconds
//   length            lattice wavelengths (lambda)
//   magnetic field    tesla
// Phase accumulated by a level at f kHz over t us is 2*pi*1e-3*f*t.

#include <cmath>

namespace dwell {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
// radians per (kHz * us)
inline constexpr double kPhaseKhzUs = kTwoPi * 1.0e-3;

inline constexpr double kPlanck = 6.62607015e-34;     // J s
inline constexpr double kSpeedOfLight = 2.99792458e8; // m/s

struct Polarizabilities {
  double alpha_s_khz; // scalar light shift per unit intensity, kHz; U_s = -alpha_s |E|^2 / 4
  double alpha_v_khz; // vector coefficient, kHz; B_eff = (alpha_v/4) i(E* x E), in Hz per unit mF
};

// Ground-state light-shift coefficients from the two-line (D1/D2) model.
// Scalar weights (1/d1 + 2/d2), vector weights (1/d2 - 1/d1) * |gF|, with
// per-line prefactors pi c^2 Gamma / (2 w0^3).  Intensity unit: the peak
// intensity of one trap beam (power_w focused to a 1/e^2 radius waist_m), so
// Beam::amplitude == 1 corresponds to that single-beam intensity.
inline Polarizabilities derive_polarizabilities(double lambda_m, double power_w, double waist_m) {
  const double lambda_d1 = 794.979e-9, gamma_d1 = kTwoPi * 5.7500e6;
  const double lambda_d2 = 780.241e-9, gamma_d2 = kTwoPi * 6.0666e6;
  const double g_f = 0.5; // |gF| for the lower hyperfine ground manifold

  const double nu = kSpeedOfLight / lambda_m;
  const double nu1 = kSpeedOfLight / lambda_d1;
  const double nu2 = kSpeedOfLight / lambda_d2;
  const double d1 = kTwoPi * (nu - nu1); // rad/s detunings
  const double d2 = kTwoPi * (nu - nu2);
  const double w1 = kTwoPi * nu1;
  const double w2 = kTwoPi * nu2;
  const double c1 = kPi * kSpeedOfLight * kSpeedOfLight * gamma_d1 / (2.0 * w1 * w1 * w1);
  const double c2 = kPi * kSpeedOfLight * kSpeedOfLight * gamma_d2 / (2.0 * w2 * w2 * w2);

  const double intensity = 2.0 * power_w / (kPi * waist_m * waist_m); // W/m^2 at beam center
  const double scalar_j = intensity * (c1 / d1 + 2.0 * c2 / d2);      // J at unit |E|^2
  const double vector_j = intensity * g_f * (c2 / d2 - c1 / d1);      // J per mF at unit sigma+ intensity

  return {4.0 * std::abs(scalar_j) / kPlanck * 1e-3,
          4.0 * std::abs(vector_j) / kPlanck * 1e-3};
}

struct PhysicalConstants {
  double lambda_m = 803.0e-9;       // trap light wavelength
  double mass_kg = 1.4431607e-25;   // 87 amu alkali atom
  double beam_power_w = 0.100;      // single-beam power behind the fold
  double beam_waist_m = 170.0e-6;   // 1/e^2 intensity radius at the atoms
  // Linear Zeeman coefficient, Hz/T.  Chosen so the |-1> -> |0> resonance of
  // the bare bias field sits at 34.146 MHz (34.446 MHz linear - 300 kHz
  // quadratic); the textbook gF uB/h is ~2.5% lower, the difference absorbs
  // the field calibration of the apparatus.
  double gf_mub_hz_per_t = 7.176250e9;
  // Quadratic Zeeman coefficient, Hz/T^2: 300 kHz at the default 4.8 mT.
  double q_quad_hz_per_t2 = 1.3020833e10;
  double alpha_s_khz;
  double alpha_v_khz;

  PhysicalConstants() {
    const Polarizabilities p = derive_polarizabilities(lambda_m, beam_power_w, beam_waist_m);
    alpha_s_khz = p.alpha_s_khz;
    alpha_v_khz = p.alpha_v_khz;
  }

  // single-photon recoil energy h/(2 m lambda^2), kHz
  double recoil_khz() const {
    return kPlanck / (2.0 * mass_kg * lambda_m * lambda_m) * 1e-3;
  }
};

struct BiasField {
  // direction (1,-1,0)/sqrt(2) in the lattice frame, magnitude 4.8 mT
  double dir_x = 0.70710678118654752440;
  double dir_y = -0.70710678118654752440;
  double dir_z = 0.0;
  double magnitude_t = 4.8e-3;
};

} // namespace dwell
