#pragma once

// Monte Carlo two-level spectroscopy with three noise channels: a per-shot
// detuning offset, a detuning random walk during each shot (common to all
// atoms of the shot), and a static per-atom spread.  Pulses are exact 2x2
// unitaries, substepped only when the walk is active; free evolution samples
// the walk's end point and time integral jointly, which is exact.

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "constants.hpp"

namespace dwell {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t seed, uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream + 0x517CC1B727220A95ULL));
}

// Deterministic across platforms: raw 64-bit draws are mapped to doubles and
// normals by hand instead of through the distribution templates, whose output
// is implementation-defined.
class Rng {
public:
  explicit Rng(uint64_t seed) : state_(splitmix64(seed)) {}

  uint64_t next_u64() {
    state_ = splitmix64(state_ + 0x2545F4914F6CDD1DULL);
    return state_;
  }
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(kTwoPi * u2);
    have_spare_ = true;
    return r * std::cos(kTwoPi * u2);
  }

private:
  uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

struct NoiseModel {
  double sigma_shot_khz = 0.0;    // per-shot static detuning offset
  double walk_d_khz2_us = 0.0;    // detuning diffusion during a shot, kHz^2 / us
  double sigma_spatial_khz = 0.0; // static per-atom spread within a shot
};

struct SeqStep {
  bool is_pulse = false;
  double dur_us = 0.0;
  double rabi_khz = 0.0;
  double phase_rad = 0.0;

  static SeqStep pulse(double dur_us, double rabi_khz, double phase_rad = 0.0) {
    return {true, dur_us, rabi_khz, phase_rad};
  }
  static SeqStep delay(double dur_us) { return {false, dur_us, 0.0, 0.0}; }
};

using Sequence = std::vector<SeqStep>;

inline Sequence make_rabi(double t_us, double rabi_khz) {
  return {SeqStep::pulse(t_us, rabi_khz)};
}

// pi/2 -- T -- pi/2(theta); pulse area set by duration * rabi
inline Sequence make_ramsey(double gap_us, double t_pi2_us, double rabi_khz, double theta_rad) {
  return {SeqStep::pulse(t_pi2_us, rabi_khz), SeqStep::delay(gap_us),
          SeqStep::pulse(t_pi2_us, rabi_khz, theta_rad)};
}

// pi/2 -- T/2 -- pi -- T/2 -- pi/2(theta)
inline Sequence make_echo(double gap_us, double t_pi2_us, double rabi_khz, double theta_rad) {
  return {SeqStep::pulse(t_pi2_us, rabi_khz), SeqStep::delay(0.5 * gap_us),
          SeqStep::pulse(2.0 * t_pi2_us, rabi_khz), SeqStep::delay(0.5 * gap_us),
          SeqStep::pulse(t_pi2_us, rabi_khz, theta_rad)};
}

struct TwoLevel {
  complexd cm1{1.0, 0.0}; // mF = -1 amplitude (initial state)
  complexd c0{0.0, 0.0};  // mF = 0 amplitude
};

// Exact propagator of H = [[d/2, (W/2)e^{-i phi}], [(W/2)e^{i phi}, -d/2]]
// (basis cm1, c0) over dt; d, W in kHz.
inline void apply_pulse_step(TwoLevel& s, double delta_khz, double rabi_khz, double phase_rad,
                             double dt_us) {
  const double half_d = 0.5 * delta_khz;
  const complexd coup = 0.5 * rabi_khz * std::polar(1.0, -phase_rad);
  const double r = std::hypot(half_d, std::abs(coup));
  const double a = kPhaseKhzUs * r * dt_us;
  double cr = std::cos(a), snc;
  if (r > 0.0) snc = std::sin(a) / r;
  else { cr = 1.0; snc = kPhaseKhzUs * dt_us; }
  const complexd i_snc(0.0, snc);
  const complexd cm1 = s.cm1, c0 = s.c0;
  s.cm1 = (cr - i_snc * half_d) * cm1 - i_snc * coup * c0;
  s.c0 = -i_snc * std::conj(coup) * cm1 + (cr + i_snc * half_d) * c0;
}

// Free evolution by an accumulated phase alpha = 2 pi 1e-3 * integral(delta dt).
inline void apply_free_phase(TwoLevel& s, double alpha_rad) {
  s.cm1 *= std::polar(1.0, -0.5 * alpha_rad);
  s.c0 *= std::polar(1.0, +0.5 * alpha_rad);
}

struct EnsembleOptions {
  int shots = 200;
  int atoms = 16;       // atoms per shot; spatial spread averages within a shot
  NoiseModel noise;
  uint64_t seed = 1;
  double substep_us = 1.0; // pulse substep when the walk is active
};

struct SweepResult {
  std::vector<double> axis;      // whatever the sweep varied
  std::vector<double> mean_p0;   // shot- and atom-averaged |c0|^2 per point
  Eigen::MatrixXd per_shot;      // shots x points, atom-averaged per shot
};

// Runs every sequence of the sweep against the same per-shot noise
// realizations (common random numbers: the RNG is re-seeded from (seed, shot)
// for every point, so a shot is one noise realization viewed under each
// sequence).  detuning_khz is nu_atom - f_drive before noise.
inline SweepResult run_sweep(double detuning_khz, const std::vector<Sequence>& sequences,
                             const std::vector<double>& axis, const EnsembleOptions& opt) {
  if (sequences.size() != axis.size())
    throw std::invalid_argument("run_sweep: axis/sequence size mismatch");
  if (opt.shots < 1 || opt.atoms < 1)
    throw std::invalid_argument("run_sweep: shots and atoms must be >= 1");
  const NoiseModel& nm = opt.noise;
  const int npts = static_cast<int>(sequences.size());

  SweepResult out;
  out.axis = axis;
  out.mean_p0.assign(npts, 0.0);
  out.per_shot = Eigen::MatrixXd::Zero(opt.shots, npts);

  std::vector<TwoLevel> atoms(opt.atoms);
  std::vector<double> delta_atom(opt.atoms);

  for (int shot = 0; shot < opt.shots; ++shot) {
    for (int pt = 0; pt < npts; ++pt) {
      Rng rng(derive_seed(opt.seed, static_cast<uint64_t>(shot)));
      const double delta_shot = nm.sigma_shot_khz * rng.normal();
      for (int a = 0; a < opt.atoms; ++a) {
        delta_atom[a] = nm.sigma_spatial_khz * rng.normal();
        atoms[a] = TwoLevel{};
      }

      double walk = 0.0; // current walk value, kHz, common to the shot
      for (const SeqStep& step : sequences[pt]) {
        if (step.dur_us <= 0.0) continue;
        if (step.is_pulse) {
          if (nm.walk_d_khz2_us > 0.0) {
            const int nsub =
                std::max(1, static_cast<int>(std::ceil(step.dur_us / opt.substep_us - 1e-9)));
            const double dt = step.dur_us / nsub;
            for (int ss = 0; ss < nsub; ++ss) {
              walk += std::sqrt(nm.walk_d_khz2_us * dt) * rng.normal();
              for (int a = 0; a < opt.atoms; ++a)
                apply_pulse_step(atoms[a], detuning_khz + delta_shot + delta_atom[a] + walk,
                                 step.rabi_khz, step.phase_rad, dt);
            }
          } else {
            for (int a = 0; a < opt.atoms; ++a)
              apply_pulse_step(atoms[a], detuning_khz + delta_shot + delta_atom[a],
                               step.rabi_khz, step.phase_rad, step.dur_us);
          }
        } else {
          const double tt = step.dur_us;
          double walk_integral = walk * tt;
          if (nm.walk_d_khz2_us > 0.0) {
            // joint draw of (W_end - W_start, integral of W - W_start)
            const double x1 = rng.normal(), x2 = rng.normal();
            const double sd = std::sqrt(nm.walk_d_khz2_us);
            walk_integral += sd * std::pow(tt, 1.5) * (0.5 * x1 + x2 / (2.0 * std::sqrt(3.0)));
            walk += sd * std::sqrt(tt) * x1;
          }
          for (int a = 0; a < opt.atoms; ++a)
            apply_free_phase(atoms[a], kPhaseKhzUs * ((detuning_khz + delta_shot + delta_atom[a]) * tt +
                                                      walk_integral));
        }
      }

      double p0 = 0.0;
      for (const TwoLevel& a : atoms) p0 += std::norm(a.c0);
      p0 /= opt.atoms;
      out.per_shot(shot, pt) = p0;
      out.mean_p0[pt] += p0;
    }
  }
  for (double& m : out.mean_p0) m /= opt.shots;
  return out;
}

// Least-squares sinusoid p(theta) = c + a cos(theta) + b sin(theta); returns
// the peak-to-peak modulation 2 sqrt(a^2 + b^2) (an ideal fringe spans 1).
inline double sinusoid_contrast(const std::vector<double>& thetas, const std::vector<double>& p) {
  const int n = static_cast<int>(thetas.size());
  if (n < 3 || p.size() != thetas.size())
    throw std::invalid_argument("sinusoid_contrast: need >= 3 samples");
  Eigen::MatrixXd m(n, 3);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    m(i, 0) = 1.0;
    m(i, 1) = std::cos(thetas[i]);
    m(i, 2) = std::sin(thetas[i]);
    y(i) = p[i];
  }
  const Eigen::Vector3d sol = (m.transpose() * m).ldlt().solve(m.transpose() * y);
  return 2.0 * std::hypot(sol(1), sol(2));
}

struct FringeContrast {
  double mean = 0.0;     // contrast of the shot-averaged fringe
  double per_shot = 0.0; // shot-averaged contrast of single-shot fringes
};

// Both contrast observables from a theta scan (axis = analysis phases).
inline FringeContrast contrast_from_theta_scan(const SweepResult& scan) {
  FringeContrast out;
  out.mean = sinusoid_contrast(scan.axis, scan.mean_p0);
  const int shots = static_cast<int>(scan.per_shot.rows());
  std::vector<double> row(scan.axis.size());
  for (int s = 0; s < shots; ++s) {
    for (size_t i = 0; i < row.size(); ++i) row[i] = scan.per_shot(s, static_cast<int>(i));
    out.per_shot += sinusoid_contrast(scan.axis, row);
  }
  out.per_shot /= shots;
  return out;
}

// First 1/e crossing of y(t)/y(0), log-interpolated; +inf when never reached.
inline double decay_time_1e(const std::vector<double>& t, const std::vector<double>& y) {
  if (t.size() != y.size() || t.size() < 2)
    throw std::invalid_argument("decay_time_1e: need matching series, >= 2 points");
  const double target = y.front() / std::exp(1.0);
  for (size_t i = 1; i < y.size(); ++i) {
    if (y[i] <= target) {
      const double y0 = std::max(y[i - 1], 1e-12), y1 = std::max(y[i], 1e-12);
      if (y0 <= target) return t[i - 1];
      const double f = (std::log(y0) - std::log(target)) / (std::log(y0) - std::log(y1));
      return t[i - 1] + f * (t[i] - t[i - 1]);
    }
  }
  return std::numeric_limits<double>::infinity();
}

// Noise parameters reproducing the reference coherence times (all in kHz and
// kHz^2/us): shot-averaged Ramsey contrast 1/e at 100 us, single-shot Ramsey
// contrast 1/e at 500 us, echo 1/e at 400 us from the walk alone, and no
// echo decay out to >= 1.2 ms once the walk is off.
inline NoiseModel calibrated_noise() {
  NoiseModel nm;
  nm.sigma_spatial_khz = 0.45016; // single-shot Ramsey fringe 1/e at 500 us
  nm.walk_d_khz2_us = 4.7495e-3;  // echo 1/e at 400 us: t = (12/(k^2 D))^(1/3)
  nm.sigma_shot_khz = 2.1322;     // dominates the shot-averaged Ramsey 1/e at 100 us
  return nm;
}

} // namespace dwell
