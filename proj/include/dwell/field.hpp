#pragma once

// Four-beam folded lattice field synthesis and the resulting spin potentials.
// The in-plane polarization components form a lambda/2-period intensity
// lattice, the vertical components a lambda-period one whose position and
// temporal phase are set by per-beam polarization phases.

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "constants.hpp"

namespace dwell {

using complexd = std::complex<double>;

struct Beam {
  Eigen::Vector3d khat;   // propagation direction, unit
  double amplitude = 0.0; // field amplitude; amplitude 1 == one trap beam
  Eigen::Vector3cd jones; // unit polarization vector, orthogonal to khat
  double phase = 0.0;     // carrier phase at the origin, rad
};

using BeamSet = std::vector<Beam>;

inline void validate_beams(const BeamSet& beams) {
  for (size_t i = 0; i < beams.size(); ++i) {
    const Beam& b = beams[i];
    if (std::abs(b.khat.norm() - 1.0) > 1e-9)
      throw std::invalid_argument("beam " + std::to_string(i) + ": khat is not a unit vector");
    if (std::abs(b.jones.norm() - 1.0) > 1e-9)
      throw std::invalid_argument("beam " + std::to_string(i) + ": jones is not a unit vector");
    if (std::abs(b.jones.dot(b.khat.cast<complexd>())) > 1e-9)
      throw std::invalid_argument("beam " + std::to_string(i) + ": jones not transverse to khat");
    if (b.amplitude < 0.0)
      throw std::invalid_argument("beam " + std::to_string(i) + ": amplitude must be >= 0");
  }
}

// Complex field at position r (lambda units); all beams share |k| = 2 pi / lambda.
inline Eigen::Vector3cd synthesize_field(const BeamSet& beams, const Eigen::Vector3d& r_lambda) {
  Eigen::Vector3cd e = Eigen::Vector3cd::Zero();
  for (const Beam& b : beams) {
    const double ph = kTwoPi * b.khat.dot(r_lambda) + b.phase;
    e += b.amplitude * std::polar(1.0, ph) * b.jones;
  }
  return e;
}

// U_s = -alpha_s |E|^2 / 4, kHz
inline double scalar_potential(const Eigen::Vector3cd& e, const PhysicalConstants& c) {
  return -0.25 * c.alpha_s_khz * e.squaredNorm();
}

// Vector light shift as an effective magnetic field, (alpha_v/4) i(E* x E),
// expressed in kHz of Zeeman shift per unit mF.  The cross product of a field
// with its conjugate is purely imaginary, so i(E* x E) is real; the residue
// check guards the implementation.
inline Eigen::Vector3d effective_field(const Eigen::Vector3cd& e, const PhysicalConstants& c) {
  const Eigen::Vector3cd cross = e.conjugate().cross(e);
  const Eigen::Vector3cd vec = complexd(0.0, 1.0) * cross;
  const double scale = vec.norm();
  if (scale > 0.0 && vec.imag().norm() > 1e-12 * scale)
    throw std::runtime_error("effective_field: non-real i(E* x E)");
  return 0.25 * c.alpha_v_khz * vec.real();
}

// |B0 + B_eff| in tesla; B_eff enters through gF uB.
inline double total_field_t(const Eigen::Vector3cd& e, const BiasField& b, const PhysicalConstants& c) {
  const Eigen::Vector3d beff_khz = effective_field(e, c);
  const Eigen::Vector3d b0 = Eigen::Vector3d(b.dir_x, b.dir_y, b.dir_z) * b.magnitude_t;
  const Eigen::Vector3d btot = b0 + beff_khz * 1e3 / c.gf_mub_hz_per_t;
  return btot.norm();
}

// Level energy U_s + mF gF uB |B| + q mF^2 |B|^2, kHz
inline double spin_potential(const Eigen::Vector3cd& e, const BiasField& b, int m_f,
                             const PhysicalConstants& c) {
  const double us = scalar_potential(e, c);
  if (m_f == 0) return us;
  const double bt = total_field_t(e, b, c);
  return us + 1e-3 * (m_f * c.gf_mub_hz_per_t * bt +
                      m_f * m_f * c.q_quad_hz_per_t2 * bt * bt);
}

// |-1> -> |0> transition frequency of the bare bias field (no light), kHz
inline double bare_transition_khz(const BiasField& b, const PhysicalConstants& c) {
  const double bt = b.magnitude_t;
  return 1e-3 * (c.gf_mub_hz_per_t * bt - c.q_quad_hz_per_t2 * bt * bt);
}

struct LatticeControls {
  double v_half_er = 0.0;   // lambda/2-lattice depth, recoil units
  double v_lambda_er = 0.0; // lambda-lattice depth, recoil units
  double dx = -0.5;         // lambda-lattice offset, lambda units, in [-1, 0]
  double pol_phase = 0.0;   // temporal phase between vertical and in-plane light, rad
  double total_scale = 1.0; // overall intensity factor
};

inline void validate_controls(const LatticeControls& lc) {
  if (!(lc.v_half_er >= 0.0))
    throw std::invalid_argument("controls.v_half: must be >= 0");
  if (!(lc.v_lambda_er >= 0.0))
    throw std::invalid_argument("controls.v_lambda: must be >= 0");
  if (!(lc.dx >= -1.0 && lc.dx <= 0.0))
    throw std::invalid_argument("controls.dx: must lie in [-1, 0]");
  if (!(lc.total_scale >= 0.0))
    throw std::invalid_argument("controls.total_scale: must be >= 0");
}

// Map lattice controls to the four-beam set.  All beams share one
// polarization angle theta; depth ratio fixes theta, total depth fixes the
// amplitude, dx fixes the vertical standing-wave position x_v = 1 + dx, and
// pol_phase is the common temporal phase of the vertical components.
//   in-plane  E = 2 a cos(th) [cos(2 pi y) x - sin(2 pi x) y]
//   vertical  E_z = 2 a sin(th) e^{i pol_phase} [cos(2 pi (x - x_v)) + cos(2 pi y)]
// Potential minima of the lambda/2 lattice sit at x = 1/4 and 3/4; dx = -0.5
// puts the lambda-lattice minimum exactly between them.
inline BeamSet controls_to_beams(const LatticeControls& lc, const PhysicalConstants& c) {
  validate_controls(lc);
  const double er = c.recoil_khz();
  const double vh = lc.v_half_er * er;   // kHz
  const double vl = lc.v_lambda_er * er; // kHz
  const double theta = std::atan2(std::sqrt(vl), 2.0 * std::sqrt(vh));
  const double amp = std::sqrt(lc.total_scale * (vh + 0.25 * vl) / c.alpha_s_khz);
  const double xv = 1.0 + lc.dx;
  const double kxv = kTwoPi * xv;

  const Eigen::Vector3d ex(1, 0, 0), ey(0, 1, 0);
  const double ct = std::cos(theta), st = std::sin(theta);
  auto jones = [&](const Eigen::Vector3d& inplane, double zeta) {
    Eigen::Vector3cd j = inplane.cast<complexd>() * ct;
    j(2) = st * std::polar(1.0, zeta);
    return j;
  };

  BeamSet beams(4);
  beams[0] = {ex, amp, jones(ey, lc.pol_phase - kxv - kPi / 2), kPi / 2};
  beams[1] = {-ex, amp, jones(ey, lc.pol_phase + kxv + kPi / 2), -kPi / 2};
  beams[2] = {ey, amp, jones(ex, lc.pol_phase), 0.0};
  beams[3] = {-ey, amp, jones(ex, lc.pol_phase), 0.0};
  return beams;
}

struct SpinPotentialGrid {
  int n = 0;
  std::vector<double> x;              // lambda units, x_j = j/n over one cell
  std::vector<double> v_m0_khz;       // scalar potential
  std::vector<double> v_mminus1_khz;  // full mF = -1 potential incl. Zeeman
  std::vector<double> beff_proj_khz;  // effective field projected on the bias direction
};

// Samples the y = 0 cut of one unit cell.  Per-beam carrier phases are cached
// so the per-point work is a handful of complex multiplies; beams whose khat
// has a non-integer x component fall back to a direct evaluation.
class CutSampler {
public:
  explicit CutSampler(int n) : n_(n), eikx_(n) {
    for (int j = 0; j < n_; ++j) eikx_[j] = std::polar(1.0, kTwoPi * j / n_);
  }

  int n() const { return n_; }

  void sample(const BeamSet& beams, const BiasField& b, const PhysicalConstants& c,
              SpinPotentialGrid& out) const {
    out.n = n_;
    out.x.resize(n_);
    out.v_m0_khz.resize(n_);
    out.v_mminus1_khz.resize(n_);
    out.beff_proj_khz.resize(n_);
    field_.assign(n_, Eigen::Vector3cd::Zero());

    for (const Beam& bm : beams) {
      const double kx = bm.khat(0);
      const complexd base = bm.amplitude * std::polar(1.0, bm.phase);
      const int ikx = static_cast<int>(std::lround(kx));
      if (std::abs(kx - ikx) < 1e-12 && std::abs(ikx) <= 1) {
        for (int j = 0; j < n_; ++j) {
          complexd ph = base;
          if (ikx == 1) ph *= eikx_[j];
          else if (ikx == -1) ph *= std::conj(eikx_[j]);
          field_[j] += ph * bm.jones;
        }
      } else {
        for (int j = 0; j < n_; ++j) {
          const double x = static_cast<double>(j) / n_;
          field_[j] += base * std::polar(1.0, kTwoPi * kx * x) * bm.jones;
        }
      }
    }

    const Eigen::Vector3d bdir(b.dir_x, b.dir_y, b.dir_z);
    const Eigen::Vector3d b0 = bdir * b.magnitude_t;
    for (int j = 0; j < n_; ++j) {
      const Eigen::Vector3cd& e = field_[j];
      out.x[j] = static_cast<double>(j) / n_;
      const double us = -0.25 * c.alpha_s_khz * e.squaredNorm();
      out.v_m0_khz[j] = us;
      const Eigen::Vector3cd cross = e.conjugate().cross(e);
      const Eigen::Vector3d beff = 0.25 * c.alpha_v_khz * (complexd(0, 1) * cross).real();
      out.beff_proj_khz[j] = beff.dot(bdir);
      const double bt = (b0 + beff * 1e3 / c.gf_mub_hz_per_t).norm();
      out.v_mminus1_khz[j] =
          us + 1e-3 * (-c.gf_mub_hz_per_t * bt + c.q_quad_hz_per_t2 * bt * bt);
    }
  }

private:
  int n_;
  std::vector<complexd> eikx_;
  mutable std::vector<Eigen::Vector3cd> field_;
};

inline SpinPotentialGrid sample_cut(const BeamSet& beams, const BiasField& b, int n,
                                    const PhysicalConstants& c) {
  if (n < 2) throw std::invalid_argument("sample_cut: n must be >= 2");
  SpinPotentialGrid g;
  CutSampler(n).sample(beams, b, c, g);
  return g;
}

struct MeasuredLattice {
  double v_half_er = 0.0;
  double v_lambda_er = 0.0;
  double dx = 0.0; // NaN when no vertical light is present
};

// Polarization-resolved depth/offset extraction on the y = 0 cut: the
// in-plane intensity gives the lambda/2 depth, the vertical intensity the
// lambda depth and its offset (intensity maximum = potential minimum).
inline MeasuredLattice measure_lattice(const BeamSet& beams, const PhysicalConstants& c,
                                       int n = 4096) {
  double ip_min = 1e300, ip_max = -1e300, z_min = 1e300, z_max = -1e300;
  std::vector<double> iz(n);
  int jmax = 0;
  for (int j = 0; j < n; ++j) {
    const Eigen::Vector3cd e = synthesize_field(beams, {static_cast<double>(j) / n, 0.0, 0.0});
    const double ip = std::norm(e(0)) + std::norm(e(1));
    const double z = std::norm(e(2));
    iz[j] = z;
    ip_min = std::min(ip_min, ip);
    ip_max = std::max(ip_max, ip);
    z_min = std::min(z_min, z);
    if (z > z_max) { z_max = z; jmax = j; }
  }
  const double er = c.recoil_khz();
  MeasuredLattice m;
  m.v_half_er = 0.25 * c.alpha_s_khz * (ip_max - ip_min) / er;
  m.v_lambda_er = 0.25 * c.alpha_s_khz * (z_max - z_min) / er;
  if (m.v_lambda_er * er < 1e-9) {
    m.dx = std::nan("");
    return m;
  }
  // parabolic refinement of the vertical intensity maximum
  const double ym = iz[(jmax + n - 1) % n], y0 = iz[jmax], yp = iz[(jmax + 1) % n];
  const double denom = ym - 2.0 * y0 + yp;
  double shift = 0.0;
  if (std::abs(denom) > 1e-300) shift = 0.5 * (ym - yp) / denom;
  double xv = (jmax + shift) / n;
  double dx = xv - 1.0;
  while (dx < -1.0) dx += 1.0;
  while (dx > 0.0) dx -= 1.0;
  m.dx = dx;
  return m;
}

} // namespace dwell
