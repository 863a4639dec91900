#pragma once

// Single-particle stationary states of a periodic 1D potential (one unit
// cell, q = 0), site localization in a double well, and the per-site RF
// transition table.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "constants.hpp"
#include "fft.hpp"
#include "field.hpp"

namespace dwell {

enum class KineticScheme { spectral, fd4 };

// Dense real-symmetric Hamiltonian on n grid points spanning one wavelength.
// spectral: exact plane-wave kinetic energy T_m = m^2 E_R applied as a
// symmetric circulant.  fd4: 4th-order finite-difference Laplacian,
// -E_R / (4 pi^2) d^2/dx^2, kept as an independent cross-check.
inline Eigen::MatrixXd build_hamiltonian(const std::vector<double>& v_khz, double recoil_khz,
                                         KineticScheme scheme = KineticScheme::spectral) {
  const int n = static_cast<int>(v_khz.size());
  if (n < 8) throw std::invalid_argument("build_hamiltonian: need at least 8 grid points");
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);

  if (scheme == KineticScheme::spectral) {
    std::vector<double> row(n, 0.0);
    for (int j = 0; j < n; ++j) {
      const double m = momentum_index(j, n);
      const double t = m * m * recoil_khz;
      for (int d = 0; d < n; ++d) row[d] += t * std::cos(kTwoPi * m * d / n) / n;
    }
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) h(i, j) = row[(j - i + n) % n];
  } else {
    const double hgrid = 1.0 / n;
    const double pref = recoil_khz / (4.0 * kPi * kPi) / (hgrid * hgrid);
    const double c0 = 2.5 * pref, c1 = -4.0 / 3.0 * pref, c2 = 1.0 / 12.0 * pref;
    for (int i = 0; i < n; ++i) {
      h(i, i) += c0;
      h(i, (i + 1) % n) += c1;
      h(i, (i + n - 1) % n) += c1;
      h(i, (i + 2) % n) += c2;
      h(i, (i + n - 2) % n) += c2;
    }
  }
  for (int i = 0; i < n; ++i) h(i, i) += v_khz[i];
  return h;
}

struct Eigenpairs {
  Eigen::VectorXd energies_khz;  // ascending
  Eigen::MatrixXd states;        // column k: psi_k on the grid, sum |psi|^2 / n = 1
};

inline Eigenpairs lowest_eigenpairs(const Eigen::MatrixXd& h, int k) {
  const int n = static_cast<int>(h.rows());
  if (k < 1 || k > n) throw std::invalid_argument("lowest_eigenpairs: bad k");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("lowest_eigenpairs: eigensolver failed");
  Eigenpairs out;
  out.energies_khz = solver.eigenvalues().head(k);
  out.states = solver.eigenvectors().leftCols(k) * std::sqrt(static_cast<double>(n));
  for (int c = 0; c < k; ++c) {
    int imax = 0;
    out.states.col(c).cwiseAbs().maxCoeff(&imax);
    if (out.states(imax, c) < 0.0) out.states.col(c) = -out.states.col(c);
  }
  return out;
}

struct WellSplit {
  int i_left = 0, i_right = 0;      // grid indices of the two deepest minima
  int s_inner = 0, s_outer = 0;     // barrier indices: between wells / around the cell
  double barrier_khz = 0.0;         // lower of the two maxima separating the wells
  std::vector<char> left_mask;      // 1 where the point belongs to the left half
};

// Locates the two deepest local minima of a cyclic potential and the maxima
// separating them; "left" is the well at smaller x.
inline WellSplit split_wells(const std::vector<double>& v_khz) {
  const int n = static_cast<int>(v_khz.size());
  std::vector<int> minima;
  for (int i = 0; i < n; ++i) {
    const double vm = v_khz[(i + n - 1) % n], v0 = v_khz[i], vp = v_khz[(i + 1) % n];
    if (v0 < vm && v0 <= vp) minima.push_back(i);
  }
  if (minima.size() < 2)
    throw std::runtime_error("split_wells: fewer than two potential wells");
  std::stable_sort(minima.begin(), minima.end(),
                   [&](int a, int b) { return v_khz[a] < v_khz[b]; });
  int a = minima[0], b = minima[1];
  WellSplit w;
  w.i_left = std::min(a, b);
  w.i_right = std::max(a, b);

  auto segment_max = [&](int from, int to) { // cyclic walk from->to, exclusive ends
    int best = -1;
    double vbest = -1e300;
    for (int i = (from + 1) % n; i != to; i = (i + 1) % n)
      if (v_khz[i] > vbest) { vbest = v_khz[i]; best = i; }
    if (best < 0) throw std::runtime_error("split_wells: empty segment between wells");
    return best;
  };
  w.s_inner = segment_max(w.i_left, w.i_right);
  w.s_outer = segment_max(w.i_right, w.i_left);
  w.barrier_khz = std::min(v_khz[w.s_inner], v_khz[w.s_outer]);

  w.left_mask.assign(n, 0);
  for (int i = (w.s_outer + 1) % n; i != w.s_inner; i = (i + 1) % n) w.left_mask[i] = 1;
  if (!w.left_mask[w.i_left])
    for (auto& m : w.left_mask) m = !m;
  return w;
}

struct LocalizedSites {
  Eigen::VectorXd left, right;      // maximally localized combinations of the lowest doublet
  double energy_left_khz = 0.0;     // <L|H|L>
  double energy_right_khz = 0.0;
  double localization = 0.0;        // left-half weight of the left state
  double gap_khz = 0.0;             // doublet splitting E1 - E0
};

// Rotates the lowest doublet into maximally site-localized states by
// diagonalizing the left-half projector restricted to the doublet.  Throws if
// the rotation does not localize, e.g. when the barrier is below both site
// energies and the doublet is a pair of delocalized vibrational states.
inline LocalizedSites localize_sites(const Eigenpairs& pairs, const Eigen::MatrixXd& h,
                                     const std::vector<double>& v_khz) {
  if (pairs.states.cols() < 2)
    throw std::invalid_argument("localize_sites: need at least two eigenpairs");
  const int n = static_cast<int>(pairs.states.rows());
  const WellSplit w = split_wells(v_khz);

  Eigen::Matrix2d m;
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      double s = 0.0;
      for (int i = 0; i < n; ++i)
        if (w.left_mask[i]) s += pairs.states(i, a) * pairs.states(i, b);
      m(a, b) = s / n;
    }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> solver(m);
  const double mu_min = solver.eigenvalues()(0), mu_max = solver.eigenvalues()(1);
  if (mu_max < 0.9 || mu_min > 0.1)
    throw std::runtime_error("localize_sites: lowest doublet does not localize onto the wells");

  LocalizedSites out;
  out.left = pairs.states.leftCols(2) * solver.eigenvectors().col(1);
  out.right = pairs.states.leftCols(2) * solver.eigenvectors().col(0);
  out.localization = mu_max;
  out.gap_khz = pairs.energies_khz(1) - pairs.energies_khz(0);
  out.energy_left_khz = out.left.dot(h * out.left) / n;
  out.energy_right_khz = out.right.dot(h * out.right) / n;

  const double e_site_max = std::max(out.energy_left_khz, out.energy_right_khz);
  if (w.barrier_khz < e_site_max)
    throw std::runtime_error("localize_sites: barrier below site energy; sites not separated");
  return out;
}

// Harmonic level spacing of the well containing grid index i_min, from a
// five-point quadratic fit of the potential curvature: f = sqrt(2 V'' E_R) / (2 pi)
// with V'' in kHz per lambda^2.
inline double well_spacing_khz(const std::vector<double>& v_khz, int i_min, double recoil_khz) {
  const int n = static_cast<int>(v_khz.size());
  const double h = 1.0 / n;
  double acc = 0.0;
  for (int d = -2; d <= 2; ++d)
    acc += (static_cast<double>(d) * d - 2.0) * v_khz[(i_min + d + n) % n];
  const double vpp = 2.0 * (acc / 14.0) / (h * h);
  if (vpp <= 0.0) throw std::runtime_error("well_spacing_khz: non-positive curvature at minimum");
  return std::sqrt(2.0 * vpp * recoil_khz) / kTwoPi;
}

struct SiteTransitions {
  double nu_left_khz = 0.0;   // |-1> -> |0> transition frequency at the left site
  double nu_right_khz = 0.0;
  double splitting_khz = 0.0; // nu_right - nu_left
  double spacing_left_khz = 0.0;  // harmonic spacing of the m = 0 potential, per well
  double spacing_right_khz = 0.0;
  double localization_m0 = 0.0;
  double localization_mm1 = 0.0;
};

// Per-site RF transition frequencies from localized ground states of the
// m = 0 and m = -1 potentials on the same cut.
inline SiteTransitions site_transitions(const SpinPotentialGrid& g, const PhysicalConstants& c) {
  const double er = c.recoil_khz();
  const Eigen::MatrixXd h0 = build_hamiltonian(g.v_m0_khz, er);
  const Eigen::MatrixXd h1 = build_hamiltonian(g.v_mminus1_khz, er);
  const Eigenpairs p0 = lowest_eigenpairs(h0, 2);
  const Eigenpairs p1 = lowest_eigenpairs(h1, 2);
  const LocalizedSites s0 = localize_sites(p0, h0, g.v_m0_khz);
  const LocalizedSites s1 = localize_sites(p1, h1, g.v_mminus1_khz);

  SiteTransitions t;
  t.nu_left_khz = s0.energy_left_khz - s1.energy_left_khz;
  t.nu_right_khz = s0.energy_right_khz - s1.energy_right_khz;
  t.splitting_khz = t.nu_right_khz - t.nu_left_khz;
  const WellSplit w = split_wells(g.v_m0_khz);
  t.spacing_left_khz = well_spacing_khz(g.v_m0_khz, w.i_left, er);
  t.spacing_right_khz = well_spacing_khz(g.v_m0_khz, w.i_right, er);
  t.localization_m0 = s0.localization;
  t.localization_mm1 = s1.localization;
  return t;
}

// Overlap |<psi_target | psi>|^2 between two grid wavefunctions (real case).
inline double ground_band_overlap(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw std::invalid_argument("ground_band_overlap: size mismatch");
  const double ov = a.dot(b) / a.size();
  return ov * ov;
}

} // namespace dwell
