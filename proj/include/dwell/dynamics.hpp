#pragma once

// Two-component (mF = -1, 0) spinor dynamics on one lattice cell: split-step
// propagator with exact 2x2 spin exponentials, time-dependent lattice
// controls, RF pulses in a rotating frame, and momentum-space observables.

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "constants.hpp"
#include "fft.hpp"
#include "field.hpp"
#include "stationary.hpp"

namespace dwell {

// component order inside SpinorState
inline constexpr int kMm1 = 0; // mF = -1
inline constexpr int kM0 = 1;  // mF = 0

struct SpinorState {
  int n = 0;
  std::vector<complexd> psi[2]; // psi[kMm1], psi[kM0]; sum (|a|^2+|b|^2)/n == 1
  double t_us = 0.0;

  static SpinorState zero(int n) {
    SpinorState s;
    s.n = n;
    s.psi[0].assign(n, complexd(0.0, 0.0));
    s.psi[1].assign(n, complexd(0.0, 0.0));
    return s;
  }
  double norm() const {
    double acc = 0.0;
    for (int c = 0; c < 2; ++c)
      for (const complexd& a : psi[c]) acc += std::norm(a);
    return acc / n;
  }
  double population(int component) const {
    double acc = 0.0;
    for (const complexd& a : psi[component]) acc += std::norm(a);
    return acc / n;
  }
};

enum class RampShape { hold, linear, min_jerk, exp_settle, exp_grow };

inline double ramp_progress(RampShape shape, double u, double duration_us, double tau_us) {
  u = std::clamp(u, 0.0, 1.0);
  switch (shape) {
    case RampShape::hold: return u < 1.0 ? 0.0 : 1.0;
    case RampShape::linear: return u;
    case RampShape::min_jerk: return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
    case RampShape::exp_settle: {
      if (tau_us <= 0.0) throw std::invalid_argument("ramp_progress: exp_settle needs tau > 0");
      const double full = -std::expm1(-duration_us / tau_us);
      return -std::expm1(-u * duration_us / tau_us) / full;
    }
    case RampShape::exp_grow: {
      // slow start, fast finish: the right direction for lattice turn-on,
      // where the level spacing grows with the depth
      if (tau_us <= 0.0) throw std::invalid_argument("ramp_progress: exp_grow needs tau > 0");
      const double full = std::expm1(duration_us / tau_us);
      return std::expm1(u * duration_us / tau_us) / full;
    }
  }
  return u;
}

// One schedule segment; depths, offset and the remaining controls can ramp
// with different shapes (e.g. smooth depth handover while dx moves linearly).
struct ControlSegment {
  double t_start_us = 0.0, t_end_us = 0.0;
  LatticeControls from, to;
  RampShape depth_shape = RampShape::linear;
  RampShape dx_shape = RampShape::linear;
  RampShape aux_shape = RampShape::linear; // pol_phase and total_scale
  double exp_tau_us = 0.0;
};

class ControlSchedule {
public:
  void append(const ControlSegment& seg) {
    if (seg.t_end_us < seg.t_start_us)
      throw std::invalid_argument("schedule: segment ends before it starts");
    if (!segments_.empty() && std::abs(seg.t_start_us - segments_.back().t_end_us) > 1e-9)
      throw std::invalid_argument("schedule: segments must be contiguous");
    validate_controls(seg.from);
    validate_controls(seg.to);
    segments_.push_back(seg);
  }

  // convenience: hold the last controls for dt
  void hold(double dt_us) {
    if (segments_.empty()) throw std::logic_error("schedule: nothing to hold");
    ControlSegment s;
    s.t_start_us = segments_.back().t_end_us;
    s.t_end_us = s.t_start_us + dt_us;
    s.from = s.to = segments_.back().to;
    append(s);
  }

  double t_begin_us() const { return segments_.empty() ? 0.0 : segments_.front().t_start_us; }
  double t_end_us() const { return segments_.empty() ? 0.0 : segments_.back().t_end_us; }
  const std::vector<ControlSegment>& segments() const { return segments_; }

  LatticeControls at(double t_us) const {
    if (segments_.empty()) throw std::logic_error("schedule: empty");
    const ControlSegment* seg = &segments_.back();
    if (t_us <= t_begin_us()) seg = &segments_.front();
    else {
      for (const ControlSegment& s : segments_)
        if (t_us <= s.t_end_us + 1e-12) { seg = &s; break; }
    }
    const double dur = seg->t_end_us - seg->t_start_us;
    const double u = dur > 0.0 ? (t_us - seg->t_start_us) / dur : 1.0;
    auto mix = [&](double a, double b, RampShape shape) {
      const double s = ramp_progress(shape, u, dur, seg->exp_tau_us);
      return a + (b - a) * s;
    };
    LatticeControls lc;
    lc.v_half_er = mix(seg->from.v_half_er, seg->to.v_half_er, seg->depth_shape);
    lc.v_lambda_er = mix(seg->from.v_lambda_er, seg->to.v_lambda_er, seg->depth_shape);
    lc.dx = mix(seg->from.dx, seg->to.dx, seg->dx_shape);
    lc.pol_phase = mix(seg->from.pol_phase, seg->to.pol_phase, seg->aux_shape);
    lc.total_scale = mix(seg->from.total_scale, seg->to.total_scale, seg->aux_shape);
    return lc;
  }

private:
  std::vector<ControlSegment> segments_;
};

struct RfPulse {
  double t_start_us = 0.0, t_end_us = 0.0;
  double freq_khz = 0.0; // drive frequency, positive (|0> above |-1>)
  double rabi_khz = 0.0; // full population cycle in 1/rabi on resonance
  double phase_rad = 0.0;
};

inline void validate_pulses(const std::vector<RfPulse>& pulses) {
  for (size_t i = 0; i < pulses.size(); ++i) {
    if (pulses[i].t_end_us < pulses[i].t_start_us)
      throw std::invalid_argument("rf pulse " + std::to_string(i) + ": ends before it starts");
    if (pulses[i].rabi_khz < 0.0)
      throw std::invalid_argument("rf pulse " + std::to_string(i) + ": negative amplitude");
    if (i > 0 && pulses[i].t_start_us < pulses[i - 1].t_end_us - 1e-12)
      throw std::invalid_argument("rf pulses must be sorted and non-overlapping");
  }
}

struct PropagatorOptions {
  int n = 256;
  double dt_us = 0.01;
  // Internal-state rotating frame, kHz added to the mF = -1 diagonal.  The
  // default (quiet NaN) resolves to -bare_transition_khz so both diagonals
  // stay at lattice-depth scale and the RF coupling rotates slowly.
  double frame_khz = std::numeric_limits<double>::quiet_NaN();
};

class Propagator {
public:
  Propagator(const PhysicalConstants& c, const BiasField& bias, const PropagatorOptions& opt)
      : c_(c), bias_(bias), opt_(opt), sampler_(opt.n) {
    if (opt_.n < 16 || (opt_.n & (opt_.n - 1)) != 0)
      throw std::invalid_argument("propagator: n must be a power of two >= 16");
    if (!(opt_.dt_us > 0.0)) throw std::invalid_argument("propagator: dt must be > 0");
    if (std::isnan(opt_.frame_khz)) opt_.frame_khz = -bare_transition_khz(bias_, c_);
    const double er = c_.recoil_khz();
    kin_khz_.resize(opt_.n);
    for (int j = 0; j < opt_.n; ++j) {
      const double m = momentum_index(j, opt_.n);
      kin_khz_[j] = m * m * er;
    }
    half_kick_cached_.resize(opt_.n);
    cache_half_kick(opt_.dt_us);
  }

  const PropagatorOptions& options() const { return opt_; }
  double frame_khz() const { return opt_.frame_khz; }

  // Evolve from state.t_us to t_final against the schedule and pulse list.
  // Steps never straddle a segment boundary or a pulse edge, and controls and
  // coupling are sampled at each step midpoint.
  void propagate(SpinorState& state, const ControlSchedule& schedule,
                 const std::vector<RfPulse>& pulses, double t_final_us) {
    if (state.n != opt_.n) throw std::invalid_argument("propagate: state size mismatch");
    validate_pulses(pulses);
    check_step_size(schedule, pulses);
    std::vector<double> edges;
    edges.push_back(t_final_us);
    for (const ControlSegment& s : schedule.segments()) {
      edges.push_back(s.t_start_us);
      edges.push_back(s.t_end_us);
    }
    for (const RfPulse& p : pulses) {
      edges.push_back(p.t_start_us);
      edges.push_back(p.t_end_us);
    }
    std::sort(edges.begin(), edges.end());

    double t = state.t_us;
    while (t < t_final_us - 1e-12) {
      double t_edge = t_final_us;
      for (double e : edges)
        if (e > t + 1e-12) { t_edge = std::min(t_edge, e); break; }
      const double span = t_edge - t;
      const long nsteps = std::max(1L, std::lround(std::ceil(span / opt_.dt_us - 1e-9)));
      const double dt = span / nsteps;
      for (long s = 0; s < nsteps; ++s) step(state, schedule, pulses, t + s * dt, dt);
      t = t_edge;
      state.t_us = t;
    }
    state.t_us = t_final_us;
  }

  // One Strang step from t over dt (exposed for convergence checks).
  void step(SpinorState& state, const ControlSchedule& schedule,
            const std::vector<RfPulse>& pulses, double t_us, double dt_us) {
    const double t_mid = t_us + 0.5 * dt_us;
    const BeamSet beams = controls_to_beams(schedule.at(t_mid), c_);
    sampler_.sample(beams, bias_, c_, grid_);

    complexd coupling(0.0, 0.0);
    for (const RfPulse& p : pulses) {
      if (t_mid >= p.t_start_us - 1e-12 && t_mid <= p.t_end_us + 1e-12) {
        const double arg =
            p.phase_rad + kPhaseKhzUs * (p.freq_khz + opt_.frame_khz) * t_mid;
        coupling = 0.5 * p.rabi_khz * std::polar(1.0, arg);
        break;
      }
    }

    half_kick(state, dt_us);
    const double alpha = kPhaseKhzUs * dt_us;
    const double cabs = std::abs(coupling);
    for (int j = 0; j < opt_.n; ++j) {
      const double h11 = grid_.v_mminus1_khz[j] - opt_.frame_khz;
      const double h22 = grid_.v_m0_khz[j];
      const double mean = 0.5 * (h11 + h22);
      const double delta = 0.5 * (h11 - h22);
      const double r = std::hypot(delta, cabs);
      const complexd phase = std::polar(1.0, -alpha * mean);
      double cr = 1.0, snc = 0.0; // cos(alpha r), sin(alpha r)/r
      if (r > 0.0) {
        cr = std::cos(alpha * r);
        snc = std::sin(alpha * r) / r;
      } else {
        snc = alpha;
      }
      const complexd a = state.psi[kMm1][j];
      const complexd b = state.psi[kM0][j];
      const complexd i_snc(0.0, snc);
      state.psi[kMm1][j] = phase * ((cr - i_snc * delta) * a - i_snc * coupling * b);
      state.psi[kM0][j] = phase * (-i_snc * std::conj(coupling) * a + (cr + i_snc * delta) * b);
    }
    half_kick(state, dt_us);
  }

private:
  // Step-size guard: the splitting error grows with the dynamic range of the
  // interaction-frame diagonal plus the coupling strength.  A dt that resolves
  // less than ~1/20 of the fastest phase is rejected outright rather than
  // silently producing garbage.
  void check_step_size(const ControlSchedule& schedule, const std::vector<RfPulse>& pulses) {
    double lo = 0.0, hi = 0.0;
    auto probe = [&](const LatticeControls& lc) {
      sampler_.sample(controls_to_beams(lc, c_), bias_, c_, grid_);
      for (int j = 0; j < opt_.n; ++j) {
        lo = std::min({lo, grid_.v_mminus1_khz[j] - opt_.frame_khz, grid_.v_m0_khz[j]});
        hi = std::max({hi, grid_.v_mminus1_khz[j] - opt_.frame_khz, grid_.v_m0_khz[j]});
      }
    };
    for (const ControlSegment& s : schedule.segments()) {
      probe(s.from);
      probe(s.to);
    }
    double scale_khz = hi - lo;
    for (const RfPulse& p : pulses) scale_khz = std::max(scale_khz, p.rabi_khz);
    if (scale_khz > 0.0) {
      const double dt_max_us = 1e3 / (20.0 * scale_khz);
      if (opt_.dt_us > dt_max_us)
        throw std::invalid_argument(
            "propagate: dt = " + std::to_string(opt_.dt_us) + " us exceeds the stability bound " +
            std::to_string(dt_max_us) + " us for an energy range of " +
            std::to_string(scale_khz) + " kHz; reduce dt");
    }
  }

  void cache_half_kick(double dt_us) {
    for (int j = 0; j < opt_.n; ++j)
      half_kick_cached_[j] = std::polar(1.0, -0.5 * kPhaseKhzUs * kin_khz_[j] * dt_us);
    cached_dt_ = dt_us;
  }

  void half_kick(SpinorState& state, double dt_us) {
    if (dt_us != cached_dt_) cache_half_kick(dt_us);
    for (int comp = 0; comp < 2; ++comp) {
      fft_.fwd(scratch_, state.psi[comp]);
      for (int j = 0; j < opt_.n; ++j) scratch_[j] *= half_kick_cached_[j];
      fft_.inv(state.psi[comp], scratch_);
    }
  }

  PhysicalConstants c_;
  BiasField bias_;
  PropagatorOptions opt_;
  CutSampler sampler_;
  Fft fft_;
  SpinPotentialGrid grid_;
  std::vector<double> kin_khz_;
  std::vector<complexd> half_kick_cached_, scratch_;
  double cached_dt_ = -1.0;
};

// Ground state of the given spin component's potential, as a spinor.
inline SpinorState load_ground_state(const LatticeControls& lc, int component,
                                     const BiasField& bias, const PhysicalConstants& c, int n) {
  const SpinPotentialGrid g = sample_cut(controls_to_beams(lc, c), bias, n, c);
  const std::vector<double>& v = component == kM0 ? g.v_m0_khz : g.v_mminus1_khz;
  const Eigen::MatrixXd h = build_hamiltonian(v, c.recoil_khz());
  const Eigenpairs p = lowest_eigenpairs(h, 1);
  SpinorState s = SpinorState::zero(n);
  for (int j = 0; j < n; ++j) s.psi[component][j] = p.states(j, 0);
  return s;
}

// Site-localized ground-band state (left or right well) of one component.
inline SpinorState load_site_state(const LatticeControls& lc, int component, bool left_site,
                                   const BiasField& bias, const PhysicalConstants& c, int n) {
  const SpinPotentialGrid g = sample_cut(controls_to_beams(lc, c), bias, n, c);
  const std::vector<double>& v = component == kM0 ? g.v_m0_khz : g.v_mminus1_khz;
  const Eigen::MatrixXd h = build_hamiltonian(v, c.recoil_khz());
  const Eigenpairs p = lowest_eigenpairs(h, 2);
  const LocalizedSites sites = localize_sites(p, h, v);
  const Eigen::VectorXd& w = left_site ? sites.left : sites.right;
  SpinorState s = SpinorState::zero(n);
  for (int j = 0; j < n; ++j) s.psi[component][j] = w(j);
  return s;
}

struct SitePopulations {
  double left[2] = {0.0, 0.0};  // indexed by component (kMm1, kM0)
  double right[2] = {0.0, 0.0};
};

// Population per site and spin, with halves defined by the barriers of a
// reference potential (normally the final lattice the state is held in).
inline SitePopulations site_populations(const SpinorState& state,
                                        const std::vector<double>& v_ref_khz) {
  if (static_cast<int>(v_ref_khz.size()) != state.n)
    throw std::invalid_argument("site_populations: grid mismatch");
  const WellSplit w = split_wells(v_ref_khz);
  SitePopulations out;
  for (int comp = 0; comp < 2; ++comp)
    for (int j = 0; j < state.n; ++j) {
      const double p = std::norm(state.psi[comp][j]) / state.n;
      (w.left_mask[j] ? out.left : out.right)[comp] += p;
    }
  return out;
}

inline void impose_phase(SpinorState& state, int component, double phase_rad) {
  const complexd f = std::polar(1.0, phase_rad);
  for (complexd& a : state.psi[component]) a *= f;
}

// Spin-summed momentum density at arbitrary momenta (hbar k units, k = 2 pi /
// lambda), optionally for an array of `cells` identical copies at integer
// lambda spacing with a Gaussian amplitude envelope (sigma in cells;
// sigma <= 0 means uniform weights).  Spin components add incoherently,
// lattice sites within psi and cells across the array add coherently.
inline std::vector<double> momentum_density(const SpinorState& state,
                                            const std::vector<double>& p_hk, int cells = 1,
                                            double envelope_sigma_cells = 0.0) {
  if (cells < 1) throw std::invalid_argument("momentum_density: cells must be >= 1");
  std::vector<double> weights(cells);
  double wnorm = 0.0;
  for (int cidx = 0; cidx < cells; ++cidx) {
    const double d = cidx - 0.5 * (cells - 1);
    weights[cidx] = envelope_sigma_cells > 0.0
                        ? std::exp(-0.5 * d * d / (envelope_sigma_cells * envelope_sigma_cells))
                        : 1.0;
    wnorm += weights[cidx] * weights[cidx];
  }
  wnorm = std::sqrt(wnorm);
  for (double& w : weights) w /= wnorm;

  std::vector<double> out(p_hk.size(), 0.0);
  for (size_t ip = 0; ip < p_hk.size(); ++ip) {
    const double p = p_hk[ip];
    complexd array(0.0, 0.0);
    for (int cidx = 0; cidx < cells; ++cidx)
      array += weights[cidx] * std::polar(1.0, -kTwoPi * p * cidx);
    double dens = 0.0;
    for (int comp = 0; comp < 2; ++comp) {
      complexd amp(0.0, 0.0);
      for (int j = 0; j < state.n; ++j) {
        const double x = static_cast<double>(j) / state.n;
        amp += state.psi[comp][j] * std::polar(1.0, -kTwoPi * p * x);
      }
      dens += std::norm(amp / static_cast<double>(state.n));
    }
    out[ip] = std::norm(array) * dens;
  }
  return out;
}

} // namespace dwell
