#pragma once

// Experiment scripts: control calibration, adiabatic loading, sublattice
// spectroscopy, the two-step spin-dependent transport and its dx scan, the
// noisy Rabi trace with transport readout, Ramsey/echo coherence scans, and
// the spin interferometer with time-of-flight readout.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "constants.hpp"
#include "dynamics.hpp"
#include "ensemble.hpp"
#include "field.hpp"
#include "fitting.hpp"
#include "stationary.hpp"

namespace dwell {

struct Lab {
  PhysicalConstants constants;
  BiasField bias;
};

// Double-well configuration used for sublattice-resolved addressing: deep
// lambda/2 lattice with a symmetrically placed lambda lattice on top.
inline constexpr double kAddressVHalfEr = 80.0;
inline constexpr double kAddressVLambdaEr = 52.0;

inline LatticeControls addressing_controls(double pol_phase,
                                           double v_half_er = kAddressVHalfEr,
                                           double v_lambda_er = kAddressVLambdaEr) {
  LatticeControls lc;
  lc.v_half_er = v_half_er;
  lc.v_lambda_er = v_lambda_er;
  lc.dx = -0.5;
  lc.pol_phase = pol_phase;
  return lc;
}

struct CalibrationResult {
  LatticeControls controls;
  double splitting_khz = 0.0;     // achieved nu_right - nu_left
  double v_half_er = 0.0;         // measured depths after the round trip
  double v_lambda_er = 0.0;
  double residual_khz = 0.0;      // |achieved - target|
  double max_reachable_khz = 0.0; // splitting at the edge of the phase range
  bool converged = false;
  int iterations = 0;
};

// Solves for the polarization phase that makes the right-well transition sit
// target_splitting above the left-well one, at fixed depths.  The splitting
// is monotone in sin(pol_phase), so a bisection on [0, pi/2] (or the mirror
// interval for negative targets) suffices; depths are verified by sampling
// the synthesized field and folded into total_scale.
inline CalibrationResult calibrate(double target_splitting_khz, double v_half_er,
                                   double v_lambda_er, const Lab& lab, int n_grid = 512,
                                   double tol_khz = 1e-3) {
  auto splitting_at = [&](double phase) {
    const LatticeControls lc = addressing_controls(phase, v_half_er, v_lambda_er);
    const SpinPotentialGrid g =
        sample_cut(controls_to_beams(lc, lab.constants), lab.bias, n_grid, lab.constants);
    return site_transitions(g, lab.constants).splitting_khz;
  };

  CalibrationResult out;
  const double sign = target_splitting_khz >= 0.0 ? 1.0 : -1.0;
  double lo = 0.0, hi = sign * kPi / 2.0; // splitting grows with sin(pol_phase)
  // near the phase-range edge the effective field can deform the minority
  // potential until the two-well picture fails; shrink until it evaluates
  double s_hi = 0.0;
  bool edge_ok = false;
  for (int tries = 0; tries < 24 && !edge_ok; ++tries) {
    try {
      s_hi = splitting_at(hi);
      edge_ok = true;
    } catch (const std::runtime_error&) {
      hi *= 0.9;
    }
  }
  if (!edge_ok) throw std::runtime_error("calibrate: no usable polarization phase range");
  out.max_reachable_khz = s_hi;
  if (std::abs(target_splitting_khz) < tol_khz) {
    out.controls = addressing_controls(0.0, v_half_er, v_lambda_er);
    out.splitting_khz = splitting_at(0.0);
    out.converged = true;
  } else if (std::abs(s_hi) < std::abs(target_splitting_khz)) {
    out.controls = addressing_controls(hi, v_half_er, v_lambda_er);
    out.splitting_khz = s_hi;
    out.converged = false;
  } else {
    double phase = 0.5 * (lo + hi), s_mid = 0.0;
    for (int it = 0; it < 60; ++it) {
      phase = 0.5 * (lo + hi);
      s_mid = splitting_at(phase);
      ++out.iterations;
      if (std::abs(s_mid - target_splitting_khz) < tol_khz) break;
      if (std::abs(s_mid) < std::abs(target_splitting_khz)) lo = phase;
      else hi = phase;
    }
    out.controls = addressing_controls(phase, v_half_er, v_lambda_er);
    out.splitting_khz = s_mid;
    out.converged = std::abs(s_mid - target_splitting_khz) < tol_khz;
  }

  const MeasuredLattice m = measure_lattice(controls_to_beams(out.controls, lab.constants),
                                            lab.constants);
  out.v_half_er = m.v_half_er;
  out.v_lambda_er = m.v_lambda_er;
  if (m.v_half_er > 0.0 && v_half_er > 0.0)
    out.controls.total_scale *= v_half_er / m.v_half_er;
  out.residual_khz = std::abs(out.splitting_khz - target_splitting_khz);
  return out;
}

struct LoadResult {
  SpinorState state;
  double overlap = 0.0; // ground-band overlap of the loaded state
};

// Adiabatic lattice turn-on from the free (flat-potential) ground state:
// both depths rise along an exponential-growth ramp of time constant tau,
// staying slow while the lattice is shallow and its gaps are small.
inline LoadResult ramp_load(const LatticeControls& final_lc, int component, double duration_us,
                            double tau_us, const Lab& lab, const PropagatorOptions& popt) {
  ControlSegment seg;
  seg.t_start_us = 0.0;
  seg.t_end_us = duration_us;
  seg.from = final_lc;
  seg.from.v_half_er = 0.0;
  seg.from.v_lambda_er = 0.0;
  seg.to = final_lc;
  seg.depth_shape = RampShape::exp_grow;
  seg.exp_tau_us = tau_us;
  ControlSchedule sched;
  sched.append(seg);

  SpinorState state = SpinorState::zero(popt.n);
  for (int j = 0; j < popt.n; ++j) state.psi[component][j] = 1.0;

  Propagator prop(lab.constants, lab.bias, popt);
  prop.propagate(state, sched, {}, duration_us);

  const SpinPotentialGrid g =
      sample_cut(controls_to_beams(final_lc, lab.constants), lab.bias, popt.n, lab.constants);
  const std::vector<double>& v = component == kM0 ? g.v_m0_khz : g.v_mminus1_khz;
  const Eigenpairs pairs = lowest_eigenpairs(build_hamiltonian(v, lab.constants.recoil_khz()), 1);
  complexd ov(0.0, 0.0);
  for (int j = 0; j < popt.n; ++j)
    ov += pairs.states(j, 0) * std::conj(state.psi[component][j]);
  LoadResult out;
  out.state = state;
  out.overlap = std::norm(ov) / (static_cast<double>(popt.n) * popt.n);
  return out;
}

struct SpectroscopyResult {
  std::vector<double> offset_khz;     // drive frequency minus the bare transition
  std::vector<double> p_remain_left;  // |-1> population left after the pulse, L-start run
  std::vector<double> p_remain_right; // same for the R-start run
  double nu_left_khz = 0.0;           // transition table of the probed configuration
  double nu_right_khz = 0.0;
};

// Sublattice-resolved spectroscopy: for each drive frequency, a pulse of
// fixed duration is applied to the ground-band state of each site and the
// remaining mF = -1 population is recorded.
inline SpectroscopyResult exp_addressing_spectroscopy(const LatticeControls& lc,
                                                      const std::vector<double>& offsets_khz,
                                                      double pulse_us, double rabi_khz,
                                                      const Lab& lab,
                                                      const PropagatorOptions& popt) {
  const double nu0 = bare_transition_khz(lab.bias, lab.constants);
  const SpinPotentialGrid g =
      sample_cut(controls_to_beams(lc, lab.constants), lab.bias, popt.n, lab.constants);
  const SiteTransitions table = site_transitions(g, lab.constants);

  ControlSchedule sched;
  ControlSegment seg;
  seg.t_start_us = 0.0;
  seg.t_end_us = pulse_us;
  seg.from = seg.to = lc;
  sched.append(seg);

  const SpinorState left0 = load_site_state(lc, kMm1, true, lab.bias, lab.constants, popt.n);
  const SpinorState right0 = load_site_state(lc, kMm1, false, lab.bias, lab.constants, popt.n);

  SpectroscopyResult out;
  out.offset_khz = offsets_khz;
  out.nu_left_khz = table.nu_left_khz;
  out.nu_right_khz = table.nu_right_khz;
  Propagator prop(lab.constants, lab.bias, popt);
  for (double off : offsets_khz) {
    RfPulse pulse;
    pulse.t_start_us = 0.0;
    pulse.t_end_us = pulse_us;
    pulse.freq_khz = nu0 + off;
    pulse.rabi_khz = rabi_khz;
    for (bool left : {true, false}) {
      SpinorState s = left ? left0 : right0;
      s.t_us = 0.0;
      prop.propagate(s, sched, {pulse}, pulse_us);
      (left ? out.p_remain_left : out.p_remain_right).push_back(s.population(kMm1));
    }
  }
  return out;
}

struct TransportOptions {
  double dx_final = -0.45;
  // Polarization phase held during the sequence.  Negative values raise the
  // right well of the mF = -1 potential, steering that component left while
  // the scalar tilt steers mF = 0 right.
  double pol_phase = -1.3;
  double t1_us = 1000.0;           // single-well lattice into the tilted double well
  double t2_us = 150.0;            // double well into the pure lambda/2 lattice
  double v_lambda_start_er = 100.0;
  double dx_start = -0.62;
  double handover_ratio = 0.95;    // v_lambda / v_half at the end of the first step
  double handover_total_er = 60.0; // shallow handover releases the slid well early
  double v_half_final_er = 80.0;
  RampShape depth_shape = RampShape::min_jerk;
  RampShape dx_shape = RampShape::min_jerk; // smooth stop avoids exciting the moving well
};

inline LatticeControls transport_start_controls(const TransportOptions& t) {
  LatticeControls lc;
  lc.v_half_er = 0.0;
  lc.v_lambda_er = t.v_lambda_start_er;
  lc.dx = t.dx_start;
  lc.pol_phase = t.pol_phase;
  return lc;
}

// Two-step transport schedule: depths ramp smoothly while dx moves linearly
// to dx_final in step one; step two removes the lambda lattice at fixed dx.
inline ControlSchedule transport_schedule(const TransportOptions& t, double t_begin_us = 0.0) {
  const LatticeControls start = transport_start_controls(t);
  LatticeControls mid = start;
  mid.v_half_er = t.handover_total_er / (1.0 + t.handover_ratio);
  mid.v_lambda_er = t.handover_total_er - mid.v_half_er;
  mid.dx = t.dx_final;
  LatticeControls fin = mid;
  fin.v_half_er = t.v_half_final_er;
  fin.v_lambda_er = 0.0;

  ControlSchedule sched;
  ControlSegment s1;
  s1.t_start_us = t_begin_us;
  s1.t_end_us = t_begin_us + t.t1_us;
  s1.from = start;
  s1.to = mid;
  s1.depth_shape = t.depth_shape;
  s1.dx_shape = t.dx_shape;
  sched.append(s1);
  ControlSegment s2;
  s2.t_start_us = s1.t_end_us;
  s2.t_end_us = s1.t_end_us + t.t2_us;
  s2.from = mid;
  s2.to = fin;
  s2.depth_shape = t.depth_shape;
  sched.append(s2);
  return sched;
}

struct TransportOutcome {
  SitePopulations pops;
  SpinorState final_state;
};

// Runs the transport on a single spin component prepared in the ground state
// of the initial single-well lattice; site populations are measured against
// the final lattice's barriers.
inline TransportOutcome run_transport(int component, const TransportOptions& t, const Lab& lab,
                                      const PropagatorOptions& popt) {
  const ControlSchedule sched = transport_schedule(t);
  SpinorState state =
      load_ground_state(transport_start_controls(t), component, lab.bias, lab.constants, popt.n);
  Propagator prop(lab.constants, lab.bias, popt);
  prop.propagate(state, sched, {}, sched.t_end_us());

  const SpinPotentialGrid g = sample_cut(controls_to_beams(sched.at(sched.t_end_us()), lab.constants),
                                         lab.bias, popt.n, lab.constants);
  TransportOutcome out;
  out.pops = site_populations(state, g.v_m0_khz);
  out.final_state = std::move(state);
  return out;
}

struct TransportScanResult {
  std::vector<double> dx;
  std::vector<double> p_r_m0;  // fraction in R for a mF = 0 atom
  std::vector<double> p_r_mm1; // fraction in R for a mF = -1 atom
  int i_best = -1;             // point maximizing min(P(R | m0), P(L | m-1))
  double best_score = 0.0;
};

inline TransportScanResult exp_transport_scan(const std::vector<double>& dx_values,
                                              TransportOptions base, const Lab& lab,
                                              const PropagatorOptions& popt) {
  TransportScanResult out;
  out.dx = dx_values;
  for (double dxf : dx_values) {
    TransportOptions t = base;
    t.dx_final = dxf;
    const TransportOutcome m0 = run_transport(kM0, t, lab, popt);
    const TransportOutcome mm1 = run_transport(kMm1, t, lab, popt);
    const double pr0 = m0.pops.right[kM0];
    const double pr1 = mm1.pops.right[kMm1];
    out.p_r_m0.push_back(pr0);
    out.p_r_mm1.push_back(pr1);
    const double score = std::min(pr0, 1.0 - pr1);
    if (score > out.best_score) {
      out.best_score = score;
      out.i_best = static_cast<int>(out.p_r_m0.size()) - 1;
    }
  }
  return out;
}

struct RabiTraceResult {
  std::vector<double> t_us;
  std::vector<double> p0_mean;   // spin population from the ensemble
  std::vector<double> p_site_r;  // after mapping spins to sites via transport fidelities
  double readout_p_r_given_m0 = 1.0;
  double readout_p_l_given_mm1 = 1.0;
};

// Rabi oscillation under the noise model, read out by mapping spin
// populations through the transport confusion matrix.
inline RabiTraceResult exp_rabi_trace(const std::vector<double>& t_us, double rabi_khz,
                                      double detuning_khz, const EnsembleOptions& eopt,
                                      double p_r_given_m0, double p_l_given_mm1) {
  std::vector<Sequence> seqs;
  seqs.reserve(t_us.size());
  for (double t : t_us) seqs.push_back(make_rabi(t, rabi_khz));
  const SweepResult sweep = run_sweep(detuning_khz, seqs, t_us, eopt);

  RabiTraceResult out;
  out.t_us = t_us;
  out.p0_mean = sweep.mean_p0;
  out.readout_p_r_given_m0 = p_r_given_m0;
  out.readout_p_l_given_mm1 = p_l_given_mm1;
  out.p_site_r.reserve(t_us.size());
  for (double p0 : sweep.mean_p0)
    out.p_site_r.push_back(p_r_given_m0 * p0 + (1.0 - p_l_given_mm1) * (1.0 - p0));
  return out;
}

struct CoherenceScan {
  std::vector<double> delay_us;
  std::vector<double> contrast_mean;
  std::vector<double> contrast_per_shot;
};

inline std::vector<double> default_theta_grid(int n = 8) {
  std::vector<double> thetas(n);
  for (int i = 0; i < n; ++i) thetas[i] = kTwoPi * i / n;
  return thetas;
}

// Ramsey (echo = false) or spin-echo (echo = true) contrast versus delay;
// each delay is a fringe scan over the analysis phase of the last pulse.
inline CoherenceScan exp_coherence_scan(const std::vector<double>& delays_us, bool echo,
                                        double t_pi2_us, double rabi_khz, double detuning_khz,
                                        const EnsembleOptions& eopt,
                                        const std::vector<double>& thetas = default_theta_grid()) {
  CoherenceScan out;
  out.delay_us = delays_us;
  for (double gap : delays_us) {
    std::vector<Sequence> seqs;
    seqs.reserve(thetas.size());
    for (double th : thetas)
      seqs.push_back(echo ? make_echo(gap, t_pi2_us, rabi_khz, th)
                          : make_ramsey(gap, t_pi2_us, rabi_khz, th));
    const SweepResult sweep = run_sweep(detuning_khz, seqs, thetas, eopt);
    const FringeContrast c = contrast_from_theta_scan(sweep);
    out.contrast_mean.push_back(c.mean);
    out.contrast_per_shot.push_back(c.per_shot);
  }
  return out;
}

enum class FinalPulse { selective, none, global_pi };

struct InterferometerOptions {
  TransportOptions transport;
  double rabi_khz = 1000.0 / 60.0; // pi/2 in 15 us
  double t_pi2_us = 15.0;
  double echo_at_us = 400.0;       // start of the pi pulse, measured from the pi/2 start
  double settle_us = 40.0;         // ramp from the bare lambda/2 lattice into the readout config
  double v_lambda_readout_er = kAddressVLambdaEr; // lambda depth during the selective pulse
  // Polarization phase during readout: same sign as the transport phase but
  // backed off to where the minority potential keeps its two-well structure.
  double pol_phase_readout = -0.94;
  double t_select_us = 30.0;
  FinalPulse final_pulse = FinalPulse::selective;
  double imposed_phase_rad = 0.0;  // extra phase on the mF = 0 component after transport
  int cells = 1;
  double envelope_sigma_cells = 0.0;
  double p_max_hk = 8.0;
  int p_points = 321;
};

struct InterferometerResult {
  std::vector<double> p_hk;
  std::vector<double> density;
  double nu_left_khz = 0.0;  // selective-pulse frequency actually used
  double nu_right_khz = 0.0;
  SitePopulations pops;      // site/spin occupation just before release
  SpinorState final_state;
};

// Full interferometer: pi/2 and echo pi in the single-well lattice, the
// spin-dependent transport, a reintroduced lambda lattice for the
// site-selective pi, then release and momentum readout.  The polarization
// phase keeps the transport sign throughout.
inline InterferometerResult exp_interferometer(const InterferometerOptions& o, const Lab& lab,
                                               const PropagatorOptions& popt) {
  const double nu0 = bare_transition_khz(lab.bias, lab.constants);
  const LatticeControls start = transport_start_controls(o.transport);

  // schedule: hold | transport (2 segments) | settle into readout config | hold
  const double t_hold = o.echo_at_us + 2.0 * o.t_pi2_us;
  ControlSchedule sched;
  ControlSegment hold;
  hold.t_start_us = 0.0;
  hold.t_end_us = t_hold;
  hold.from = hold.to = start;
  sched.append(hold);
  const ControlSchedule transport = transport_schedule(o.transport, t_hold);
  for (const ControlSegment& seg : transport.segments()) sched.append(seg);

  LatticeControls readout = sched.at(sched.t_end_us());
  readout.dx = -0.5;
  readout.v_lambda_er = o.v_lambda_readout_er;
  readout.pol_phase = o.pol_phase_readout;
  ControlSegment settle;
  settle.t_start_us = sched.t_end_us();
  settle.t_end_us = settle.t_start_us + o.settle_us;
  settle.from = sched.at(sched.t_end_us());
  settle.from.dx = readout.dx; // no vertical light yet, so dx can jump here
  settle.to = readout;
  settle.depth_shape = RampShape::min_jerk;
  settle.aux_shape = RampShape::min_jerk;
  sched.append(settle);
  const double t_select_end = settle.t_end_us + o.t_select_us;
  sched.hold(o.t_select_us);
  // remove the lambda lattice again before release so the interfering sites
  // sit a half wavelength apart (it pulls both wells toward the cell center)
  LatticeControls bare = readout;
  bare.v_lambda_er = 0.0;
  ControlSegment unsettle;
  unsettle.t_start_us = t_select_end;
  unsettle.t_end_us = t_select_end + o.settle_us;
  unsettle.from = readout;
  unsettle.to = bare;
  unsettle.depth_shape = RampShape::min_jerk;
  sched.append(unsettle);
  const double t_release = unsettle.t_end_us;

  // the readout configuration keeps the transport polarization sign, so the
  // selective pulse frequency comes from its own transition table
  const SpinPotentialGrid g_read =
      sample_cut(controls_to_beams(readout, lab.constants), lab.bias, popt.n, lab.constants);
  const SiteTransitions table = site_transitions(g_read, lab.constants);

  std::vector<RfPulse> pulses;
  RfPulse pi2;
  pi2.t_start_us = 0.0;
  pi2.t_end_us = o.t_pi2_us;
  pi2.freq_khz = nu0;
  pi2.rabi_khz = o.rabi_khz;
  pulses.push_back(pi2);
  RfPulse pi;
  pi.t_start_us = o.echo_at_us;
  pi.t_end_us = o.echo_at_us + 2.0 * o.t_pi2_us;
  pi.freq_khz = nu0;
  pi.rabi_khz = o.rabi_khz;
  pulses.push_back(pi);

  RfPulse select;
  select.t_start_us = settle.t_end_us;
  select.t_end_us = t_select_end;
  if (o.final_pulse == FinalPulse::selective) {
    select.freq_khz = table.nu_left_khz;
    select.rabi_khz = 500.0 / o.t_select_us; // pi area over the pulse
    pulses.push_back(select);
  } else if (o.final_pulse == FinalPulse::global_pi) {
    // strong fast pulse at the midpoint frequency flips both sites
    select.freq_khz = 0.5 * (table.nu_left_khz + table.nu_right_khz);
    select.t_end_us = select.t_start_us + 2.5;
    select.rabi_khz = 500.0 / 2.5;
    pulses.push_back(select);
  }

  SpinorState state = load_ground_state(start, kMm1, lab.bias, lab.constants, popt.n);
  Propagator prop(lab.constants, lab.bias, popt);
  const double t_transport_end = t_hold + o.transport.t1_us + o.transport.t2_us;
  prop.propagate(state, sched, pulses, t_transport_end);
  if (o.imposed_phase_rad != 0.0) impose_phase(state, kM0, o.imposed_phase_rad);
  prop.propagate(state, sched, pulses, t_release);

  InterferometerResult out;
  out.nu_left_khz = table.nu_left_khz;
  out.nu_right_khz = table.nu_right_khz;
  out.pops = site_populations(state, g_read.v_m0_khz);
  out.p_hk.resize(o.p_points);
  for (int i = 0; i < o.p_points; ++i)
    out.p_hk[i] = -o.p_max_hk + 2.0 * o.p_max_hk * i / (o.p_points - 1);
  out.density = momentum_density(state, out.p_hk, o.cells, o.envelope_sigma_cells);
  out.final_state = std::move(state);
  return out;
}

} // namespace dwell
