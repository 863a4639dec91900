// Command-line front end: each subcommand reads one config, runs one
// experiment, and writes <command>.csv, <command>.json and manifest.json into
// --outdir.  Exit codes: 0 ok, 1 physics/runtime failure, 2 usage error.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include <dwell/dwell.hpp>

namespace fs = std::filesystem;
using dwell::json;

namespace {

std::string find_config(const std::string& name) {
  if (fs::exists(name)) return name;
  if (const char* env = std::getenv("DWELL_CONFIG_PATH")) {
    std::stringstream ss(env);
    std::string dir;
    while (std::getline(ss, dir, ':')) {
      if (dir.empty()) continue;
      const fs::path p = fs::path(dir) / name;
      if (fs::exists(p)) return p.string();
    }
  }
  throw dwell::ConfigError("config file '" + name +
                           "' not found (also searched DWELL_CONFIG_PATH)");
}

std::vector<double> resolve_scan(const dwell::Config& cfg, double def_start, double def_stop,
                                 int def_points) {
  const double a = std::isnan(cfg.experiment.scan_start) ? def_start : cfg.experiment.scan_start;
  const double b = std::isnan(cfg.experiment.scan_stop) ? def_stop : cfg.experiment.scan_stop;
  const int n = cfg.experiment.scan_points < 1 ? def_points : cfg.experiment.scan_points;
  return dwell::linspace(a, b, n);
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(); }

void cmd_potential(const dwell::Config& cfg, dwell::RunRecorder& rec) {
  const dwell::Lab lab = dwell::make_lab(cfg);
  const dwell::LatticeControls lc = dwell::make_controls(cfg);
  const int n = cfg.grid.n_stationary;
  const dwell::BeamSet beams = dwell::controls_to_beams(lc, lab.constants);
  const dwell::SpinPotentialGrid g = dwell::sample_cut(beams, lab.bias, n, lab.constants);
  const double er = lab.constants.recoil_khz();
  const double nu0 = dwell::bare_transition_khz(lab.bias, lab.constants);

  std::vector<std::vector<double>> rows;
  rows.reserve(n);
  for (int i = 0; i < n; ++i) {
    // the constant internal-level shift is removed so both columns show the
    // lattice landscape on the same recoil scale
    rows.push_back({g.x[i], g.v_m0_khz[i] / er, (g.v_mminus1_khz[i] + nu0) / er,
                    g.beff_proj_khz[i]});
  }
  rec.write_csv("potential.csv", {"x_over_lambda", "v_m0_ER", "v_mminus1_ER", "beff_kHz"}, rows);

  const dwell::MeasuredLattice m = dwell::measure_lattice(beams, lab.constants);
  json summary;
  summary["recoil_khz"] = er;
  summary["bare_transition_khz"] = nu0;
  summary["measured"] = {{"v_half_er", m.v_half_er},
                         {"v_lambda_er", m.v_lambda_er},
                         {"dx", finite_or_null(m.dx)}};
  try {
    const dwell::SiteTransitions t = dwell::site_transitions(g, lab.constants);
    summary["sites"] = {{"nu_left_khz", t.nu_left_khz},
                        {"nu_right_khz", t.nu_right_khz},
                        {"splitting_khz", t.splitting_khz},
                        {"spacing_left_khz", t.spacing_left_khz},
                        {"spacing_right_khz", t.spacing_right_khz},
                        {"localization_m0", t.localization_m0},
                        {"localization_mm1", t.localization_mm1}};
  } catch (const std::exception& e) {
    summary["sites"] = nullptr;
    summary["sites_note"] = e.what();
  }
  rec.write_summary("potential.json", summary);
}

void cmd_spectrum(const dwell::Config& cfg, dwell::RunRecorder& rec) {
  const dwell::Lab lab = dwell::make_lab(cfg);
  const dwell::LatticeControls lc = dwell::make_controls(cfg);
  const dwell::PropagatorOptions popt = dwell::make_propagator_options(cfg);
  const std::vector<double> offsets = resolve_scan(cfg, -20.0, 52.0, 37);
  const dwell::SpectroscopyResult r = dwell::exp_addressing_spectroscopy(
      lc, offsets, cfg.experiment.rf_pulse_us, cfg.experiment.rf_rabi_khz, lab, popt);

  std::vector<std::vector<double>> rows;
  for (size_t i = 0; i < offsets.size(); ++i)
    rows.push_back({r.offset_khz[i], r.p_remain_left[i], r.p_remain_right[i]});
  rec.write_csv("spectrum.csv", {"rf_kHz_offset", "p_remain_L", "p_remain_R"}, rows);

  const double nu0 = dwell::bare_transition_khz(lab.bias, lab.constants);
  json summary;
  summary["nu_left_khz"] = r.nu_left_khz;
  summary["nu_right_khz"] = r.nu_right_khz;
  summary["offset_left_khz"] = r.nu_left_khz - nu0;
  summary["offset_right_khz"] = r.nu_right_khz - nu0;
  summary["splitting_khz"] = r.nu_right_khz - r.nu_left_khz;
  summary["pulse_us"] = cfg.experiment.rf_pulse_us;
  summary["rabi_khz"] = cfg.experiment.rf_rabi_khz;
  rec.write_summary("spectrum.json", summary);
}

void cmd_transport_scan(const dwell::Config& cfg, dwell::RunRecorder& rec) {
  const dwell::Lab lab = dwell::make_lab(cfg);
  const dwell::PropagatorOptions popt = dwell::make_propagator_options(cfg);
  const std::vector<double> dx = resolve_scan(cfg, -0.5, -0.3, 21);
  const dwell::TransportScanResult r =
      dwell::exp_transport_scan(dx, dwell::make_transport_options(cfg), lab, popt);

  std::vector<std::vector<double>> rows;
  for (size_t i = 0; i < dx.size(); ++i) {
    const double score = std::min(r.p_r_m0[i], 1.0 - r.p_r_mm1[i]);
    rows.push_back({r.dx[i], r.p_r_m0[i], r.p_r_mm1[i], score});
  }
  rec.write_csv("transport-scan.csv", {"dx", "p_right_m0", "p_right_mminus1", "score"}, rows);

  json summary;
  if (r.i_best >= 0) {
    summary["best_dx"] = r.dx[r.i_best];
    summary["best_score"] = r.best_score;
    summary["best_p_right_m0"] = r.p_r_m0[r.i_best];
    summary["best_p_left_mminus1"] = 1.0 - r.p_r_mm1[r.i_best];
  } else {
    summary["best_dx"] = nullptr;
  }
  rec.write_summary("transport-scan.json", summary);
}

void cmd_rabi(const dwell::Config& cfg, dwell::RunRecorder& rec, uint64_t seed) {
  const std::vector<double> times = resolve_scan(cfg, 0.0, 3000.0, 151);
  const dwell::EnsembleOptions eopt = dwell::make_ensemble_options(cfg, seed);
  const bool ideal = cfg.experiment.readout == "ideal";
  const double f0 = ideal ? 1.0 : 0.95;
  const double f1 = ideal ? 1.0 : 0.95;
  const dwell::RabiTraceResult r = dwell::exp_rabi_trace(
      times, cfg.experiment.rabi_drive_khz, cfg.experiment.detuning_khz, eopt, f0, f1);

  std::vector<std::vector<double>> rows;
  for (size_t i = 0; i < times.size(); ++i)
    rows.push_back({r.t_us[i], r.p0_mean[i], r.p_site_r[i]});
  rec.write_csv("rabi.csv", {"t_us", "p_m0", "p_site_right"}, rows);

  json summary;
  summary["rabi_khz"] = cfg.experiment.rabi_drive_khz;
  summary["detuning_khz"] = cfg.experiment.detuning_khz;
  summary["readout"] = cfg.experiment.readout;
  try {
    const dwell::DampedSineFit fit = dwell::fit_damped_sine(times, r.p0_mean);
    summary["fit"] = {{"freq_khz", fit.freq_khz},
                      {"tau_us", finite_or_null(fit.tau_us)},
                      {"amplitude", fit.amplitude},
                      {"converged", fit.converged}};
  } catch (const std::exception& e) {
    summary["fit"] = nullptr;
    summary["fit_note"] = e.what();
  }
  rec.write_summary("rabi.json", summary);
}

void cmd_coherence(const dwell::Config& cfg, dwell::RunRecorder& rec, uint64_t seed, bool echo) {
  const std::vector<double> delays =
      echo ? resolve_scan(cfg, 0.0, 1200.0, 25) : resolve_scan(cfg, 0.0, 300.0, 31);
  const dwell::EnsembleOptions eopt = dwell::make_ensemble_options(cfg, seed);
  const double rabi_khz = 250.0 / cfg.experiment.t_pi2_us; // quarter turn per pulse
  const dwell::CoherenceScan scan = dwell::exp_coherence_scan(
      delays, echo, cfg.experiment.t_pi2_us, rabi_khz, cfg.experiment.detuning_khz, eopt,
      dwell::default_theta_grid(cfg.experiment.theta_points));

  const char* name = echo ? "echo" : "ramsey";
  std::vector<std::vector<double>> rows;
  for (size_t i = 0; i < delays.size(); ++i)
    rows.push_back({scan.delay_us[i], scan.contrast_mean[i], scan.contrast_per_shot[i]});
  rec.write_csv(std::string(name) + ".csv", {"delay_us", "contrast_mean", "contrast_per_shot"},
                rows);

  json summary;
  summary["t_pi2_us"] = cfg.experiment.t_pi2_us;
  summary["pulse_rabi_khz"] = rabi_khz;
  const double t_mean = dwell::decay_time_1e(scan.delay_us, scan.contrast_mean);
  const double t_shot = dwell::decay_time_1e(scan.delay_us, scan.contrast_per_shot);
  summary["decay_1e_mean_us"] = finite_or_null(t_mean);
  summary["decay_1e_per_shot_us"] = finite_or_null(t_shot);
  rec.write_summary(std::string(name) + ".json", summary);
}

void cmd_interferometer(const dwell::Config& cfg, dwell::RunRecorder& rec) {
  const dwell::Lab lab = dwell::make_lab(cfg);
  const dwell::PropagatorOptions popt = dwell::make_propagator_options(cfg);
  const dwell::InterferometerOptions iopt = dwell::make_interferometer_options(cfg);
  const dwell::InterferometerResult r = dwell::exp_interferometer(iopt, lab, popt);

  std::vector<std::vector<double>> rows;
  for (size_t i = 0; i < r.p_hk.size(); ++i) rows.push_back({r.p_hk[i], r.density[i]});
  rec.write_csv("interferometer.csv", {"p_hk", "density"}, rows);

  json summary;
  summary["nu_left_khz"] = r.nu_left_khz;
  summary["nu_right_khz"] = r.nu_right_khz;
  summary["final_pulse"] = cfg.experiment.final_pulse;
  summary["imposed_phase_rad"] = cfg.experiment.imposed_phase_rad;
  summary["site_populations"] = {{"left_mminus1", r.pops.left[dwell::kMm1]},
                                 {"left_m0", r.pops.left[dwell::kM0]},
                                 {"right_mminus1", r.pops.right[dwell::kMm1]},
                                 {"right_m0", r.pops.right[dwell::kM0]}};
  try {
    const dwell::FringeFit fit = dwell::fit_momentum_fringes(r.p_hk, r.density);
    summary["fringes"] = {{"visibility", fit.visibility},
                          {"visibility_err", fit.visibility_err},
                          {"period_hk", fit.period_hk},
                          {"phase_rad", fit.phase_rad},
                          {"center_hk", fit.center_hk},
                          {"sigma_hk", fit.sigma_hk},
                          {"converged", fit.converged}};
  } catch (const std::exception& e) {
    summary["fringes"] = nullptr;
    summary["fringes_note"] = e.what();
  }
  rec.write_summary("interferometer.json", summary);
}

void cmd_calibrate(const dwell::Config& cfg, dwell::RunRecorder& rec) {
  const dwell::Lab lab = dwell::make_lab(cfg);
  const dwell::CalibrationResult cal =
      dwell::calibrate(cfg.experiment.target_splitting_khz, cfg.controls.v_half_er,
                       cfg.controls.v_lambda_er, lab, cfg.grid.n_stationary);
  const dwell::SpinPotentialGrid g =
      dwell::sample_cut(dwell::controls_to_beams(cal.controls, lab.constants), lab.bias,
                        cfg.grid.n_stationary, lab.constants);
  const dwell::SiteTransitions t = dwell::site_transitions(g, lab.constants);

  rec.write_csv("calibrate.csv",
                {"target_khz", "pol_phase_rad", "splitting_khz", "residual_khz", "nu_left_khz",
                 "nu_right_khz"},
                {{cfg.experiment.target_splitting_khz, cal.controls.pol_phase, cal.splitting_khz,
                  cal.residual_khz, t.nu_left_khz, t.nu_right_khz}});

  json summary;
  summary["target_splitting_khz"] = cfg.experiment.target_splitting_khz;
  summary["pol_phase_rad"] = cal.controls.pol_phase;
  summary["total_scale"] = cal.controls.total_scale;
  summary["splitting_khz"] = cal.splitting_khz;
  summary["residual_khz"] = cal.residual_khz;
  summary["max_reachable_khz"] = cal.max_reachable_khz;
  summary["measured_v_half_er"] = cal.v_half_er;
  summary["measured_v_lambda_er"] = cal.v_lambda_er;
  summary["converged"] = cal.converged;
  summary["iterations"] = cal.iterations;
  rec.write_summary("calibrate.json", summary);

  if (!cal.converged)
    throw std::runtime_error("calibration missed the target splitting: reachable " +
                             std::to_string(cal.max_reachable_khz) + " kHz, wanted " +
                             std::to_string(cfg.experiment.target_splitting_khz) + " kHz");
}

void cmd_selftest(const dwell::Config& cfg, dwell::RunRecorder& rec) {
  const dwell::Lab lab = dwell::make_lab(cfg);
  json checks = json::array();
  int failures = 0;
  auto check = [&](const char* name, auto&& fn) {
    std::string err;
    bool ok = false;
    try {
      ok = fn();
    } catch (const std::exception& e) {
      err = e.what();
    }
    std::cout << (ok ? "ok: " : "FAIL: ") << name;
    if (!ok && !err.empty()) std::cout << " (" << err << ")";
    std::cout << "\n";
    checks.push_back({{"name", name}, {"ok", ok}, {"error", err.empty() ? json() : json(err)}});
    if (!ok) ++failures;
  };

  check("recoil-frequency", [&] {
    const double er = lab.constants.recoil_khz();
    return er > 3.45 && er < 3.67;
  });
  check("synthesized-field", [&] {
    const dwell::LatticeControls lc = dwell::addressing_controls(-0.8);
    const dwell::SpinPotentialGrid g = dwell::sample_cut(
        dwell::controls_to_beams(lc, lab.constants), lab.bias, 256, lab.constants);
    double bmax = 0.0;
    for (double b : g.beff_proj_khz) bmax = std::max(bmax, std::abs(b));
    const dwell::MeasuredLattice m =
        dwell::measure_lattice(dwell::controls_to_beams(lc, lab.constants), lab.constants);
    return bmax > 10.0 && std::abs(m.v_half_er - lc.v_half_er) < 0.02 * lc.v_half_er &&
           std::abs(m.v_lambda_er - lc.v_lambda_er) < 0.02 * lc.v_lambda_er;
  });
  check("norm-conservation", [&] {
    const dwell::LatticeControls lc = dwell::addressing_controls(-0.8);
    dwell::PropagatorOptions popt;
    popt.n = 128;
    dwell::SpinorState s =
        dwell::load_ground_state(lc, dwell::kMm1, lab.bias, lab.constants, popt.n);
    dwell::ControlSchedule sched;
    dwell::ControlSegment seg;
    seg.t_start_us = 0.0;
    seg.t_end_us = 10.0;
    seg.from = seg.to = lc;
    sched.append(seg);
    dwell::Propagator prop(lab.constants, lab.bias, popt);
    prop.propagate(s, sched, {}, 10.0);
    return std::abs(s.norm() - 1.0) < 1e-9;
  });
  check("ensemble-determinism", [&] {
    dwell::EnsembleOptions e;
    e.shots = 8;
    e.atoms = 4;
    e.noise = dwell::calibrated_noise();
    e.seed = 42;
    std::vector<dwell::Sequence> seqs;
    std::vector<double> axis;
    for (int i = 0; i < 5; ++i) {
      seqs.push_back(dwell::make_ramsey(10.0 * i, 1.0, 250.0, 0.0));
      axis.push_back(10.0 * i);
    }
    const dwell::SweepResult a = dwell::run_sweep(0.0, seqs, axis, e);
    const dwell::SweepResult b = dwell::run_sweep(0.0, seqs, axis, e);
    e.seed = 43;
    const dwell::SweepResult c = dwell::run_sweep(0.0, seqs, axis, e);
    bool same = true, differ = false;
    for (size_t i = 0; i < axis.size(); ++i) {
      same = same && a.mean_p0[i] == b.mean_p0[i];
      differ = differ || a.mean_p0[i] != c.mean_p0[i];
    }
    return same && differ;
  });
  check("free-particle-spectrum", [&] {
    const double er = lab.constants.recoil_khz();
    const std::vector<double> v(64, 0.0);
    const dwell::Eigenpairs p = dwell::lowest_eigenpairs(dwell::build_hamiltonian(v, er), 3);
    return std::abs(p.energies_khz[0]) < 1e-9 * er &&
           std::abs(p.energies_khz[1] - er) < 1e-9 * er &&
           std::abs(p.energies_khz[2] - er) < 1e-9 * er;
  });

  json summary;
  summary["checks"] = checks;
  summary["failures"] = failures;
  rec.write_summary("selftest.json", summary);
  if (failures > 0)
    throw std::runtime_error(std::to_string(failures) + " selftest check(s) failed");
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"double-well lattice laboratory: spin-dependent potentials, sublattice "
               "spectroscopy, transport and interferometry"};
  bool defaults_flag = false;
  app.add_flag("--print-defaults", defaults_flag, "print the default configuration and exit");

  struct SubArgs {
    CLI::App* sub = nullptr;
    CLI::Option* seed_opt = nullptr;
    std::string config;
    std::string outdir = "out";
    uint64_t seed = 0;
  };
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"potential", "write the spin-dependent potentials and effective field along the cut"},
      {"spectrum", "sublattice-resolved RF spectroscopy of both wells"},
      {"transport-scan", "scan the transport target offset and report sorting fidelities"},
      {"rabi", "Rabi trace under the noise model (requires --seed)"},
      {"ramsey", "Ramsey contrast versus delay (requires --seed)"},
      {"echo", "spin-echo contrast versus delay (requires --seed)"},
      {"interferometer", "transport interferometer with momentum-space readout"},
      {"calibrate", "solve the polarization phase for a target sublattice splitting"},
      {"selftest", "run quick internal consistency checks"},
  };
  std::map<std::string, SubArgs> args;
  for (const auto& [name, desc] : commands) {
    SubArgs& a = args[name];
    a.sub = app.add_subcommand(name, desc);
    a.sub->add_option("--config", a.config, "configuration file (searched via DWELL_CONFIG_PATH)");
    a.sub->add_option("--outdir", a.outdir, "output directory")->capture_default_str();
    a.seed_opt = a.sub->add_option("--seed", a.seed, "random seed");
    if (name == "rabi" || name == "ramsey" || name == "echo") a.seed_opt->required();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (defaults_flag) {
    std::cout << dwell::print_defaults();
    return 0;
  }

  const SubArgs* chosen = nullptr;
  std::string cmd;
  for (auto& [name, a] : args) {
    if (a.sub->parsed()) {
      chosen = &a;
      cmd = name;
    }
  }
  if (!chosen) {
    std::cerr << app.help();
    return 2;
  }

  dwell::Config cfg;
  try {
    if (!chosen->config.empty()) cfg = dwell::parse_config_file(find_config(chosen->config));
  } catch (const dwell::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  std::error_code ec;
  fs::create_directories(chosen->outdir, ec);
  if (ec) {
    std::cerr << "cannot create output directory '" << chosen->outdir << "': " << ec.message()
              << "\n";
    return 1;
  }

  const bool seed_set = chosen->seed_opt->count() > 0;
  dwell::RunRecorder rec(chosen->outdir, cmd, cfg, chosen->seed, seed_set);
  try {
    if (cmd == "potential") cmd_potential(cfg, rec);
    else if (cmd == "spectrum") cmd_spectrum(cfg, rec);
    else if (cmd == "transport-scan") cmd_transport_scan(cfg, rec);
    else if (cmd == "rabi") cmd_rabi(cfg, rec, chosen->seed);
    else if (cmd == "ramsey") cmd_coherence(cfg, rec, chosen->seed, false);
    else if (cmd == "echo") cmd_coherence(cfg, rec, chosen->seed, true);
    else if (cmd == "interferometer") cmd_interferometer(cfg, rec);
    else if (cmd == "calibrate") cmd_calibrate(cfg, rec);
    else if (cmd == "selftest") cmd_selftest(cfg, rec);
    rec.finish("ok");
  } catch (const std::exception& e) {
    rec.finish("error", e.what());
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
