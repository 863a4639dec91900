#pragma once

// Configuration parsing (sectioned key = value text), CSV/JSON emission with
// round-trip-exact floats, and the per-run manifest with output checksums.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "constants.hpp"
#include "dynamics.hpp"
#include "ensemble.hpp"
#include "field.hpp"
#include "protocols.hpp"

namespace dwell {

using json = nlohmann::json;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline double config_nan() { return std::numeric_limits<double>::quiet_NaN(); }

// Resolved configuration with documented defaults.  NaN / negative sentinels
// mean "derive or use the command's own default".
struct Config {
  struct Constants {
    double lambda_nm = 803.0;
    double mass_kg = 1.4431607e-25;
    double beam_power_mw = 100.0;
    double beam_waist_um = 170.0;
    double bias_mt = 4.8;
    double gf_mub_hz_per_t = 7.176250e9;
    double q_quad_hz_per_t2 = 1.3020833e10;
    double alpha_s_khz = config_nan(); // NaN: derive from the beam parameters
    double alpha_v_khz = config_nan(); // NaN: derive; 0 turns the vector shift off
  } constants;
  struct Controls {
    double v_half_er = 80.0;
    double v_lambda_er = 52.0;
    double dx = -0.5;
    double pol_phase_rad = 0.0;
    double total_scale = 1.0;
  } controls;
  struct Noise {
    double sigma_shot_khz = 0.0;
    double walk_d_khz2_us = 0.0;
    double sigma_spatial_khz = 0.0;
    double substep_us = 1.0;
    int shots = 200;
    int atoms = 16;
  } noise;
  struct Grid {
    int n = 256;
    int n_stationary = 512;
    double dt_us = 0.01;
  } grid;
  struct Schedule {
    double load_duration_us = 500.0;
    double load_tau_us = 100.0;
    double transport_t1_us = 1000.0;
    double transport_t2_us = 150.0;
    double transport_v_lambda_start_er = 100.0;
    double transport_dx_start = -0.62;
    double transport_handover_ratio = 0.95;
    double transport_handover_total_er = 60.0;
    double transport_v_half_final_er = 80.0;
    double transport_pol_phase_rad = -1.3;
    std::string ramp_shape = "min_jerk";    // hold | linear | min_jerk
    std::string transport_dx_shape = "min_jerk";
  } schedule;
  struct Experiment {
    double scan_start = config_nan();
    double scan_stop = config_nan();
    int scan_points = -1;
    double rf_pulse_us = 30.0;
    double rf_rabi_khz = 1000.0 / 60.0; // pi area over 30 us
    double rabi_drive_khz = 15.8;
    double detuning_khz = 0.0;
    double t_pi2_us = 15.0;
    int theta_points = 8;
    double dx_final = -0.45;
    double echo_at_us = 400.0;
    double settle_us = 40.0;
    double readout_pol_phase_rad = -0.94;
    double t_select_us = 30.0;
    std::string final_pulse = "selective"; // selective | none | global
    std::string readout = "transport";     // ideal | transport (rabi command)
    double imposed_phase_rad = 0.0;
    int cells = 1;
    double envelope_sigma_cells = 0.0;
    double p_max_hk = 8.0;
    int p_points = 321;
    double target_splitting_khz = 32.0;
  } experiment;
};

namespace detail {

struct ConfigValue {
  enum class Kind { number, string } kind = Kind::number;
  double num = 0.0;
  std::string str;
};

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double need_number(const ConfigValue& v, const std::string& path) {
  if (v.kind != ConfigValue::Kind::number)
    throw ConfigError("key '" + path + "' expects a number");
  return v.num;
}

inline std::string need_string(const ConfigValue& v, const std::string& path) {
  if (v.kind != ConfigValue::Kind::string)
    throw ConfigError("key '" + path + "' expects a word");
  return v.str;
}

template <typename T>
void assign_checked(T& slot, double v, const std::string& path, double lo, double hi,
                    bool allow_nan = false) {
  if constexpr (std::is_integral_v<T>) {
    const double r = std::round(v);
    if (!(std::abs(r - v) <= 1e-9))
      throw ConfigError("key '" + path + "' expects an integer");
    if (!(v >= lo && v <= hi))
      throw ConfigError("key '" + path + "' out of range [" + format_double(lo) + ", " +
                        format_double(hi) + "]");
    slot = static_cast<T>(r);
  } else {
    if (std::isnan(v)) {
      // nan is the "re-arm the derived default" sentinel, legal only where documented
      if (!allow_nan) throw ConfigError("key '" + path + "' does not accept nan");
      slot = static_cast<T>(v);
      return;
    }
    if (!(v >= lo && v <= hi))
      throw ConfigError("key '" + path + "' out of range [" + format_double(lo) + ", " +
                        format_double(hi) + "]");
    slot = static_cast<T>(v);
  }
}

struct KeyHandler {
  const char* doc;
  std::function<void(Config&, const ConfigValue&, const std::string&)> set;
  std::function<std::string(const Config&)> get;
};

inline const std::vector<std::pair<std::string, KeyHandler>>& config_keys() {
  static const std::vector<std::pair<std::string, KeyHandler>> keys = [] {
    std::vector<std::pair<std::string, KeyHandler>> k;

    auto add_num = [&k](const char* path, const char* doc, auto getter,
                        double lo = -std::numeric_limits<double>::infinity(),
                        double hi = std::numeric_limits<double>::infinity(),
                        bool allow_nan = false) {
      k.push_back({path,
                   {doc,
                    [getter, lo, hi, allow_nan](Config& c, const ConfigValue& v,
                                                const std::string& p) {
                      assign_checked(getter(c), need_number(v, p), p, lo, hi, allow_nan);
                    },
                    [getter](const Config& c) {
                      auto& slot = getter(const_cast<Config&>(c));
                      return format_double(static_cast<double>(slot));
                    }}});
    };
    auto add_str = [&k](const char* path, const char* doc, auto getter,
                        std::vector<std::string> allowed) {
      k.push_back({path,
                   {doc,
                    [getter, allowed](Config& c, const ConfigValue& v, const std::string& p) {
                      std::string s = need_string(v, p);
                      bool ok = false;
                      for (const auto& a : allowed) ok = ok || a == s;
                      if (!ok) throw ConfigError("key '" + p + "' has unsupported value '" + s + "'");
                      getter(c) = s;
                    },
                    [getter](const Config& c) { return getter(const_cast<Config&>(c)); }}});
    };

#define DW_NUM(path, doc, expr, ...) \
  add_num(path, doc, [](Config& c) -> decltype(auto) { return (expr); }, ##__VA_ARGS__)
#define DW_STR(path, doc, expr, ...) \
  add_str(path, doc, [](Config& c) -> std::string& { return (expr); }, __VA_ARGS__)

    DW_NUM("constants.lambda_nm", "trap light wavelength, nm", c.constants.lambda_nm, 400.0, 2000.0);
    DW_NUM("constants.mass_kg", "atomic mass, kg", c.constants.mass_kg, 1e-27, 1e-24);
    DW_NUM("constants.beam_power_mw", "single-beam power, mW", c.constants.beam_power_mw, 0.0, 1e5);
    DW_NUM("constants.beam_waist_um", "beam 1/e^2 radius, um", c.constants.beam_waist_um, 1.0, 1e5);
    DW_NUM("constants.bias_mt", "bias field magnitude, mT", c.constants.bias_mt, 0.0, 100.0);
    DW_NUM("constants.gf_mub_hz_per_t", "linear Zeeman coefficient, Hz/T", c.constants.gf_mub_hz_per_t, 0.0, 1e12);
    DW_NUM("constants.q_quad_hz_per_t2", "quadratic Zeeman coefficient, Hz/T^2", c.constants.q_quad_hz_per_t2, 0.0, 1e14);
    DW_NUM("constants.alpha_s_khz", "scalar shift coefficient, kHz (nan = derive)", c.constants.alpha_s_khz, 0.0, std::numeric_limits<double>::infinity(), true);
    DW_NUM("constants.alpha_v_khz", "vector shift coefficient, kHz (nan = derive, 0 = off)", c.constants.alpha_v_khz, 0.0, std::numeric_limits<double>::infinity(), true);

    DW_NUM("controls.v_half_er", "lambda/2-lattice depth, recoils", c.controls.v_half_er, 0.0, 1e4);
    DW_NUM("controls.v_lambda_er", "lambda-lattice depth, recoils", c.controls.v_lambda_er, 0.0, 1e4);
    DW_NUM("controls.dx", "lambda-lattice offset, lambda units", c.controls.dx, -1.0, 0.0);
    DW_NUM("controls.pol_phase_rad", "vertical/in-plane polarization phase, rad", c.controls.pol_phase_rad, -kPi, kPi);
    DW_NUM("controls.total_scale", "overall intensity factor", c.controls.total_scale, 0.0, 100.0);

    DW_NUM("noise.sigma_shot_khz", "per-shot detuning offset sigma, kHz", c.noise.sigma_shot_khz, 0.0, 1e3);
    DW_NUM("noise.walk_d_khz2_us", "detuning random-walk diffusion, kHz^2/us", c.noise.walk_d_khz2_us, 0.0, 1e3);
    DW_NUM("noise.sigma_spatial_khz", "per-atom detuning sigma, kHz", c.noise.sigma_spatial_khz, 0.0, 1e3);
    DW_NUM("noise.substep_us", "pulse substep when the walk is active, us", c.noise.substep_us, 1e-3, 100.0);
    DW_NUM("noise.shots", "Monte Carlo shots", c.noise.shots, 1, 1e7);
    DW_NUM("noise.atoms", "atoms per shot", c.noise.atoms, 1, 1e6);

    DW_NUM("grid.n", "propagation grid points (power of two)", c.grid.n, 16, 4096);
    DW_NUM("grid.n_stationary", "eigenproblem grid points", c.grid.n_stationary, 32, 4096);
    DW_NUM("grid.dt_us", "propagation step, us", c.grid.dt_us, 1e-5, 1.0);

    DW_NUM("schedule.load_duration_us", "lattice turn-on duration, us", c.schedule.load_duration_us, 0.1, 1e6);
    DW_NUM("schedule.load_tau_us", "turn-on exponential time constant, us", c.schedule.load_tau_us, 0.1, 1e6);
    DW_NUM("schedule.transport_t1_us", "transport first-step duration, us", c.schedule.transport_t1_us, 1.0, 1e6);
    DW_NUM("schedule.transport_t2_us", "transport second-step duration, us", c.schedule.transport_t2_us, 1.0, 1e6);
    DW_NUM("schedule.transport_v_lambda_start_er", "initial single-well depth, recoils", c.schedule.transport_v_lambda_start_er, 1.0, 1e4);
    DW_NUM("schedule.transport_dx_start", "initial lattice offset, lambda", c.schedule.transport_dx_start, -1.0, 0.0);
    DW_NUM("schedule.transport_handover_ratio", "v_lambda/v_half at the end of step one", c.schedule.transport_handover_ratio, 0.0, 100.0);
    DW_NUM("schedule.transport_handover_total_er", "total depth at the end of step one, recoils", c.schedule.transport_handover_total_er, 1.0, 1e4);
    DW_NUM("schedule.transport_v_half_final_er", "final lambda/2 depth, recoils", c.schedule.transport_v_half_final_er, 1.0, 1e4);
    DW_NUM("schedule.transport_pol_phase_rad", "polarization phase during transport, rad", c.schedule.transport_pol_phase_rad, -kPi, kPi);
    DW_STR("schedule.ramp_shape", "depth ramp shape: hold | linear | min_jerk", c.schedule.ramp_shape,
           {std::string("hold"), std::string("linear"), std::string("min_jerk")});
    DW_STR("schedule.transport_dx_shape", "offset ramp shape: hold | linear | min_jerk",
           c.schedule.transport_dx_shape,
           {std::string("hold"), std::string("linear"), std::string("min_jerk")});

    DW_NUM("experiment.scan_start", "scan start (command-specific units)", c.experiment.scan_start,
           -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), true);
    DW_NUM("experiment.scan_stop", "scan stop (command-specific units)", c.experiment.scan_stop,
           -std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), true);
    DW_NUM("experiment.scan_points", "scan point count", c.experiment.scan_points, -1, 1e6);
    DW_NUM("experiment.rf_pulse_us", "spectroscopy pulse duration, us", c.experiment.rf_pulse_us, 0.01, 1e6);
    DW_NUM("experiment.rf_rabi_khz", "spectroscopy pulse Rabi frequency, kHz", c.experiment.rf_rabi_khz, 0.0, 1e4);
    DW_NUM("experiment.rabi_drive_khz", "Rabi-trace drive frequency, kHz", c.experiment.rabi_drive_khz, 0.01, 1e4);
    DW_NUM("experiment.detuning_khz", "base detuning from resonance, kHz", c.experiment.detuning_khz, -1e4, 1e4);
    DW_NUM("experiment.t_pi2_us", "pi/2 pulse duration, us", c.experiment.t_pi2_us, 0.01, 1e5);
    DW_NUM("experiment.theta_points", "analysis phases per fringe scan", c.experiment.theta_points, 3, 1e4);
    DW_NUM("experiment.dx_final", "transport target offset, lambda", c.experiment.dx_final, -1.0, 0.0);
    DW_NUM("experiment.echo_at_us", "echo pi start after the pi/2 start, us", c.experiment.echo_at_us, 0.0, 1e6);
    DW_NUM("experiment.settle_us", "readout-lattice settle time, us", c.experiment.settle_us, 0.1, 1e5);
    DW_NUM("experiment.readout_pol_phase_rad", "polarization phase of the readout lattice, rad", c.experiment.readout_pol_phase_rad, -kPi, kPi);
    DW_NUM("experiment.t_select_us", "site-selective pulse duration, us", c.experiment.t_select_us, 0.1, 1e5);
    DW_STR("experiment.final_pulse", "interferometer last pulse: selective | none | global", c.experiment.final_pulse,
           {std::string("selective"), std::string("none"), std::string("global")});
    DW_STR("experiment.readout", "rabi readout: ideal | transport", c.experiment.readout,
           {std::string("ideal"), std::string("transport")});
    DW_NUM("experiment.imposed_phase_rad", "phase imposed on the mF=0 component, rad", c.experiment.imposed_phase_rad, -100.0, 100.0);
    DW_NUM("experiment.cells", "occupied cells in the release pattern", c.experiment.cells, 1, 1e4);
    DW_NUM("experiment.envelope_sigma_cells", "Gaussian cell-weight sigma (0 = uniform)", c.experiment.envelope_sigma_cells, 0.0, 1e4);
    DW_NUM("experiment.p_max_hk", "momentum half-range, photon recoils", c.experiment.p_max_hk, 1.0, 100.0);
    DW_NUM("experiment.p_points", "momentum samples", c.experiment.p_points, 16, 1e6);
    DW_NUM("experiment.target_splitting_khz", "calibration target splitting, kHz", c.experiment.target_splitting_khz, -1e3, 1e3);
#undef DW_NUM
#undef DW_STR
    return k;
  }();
  return keys;
}

inline const KeyHandler* find_key(const std::string& path) {
  for (const auto& [p, h] : config_keys())
    if (p == path) return &h;
  return nullptr;
}

} // namespace detail

inline std::string print_defaults() {
  const Config def;
  std::string out = "# default configuration; values shown are the built-in defaults\n";
  std::string cur_section;
  for (const auto& [path, handler] : detail::config_keys()) {
    const auto dot = path.find('.');
    const std::string sec = path.substr(0, dot), key = path.substr(dot + 1);
    if (sec != cur_section) {
      out += "\n[" + sec + "]\n";
      cur_section = sec;
    }
    out += key + " = " + handler.get(def) + "  # " + handler.doc + "\n";
  }
  return out;
}

inline json config_snapshot(const Config& c) {
  json j;
  for (const auto& [path, handler] : detail::config_keys()) {
    const auto dot = path.find('.');
    const std::string val = handler.get(c);
    double num = 0.0;
    const auto res = std::from_chars(val.data(), val.data() + val.size(), num);
    if (res.ec == std::errc() && res.ptr == val.data() + val.size()) {
      // the derive-sentinel nan serializes as null, not as a non-finite number
      if (std::isnan(num))
        j[path.substr(0, dot)][path.substr(dot + 1)] = nullptr;
      else
        j[path.substr(0, dot)][path.substr(dot + 1)] = num;
    } else
      j[path.substr(0, dot)][path.substr(dot + 1)] = val;
  }
  return j;
}

// Parses "[section]" / "key = value" text with '#' or ';' comments.  Unknown
// sections or keys and malformed lines are reported with line and column.
inline Config parse_config_text(const std::string& text, Config base = {}) {
  Config cfg = base;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  auto fail = [&](int col, const std::string& msg) {
    throw ConfigError("line " + std::to_string(lineno) + ", col " + std::to_string(col) + ": " +
                      msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    size_t b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    size_t e = line.find_last_not_of(" \t\r");
    const std::string body = line.substr(b, e - b + 1);

    if (body.front() == '[') {
      if (body.back() != ']') fail(static_cast<int>(b) + 1, "unterminated section header");
      section = body.substr(1, body.size() - 2);
      bool known = false;
      for (const auto& [path, h] : detail::config_keys())
        known = known || path.compare(0, path.find('.'), section) == 0;
      if (!known) fail(static_cast<int>(b) + 1, "unknown section '" + section + "'");
      continue;
    }

    const auto eq = body.find('=');
    if (eq == std::string::npos) fail(static_cast<int>(b) + 1, "expected 'key = value'");
    std::string key = body.substr(0, eq);
    std::string value = body.substr(eq + 1);
    const auto ke = key.find_last_not_of(" \t");
    if (ke == std::string::npos) fail(static_cast<int>(b) + 1, "missing key before '='");
    key.erase(ke + 1);
    const auto vb = value.find_first_not_of(" \t");
    if (vb == std::string::npos) fail(static_cast<int>(b + eq) + 2, "missing value after '='");
    value = value.substr(vb);
    const auto ve = value.find_last_not_of(" \t");
    value.erase(ve + 1);
    if (section.empty()) fail(static_cast<int>(b) + 1, "key outside any [section]");

    const std::string path = section + "." + key;
    const detail::KeyHandler* handler = detail::find_key(path);
    if (!handler) fail(static_cast<int>(b) + 1, "unknown key '" + path + "'");

    detail::ConfigValue v;
    if (!value.empty() && value.front() == '"' && value.back() == '"' && value.size() >= 2) {
      v.kind = detail::ConfigValue::Kind::string;
      v.str = value.substr(1, value.size() - 2);
    } else {
      double num = 0.0;
      const auto res = std::from_chars(value.data(), value.data() + value.size(), num);
      if (res.ec == std::errc() && res.ptr == value.data() + value.size()) {
        v.kind = detail::ConfigValue::Kind::number;
        v.num = num;
      } else if (value == "nan") {
        v.kind = detail::ConfigValue::Kind::number;
        v.num = config_nan();
      } else {
        v.kind = detail::ConfigValue::Kind::string;
        v.str = value;
      }
    }
    try {
      handler->set(cfg, v, path);
    } catch (const ConfigError& err) {
      fail(static_cast<int>(b) + 1, err.what());
    }
  }
  return cfg;
}

inline Config parse_config_file(const std::string& path, Config base = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config_text(ss.str(), base);
  } catch (const ConfigError& err) {
    throw ConfigError(path + ": " + err.what());
  }
}

// --- materialization into physics objects -------------------------------

inline Lab make_lab(const Config& cfg) {
  Lab lab;
  lab.constants.lambda_m = cfg.constants.lambda_nm * 1e-9;
  lab.constants.mass_kg = cfg.constants.mass_kg;
  lab.constants.beam_power_w = cfg.constants.beam_power_mw * 1e-3;
  lab.constants.beam_waist_m = cfg.constants.beam_waist_um * 1e-6;
  lab.constants.gf_mub_hz_per_t = cfg.constants.gf_mub_hz_per_t;
  lab.constants.q_quad_hz_per_t2 = cfg.constants.q_quad_hz_per_t2;
  const Polarizabilities p = derive_polarizabilities(
      lab.constants.lambda_m, lab.constants.beam_power_w, lab.constants.beam_waist_m);
  lab.constants.alpha_s_khz =
      std::isnan(cfg.constants.alpha_s_khz) ? p.alpha_s_khz : cfg.constants.alpha_s_khz;
  lab.constants.alpha_v_khz =
      std::isnan(cfg.constants.alpha_v_khz) ? p.alpha_v_khz : cfg.constants.alpha_v_khz;
  lab.bias.magnitude_t = cfg.constants.bias_mt * 1e-3;
  return lab;
}

inline LatticeControls make_controls(const Config& cfg) {
  LatticeControls lc;
  lc.v_half_er = cfg.controls.v_half_er;
  lc.v_lambda_er = cfg.controls.v_lambda_er;
  lc.dx = cfg.controls.dx;
  lc.pol_phase = cfg.controls.pol_phase_rad;
  lc.total_scale = cfg.controls.total_scale;
  return lc;
}

inline PropagatorOptions make_propagator_options(const Config& cfg) {
  PropagatorOptions p;
  p.n = cfg.grid.n;
  p.dt_us = cfg.grid.dt_us;
  return p;
}

inline NoiseModel make_noise(const Config& cfg) {
  NoiseModel nm;
  nm.sigma_shot_khz = cfg.noise.sigma_shot_khz;
  nm.walk_d_khz2_us = cfg.noise.walk_d_khz2_us;
  nm.sigma_spatial_khz = cfg.noise.sigma_spatial_khz;
  return nm;
}

inline EnsembleOptions make_ensemble_options(const Config& cfg, uint64_t seed) {
  EnsembleOptions e;
  e.shots = cfg.noise.shots;
  e.atoms = cfg.noise.atoms;
  e.noise = make_noise(cfg);
  e.seed = seed;
  e.substep_us = cfg.noise.substep_us;
  return e;
}

inline RampShape make_ramp_shape(const std::string& name) {
  if (name == "hold") return RampShape::hold;
  if (name == "linear") return RampShape::linear;
  if (name == "min_jerk") return RampShape::min_jerk;
  throw ConfigError("unknown ramp shape '" + name + "'");
}

inline TransportOptions make_transport_options(const Config& cfg) {
  TransportOptions t;
  t.dx_final = cfg.experiment.dx_final;
  t.pol_phase = cfg.schedule.transport_pol_phase_rad;
  t.t1_us = cfg.schedule.transport_t1_us;
  t.t2_us = cfg.schedule.transport_t2_us;
  t.v_lambda_start_er = cfg.schedule.transport_v_lambda_start_er;
  t.dx_start = cfg.schedule.transport_dx_start;
  t.handover_ratio = cfg.schedule.transport_handover_ratio;
  t.handover_total_er = cfg.schedule.transport_handover_total_er;
  t.v_half_final_er = cfg.schedule.transport_v_half_final_er;
  t.depth_shape = make_ramp_shape(cfg.schedule.ramp_shape);
  t.dx_shape = make_ramp_shape(cfg.schedule.transport_dx_shape);
  return t;
}

inline InterferometerOptions make_interferometer_options(const Config& cfg) {
  InterferometerOptions o;
  o.transport = make_transport_options(cfg);
  o.rabi_khz = cfg.experiment.rf_rabi_khz;
  o.t_pi2_us = cfg.experiment.t_pi2_us;
  o.echo_at_us = cfg.experiment.echo_at_us;
  o.settle_us = cfg.experiment.settle_us;
  o.v_lambda_readout_er = cfg.controls.v_lambda_er;
  o.pol_phase_readout = cfg.experiment.readout_pol_phase_rad;
  o.t_select_us = cfg.experiment.t_select_us;
  if (cfg.experiment.final_pulse == "selective") o.final_pulse = FinalPulse::selective;
  else if (cfg.experiment.final_pulse == "none") o.final_pulse = FinalPulse::none;
  else o.final_pulse = FinalPulse::global_pi;
  o.imposed_phase_rad = cfg.experiment.imposed_phase_rad;
  o.cells = cfg.experiment.cells;
  o.envelope_sigma_cells = cfg.experiment.envelope_sigma_cells;
  o.p_max_hk = cfg.experiment.p_max_hk;
  o.p_points = cfg.experiment.p_points;
  return o;
}

// --- emission -------------------------------------------------------------

inline std::string format_csv_number(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string render_csv(const std::vector<std::string>& columns,
                              const std::vector<std::vector<double>>& rows) {
  std::string out;
  for (size_t i = 0; i < columns.size(); ++i) {
    if (i) out += ',';
    out += columns[i];
  }
  out += '\n';
  for (size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != columns.size())
      throw std::invalid_argument("render_csv: ragged row " + std::to_string(r));
    for (size_t i = 0; i < rows[r].size(); ++i) {
      if (!std::isfinite(rows[r][i]))
        throw std::invalid_argument("render_csv: non-finite value at row " + std::to_string(r) +
                                    ", column " + columns[i]);
      if (i) out += ',';
      out += format_csv_number(rows[r][i]);
    }
    out += '\n';
  }
  return out;
}

inline uint64_t fnv1a64(const std::string& data) {
  uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex64(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[v & 0xF];
    v >>= 4;
  }
  return s;
}

inline std::string iso8601_utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Collects outputs of one run and writes the manifest (always, including on
// failure) with an fnv1a64 checksum per emitted file.
class RunRecorder {
public:
  RunRecorder(std::string out_dir, std::string command, const Config& cfg, uint64_t seed,
              bool seed_set)
      : dir_(std::move(out_dir)), command_(std::move(command)) {
    manifest_["tool"] = "dwell";
    manifest_["version"] = "1.0.0";
    manifest_["command"] = command_;
    manifest_["config"] = config_snapshot(cfg);
    if (seed_set) manifest_["seed"] = seed;
    else manifest_["seed"] = nullptr;
    manifest_["started_at"] = iso8601_utc_now();
    manifest_["outputs"] = json::array();
  }

  const std::string& dir() const { return dir_; }

  std::string write_text(const std::string& name, const std::string& content) {
    const std::string path = dir_ + "/" + name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file '" + path + "'");
    out << content;
    out.close();
    if (!out) throw std::runtime_error("failed writing output file '" + path + "'");
    json rec;
    rec["path"] = name;
    rec["bytes"] = content.size();
    rec["fnv1a64"] = hex64(fnv1a64(content));
    manifest_["outputs"].push_back(rec);
    return path;
  }

  void write_csv(const std::string& name, const std::vector<std::string>& columns,
                 const std::vector<std::vector<double>>& rows) {
    write_text(name, render_csv(columns, rows));
  }

  void write_summary(const std::string& name, const json& summary) {
    write_text(name, summary.dump(2) + "\n");
  }

  // status: "ok" or "error"
  void finish(const std::string& status, const std::string& error_message = "") {
    manifest_["finished_at"] = iso8601_utc_now();
    manifest_["status"] = status;
    if (!error_message.empty()) manifest_["error"] = error_message;
    const std::string path = dir_ + "/manifest.json";
    std::ofstream out(path, std::ios::binary);
    out << manifest_.dump(2) << "\n";
  }

private:
  std::string dir_, command_;
  json manifest_;
};

inline std::vector<double> linspace(double a, double b, int n) {
  if (n < 1) throw std::invalid_argument("linspace: need n >= 1");
  std::vector<double> v(n);
  if (n == 1) {
    v[0] = a;
    return v;
  }
  for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
  return v;
}

} // namespace dwell
