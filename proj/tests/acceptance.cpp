// Acceptance checks for the double-well lattice laboratory: one PASS/FAIL
// line per criterion, exit status 0 only if all ten hold.  argv[1] must be
// the path of the command-line tool (used for the determinism check).

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <dwell/dwell.hpp>

using namespace dwell;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

void report(int idx, bool ok, const std::string& detail) {
    std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", idx, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

template <typename Fn>
void criterion(int idx, Fn&& fn) {
    try {
        fn();
    } catch (const std::exception& e) {
        report(idx, false, fmt("unexpected exception: %s", e.what()));
    }
}

double spinor_fidelity(const SpinorState& a, const SpinorState& b) {
    complexd acc(0.0, 0.0);
    for (int c = 0; c < 2; ++c)
        for (int j = 0; j < a.n; ++j) acc += std::conj(a.psi[c][j]) * b.psi[c][j];
    return std::norm(acc / static_cast<double>(a.n));
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
    const std::string cli = argc > 1 ? argv[1] : "";
    const Lab lab;
    const auto t_begin = std::chrono::steady_clock::now();

    // 1: photon recoil energy of the trapping light
    criterion(1, [&] {
        const double er = lab.constants.recoil_khz();
        const bool ok = std::abs(er / 3.56 - 1.0) <= 0.03;
        report(1, ok, fmt("photon recoil energy %.6f kHz within 3%% of 3.56 kHz", er));
    });

    // 2: peak vector light shift of the lower spin state at standard depths
    criterion(2, [&] {
        Lab off = lab;
        off.constants.alpha_v_khz = 0.0;
        const LatticeControls lc{80.0, 52.0, -0.5, kPi / 2.0, 1.0};
        const int n = 512;
        const SpinPotentialGrid gv =
            sample_cut(controls_to_beams(lc, lab.constants), lab.bias, n, lab.constants);
        const SpinPotentialGrid g0 =
            sample_cut(controls_to_beams(lc, off.constants), off.bias, n, off.constants);
        double uv = 0.0;
        for (int j = 0; j < n; ++j)
            uv = std::max(uv, std::abs(gv.v_mminus1_khz[j] - g0.v_mminus1_khz[j]));
        const bool ok = uv >= 50.0 && uv <= 200.0;
        report(2, ok, fmt("peak vector shift of the m=-1 potential %.1f kHz inside [50, 200]", uv));
    });

    // 3: sublattice addressing after splitting calibration
    criterion(3, [&] {
        const CalibrationResult cal = calibrate(32.0, 80.0, 52.0, lab);
        PropagatorOptions popt;
        popt.n = 256;
        popt.dt_us = 0.02;
        const SpinPotentialGrid g = sample_cut(controls_to_beams(cal.controls, lab.constants),
                                               lab.bias, popt.n, lab.constants);
        const SiteTransitions table = site_transitions(g, lab.constants);
        const double nu0 = bare_transition_khz(lab.bias, lab.constants);
        const SpectroscopyResult sr = exp_addressing_spectroscopy(
            cal.controls, {table.nu_left_khz - nu0, table.nu_right_khz - nu0}, 30.0,
            1000.0 / 60.0, lab, popt);
        const double transfer_l = 1.0 - sr.p_remain_left[0];
        const double transfer_r = 1.0 - sr.p_remain_right[1];
        const double cross_r = 1.0 - sr.p_remain_right[0];  // right atoms lost at left line
        const double cross_l = 1.0 - sr.p_remain_left[1];
        const bool ok = cal.converged && std::abs(table.splitting_khz - 32.0) <= 2.0 &&
                        transfer_l >= 0.75 && transfer_r >= 0.75 && cross_r <= 0.25 &&
                        cross_l <= 0.25;
        report(3, ok,
               fmt("resonances split by %.3f kHz (32 +/- 2); transfer %.3f/%.3f; "
                   "crosstalk %.1f%%/%.1f%% <= 25%%",
                   table.splitting_khz, transfer_l, transfer_r, 100.0 * cross_r,
                   100.0 * cross_l));
    });

    // 4: transport offset scan finds the sorting point; spin-blind without the
    //    vector shift; completes within five minutes
    criterion(4, [&] {
        PropagatorOptions popt;
        popt.n = 256;
        popt.dt_us = 0.02;
        const auto t0 = std::chrono::steady_clock::now();
        const TransportScanResult scan =
            exp_transport_scan(linspace(-0.5, -0.3, 21), TransportOptions{}, lab, popt);
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const double best_dx = scan.dx[scan.i_best];
        const double fid_m0 = scan.p_r_m0[scan.i_best];
        const double fid_mm1 = 1.0 - scan.p_r_mm1[scan.i_best];

        Lab off = lab;
        off.constants.alpha_v_khz = 0.0;
        const TransportScanResult blind =
            exp_transport_scan({-0.45, -0.38}, TransportOptions{}, off, popt);
        double mismatch = 0.0;
        for (size_t i = 0; i < blind.dx.size(); ++i)
            mismatch = std::max(mismatch, std::abs(blind.p_r_m0[i] - blind.p_r_mm1[i]));

        const bool ok = std::abs(best_dx + 0.42) <= 0.06 + 1e-12 && fid_m0 >= 0.90 &&
                        fid_mm1 >= 0.90 && mismatch < 1e-6 && elapsed < 300.0;
        report(4, ok,
               fmt("best offset %.2f (-0.42 +/- 0.06), fidelities %.5f/%.5f >= 0.90, "
                   "spin-blind mismatch %.1e < 1e-6, scan %.0f s < 300 s",
                   best_dx, fid_m0, fid_mm1, mismatch, elapsed));
    });

    // 5: vibrational spacing of the deep half-wavelength lattice
    criterion(5, [&] {
        const LatticeControls lc{80.0, 0.0, -0.5, 0.0, 1.0};
        const SpinPotentialGrid g =
            sample_cut(controls_to_beams(lc, lab.constants), lab.bias, 512, lab.constants);
        const Eigen::MatrixXd h = build_hamiltonian(g.v_m0_khz, lab.constants.recoil_khz());
        const Eigenpairs p = lowest_eigenpairs(h, 4);
        const double spacing = 0.5 * (p.energies_khz[2] + p.energies_khz[3]) -
                               0.5 * (p.energies_khz[0] + p.energies_khz[1]);
        const double harmonic = 2.0 * std::sqrt(80.0) * lab.constants.recoil_khz();
        const bool ok = std::abs(spacing / harmonic - 1.0) <= 0.10;
        report(5, ok,
               fmt("band spacing %.2f kHz within 10%% of the harmonic value %.2f kHz", spacing,
                   harmonic));
    });

    // 6: propagator integrity: unitarity, second-order step error, reversibility
    criterion(6, [&] {
        const LatticeControls from{25.0, 10.0, -0.5, 0.2, 1.0};
        const LatticeControls to{55.0, 28.0, -0.42, 0.2, 1.0};
        ControlSegment seg;
        seg.t_end_us = 16.0;
        seg.from = from;
        seg.to = to;
        ControlSchedule sched;
        sched.append(seg);
        RfPulse p;
        p.t_end_us = 16.0;
        p.freq_khz = bare_transition_khz(lab.bias, lab.constants) + 10.0;
        p.rabi_khz = 25.0;
        double norm_dev = 0.0;
        auto run = [&](double dt) {
            PropagatorOptions opt;
            opt.n = 64;
            opt.dt_us = dt;
            Propagator prop(lab.constants, lab.bias, opt);
            SpinorState s = load_ground_state(from, kMm1, lab.bias, lab.constants, opt.n);
            prop.propagate(s, sched, {p}, 16.0);
            norm_dev = std::max(norm_dev, std::abs(s.norm() - 1.0));
            return s;
        };
        const SpinorState ref = run(0.00125);
        auto err = [&](const SpinorState& s) {
            double acc = 0.0;
            for (int c = 0; c < 2; ++c)
                for (int j = 0; j < s.n; ++j) acc += std::norm(s.psi[c][j] - ref.psi[c][j]);
            return std::sqrt(acc / s.n);
        };
        const double ratio = err(run(0.02)) / err(run(0.01));

        // round trip: conjugate, run the mirrored schedule and pulse, conjugate
        PropagatorOptions opt;
        opt.n = 64;
        opt.dt_us = 0.01;
        Propagator prop(lab.constants, lab.bias, opt);
        const double T = 24.0;
        ControlSegment f;
        f.t_end_us = T;
        f.from = LatticeControls{30.0, 12.0, -0.5, 0.25, 1.0};
        f.to = LatticeControls{60.0, 30.0, -0.44, 0.25, 1.0};
        f.dx_shape = RampShape::min_jerk;
        ControlSchedule fwd;
        fwd.append(f);
        RfPulse q;
        q.t_start_us = 3.0;
        q.t_end_us = 11.0;
        q.freq_khz = bare_transition_khz(lab.bias, lab.constants) - 5.0;
        q.rabi_khz = 30.0;
        q.phase_rad = 0.6;
        const SpinorState s0 = load_ground_state(f.from, kMm1, lab.bias, lab.constants, opt.n);
        SpinorState s = s0;
        prop.propagate(s, fwd, {q}, T);
        ControlSegment r = f;
        r.from = f.to;
        r.to = f.from;
        ControlSchedule bwd;
        bwd.append(r);
        RfPulse rq = q;
        rq.t_start_us = T - q.t_end_us;
        rq.t_end_us = T - q.t_start_us;
        rq.phase_rad = -q.phase_rad - kPhaseKhzUs * (q.freq_khz + prop.frame_khz()) * T;
        SpinorState back = SpinorState::zero(opt.n);
        for (int c = 0; c < 2; ++c)
            for (int j = 0; j < opt.n; ++j) back.psi[c][j] = std::conj(s.psi[c][j]);
        prop.propagate(back, bwd, {rq}, T);
        for (int c = 0; c < 2; ++c)
            for (int j = 0; j < opt.n; ++j) back.psi[c][j] = std::conj(back.psi[c][j]);
        const double fidelity = spinor_fidelity(back, s0);

        const bool ok = norm_dev < 1e-9 && ratio >= 3.5 && ratio <= 4.5 && fidelity > 1.0 - 1e-8;
        report(6, ok,
               fmt("norm drift %.1e < 1e-9, dt-halving error ratio %.2f in [3.5, 4.5], "
                   "round-trip fidelity 1 - %.1e > 1 - 1e-8",
                   norm_dev, ratio, 1.0 - fidelity));
    });

    // 7: two-level ensemble model against closed forms
    criterion(7, [&] {
        // (a) noiseless Rabi flopping keeps full contrast for 25 cycles
        const double omega = 15.8;
        const double t_flop = 1000.0 / omega;
        EnsembleOptions quiet;
        quiet.shots = 1;
        quiet.atoms = 1;
        std::vector<Sequence> seqs;
        std::vector<double> axis;
        for (int k = 0; k < 25; ++k) {
            axis.push_back((2 * k + 1) * t_flop / 2.0);
            seqs.push_back(make_rabi(axis.back(), omega));
            axis.push_back((k + 1) * t_flop);
            seqs.push_back(make_rabi(axis.back(), omega));
        }
        const SweepResult flop = run_sweep(0.0, seqs, axis, quiet);
        double peak = 1.0, trough = 0.0;
        for (size_t i = 0; i < axis.size(); i += 2) peak = std::min(peak, flop.mean_p0[i]);
        for (size_t i = 1; i < axis.size(); i += 2) trough = std::max(trough, flop.mean_p0[i]);
        const double rabi_contrast = peak - trough;

        // (b) Ramsey under a static Gaussian spread matches the Gaussian envelope
        EnsembleOptions stat;
        stat.shots = 250;
        stat.atoms = 40;
        stat.noise.sigma_spatial_khz = 3.0;
        stat.seed = 7;
        const std::vector<double> thetas = default_theta_grid();
        auto ramsey_contrast = [&](double gap) {
            std::vector<Sequence> rs;
            for (double th : thetas) rs.push_back(make_ramsey(gap, 1.0, 250.0, th));
            return contrast_from_theta_scan(run_sweep(0.0, rs, thetas, stat)).mean;
        };
        const double c30 = ramsey_contrast(30.0);
        const double c60 = ramsey_contrast(60.0);
        const double o30 = std::exp(-0.5 * std::pow(kPhaseKhzUs * 3.0 * 30.0, 2));
        const double o60 = std::exp(-0.5 * std::pow(kPhaseKhzUs * 3.0 * 60.0, 2));
        const double dev_b = std::max(std::abs(c30 / o30 - 1.0), std::abs(c60 / o60 - 1.0));

        // (c) the echo removes static broadening
        EnsembleOptions stat2 = stat;
        stat2.noise.sigma_shot_khz = 3.0;
        std::vector<Sequence> es;
        for (double th : thetas) es.push_back(make_echo(300.0, 1.0, 250.0, th));
        const double c_echo = contrast_from_theta_scan(run_sweep(0.0, es, thetas, stat2)).mean;

        // (d) Rabi contrast 1/e time scales as 1/sigma^2 over a decade
        auto rabi_t1e = [&](double sigma) {
            const double tau_scale = 7.32 * omega / (kPhaseKhzUs * sigma * sigma);
            const int per_flop = 8;
            const double step = t_flop / per_flop;
            const int n = static_cast<int>(2.2 * tau_scale / step);
            std::vector<Sequence> ss;
            std::vector<double> ts;
            for (int i = 0; i < n; ++i) {
                ts.push_back((i + 1) * step);
                ss.push_back(make_rabi(ts.back(), omega));
            }
            EnsembleOptions e;
            e.shots = 1000;
            e.atoms = 1;
            e.noise.sigma_shot_khz = sigma;
            e.seed = 11;
            const SweepResult sw = run_sweep(0.0, ss, ts, e);
            std::vector<double> tc, cc;
            for (int w = 0; w + per_flop <= n; w += per_flop) {
                double lo = 1.0, hi = 0.0;
                for (int i = w; i < w + per_flop; ++i) {
                    lo = std::min(lo, sw.mean_p0[i]);
                    hi = std::max(hi, sw.mean_p0[i]);
                }
                tc.push_back(ts[w + per_flop / 2]);
                cc.push_back(hi - lo);
            }
            return decay_time_1e(tc, cc);
        };
        const double t_sig1 = rabi_t1e(1.0);
        const double t_sig10 = rabi_t1e(std::sqrt(10.0));
        const double ratio = t_sig1 / t_sig10;  // expect 10 for a decade in sigma^2

        const bool ok = rabi_contrast >= 0.999 && dev_b <= 0.05 && c_echo >= 0.99 &&
                        std::isfinite(t_sig1) && ratio >= 7.5 && ratio <= 40.0 / 3.0;
        report(7, ok,
               fmt("noiseless Rabi contrast %.5f >= 0.999 over 25 cycles; Gaussian Ramsey "
                   "envelope off by %.1f%% <= 5%% (10000 samples); echo contrast %.4f >= 0.99; "
                   "Rabi 1/e scaling ratio %.1f within 25%% of 10",
                   rabi_contrast, 100.0 * dev_b, c_echo, ratio));
    });

    // 8: calibrated noise model reproduces the reference coherence times
    criterion(8, [&] {
        const std::vector<double> thetas = default_theta_grid();
        auto scan_contrast = [&](const std::vector<double>& delays, bool echo,
                                 const EnsembleOptions& e) {
            return exp_coherence_scan(delays, echo, 15.0, 1000.0 / 60.0, 0.0, e, thetas);
        };
        EnsembleOptions e;
        e.shots = 200;
        e.atoms = 16;
        e.noise = calibrated_noise();
        e.seed = 101;
        const std::vector<double> dr = linspace(20.0, 260.0, 13);
        const CoherenceScan ramsey = scan_contrast(dr, false, e);
        const double t_mean = decay_time_1e(dr, ramsey.contrast_mean);

        EnsembleOptions ep = e;
        ep.shots = 50;
        ep.atoms = 256;
        ep.seed = 102;
        const std::vector<double> dp = linspace(150.0, 900.0, 6);
        const double t_shot = decay_time_1e(dp, scan_contrast(dp, false, ep).contrast_per_shot);

        EnsembleOptions ee = e;
        ee.seed = 103;
        const std::vector<double> de = linspace(150.0, 750.0, 5);
        const double t_echo = decay_time_1e(de, scan_contrast(de, true, ee).contrast_mean);

        EnsembleOptions es = e;
        es.noise.walk_d_khz2_us = 0.0;
        es.seed = 104;
        const std::vector<double> ds = {400.0, 1200.0};
        const double t_static = decay_time_1e(ds, scan_contrast(ds, true, es).contrast_mean);

        const bool ok = t_mean >= 70.0 && t_mean <= 130.0 && t_shot >= 350.0 && t_shot <= 650.0 &&
                        t_echo >= 280.0 && t_echo <= 520.0 && t_static > 1200.0;
        report(8, ok,
               fmt("1/e times: shot-averaged %.0f us (100 +/- 30%%), single-shot %.0f us "
                   "(500 +/- 30%%), echo %.0f us (400 +/- 30%%), drift-free echo %s > 1200 us",
                   t_mean, t_shot, t_echo,
                   std::isfinite(t_static) ? fmt("%.0f us", t_static).c_str() : "undecayed"));
    });

    // 9: interferometer fringes at the photon-recoil period, gated by the
    //    site-selective closing pulse
    criterion(9, [&] {
        PropagatorOptions popt;
        popt.n = 256;
        popt.dt_us = 0.02;
        InterferometerOptions o;
        const InterferometerResult sel = exp_interferometer(o, lab, popt);
        const FringeFit fs = fit_momentum_fringes(sel.p_hk, sel.density);
        InterferometerOptions o2 = o;
        o2.final_pulse = FinalPulse::none;
        const InterferometerResult none = exp_interferometer(o2, lab, popt);
        const FringeFit fn = fit_momentum_fringes(none.p_hk, none.density);
        const bool ok = fs.converged && std::abs(fs.period_hk - 2.0) <= 0.05 &&
                        fs.visibility >= 0.95 && fn.visibility <= 0.05;
        report(9, ok,
               fmt("fringe period %.4f photon recoils (2 +/- 0.05), visibility %.4f >= 0.95 "
                   "with the closing pulse, %.4f <= 0.05 without",
                   fs.period_hk, fs.visibility, fn.visibility));
    });

    // 10: equal seeds give byte-identical outputs through the command line
    criterion(10, [&] {
        if (cli.empty()) {
            report(10, false, "no command-line tool path given (argv[1])");
            return;
        }
        const fs::path base = fs::temp_directory_path() / "dwell_acceptance";
        fs::remove_all(base);
        fs::create_directories(base);
        const fs::path cfgp = base / "run.conf";
        {
            std::ofstream cfg(cfgp);
            cfg << "[noise]\nsigma_shot_khz = 2.1322\nwalk_d_khz2_us = 0.0047495\n"
                   "sigma_spatial_khz = 0.45016\nshots = 25\natoms = 6\n"
                   "[experiment]\nscan_start = 0\nscan_stop = 400\nscan_points = 41\n"
                   "readout = ideal\n";
        }
        auto run = [&](const std::string& dir) {
            const std::string cmd = cli + " rabi --config " + cfgp.string() + " --outdir " +
                                    (base / dir).string() + " --seed 913 > /dev/null 2>&1";
            return std::system(cmd.c_str());
        };
        const int rc_a = run("a"), rc_b = run("b");
        const std::string csv_a = read_file(base / "a" / "rabi.csv");
        const std::string csv_b = read_file(base / "b" / "rabi.csv");
        const bool ok = rc_a == 0 && rc_b == 0 && !csv_a.empty() && csv_a == csv_b;
        report(10, ok,
               fmt("two runs with seed 913: exit %d/%d, %zu-byte CSV %s", rc_a, rc_b,
                   csv_a.size(), csv_a == csv_b ? "byte-identical" : "DIFFERS"));
        fs::remove_all(base);
    });

    const double total =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin).count();
    std::printf("%d/10 criteria passed in %.0f s\n", 10 - g_failures, total);
    return g_failures == 0 ? 0 : 1;
}
