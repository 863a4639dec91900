#include <catch2/catch_amalgamated.hpp>

#include <dwell/dwell.hpp>

#include "oracles.hpp"

using namespace dwell;
using Catch::Approx;

TEST_CASE("levenberg-marquardt solves small least-squares problems") {
    const ModelFn line = [](double x, const Eigen::VectorXd& p) { return p(0) * x + p(1); };
    std::vector<double> x, y;
    for (int i = 0; i < 20; ++i) {
        x.push_back(i);
        y.push_back(3.5 * i - 1.25);
    }
    Eigen::VectorXd p0(2);
    p0 << 1.0, 0.0;
    const LmResult r = fit_lm(line, x, y, p0);
    REQUIRE(r.converged);
    REQUIRE(r.params(0) == Approx(3.5).epsilon(1e-9));
    REQUIRE(r.params(1) == Approx(-1.25).margin(1e-8));
    REQUIRE(r.chi2 < 1e-12);

    const ModelFn expm = [](double x2, const Eigen::VectorXd& p) {
        return p(0) * std::exp(-x2 / p(1));
    };
    std::vector<double> xe, ye;
    for (int i = 0; i < 30; ++i) {
        xe.push_back(i * 5.0);
        ye.push_back(2.0 * std::exp(-xe.back() / 40.0));
    }
    Eigen::VectorXd q0(2);
    q0 << 1.0, 25.0;
    const LmResult re = fit_lm(expm, xe, ye, q0);
    REQUIRE(re.converged);
    REQUIRE(re.params(0) == Approx(2.0).epsilon(1e-7));
    REQUIRE(re.params(1) == Approx(40.0).epsilon(1e-7));

    REQUIRE_THROWS_AS(fit_lm(line, {1.0}, {1.0}, p0), std::invalid_argument);
    REQUIRE_THROWS_AS(fit_lm(line, {1.0, 2.0}, {1.0}, p0), std::invalid_argument);
}

TEST_CASE("periodogram locates the dominant tone") {
    std::vector<double> t, y;
    for (int i = 0; i < 150; ++i) {
        t.push_back(i * 400.0 / 149.0);
        y.push_back(0.5 + 0.4 * std::sin(kPhaseKhzUs * 7.7 * t.back() + 0.3));
    }
    REQUIRE(periodogram_peak_khz(t, y) == Approx(7.7).margin(0.1));
    REQUIRE_THROWS_AS(periodogram_peak_khz({1.0, 2.0}, {0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("damped sine fit recovers planted parameters through noise") {
    Rng rng(3);
    std::vector<double> t, y;
    for (int i = 0; i < 120; ++i) {
        t.push_back(i * 4.0);
        y.push_back(0.5 + 0.4 * std::exp(-t.back() / 220.0) *
                              std::sin(kPhaseKhzUs * 12.3 * t.back() + 0.8) +
                    0.004 * rng.normal());
    }
    const DampedSineFit f = fit_damped_sine(t, y);
    REQUIRE(f.converged);
    REQUIRE_FALSE(f.freq_ambiguous);
    REQUIRE(f.freq_khz == Approx(12.3).margin(0.05));
    REQUIRE(f.tau_us == Approx(220.0).epsilon(0.10));
    REQUIRE(f.amplitude == Approx(0.4).margin(0.02));
    REQUIRE(f.offset == Approx(0.5).margin(0.01));
    REQUIRE(std::remainder(f.phase_rad - 0.8, kTwoPi) == Approx(0.0).margin(0.05));
    REQUIRE(f.freq_err_khz < 0.05);
    REQUIRE_THROWS_AS(fit_damped_sine({1.0, 2.0, 3.0}, {0.0, 1.0, 0.0}), std::invalid_argument);
}

TEST_CASE("lineshape fit centers the resonance and sizes the coupling") {
    const double t_pulse = 30.0, rabi = 1000.0 / 60.0, f0 = 1.2;
    Rng rng(9);
    std::vector<double> f, p;
    for (int i = 0; i < 73; ++i) {
        f.push_back(-20.0 + 40.0 * i / 72.0);
        const double d = f.back() - f0;
        const double gen = std::hypot(rabi, d);
        const double s = std::sin(kPi * 1e-3 * gen * t_pulse);
        p.push_back(0.02 + 0.95 * rabi * rabi / (gen * gen) * s * s + 0.005 * rng.normal());
    }
    const LineshapeFit fit = fit_rabi_lineshape(f, p, t_pulse);
    REQUIRE(fit.converged);
    REQUIRE(fit.center_khz == Approx(f0).margin(0.1));
    REQUIRE(fit.rabi_khz == Approx(rabi).epsilon(0.05));
    REQUIRE(fit.amplitude == Approx(0.95).margin(0.05));
}

TEST_CASE("momentum fringe fit recovers visibility, period and phase") {
    Rng rng(11);
    std::vector<double> p, y;
    for (int i = 0; i < 321; ++i) {
        p.push_back(-8.0 + 16.0 * i / 320.0);
        const double u = (p.back() + 0.1) / 2.0;
        y.push_back(0.02 + std::exp(-0.5 * u * u) *
                               (1.0 + 0.8 * std::cos(kTwoPi * p.back() / 2.0 + 0.5)) +
                    0.002 * rng.normal());
    }
    const FringeFit f = fit_momentum_fringes(p, y);
    REQUIRE(f.converged);
    REQUIRE(f.visibility == Approx(0.8).margin(0.02));
    REQUIRE(f.period_hk == Approx(2.0).margin(0.02));
    REQUIRE(f.center_hk == Approx(-0.1).margin(0.05));
    REQUIRE(std::remainder(f.phase_rad - 0.5, kTwoPi) == Approx(0.0).margin(0.1));
    REQUIRE(f.sigma_hk == Approx(2.0).epsilon(0.05));
    REQUIRE_THROWS_AS(fit_momentum_fringes({1.0, 2.0}, {0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("fringe fit reports near-zero visibility for a bare envelope") {
    std::vector<double> p, y;
    for (int i = 0; i < 161; ++i) {
        p.push_back(-8.0 + 16.0 * i / 160.0);
        y.push_back(std::exp(-0.5 * p.back() * p.back() / 4.0));
    }
    const FringeFit f = fit_momentum_fringes(p, y);
    REQUIRE(f.visibility < 0.05);
}

TEST_CASE("two interleaved fringe patterns fit with the mixture visibility") {
    // incoherent sum of equal fringes offset by delta: visibility |cos(delta/2)|
    const double delta = 1.2;
    std::vector<double> p, y;
    for (int i = 0; i < 321; ++i) {
        p.push_back(-8.0 + 16.0 * i / 320.0);
        const double env = std::exp(-0.5 * p.back() * p.back() / 4.0);
        y.push_back(env * (2.0 + std::cos(kPi * p.back()) + std::cos(kPi * p.back() + delta)));
    }
    const FringeFit f = fit_momentum_fringes(p, y);
    REQUIRE(f.converged);
    REQUIRE(f.visibility == Approx(std::cos(delta / 2.0)).margin(0.02));
    REQUIRE(f.period_hk == Approx(2.0).margin(0.02));
}
