#include "pavsim/equilibrium.hpp"
#include "pavsim/errors.hpp"
#include "pavsim/integrator.hpp"
#include "pavsim/oracle.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace pavsim;
using namespace pavsim::testing;

TEST_CASE("mode names") {
    CHECK(to_string(LockoutMode::erlang_stage) == "erlang-stage");
    CHECK(parse_lockout_mode("deterministic_lockout") == LockoutMode::deterministic_lockout);
    CHECK(parse_lockout_mode("deterministic-lockout") == LockoutMode::deterministic_lockout);
    CHECK_THROWS_AS(parse_lockout_mode("fixed"), ValidationError);
}

TEST_CASE("configuration guards") {
    ModelParams p;
    OracleConfig cfg;
    cfg.n = 999;
    CHECK_THROWS_AS(cfg.validate(p), ValidationError);
    cfg = OracleConfig{};
    cfg.dt = 0.2;
    CHECK_THROWS_AS(cfg.validate(p), ValidationError);
    cfg = OracleConfig{};
    cfg.threads = 0;
    CHECK_THROWS_AS(cfg.validate(p), ValidationError);
    CHECK_NOTHROW(OracleConfig{}.validate(p));
}

TEST_CASE("no switching keeps fractions constant") {
    ModelParams p;
    p.lambda1 = p.lambda2 = p.lambda3 = p.lambda4 = 1e-12;
    OracleConfig cfg;
    cfg.n = 5000;
    cfg.horizon = 5.0;
    const auto s = run_oracle(p, StateVector::unlocked(p, 0.3), cfg);
    for (std::size_t i = 0; i < s.size(); ++i) {
        REQUIRE(std::abs(s.frac_h[i] - 0.3) <= 1.0 / cfg.n);
        REQUIRE(s.count_h[i] + s.count_a[i] == cfg.n);
    }
}

TEST_CASE("determinism and thread invariance") {
    ModelParams p;
    OracleConfig cfg;
    cfg.n = 3000;
    cfg.horizon = 5.0;
    cfg.seed = 42;
    const auto x0 = StateVector::unlocked(p, 0.5);
    const auto a = run_oracle(p, x0, cfg);
    const auto b = run_oracle(p, x0, cfg);
    cfg.threads = 3;
    const auto c = run_oracle(p, x0, cfg);
    CHECK(a.count_h == b.count_h);
    CHECK(a.count_h == c.count_h);
    cfg.seed = 43;
    CHECK(run_oracle(p, x0, cfg).count_h != a.count_h);
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a.count_h[i] + a.count_a[i] == cfg.n);
    CHECK(a.size() == 501);
}

TEST_CASE("leader-independent terminal fraction") {
    const auto p = leader_independent(0.1, 0.5);
    OracleConfig cfg;
    cfg.horizon = 60.0;
    cfg.record_every = 100;
    const auto s = run_oracle(p, StateVector::unlocked(p, 0.5), cfg);
    const double target = leader_independent_equilibrium(p).sum_hdv();
    CHECK(target == doctest::Approx(13.0 / 18.0));
    CHECK(std::abs(s.frac_h.back() - target) <= 3.0 * s.se_h.back());
}

TEST_CASE("agreement with the mean-field trajectory") {
    ModelParams p;
    OracleConfig cfg;
    cfg.record_every = 10;
    const auto x0 = StateVector::unlocked(p, 0.5);
    const auto s = run_oracle(p, x0, cfg);
    const auto traj = simulate(p, x0, IntegrationConfig{});
    CHECK(max_deviation_from_ode(s, traj) <= 4.0 / std::sqrt(static_cast<double>(cfg.n)) + 0.005);
}

TEST_CASE("error shrinks like one over root n") {
    ModelParams p;
    p.k = 20;
    const auto x0 = StateVector::unlocked(p, 0.5);
    const auto traj = simulate(p, x0, IntegrationConfig{0.01, 10.0, true, 1});
    const auto rms = [&](std::size_t n) {
        double sq = 0.0;
        int count = 0;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            OracleConfig cfg;
            cfg.n = n;
            cfg.horizon = 10.0;
            cfg.seed = seed;
            cfg.record_every = 50;
            const auto s = run_oracle(p, x0, cfg);
            for (std::size_t i = 1; i < s.size(); ++i) {
                const double d = s.frac_h[i] - traj.sum_hdv[i * 50];
                sq += d * d;
                ++count;
            }
        }
        return std::sqrt(sq / count);
    };
    const double ratio = rms(4000) / rms(16000);
    CHECK(ratio > 2.0 / 1.5);
    CHECK(ratio < 2.0 * 1.5);

    OracleConfig a;
    a.n = 4000;
    a.horizon = 1.0;
    OracleConfig b = a;
    b.n = 8000;
    const double se_ratio = run_oracle(p, x0, a).se_h.back() / run_oracle(p, x0, b).se_h.back();
    CHECK(se_ratio == doctest::Approx(std::sqrt(2.0)).epsilon(0.05));
}

TEST_CASE("erlang and deterministic lockouts converge with k") {
    OracleConfig cfg;
    cfg.n = 20000;
    cfg.record_every = 10;
    double previous = std::numeric_limits<double>::infinity();
    for (int k : {1, 10, 200}) {
        ModelParams p;
        p.k = k;
        const auto cmp = compare_modes(p, StateVector::unlocked(p, 0.5), cfg);
        CAPTURE(k);
        CHECK(cmp.max_gap < previous);
        previous = cmp.max_gap;
        CHECK(cmp.erlang.size() == cmp.deterministic.size());
    }
    CHECK(previous <= 0.03);
}

TEST_CASE("modes coincide without lockout") {
    ModelParams p;
    p.t_lock_h = 0.0;
    p.t_lock_a = 0.0;
    OracleConfig cfg;
    cfg.n = 5000;
    cfg.horizon = 10.0;
    const auto cmp = compare_modes(p, StateVector::unlocked(p, 0.5), cfg);
    CHECK(cmp.max_gap == 0.0);
}

TEST_CASE("oracle CSV") {
    ModelParams p;
    OracleConfig cfg;
    cfg.n = 1000;
    cfg.horizon = 0.02;
    std::ostringstream os;
    write_oracle_csv(os, run_oracle(p, StateVector::unlocked(p, 0.5), cfg));
    const std::string text = os.str();
    CHECK(text.rfind("time_s,frac_h,frac_a,se_h,se_a\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);
}
