#include "pavsim/equilibrium.hpp"
#include "pavsim/errors.hpp"
#include "pavsim/integrator.hpp"
#include "pavsim/throughput.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <sstream>

using namespace pavsim;
using namespace pavsim::testing;

namespace {

StateVector mass_at(const ModelParams& p, bool hdv_side, std::size_t i = 0) {
    std::vector<double> h(p.hdv_size(), 0.0);
    std::vector<double> a(p.av_size(), 0.0);
    (hdv_side ? h : a)[i] = 1.0;
    return {h, a};
}

double logistic(double s) { return 1.0 / (1.0 + std::exp(-10.0 * (s - 0.5))); }

} // namespace

TEST_CASE("stage headways") {
    const HeadwayParams hp;
    const auto s0 = stage_headway(hp, 0, 200, TransitionDirection::h_to_a);
    CHECK(s0.tau == 1.5);
    CHECK(s0.standstill == 7.0);
    CHECK(stage_headway(hp, 0, 200, TransitionDirection::a_to_h).tau == 1.0);
    CHECK(stage_headway(hp, 2, 3, TransitionDirection::h_to_a).tau == doctest::Approx(1.25));
    CHECK(stage_headway(hp, 2, 3, TransitionDirection::a_to_h).standstill == doctest::Approx(6.0));

    for (int i = 1; i <= 4; ++i) {
        const double w = logistic((i - 0.5) / 4.0);
        const auto up = stage_headway(hp, i, 4, TransitionDirection::h_to_a);
        const auto down = stage_headway(hp, i, 4, TransitionDirection::a_to_h);
        CHECK(up.tau == doctest::Approx(1.5 - 0.5 * w).epsilon(1e-14));
        CHECK(up.standstill == doctest::Approx(7.0 - 2.0 * w).epsilon(1e-14));
        CHECK(down.tau == doctest::Approx(1.0 + 0.5 * w).epsilon(1e-14));
        CHECK(down.standstill == doctest::Approx(5.0 + 2.0 * w).epsilon(1e-14));
    }

    const auto last = stage_headway(hp, 200, 200, TransitionDirection::h_to_a);
    CHECK(std::abs(last.tau - 1.0) <= 0.01 * 0.5);

    HeadwayParams steep;
    steep.sigmoid_steepness = 100.0;
    const auto end = stage_headway(steep, 200, 200, TransitionDirection::h_to_a);
    CHECK(std::abs(end.tau - 1.0) <= 1e-3 * 0.5);
    CHECK(std::abs(end.standstill - 5.0) <= 1e-3 * 2.0);

    CHECK_THROWS_AS(stage_headway(hp, 5, 4, TransitionDirection::h_to_a), ValidationError);
    HeadwayParams bad;
    bad.tau_h0 = 0.5;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("effective headway and throughput anchors") {
    const HeadwayParams hp;
    ModelParams p;
    p.k = 10;
    CHECK(effective_headway(hp, StateVector::unlocked(p, 0.3), 10.0, 1.0) == doctest::Approx(2.2));
    CHECK(effective_headway(hp, mass_at(p, false), 10.0, 0.0) == doctest::Approx(1.5));
    CHECK(effective_headway(hp, StateVector::unlocked(p, 0.5), 10.0, 0.2) == doctest::Approx(1.92));

    CHECK(std::abs(throughput(hp, mass_at(p, false), 10.0, 0.0) / 2400.0 - 1.0) <= 1e-9);
    CHECK(std::abs(throughput(hp, mass_at(p, true), 10.0, 1.0) / (3600.0 / 2.2) - 1.0) <= 1e-9);

    CHECK_THROWS_AS(throughput(hp, mass_at(p, false), 0.0, 0.0), ValidationError);
    CHECK_THROWS_AS(throughput(hp, mass_at(p, false), 10.0, 1.5), ValidationError);
}

TEST_CASE("golden value at the closed-form equilibrium") {
    const auto p = leader_independent(0.1, 0.5);
    const auto x = leader_independent_equilibrium(p);
    // summed term by term outside the library
    CHECK(std::abs(steady_throughput(HeadwayParams{}, x, 10.0, 0.2) - 1760.869565217391) <= 1e-8);
}

TEST_CASE("bounds, gamma monotonicity and the reciprocal identity") {
    const HeadwayParams hp;
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> speed(0.5, 40.0);
    for (int i = 0; i < 2000; ++i) {
        const auto p = random_params(rng, 12);
        const auto x = random_simplex_state(p, rng);
        const double v = speed(rng);
        const double c = throughput(hp, x, v, p.gamma);
        CHECK(c >= 3600.0 / (1.5 + 7.0 / v) - 1e-9);
        CHECK(c <= 3600.0 / (1.0 + 5.0 / v) + 1e-9);
        CHECK(c * effective_headway(hp, x, v, p.gamma) == doctest::Approx(3600.0).epsilon(1e-14));
        double previous = std::numeric_limits<double>::infinity();
        for (double g : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            const double cg = throughput(hp, x, v, g);
            CHECK(cg <= previous + 1e-9);
            previous = cg;
        }
    }
}

TEST_CASE("steady throughput") {
    const HeadwayParams hp;
    ModelParams p;
    p.gamma = 1.0;
    p.k = 20;
    CHECK(steady_throughput(hp, StateVector::unlocked(p, 0.1), 10.0, 1.0) ==
          doctest::Approx(steady_throughput(hp, StateVector::unlocked(p, 0.9), 10.0, 1.0)));

    const auto sym = leader_independent(0.3, 0.3, 20);
    const auto xs = solve_equilibrium(sym, 1e-12, 500000).x_star;
    const double c = steady_throughput(hp, xs, 10.0, sym.gamma);
    CHECK(c > 3600.0 / 2.2);
    CHECK(c < 2400.0);

    ModelParams d;
    const auto eq = solve_equilibrium(d, 1e-12, 500000);
    IntegrationConfig cfg;
    cfg.horizon_t = 300.0;
    const auto traj = simulate(d, StateVector::unlocked(d, 0.5), cfg);
    const auto series = throughput_series(hp, traj, SpeedProfile::constant(10.0, 0.0, 300.0), d.gamma);
    double tail = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (series.times[i] >= 250.0) {
            tail += series.c_vphpl[i];
            ++count;
        }
    }
    CHECK(std::abs(tail / count - steady_throughput(hp, eq.x_star, 10.0, d.gamma)) <= 0.1);
}

TEST_CASE("series over speed profiles") {
    const HeadwayParams hp;
    ModelParams p;
    p.k = 20;
    const auto traj = simulate(p, StateVector::unlocked(p, 0.5), IntegrationConfig{0.01, 10.0, true, 10});
    const auto flat = throughput_series(hp, traj, SpeedProfile::constant(10.0, 0.0, 10.0), p.gamma);
    REQUIRE(flat.size() == traj.size());
    for (std::size_t i = 0; i < flat.size(); ++i) {
        CHECK(flat.c_vphpl[i] == throughput(hp, traj.states[i], 10.0, p.gamma));
    }

    const SpeedProfile dip({0.0, 4.0, 5.0, 6.0, 10.0}, {10.0, 10.0, 4.0, 10.0, 10.0});
    CHECK(dip.speed_at(4.5) == doctest::Approx(7.0));
    CHECK_THROWS_AS(dip.speed_at(10.5), ValidationError);
    const auto dipped = throughput_series(hp, traj, dip, p.gamma);
    for (std::size_t i = 0; i < dipped.size(); ++i) {
        const double t = dipped.times[i];
        if (t > 4.0 + 1e-9 && t < 6.0 - 1e-9) CHECK(dipped.c_vphpl[i] < flat.c_vphpl[i]);
        else CHECK(dipped.c_vphpl[i] == doctest::Approx(flat.c_vphpl[i]));
    }

    std::ostringstream os;
    write_throughput_csv(os, flat);
    CHECK(os.str().rfind("time_s,v_mps,h_eff_s,c_vphpl\n", 0) == 0);
}

TEST_CASE("speed profile parsing") {
    std::istringstream ok("time_s,speed_mps\n0,10\n1,11\n2,9\n");
    const auto prof = read_speed_profile(ok, "ok.csv");
    CHECK(prof.end() == 2.0);
    CHECK(prof.speed_at(1.5) == doctest::Approx(10.0));

    const auto message = [](const std::string& text) {
        std::istringstream is(text);
        try {
            read_speed_profile(is, "bad.csv");
        } catch (const ValidationError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(message("time_s,speed_mps\n0,10\n1,0\n").find("bad.csv:3") != std::string::npos);
    CHECK(message("time_s,speed_mps\n0,10\n0,11\n").find("bad.csv:3") != std::string::npos);
    CHECK(message("time_s,speed_mps\n0,x\n").find("bad.csv:2") != std::string::npos);
    CHECK_FALSE(message("time_s,speed_mps\n0,10\n").empty());
}
