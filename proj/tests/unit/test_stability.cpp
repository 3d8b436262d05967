#include "pavsim/equilibrium.hpp"
#include "pavsim/errors.hpp"
#include "pavsim/integrator.hpp"
#include "pavsim/stability.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

using namespace pavsim;
using namespace pavsim::testing;

namespace {

Eigen::VectorXd reduced_deviation(const StateVector& x, const StateVector& x_star) {
    const Eigen::VectorXd e = x.to_eigen() - x_star.to_eigen();
    return e.head(e.size() - 1);
}

double max_eig(const Eigen::MatrixXd& s) {
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(s).eigenvalues().maxCoeff();
}

} // namespace

TEST_CASE("scalar vertices") {
    PolytopeVertices v{Eigen::MatrixXd::Constant(1, 1, -1.0), Eigen::MatrixXd::Constant(1, 1, -2.0)};
    const auto r = find_common_lyapunov(v);
    REQUIRE(r.status == LyapunovStatus::certified);
    CHECK(r.certificate->p(0, 0) == doctest::Approx(1.0));
    CHECK(r.certificate->margin == doctest::Approx(2.0).epsilon(1e-6));
}

TEST_CASE("unstable vertex is reported") {
    PolytopeVertices v{Eigen::MatrixXd::Constant(1, 1, 0.5), Eigen::MatrixXd::Constant(1, 1, -1.0)};
    const auto r = find_common_lyapunov(v);
    CHECK(r.status == LyapunovStatus::not_hurwitz);
    CHECK(r.offending_real_part == doctest::Approx(0.5));
    CHECK_FALSE(r.certificate.has_value());
    CHECK(to_string(r.status) == "not-hurwitz");
}

TEST_CASE("2x2 pair with a common certificate") {
    Eigen::MatrixXd m0(2, 2), m1(2, 2);
    m0 << -1, 0.5, 0, -1;
    m1 << -1, 0, 0.5, -1;
    const PolytopeVertices v{m0, m1};
    const auto r = find_common_lyapunov(v);
    REQUIRE(r.status == LyapunovStatus::certified);
    const auto chk = verify_certificate(v, r.certificate->p);
    CHECK(chk.symmetric);
    CHECK(chk.max_form_eig <= -0.5e-6);
    CHECK(chk.p_min_eig > 0.0);
    CHECK(r.certificate->p.trace() == doctest::Approx(2.0));
}

TEST_CASE("malformed vertices are rejected") {
    CHECK_THROWS_AS(find_common_lyapunov(PolytopeVertices{Eigen::MatrixXd(0, 0), Eigen::MatrixXd(0, 0)}),
                    ValidationError);
    CHECK_THROWS_AS(find_common_lyapunov(PolytopeVertices{Eigen::MatrixXd::Identity(2, 3), Eigen::MatrixXd::Identity(2, 3)}),
                    ValidationError);
    Eigen::MatrixXd bad = -Eigen::MatrixXd::Identity(2, 2);
    bad(0, 1) = std::nan("");
    CHECK_THROWS_AS(find_common_lyapunov(PolytopeVertices{bad, bad}), ValidationError);
}

TEST_CASE("leader-independent rates give one vertex") {
    const auto p = leader_independent(0.2, 0.4, 5);
    const auto v = build_vertices(p);
    CHECK((v.m0 - v.m1).cwiseAbs().maxCoeff() == 0.0);
    CHECK(check_hurwitz_grid(p, 11).worst_abscissa < 0.0);
    CHECK(find_common_lyapunov(v).status == LyapunovStatus::certified);
}

TEST_CASE("vertices match the reduced generator") {
    ModelParams p;
    p.k = 1;
    const auto v = build_vertices(p);
    CHECK((v.m0 - reduce_system(p, 0.0).a_prime).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK((v.m1 - reduce_system(p, 1.0).a_prime).cwiseAbs().maxCoeff() <= 1e-15);
    p.k = 5;
    const auto v5 = build_vertices(p);
    CHECK((v5.at(0.3) - reduce_system(p, 0.3).a_prime).cwiseAbs().maxCoeff() <= 1e-14);
    CHECK((v5.at(0.5) - 0.5 * (v5.m0 + v5.m1)).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("hurwitz grid") {
    ModelParams p;
    p.k = 5;
    const auto one = check_hurwitz_grid(p, 1);
    CHECK(one.worst_q == 0.0);
    CHECK(one.worst_abscissa == doctest::Approx(spectral_abscissa(build_vertices(p).m0)));
    const auto grid = check_hurwitz_grid(p, 21);
    CHECK(grid.n_samples == 21);
    CHECK(grid.worst_abscissa >= one.worst_abscissa);
    CHECK(grid.worst_abscissa < 0.0);
}

TEST_CASE("time rescaling scales the spectrum") {
    ModelParams p = with_rates(0.1, 0.15, 0.5, 0.05, 4);
    ModelParams fast = p;
    fast.lambda1 *= 2;
    fast.lambda2 *= 2;
    fast.lambda3 *= 2;
    fast.lambda4 *= 2;
    fast.t_lock_h /= 2;
    fast.t_lock_a /= 2;
    const auto slow_r = check_hurwitz_grid(p, 11);
    const auto fast_r = check_hurwitz_grid(fast, 11);
    CHECK(fast_r.worst_abscissa == doctest::Approx(2.0 * slow_r.worst_abscissa).epsilon(1e-9));
}

TEST_CASE("certificate for the defaults at small k") {
    ModelParams p;
    p.k = 5;
    const auto v = build_vertices(p);
    const auto r = find_common_lyapunov(v);
    REQUIRE(r.status == LyapunovStatus::certified);
    const auto& cert = *r.certificate;
    const auto chk = verify_certificate(v, cert.p);
    CHECK(chk.max_form_eig <= -1e-6 / 2);
    for (double q : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        const Eigen::MatrixXd m = v.at(q);
        CHECK(max_eig(m.transpose() * cert.p + cert.p * m) < 0.0);
    }
}

TEST_CASE("deviation dynamics identity") {
    ModelParams p;
    p.k = 5;
    const auto eq = solve_equilibrium(p, 1e-13, 500000);
    const auto g = decompose_generator(p);
    const Eigen::VectorXd xs = eq.x_star.to_eigen();
    const double qs = leader_probabilities(p, eq.x_star).q_hdv;
    const Eigen::Index n = static_cast<Eigen::Index>(p.dimension());
    const Eigen::VectorXd forcing = ((g.a1 - g.a2) * xs).head(n - 1);
    Eigen::VectorXd eh = Eigen::VectorXd::Zero(n - 1);
    eh.head(static_cast<Eigen::Index>(p.hdv_size())).setOnes();

    std::mt19937_64 rng(3);
    for (int i = 0; i < 100; ++i) {
        const auto x = random_simplex_state(p, rng);
        const Eigen::VectorXd z = reduced_deviation(x, eq.x_star);
        const double q = leader_probabilities(p, x).q_hdv;
        CHECK(q - qs == doctest::Approx((1 - p.gamma) * eh.dot(z)).epsilon(1e-9));
        const Eigen::VectorXd lhs = drift(p, x).to_eigen().head(n - 1);
        const Eigen::VectorXd rhs = reduce_system(p, q).a_prime * z + (q - qs) * forcing;
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-11);
    }
}

TEST_CASE("quadratic form decays along trajectories") {
    ModelParams p;
    p.k = 5;
    const auto r = find_common_lyapunov(build_vertices(p));
    REQUIRE(r.status == LyapunovStatus::certified);
    const Eigen::MatrixXd& pm = r.certificate->p;
    const auto eq = solve_equilibrium(p, 1e-13, 500000);
    IntegrationConfig cfg;
    cfg.horizon_t = 60.0;
    cfg.record_stride = 60;
    for (double frac : {0.05, 0.5, 0.95}) {
        const auto traj = simulate(p, StateVector::unlocked(p, frac), cfg);
        REQUIRE(traj.size() >= 100);
        double previous = std::numeric_limits<double>::infinity();
        for (const auto& s : traj.states) {
            const Eigen::VectorXd z = reduced_deviation(s, eq.x_star);
            const double v = z.dot(pm * z);
            CHECK(v <= previous * (1 + 1e-9) + 1e-20);
            previous = v;
        }
    }
}
