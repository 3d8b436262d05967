#include "pavsim/equilibrium.hpp"

#include "pavsim/csv.hpp"
#include "pavsim/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>
#include <string>

namespace pavsim {

std::string_view to_string(EquilibriumMethod method) {
    return method == EquilibriumMethod::self_map ? "self-map" : "damped-newton";
}

double alpha_max(const ModelParams& params) {
    params.validate();
    const double diag = std::max({params.max_lambda(), params.mu_h(), params.mu_a()});
    return 0.5 / diag;
}

StateVector fixed_point_map(const ModelParams& params, const StateVector& x, double alpha) {
    const double cap = alpha_max(params);
    if (!(alpha >= 0.0)) throw ValidationError("alpha must be nonnegative");
    if (alpha > cap) {
        throw ValidationError("alpha=" + format_double(alpha) + " exceeds alpha_max=" + format_double(cap));
    }
    validate_simplex(params, x);
    std::vector<double> next(x.size());
    detail::drift_flat(params, x.flat(), next);
    for (std::size_t i = 0; i < next.size(); ++i) next[i] = x[i] + alpha * next[i];
    return {std::move(next), x.hdv_size()};
}

namespace {

double inf_norm(const std::vector<double>& v) {
    double m = 0.0;
    for (double e : v) m = std::max(m, std::abs(e));
    return m;
}

class NewtonPolisher {
public:
    explicit NewtonPolisher(const ModelParams& params) : params_(params) {}

    // One damped Newton step on the reduced coordinates. Returns false when no
    // damped step lowers the residual.
    bool step(std::vector<double>& x, double& residual) {
        const std::size_t n = x.size();
        const std::size_t m = n - 1;
        const auto em = static_cast<Eigen::Index>(m);
        std::vector<double> f0(n);
        detail::drift_flat(params_, x, f0);

        Eigen::MatrixXd jac(em, em);
        std::vector<double> xp(n);
        std::vector<double> fp(n);
        constexpr double delta = 1e-7;
        for (std::size_t j = 0; j < m; ++j) {
            xp = x;
            xp[j] += delta;
            xp[m] -= delta;
            detail::drift_flat(params_, xp, fp);
            for (std::size_t i = 0; i < m; ++i) {
                jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (fp[i] - f0[i]) / delta;
            }
        }
        Eigen::VectorXd rhs(em);
        for (std::size_t i = 0; i < m; ++i) rhs(static_cast<Eigen::Index>(i)) = -f0[i];
        const Eigen::VectorXd dy = jac.partialPivLu().solve(rhs);
        if (!dy.allFinite()) return false;

        double scale = 1.0;
        std::vector<double> trial(n);
        std::vector<double> ft(n);
        for (int halving = 0; halving < 40; ++halving, scale *= 0.5) {
            double tail = 1.0;
            for (std::size_t i = 0; i < m; ++i) {
                trial[i] = x[i] + scale * dy(static_cast<Eigen::Index>(i));
                tail -= trial[i];
            }
            trial[m] = tail;
            if (*std::min_element(trial.begin(), trial.end()) < 0.0) continue;
            detail::drift_flat(params_, trial, ft);
            const double r = inf_norm(ft);
            if (r < residual) {
                x = trial;
                residual = r;
                return true;
            }
        }
        return false;
    }

private:
    const ModelParams& params_;
};

} // namespace

EquilibriumResult solve_equilibrium(const ModelParams& params, double tol, int max_iter) {
    EquilibriumOptions options;
    options.tol = tol;
    options.max_iter = max_iter;
    return solve_equilibrium(params, StateVector::uniform(params), options);
}

EquilibriumResult solve_equilibrium(const ModelParams& params, const StateVector& start,
                                    const EquilibriumOptions& options) {
    params.validate();
    validate_simplex(params, start);
    if (!(options.tol > 0.0)) throw ValidationError("equilibrium tolerance must be positive");
    if (options.max_iter < 1) throw ValidationError("max_iter must be positive");

    const double alpha = alpha_max(params);
    std::vector<double> x = start.values();
    std::vector<double> f(x.size());
    const double switch_at = options.newton_finish ? std::max(options.tol, options.newton_switch) : options.tol;

    EquilibriumResult result;
    result.method = EquilibriumMethod::self_map;
    int it = 0;
    double residual = 0.0;
    bool newton_stalled = false;
    NewtonPolisher newton(params);
    while (true) {
        detail::drift_flat(params, x, f);
        residual = inf_norm(f);
        if (residual <= options.tol) break;
        if (it >= options.max_iter) {
            throw NumericalError("equilibrium solver did not converge in " + std::to_string(options.max_iter) +
                                 " iterations (best residual " + format_double(residual) + ")");
        }
        ++it;
        if (options.newton_finish && !newton_stalled && residual <= switch_at) {
            if (newton.step(x, residual)) {
                result.method = EquilibriumMethod::damped_newton;
                continue;
            }
            newton_stalled = true;
        }
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += alpha * f[i];
    }
    result.x_star = StateVector(std::move(x), start.hdv_size());
    result.residual_inf = residual;
    result.iterations = it;
    return result;
}

std::vector<EquilibriumResult> multistart_equilibria(const ModelParams& params, int n_starts, std::uint64_t seed,
                                                     double tol, double distinct_tol) {
    params.validate();
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> expo(1.0);
    std::vector<EquilibriumResult> found;
    EquilibriumOptions options;
    options.tol = tol;

    auto consider = [&](const StateVector& start) {
        auto r = solve_equilibrium(params, start, options);
        for (const auto& known : found) {
            double gap = 0.0;
            for (std::size_t i = 0; i < r.x_star.size(); ++i) {
                gap = std::max(gap, std::abs(r.x_star[i] - known.x_star[i]));
            }
            if (gap <= distinct_tol) return;
        }
        found.push_back(std::move(r));
    };

    consider(StateVector::uniform(params));
    for (int s = 0; s < n_starts; ++s) {
        std::vector<double> w(params.dimension());
        double total = 0.0;
        for (auto& v : w) total += (v = expo(rng));
        for (auto& v : w) v /= total;
        consider(StateVector(std::move(w), params.hdv_size()));
    }
    return found;
}

StateVector leader_independent_equilibrium(const ModelParams& params) {
    params.validate();
    if (!params.leader_independent()) {
        throw ValidationError("closed-form equilibrium needs lambda1 == lambda3 and lambda2 == lambda4");
    }
    const double rate_ha = params.lambda1;
    const double rate_ah = params.lambda2;
    const double flow = 1.0 / (1.0 / rate_ha + 1.0 / rate_ah + params.t_lock_h + params.t_lock_a);
    std::vector<double> h(params.hdv_size(), params.has_upward_lock() ? flow / params.mu_h() : 0.0);
    std::vector<double> a(params.av_size(), params.has_downward_lock() ? flow / params.mu_a() : 0.0);
    h[0] = flow / rate_ha;
    a[0] = flow / rate_ah;
    return {std::move(h), std::move(a)};
}

ReducedSystem reduce_generator(const Eigen::MatrixXd& generator) {
    if (generator.rows() != generator.cols() || generator.rows() < 2) {
        throw ValidationError("reduction needs a square generator of dimension >= 2");
    }
    const Eigen::Index m = generator.rows() - 1;
    ReducedSystem r;
    r.c = generator.col(m).head(m);
    r.a_prime = generator.topLeftCorner(m, m);
    r.a_prime.colwise() -= r.c;
    r.eliminated_index = static_cast<std::size_t>(m);
    return r;
}

ReducedSystem reduce_system(const ModelParams& params, double q_hdv) {
    return reduce_generator(assemble_generator(params, q_hdv));
}

void write_equilibrium_json(std::ostream& os, const ModelParams& params, const EquilibriumResult& result) {
    nlohmann::ordered_json j;
    j["params"] = {{"lambda1", params.lambda1}, {"lambda2", params.lambda2}, {"lambda3", params.lambda3},
                   {"lambda4", params.lambda4}, {"gamma", params.gamma},     {"k", params.k},
                   {"t_lock_h", params.t_lock_h}, {"t_lock_a", params.t_lock_a}};
    j["x_star"] = {{"hdv", std::vector<double>(result.x_star.hdv().begin(), result.x_star.hdv().end())},
                   {"av", std::vector<double>(result.x_star.av().begin(), result.x_star.av().end())}};
    j["sum_xh"] = result.x_star.sum_hdv();
    j["sum_xa"] = result.x_star.sum_av();
    j["residual"] = result.residual_inf;
    j["iterations"] = result.iterations;
    j["method"] = std::string(to_string(result.method));
    os << j.dump(2) << '\n';
}

} // namespace pavsim
