#pragma once

#include "pavsim/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

namespace pavsim {

enum class EquilibriumMethod { self_map, damped_newton };

std::string_view to_string(EquilibriumMethod method);

struct EquilibriumResult {
    StateVector x_star;
    double residual_inf = 0.0;
    int iterations = 0;
    EquilibriumMethod method = EquilibriumMethod::self_map;
};

/// Largest admissible step of the self-map: 0.5 / max |diagonal| of A(q)
/// over q in {0, 1}. Computed from the rates, so it works for any k.
double alpha_max(const ModelParams& params);

/// x + alpha * drift(x). Stays on the simplex for alpha <= alpha_max.
StateVector fixed_point_map(const ModelParams& params, const StateVector& x, double alpha);

struct EquilibriumOptions {
    double tol = 1e-10;
    int max_iter = 500000;
    /// Finish with damped Newton on the reduced system once the self-map
    /// residual is below newton_switch.
    bool newton_finish = true;
    double newton_switch = 1e-6;
};

/// Self-map iteration from `start` (uniform state by default), optionally
/// polished by damped Newton. Throws NumericalError with the best residual
/// on non-convergence.
EquilibriumResult solve_equilibrium(const ModelParams& params, double tol, int max_iter);
EquilibriumResult solve_equilibrium(const ModelParams& params, const StateVector& start,
                                    const EquilibriumOptions& options);

/// Solves from n_starts random simplex points (plus the uniform state) and
/// returns the distinct equilibria found, merged within distinct_tol.
std::vector<EquilibriumResult> multistart_equilibria(const ModelParams& params, int n_starts, std::uint64_t seed,
                                                     double tol = 1e-10, double distinct_tol = 1e-6);

/// Closed-form stationary state when rates do not depend on the leader
/// (lambda1 == lambda3, lambda2 == lambda4). The cycle carries a single flow
/// f = 1 / (1/l_ha + 1/l_ah + T_h + T_a); each state holds f times its mean
/// residence time.
StateVector leader_independent_equilibrium(const ModelParams& params);

/// dy/dt = a_prime y + c after eliminating the last A-side state through
/// x_n = 1 - sum(y).
struct ReducedSystem {
    Eigen::MatrixXd a_prime;
    Eigen::VectorXd c;
    std::size_t eliminated_index = 0;

    Eigen::VectorXd rhs(const Eigen::VectorXd& y) const { return a_prime * y + c; }
};

ReducedSystem reduce_generator(const Eigen::MatrixXd& generator);
ReducedSystem reduce_system(const ModelParams& params, double q_hdv);

/// JSON record {params, x_star, residual, iterations, method}.
void write_equilibrium_json(std::ostream& os, const ModelParams& params, const EquilibriumResult& result);

} // namespace pavsim
