#pragma once

#include "pavsim/model.hpp"

#include <iosfwd>
#include <vector>

namespace pavsim {

/// Largest h * (fastest linear rate) accepted by rk4_step. The real-axis
/// stability limit of classic RK4 is about 2.785.
inline constexpr double kRk4StabilityGuard = 2.5;

struct IntegrationConfig {
    double step_h = 0.01;
    double horizon_t = 30.0;
    bool renormalize = true;
    int record_stride = 1;

    void validate(const ModelParams& params) const;
    bool operator==(const IntegrationConfig&) const = default;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<StateVector> states;
    std::vector<double> q_hdv;
    std::vector<double> sum_hdv;
    std::vector<double> sum_av;
    /// ||drift||_inf at each sample; recorded for diagnostics only.
    std::vector<double> drift_inf;

    std::size_t size() const { return times.size(); }
    const StateVector& terminal() const { return states.back(); }
};

/// One classic four-stage RK4 step. Throws NumericalError when h violates the
/// stability guard or when the result undershoots zero by more than 1e-9.
StateVector rk4_step(const ModelParams& params, const StateVector& x, double h, bool renormalize = true);

/// ceil(horizon / h) RK4 steps from x0, sampled every record_stride steps.
/// The initial and terminal states are always recorded.
Trajectory simulate(const ModelParams& params, const StateVector& x0, const IntegrationConfig& cfg,
                    double t_start = 0.0);

/// Number of RK4 steps simulate() takes for cfg.
std::size_t step_count(const IntegrationConfig& cfg);

/// `time_s,sum_xh,sum_xa,q_hdv,xh0,xa0`
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);
/// Sidecar with every state component: `time_s,xh0..xhK,xa0..xaK`.
void write_state_csv(std::ostream& os, const Trajectory& traj);

} // namespace pavsim
