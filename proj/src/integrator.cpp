#include "pavsim/integrator.hpp"

#include "pavsim/csv.hpp"
#include "pavsim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

namespace pavsim {

namespace {

double fastest_rate(const ModelParams& params) {
    return std::max({params.mu_h(), params.mu_a(), params.max_lambda()});
}

void check_step(const ModelParams& params, double h) {
    if (!(h > 0.0) || !std::isfinite(h)) throw ValidationError("step size must be positive and finite");
    const double stiffness = h * fastest_rate(params);
    if (stiffness >= kRk4StabilityGuard) {
        throw NumericalError("step h=" + format_double(h) + " violates the RK4 stability guard (h*rate=" +
                             format_double(stiffness) + ")");
    }
}

// Workspace for repeated steps without reallocating.
struct Rk4Workspace {
    explicit Rk4Workspace(std::size_t n) : k1(n), k2(n), k3(n), k4(n), tmp(n) {}
    std::vector<double> k1, k2, k3, k4, tmp;
};

// Returns false on negative undershoot.
bool rk4_inplace(const ModelParams& params, std::vector<double>& x, double h, bool renormalize,
                 Rk4Workspace& w) {
    const std::size_t n = x.size();
    detail::drift_flat(params, x, w.k1);
    for (std::size_t i = 0; i < n; ++i) w.tmp[i] = x[i] + 0.5 * h * w.k1[i];
    detail::drift_flat(params, w.tmp, w.k2);
    for (std::size_t i = 0; i < n; ++i) w.tmp[i] = x[i] + 0.5 * h * w.k2[i];
    detail::drift_flat(params, w.tmp, w.k3);
    for (std::size_t i = 0; i < n; ++i) w.tmp[i] = x[i] + h * w.k3[i];
    detail::drift_flat(params, w.tmp, w.k4);

    double total = 0.0;
    bool nonnegative = true;
    for (std::size_t i = 0; i < n; ++i) {
        x[i] += h / 6.0 * (w.k1[i] + 2.0 * (w.k2[i] + w.k3[i]) + w.k4[i]);
        if (x[i] < -kSimplexTolerance) nonnegative = false;
        total += x[i];
    }
    if (renormalize) {
        for (auto& v : x) v /= total;
    }
    return nonnegative;
}

double drift_inf_norm(const ModelParams& params, const std::vector<double>& x, std::vector<double>& scratch) {
    detail::drift_flat(params, x, scratch);
    double m = 0.0;
    for (double v : scratch) m = std::max(m, std::abs(v));
    return m;
}

} // namespace

void IntegrationConfig::validate(const ModelParams& params) const {
    if (!(step_h > 0.0) || !std::isfinite(step_h)) throw ValidationError("step_h must be positive");
    if (!(horizon_t > 0.0) || !std::isfinite(horizon_t)) throw ValidationError("horizon_t must be positive");
    if (step_h > horizon_t) throw ValidationError("step_h must not exceed horizon_t");
    if (record_stride < 1) throw ValidationError("record_stride must be a positive integer");
    const double stiffness = step_h * fastest_rate(params);
    if (stiffness >= kRk4StabilityGuard) {
        throw ValidationError("step_h=" + format_double(step_h) + " violates the RK4 stability guard (h*rate=" +
                              format_double(stiffness) + " >= 2.5)");
    }
}

StateVector rk4_step(const ModelParams& params, const StateVector& x, double h, bool renormalize) {
    params.validate();
    validate_simplex(params, x);
    check_step(params, h);
    std::vector<double> next = x.values();
    Rk4Workspace w(next.size());
    if (!rk4_inplace(params, next, h, renormalize, w)) {
        throw NumericalError("RK4 step produced a component below -1e-9; reduce the step size");
    }
    return {std::move(next), x.hdv_size()};
}

std::size_t step_count(const IntegrationConfig& cfg) {
    // Guard against ceil(30 / 0.01) landing on 3001 through representation error.
    const double ratio = cfg.horizon_t / cfg.step_h;
    const double nearest = std::round(ratio);
    if (std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, ratio)) return static_cast<std::size_t>(nearest);
    return static_cast<std::size_t>(std::ceil(ratio));
}

Trajectory simulate(const ModelParams& params, const StateVector& x0, const IntegrationConfig& cfg,
                    double t_start) {
    params.validate();
    cfg.validate(params);
    validate_simplex(params, x0);

    const std::size_t steps = step_count(cfg);
    const auto stride = static_cast<std::size_t>(cfg.record_stride);
    Trajectory traj;
    const std::size_t samples = steps / stride + 2;
    traj.times.reserve(samples);
    traj.states.reserve(samples);

    std::vector<double> x = x0.values();
    std::vector<double> scratch(x.size());
    Rk4Workspace w(x.size());

    auto record = [&](std::size_t step) {
        StateVector s(x, x0.hdv_size());
        traj.times.push_back(t_start + static_cast<double>(step) * cfg.step_h);
        traj.q_hdv.push_back(detail::q_hdv_flat(params, x));
        traj.sum_hdv.push_back(s.sum_hdv());
        traj.sum_av.push_back(s.sum_av());
        traj.drift_inf.push_back(drift_inf_norm(params, x, scratch));
        traj.states.push_back(std::move(s));
    };

    record(0);
    for (std::size_t step = 1; step <= steps; ++step) {
        if (!rk4_inplace(params, x, cfg.step_h, cfg.renormalize, w)) {
            throw NumericalError("RK4 step produced a component below -1e-9 at t=" +
                                 format_double(t_start + static_cast<double>(step) * cfg.step_h));
        }
        if (step % stride == 0 || step == steps) record(step);
    }
    return traj;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
    CsvWriter csv(os, {"time_s", "sum_xh", "sum_xa", "q_hdv", "xh0", "xa0"});
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const auto& s = traj.states[i];
        csv.row({traj.times[i], traj.sum_hdv[i], traj.sum_av[i], traj.q_hdv[i], s.hdv()[0], s.av()[0]});
    }
}

void write_state_csv(std::ostream& os, const Trajectory& traj) {
    if (traj.size() == 0) return;
    const auto& first = traj.states.front();
    std::vector<std::string> header{"time_s"};
    for (std::size_t i = 0; i < first.hdv().size(); ++i) header.push_back("xh" + std::to_string(i));
    for (std::size_t i = 0; i < first.av().size(); ++i) header.push_back("xa" + std::to_string(i));
    CsvWriter csv(os, header);
    std::vector<double> row;
    for (std::size_t i = 0; i < traj.size(); ++i) {
        row.assign(1, traj.times[i]);
        const auto flat = traj.states[i].flat();
        row.insert(row.end(), flat.begin(), flat.end());
        csv.row(row);
    }
}

} // namespace pavsim
