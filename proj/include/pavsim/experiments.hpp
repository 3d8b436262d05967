#pragma once

// Experiment drivers behind the command line harness.

#include "pavsim/config.hpp"
#include "pavsim/equilibrium.hpp"
#include "pavsim/integrator.hpp"
#include "pavsim/stability.hpp"
#include "pavsim/throughput.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace pavsim {

/// Runs fn(0..n-1) on up to `threads` workers.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

/// sqrt((1/T) * integral of (c - c_inf)^2 dt), trapezoidal over the samples.
double l2_fluctuation(const std::vector<double>& times, const std::vector<double>& c, double c_inf);

struct TransientMetrics {
    double convergence_time = 0.0; // first t with ||x - x*||_inf <= threshold; nan if never
    double overshoot = 0.0;        // max |C(t) - C_inf|
};

TransientMetrics transient_metrics(const Trajectory& traj, const ThroughputSeries& series, const StateVector& x_star,
                                   double c_inf, double threshold);

struct ScenarioRun {
    ModelParams params;
    Trajectory trajectory;
    ThroughputSeries series;
    EquilibriumResult equilibrium;
    double steady_c = 0.0;      // at the equilibrium and the config speed
    double l2 = 0.0;            // fluctuation around steady_c
};

/// Integrates from the config initial state and evaluates throughput along
/// the profile (constant config speed when profile is null).
ScenarioRun run_scenario(const ScenarioConfig& cfg, const ModelParams& params, const SpeedProfile* profile = nullptr);

struct CompareReport {
    PairedScenario paired;
    ScenarioRun leader_dependent;
    ScenarioRun baseline;
    double steady_gap = 0.0; // leader-dependent minus baseline [vphpl]
    double max_abs_gap = 0.0;
};

CompareReport compare_paired(const ScenarioConfig& cfg, const SpeedProfile* profile = nullptr);

struct GammaRow {
    double gamma;
    double steady_c;
    double l2;
};
std::vector<GammaRow> sweep_gamma(const ScenarioConfig& cfg, const std::vector<double>& gammas);

struct InitialFractionRow {
    double frac_h0;
    double convergence_time;
    double overshoot;
};
std::vector<InitialFractionRow> sweep_initial_fraction(const ScenarioConfig& cfg, const std::vector<double>& fractions);

struct RateGridRow {
    double gamma;
    double lambda1, lambda2, lambda3, lambda4;
    double steady_c;
    double l2;
};
/// (lambda1, lambda2) grid at fixed averages, so lambda3 and lambda4 follow.
std::vector<RateGridRow> sweep_rate_grid(const ScenarioConfig& cfg);

struct ScanRow {
    double lambda_a;
    double lambda_b;
    LyapunovStatus status;
    double margin;
    double worst_abscissa;
    std::optional<Eigen::MatrixXd> p;
};

/// Grid of step, 2 step, ..., 1 for (lambda1, lambda2) at k = scan_k.
std::vector<double> scan_axis(double step);
ModelParams scan_params(const ScenarioConfig& cfg, double lambda_a, double lambda_b);
std::vector<ScanRow> stability_scan(const ScenarioConfig& cfg);

std::vector<double> even_grid(double lo, double hi, int points);

// Commands. Each writes its files under out and returns their paths.
using OutputFiles = std::vector<std::filesystem::path>;
OutputFiles cmd_simulate(const ScenarioConfig& cfg, const std::filesystem::path& out);
OutputFiles cmd_compare(const ScenarioConfig& cfg, const std::filesystem::path& out);
OutputFiles cmd_sweep(const ScenarioConfig& cfg, const std::string& axis, const std::filesystem::path& out);
OutputFiles cmd_ngsim(const ScenarioConfig& cfg, const std::string& profile_path, const std::filesystem::path& out);
OutputFiles cmd_stability_scan(const ScenarioConfig& cfg, const std::filesystem::path& out);
OutputFiles cmd_erlang_check(const ScenarioConfig& cfg, const std::filesystem::path& out);
OutputFiles cmd_oracle_validate(const ScenarioConfig& cfg, const std::filesystem::path& out);
OutputFiles cmd_equilibrium(const ScenarioConfig& cfg, const std::filesystem::path& out);

} // namespace pavsim
