#pragma once

// Scenario configuration: flat `key = value` text with `#` comments.

#include "pavsim/integrator.hpp"
#include "pavsim/model.hpp"
#include "pavsim/oracle.hpp"
#include "pavsim/throughput.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pavsim {

struct ScenarioConfig {
    std::string label = "default";
    ModelParams model;
    HeadwayParams headway;
    double frac_h0 = 0.5;
    double frac_a0 = 0.5;
    IntegrationConfig integration;
    double v = 10.0; // steady speed [m/s]
    std::uint64_t seed = 1;
    int threads = 1;

    // Matched leader-independent rates; derived from lambda1..4 when unset.
    std::optional<double> lambda_ha_bar;
    std::optional<double> lambda_ah_bar;

    double equilibrium_tol = 1e-10;
    int equilibrium_max_iter = 500000;
    int multistart_starts = 0;

    double convergence_threshold = 1e-3;
    double sweep_horizon = 60.0;
    int sweep_points = 11;
    int rate_grid_points = 5;
    std::vector<double> rate_grid_gammas{0.2, 0.5, 0.8};

    int scan_k = 5;
    double scan_step = 0.05;
    bool scan_tie = false;
    int scan_hurwitz_samples = 21;
    double scan_eps = 1e-6;
    int scan_max_iter = 5000;

    double erlang_threshold = 0.2;
    int erlang_k_max = 300;

    std::size_t oracle_n = 100000;
    double oracle_dt = 0.01;
    double oracle_horizon = 30.0;
    LockoutMode oracle_mode = LockoutMode::erlang_stage;
    bool oracle_compare_modes = false;

    std::string speed_profile;

    void validate() const;
    StateVector initial_state() const { return StateVector::unlocked(model, frac_h0); }
    bool operator==(const ScenarioConfig&) const = default;
};

/// Applies `key = value` lines on top of base. Errors carry source:line.
ScenarioConfig parse_config(std::istream& is, std::string_view source_name, ScenarioConfig base = {});
ScenarioConfig load_config(const std::string& path, ScenarioConfig base = {});

/// Every key, one per line, in a fixed order.
std::string serialize_config(const ScenarioConfig& cfg);

std::vector<std::string> config_keys();

std::vector<std::string> preset_names();
ScenarioConfig preset_config(std::string_view name);

/// Leader-dependent rates paired with the leader-independent system whose
/// rates are their averages.
struct PairedScenario {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double lambda3 = 0.0;
    double lambda4 = 0.0;
    double lambda_ha_bar = 0.0;
    double lambda_ah_bar = 0.0;

    static PairedScenario from_rates(const ModelParams& params);
    static PairedScenario from_config(const ScenarioConfig& cfg);

    void validate() const;
    ModelParams leader_dependent(const ModelParams& base) const;
    ModelParams baseline(const ModelParams& base) const;
};

inline constexpr double kPairingTolerance = 1e-12;

} // namespace pavsim
