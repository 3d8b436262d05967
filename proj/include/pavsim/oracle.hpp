#pragma once

// Mean-field particle simulation of the PAV population.

#include "pavsim/integrator.hpp"
#include "pavsim/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

namespace pavsim {

enum class LockoutMode { erlang_stage, deterministic_lockout };

std::string_view to_string(LockoutMode mode);
LockoutMode parse_lockout_mode(std::string_view text);

inline constexpr std::size_t kOracleMinParticles = 1000;
inline constexpr double kOracleMaxEventProbability = 0.1;

struct OracleConfig {
    std::size_t n = 100000;
    double horizon = 30.0;
    double dt = 0.01;
    std::uint64_t seed = 1;
    LockoutMode mode = LockoutMode::erlang_stage;
    int record_every = 1; // steps between recorded samples
    int threads = 1;

    void validate(const ModelParams& params) const;
};

struct OracleSeries {
    std::vector<double> times;
    std::vector<double> frac_h;
    std::vector<double> frac_a;
    std::vector<double> se_h;
    std::vector<double> se_a;
    std::vector<std::size_t> count_h;
    std::vector<std::size_t> count_a;

    std::size_t size() const { return times.size(); }
};

/// Unlocked particles switch with probability 1 - exp(-rate dt), the rate
/// using the population mix at the start of the step. Locked particles either
/// pass a Poisson(mu dt) number of Erlang stages per step or count down a
/// timer of exactly the lockout duration.
OracleSeries run_oracle(const ModelParams& params, const StateVector& x0, const OracleConfig& cfg);

struct ModeComparison {
    double max_gap = 0.0; // max over samples of |frac_h erlang - frac_h deterministic|
    double gap_time = 0.0;
    OracleSeries erlang;
    OracleSeries deterministic;
};

/// Paired runs sharing the random numbers of the switching clocks.
ModeComparison compare_modes(const ModelParams& params, const StateVector& x0, OracleConfig cfg);

/// Max |frac_h - sum_xh| over the samples the two series share.
double max_deviation_from_ode(const OracleSeries& series, const Trajectory& traj);

/// `time_s,frac_h,frac_a,se_h,se_a`
void write_oracle_csv(std::ostream& os, const OracleSeries& series);

} // namespace pavsim
