#pragma once

// Headways of pure and transitional modes, effective headway and throughput.

#include "pavsim/integrator.hpp"
#include "pavsim/model.hpp"

#include <iosfwd>
#include <string_view>
#include <vector>

namespace pavsim {

struct HeadwayParams {
    double tau_a0 = 1.0; // AV equilibrium time gap [s]
    double tau_h0 = 1.5; // HDV equilibrium time gap [s]
    double l_a0 = 5.0;   // AV standstill distance [m]
    double l_h0 = 7.0;   // HDV standstill distance [m]
    double sigmoid_steepness = 10.0;
    double sigmoid_midpoint = 0.5; // in normalized stage fraction

    void validate() const;
    bool operator==(const HeadwayParams&) const = default;
};

enum class TransitionDirection { h_to_a, a_to_h };

struct StageHeadway {
    double tau = 0.0;        // [s]
    double standstill = 0.0; // [m]
};

/// Stage 0 is the origin mode's equilibrium; stage i >= 1 is the logistic
/// interpolation toward the target mode at s = (i - 0.5) / k.
StageHeadway stage_headway(const HeadwayParams& hp, int stage_i, int k, TransitionDirection direction);

/// Per-state headway parameters matching a StateVector layout.
struct HeadwayTable {
    std::vector<StageHeadway> hdv; // H_0..H_kh, upward transition stages
    std::vector<StageHeadway> av;  // A_0..A_ka, downward transition stages
    StageHeadway permanent;        // permanent HDVs

    static HeadwayTable build(const HeadwayParams& hp, std::size_t hdv_size, std::size_t av_size);
    static HeadwayTable build(const HeadwayParams& hp, const ModelParams& params) {
        return build(hp, params.hdv_size(), params.av_size());
    }
};

double effective_headway(const HeadwayTable& table, const StateVector& x, double v, double gamma);
double effective_headway(const HeadwayParams& hp, const StateVector& x, double v, double gamma);

/// 3600 / h_eff [veh/h/lane].
double throughput(const HeadwayParams& hp, const StateVector& x, double v, double gamma);
double throughput(const HeadwayTable& table, const StateVector& x, double v, double gamma);

/// Throughput evaluated at an equilibrium state and speed.
double steady_throughput(const HeadwayParams& hp, const StateVector& x_star, double v_star, double gamma);

class SpeedProfile {
public:
    SpeedProfile(std::vector<double> times, std::vector<double> speeds);
    static SpeedProfile constant(double speed, double t0, double t1);

    /// Linear interpolation; throws outside [front, back] time.
    double speed_at(double t) const;
    double start() const { return times_.front(); }
    double end() const { return times_.back(); }
    const std::vector<double>& times() const { return times_; }
    const std::vector<double>& speeds() const { return speeds_; }

private:
    std::vector<double> times_;
    std::vector<double> speeds_;
};

/// Parses `time_s,speed_mps`.
SpeedProfile read_speed_profile(std::istream& is, std::string_view source_name);

struct ThroughputSeries {
    std::vector<double> times;
    std::vector<double> speed;
    std::vector<double> h_eff;
    std::vector<double> c_vphpl;

    std::size_t size() const { return times.size(); }
};

ThroughputSeries throughput_series(const HeadwayParams& hp, const Trajectory& traj, const SpeedProfile& profile,
                                   double gamma);

/// `time_s,v_mps,h_eff_s,c_vphpl`
void write_throughput_csv(std::ostream& os, const ThroughputSeries& series);

} // namespace pavsim
