#include "pavsim/throughput.hpp"

#include "pavsim/csv.hpp"
#include "pavsim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

namespace pavsim {

void HeadwayParams::validate() const {
    for (double v : {tau_a0, tau_h0, l_a0, l_h0}) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("headway gaps and standstill distances must be positive");
    }
    if (tau_h0 < tau_a0) throw ValidationError("tau_h0 must be >= tau_a0");
    if (l_h0 < l_a0) throw ValidationError("l_h0 must be >= l_a0");
    if (!(sigmoid_steepness > 0.0) || !std::isfinite(sigmoid_steepness)) {
        throw ValidationError("sigmoid_steepness must be positive");
    }
    if (!std::isfinite(sigmoid_midpoint)) throw ValidationError("sigmoid_midpoint must be finite");
}

StageHeadway stage_headway(const HeadwayParams& hp, int stage_i, int k, TransitionDirection direction) {
    if (k < 0) throw ValidationError("stage count must be >= 0");
    if (stage_i < 0 || stage_i > k) {
        throw ValidationError("stage index " + std::to_string(stage_i) + " outside 0.." + std::to_string(k));
    }
    const bool up = direction == TransitionDirection::h_to_a;
    const StageHeadway origin = up ? StageHeadway{hp.tau_h0, hp.l_h0} : StageHeadway{hp.tau_a0, hp.l_a0};
    const StageHeadway target = up ? StageHeadway{hp.tau_a0, hp.l_a0} : StageHeadway{hp.tau_h0, hp.l_h0};
    if (stage_i == 0) return origin;
    const double s = (stage_i - 0.5) / k;
    const double w = 1.0 / (1.0 + std::exp(-hp.sigmoid_steepness * (s - hp.sigmoid_midpoint)));
    return {origin.tau + (target.tau - origin.tau) * w, origin.standstill + (target.standstill - origin.standstill) * w};
}

HeadwayTable HeadwayTable::build(const HeadwayParams& hp, std::size_t hdv_size, std::size_t av_size) {
    hp.validate();
    if (hdv_size == 0 || av_size == 0) throw ValidationError("state layout needs at least one state per side");
    HeadwayTable t;
    const int kh = static_cast<int>(hdv_size) - 1;
    const int ka = static_cast<int>(av_size) - 1;
    for (int i = 0; i <= kh; ++i) t.hdv.push_back(stage_headway(hp, i, kh, TransitionDirection::h_to_a));
    for (int i = 0; i <= ka; ++i) t.av.push_back(stage_headway(hp, i, ka, TransitionDirection::a_to_h));
    t.permanent = {hp.tau_h0, hp.l_h0};
    return t;
}

namespace {

void check_speed(double v) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError("speed must be positive, got " + format_double(v));
}

double headway_of(const StageHeadway& s, double v) { return s.tau + s.standstill / v; }

} // namespace

double effective_headway(const HeadwayTable& table, const StateVector& x, double v, double gamma) {
    check_speed(v);
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ValidationError("gamma must lie in [0, 1]");
    if (x.hdv().size() != table.hdv.size() || x.av().size() != table.av.size()) {
        throw ValidationError("state layout does not match the headway table");
    }
    double pav = 0.0;
    double total = 0.0;
    const auto h = x.hdv();
    const auto a = x.av();
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (h[i] < -kSimplexTolerance) throw ValidationError("state has a negative component");
        pav += h[i] * headway_of(table.hdv[i], v);
        total += h[i];
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] < -kSimplexTolerance) throw ValidationError("state has a negative component");
        pav += a[i] * headway_of(table.av[i], v);
        total += a[i];
    }
    if (std::abs(total - 1.0) > kSimplexTolerance) throw ValidationError("state is off the simplex");
    return (1.0 - gamma) * pav + gamma * headway_of(table.permanent, v);
}

double effective_headway(const HeadwayParams& hp, const StateVector& x, double v, double gamma) {
    return effective_headway(HeadwayTable::build(hp, x.hdv().size(), x.av().size()), x, v, gamma);
}

double throughput(const HeadwayTable& table, const StateVector& x, double v, double gamma) {
    return 3600.0 / effective_headway(table, x, v, gamma);
}

double throughput(const HeadwayParams& hp, const StateVector& x, double v, double gamma) {
    return 3600.0 / effective_headway(hp, x, v, gamma);
}

double steady_throughput(const HeadwayParams& hp, const StateVector& x_star, double v_star, double gamma) {
    return throughput(hp, x_star, v_star, gamma);
}

SpeedProfile::SpeedProfile(std::vector<double> times, std::vector<double> speeds)
    : times_(std::move(times)), speeds_(std::move(speeds)) {
    if (times_.size() != speeds_.size()) throw ValidationError("speed profile columns differ in length");
    if (times_.size() < 2) throw ValidationError("speed profile needs at least two samples");
    for (std::size_t i = 0; i < times_.size(); ++i) {
        if (!std::isfinite(times_[i])) throw ValidationError("speed profile time is not finite");
        if (i > 0 && !(times_[i] > times_[i - 1])) {
            throw ValidationError("speed profile times must be strictly increasing (sample " + std::to_string(i + 1) + ")");
        }
        if (!(speeds_[i] > 0.0) || !std::isfinite(speeds_[i])) {
            throw ValidationError("speed profile speed must be positive (sample " + std::to_string(i + 1) + ")");
        }
    }
}

SpeedProfile SpeedProfile::constant(double speed, double t0, double t1) {
    if (!(t1 > t0)) throw ValidationError("constant profile needs t1 > t0");
    return SpeedProfile({t0, t1}, {speed, speed});
}

double SpeedProfile::speed_at(double t) const {
    constexpr double slack = 1e-9;
    if (t < times_.front() - slack || t > times_.back() + slack) {
        throw ValidationError("time " + format_double(t) + " outside speed profile range [" + format_double(times_.front()) +
                              ", " + format_double(times_.back()) + "]");
    }
    if (times_.size() == 1 || t <= times_.front()) return speeds_.front();
    if (t >= times_.back()) return speeds_.back();
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    const std::size_t j = static_cast<std::size_t>(it - times_.begin());
    const double w = (t - times_[j - 1]) / (times_[j] - times_[j - 1]);
    return speeds_[j - 1] + w * (speeds_[j] - speeds_[j - 1]);
}

SpeedProfile read_speed_profile(std::istream& is, std::string_view source_name) {
    const auto table = read_numeric_csv(is, {"time_s", "speed_mps"}, source_name);
    std::vector<double> times;
    std::vector<double> speeds;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string where = std::string(source_name) + ":" + std::to_string(table.line_numbers[r]) + ": ";
        if (!(row[1] > 0.0)) throw ValidationError(where + "speed must be positive, got " + format_double(row[1]));
        if (!times.empty() && !(row[0] > times.back())) throw ValidationError(where + "time must be strictly increasing");
        times.push_back(row[0]);
        speeds.push_back(row[1]);
    }
    if (times.size() < 2) throw ValidationError(std::string(source_name) + ": speed profile needs at least two rows");
    return SpeedProfile(std::move(times), std::move(speeds));
}

ThroughputSeries throughput_series(const HeadwayParams& hp, const Trajectory& traj, const SpeedProfile& profile,
                                   double gamma) {
    ThroughputSeries out;
    if (traj.size() == 0) return out;
    const auto table = HeadwayTable::build(hp, traj.states.front().hdv().size(), traj.states.front().av().size());
    out.times.reserve(traj.size());
    out.speed.reserve(traj.size());
    out.h_eff.reserve(traj.size());
    out.c_vphpl.reserve(traj.size());
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const double v = profile.speed_at(traj.times[i]);
        const double h = effective_headway(table, traj.states[i], v, gamma);
        out.times.push_back(traj.times[i]);
        out.speed.push_back(v);
        out.h_eff.push_back(h);
        out.c_vphpl.push_back(3600.0 / h);
    }
    return out;
}

void write_throughput_csv(std::ostream& os, const ThroughputSeries& series) {
    CsvWriter w(os, {"time_s", "v_mps", "h_eff_s", "c_vphpl"});
    for (std::size_t i = 0; i < series.size(); ++i) {
        w.row({series.times[i], series.speed[i], series.h_eff[i], series.c_vphpl[i]});
    }
}

} // namespace pavsim
