#include "pavsim/oracle.hpp"

#include "pavsim/csv.hpp"
#include "pavsim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <thread>

namespace pavsim {

std::string_view to_string(LockoutMode mode) {
    return mode == LockoutMode::erlang_stage ? "erlang-stage" : "deterministic-lockout";
}

LockoutMode parse_lockout_mode(std::string_view text) {
    if (text == "erlang-stage" || text == "erlang_stage") return LockoutMode::erlang_stage;
    if (text == "deterministic-lockout" || text == "deterministic_lockout") return LockoutMode::deterministic_lockout;
    throw ValidationError("unknown lockout mode '" + std::string(text) + "'");
}

void OracleConfig::validate(const ModelParams& params) const {
    params.validate();
    if (n < kOracleMinParticles) {
        throw ValidationError("oracle needs at least " + std::to_string(kOracleMinParticles) + " particles");
    }
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("oracle dt must be positive");
    if (!(horizon >= dt) || !std::isfinite(horizon)) throw ValidationError("oracle horizon must be >= dt");
    if (record_every < 1) throw ValidationError("record_every must be >= 1");
    if (threads < 1) throw ValidationError("threads must be >= 1");
    const double p = 1.0 - std::exp(-params.max_lambda() * dt);
    if (!(p < kOracleMaxEventProbability)) {
        throw ValidationError("oracle dt too large: per-step switching probability " + format_double(p) + " >= 0.1");
    }
}

namespace {

std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

enum Stream : std::uint64_t { switch_clock = 0, stage_clock = 1, initial = 2 };

// Uniform in (0, 1) keyed by (seed, particle, step, stream).
double uniform(std::uint64_t seed_key, std::uint64_t particle, std::uint64_t step, Stream stream) {
    const std::uint64_t h = mix64(mix64(seed_key ^ particle) ^ ((step << 2) | stream));
    return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

struct Particle {
    bool av = false;
    int stage = 0;      // erlang mode
    double timer = 0.0; // deterministic mode, remaining lockout [s]
    bool locked() const { return stage > 0 || timer > 0.0; }
};

constexpr double kTimerEps = 1e-9;

std::size_t step_total(double horizon, double dt) {
    const double ratio = horizon / dt;
    const double rounded = std::round(ratio);
    if (std::abs(ratio - rounded) <= 1e-9 * std::max(1.0, ratio)) return static_cast<std::size_t>(rounded);
    return static_cast<std::size_t>(std::ceil(ratio));
}

// Number of arrivals of a Poisson process with mean m, by inversion.
int poisson_inverse(double u, double m, double p0) {
    int count = 0;
    double p = p0;
    double cdf = p0;
    while (u > cdf && count < 10000) {
        ++count;
        p *= m / count;
        cdf += p;
        if (p < 1e-300) break;
    }
    return count;
}

class Ensemble {
public:
    Ensemble(const ModelParams& params, const OracleConfig& cfg) : params_(params), cfg_(cfg), seed_key_(mix64(cfg.seed)) {}

    void initialize(const StateVector& x0) {
        particles_.assign(cfg_.n, Particle{});
        const auto flat = x0.flat();
        std::vector<double> cdf(flat.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < flat.size(); ++i) {
            acc += std::max(0.0, flat[i]);
            cdf[i] = acc;
        }
        const std::size_t hs = x0.hdv_size();
        for (std::size_t p = 0; p < particles_.size(); ++p) {
            const double u = (static_cast<double>(p) + uniform(seed_key_, p, 0, Stream::initial)) /
                             static_cast<double>(particles_.size()) * acc;
            std::size_t idx = static_cast<std::size_t>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
            idx = std::min(idx, flat.size() - 1);
            Particle& part = particles_[p];
            part.av = idx >= hs;
            const int stage = static_cast<int>(part.av ? idx - hs : idx);
            if (stage > 0) {
                if (cfg_.mode == LockoutMode::erlang_stage) {
                    part.stage = stage;
                } else {
                    const double t_lock = part.av ? params_.t_lock_a : params_.t_lock_h;
                    part.timer = t_lock * (params_.k - stage + 1) / params_.k;
                }
            }
        }
    }

    std::size_t count_h() const {
        return static_cast<std::size_t>(
            std::count_if(particles_.begin(), particles_.end(), [](const Particle& p) { return !p.av; }));
    }

    // Advances every particle one step given the population split at step start.
    void step(std::uint64_t step_index, std::size_t n_h) {
        const double frac_h = static_cast<double>(n_h) / particles_.size();
        const double q = params_.gamma + (1.0 - params_.gamma) * frac_h;
        const double rate_ha = q * params_.lambda1 + (1.0 - q) * params_.lambda3;
        const double rate_ah = q * params_.lambda2 + (1.0 - q) * params_.lambda4;
        const StepRates rates{
            1.0 - std::exp(-rate_ha * cfg_.dt),
            1.0 - std::exp(-rate_ah * cfg_.dt),
            params_.mu_h() * cfg_.dt,
            params_.mu_a() * cfg_.dt,
            std::exp(-params_.mu_h() * cfg_.dt),
            std::exp(-params_.mu_a() * cfg_.dt),
        };
        const int workers = std::max(1, std::min<int>(cfg_.threads, static_cast<int>(particles_.size())));
        if (workers == 1) {
            advance(0, particles_.size(), step_index, rates);
            return;
        }
        std::vector<std::jthread> pool;
        const std::size_t chunk = (particles_.size() + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            const std::size_t lo = std::min(particles_.size(), w * chunk);
            const std::size_t hi = std::min(particles_.size(), lo + chunk);
            pool.emplace_back([this, lo, hi, step_index, &rates] { advance(lo, hi, step_index, rates); });
        }
    }

private:
    struct StepRates {
        double p_ha;
        double p_ah;
        double mean_h; // mu_h dt
        double mean_a;
        double p0_h;   // exp(-mu_h dt)
        double p0_a;
    };

    void land(Particle& p, bool on_av) const {
        p.av = on_av;
        p.stage = 0;
        p.timer = 0.0;
    }

    void advance(std::size_t lo, std::size_t hi, std::uint64_t step_index, const StepRates& r) {
        const bool erlang = cfg_.mode == LockoutMode::erlang_stage;
        for (std::size_t i = lo; i < hi; ++i) {
            Particle& p = particles_[i];
            const bool lock_here = p.av ? params_.has_downward_lock() : params_.has_upward_lock();
            if (!p.locked()) {
                const double u = uniform(seed_key_, i, step_index + 1, Stream::switch_clock);
                if (u >= (p.av ? r.p_ah : r.p_ha)) continue;
                if (!lock_here) {
                    land(p, !p.av);
                } else if (erlang) {
                    p.stage = 1;
                } else {
                    p.timer = p.av ? params_.t_lock_a : params_.t_lock_h;
                }
                continue;
            }
            if (erlang) {
                const double u = uniform(seed_key_, i, step_index + 1, Stream::stage_clock);
                p.stage += p.av ? poisson_inverse(u, r.mean_a, r.p0_a) : poisson_inverse(u, r.mean_h, r.p0_h);
                if (p.stage > params_.k) land(p, !p.av);
            } else {
                p.timer -= cfg_.dt;
                if (p.timer <= kTimerEps) land(p, !p.av);
            }
        }
    }

    const ModelParams& params_;
    const OracleConfig& cfg_;
    std::uint64_t seed_key_;
    std::vector<Particle> particles_;
};

void record(OracleSeries& s, double t, std::size_t n_h, std::size_t n) {
    const double fh = static_cast<double>(n_h) / n;
    const double fa = static_cast<double>(n - n_h) / n;
    const double se = std::sqrt(fh * fa / n);
    s.times.push_back(t);
    s.frac_h.push_back(fh);
    s.frac_a.push_back(fa);
    s.se_h.push_back(se);
    s.se_a.push_back(se);
    s.count_h.push_back(n_h);
    s.count_a.push_back(n - n_h);
}

} // namespace

OracleSeries run_oracle(const ModelParams& params, const StateVector& x0, const OracleConfig& cfg) {
    cfg.validate(params);
    validate_simplex(params, x0);
    Ensemble ens(params, cfg);
    ens.initialize(x0);
    const std::size_t steps = step_total(cfg.horizon, cfg.dt);
    OracleSeries out;
    std::size_t n_h = ens.count_h();
    record(out, 0.0, n_h, cfg.n);
    for (std::size_t s = 0; s < steps; ++s) {
        ens.step(s, n_h);
        n_h = ens.count_h();
        if ((s + 1) % static_cast<std::size_t>(cfg.record_every) == 0 || s + 1 == steps) {
            record(out, static_cast<double>(s + 1) * cfg.dt, n_h, cfg.n);
        }
    }
    return out;
}

ModeComparison compare_modes(const ModelParams& params, const StateVector& x0, OracleConfig cfg) {
    ModeComparison cmp;
    cfg.mode = LockoutMode::erlang_stage;
    cmp.erlang = run_oracle(params, x0, cfg);
    cfg.mode = LockoutMode::deterministic_lockout;
    cmp.deterministic = run_oracle(params, x0, cfg);
    for (std::size_t i = 0; i < cmp.erlang.size(); ++i) {
        const double gap = std::abs(cmp.erlang.frac_h[i] - cmp.deterministic.frac_h[i]);
        if (gap > cmp.max_gap) {
            cmp.max_gap = gap;
            cmp.gap_time = cmp.erlang.times[i];
        }
    }
    return cmp;
}

double max_deviation_from_ode(const OracleSeries& series, const Trajectory& traj) {
    double worst = 0.0;
    std::size_t matched = 0;
    std::size_t j = 0;
    for (std::size_t i = 0; i < series.size(); ++i) {
        const double t = series.times[i];
        while (j < traj.size() && traj.times[j] < t - 1e-9) ++j;
        if (j == traj.size()) break;
        if (std::abs(traj.times[j] - t) > 1e-9) continue;
        worst = std::max(worst, std::abs(series.frac_h[i] - traj.sum_hdv[j]));
        ++matched;
    }
    if (matched == 0) throw ValidationError("oracle series and trajectory share no sample times");
    return worst;
}

void write_oracle_csv(std::ostream& os, const OracleSeries& series) {
    CsvWriter w(os, {"time_s", "frac_h", "frac_a", "se_h", "se_a"});
    for (std::size_t i = 0; i < series.size(); ++i) {
        w.row({series.times[i], series.frac_h[i], series.frac_a[i], series.se_h[i], series.se_a[i]});
    }
}

} // namespace pavsim
