#include "pavsim/experiments.hpp"

#include "pavsim/csv.hpp"
#include "pavsim/erlang.hpp"
#include "pavsim/errors.hpp"
#include "pavsim/oracle.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <thread>

namespace pavsim {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
    const auto workers = static_cast<std::size_t>(std::max(1, threads));
    if (workers == 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < std::min(workers, n); ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                    }
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
}

double l2_fluctuation(const std::vector<double>& times, const std::vector<double>& c, double c_inf) {
    if (times.size() != c.size()) throw ValidationError("l2_fluctuation: series lengths differ");
    if (times.size() < 2) return 0.0;
    double integral = 0.0;
    for (std::size_t i = 1; i < times.size(); ++i) {
        const double a = c[i - 1] - c_inf;
        const double b = c[i] - c_inf;
        integral += 0.5 * (a * a + b * b) * (times[i] - times[i - 1]);
    }
    return std::sqrt(integral / (times.back() - times.front()));
}

TransientMetrics transient_metrics(const Trajectory& traj, const ThroughputSeries& series, const StateVector& x_star,
                                   double c_inf, double threshold) {
    TransientMetrics m;
    m.convergence_time = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t i = 0; i < traj.size(); ++i) {
        const auto x = traj.states[i].flat();
        const auto y = x_star.flat();
        double dist = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) dist = std::max(dist, std::abs(x[j] - y[j]));
        if (dist <= threshold) {
            m.convergence_time = traj.times[i] - traj.times.front();
            break;
        }
    }
    for (double c : series.c_vphpl) m.overshoot = std::max(m.overshoot, std::abs(c - c_inf));
    return m;
}

ScenarioRun run_scenario(const ScenarioConfig& cfg, const ModelParams& params, const SpeedProfile* profile) {
    ScenarioRun run;
    run.params = params;
    EquilibriumOptions opts;
    opts.tol = cfg.equilibrium_tol;
    opts.max_iter = cfg.equilibrium_max_iter;
    run.equilibrium = solve_equilibrium(params, StateVector::uniform(params), opts);

    IntegrationConfig integ = cfg.integration;
    double t_start = 0.0;
    if (profile) {
        t_start = profile->start();
        const double span = profile->end() - profile->start();
        const double steps = std::floor(span / integ.step_h + 1e-9);
        if (steps < 1.0) throw ValidationError("speed profile is shorter than one integration step");
        integ.horizon_t = steps * integ.step_h;
    }
    run.trajectory = simulate(params, StateVector::unlocked(params, cfg.frac_h0), integ, t_start);
    const SpeedProfile constant =
        SpeedProfile::constant(cfg.v, run.trajectory.times.front(), std::max(run.trajectory.times.back(), run.trajectory.times.front() + 1.0));
    run.series = throughput_series(cfg.headway, run.trajectory, profile ? *profile : constant, params.gamma);
    run.steady_c = steady_throughput(cfg.headway, run.equilibrium.x_star, cfg.v, params.gamma);
    run.l2 = l2_fluctuation(run.series.times, run.series.c_vphpl, run.steady_c);
    return run;
}

CompareReport compare_paired(const ScenarioConfig& cfg, const SpeedProfile* profile) {
    CompareReport r;
    r.paired = PairedScenario::from_config(cfg);
    r.paired.validate();
    r.leader_dependent = run_scenario(cfg, r.paired.leader_dependent(cfg.model), profile);
    r.baseline = run_scenario(cfg, r.paired.baseline(cfg.model), profile);
    r.steady_gap = r.leader_dependent.steady_c - r.baseline.steady_c;
    const auto& a = r.leader_dependent.series.c_vphpl;
    const auto& b = r.baseline.series.c_vphpl;
    for (std::size_t i = 0; i < a.size(); ++i) r.max_abs_gap = std::max(r.max_abs_gap, std::abs(a[i] - b[i]));
    return r;
}

std::vector<double> even_grid(double lo, double hi, int points) {
    if (points < 1) throw ValidationError("grid needs at least one point");
    if (points == 1) return {lo};
    std::vector<double> out;
    for (int i = 0; i < points; ++i) out.push_back(i + 1 == points ? hi : lo + (hi - lo) * i / (points - 1));
    return out;
}

std::vector<GammaRow> sweep_gamma(const ScenarioConfig& cfg, const std::vector<double>& gammas) {
    std::vector<GammaRow> rows(gammas.size());
    parallel_for(gammas.size(), cfg.threads, [&](std::size_t i) {
        ModelParams p = cfg.model;
        p.gamma = gammas[i];
        const auto run = run_scenario(cfg, p);
        rows[i] = {gammas[i], run.steady_c, run.l2};
    });
    return rows;
}

std::vector<InitialFractionRow> sweep_initial_fraction(const ScenarioConfig& cfg, const std::vector<double>& fractions) {
    std::vector<InitialFractionRow> rows(fractions.size());
    parallel_for(fractions.size(), cfg.threads, [&](std::size_t i) {
        ScenarioConfig c = cfg;
        c.frac_h0 = fractions[i];
        c.frac_a0 = 1.0 - fractions[i];
        c.integration.horizon_t = cfg.sweep_horizon;
        const auto run = run_scenario(c, c.model);
        const auto m = transient_metrics(run.trajectory, run.series, run.equilibrium.x_star, run.steady_c,
                                         cfg.convergence_threshold);
        rows[i] = {fractions[i], m.convergence_time, m.overshoot};
    });
    return rows;
}

namespace {

// Midpoints of n cells over the open range of rates keeping the partner rate,
// 2 * mean - rate, inside (0, 1].
std::vector<double> paired_axis(double mean, int points) {
    const double lo = std::max(0.0, 2.0 * mean - 1.0);
    const double hi = std::min(1.0, 2.0 * mean);
    std::vector<double> out;
    for (int i = 0; i < points; ++i) out.push_back(lo + (hi - lo) * (2 * i + 1) / (2.0 * points));
    return out;
}

} // namespace

std::vector<RateGridRow> sweep_rate_grid(const ScenarioConfig& cfg) {
    const auto paired = PairedScenario::from_config(cfg);
    paired.validate();
    const auto axis1 = paired_axis(paired.lambda_ha_bar, cfg.rate_grid_points);
    const auto axis2 = paired_axis(paired.lambda_ah_bar, cfg.rate_grid_points);
    std::vector<RateGridRow> rows;
    for (double g : cfg.rate_grid_gammas) {
        for (double l1 : axis1) {
            for (double l2 : axis2) {
                rows.push_back({g, l1, l2, 2.0 * paired.lambda_ha_bar - l1, 2.0 * paired.lambda_ah_bar - l2, 0.0, 0.0});
            }
        }
    }
    parallel_for(rows.size(), cfg.threads, [&](std::size_t i) {
        auto& row = rows[i];
        ModelParams p = cfg.model;
        p.gamma = row.gamma;
        p.lambda1 = row.lambda1;
        p.lambda2 = row.lambda2;
        p.lambda3 = row.lambda3;
        p.lambda4 = row.lambda4;
        const auto run = run_scenario(cfg, p);
        row.steady_c = run.steady_c;
        row.l2 = run.l2;
    });
    return rows;
}

std::vector<double> scan_axis(double step) {
    if (!(step > 0.0 && step <= 1.0)) throw ValidationError("scan step must lie in (0, 1]");
    std::vector<double> out;
    const double n = std::round(1.0 / step);
    if (std::abs(n * step - 1.0) < 1e-9) {
        for (int i = 1; i <= static_cast<int>(n); ++i) out.push_back(i / n);
    } else {
        for (int i = 1; i * step <= 1.0 + 1e-12; ++i) out.push_back(i * step);
    }
    return out;
}

ModelParams scan_params(const ScenarioConfig& cfg, double lambda_a, double lambda_b) {
    ModelParams p = cfg.model;
    p.k = cfg.scan_k;
    p.lambda1 = lambda_a;
    p.lambda2 = lambda_b;
    if (cfg.scan_tie) {
        p.lambda3 = lambda_a;
        p.lambda4 = lambda_b;
    }
    return p;
}

std::vector<ScanRow> stability_scan(const ScenarioConfig& cfg) {
    const auto axis = scan_axis(cfg.scan_step);
    std::vector<ScanRow> rows;
    for (double a : axis) {
        for (double b : axis) rows.push_back({a, b, LyapunovStatus::inconclusive, 0.0, 0.0, std::nullopt});
    }
    parallel_for(rows.size(), cfg.threads, [&](std::size_t i) {
        auto& row = rows[i];
        const auto params = scan_params(cfg, row.lambda_a, row.lambda_b);
        params.validate();
        const auto search = find_common_lyapunov(build_vertices(params), cfg.scan_eps, cfg.scan_max_iter);
        row.status = search.status;
        if (search.certificate) {
            row.margin = search.certificate->margin;
            row.p = search.certificate->p;
        } else if (search.status == LyapunovStatus::not_hurwitz) {
            row.margin = std::numeric_limits<double>::quiet_NaN();
        } else {
            row.margin = search.best_margin;
        }
        row.worst_abscissa = check_hurwitz_grid(params, cfg.scan_hurwitz_samples).worst_abscissa;
    });
    return rows;
}

namespace {

std::ofstream open_output(const fs::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ValidationError("cannot write '" + path.string() + "'");
    return os;
}

void prepare(const fs::path& out) {
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw ValidationError("cannot create output directory '" + out.string() + "': " + ec.message());
}

void write_json(const fs::path& path, const ordered_json& j) {
    auto os = open_output(path);
    os << j.dump(2) << '\n';
}

ordered_json params_json(const ModelParams& p) {
    ordered_json j;
    j["lambda1"] = p.lambda1;
    j["lambda2"] = p.lambda2;
    j["lambda3"] = p.lambda3;
    j["lambda4"] = p.lambda4;
    j["gamma"] = p.gamma;
    j["k"] = p.k;
    j["t_lock_h"] = p.t_lock_h;
    j["t_lock_a"] = p.t_lock_a;
    return j;
}

ordered_json run_json(const ScenarioRun& r) {
    ordered_json j;
    j["params"] = params_json(r.params);
    j["steady_c_vphpl"] = r.steady_c;
    j["l2_fluctuation_vphpl"] = r.l2;
    j["equilibrium"] = {{"sum_xh", r.equilibrium.x_star.sum_hdv()},
                        {"sum_xa", r.equilibrium.x_star.sum_av()},
                        {"residual", r.equilibrium.residual_inf}};
    j["terminal"] = {{"sum_xh", r.trajectory.sum_hdv.back()}, {"sum_xa", r.trajectory.sum_av.back()}};
    return j;
}

void write_gap_series(const fs::path& path, const CompareReport& r, bool with_speed) {
    auto os = open_output(path);
    std::vector<std::string> header{"time_s"};
    if (with_speed) header.emplace_back("v_mps");
    header.insert(header.end(), {"c_leader_dependent", "c_baseline", "gap_vphpl"});
    CsvWriter w(os, header);
    const auto& a = r.leader_dependent.series;
    const auto& b = r.baseline.series;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (with_speed) {
            w.row({a.times[i], a.speed[i], a.c_vphpl[i], b.c_vphpl[i], a.c_vphpl[i] - b.c_vphpl[i]});
        } else {
            w.row({a.times[i], a.c_vphpl[i], b.c_vphpl[i], a.c_vphpl[i] - b.c_vphpl[i]});
        }
    }
}

ordered_json paired_json(const PairedScenario& p) {
    return {{"lambda1", p.lambda1},           {"lambda2", p.lambda2},
            {"lambda3", p.lambda3},           {"lambda4", p.lambda4},
            {"lambda_ha_bar", p.lambda_ha_bar}, {"lambda_ah_bar", p.lambda_ah_bar}};
}

} // namespace

OutputFiles cmd_simulate(const ScenarioConfig& cfg, const fs::path& out) {
    cfg.validate();
    prepare(out);
    const auto run = run_scenario(cfg, cfg.model);
    OutputFiles files{out / "trajectory.csv", out / "states.csv", out / "throughput.csv", out / "phase.csv",
                      out / "summary.json"};
    {
        auto os = open_output(files[0]);
        write_trajectory_csv(os, run.trajectory);
    }
    {
        auto os = open_output(files[1]);
        write_state_csv(os, run.trajectory);
    }
    {
        auto os = open_output(files[2]);
        write_throughput_csv(os, run.series);
    }
    {
        auto os = open_output(files[3]);
        CsvWriter w(os, {"time_s", "sum_xh", "sum_xa"});
        for (std::size_t i = 0; i < run.trajectory.size(); ++i) {
            w.row({run.trajectory.times[i], run.trajectory.sum_hdv[i], run.trajectory.sum_av[i]});
        }
    }
    ordered_json j;
    j["label"] = cfg.label;
    j["v_mps"] = cfg.v;
    j["samples"] = run.trajectory.size();
    j["run"] = run_json(run);
    write_json(files[4], j);
    return files;
}

OutputFiles cmd_compare(const ScenarioConfig& cfg, const fs::path& out) {
    cfg.validate();
    prepare(out);
    const auto r = compare_paired(cfg);
    OutputFiles files{out / "compare.csv", out / "compare.json"};
    write_gap_series(files[0], r, false);
    ordered_json j;
    j["label"] = cfg.label;
    j["paired"] = paired_json(r.paired);
    j["v_mps"] = cfg.v;
    j["steady_gap_vphpl"] = r.steady_gap;
    j["max_abs_gap_vphpl"] = r.max_abs_gap;
    j["leader_dependent"] = run_json(r.leader_dependent);
    j["baseline"] = run_json(r.baseline);
    write_json(files[1], j);
    return files;
}

OutputFiles cmd_sweep(const ScenarioConfig& cfg, const std::string& axis, const fs::path& out) {
    cfg.validate();
    prepare(out);
    if (axis == "gamma") {
        const auto rows = sweep_gamma(cfg, even_grid(0.0, 1.0, cfg.sweep_points));
        const fs::path path = out / "sweep_gamma.csv";
        auto os = open_output(path);
        CsvWriter w(os, {"gamma", "steady_c_vphpl", "l2_fluctuation_vphpl"});
        for (const auto& r : rows) w.row({r.gamma, r.steady_c, r.l2});
        return {path};
    }
    if (axis == "initial_fraction") {
        const auto rows = sweep_initial_fraction(cfg, even_grid(0.0, 1.0, cfg.sweep_points));
        const fs::path path = out / "sweep_initial_fraction.csv";
        auto os = open_output(path);
        CsvWriter w(os, {"frac_h0", "convergence_time_s", "overshoot_vphpl"});
        for (const auto& r : rows) w.row({r.frac_h0, r.convergence_time, r.overshoot});
        return {path};
    }
    if (axis == "rate_grid") {
        const auto rows = sweep_rate_grid(cfg);
        const fs::path path = out / "sweep_rate_grid.csv";
        auto os = open_output(path);
        CsvWriter w(os, {"gamma", "lambda1", "lambda2", "lambda3", "lambda4", "steady_c_vphpl", "l2_fluctuation_vphpl"});
        for (const auto& r : rows) w.row({r.gamma, r.lambda1, r.lambda2, r.lambda3, r.lambda4, r.steady_c, r.l2});
        return {path};
    }
    throw ValidationError("unknown sweep axis '" + axis + "' (gamma, initial_fraction, rate_grid)");
}

OutputFiles cmd_ngsim(const ScenarioConfig& cfg, const std::string& profile_path, const fs::path& out) {
    cfg.validate();
    const std::string path = profile_path.empty() ? cfg.speed_profile : profile_path;
    if (path.empty()) throw ValidationError("ngsim needs a speed profile (--profile or speed_profile)");
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open speed profile '" + path + "'");
    const auto profile = read_speed_profile(in, path);
    prepare(out);
    const auto r = compare_paired(cfg, &profile);
    OutputFiles files{out / "ngsim.csv", out / "ngsim.json"};
    write_gap_series(files[0], r, true);
    const auto& a = r.leader_dependent.series.c_vphpl;
    const auto& b = r.baseline.series.c_vphpl;
    double mean_gap = 0.0;
    double min_gap = std::numeric_limits<double>::infinity();
    double max_gap = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double g = a[i] - b[i];
        mean_gap += g;
        min_gap = std::min(min_gap, g);
        max_gap = std::max(max_gap, g);
    }
    mean_gap /= static_cast<double>(a.size());
    ordered_json j;
    j["label"] = cfg.label;
    j["profile"] = {{"start_s", profile.start()}, {"end_s", profile.end()}, {"samples", profile.times().size()}};
    j["paired"] = paired_json(r.paired);
    j["mean_gap_vphpl"] = mean_gap;
    j["min_gap_vphpl"] = min_gap;
    j["max_gap_vphpl"] = max_gap;
    write_json(files[1], j);
    return files;
}

OutputFiles cmd_stability_scan(const ScenarioConfig& cfg, const fs::path& out) {
    cfg.validate();
    prepare(out);
    const auto rows = stability_scan(cfg);
    OutputFiles files{out / "stability_scan.csv", out / "stability_scan.json"};
    std::size_t counts[3] = {0, 0, 0};
    {
        auto os = open_output(files[0]);
        CsvWriter w(os, {"lambda_a", "lambda_b", "feasible", "margin", "worst_abscissa"});
        for (const auto& r : rows) {
            ++counts[static_cast<int>(r.status)];
            w.text_row({format_double(r.lambda_a), format_double(r.lambda_b),
                        r.status == LyapunovStatus::certified ? "1" : "0", format_double(r.margin),
                        format_double(r.worst_abscissa)});
        }
    }
    ordered_json j;
    j["k"] = cfg.scan_k;
    j["step"] = cfg.scan_step;
    j["tie"] = cfg.scan_tie;
    if (!cfg.scan_tie) j["fixed"] = {{"lambda3", cfg.model.lambda3}, {"lambda4", cfg.model.lambda4}};
    j["gamma"] = cfg.model.gamma;
    j["eps"] = cfg.scan_eps;
    j["cells"] = rows.size();
    j["certified"] = counts[static_cast<int>(LyapunovStatus::certified)];
    j["not_hurwitz"] = counts[static_cast<int>(LyapunovStatus::not_hurwitz)];
    j["inconclusive"] = counts[static_cast<int>(LyapunovStatus::inconclusive)];
    write_json(files[1], j);
    return files;
}

OutputFiles cmd_erlang_check(const ScenarioConfig& cfg, const fs::path& out) {
    cfg.validate();
    const double t_lock = cfg.model.t_lock_h > 0.0 ? cfg.model.t_lock_h : cfg.model.t_lock_a;
    if (!(t_lock > 0.0)) throw ValidationError("erlang-check needs a positive lockout duration");
    prepare(out);
    OutputFiles files{out / "erlang_check.csv", out / "erlang_check.json"};
    {
        auto os = open_output(files[0]);
        CsvWriter w(os, {"k", "w1_distance"});
        for (int k = 1; k <= cfg.erlang_k_max; ++k) {
            w.text_row({std::to_string(k), format_double(wasserstein_to_dirac(design_rate(k, t_lock)))});
        }
    }
    const auto sel = choose_k(t_lock, cfg.erlang_threshold);
    ordered_json j;
    j["t_lock_s"] = t_lock;
    j["threshold_s"] = cfg.erlang_threshold;
    j["chosen_k"] = sel.k;
    j["w1_at_chosen_k"] = sel.w1;
    j["w1_at_config_k"] = wasserstein_to_dirac(design_rate(cfg.model.k, t_lock));
    write_json(files[1], j);
    return files;
}

OutputFiles cmd_oracle_validate(const ScenarioConfig& cfg, const fs::path& out) {
    cfg.validate();
    OracleConfig oc;
    oc.n = cfg.oracle_n;
    oc.horizon = cfg.oracle_horizon;
    oc.dt = cfg.oracle_dt;
    oc.seed = cfg.seed;
    oc.mode = cfg.oracle_mode;
    oc.threads = cfg.threads;
    oc.validate(cfg.model);
    prepare(out);
    const auto x0 = cfg.initial_state();
    const auto series = run_oracle(cfg.model, x0, oc);
    IntegrationConfig integ = cfg.integration;
    integ.step_h = oc.dt;
    integ.horizon_t = oc.horizon;
    integ.record_stride = 1;
    const auto traj = simulate(cfg.model, x0, integ);
    const double dev = max_deviation_from_ode(series, traj);
    const double bound = 4.0 / std::sqrt(static_cast<double>(oc.n)) + 0.005;

    OutputFiles files{out / "oracle.csv"};
    {
        auto os = open_output(files[0]);
        write_oracle_csv(os, series);
    }
    ordered_json j;
    j["params"] = params_json(cfg.model);
    j["n"] = oc.n;
    j["dt"] = oc.dt;
    j["horizon"] = oc.horizon;
    j["seed"] = oc.seed;
    j["mode"] = std::string(to_string(oc.mode));
    j["max_deviation_from_ode"] = dev;
    j["bound"] = bound;
    j["within_bound"] = dev <= bound;
    if (cfg.oracle_compare_modes) {
        OracleConfig other = oc;
        other.mode = oc.mode == LockoutMode::erlang_stage ? LockoutMode::deterministic_lockout : LockoutMode::erlang_stage;
        const auto alt = run_oracle(cfg.model, x0, other);
        double gap = 0.0;
        for (std::size_t i = 0; i < series.size(); ++i) gap = std::max(gap, std::abs(series.frac_h[i] - alt.frac_h[i]));
        files.push_back(out / ("oracle_" + std::string(to_string(other.mode)) + ".csv"));
        auto os = open_output(files.back());
        write_oracle_csv(os, alt);
        j["mode_gap"] = gap;
    }
    files.push_back(out / "oracle_validate.json");
    write_json(files.back(), j);
    return files;
}

OutputFiles cmd_equilibrium(const ScenarioConfig& cfg, const fs::path& out) {
    cfg.validate();
    prepare(out);
    EquilibriumOptions opts;
    opts.tol = cfg.equilibrium_tol;
    opts.max_iter = cfg.equilibrium_max_iter;
    const auto result = solve_equilibrium(cfg.model, StateVector::uniform(cfg.model), opts);
    OutputFiles files{out / "equilibrium.json"};
    {
        auto os = open_output(files[0]);
        write_equilibrium_json(os, cfg.model, result);
    }
    if (cfg.multistart_starts > 0) {
        const auto all = multistart_equilibria(cfg.model, cfg.multistart_starts, cfg.seed, cfg.equilibrium_tol);
        ordered_json arr = ordered_json::array();
        for (const auto& r : all) {
            arr.push_back({{"sum_xh", r.x_star.sum_hdv()},
                           {"sum_xa", r.x_star.sum_av()},
                           {"residual", r.residual_inf},
                           {"x_star", {{"hdv", std::vector<double>(r.x_star.hdv().begin(), r.x_star.hdv().end())},
                                       {"av", std::vector<double>(r.x_star.av().begin(), r.x_star.av().end())}}}});
        }
        ordered_json j;
        j["starts"] = cfg.multistart_starts;
        j["distinct"] = all.size();
        j["equilibria"] = arr;
        files.push_back(out / "equilibria.json");
        write_json(files.back(), j);
    }
    const double c = steady_throughput(cfg.headway, result.x_star, cfg.v, cfg.model.gamma);
    files.push_back(out / "steady_throughput.json");
    write_json(files.back(), {{"v_mps", cfg.v}, {"gamma", cfg.model.gamma}, {"steady_c_vphpl", c}});
    return files;
}

} // namespace pavsim
