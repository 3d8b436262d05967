// Acceptance checks; one PASS/FAIL line per criterion.

#include "pavsim/config.hpp"
#include "pavsim/equilibrium.hpp"
#include "pavsim/erlang.hpp"
#include "pavsim/experiments.hpp"
#include "pavsim/integrator.hpp"
#include "pavsim/oracle.hpp"
#include "pavsim/stability.hpp"
#include "pavsim/throughput.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

using namespace pavsim;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* pattern, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, pattern, a);
    return buf;
}

std::string num(double v) { return fmt("%.6g", v); }

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ModelParams leader_independent(double ha, double ah) {
    ModelParams p;
    p.lambda1 = p.lambda3 = ha;
    p.lambda2 = p.lambda4 = ah;
    return p;
}

Outcome conservation() {
    const auto t0 = std::chrono::steady_clock::now();
    ModelParams p;
    IntegrationConfig cfg;
    cfg.renormalize = false;
    const auto traj = simulate(p, StateVector::unlocked(p, 0.5), cfg);
    const double runtime = seconds_since(t0);
    double worst = 0.0;
    double lowest = 1.0;
    for (const auto& s : traj.states) {
        worst = std::max(worst, std::abs(s.sum() - 1.0));
        for (double v : s.flat()) lowest = std::min(lowest, v);
    }
    return {worst <= 1e-9 && lowest >= -1e-9 && runtime < 1.0,
            "max|sum-1|=" + num(worst) + " min=" + num(lowest) + " runtime=" + num(runtime) + "s"};
}

Outcome closed_form() {
    const auto p = leader_independent(0.1, 0.5);
    const auto solved = solve_equilibrium(p, 1e-12, 500000).x_star;
    IntegrationConfig cfg;
    cfg.horizon_t = 300.0;
    cfg.record_stride = 100000;
    const auto rk = simulate(p, StateVector::unlocked(p, 0.5), cfg).terminal();
    double err = 0.0;
    for (const auto* x : {&solved, &rk}) {
        err = std::max(err, std::abs(x->hdv()[0] - 10.0 / 18.0));
        err = std::max(err, std::abs(x->av()[0] - 2.0 / 18.0));
    }
    return {err <= 1e-8, "max error vs 10/18, 2/18 = " + num(err)};
}

Outcome erlang_selection() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto sel = choose_k(3.0, 0.2);
    const double w200 = wasserstein_to_dirac(design_rate(200, 3.0));
    const double runtime = seconds_since(t0);
    return {sel.k <= 200 && w200 >= 0.15 && w200 <= 0.19 && runtime < 5.0,
            "crossing k=" + std::to_string(sel.k) + " W1(200)=" + num(w200) + " runtime=" + num(runtime) + "s"};
}

Outcome phase_type() {
    const auto t0 = std::chrono::steady_clock::now();
    OracleConfig cfg;
    cfg.record_every = 10;
    ModelParams p200;
    ModelParams p1;
    p1.k = 1;
    const double gap200 = compare_modes(p200, StateVector::unlocked(p200, 0.5), cfg).max_gap;
    const double gap1 = compare_modes(p1, StateVector::unlocked(p1, 0.5), cfg).max_gap;
    const double runtime = seconds_since(t0);
    return {gap200 <= 0.02 && gap200 < gap1 && runtime < 60.0,
            "gap k=200 " + num(gap200) + ", k=1 " + num(gap1) + " runtime=" + num(runtime) + "s"};
}

Outcome ode_agreement() {
    OracleConfig cfg;
    cfg.record_every = 10;
    const double bound = 4.0 / std::sqrt(static_cast<double>(cfg.n)) + 0.005;
    bool ok = true;
    std::string detail;
    for (const char* name : {"down-cascade", "up-cascade"}) {
        const auto sc = preset_config(name);
        const auto x0 = sc.initial_state();
        const double dev = max_deviation_from_ode(run_oracle(sc.model, x0, cfg), simulate(sc.model, x0, sc.integration));
        ok = ok && dev <= bound;
        detail += std::string(name) + " " + num(dev) + " ";
    }
    return {ok, detail + "bound " + num(bound)};
}

Outcome stability() {
    ModelParams p;
    p.k = 5;
    const auto v = build_vertices(p);
    const auto r = find_common_lyapunov(v, 1e-6, 5000);
    bool ok = r.status == LyapunovStatus::certified;
    std::string detail = "defaults: " + std::string(to_string(r.status));
    if (ok) {
        const auto chk = verify_certificate(v, r.certificate->p);
        ok = chk.max_form_eig <= -5e-7 && chk.p_min_eig >= 1e-6;
        detail += " form=" + num(chk.max_form_eig) + " Pmin=" + num(chk.p_min_eig);
    }

    const auto t0 = std::chrono::steady_clock::now();
    ScenarioConfig cfg;
    const auto rows = stability_scan(cfg);
    int certified = 0;
    int unique = 0;
    for (const auto& row : rows) {
        if (row.status != LyapunovStatus::certified) continue;
        ++certified;
        const auto eq = multistart_equilibria(scan_params(cfg, row.lambda_a, row.lambda_b), 8, 1);
        if (eq.size() == 1) ++unique;
    }
    const double runtime = seconds_since(t0);
    ok = ok && rows.size() == 400 && unique == certified && runtime < 300.0;
    detail += "; scan " + std::to_string(certified) + "/" + std::to_string(rows.size()) + " certified, " +
              std::to_string(unique) + " single-equilibrium, runtime=" + num(runtime) + "s";
    return {ok, detail};
}

Outcome orderings() {
    const auto down = compare_paired(preset_config("down-cascade"));
    const auto up = compare_paired(preset_config("up-cascade"));
    const auto asym = compare_paired(preset_config("down-asymmetric"));
    const bool a = down.steady_gap < 0.0;
    const bool b = asym.leader_dependent.l2 > asym.baseline.l2;
    const bool c = std::abs(up.steady_gap) < std::abs(down.steady_gap);
    auto mark = [](bool x) { return x ? "pass" : "fail"; };
    return {a && b && c, std::string("(a) ") + mark(a) + " gap=" + num(down.steady_gap) + "; (b) " + mark(b) +
                             " L2 " + num(asym.leader_dependent.l2) + " vs " + num(asym.baseline.l2) + "; (c) " +
                             mark(c) + " up gap=" + num(up.steady_gap)};
}

Outcome sensitivity() {
    const auto cfg = preset_config("down-cascade");
    const auto rows = sweep_gamma(cfg, {0.2, 0.5, 0.8});
    const bool decreasing = rows[0].l2 > rows[1].l2 && rows[1].l2 > rows[2].l2;

    const auto eq = solve_equilibrium(cfg.model, 1e-13, 500000);
    IntegrationConfig ic = cfg.integration;
    ic.horizon_t = cfg.sweep_horizon;
    const auto traj = simulate(cfg.model, eq.x_star, ic);
    const auto series =
        throughput_series(cfg.headway, traj, SpeedProfile::constant(cfg.v, 0.0, ic.horizon_t), cfg.model.gamma);
    const double c_inf = steady_throughput(cfg.headway, eq.x_star, cfg.v, cfg.model.gamma);
    const auto m = transient_metrics(traj, series, eq.x_star, c_inf, cfg.convergence_threshold);
    const bool still = m.convergence_time == 0.0 && m.overshoot <= 1e-6;
    return {decreasing && still, "L2 " + num(rows[0].l2) + " > " + num(rows[1].l2) + " > " + num(rows[2].l2) +
                                     "; from x*: t_conv=" + num(m.convergence_time) + " overshoot=" + num(m.overshoot)};
}

Outcome anchors() {
    const HeadwayParams hp;
    ModelParams p;
    std::vector<double> h(p.hdv_size(), 0.0);
    std::vector<double> a(p.av_size(), 0.0);
    a[0] = 1.0;
    const double av = throughput(hp, StateVector(h, a), 10.0, 0.0);
    const double hdv = throughput(hp, StateVector::unlocked(p, 1.0), 10.0, 1.0);
    const double e1 = std::abs(av / 2400.0 - 1.0);
    const double e2 = std::abs(hdv / (3600.0 / 2.2) - 1.0);
    return {e1 <= 1e-9 && e2 <= 1e-9, "AV " + fmt("%.9f", av) + " HDV " + fmt("%.9f", hdv)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

Outcome determinism(const fs::path& workdir) {
#ifndef PAVSIM_CLI_PATH
    (void)workdir;
    return {false, "command line binary not built"};
#else
    fs::create_directories(workdir);
    const fs::path profile = workdir / "profile.csv";
    {
        std::ofstream os(profile);
        os << "time_s,speed_mps\n0,12\n10,6\n20,9\n30,12\n";
    }
    const fs::path config = workdir / "light.cfg";
    {
        std::ofstream os(config);
        os << "oracle_n = 20000\noracle_compare_modes = true\nscan_step = 0.25\nrate_grid_points = 3\n"
              "multistart_starts = 4\nspeed_profile = " << profile.string() << "\n";
    }
    const std::vector<std::string> commands = {
        "simulate",         "compare",           "sweep --axis gamma", "sweep --axis initial_fraction",
        "sweep --axis rate_grid", "ngsim",       "stability-scan",     "erlang-check",
        "oracle-validate",  "equilibrium"};
    int identical = 0;
    std::string failed;
    for (std::size_t i = 0; i < commands.size(); ++i) {
        std::vector<fs::path> dirs;
        bool ok = true;
        for (int rep = 0; rep < 2; ++rep) {
            const fs::path dir = workdir / ("run" + std::to_string(i) + "_" + std::to_string(rep));
            fs::remove_all(dir);
            const std::string cmd = std::string(PAVSIM_CLI_PATH) + " " + commands[i] + " --preset down-cascade --seed 7 --config " +
                                    config.string() + " --out " + dir.string() + " > /dev/null 2>&1";
            const int status = std::system(cmd.c_str());
            ok = ok && WIFEXITED(status) && WEXITSTATUS(status) == 0;
            dirs.push_back(dir);
        }
        std::set<std::string> names;
        if (ok) {
            for (const auto& e : fs::directory_iterator(dirs[0])) names.insert(e.path().filename().string());
            std::set<std::string> other;
            for (const auto& e : fs::directory_iterator(dirs[1])) other.insert(e.path().filename().string());
            ok = !names.empty() && names == other;
        }
        for (const auto& n : names) ok = ok && slurp(dirs[0] / n) == slurp(dirs[1] / n);
        if (ok) ++identical;
        else failed += " [" + commands[i] + "]";
    }
    return {identical == static_cast<int>(commands.size()),
            std::to_string(identical) + "/" + std::to_string(commands.size()) + " commands byte-identical" + failed};
#endif
}

} // namespace

int main(int argc, char** argv) {
    std::set<int> known_red;
    fs::path workdir = fs::temp_directory_path() / "pavsim_acceptance";
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--known-red" && i + 1 < argc) {
            known_red.insert(std::atoi(argv[++i]));
        } else if (arg == "--workdir" && i + 1 < argc) {
            workdir = argv[++i];
        } else {
            std::cerr << "usage: acceptance [--known-red N]... [--workdir DIR]\n";
            return 1;
        }
    }

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"conservation and positivity", conservation},
        {"closed-form equilibrium", closed_form},
        {"Erlang-k selection", erlang_selection},
        {"phase-type validity", phase_type},
        {"ODE and particle agreement", ode_agreement},
        {"stability certificate and scan", stability},
        {"qualitative orderings", orderings},
        {"gamma sensitivity and still start", sensitivity},
        {"pure-mode throughput anchors", anchors},
        {"CLI determinism", [&] { return determinism(workdir); }},
    };

    int unexpected = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double took = seconds_since(t0);
        std::string tag = o.pass ? "PASS" : "FAIL";
        if (!o.pass && known_red.count(id)) tag += " (known)";
        else if (!o.pass) ++unexpected;
        std::cout << tag << " " << id << " " << criteria[i].first << ": " << o.detail << " [" << fmt("%.2f", took)
                  << " s]" << std::endl;
    }
    return unexpected == 0 ? 0 : 1;
}
