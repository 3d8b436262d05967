#include "pavsim/config.hpp"
#include "pavsim/equilibrium.hpp"
#include "pavsim/erlang.hpp"
#include "pavsim/errors.hpp"
#include "pavsim/integrator.hpp"
#include "pavsim/model.hpp"
#include "pavsim/oracle.hpp"
#include "pavsim/stability.hpp"
#include "pavsim/throughput.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace pavsim;

namespace {

// States cross the boundary as (hdv, av) lists.
using StatePair = std::pair<std::vector<double>, std::vector<double>>;

StateVector to_state(const StatePair& s) { return StateVector(s.first, s.second); }

StatePair from_state(const StateVector& x) {
    return {std::vector<double>(x.hdv().begin(), x.hdv().end()), std::vector<double>(x.av().begin(), x.av().end())};
}

StateVector initial(const ModelParams& p, const std::optional<StatePair>& x0, double frac_h0) {
    return x0 ? to_state(*x0) : StateVector::unlocked(p, frac_h0);
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "pavsim core bindings";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    py::class_<ModelParams>(m, "ModelParams")
        .def(py::init([](double l1, double l2, double l3, double l4, double gamma, int k, double th, double ta) {
                 ModelParams p{l1, l2, l3, l4, gamma, k, th, ta};
                 p.validate();
                 return p;
             }),
             py::arg("lambda1") = 0.1, py::arg("lambda2") = 0.15, py::arg("lambda3") = 0.9, py::arg("lambda4") = 0.05,
             py::arg("gamma") = 0.2, py::arg("k") = 200, py::arg("t_lock_h") = 3.0, py::arg("t_lock_a") = 3.0)
        .def_readwrite("lambda1", &ModelParams::lambda1)
        .def_readwrite("lambda2", &ModelParams::lambda2)
        .def_readwrite("lambda3", &ModelParams::lambda3)
        .def_readwrite("lambda4", &ModelParams::lambda4)
        .def_readwrite("gamma", &ModelParams::gamma)
        .def_readwrite("k", &ModelParams::k)
        .def_readwrite("t_lock_h", &ModelParams::t_lock_h)
        .def_readwrite("t_lock_a", &ModelParams::t_lock_a)
        .def_property_readonly("mu_h", &ModelParams::mu_h)
        .def_property_readonly("mu_a", &ModelParams::mu_a)
        .def_property_readonly("dimension", &ModelParams::dimension)
        .def("validate", &ModelParams::validate)
        .def("__repr__", [](const ModelParams& p) {
            return "ModelParams(lambda1=" + std::to_string(p.lambda1) + ", lambda2=" + std::to_string(p.lambda2) +
                   ", lambda3=" + std::to_string(p.lambda3) + ", lambda4=" + std::to_string(p.lambda4) +
                   ", gamma=" + std::to_string(p.gamma) + ", k=" + std::to_string(p.k) + ")";
        });

    py::class_<HeadwayParams>(m, "HeadwayParams")
        .def(py::init<>())
        .def_readwrite("tau_a0", &HeadwayParams::tau_a0)
        .def_readwrite("tau_h0", &HeadwayParams::tau_h0)
        .def_readwrite("l_a0", &HeadwayParams::l_a0)
        .def_readwrite("l_h0", &HeadwayParams::l_h0)
        .def_readwrite("sigmoid_steepness", &HeadwayParams::sigmoid_steepness)
        .def_readwrite("sigmoid_midpoint", &HeadwayParams::sigmoid_midpoint);

    m.def("preset_names", &preset_names);
    m.def("preset", [](const std::string& name) { return preset_config(name).model; }, py::arg("name"));

    m.def(
        "leader_probabilities",
        [](const ModelParams& p, const StatePair& x) {
            const auto q = leader_probabilities(p, to_state(x));
            return std::make_pair(q.q_hdv, q.q_av);
        },
        py::arg("params"), py::arg("x"));
    m.def(
        "effective_rates",
        [](const ModelParams& p, double q_hdv) {
            const auto r = effective_rates(p, LeaderProbabilities{q_hdv, 1.0 - q_hdv});
            return std::make_pair(r.h_to_a, r.a_to_h);
        },
        py::arg("params"), py::arg("q_hdv"));
    m.def(
        "drift", [](const ModelParams& p, const StatePair& x) { return from_state(drift(p, to_state(x))); }, py::arg("params"),
        py::arg("x"));

    m.def(
        "simulate",
        [](const ModelParams& p, double horizon, double step, std::optional<StatePair> x0, double frac_h0,
           int record_stride, bool renormalize) {
            IntegrationConfig cfg{step, horizon, renormalize, record_stride};
            const auto traj = simulate(p, initial(p, x0, frac_h0), cfg);
            py::dict out;
            out["times"] = traj.times;
            out["sum_xh"] = traj.sum_hdv;
            out["sum_xa"] = traj.sum_av;
            out["q_hdv"] = traj.q_hdv;
            out["terminal"] = from_state(traj.terminal());
            return out;
        },
        py::arg("params"), py::arg("horizon") = 30.0, py::arg("step") = 0.01, py::arg("x0") = py::none(),
        py::arg("frac_h0") = 0.5, py::arg("record_stride") = 1, py::arg("renormalize") = true);

    m.def(
        "solve_equilibrium",
        [](const ModelParams& p, double tol, int max_iter) {
            const auto r = solve_equilibrium(p, tol, max_iter);
            py::dict out;
            out["x_star"] = from_state(r.x_star);
            out["sum_xh"] = r.x_star.sum_hdv();
            out["sum_xa"] = r.x_star.sum_av();
            out["residual"] = r.residual_inf;
            out["iterations"] = r.iterations;
            out["method"] = std::string(to_string(r.method));
            return out;
        },
        py::arg("params"), py::arg("tol") = 1e-10, py::arg("max_iter") = 500000);
    m.def(
        "leader_independent_equilibrium",
        [](const ModelParams& p) { return from_state(leader_independent_equilibrium(p)); }, py::arg("params"));

    m.def(
        "find_common_lyapunov",
        [](const ModelParams& p, double eps, int max_iter) {
            const auto s = find_common_lyapunov(build_vertices(p), eps, max_iter);
            py::dict out;
            out["status"] = std::string(to_string(s.status));
            out["iterations"] = s.iterations;
            if (s.certificate) {
                out["p"] = s.certificate->p;
                out["margin"] = s.certificate->margin;
                out["p_min_eig"] = s.certificate->p_min_eig;
            } else {
                out["p"] = py::none();
                out["margin"] = s.best_margin;
            }
            return out;
        },
        py::arg("params"), py::arg("eps") = 1e-6, py::arg("max_iter") = 5000);

    m.def("erlang_cdf", [](int k, double t_lock, double t) { return erlang_cdf(design_rate(k, t_lock), t); },
          py::arg("k"), py::arg("t_lock"), py::arg("t"));
    m.def("wasserstein_to_dirac", [](int k, double t_lock) { return wasserstein_to_dirac(design_rate(k, t_lock)); },
          py::arg("k"), py::arg("t_lock"));
    m.def("choose_k", [](double t_lock, double threshold) { return choose_k(t_lock, threshold).k; }, py::arg("t_lock"),
          py::arg("threshold"));

    m.def(
        "throughput",
        [](const StatePair& x, double v, double gamma, const HeadwayParams& hp) {
            return throughput(hp, to_state(x), v, gamma);
        },
        py::arg("x"), py::arg("v"), py::arg("gamma"), py::arg("headway") = HeadwayParams{});

    m.def(
        "run_oracle",
        [](const ModelParams& p, std::size_t n, double horizon, double dt, std::uint64_t seed, const std::string& mode,
           std::optional<StatePair> x0, double frac_h0, int threads) {
            OracleConfig cfg;
            cfg.n = n;
            cfg.horizon = horizon;
            cfg.dt = dt;
            cfg.seed = seed;
            cfg.mode = parse_lockout_mode(mode);
            cfg.threads = threads;
            const auto s = run_oracle(p, initial(p, x0, frac_h0), cfg);
            py::dict out;
            out["times"] = s.times;
            out["frac_h"] = s.frac_h;
            out["frac_a"] = s.frac_a;
            out["se_h"] = s.se_h;
            out["se_a"] = s.se_a;
            return out;
        },
        py::arg("params"), py::arg("n") = 10000, py::arg("horizon") = 30.0, py::arg("dt") = 0.01, py::arg("seed") = 1,
        py::arg("mode") = "erlang-stage", py::arg("x0") = py::none(), py::arg("frac_h0") = 0.5, py::arg("threads") = 1);
}
