#include "pavsim/stability.hpp"

#include "pavsim/equilibrium.hpp"
#include "pavsim/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

namespace pavsim {

std::string_view to_string(LyapunovStatus status) {
    switch (status) {
    case LyapunovStatus::certified: return "certified";
    case LyapunovStatus::not_hurwitz: return "not-hurwitz";
    case LyapunovStatus::inconclusive: return "inconclusive";
    }
    return "unknown";
}

PolytopeVertices build_vertices(const ModelParams& params) {
    const auto g = decompose_generator(params);
    return {reduce_generator(g.a0 + g.a2).a_prime, reduce_generator(g.a0 + g.a1).a_prime};
}

double spectral_abscissa(const Eigen::MatrixXd& m) {
    if (m.rows() == 0) return -std::numeric_limits<double>::infinity();
    Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
    if (es.info() != Eigen::Success) throw NumericalError("eigenvalue computation failed");
    return es.eigenvalues().real().maxCoeff();
}

namespace {

Eigen::MatrixXd lyapunov_form(const Eigen::MatrixXd& m, const Eigen::MatrixXd& p) {
    return m.transpose() * p + p * m;
}

double max_sym_eig(const Eigen::MatrixXd& s) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (s + s.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

double min_sym_eig(const Eigen::MatrixXd& s) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (s + s.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

// Trace-free symmetric basis: P = I + sum_a z_a B_a keeps trace(P) = n.
// Off-diagonal element (i, j): E_ij + E_ji. Diagonal element i < n-1:
// E_ii - E_{n-1,n-1}.
struct BasisElement {
    Eigen::Index i;
    Eigen::Index j;
    bool diagonal;
};

std::vector<BasisElement> trace_free_basis(Eigen::Index n) {
    std::vector<BasisElement> basis;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) basis.push_back({i, j, false});
    }
    for (Eigen::Index i = 0; i + 1 < n; ++i) basis.push_back({i, n - 1, true});
    return basis;
}

// Writes X * B_a into out (zeroed by the caller).
void right_multiply_basis(const Eigen::MatrixXd& x, const BasisElement& b, Eigen::MatrixXd& out) {
    if (b.diagonal) {
        out.col(b.i) += x.col(b.i);
        out.col(b.j) -= x.col(b.j);
    } else {
        out.col(b.j) += x.col(b.i);
        out.col(b.i) += x.col(b.j);
    }
}

// Writes X * B_a * M into out.
void sandwich_basis(const Eigen::MatrixXd& x, const BasisElement& b, const Eigen::MatrixXd& m, Eigen::MatrixXd& out) {
    if (b.diagonal) {
        out.noalias() += x.col(b.i) * m.row(b.i);
        out.noalias() -= x.col(b.j) * m.row(b.j);
    } else {
        out.noalias() += x.col(b.i) * m.row(b.j);
        out.noalias() += x.col(b.j) * m.row(b.i);
    }
}

class BarrierProblem {
public:
    BarrierProblem(const PolytopeVertices& v)
        : m_{v.m0, v.m1}, n_(v.dimension()), basis_(trace_free_basis(n_)),
          vars_(static_cast<Eigen::Index>(basis_.size()) + 1) {}

    Eigen::Index vars() const { return vars_; }

    Eigen::MatrixXd p_of(const Eigen::VectorXd& w) const {
        Eigen::MatrixXd p = Eigen::MatrixXd::Identity(n_, n_);
        for (std::size_t a = 0; a < basis_.size(); ++a) {
            const auto& b = basis_[a];
            const double z = w(static_cast<Eigen::Index>(a));
            if (b.diagonal) {
                p(b.i, b.i) += z;
                p(b.j, b.j) -= z;
            } else {
                p(b.i, b.j) += z;
                p(b.j, b.i) += z;
            }
        }
        return p;
    }

    double margin_var(const Eigen::VectorXd& w) const { return w(vars_ - 1); }

    // The three barrier blocks at w: -(L0 + tI), -(L1 + tI), P - tI.
    std::array<Eigen::MatrixXd, 3> blocks(const Eigen::VectorXd& w) const {
        const Eigen::MatrixXd p = p_of(w);
        const double t = margin_var(w);
        const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n_, n_);
        return {-lyapunov_form(m_[0], p) - t * eye, -lyapunov_form(m_[1], p) - t * eye, p - t * eye};
    }

    // Barrier objective; +inf outside the feasible interior.
    double objective(const Eigen::VectorXd& w, double weight) const {
        double value = -weight * margin_var(w);
        for (const auto& f : blocks(w)) {
            Eigen::LLT<Eigen::MatrixXd> llt(f);
            if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
            const Eigen::VectorXd diag = llt.matrixLLT().diagonal();
            if ((diag.array() <= 0.0).any()) return std::numeric_limits<double>::infinity();
            value -= 2.0 * diag.array().log().sum();
        }
        return value;
    }

    // Gradient and Hessian of the barrier objective.
    void derivatives(const Eigen::VectorXd& w, double weight, Eigen::VectorXd& grad, Eigen::MatrixXd& hess) const {
        grad = Eigen::VectorXd::Zero(vars_);
        hess = Eigen::MatrixXd::Zero(vars_, vars_);
        grad(vars_ - 1) = -weight;
        const auto fs = blocks(w);
        const Eigen::Index nn = n_ * n_;
        Eigen::MatrixXd d(nn, vars_);  // vec(F^-1 dF/dw_a)
        Eigen::MatrixXd dt(nn, vars_); // vec of the transposes
        Eigen::MatrixXd tmp(n_, n_);
        for (int j = 0; j < 3; ++j) {
            const Eigen::MatrixXd finv = fs[static_cast<std::size_t>(j)].llt().solve(Eigen::MatrixXd::Identity(n_, n_));
            const Eigen::MatrixXd finv_mt = j < 2 ? Eigen::MatrixXd(finv * m_[j].transpose()) : Eigen::MatrixXd();
            for (std::size_t a = 0; a < basis_.size(); ++a) {
                tmp.setZero();
                if (j < 2) {
                    // dF/dz_a = -(M^T B_a + B_a M)
                    right_multiply_basis(finv_mt, basis_[a], tmp);
                    sandwich_basis(finv, basis_[a], m_[j], tmp);
                    tmp = -tmp;
                } else {
                    right_multiply_basis(finv, basis_[a], tmp);
                }
                const auto col = static_cast<Eigen::Index>(a);
                d.col(col) = Eigen::Map<const Eigen::VectorXd>(tmp.data(), nn);
                const Eigen::MatrixXd tr = tmp.transpose();
                dt.col(col) = Eigen::Map<const Eigen::VectorXd>(tr.data(), nn);
            }
            // dF/dt = -I
            tmp = -finv;
            d.col(vars_ - 1) = Eigen::Map<const Eigen::VectorXd>(tmp.data(), nn);
            const Eigen::MatrixXd tr = tmp.transpose();
            dt.col(vars_ - 1) = Eigen::Map<const Eigen::VectorXd>(tr.data(), nn);

            // d/dw_a (-log det F) = -tr(F^-1 F_a); Hessian tr(F^-1 F_a F^-1 F_b).
            for (Eigen::Index a = 0; a < vars_; ++a) {
                grad(a) -= Eigen::Map<const Eigen::MatrixXd>(d.col(a).data(), n_, n_).trace();
            }
            hess.noalias() += d.transpose() * dt;
        }
        hess = 0.5 * (hess + hess.transpose());
    }

    Eigen::VectorXd start() const {
        Eigen::VectorXd w = Eigen::VectorXd::Zero(vars_);
        w(vars_ - 1) = 0.0;
        double lowest = std::numeric_limits<double>::infinity();
        for (const auto& f : blocks(w)) lowest = std::min(lowest, min_sym_eig(f));
        w(vars_ - 1) = lowest - 1.0;
        return w;
    }

    Eigen::Index dim() const { return n_; }

private:
    std::array<Eigen::MatrixXd, 2> m_;
    Eigen::Index n_;
    std::vector<BasisElement> basis_;
    Eigen::Index vars_;
};

void check_vertices(const PolytopeVertices& v) {
    if (v.m0.rows() != v.m0.cols() || v.m1.rows() != v.m1.cols() || v.m0.rows() != v.m1.rows()) {
        throw ValidationError("polytope vertices must be square matrices of equal dimension");
    }
    if (v.m0.rows() == 0) throw ValidationError("polytope vertices are empty");
    if (!v.m0.allFinite() || !v.m1.allFinite()) throw ValidationError("polytope vertices contain non-finite entries");
}

} // namespace

CertificateCheck verify_certificate(const PolytopeVertices& v, const Eigen::MatrixXd& p) {
    check_vertices(v);
    CertificateCheck check;
    check.symmetric = (p - p.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, p.cwiseAbs().maxCoeff());
    check.max_form_eig = std::max(max_sym_eig(lyapunov_form(v.m0, p)), max_sym_eig(lyapunov_form(v.m1, p)));
    check.p_min_eig = min_sym_eig(p);
    return check;
}

LyapunovSearch find_common_lyapunov(const PolytopeVertices& v, double eps, int max_iter) {
    check_vertices(v);
    if (!(eps > 0.0)) throw ValidationError("eps must be positive");
    if (max_iter < 1) throw ValidationError("max_iter must be positive");

    LyapunovSearch out;
    for (const auto* m : {&v.m0, &v.m1}) {
        const double abscissa = spectral_abscissa(*m);
        if (abscissa >= 0.0) {
            out.status = LyapunovStatus::not_hurwitz;
            out.offending_real_part = abscissa;
            out.best_margin = -std::numeric_limits<double>::infinity();
            return out;
        }
    }

    const BarrierProblem problem(v);
    const auto n = static_cast<double>(problem.dim());
    const double barrier_order = 3.0 * n; // total size of the three LMI blocks
    Eigen::VectorXd w = problem.start();
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;

    auto try_certificate = [&]() -> bool {
        const Eigen::MatrixXd p = problem.p_of(w);
        const auto check = verify_certificate(v, p);
        if (-check.max_form_eig >= eps && check.p_min_eig >= eps) {
            out.certificate = LyapunovCertificate{p, -check.max_form_eig, check.p_min_eig};
            return true;
        }
        return false;
    };

    double weight = 1.0;
    int it = 0;
    bool converged = false;
    while (it < max_iter && !converged) {
        for (int inner = 0; inner < 100 && it < max_iter; ++inner, ++it) {
            problem.derivatives(w, weight, grad, hess);
            const Eigen::VectorXd step = hess.ldlt().solve(-grad);
            const double decrement = -grad.dot(step);
            if (!step.allFinite()) throw NumericalError("Lyapunov search produced a non-finite Newton step");
            if (decrement <= 1e-10) break;
            const double f0 = problem.objective(w, weight);
            double s = 1.0;
            while (s > 1e-12 && problem.objective(w + s * step, weight) > f0 - 0.25 * s * decrement) s *= 0.5;
            if (s <= 1e-12) break;
            w += s * step;
        }
        const double t = problem.margin_var(w);
        const double gap = barrier_order / weight;
        out.best_margin = t;
        if (t >= eps && gap <= 0.1 * t && try_certificate()) break;
        if (gap <= 1e-9 * std::max(1.0, std::abs(t))) converged = true;
        weight *= 20.0;
    }
    out.iterations = it;
    if (!out.certificate) try_certificate();
    out.status = out.certificate ? LyapunovStatus::certified : LyapunovStatus::inconclusive;
    return out;
}

HurwitzReport check_hurwitz_grid(const ModelParams& params, int n_samples) {
    if (n_samples < 1) throw ValidationError("n_samples must be positive");
    const auto v = build_vertices(params);
    HurwitzReport report;
    report.n_samples = n_samples;
    report.worst_abscissa = -std::numeric_limits<double>::infinity();
    for (int s = 0; s < n_samples; ++s) {
        const double q = n_samples == 1 ? 0.0 : static_cast<double>(s) / (n_samples - 1);
        const double a = spectral_abscissa(v.at(q));
        if (a > report.worst_abscissa) {
            report.worst_abscissa = a;
            report.worst_q = q;
        }
    }
    return report;
}

} // namespace pavsim
