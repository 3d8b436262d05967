#pragma once

// Common quadratic Lyapunov function (CQLF) search for the one-parameter
// family A'(q) = M0 + q (M1 - M0), q in [0, 1], of reduced generators.

#include "pavsim/model.hpp"

#include <optional>
#include <string_view>

namespace pavsim {

struct PolytopeVertices {
    Eigen::MatrixXd m0; // q_hdv = 0
    Eigen::MatrixXd m1; // q_hdv = 1

    Eigen::MatrixXd at(double q_hdv) const { return m0 + q_hdv * (m1 - m0); }
    Eigen::Index dimension() const { return m0.rows(); }
};

struct LyapunovCertificate {
    Eigen::MatrixXd p;
    /// min over vertices of -lambda_max(Mi^T P + P Mi).
    double margin = 0.0;
    double p_min_eig = 0.0;
};

enum class LyapunovStatus {
    certified,
    not_hurwitz,  // a vertex has an eigenvalue with nonnegative real part
    inconclusive, // no certificate found; says nothing about instability
};

std::string_view to_string(LyapunovStatus status);

struct LyapunovSearch {
    LyapunovStatus status = LyapunovStatus::inconclusive;
    std::optional<LyapunovCertificate> certificate;
    /// Spectral abscissa of the offending vertex when status == not_hurwitz.
    double offending_real_part = 0.0;
    /// Best common margin reached by the search (negative when none).
    double best_margin = 0.0;
    int iterations = 0;
};

struct CertificateCheck {
    double max_form_eig = 0.0; // max over vertices of lambda_max(Mi^T P + P Mi)
    double p_min_eig = 0.0;
    bool symmetric = false;
};

PolytopeVertices build_vertices(const ModelParams& params);

/// Searches for P = P^T with trace(P) = dim, P >= eps I and
/// Mi^T P + P Mi <= -eps I at both vertices.
///
/// The search maximizes the common margin t subject to P - tI >= 0 and
/// -(Mi^T P + P Mi) - tI >= 0 with a log-det barrier path-following method
/// (damped Newton on the barrier, barrier weight raised geometrically), and
/// stops once t clears eps with the duality gap below a tenth of t. Every
/// returned certificate is re-checked with a symmetric eigensolver.
LyapunovSearch find_common_lyapunov(const PolytopeVertices& v, double eps = 1e-6, int max_iter = 5000);

CertificateCheck verify_certificate(const PolytopeVertices& v, const Eigen::MatrixXd& p);

/// Largest real part of the eigenvalues of m.
double spectral_abscissa(const Eigen::MatrixXd& m);

struct HurwitzReport {
    double worst_abscissa = 0.0;
    double worst_q = 0.0;
    int n_samples = 0;
};

/// Spectral abscissa of A'(q) on n_samples evenly spaced q in [0, 1]
/// (q = 0 alone when n_samples == 1). A negative worst value is necessary,
/// not sufficient, for a CQLF.
HurwitzReport check_hurwitz_grid(const ModelParams& params, int n_samples);

} // namespace pavsim
