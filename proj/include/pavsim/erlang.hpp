#pragma once

// Erlang-k phase-type approximation of a deterministic lockout.

#include <utility>
#include <vector>

namespace pavsim {

struct ErlangSpec {
    int k = 1;
    double rate_mu = 1.0; // per stage [1/s]
    double mean = 1.0;    // k / rate_mu [s]
    double variance = 1.0; // k / rate_mu^2 [s^2]
};

ErlangSpec design_rate(int k, double t_lock);

/// Regularized lower incomplete gamma P(a, x).
double regularized_gamma_p(double a, double x);
/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double regularized_gamma_q(double a, double x);

double erlang_cdf(const ErlangSpec& spec, double t);

/// W1 distance between Erlang-k and the point mass at its mean, i.e. E|X - T|.
double wasserstein_to_dirac(const ErlangSpec& spec);

struct KSelection {
    int k = 1;
    double w1 = 0.0;
    std::vector<std::pair<int, double>> probes; // (k, W1) in probe order
};

inline constexpr int kMaxErlangStages = 100000;

/// Smallest k with W1(Erlang-k(t_lock), t_lock) <= threshold.
KSelection choose_k(double t_lock, double threshold);

} // namespace pavsim
