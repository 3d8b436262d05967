#pragma once

// Leader-dependent mode-switching model for partially automated vehicles (PAVs).
//
// A PAV is either in HDV mode or AV mode. Each side has an unlocked state
// (H_0 / A_0) from which it may start a switch, and a chain of k lock stages
// (H_1..H_k / A_1..A_k) approximating a deterministic lockout by an Erlang-k
// sojourn. Switching rates depend on the probability that the leader is an
// HDV, which in turn depends on the population state, giving a bilinear ODE
//
//     dx/dt = [A0 + q_hdv(x) A1 + (1 - q_hdv(x)) A2] x.
//
// A side whose lockout duration is zero has no lock chain at all: its switch
// lands directly in the opposite unlocked state.

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace pavsim {

inline constexpr double kSimplexTolerance = 1e-9;
inline constexpr double kConservationTolerance = 1e-12;
inline constexpr int kAnalysisMaxStages = 32;

struct ModelParams {
    double lambda1 = 0.1;  // HDV->AV, leader HDV [1/s]
    double lambda2 = 0.15; // AV->HDV, leader HDV [1/s]
    double lambda3 = 0.9;  // HDV->AV, leader AV [1/s]
    double lambda4 = 0.05; // AV->HDV, leader AV [1/s]
    double gamma = 0.2;    // permanent HDV fraction
    int k = 200;
    double t_lock_h = 3.0; // upward lockout [s]
    double t_lock_a = 3.0; // downward lockout [s]

    /// Throws ValidationError if any field is out of range.
    void validate() const;

    bool has_upward_lock() const { return t_lock_h > 0.0; }
    bool has_downward_lock() const { return t_lock_a > 0.0; }
    /// Erlang stage rates; zero when the corresponding lock chain is absent.
    double mu_h() const { return has_upward_lock() ? k / t_lock_h : 0.0; }
    double mu_a() const { return has_downward_lock() ? k / t_lock_a : 0.0; }
    int stages_h() const { return has_upward_lock() ? k : 0; }
    int stages_a() const { return has_downward_lock() ? k : 0; }
    std::size_t hdv_size() const { return static_cast<std::size_t>(stages_h()) + 1; }
    std::size_t av_size() const { return static_cast<std::size_t>(stages_a()) + 1; }
    std::size_t dimension() const { return hdv_size() + av_size(); }
    double max_lambda() const;
    bool leader_independent() const { return lambda1 == lambda3 && lambda2 == lambda4; }

    bool operator==(const ModelParams&) const = default;
};

/// Fractions of PAVs over [H_0..H_kh, A_0..A_ka], stored contiguously.
class StateVector {
public:
    StateVector() = default;
    StateVector(std::vector<double> hdv, std::vector<double> av);
    StateVector(std::vector<double> flat, std::size_t hdv_size);

    /// All mass in the unlocked states, split frac_h0 / (1 - frac_h0).
    static StateVector unlocked(const ModelParams& params, double frac_h0);
    static StateVector uniform(const ModelParams& params);

    std::span<const double> hdv() const { return {values_.data(), hdv_size_}; }
    std::span<const double> av() const { return {values_.data() + hdv_size_, values_.size() - hdv_size_}; }
    std::span<double> hdv() { return {values_.data(), hdv_size_}; }
    std::span<double> av() { return {values_.data() + hdv_size_, values_.size() - hdv_size_}; }
    std::span<const double> flat() const { return values_; }
    std::span<double> flat() { return values_; }
    const std::vector<double>& values() const { return values_; }

    std::size_t size() const { return values_.size(); }
    std::size_t hdv_size() const { return hdv_size_; }
    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }

    double sum_hdv() const;
    double sum_av() const;
    double sum() const { return sum_hdv() + sum_av(); }

    Eigen::VectorXd to_eigen() const;
    bool operator==(const StateVector&) const = default;

private:
    std::vector<double> values_;
    std::size_t hdv_size_ = 0;
};

/// Throws ValidationError unless x matches the topology of params, is finite,
/// has no entry below -tol and sums to one within tol.
void validate_simplex(const ModelParams& params, const StateVector& x, double tol = kSimplexTolerance);

struct LeaderProbabilities {
    double q_hdv = 1.0;
    double q_av = 0.0;
};

struct EffectiveRates {
    double h_to_a = 0.0;
    double a_to_h = 0.0;
};

LeaderProbabilities leader_probabilities(const ModelParams& params, const StateVector& x);
EffectiveRates effective_rates(const ModelParams& params, const LeaderProbabilities& q);

/// Right-hand side of the mean-field ODE, evaluated matrix-free in O(k).
StateVector drift(const ModelParams& params, const StateVector& x);

namespace detail {
/// Unchecked leader probability from a flat state (normalized by its sum).
double q_hdv_flat(const ModelParams& params, std::span<const double> x);
/// Unchecked drift on flat storage; out must have x.size() entries.
void drift_flat(const ModelParams& params, std::span<const double> x, std::span<double> out);
} // namespace detail

/// Constant matrices of A(q) = A0 + q A1 + (1 - q) A2.
struct GeneratorDecomposition {
    Eigen::MatrixXd a0;
    Eigen::MatrixXd a1;
    Eigen::MatrixXd a2;

    Eigen::MatrixXd at(double q_hdv) const { return a0 + q_hdv * a1 + (1.0 - q_hdv) * a2; }
};

/// Dense decomposition; refuses k above kAnalysisMaxStages.
GeneratorDecomposition decompose_generator(const ModelParams& params);
Eigen::MatrixXd assemble_generator(const ModelParams& params, double q_hdv);

} // namespace pavsim
