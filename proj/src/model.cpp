#include "pavsim/model.hpp"

#include "pavsim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace pavsim {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw ValidationError(what);
}

bool valid_rate(double r) { return std::isfinite(r) && r > 0.0 && r <= 1.0; }

} // namespace

void ModelParams::validate() const {
    require(valid_rate(lambda1), "lambda1 must lie in (0, 1]");
    require(valid_rate(lambda2), "lambda2 must lie in (0, 1]");
    require(valid_rate(lambda3), "lambda3 must lie in (0, 1]");
    require(valid_rate(lambda4), "lambda4 must lie in (0, 1]");
    require(std::isfinite(gamma) && gamma >= 0.0 && gamma <= 1.0, "gamma must lie in [0, 1]");
    require(k >= 1, "k must be a positive integer");
    require(std::isfinite(t_lock_h) && t_lock_h >= 0.0, "t_lock_h must be finite and >= 0");
    require(std::isfinite(t_lock_a) && t_lock_a >= 0.0, "t_lock_a must be finite and >= 0");
}

double ModelParams::max_lambda() const { return std::max({lambda1, lambda2, lambda3, lambda4}); }

StateVector::StateVector(std::vector<double> hdv, std::vector<double> av) : hdv_size_(hdv.size()) {
    values_ = std::move(hdv);
    values_.insert(values_.end(), av.begin(), av.end());
}

StateVector::StateVector(std::vector<double> flat, std::size_t hdv_size)
    : values_(std::move(flat)), hdv_size_(hdv_size) {
    if (hdv_size_ > values_.size()) throw ValidationError("hdv block larger than the state");
}

StateVector StateVector::unlocked(const ModelParams& params, double frac_h0) {
    if (!(frac_h0 >= 0.0 && frac_h0 <= 1.0)) throw ValidationError("frac_h0 must lie in [0, 1]");
    std::vector<double> flat(params.dimension(), 0.0);
    flat[0] = frac_h0;
    flat[params.hdv_size()] = 1.0 - frac_h0;
    return {std::move(flat), params.hdv_size()};
}

StateVector StateVector::uniform(const ModelParams& params) {
    const auto n = params.dimension();
    return {std::vector<double>(n, 1.0 / static_cast<double>(n)), params.hdv_size()};
}

double StateVector::sum_hdv() const {
    auto h = hdv();
    return std::accumulate(h.begin(), h.end(), 0.0);
}

double StateVector::sum_av() const {
    auto a = av();
    return std::accumulate(a.begin(), a.end(), 0.0);
}

Eigen::VectorXd StateVector::to_eigen() const {
    return Eigen::Map<const Eigen::VectorXd>(values_.data(), static_cast<Eigen::Index>(values_.size()));
}

void validate_simplex(const ModelParams& params, const StateVector& x, double tol) {
    if (x.hdv_size() != params.hdv_size() || x.size() != params.dimension()) {
        throw ValidationError("state has " + std::to_string(x.hdv_size()) + "+" +
                              std::to_string(x.size() - x.hdv_size()) + " entries, model expects " +
                              std::to_string(params.hdv_size()) + "+" + std::to_string(params.av_size()));
    }
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i])) throw ValidationError("state entry " + std::to_string(i) + " is not finite");
        if (x[i] < -tol) throw ValidationError("state entry " + std::to_string(i) + " is negative");
        total += x[i];
    }
    if (std::abs(total - 1.0) > tol) throw ValidationError("state does not sum to one");
}

LeaderProbabilities leader_probabilities(const ModelParams& params, const StateVector& x) {
    validate_simplex(params, x);
    const double q = detail::q_hdv_flat(params, x.flat());
    return {q, 1.0 - q};
}

EffectiveRates effective_rates(const ModelParams& params, const LeaderProbabilities& q) {
    return {q.q_hdv * params.lambda1 + q.q_av * params.lambda3,
            q.q_hdv * params.lambda2 + q.q_av * params.lambda4};
}

StateVector drift(const ModelParams& params, const StateVector& x) {
    params.validate();
    validate_simplex(params, x);
    std::vector<double> out(x.size());
    detail::drift_flat(params, x.flat(), out);
    return {std::move(out), x.hdv_size()};
}

namespace detail {

double q_hdv_flat(const ModelParams& params, std::span<const double> x) {
    const auto nh = params.hdv_size();
    double sh = 0.0;
    double sa = 0.0;
    for (std::size_t i = 0; i < nh; ++i) sh += x[i];
    for (std::size_t i = nh; i < x.size(); ++i) sa += x[i];
    // Normalizing by the total keeps q_hdv + q_av == 1 when x carries
    // round-off off the simplex.
    const double total = sh + sa;
    const double frac_h = total > 0.0 ? sh / total : 0.0;
    return params.gamma + (1.0 - params.gamma) * frac_h;
}

void drift_flat(const ModelParams& params, std::span<const double> x, std::span<double> out) {
    const double q = q_hdv_flat(params, x);
    const double rate_ha = q * params.lambda1 + (1.0 - q) * params.lambda3;
    const double rate_ah = q * params.lambda2 + (1.0 - q) * params.lambda4;

    const std::size_t nh = params.hdv_size();
    const std::size_t kh = nh - 1;
    const std::size_t ka = x.size() - nh - 1;
    const double mu_h = params.mu_h();
    const double mu_a = params.mu_a();
    const double* h = x.data();
    const double* a = x.data() + nh;
    double* dh = out.data();
    double* da = out.data() + nh;

    const double leave_h = rate_ha * h[0];
    const double leave_a = rate_ah * a[0];
    const double arrive_a = kh > 0 ? mu_h * h[kh] : leave_h;
    const double arrive_h = ka > 0 ? mu_a * a[ka] : leave_a;

    dh[0] = arrive_h - leave_h;
    if (kh > 0) {
        dh[1] = leave_h - mu_h * h[1];
        for (std::size_t i = 2; i <= kh; ++i) dh[i] = mu_h * (h[i - 1] - h[i]);
    }
    da[0] = arrive_a - leave_a;
    if (ka > 0) {
        da[1] = leave_a - mu_a * a[1];
        for (std::size_t i = 2; i <= ka; ++i) da[i] = mu_a * (a[i - 1] - a[i]);
    }
}

} // namespace detail

namespace {

// Generator column entries for mass flowing from `from` to `to` at `rate`.
void add_switch(Eigen::MatrixXd& m, Eigen::Index from, Eigen::Index to, double rate) {
    m(from, from) -= rate;
    m(to, from) += rate;
}

} // namespace

GeneratorDecomposition decompose_generator(const ModelParams& params) {
    params.validate();
    if (params.k > kAnalysisMaxStages) {
        throw ValidationError("dense generator requested for k=" + std::to_string(params.k) +
                              "; analysis paths are capped at k=" + std::to_string(kAnalysisMaxStages));
    }
    const auto n = static_cast<Eigen::Index>(params.dimension());
    const auto h0 = Eigen::Index{0};
    const auto a0 = static_cast<Eigen::Index>(params.hdv_size());
    const auto kh = static_cast<Eigen::Index>(params.stages_h());
    const auto ka = static_cast<Eigen::Index>(params.stages_a());

    GeneratorDecomposition g{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n)};

    // Lock chains and their exits live in A0.
    for (Eigen::Index i = 1; i <= kh; ++i) add_switch(g.a0, h0 + i, i < kh ? h0 + i + 1 : a0, params.mu_h());
    for (Eigen::Index i = 1; i <= ka; ++i) add_switch(g.a0, a0 + i, i < ka ? a0 + i + 1 : h0, params.mu_a());

    // Leader-conditioned departures from the unlocked states.
    const Eigen::Index h_target = kh > 0 ? h0 + 1 : a0;
    const Eigen::Index a_target = ka > 0 ? a0 + 1 : h0;
    add_switch(g.a1, h0, h_target, params.lambda1);
    add_switch(g.a1, a0, a_target, params.lambda2);
    add_switch(g.a2, h0, h_target, params.lambda3);
    add_switch(g.a2, a0, a_target, params.lambda4);
    return g;
}

Eigen::MatrixXd assemble_generator(const ModelParams& params, double q_hdv) {
    if (!(q_hdv >= 0.0 && q_hdv <= 1.0)) throw ValidationError("q_hdv must lie in [0, 1]");
    return decompose_generator(params).at(q_hdv);
}

} // namespace pavsim
