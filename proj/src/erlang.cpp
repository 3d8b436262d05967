#include "pavsim/erlang.hpp"

#include "pavsim/errors.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>

namespace pavsim {

ErlangSpec design_rate(int k, double t_lock) {
    if (k < 1) throw ValidationError("erlang stage count must be >= 1, got " + std::to_string(k));
    if (!(t_lock > 0.0) || !std::isfinite(t_lock)) throw ValidationError("lockout duration must be positive and finite");
    const double mu = k / t_lock;
    return {k, mu, t_lock, t_lock * t_lock / k};
}

namespace {

constexpr double kGammaEps = 1e-16;

double log_prefactor(double a, double x) { return -x + a * std::log(x) - std::lgamma(a); }

int iteration_cap(double a) { return 100 + static_cast<int>(20.0 * std::sqrt(a)) + static_cast<int>(a); }

double gamma_series(double a, double x) {
    double term = 1.0 / a;
    double sum = term;
    const int cap = iteration_cap(a);
    for (int n = 1; n < cap; ++n) {
        term *= x / (a + n);
        sum += term;
        if (std::abs(term) < std::abs(sum) * kGammaEps) {
            return sum * std::exp(log_prefactor(a, x));
        }
    }
    throw NumericalError("incomplete gamma series did not converge");
}

// Modified Lentz evaluation of the continued fraction for Q(a, x).
double gamma_continued_fraction(double a, double x) {
    constexpr double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    const int cap = iteration_cap(a);
    for (int i = 1; i < cap; ++i) {
        const double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < kGammaEps) return std::exp(log_prefactor(a, x)) * h;
    }
    throw NumericalError("incomplete gamma continued fraction did not converge");
}

void check_gamma_args(double a, double x) {
    if (!(a > 0.0) || !std::isfinite(a)) throw ValidationError("incomplete gamma needs a > 0");
    if (!(x >= 0.0)) throw ValidationError("incomplete gamma needs x >= 0");
}

} // namespace

double regularized_gamma_p(double a, double x) {
    check_gamma_args(a, x);
    if (x == 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;
    if (x < a + 1.0) return gamma_series(a, x);
    return 1.0 - gamma_continued_fraction(a, x);
}

double regularized_gamma_q(double a, double x) {
    check_gamma_args(a, x);
    if (x == 0.0) return 1.0;
    if (std::isinf(x)) return 0.0;
    if (x < a + 1.0) return 1.0 - gamma_series(a, x);
    return gamma_continued_fraction(a, x);
}

double erlang_cdf(const ErlangSpec& spec, double t) {
    if (!(t >= 0.0)) throw ValidationError("erlang_cdf needs t >= 0");
    return regularized_gamma_p(spec.k, spec.rate_mu * t);
}

namespace {

struct Simpson {
    const std::function<double(double)>& f;
    int evaluations = 0;

    double eval(double x) {
        ++evaluations;
        return f(x);
    }

    double refine(double a, double b, double fa, double fm, double fb, double whole, double tol, int depth) {
        const double m = 0.5 * (a + b);
        const double lm = 0.5 * (a + m);
        const double rm = 0.5 * (m + b);
        const double flm = eval(lm);
        const double frm = eval(rm);
        const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        const double diff = left + right - whole;
        if (depth <= 0 || std::abs(diff) <= 15.0 * tol) return left + right + diff / 15.0;
        return refine(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
               refine(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
    }

    double integrate(double a, double b, double tol, int panels) {
        double total = 0.0;
        const double width = (b - a) / panels;
        for (int p = 0; p < panels; ++p) {
            const double lo = a + p * width;
            const double hi = p + 1 == panels ? b : lo + width;
            const double flo = eval(lo);
            const double fhi = eval(hi);
            const double fm = eval(0.5 * (lo + hi));
            const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fm + fhi);
            total += refine(lo, hi, flo, fm, fhi, whole, tol / panels, 40);
        }
        return total;
    }
};

} // namespace

double wasserstein_to_dirac(const ErlangSpec& spec) {
    if (spec.k < 1 || !(spec.rate_mu > 0.0)) throw ValidationError("invalid erlang spec");
    const double t = spec.k / spec.rate_mu;
    const double sigma = std::sqrt(static_cast<double>(spec.k)) / spec.rate_mu;
    const double lo = std::max(0.0, t - 40.0 * sigma);
    const double hi = t + 40.0 * sigma;
    const std::function<double(double)> below = [&](double s) { return erlang_cdf(spec, s); };
    const std::function<double(double)> above = [&](double s) {
        return regularized_gamma_q(spec.k, spec.rate_mu * s);
    };
    constexpr double tol = 1e-11;
    Simpson left{below};
    Simpson right{above};
    return left.integrate(lo, t, tol, 64) + right.integrate(t, hi, tol, 64);
}

KSelection choose_k(double t_lock, double threshold) {
    if (!(threshold > 0.0)) throw ValidationError("threshold must be positive");
    KSelection sel;
    std::map<int, double> seen;
    auto w1 = [&](int k) {
        const double w = wasserstein_to_dirac(design_rate(k, t_lock));
        sel.probes.emplace_back(k, w);
        seen[k] = w;
        return w;
    };

    int hi = 1;
    double w_hi = w1(hi);
    int lo = 0;
    while (w_hi > threshold) {
        if (hi >= kMaxErlangStages) {
            throw ValidationError("threshold " + std::to_string(threshold) + " not reachable with k <= " +
                                  std::to_string(kMaxErlangStages));
        }
        lo = hi;
        hi = std::min(2 * hi, kMaxErlangStages);
        w_hi = w1(hi);
    }
    while (hi - lo > 1) {
        const int mid = lo + (hi - lo) / 2;
        const double w = w1(mid);
        if (w <= threshold) {
            hi = mid;
            w_hi = w;
        } else {
            lo = mid;
        }
    }

    double prev = std::numeric_limits<double>::infinity();
    for (const auto& [k, w] : seen) {
        if (!(w < prev)) throw NumericalError("W1 not decreasing in k at k=" + std::to_string(k));
        prev = w;
    }
    sel.k = hi;
    sel.w1 = w_hi;
    return sel;
}

} // namespace pavsim
