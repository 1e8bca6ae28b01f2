#ifndef TENSASYM_SVF_HPP
#define TENSASYM_SVF_HPP

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "common.hpp"

namespace tensasym {

/**
 * Slowly varying functions of the closed family
 *   Const(c), LogPow(kappa) = (1 + ln tau)^kappa, and finite products.
 * Every member equals c * (1 + ln tau)^kappa for tau >= 1; the normal form
 * is cached at construction.
 */
class SlowlyVaryingFn {
public:
    struct Const {
        double c = 1.0;
    };
    struct LogPow {
        double kappa = 0.0;
    };
    struct Product {
        std::vector<SlowlyVaryingFn> factors;
    };
    using Variant = std::variant<Const, LogPow, Product>;

    SlowlyVaryingFn() : SlowlyVaryingFn(Const{1.0}) {}
    SlowlyVaryingFn(Const c) : v_(c) {
        if (!(c.c > 0) || !std::isfinite(c.c)) throw DomainError("Const SVF needs c > 0");
        coef_ = c.c;
        kappa_ = 0.0;
    }
    SlowlyVaryingFn(LogPow l) : v_(l) {
        if (!std::isfinite(l.kappa)) throw DomainError("LogPow exponent must be finite");
        coef_ = 1.0;
        kappa_ = l.kappa;
    }
    SlowlyVaryingFn(Product p) : v_(std::move(p)) {
        coef_ = 1.0;
        kappa_ = 0.0;
        for (const auto& f : std::get<Product>(v_).factors) {
            coef_ *= f.coef_;
            kappa_ += f.kappa_;
        }
    }

    static SlowlyVaryingFn constant(double c) { return SlowlyVaryingFn(Const{c}); }
    static SlowlyVaryingFn logpow(double kappa) { return SlowlyVaryingFn(LogPow{kappa}); }
    static SlowlyVaryingFn product(std::vector<SlowlyVaryingFn> fs) {
        return SlowlyVaryingFn(Product{std::move(fs)});
    }
    /// c * (1 + ln tau)^kappa in the smallest encoding.
    static SlowlyVaryingFn normal_form(double c, double kappa) {
        if (kappa == 0.0) return constant(c);
        if (c == 1.0) return logpow(kappa);
        return product({constant(c), logpow(kappa)});
    }

    double operator()(double tau) const {
        if (!(tau >= 1.0)) throw DomainError("SVF evaluated at tau < 1");
        return at_log(std::log(tau));
    }
    /// f(e^x) for x >= 0.
    double at_log(double x) const {
        if (kappa_ == 0.0) return coef_;
        return coef_ * std::pow(1.0 + x, kappa_);
    }
    /// d/dx f(e^x).
    double at_log_derivative(double x) const {
        if (kappa_ == 0.0) return 0.0;
        return coef_ * kappa_ * std::pow(1.0 + x, kappa_ - 1.0);
    }

    double coefficient() const { return coef_; }
    double kappa() const { return kappa_; }
    bool integral_converges() const { return kappa_ < -1.0; }
    const Variant& variant() const { return v_; }

    /// sup of |sigma ln sigma f'/f|; finite for every family member.
    double log_derivative_bound() const { return std::abs(kappa_); }

    std::string describe() const {
        std::ostringstream os;
        os.precision(12);
        std::visit(
            [&](const auto& alt) {
                using A = std::decay_t<decltype(alt)>;
                if constexpr (std::is_same_v<A, Const>) {
                    os << alt.c;
                } else if constexpr (std::is_same_v<A, LogPow>) {
                    os << "(1+ln t)^" << alt.kappa;
                } else {
                    for (std::size_t i = 0; i < alt.factors.size(); ++i) {
                        if (i) os << "*";
                        os << alt.factors[i].describe();
                    }
                    if (alt.factors.empty()) os << "1";
                }
            },
            v_);
        return os.str();
    }

private:
    Variant v_;
    double coef_ = 1.0;
    double kappa_ = 0.0;
};

inline double eval_svf(const SlowlyVaryingFn& f, double tau) { return f(tau); }

/// int_1^tau phi(s) psi(tau/s) ds/s at tau = e^L, integrated in x = ln s.
inline double mellin_convolve_log(const SlowlyVaryingFn& phi, const SlowlyVaryingFn& psi, double L,
                                  const QuadratureSettings& qs = {}) {
    if (!(L > 0.0)) throw DomainError("mellin_convolve needs tau > 1");
    auto r = adaptive_simpson([&](double x) { return phi.at_log(x) * psi.at_log(std::max(0.0, L - x)); },
                              0.0, L, qs);
    if (!r.converged) throw AccuracyError("mellin_convolve: quadrature did not converge", r.value, r.error);
    return r.value;
}

inline double mellin_convolve(const SlowlyVaryingFn& phi, const SlowlyVaryingFn& psi, double tau,
                              const QuadratureSettings& qs = {}) {
    if (!(tau > 1.0)) throw DomainError("mellin_convolve needs tau > 1");
    return mellin_convolve_log(phi, psi, std::log(tau), qs);
}

/// Half-range part: int_1^sqrt(tau) phi(s) psi(tau/s) ds/s, tau = e^L.
inline double h_half_log(const SlowlyVaryingFn& phi, const SlowlyVaryingFn& psi, double L,
                         const QuadratureSettings& qs = {}) {
    if (!(L > 0.0)) throw DomainError("h_half needs tau > 1");
    auto r = adaptive_simpson([&](double x) { return phi.at_log(x) * psi.at_log(L - x); }, 0.0, 0.5 * L, qs);
    if (!r.converged) throw AccuracyError("h_half: quadrature did not converge", r.value, r.error);
    return r.value;
}

inline double h_half(const SlowlyVaryingFn& phi, const SlowlyVaryingFn& psi, double tau,
                     const QuadratureSettings& qs = {}) {
    if (!(tau > 1.0)) throw DomainError("h_half needs tau > 1");
    return h_half_log(phi, psi, std::log(tau), qs);
}

struct ConvergenceReport {
    bool converges = false;
    std::optional<double> value;
};

/// int_1^inf f(t) dt/t; closed form through the normal form c (1+ln t)^kappa.
inline ConvergenceReport integral_tail(const SlowlyVaryingFn& f) {
    ConvergenceReport r;
    r.converges = f.integral_converges();
    if (r.converges) r.value = f.coefficient() * (-1.0 / (f.kappa() + 1.0));
    return r;
}

/// sup over tau > sigma^2 of psi(tau/sigma)/psi(tau), grid search with refinement.
inline double m_bound_grid(const SlowlyVaryingFn& psi, double sigma, int points = 400, int passes = 3) {
    if (!(sigma > 1.0)) throw DomainError("m_bound needs sigma > 1");
    const double ls = std::log(sigma);
    auto ratio = [&](double x) { return psi.at_log(x - ls) / psi.at_log(x); };
    double lo = 2.0 * ls, hi = 2.0 * ls + 12.0 * std::log(10.0);
    double best = ratio(lo), best_x = lo;
    for (int pass = 0; pass <= passes; ++pass) {
        double h = (hi - lo) / points;
        for (int i = 0; i <= points; ++i) {
            double x = lo + i * h;
            double v = ratio(x);
            if (v > best) {
                best = v;
                best_x = x;
            }
        }
        double nlo = std::max(2.0 * ls, best_x - h), nhi = best_x + h;
        lo = nlo;
        hi = nhi;
    }
    return best;
}

/// Closed form for the family: monotone members attain the sup at tau = sigma^2
/// (decreasing psi) or approach 1 at infinity (nondecreasing psi).
inline double m_bound(const SlowlyVaryingFn& psi, double sigma) {
    if (!(sigma > 1.0)) throw DomainError("m_bound needs sigma > 1");
    const double k = psi.kappa();
    if (k >= 0.0) return 1.0;
    const double ls = std::log(sigma);
    return std::pow((1.0 + ls) / (1.0 + 2.0 * ls), k);
}

/// Upper bound of int_1^inf phi(s) m_psi(s) ds/s; finite iff the integral of phi is.
inline ConvergenceReport tail_product_bound(const SlowlyVaryingFn& phi, const SlowlyVaryingFn& psi) {
    ConvergenceReport r;
    auto t = integral_tail(phi);
    r.converges = t.converges;
    if (t.converges) r.value = *t.value * std::pow(2.0, std::max(0.0, -psi.kappa()));
    return r;
}

/**
 * Leading term of the Mellin convolution of two log powers with unit
 * coefficients. Inputs are ordered so kappa1 <= kappa2.
 */
struct ClosedFormAsymptotic {
    enum class Branch { Beta, LogLogOne, LogLogBoth, Dominance };
    enum class Dominance { None, SecondDominates, Balanced };

    Branch branch = Branch::Beta;
    Dominance dominance = Dominance::None;
    double kappa1 = 0.0, kappa2 = 0.0;
    bool swapped = false;
    double beta = 0.0;
    double weight = 0.0;  // multiplier of (1+ln tau)^kappa2 in the dominance branch
    std::string description;

    double operator()(double tau) const {
        if (!(tau > 1.0)) throw DomainError("closed form needs tau > 1");
        return at_log(std::log(tau));
    }

    double at_log(double L) const {
        if (!(L > 0.0)) throw DomainError("closed form needs tau > 1");
        switch (branch) {
            case Branch::Beta:
                return beta * std::pow(1.0 + L, kappa1 + kappa2 + 1.0);
            case Branch::LogLogOne:
                return std::log(L) * std::pow(1.0 + L, kappa2);
            case Branch::LogLogBoth:
                return 2.0 * std::log(L) / (1.0 + L);
            case Branch::Dominance:
                return weight * std::pow(1.0 + L, kappa2);
        }
        return 0.0;
    }

    /// Family member with the same leading term (not available for ln ln branches).
    std::optional<SlowlyVaryingFn> as_svf() const {
        if (branch == Branch::Beta) return SlowlyVaryingFn::normal_form(beta, kappa1 + kappa2 + 1.0);
        if (branch == Branch::Dominance) return SlowlyVaryingFn::normal_form(weight, kappa2);
        return std::nullopt;
    }
};

inline ClosedFormAsymptotic log_case_convolution(double k1, double k2) {
    ClosedFormAsymptotic c;
    c.swapped = k1 > k2;
    if (c.swapped) std::swap(k1, k2);
    c.kappa1 = k1;
    c.kappa2 = k2;
    std::ostringstream os;
    os.precision(12);
    if (k1 > -1.0) {
        c.branch = ClosedFormAsymptotic::Branch::Beta;
        c.beta = std::beta(k1 + 1.0, k2 + 1.0);
        os << "B(" << k1 + 1 << "," << k2 + 1 << ")*(1+ln t)^" << k1 + k2 + 1;
    } else if (k1 == -1.0 && k2 > -1.0) {
        c.branch = ClosedFormAsymptotic::Branch::LogLogOne;
        os << "ln(ln t)*(1+ln t)^" << k2;
    } else if (k1 == -1.0 && k2 == -1.0) {
        c.branch = ClosedFormAsymptotic::Branch::LogLogBoth;
        os << "2 ln(ln t)/(1+ln t)";
    } else {
        c.branch = ClosedFormAsymptotic::Branch::Dominance;
        const double first = -1.0 / (k1 + 1.0);
        if (k1 == k2) {
            c.dominance = ClosedFormAsymptotic::Dominance::Balanced;
            c.weight = 2.0 * first;
            os << "balanced: (I1+I2)*(1+ln t)^" << k2;
        } else {
            c.dominance = ClosedFormAsymptotic::Dominance::SecondDominates;
            c.weight = first;
            os << "dominant (1+ln t)^" << k2 << " weighted by integral " << first;
        }
    }
    c.description = os.str();
    return c;
}

}  // namespace tensasym

#endif
