#ifndef TENSASYM_TENSOR_HPP
#define TENSASYM_TENSOR_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "common.hpp"
#include "periodic.hpp"
#include "spectrum.hpp"
#include "svf.hpp"

namespace tensasym {

// ---------------------------------------------------------------------------
// exact counting
// ---------------------------------------------------------------------------

namespace detail {

inline std::int64_t guarded_count(const MarginalSpectrum& s, double scale, double t, const char* name) {
    try {
        return s.count_products_above(scale, t);
    } catch (const RangeError& e) {
        char buf[96];
        std::snprintf(buf, sizeof buf, " [marginal %s at argument t/lambda = %.6g]", name, t / scale);
        throw RangeError(std::string(e.what()) + buf);
    }
}

// Dirichlet hyperbola split for two models. Pairs with k <= K are counted
// through a, the rest have j <= J and are counted through b; the J*K block
// is in both sums.
inline std::int64_t hyperbola_count(const MarginalSpectrum& a, const MarginalSpectrum& b, double t) {
    auto cost = [&](double split) {
        std::int64_t K = guarded_count(b, 1.0, split, "b");
        std::int64_t J = (K + 1 <= b.n_max()) ? guarded_count(a, b.eigenvalue(K + 1), t, "a") : a.n_max();
        return std::make_pair(K, J);
    };
    // balance K against J with a short search in log(split)
    double lo = std::log(t / a.lambda1()), hi = std::log(b.lambda1());
    if (!(hi > lo)) return 0;
    std::pair<std::int64_t, std::int64_t> best{-1, -1};
    for (int it = 0; it < 40; ++it) {
        double mid = 0.5 * (lo + hi);
        auto kj = cost(std::exp(mid));
        best = kj;
        if (kj.first > kj.second)
            lo = mid;  // too many k terms: raise the split
        else
            hi = mid;
        if (hi - lo < 1e-3) break;
    }
    const std::int64_t K = best.first, J = best.second;
    std::int64_t total = parallel_count_sum(K, [&](std::int64_t k) { return guarded_count(a, b.eigenvalue(k), t, "a"); });
    std::int64_t total2 = parallel_count_sum(J, [&](std::int64_t j) { return guarded_count(b, a.eigenvalue(j), t, "b"); });
    return total + total2 - J * K;
}

}  // namespace detail

/// N(t) = #{(j,k) : lambda_j lambda~_k > t}
inline std::int64_t tensor_counting(const MarginalSpectrum& a, const MarginalSpectrum& b, double t) {
    if (!(t > 0)) throw DomainError("tensor_counting needs t > 0");
    if (!(a.lambda1() * b.lambda1() > t)) return 0;
    if (a.is_explicit() || b.is_explicit()) {
        // iterate over the shorter explicit list
        bool iterate_b = b.is_explicit() && (!a.is_explicit() || *b.length() <= *a.length());
        const MarginalSpectrum& outer = iterate_b ? b : a;
        const MarginalSpectrum& inner = iterate_b ? a : b;
        const auto& ls = std::get<MarginalSpectrum::Explicit>(outer.variant()).lambdas;
        const double top = inner.lambda1();
        std::int64_t total = 0;
        for (double l : ls) {
            if (!(top * l > t)) break;
            total += detail::guarded_count(inner, l, t, iterate_b ? "a" : "b");
        }
        return total;
    }
    return detail::hyperbola_count(a, b, t);
}

namespace detail {

struct MultiCounter {
    const std::vector<MarginalSpectrum>& specs;
    double t;
    std::vector<std::unordered_map<std::uint64_t, std::int64_t>> memo;
    std::vector<double> tops;  // tops[l] = product of lambda_1 of levels l-1..0 (applied in path order)

    MultiCounter(const std::vector<MarginalSpectrum>& s, double tt) : specs(s), t(tt), memo(s.size()) {}

    // does ((scale * l1(l-1)) * ...) * l1(0) exceed t?
    bool reachable(std::size_t level, double scale) const {
        for (std::size_t m = level; m-- > 0;) scale = scale * specs[m].lambda1();
        return scale > t;
    }

    // tuples over levels 0..level with ((scale * x_level) * ...) * x_0 > t
    std::int64_t count(std::size_t level, double scale) {
        if (level == 0) return guarded_count(specs[0], scale, t, "0");
        auto key = double_bits(scale);
        auto& mm = memo[level];
        if (auto it = mm.find(key); it != mm.end()) return it->second;
        std::int64_t total = 0;
        const auto& s = specs[level];
        for (std::int64_t k = 1;; ++k) {
            if (auto len = s.length(); len && k > *len) break;
            if (k > s.n_max()) throw RangeError("multi-factor count needs eigenvalues beyond n_max of factor " +
                                                std::to_string(level));
            double next = scale * s.eigenvalue(k);
            if (!reachable(level, next)) break;
            total += count(level - 1, next);
        }
        mm.emplace(key, total);
        return total;
    }
};

}  // namespace detail

/**
 * Count for d factors. Products are formed as ((x_{d-1} x_{d-2}) ...) x_0,
 * starting from the last factor. Inner counts are memoized on the exact bits
 * of the partial product.
 */
inline std::int64_t tensor_counting_multi(const std::vector<MarginalSpectrum>& specs, double t) {
    if (specs.empty()) throw PreconditionError("tensor_counting_multi needs at least one factor");
    if (!(t > 0)) throw DomainError("tensor_counting needs t > 0");
    if (specs.size() == 1) return specs[0].counting(t);
    if (specs.size() == 2) return tensor_counting(specs[0], specs[1], t);
    detail::MultiCounter mc(specs, t);
    if (!mc.reachable(specs.size(), 1.0)) return 0;
    return mc.count(specs.size() - 1, 1.0);
}

/// Product of leading eigenvalues in the counting association order.
inline double top_product(const std::vector<MarginalSpectrum>& specs) {
    double p = 1.0;
    for (std::size_t m = specs.size(); m-- > 0;) p = p * specs[m].lambda1();
    return p;
}

/// lambda_n = sup{t : N(t) >= n}, found by bisection on the bit patterns of t.
inline double tensor_eigenvalue(const std::vector<MarginalSpectrum>& specs, std::int64_t n) {
    if (n < 1) throw RangeError("tensor eigenvalue index must be >= 1");
    auto N = [&](double t) { return tensor_counting_multi(specs, t); };
    double hi = top_product(specs);  // N(hi) = 0 < n
    double lo = hi;
    while (true) {
        lo *= 0.5;
        if (!(lo > 1e-300)) throw RangeError("tensor eigenvalue index " + std::to_string(n) + " not reachable");
        if (N(lo) >= n) break;
        hi = lo;
    }
    std::uint64_t blo = double_bits(lo), bhi = double_bits(hi);
    while (bhi - blo > 1) {
        std::uint64_t mid = blo + (bhi - blo) / 2;
        if (N(bits_double(mid)) >= n)
            blo = mid;
        else
            bhi = mid;
    }
    return bits_double(bhi);
}

/// The n largest products, descending, by best-first enumeration of index tuples.
inline std::vector<double> largest_products(const std::vector<MarginalSpectrum>& specs, std::int64_t n) {
    if (specs.empty()) throw PreconditionError("largest_products needs at least one factor");
    const std::size_t d = specs.size();
    std::vector<std::vector<double>> cache(d);
    auto lam = [&](std::size_t m, std::int64_t k) -> double {
        auto& c = cache[m];
        while (static_cast<std::int64_t>(c.size()) < k) c.push_back(specs[m].eigenvalue(static_cast<std::int64_t>(c.size()) + 1));
        return c[static_cast<std::size_t>(k - 1)];
    };
    auto exists = [&](std::size_t m, std::int64_t k) {
        if (auto len = specs[m].length(); len && k > *len) return false;
        return k <= specs[m].n_max();
    };
    using Idx = std::vector<std::int64_t>;
    auto value = [&](const Idx& ix) {
        double p = 1.0;
        for (std::size_t m = d; m-- > 0;) p = p * lam(m, ix[m]);
        return p;
    };
    auto cmp = [](const std::pair<double, Idx>& x, const std::pair<double, Idx>& y) {
        if (x.first != y.first) return x.first < y.first;
        return x.second > y.second;
    };
    std::priority_queue<std::pair<double, Idx>, std::vector<std::pair<double, Idx>>, decltype(cmp)> pq(cmp);
    std::set<Idx> seen;
    Idx start(d, 1);
    pq.emplace(value(start), start);
    seen.insert(start);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n));
    while (static_cast<std::int64_t>(out.size()) < n && !pq.empty()) {
        auto [v, ix] = pq.top();
        pq.pop();
        out.push_back(v);
        for (std::size_t m = 0; m < d; ++m) {
            Idx nx = ix;
            nx[m] += 1;
            if (!exists(m, nx[m]) || seen.count(nx)) continue;
            seen.insert(nx);
            pq.emplace(value(nx), nx);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// almost Mellin convolution
// ---------------------------------------------------------------------------

enum class MellinSplit { Full, H, H1 };

/**
 * int phi(tau/sigma) phi~(sigma) s(ln tau/sigma) s~(ln sigma) d rho~(ln sigma) / rho~(ln sigma)
 * over ln sigma in [x0, x1]. In x = ln sigma the measure d rho~ / rho~ equals
 * e^{-x/p} d rho~(x) / s~(x), so s~ cancels.
 */
inline double almost_mellin_range(const SlowlyVaryingFn& phi, const PeriodicComponent& s,
                                  const SlowlyVaryingFn& phit, const PeriodicComponent& st, double L, double x0,
                                  double x1, const QuadratureSettings& qs = {}) {
    if (std::abs(s.exponent() - st.exponent()) > 1e-12 * s.exponent())
        throw PreconditionError("almost Mellin convolution needs equal exponents");
    x0 = std::max(x0, 0.0);
    x1 = std::min(x1, L);
    if (!(x1 > x0)) return 0.0;
    return st.integrate_measure(
        [&](double x) { return phi.at_log(std::max(0.0, L - x)) * phit.at_log(x) * s.s(L - x); }, x0, x1, qs);
}

inline double almost_mellin(const SlowlyVaryingFn& phi, const PeriodicComponent& s, const SlowlyVaryingFn& phit,
                            const PeriodicComponent& st, double tau, MellinSplit split = MellinSplit::Full,
                            const QuadratureSettings& qs = {}) {
    if (!(tau > 1.0)) throw DomainError("almost_mellin needs tau > 1");
    const double L = std::log(tau);
    switch (split) {
        case MellinSplit::Full:
            return almost_mellin_range(phi, s, phit, st, L, 0.0, L, qs);
        case MellinSplit::H:
            return almost_mellin_range(phi, s, phit, st, L, 0.0, 0.5 * L, qs);
        case MellinSplit::H1:
            return almost_mellin_range(phi, s, phit, st, L, 0.5 * L, L, qs);
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// case classification and prediction
// ---------------------------------------------------------------------------

struct CaseTag {
    enum class Kind { DominantExponent, EqualDivergentCommon, EqualDivergentIncomm, OneConvergent, BothConvergent };
    Kind kind = Kind::DominantExponent;
    MarginalSpectrum first;   // smaller exponent, or the convergent one
    MarginalSpectrum second;
    PeriodRelation relation;  // T_first / T_second = m / n
    bool swapped = false;

    std::string name() const {
        switch (kind) {
            case Kind::DominantExponent: return "DominantExponent";
            case Kind::EqualDivergentCommon: return "EqualDivergentCommon";
            case Kind::EqualDivergentIncomm: return "EqualDivergentIncomm";
            case Kind::OneConvergent: return "OneConvergent";
            case Kind::BothConvergent: return "BothConvergent";
        }
        return "?";
    }
};

inline CaseTag classify_case(const MarginalSpectrum& a, const MarginalSpectrum& b, const PeriodRelation& rel) {
    if (a.is_explicit() && b.is_explicit())
        throw UnsupportedCase("two explicit lists have no asymptotic regime", "at least one model marginal");
    const double pa = a.exponent(), pb = b.exponent();
    auto swapped_rel = [&](const PeriodRelation& r) {
        return r.is_common() ? PeriodRelation::common(r.n, r.m) : r;
    };
    auto make = [&](CaseTag::Kind k, bool swap) {
        return CaseTag{k, swap ? b : a, swap ? a : b, swap ? swapped_rel(rel) : rel, swap};
    };
    const bool equal = std::isfinite(pa) && std::isfinite(pb) && std::abs(pa - pb) <= 1e-12 * pa;
    if (!equal) {
        bool swap = pb < pa;
        const MarginalSpectrum& f = swap ? b : a;
        const MarginalSpectrum& g = swap ? a : b;
        if (!f.has_counting_form())
            throw UnsupportedCase("the marginal with the smaller exponent needs a counting-side form (phi, s)",
                                  "counting form of the dominant marginal");
        if (!root_sum_converges(g, f.exponent()))
            throw UnsupportedCase("sum of lambda^{1/p} over the faster marginal diverges", "summable root series");
        return make(CaseTag::Kind::DominantExponent, swap);
    }
    if (!a.has_counting_form() || !b.has_counting_form())
        throw UnsupportedCase("equal exponents need counting-side forms for both marginals",
                              "counting forms (phi, s) for both marginals");
    const bool ca = a.phi().integral_converges(), cb = b.phi().integral_converges();
    if (!ca && !cb)
        return make(rel.is_common() ? CaseTag::Kind::EqualDivergentCommon : CaseTag::Kind::EqualDivergentIncomm,
                    false);
    if (ca && cb) {
        if (!tail_product_bound(a.phi(), b.phi()).converges || !tail_product_bound(b.phi(), a.phi()).converges)
            throw UnsupportedCase("integrability of phi * m_psi fails", "tail integrability in both orders");
        return make(CaseTag::Kind::BothConvergent, false);
    }
    bool swap = !ca;  // convergent marginal first
    const MarginalSpectrum& f = swap ? b : a;
    const MarginalSpectrum& g = swap ? a : b;
    if (!tail_product_bound(f.phi(), g.phi()).converges)
        throw UnsupportedCase("integral of phi * m_psi diverges", "tail integrability of (phi, phi~)");
    if (!rel.is_common())
        throw UnsupportedCase("one-convergent case needs a common period of s and s~", "common period");
    return make(CaseTag::Kind::OneConvergent, swap);
}

enum class MellinMode { Numeric, ClosedForm };

struct PredictSettings {
    QuadratureSettings quad{};
    double series_tol = 1e-6;
    MellinMode mellin = MellinMode::Numeric;
    std::size_t grid = 4096;
};

struct AsymptoticPrediction {
    explicit AsymptoticPrediction(CaseTag t) : tag(std::move(t)) {}

    CaseTag tag;
    double p = 2.0;
    std::optional<SampledPeriodicFn> s_star, s_star_tilde, s_otimes;
    std::optional<double> c_frak;
    std::function<double(double)> svf_part;  // phi*phi~, or h_{phi~,phi}; argument 1/t
    std::string form;

    /// Predicted count at t.
    std::function<double(double)> evaluator;
    double operator()(double t) const { return evaluator(t); }
    /// Single dominant term, where the case has one (phi~ s~* for OneConvergent).
    std::function<double(double)> leading;
};

inline AsymptoticPrediction predict(const CaseTag& tag, const PredictSettings& ps = {}) {
    AsymptoticPrediction pr(tag);
    const auto& A = tag.first;
    const auto& B = tag.second;
    const double p = A.exponent();
    pr.p = p;
    auto mellin_fn = [&]() -> std::function<double(double)> {
        const SlowlyVaryingFn f = A.phi(), g = B.phi();
        if (ps.mellin == MellinMode::ClosedForm) {
            auto cf = log_case_convolution(f.kappa(), g.kappa());
            double coef = f.coefficient() * g.coefficient();
            return [cf, coef](double tau) { return coef * cf(tau); };
        }
        auto q = ps.quad;
        return [f, g, q](double tau) { return mellin_convolve(f, g, tau, q); };
    };
    switch (tag.kind) {
        case CaseTag::Kind::DominantExponent: {
            const SlowlyVaryingFn phi = A.phi();
            auto ss = s_star_series(A.s(), B, p, ps.series_tol, ps.grid);
            pr.s_star = ss.fn;
            auto sf = *pr.s_star;
            pr.evaluator = [phi, sf, p](double t) {
                double tau = -std::log(t);
                return phi.at_log(tau) * sf(tau) * std::exp(tau / p);
            };
            pr.form = "phi(1/t) s*(ln 1/t) t^{-1/p}";
            break;
        }
        case CaseTag::Kind::EqualDivergentCommon: {
            pr.s_otimes = s_otimes(A.s(), B.s(), tag.relation, ps.grid);
            pr.svf_part = mellin_fn();
            auto so = *pr.s_otimes;
            auto m = pr.svf_part;
            pr.evaluator = [so, m, p](double t) {
                double tau = -std::log(t);
                return m(1.0 / t) * so(tau) * std::exp(tau / p);
            };
            pr.form = "(phi*phi~)(1/t) s_otimes(ln 1/t) t^{-1/p}";
            break;
        }
        case CaseTag::Kind::EqualDivergentIncomm: {
            if (!std::isfinite(A.phi().log_derivative_bound()) || !std::isfinite(B.phi().log_derivative_bound()))
                throw UnsupportedCase("averaged constant form needs |s ln s phi'/phi| bounded",
                                      "bounded logarithmic derivative of both SVFs");
            pr.c_frak = c_frak(A.s(), B.s(), p);
            pr.svf_part = mellin_fn();
            double c = *pr.c_frak;
            auto m = pr.svf_part;
            pr.evaluator = [c, m, p](double t) { return c * m(1.0 / t) * std::pow(t, -1.0 / p); };
            pr.form = "C (phi*phi~)(1/t) t^{-1/p}";
            break;
        }
        case CaseTag::Kind::OneConvergent: {
            pr.s_otimes = s_otimes(A.s(), B.s(), tag.relation, ps.grid);
            pr.s_star_tilde = s_star_series(B.s(), A, p, ps.series_tol, ps.grid).fn;
            const SlowlyVaryingFn f = A.phi(), g = B.phi();
            auto q = ps.quad;
            pr.svf_part = [f, g, q](double tau) { return h_half(g, f, tau, q); };
            auto so = *pr.s_otimes;
            auto sst = *pr.s_star_tilde;
            auto h = pr.svf_part;
            pr.evaluator = [so, sst, h, g, p](double t) {
                double tau = -std::log(t);
                return (h(1.0 / t) * so(tau) + g.at_log(tau) * sst(tau)) * std::exp(tau / p);
            };
            pr.leading = [sst, g, p](double t) {
                double tau = -std::log(t);
                return g.at_log(tau) * sst(tau) * std::exp(tau / p);
            };
            pr.form = "[h(1/t) s_otimes + phi~(1/t) s~*] t^{-1/p}";
            break;
        }
        case CaseTag::Kind::BothConvergent: {
            pr.s_star = s_star_series(A.s(), B, p, ps.series_tol, ps.grid).fn;
            pr.s_star_tilde = s_star_series(B.s(), A, p, ps.series_tol, ps.grid).fn;
            const SlowlyVaryingFn f = A.phi(), g = B.phi();
            auto s1 = *pr.s_star;
            auto s2 = *pr.s_star_tilde;
            pr.evaluator = [f, g, s1, s2, p](double t) {
                double tau = -std::log(t);
                return (f.at_log(tau) * s1(tau) + g.at_log(tau) * s2(tau)) * std::exp(tau / p);
            };
            pr.form = "[phi(1/t) s* + phi~(1/t) s~*] t^{-1/p}";
            break;
        }
    }
    if (!pr.leading) pr.leading = pr.evaluator;
    return pr;
}

/// Counting-side model with the predicted asymptotics, where the prediction has the form phi s.
inline MarginalSpectrum prediction_as_model(const AsymptoticPrediction& pr, std::int64_t n_max = MarginalSpectrum::kDefaultNMax) {
    const auto& A = pr.tag.first;
    const auto& B = pr.tag.second;
    auto cf = log_case_convolution(A.phi().kappa(), B.phi().kappa());
    auto svf = cf.as_svf();
    if (!svf) throw UnsupportedCase("leading SVF of the prediction is outside the closed family", "family SVF");
    auto phi = SlowlyVaryingFn::normal_form(svf->coefficient() * A.phi().coefficient() * B.phi().coefficient(),
                                            svf->kappa());
    switch (pr.tag.kind) {
        case CaseTag::Kind::EqualDivergentCommon:
            return MarginalSpectrum::by_counting(pr.p, phi, rho_from_samples(*pr.s_otimes, pr.p), n_max);
        case CaseTag::Kind::EqualDivergentIncomm:
            return MarginalSpectrum::by_counting(pr.p, phi, PeriodicComponent::constant(*pr.c_frak, pr.p), n_max);
        case CaseTag::Kind::DominantExponent:
            return MarginalSpectrum::by_counting(pr.p, A.phi(), rho_from_samples(*pr.s_star, pr.p), n_max);
        default:
            throw UnsupportedCase("two-term predictions have no single (phi, s) form", "single-term prediction");
    }
}

// ---------------------------------------------------------------------------
// diagnostics
// ---------------------------------------------------------------------------

struct SandwichComponents {
    double S = 0.0;
    double S_tilde = 0.0;        // upper variant (tau = alpha_+/t)
    double central = 0.0;        // upper variant
    double S_tilde_lower = 0.0;  // tau = alpha_-/t
    double central_lower = 0.0;
    double upper = 0.0;  // alpha_+ t^{-1/p} (S + S~ + central)
    double lower = 0.0;
};

/**
 * Sandwich components for two counting-side models with equal exponents.
 * The boundary term of S~ enters with a minus sign, which is what
 * integration by parts of the inner Stieltjes integral produces.
 */
inline SandwichComponents sandwich_components(const MarginalSpectrum& a, const MarginalSpectrum& b, double eps,
                                              double alpha_plus, double alpha_minus, double t,
                                              const QuadratureSettings& qs = {}) {
    if (!(eps > 0 && eps < 1)) throw PreconditionError("sandwich_components needs 0 < eps < 1");
    const double p = a.exponent();
    if (std::abs(b.exponent() - p) > 1e-12 * p) throw PreconditionError("equal exponents required");
    const auto& phi = a.phi();
    const auto& s = a.s();
    const auto& phit = b.phi();
    const auto& st = b.s();
    const double lt = -std::log(t);
    SandwichComponents r;
    double sum_b = 0.0;
    for (std::int64_t k = 1; k <= b.n_max(); ++k) {
        if (auto len = b.length(); len && k > *len) break;
        double l = b.eigenvalue(k);
        if (l < eps) break;
        sum_b += s.s(lt + std::log(l)) * std::pow(l, 1.0 / p);
    }
    r.S = phi.at_log(lt) * sum_b;
    auto s_tilde = [&](double tau) {
        double ltau = std::log(tau), sum = 0.0;
        for (std::int64_t k = 1; k <= a.n_max(); ++k) {
            if (auto len = a.length(); len && k > *len) break;
            double l = a.eigenvalue(k);
            if (l < eps) break;
            sum += st.s(ltau + std::log(l)) * std::pow(l, 1.0 / p);
        }
        double boundary = phi.at_log(-std::log(eps)) * s.s(-std::log(eps)) * st.s(ltau + std::log(eps));
        return phit.at_log(lt) * (sum - boundary);
    };
    auto central = [&](double tau, double lower_alpha) {
        double L = std::log(tau);
        double x0 = std::log(lower_alpha / eps), x1 = std::log(eps * tau);
        if (!(x1 > x0)) return 0.0;
        return almost_mellin_range(phi, s, phit, st, L, x0, x1, qs);
    };
    const double tau_p = alpha_plus / t, tau_m = alpha_minus / t;
    r.S_tilde = s_tilde(tau_p);
    r.central = central(tau_p, alpha_minus);
    r.S_tilde_lower = s_tilde(tau_m);
    r.central_lower = central(tau_m, alpha_plus);
    const double w = std::pow(t, -1.0 / p);
    r.upper = alpha_plus * w * (r.S + r.S_tilde + r.central);
    r.lower = alpha_minus * w * (r.S + r.S_tilde_lower + r.central_lower);
    return r;
}

struct REstimate {
    std::vector<double> log_tau;
    std::vector<double> r;
    std::vector<double> drift_T;   // r(x + T) - r(x)
    std::vector<double> drift_Tt;  // r(x + T~) - r(x)
    double min = 0.0, max = 0.0, mean = 0.0;
};

/// r(ln tau) = almost Mellin (full) / Mellin convolution, with period drifts.
inline REstimate estimate_r(const MarginalSpectrum& a, const MarginalSpectrum& b, const std::vector<double>& tau_grid,
                            const QuadratureSettings& qs = {}) {
    const auto& phi = a.phi();
    const auto& s = a.s();
    const auto& phit = b.phi();
    const auto& st = b.s();
    auto r_at = [&](double x) {
        double tau = std::exp(x);
        return almost_mellin(phi, s, phit, st, tau, MellinSplit::Full, qs) / mellin_convolve(phi, phit, tau, qs);
    };
    REstimate out;
    const double T = s.period(), Tt = st.period();
    struct Row {
        double x, r, dT, dTt;
    };
    auto rows = parallel_map<Row>(tau_grid.size(), [&](std::size_t i) {
        double x = std::log(tau_grid[i]);
        double v = r_at(x);
        return Row{x, v, r_at(x + T) - v, r_at(x + Tt) - v};
    });
    double sum = 0.0;
    out.min = std::numeric_limits<double>::infinity();
    out.max = -out.min;
    for (const auto& row : rows) {
        out.log_tau.push_back(row.x);
        out.r.push_back(row.r);
        out.drift_T.push_back(row.dT);
        out.drift_Tt.push_back(row.dTt);
        out.min = std::min(out.min, row.r);
        out.max = std::max(out.max, row.r);
        sum += row.r;
    }
    if (!rows.empty()) out.mean = sum / static_cast<double>(rows.size());
    return out;
}

}  // namespace tensasym

#endif
