#ifndef TENSASYM_SMALLDEV_HPP
#define TENSASYM_SMALLDEV_HPP

#include <boost/random/normal_distribution.hpp>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "common.hpp"
#include "rng.hpp"
#include "spectrum.hpp"
#include "tensor.hpp"

namespace tensasym {

/**
 * Eigenvalues of a Gaussian covariance, for the L2 small-ball functional
 *   L(u) = -1/2 sum_n ln(1 + 2 u lambda_n).
 *
 * The first n0 = min(n_cut, length) eigenvalues are summed directly. The rest
 * is replaced by the integral over [n0 + 1/2, inf) of a continuous
 * interpolant (midpoint-rule comparison). For a monotone summand the error of
 * that comparison is at most |f(n0 + 1/2)|, which is reported as the tail bound.
 */
class SmallDevModel {
public:
    enum class TailKind { None, EigenFormula, CountingModel, PowerExtrapolation };

    static constexpr std::int64_t kDefaultNCut = 100000;

    static SmallDevModel from_spectrum(const MarginalSpectrum& s, std::int64_t n_cut = kDefaultNCut) {
        SmallDevModel m;
        m.spectrum_ = s;
        if (s.is_explicit()) {
            m.kind_ = TailKind::None;
            m.p_ = std::numeric_limits<double>::infinity();
            n_cut = std::min<std::int64_t>(n_cut, *s.length());
        } else {
            m.p_ = s.exponent();
            if (!(m.p_ > 1.0)) throw PreconditionError("small deviations need a finite trace (exponent p > 1)");
            m.kind_ = s.is_by_eigenvalue() ? TailKind::EigenFormula : TailKind::CountingModel;
            if (s.is_by_counting() && static_cast<double>(n_cut) + 0.5 <= s.prefix_max())
                n_cut = static_cast<std::int64_t>(std::ceil(s.prefix_max()));
        }
        m.fill(n_cut, [&](std::int64_t n) { return s.eigenvalue(n); });
        return m;
    }

    /// Eigenvalues given as a callable, extrapolated beyond n_cut as lambda_{n_cut} (x/n_cut)^{-p}.
    /// The tail bound adds the spread against the same extrapolation with the
    /// exponent measured on the last octave of the head.
    static SmallDevModel from_function(const std::function<double(std::int64_t)>& f, double p, std::int64_t n_cut) {
        if (!(p > 1.0)) throw PreconditionError("small deviations need p > 1");
        SmallDevModel m;
        m.kind_ = TailKind::PowerExtrapolation;
        m.p_ = p;
        m.fill(n_cut, f);
        const auto& l = *m.lam_;
        m.p_local_ = p;
        if (l.size() >= 16) {
            double q = std::log(l[l.size() / 2 - 1] / l.back()) / std::log(static_cast<double>(l.size()) / static_cast<double>(l.size() / 2));
            if (q > 1.0) m.p_local_ = q;
        }
        return m;
    }

    /// Tensor product spectrum, leading eigenvalues enumerated exactly.
    static SmallDevModel from_tensor(const std::vector<MarginalSpectrum>& specs, double p, std::int64_t n_cut) {
        auto top = largest_products(specs, n_cut);
        auto shared = std::make_shared<std::vector<double>>(std::move(top));
        return from_function([shared](std::int64_t n) { return (*shared)[static_cast<std::size_t>(n - 1)]; }, p,
                             static_cast<std::int64_t>(shared->size()));
    }

    double p() const { return p_; }
    std::int64_t n_direct() const { return static_cast<std::int64_t>(lam_->size()); }
    TailKind tail_kind() const { return kind_; }
    const std::vector<double>& head() const { return *lam_; }

    struct Value {
        double value = 0.0;
        double tail_bound = 0.0;
    };

    /// sum_n f(lambda_n), f given with its derivative (needed for counting models).
    template <class G, class DG>
    Value sum(G&& g, DG&& dg) const {
        Value v;
        for (double l : *lam_) v.value += g(l);
        if (kind_ == TailKind::None) return v;
        const double n0 = static_cast<double>(lam_->size());
        const double tail = tail_integral(g, dg, p_);
        v.value += tail;
        v.tail_bound = std::abs(g(interp(n0 + 0.5, p_)));
        if (kind_ == TailKind::PowerExtrapolation && p_local_ != p_)
            v.tail_bound += std::abs(tail_integral(g, dg, p_local_) - tail);
        return v;
    }

    Value trace() const {
        return sum([](double l) { return l; }, [](double) { return 1.0; });
    }

private:
    TailKind kind_ = TailKind::None;
    double p_ = 2.0;
    double p_local_ = 2.0;  // decay exponent seen over the last octave of the head
    std::optional<MarginalSpectrum> spectrum_;
    std::shared_ptr<std::vector<double>> lam_ = std::make_shared<std::vector<double>>();

    template <class F>
    void fill(std::int64_t n_cut, F&& f) {
        if (n_cut < 1) throw PreconditionError("n_cut must be >= 1");
        auto v = parallel_map<double>(static_cast<std::size_t>(n_cut),
                                      [&](std::size_t i) { return f(static_cast<std::int64_t>(i) + 1); });
        for (std::size_t i = 1; i < v.size(); ++i)
            if (v[i] > v[i - 1]) throw PreconditionError("eigenvalues must be nonincreasing");
        if (!v.empty() && !(v.back() > 0)) throw PreconditionError("eigenvalues must be positive");
        lam_ = std::make_shared<std::vector<double>>(std::move(v));
    }

    // continuous lambda(x) for x >= n0
    double interp(double x, double pw) const {
        const double n0 = static_cast<double>(lam_->size());
        switch (kind_) {
            case TailKind::EigenFormula: return spectrum_->eigen_at(x);
            case TailKind::CountingModel: return std::exp(-spectrum_->crossing(x));
            case TailKind::PowerExtrapolation: return lam_->back() * std::pow(x / n0, -pw);
            case TailKind::None: break;
        }
        return 0.0;
    }

    template <class G, class DG>
    double tail_integral(G& g, DG& dg, double pw) const {
        constexpr double kPanel = 0.02;
        constexpr int kMaxPanels = 400000;
        const double x0 = static_cast<double>(lam_->size()) + 0.5;
        double acc = 0.0;
        if (kind_ == TailKind::CountingModel) {
            // int g(e^{-tau}) dF(tau), by parts
            const double tau0 = spectrum_->crossing(x0);
            const auto& sp = *spectrum_;
            auto integrand = [&](double tau) {
                double l = std::exp(-tau);
                return sp.counting_fn(tau) * l * dg(l);
            };
            acc = -g(std::exp(-tau0)) * x0;
            double integral = 0.0;
            for (int k = 0; k < kMaxPanels; ++k) {
                double a = tau0 + k * kPanel;
                double part = composite_gauss(integrand, a, a + kPanel, 1);
                integral += part;
                if (k > 16 && std::abs(part) <= 1e-18 * std::abs(integral)) break;
                if (part == 0.0 && integral == 0.0 && k > 16) break;
            }
            return acc + integral;
        }
        // int g(lambda(e^y)) e^y dy
        const double y0 = std::log(x0);
        auto integrand = [&](double y) {
            double x = std::exp(y);
            return g(interp(x, pw)) * x;
        };
        for (int k = 0; k < kMaxPanels; ++k) {
            double a = y0 + k * kPanel;
            double part = composite_gauss(integrand, a, a + kPanel, 1);
            acc += part;
            if (k > 16 && std::abs(part) <= 1e-18 * std::abs(acc)) break;
            if (part == 0.0 && acc == 0.0 && k > 16) break;
        }
        return acc;
    }
};

struct SmallDevSettings {
    double accuracy = 1e-3;  // tail bound relative to |value|
};

namespace detail {
inline double checked(const SmallDevModel::Value& v, const char* what, const SmallDevSettings& st) {
    if (v.tail_bound > st.accuracy * std::abs(v.value) && v.tail_bound > 1e-300)
        throw AccuracyError(std::string(what) + ": tail bound above tolerance, raise n_cut", v.value, v.tail_bound);
    return v.value;
}
}  // namespace detail

inline SmallDevModel::Value L_value(const SmallDevModel& m, double u) {
    if (!(u >= 0)) throw DomainError("L needs u >= 0");
    return m.sum([u](double l) { return -0.5 * std::log1p(2.0 * u * l); },
                 [u](double l) { return -u / (1.0 + 2.0 * u * l); });
}
inline SmallDevModel::Value L_prime_value(const SmallDevModel& m, double u) {
    if (!(u >= 0)) throw DomainError("L' needs u >= 0");
    return m.sum([u](double l) { return -l / (1.0 + 2.0 * u * l); },
                 [u](double l) {
                     double d = 1.0 + 2.0 * u * l;
                     return -1.0 / (d * d);
                 });
}
inline SmallDevModel::Value L_dprime_value(const SmallDevModel& m, double u) {
    if (!(u >= 0)) throw DomainError("L'' needs u >= 0");
    return m.sum(
        [u](double l) {
            double d = 1.0 + 2.0 * u * l;
            return 2.0 * l * l / (d * d);
        },
        [u](double l) {
            double d = 1.0 + 2.0 * u * l;
            return 4.0 * l / (d * d * d);
        });
}

inline double L(const SmallDevModel& m, double u, const SmallDevSettings& st = {}) {
    return detail::checked(L_value(m, u), "L", st);
}
inline double L_prime(const SmallDevModel& m, double u, const SmallDevSettings& st = {}) {
    return detail::checked(L_prime_value(m, u), "L'", st);
}
inline double L_dprime(const SmallDevModel& m, double u, const SmallDevSettings& st = {}) {
    return detail::checked(L_dprime_value(m, u), "L''", st);
}

/// Root of L'(u) + r = 0; bisection on the bit patterns of u.
inline double solve_u(const SmallDevModel& m, double r) {
    const double tr = m.trace().value;
    if (!(r > 0 && r < tr)) throw PreconditionError("solve_u needs 0 < r < trace = " + std::to_string(tr));
    auto h = [&](double u) { return L_prime_value(m, u).value + r; };
    double hi = 1.0 / r;
    while (h(hi) <= 0) {
        hi *= 4.0;
        if (!std::isfinite(hi)) throw AccuracyError("solve_u: no bracket", hi, 0.0);
    }
    std::uint64_t blo = 0, bhi = double_bits(hi);
    while (bhi - blo > 1) {
        std::uint64_t mid = blo + (bhi - blo) / 2;
        if (h(bits_double(mid)) <= 0)
            blo = mid;
        else
            bhi = mid;
    }
    double ulo = bits_double(blo), uhi = bits_double(bhi);
    return std::abs(h(ulo)) <= std::abs(h(uhi)) ? ulo : uhi;
}

struct SmallBallResult {
    double ln_p = 0.0;     // L + u r - 1/2 ln(2 pi u^2 L'')
    double leading = 0.0;  // L + u r
    double u = 0.0;
    double u2_lpp = 0.0;
    bool in_regime = true;
    double tail_bound = 0.0;
    std::string tag;  // empty, or "outside asymptotic regime"
};

inline constexpr double kRegimeThreshold = 10.0;

inline SmallBallResult log_small_ball(const SmallDevModel& m, double eps, const SmallDevSettings& st = {}) {
    if (!(eps > 0)) throw DomainError("log_small_ball needs eps > 0");
    const double r = eps * eps;
    SmallBallResult out;
    out.u = solve_u(m, r);
    auto Lv = L_value(m, out.u);
    auto Lpp = L_dprime_value(m, out.u);
    double Lval = detail::checked(Lv, "L", st);
    double Lpp_val = detail::checked(Lpp, "L''", st);
    out.tail_bound = Lv.tail_bound;
    out.leading = Lval + out.u * r;
    out.u2_lpp = out.u * out.u * Lpp_val;
    out.ln_p = out.leading - 0.5 * std::log(2.0 * kPi * out.u2_lpp);
    out.in_regime = out.u2_lpp >= kRegimeThreshold;
    if (!out.in_regime) out.tag = "outside asymptotic regime";
    return out;
}

struct McResult {
    double p_hat = 0.0;
    double ci_lo = 0.0, ci_hi = 0.0;
    std::int64_t successes = 0, samples = 0;
    bool one_sided = false;  // zero successes: [0, ci_hi] is a one-sided 95% bound
    double tail_shift = 0.0;
};

/// Wilson score interval at 95%.
inline std::pair<double, double> wilson_interval(std::int64_t k, std::int64_t n) {
    constexpr double z = 1.959963984540054;
    const double nn = static_cast<double>(n), ph = static_cast<double>(k) / nn;
    const double den = 1.0 + z * z / nn;
    const double centre = (ph + z * z / (2.0 * nn)) / den;
    const double half = z * std::sqrt(ph * (1.0 - ph) / nn + z * z / (4.0 * nn * nn)) / den;
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

/**
 * P{ sum_{n <= n_cut} lambda_n xi_n^2 + tail <= eps^2 }, the tail replaced by
 * its mean. Batch b draws from Philox stream (seed, b), so results depend only
 * on (seed, n_samples, batch).
 */
inline McResult mc_small_ball(const SmallDevModel& m, double eps, std::int64_t n_samples, std::uint64_t seed,
                              std::int64_t batch = 1 << 16) {
    if (n_samples < 10000) throw PreconditionError("mc_small_ball needs at least 1e4 samples");
    if (!(eps > 0)) throw DomainError("mc_small_ball needs eps > 0");
    const auto& lam = m.head();
    double head_sum = 0.0;
    for (double l : lam) head_sum += l;
    McResult res;
    res.samples = n_samples;
    res.tail_shift = std::max(0.0, m.trace().value - head_sum);
    const double thr = eps * eps - res.tail_shift;
    const std::int64_t nb = (n_samples + batch - 1) / batch;
    auto counts = parallel_map<std::int64_t>(static_cast<std::size_t>(nb), [&](std::size_t b) {
        if (!(thr > 0)) return std::int64_t{0};
        Philox4x32 eng(seed, b);
        boost::random::normal_distribution<double> nd;
        std::int64_t lo = static_cast<std::int64_t>(b) * batch;
        std::int64_t cnt = std::min<std::int64_t>(batch, n_samples - lo);
        std::int64_t hits = 0;
        for (std::int64_t i = 0; i < cnt; ++i) {
            double acc = 0.0;
            bool ok = true;
            for (double l : lam) {
                double x = nd(eng);
                acc += l * x * x;
                if (acc > thr) {
                    ok = false;
                    break;
                }
            }
            hits += ok;
        }
        return hits;
    });
    for (auto c : counts) res.successes += c;
    res.p_hat = static_cast<double>(res.successes) / static_cast<double>(n_samples);
    if (res.successes == 0) {
        res.one_sided = true;
        res.ci_lo = 0.0;
        res.ci_hi = 1.0 - std::pow(0.05, 1.0 / static_cast<double>(n_samples));
    } else {
        std::tie(res.ci_lo, res.ci_hi) = wilson_interval(res.successes, n_samples);
    }
    return res;
}

struct LineFit {
    double slope = 0.0, intercept = 0.0;
};

inline LineFit fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw PreconditionError("fit needs at least two points");
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i] / n;
        my += y[i] / n;
    }
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    return f;
}

struct ZetaReport {
    std::vector<double> x;     // ln(1/eps), increasing
    std::vector<double> zeta;
    double period = 0.0;       // T (p - 1) / (2p)
    double mean = 0.0;
    double residual = 0.0;     // sup |zeta(x + period) - zeta(x)| / mean over the last decade
    std::vector<double> ln_p;  // ln P at each grid point
};

/// zeta = -ln P eps^{2/(p-1)} / ln^kappa(1/eps), and its periodicity defect.
inline ZetaReport extract_zeta(const SmallDevModel& m, double p, double T, double kappa,
                               const std::vector<double>& eps_grid, const SmallDevSettings& st = {}) {
    ZetaReport rep;
    rep.period = T * (p - 1.0) / (2.0 * p);
    std::vector<double> eps = eps_grid;
    std::sort(eps.begin(), eps.end(), std::greater<>());
    auto lp = parallel_map<double>(eps.size(), [&](std::size_t i) { return log_small_ball(m, eps[i], st).ln_p; });
    for (std::size_t i = 0; i < eps.size(); ++i) {
        double x = -std::log(eps[i]);
        rep.x.push_back(x);
        rep.ln_p.push_back(lp[i]);
        rep.zeta.push_back(-lp[i] * std::pow(eps[i], 2.0 / (p - 1.0)) / std::pow(x, kappa));
    }
    if (rep.x.empty()) return rep;
    double s = 0.0;
    for (double z : rep.zeta) s += z;
    rep.mean = s / static_cast<double>(rep.zeta.size());
    auto at = [&](double x) {
        auto it = std::upper_bound(rep.x.begin(), rep.x.end(), x);
        if (it == rep.x.begin()) return rep.zeta.front();
        if (it == rep.x.end()) return rep.zeta.back();
        std::size_t j = static_cast<std::size_t>(it - rep.x.begin());
        double w = (x - rep.x[j - 1]) / (rep.x[j] - rep.x[j - 1]);
        return rep.zeta[j - 1] + w * (rep.zeta[j] - rep.zeta[j - 1]);
    };
    const double xmax = rep.x.back();
    const double from = xmax - std::log(10.0) - rep.period;
    double local_mean = 0.0, cnt = 0.0;
    for (std::size_t i = 0; i < rep.x.size(); ++i)
        if (rep.x[i] >= from) {
            local_mean += rep.zeta[i];
            cnt += 1.0;
        }
    local_mean /= std::max(cnt, 1.0);
    for (std::size_t i = 0; i < rep.x.size(); ++i) {
        if (rep.x[i] < from || rep.x[i] + rep.period > xmax) continue;
        rep.residual = std::max(rep.residual, std::abs(at(rep.x[i] + rep.period) - rep.zeta[i]) / local_mean);
    }
    return rep;
}

}  // namespace tensasym

#endif
