#ifndef TENSASYM_SPECTRUM_HPP
#define TENSASYM_SPECTRUM_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "common.hpp"
#include "periodic.hpp"
#include "svf.hpp"

namespace tensasym {

/**
 * Nonincreasing positive eigenvalue sequence: an explicit list, the
 * eigenvalue-side model lambda_n = psi(n) s(ln n) / n^p, or the
 * counting-side model N_as(t) = phi(1/t) s(ln 1/t) t^{-1/p}.
 *
 * The counting-side model is inverted with the first-crossing rule
 * tau_n = inf{tau >= 0 : F(tau) >= n}, F(tau) = phi(e^tau) rho(tau),
 * lambda_n = e^{-tau_n}, which stays well defined where F is not monotone.
 */
class MarginalSpectrum {
public:
    struct CountingForm {
        SlowlyVaryingFn phi;
        PeriodicComponent s;
    };
    struct Explicit {
        std::vector<double> lambdas;
    };
    struct ByEigenvalue {
        double p = 2.0;
        SlowlyVaryingFn psi;
        PeriodicComponent s;
        std::optional<CountingForm> counting_form;  // user-declared counterpart, never derived
    };
    struct ByCounting {
        double p = 2.0;
        SlowlyVaryingFn phi;
        PeriodicComponent s;
    };
    using Variant = std::variant<Explicit, ByEigenvalue, ByCounting>;

    static constexpr std::int64_t kDefaultNMax = 1'000'000'000;

    explicit MarginalSpectrum(Variant v, std::int64_t n_max = kDefaultNMax)
        : st_(std::make_shared<State>(std::move(v), n_max)) {}

    static MarginalSpectrum explicit_list(std::vector<double> l) { return MarginalSpectrum(Explicit{std::move(l)}); }
    static MarginalSpectrum by_eigenvalue(double p, SlowlyVaryingFn psi, PeriodicComponent s,
                                          std::int64_t n_max = kDefaultNMax) {
        return MarginalSpectrum(ByEigenvalue{p, std::move(psi), std::move(s), std::nullopt}, n_max);
    }
    static MarginalSpectrum by_counting(double p, SlowlyVaryingFn phi, PeriodicComponent s,
                                        std::int64_t n_max = kDefaultNMax) {
        return MarginalSpectrum(ByCounting{p, std::move(phi), std::move(s)}, n_max);
    }
    /// lambda_n = n^{-p}
    static MarginalSpectrum power(double p, double scale = 1.0, std::int64_t n_max = kDefaultNMax) {
        return by_eigenvalue(p, SlowlyVaryingFn::constant(scale), PeriodicComponent::constant(1.0, p), n_max);
    }

    const Variant& variant() const { return st_->v; }
    bool is_explicit() const { return std::holds_alternative<Explicit>(st_->v); }
    bool is_by_eigenvalue() const { return std::holds_alternative<ByEigenvalue>(st_->v); }
    bool is_by_counting() const { return std::holds_alternative<ByCounting>(st_->v); }
    bool is_model() const { return !is_explicit(); }
    std::int64_t n_max() const { return st_->n_max; }
    const void* identity() const { return st_.get(); }

    /// +inf for explicit lists.
    double exponent() const {
        if (auto e = std::get_if<ByEigenvalue>(&st_->v)) return e->p;
        if (auto c = std::get_if<ByCounting>(&st_->v)) return c->p;
        return std::numeric_limits<double>::infinity();
    }
    std::optional<std::int64_t> length() const {
        if (auto e = std::get_if<Explicit>(&st_->v)) return static_cast<std::int64_t>(e->lambdas.size());
        return std::nullopt;
    }

    bool has_counting_form() const {
        if (is_by_counting()) return true;
        if (auto e = std::get_if<ByEigenvalue>(&st_->v)) return e->counting_form.has_value();
        return false;
    }
    const SlowlyVaryingFn& phi() const {
        if (auto c = std::get_if<ByCounting>(&st_->v)) return c->phi;
        if (auto e = std::get_if<ByEigenvalue>(&st_->v); e && e->counting_form) return e->counting_form->phi;
        throw UnsupportedCase("spectrum has no counting-side form", "counting form (phi, s) declared");
    }
    const PeriodicComponent& s() const {
        if (auto c = std::get_if<ByCounting>(&st_->v)) return c->s;
        if (auto e = std::get_if<ByEigenvalue>(&st_->v); e && e->counting_form) return e->counting_form->s;
        throw UnsupportedCase("spectrum has no counting-side form", "counting form (phi, s) declared");
    }

    double lambda1() const { return eigenvalue(1); }

    double eigenvalue(std::int64_t n) const {
        if (n < 1) throw RangeError("eigenvalue index must be >= 1");
        const auto& v = st_->v;
        if (auto e = std::get_if<Explicit>(&v)) {
            if (n > static_cast<std::int64_t>(e->lambdas.size()))
                throw RangeError("eigenvalue index " + std::to_string(n) + " beyond explicit list of length " +
                                 std::to_string(e->lambdas.size()));
            return e->lambdas[static_cast<std::size_t>(n - 1)];
        }
        if (n > st_->n_max)
            throw RangeError("eigenvalue index " + std::to_string(n) + " beyond validated range n_max = " +
                             std::to_string(st_->n_max));
        if (auto e = std::get_if<ByEigenvalue>(&v)) return eigen_formula(*e, static_cast<double>(n));
        return std::exp(-st_->crossing(static_cast<double>(n)));
    }

    /// #{n : lambda_n > t}
    std::int64_t counting(double t) const { return count_products_above(1.0, t); }

    /// #{n : lambda_n * scale > t}, the product evaluated exactly as written.
    std::int64_t count_products_above(double scale, double t) const {
        if (!(t > 0)) throw DomainError("counting needs t > 0");
        if (!(scale > 0)) throw DomainError("counting needs a positive scale");
        const auto& v = st_->v;
        if (auto e = std::get_if<Explicit>(&v)) {
            auto it = std::partition_point(e->lambdas.begin(), e->lambdas.end(),
                                           [&](double l) { return l * scale > t; });
            return static_cast<std::int64_t>(it - e->lambdas.begin());
        }
        if (auto e = std::get_if<ByEigenvalue>(&v)) {
            auto above = [&](std::int64_t n) { return eigen_formula(*e, static_cast<double>(n)) * scale > t; };
            if (!above(1)) return 0;
            if (above(st_->n_max))
                throw RangeError("t = " + fmt(t / scale) + " below the validated range of the eigenvalue model");
            std::int64_t lo = 1, hi = st_->n_max;  // above(lo), !above(hi)
            while (hi - lo > 1) {
                std::int64_t mid = lo + (hi - lo) / 2;
                (above(mid) ? lo : hi) = mid;
            }
            return lo;
        }
        // counting-side model
        double tau = std::log(scale / t);
        if (tau <= 0) return 0;  // lambda_1 <= 1 and the count is strict
        double m = st_->running_max(tau);
        if (m > static_cast<double>(st_->n_max) + 1)
            throw RangeError("t = " + fmt(t / scale) + " below the validated range of the counting model");
        double c = std::floor(m);
        auto above = [&](std::int64_t n) { return n >= 1 && eigenvalue(n) * scale > t; };
        auto n = static_cast<std::int64_t>(c);
        if (m - c < 1e-6 || c + 1 - m < 1e-6) {
            n = std::min<std::int64_t>(n, st_->n_max);
            while (n >= 1 && !above(n)) --n;
            while (n < st_->n_max && above(n + 1)) ++n;
        }
        return n;
    }

    /// phi(1/t) s(ln 1/t) t^{-1/p}
    double n_as(double t) const {
        if (!(t > 0)) throw DomainError("n_as needs t > 0");
        if (!has_counting_form()) throw UnsupportedCase("n_as needs a counting-side form", "counting form declared");
        if (t > 1.0) throw DomainError("n_as needs t <= 1 so that phi(1/t) is defined");
        const double tau = -std::log(t);
        const auto& f = phi();
        const auto& sc = s();
        return f.at_log(tau) * sc.s(tau) * std::exp(tau / exponent());
    }

    // --- continuous interpolants used by tail corrections ---

    /// lambda(x) for real x >= 1 (eigenvalue-side model).
    double eigen_at(double x) const {
        auto e = std::get_if<ByEigenvalue>(&st_->v);
        if (!e) throw PreconditionError("eigen_at needs an eigenvalue-side model");
        return eigen_formula(*e, x);
    }
    /// F(tau) = phi(e^tau) rho(tau) (counting-side model).
    double counting_fn(double tau) const { return st_->F(tau); }
    /// Running maximum of F on [0, tau].
    double counting_envelope(double tau) const { return st_->running_max(tau); }
    /// First crossing of level x by F.
    double crossing(double x) const { return st_->crossing(x); }
    /// F is nondecreasing beyond this point.
    double monotone_from() const { return st_->tau_star; }
    /// max F on [0, monotone_from()].
    double prefix_max() const { return st_->f_star; }

private:
    struct State {
        Variant v;
        std::int64_t n_max;
        double tau_star = 0.0, f_star = 0.0, grid_h = 0.0;
        std::vector<double> grid_max;  // running max of F on the prefix grid

        State(Variant vv, std::int64_t nm) : v(std::move(vv)), n_max(nm) {
            if (n_max < 1) throw DomainError("n_max must be >= 1");
            std::visit([this](auto& x) { validate(x); }, v);
        }

        void validate(Explicit& e) {
            if (e.lambdas.empty()) throw DomainError("explicit spectrum must be nonempty");
            for (std::size_t i = 0; i < e.lambdas.size(); ++i) {
                if (!(e.lambdas[i] > 0) || !std::isfinite(e.lambdas[i]))
                    throw DomainError("explicit eigenvalues must be positive and finite");
                if (i && e.lambdas[i] > e.lambdas[i - 1]) throw DomainError("explicit eigenvalues must be nonincreasing");
            }
            n_max = static_cast<std::int64_t>(e.lambdas.size());
        }

        void validate(ByEigenvalue& e) {
            if (!(e.p > 1)) throw DomainError("model exponent p must exceed 1");
            // d ln(lambda)/d ln(n) = kappa/(1+y) + (ln s)'(y) - p
            double slope_bound = std::max(0.0, e.psi.kappa()) + max_log_slope(e.s) - e.p;
            if (slope_bound <= 0) return;
            auto lam = [&](double n) { return eigen_formula(e, n); };
            const std::int64_t dense = std::min<std::int64_t>(n_max, 200000);
            for (std::int64_t n = 1; n < dense; ++n)
                if (lam(static_cast<double>(n + 1)) > lam(static_cast<double>(n)))
                    throw DomainError("eigenvalue model increases at n = " + std::to_string(n));
            for (double g = static_cast<double>(dense); g < static_cast<double>(n_max); g *= 1.001) {
                auto n0 = static_cast<std::int64_t>(g);
                for (std::int64_t n = n0; n < std::min(n0 + 16, n_max); ++n)
                    if (lam(static_cast<double>(n + 1)) > lam(static_cast<double>(n)))
                        throw DomainError("eigenvalue model increases at n = " + std::to_string(n));
            }
        }

        static double max_log_slope(const PeriodicComponent& s) {
            if (s.is_constant()) return 0.0;
            if (auto c = std::get_if<PeriodicComponent::CosineS>(&s.family())) {
                double w = 2.0 * kPi / s.period();
                return std::abs(c->a) * w / std::sqrt(1.0 - c->a * c->a);
            }
            const auto& xs = s.knot_positions();
            const auto& ys = s.knot_values();
            double m = 0.0;
            for (std::size_t i = 0; i + 1 < xs.size(); ++i)
                m = std::max(m, (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]) / ys[i]);
            return m - 1.0 / s.exponent();
        }

        void validate(ByCounting& c) {
            if (!(c.p > 1)) throw DomainError("model exponent p must exceed 1");
            if (std::abs(c.s.exponent() - c.p) > 1e-12 * c.p)
                throw DomainError("periodic component exponent differs from the spectrum exponent");
            const double kappa = c.phi.kappa();
            const double delta = 0.99 * c.s.min_log_rho_slope();
            if (kappa >= 0) {
                tau_star = 0.0;
            } else if (delta > 0) {
                tau_star = std::max(0.0, -kappa / delta - 1.0);
            } else {
                throw DomainError("counting model with decreasing phi and flat rho is not eventually monotone");
            }
            f_star = F(0.0);
            if (tau_star > 0) {
                auto cells = static_cast<std::size_t>(
                    std::max(4096.0, std::ceil(256.0 * tau_star / c.s.period())));
                grid_h = tau_star / static_cast<double>(cells);
                grid_max.resize(cells + 1);
                double run = 0.0;
                for (std::size_t i = 0; i <= cells; ++i) {
                    run = std::max(run, F(grid_h * static_cast<double>(i)));
                    grid_max[i] = run;
                }
                f_star = grid_max.back();
            }
        }

        double F(double tau) const {
            const auto& c = std::get<ByCounting>(v);
            return c.phi.at_log(tau) * c.s.s(tau) * std::exp(tau / c.p);
        }

        double running_max(double tau) const {
            if (tau <= 0) return F(0.0);
            if (tau >= tau_star) return std::max(f_star, F(tau));
            auto i = static_cast<std::size_t>(tau / grid_h);
            return std::max(grid_max[std::min(i, grid_max.size() - 1)], F(tau));
        }

        // inf{tau >= 0 : F(tau) >= x}
        double crossing(double x) const {
            if (F(0.0) >= x) return 0.0;
            double lo, hi;
            if (tau_star > 0 && x <= f_star) {
                auto it = std::lower_bound(grid_max.begin(), grid_max.end(), x);
                auto i = static_cast<std::size_t>(it - grid_max.begin());
                lo = grid_h * static_cast<double>(i == 0 ? 0 : i - 1);
                hi = grid_h * static_cast<double>(i);
            } else {
                lo = tau_star;
                double step = 1.0;
                hi = lo + step;
                while (F(hi) < x) {
                    lo = hi;
                    step *= 2.0;
                    hi = lo + step;
                    if (hi > 1e6) throw RangeError("counting model never reaches level " + fmt(x));
                }
            }
            for (int it = 0; it < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
                double mid = 0.5 * (lo + hi);
                if (mid <= lo || mid >= hi) break;
                (F(mid) >= x ? hi : lo) = mid;
            }
            return hi;
        }
    };

    static double eigen_formula(const ByEigenvalue& e, double n) {
        const double y = std::log(n);
        return e.psi.at_log(y) * e.s.s(y) / std::pow(n, e.p);
    }

    static std::string fmt(double x) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6g", x);
        return buf;
    }

    std::shared_ptr<const State> st_;
};

inline double eigenvalue(const MarginalSpectrum& s, std::int64_t n) { return s.eigenvalue(n); }
inline std::int64_t counting(const MarginalSpectrum& s, double t) { return s.counting(t); }
inline double n_as(const MarginalSpectrum& s, double t) { return s.n_as(t); }

/// sum_k lambda_k^{1/p} converges?
inline bool root_sum_converges(const MarginalSpectrum& other, double p) {
    if (other.is_explicit()) return true;
    const double q = other.exponent();
    if (q > p) return true;
    if (q < p) return false;
    if (auto e = std::get_if<MarginalSpectrum::ByEigenvalue>(&other.variant())) return e->psi.kappa() / p < -1.0;
    return other.phi().integral_converges();
}

struct SeriesResult {
    SampledPeriodicFn fn;
    double tail_bound = 0.0;     // max(s) times the bound on the untreated remainder
    std::int64_t direct_terms = 0;
    double remainder_mass = 0.0;  // estimated mass folded in uniformly
    bool converged = true;
};

/**
 * s*(tau) = sum_k s(tau + ln lambda_k) lambda_k^{1/p}.
 *
 * The first K terms are summed directly on the grid. For models the rest of
 * the series is replaced by its continuous counterpart, folded modulo T onto
 * the grid with linear (cloud-in-cell) deposits and convolved with s; the
 * far remainder enters as a uniform phase distribution.
 */
inline SeriesResult s_star_series(const PeriodicComponent& s, const MarginalSpectrum& other, double p,
                                  double tol = 1e-6, std::size_t M = 4096, std::int64_t K = 4096,
                                  double max_periods = 1000.0) {
    if (!root_sum_converges(other, p))
        throw PreconditionError("s_star: the series sum_k lambda_k^{1/p} diverges for this spectrum");
    const double T = s.period();
    const double h = T / static_cast<double>(M);
    SeriesResult res;
    res.fn.period = T;
    std::vector<double> grid(M), svals(M);
    for (std::size_t i = 0; i < M; ++i) {
        grid[i] = h * static_cast<double>(i);
        svals[i] = s.s(grid[i]);
    }
    std::vector<double> folded(M, 0.0);
    auto deposit = [&](double sigma, double mass) {
        double u = positive_mod(sigma, T) / h;
        auto j = static_cast<std::size_t>(u);
        double f = u - static_cast<double>(j);
        j %= M;
        folded[j] += (1.0 - f) * mass;
        folded[(j + 1) % M] += f * mass;
    };

    std::int64_t head = K;
    if (auto len = other.length()) head = std::min<std::int64_t>(head, *len);
    head = std::min<std::int64_t>(head, other.n_max());
    std::vector<double> sig(static_cast<std::size_t>(head)), wt(static_cast<std::size_t>(head));
    for (std::int64_t k = 1; k <= head; ++k) {
        double l = other.eigenvalue(k);
        sig[static_cast<std::size_t>(k - 1)] = -std::log(l);
        wt[static_cast<std::size_t>(k - 1)] = std::pow(l, 1.0 / p);
    }
    res.direct_terms = head;
    res.fn.values = parallel_map<double>(M, [&](std::size_t i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < sig.size(); ++k) acc += wt[k] * s.s(grid[i] - sig[k]);
        return acc;
    });

    const double smax = s.max_s();
    double remainder_est = 0.0, remainder_bound = 0.0;
    if (auto len = other.length()) {
        for (std::int64_t k = head + 1; k <= *len; ++k) {
            double l = other.eigenvalue(k);
            deposit(-std::log(l), std::pow(l, 1.0 / p));
        }
    } else if (auto e = std::get_if<MarginalSpectrum::ByEigenvalue>(&other.variant())) {
        // mass lambda(e^y)^{1/p} e^y dy, phase sigma = -ln lambda(e^y)
        const double q = e->p, a = e->psi.kappa() / p, c = std::pow(e->psi.coefficient(), 1.0 / p);
        const double decay = q / p - 1.0;
        double sm_mean = 0.0, sm_max = 0.0;
        for (int j = 0; j < 4096; ++j) {
            double v = std::pow(e->s.s(e->s.period() * j / 4096.0), 1.0 / p);
            sm_mean += v / 4096.0;
            sm_max = std::max(sm_max, v);
        }
        auto envelope_tail = [&](double Y) {
            if (decay == 0.0) return c * std::pow(1.0 + Y, a + 1.0) / (-a - 1.0);
            QuadratureSettings qs;
            qs.tol = 1e-8;
            auto r = adaptive_simpson(
                [&](double y) { return c * std::pow(1.0 + y, a) * std::exp(-decay * (y - Y)); }, Y,
                Y + 80.0 / decay + 10.0, qs);
            return r.value * std::exp(-decay * Y);
        };
        double y = std::log(static_cast<double>(head) + 0.5);
        const double dy = h / (2.0 * q);
        const double y_cap = y + max_periods * T / q;
        while (true) {
            double rb = envelope_tail(y) * sm_max;
            if (rb * smax < 0.5 * tol || y >= y_cap) {
                remainder_est = envelope_tail(y) * sm_mean;
                remainder_bound = rb;
                break;
            }
            for (int b = 0; b < 4096; ++b) {
                double ym = y + 0.5 * dy;
                double x = std::exp(ym);
                double l = other.eigen_at(x);
                deposit(-std::log(l), std::pow(l, 1.0 / p) * x * dy);
                y += dy;
            }
        }
    } else {
        // counting side: mass e^{-sigma/p} dF(sigma)
        const double q = other.exponent();
        const auto& phi = other.phi();
        const auto& so = other.s();
        const double delta = 1.0 / p - 1.0 / q;
        auto envelope_tail = [&](double S) {
            double k = phi.kappa(), c = phi.coefficient();
            if (delta == 0.0)
                return so.mean_s() * (-phi.at_log(S) + c * std::pow(1.0 + S, k + 1.0) / (-k - 1.0) / q);
            QuadratureSettings qs;
            qs.tol = 1e-8;
            auto r = adaptive_simpson(
                [&](double x) {
                    return std::exp(-delta * (x - S)) * (phi.at_log_derivative(x) + phi.at_log(x) / q);
                },
                S, S + 80.0 / delta + 10.0, qs);
            return so.mean_s() * r.value * std::exp(-delta * S);
        };
        const double ratio = so.max_s() / so.min_s();
        double sigma = other.crossing(static_cast<double>(head) + 0.5);
        sigma = std::max(sigma, other.monotone_from());
        const double ds = h / 2.0;
        const double cap = sigma + max_periods * T;
        double Fprev = other.counting_fn(sigma);
        while (true) {
            double est = envelope_tail(sigma);
            if (est * ratio * smax < 0.5 * tol || sigma >= cap) {
                remainder_est = est;
                remainder_bound = est * ratio;
                break;
            }
            for (int b = 0; b < 4096; ++b) {
                double next = sigma + ds;
                double Fn = other.counting_fn(next);
                double mid = 0.5 * (sigma + next);
                deposit(mid, std::exp(-mid / p) * (Fn - Fprev));
                Fprev = Fn;
                sigma = next;
            }
        }
    }
    bool any = false;
    for (double v : folded) any = any || v != 0.0;
    if (any) {
        auto conv = fft::circular_mean_convolution(svals, folded);
        for (std::size_t i = 0; i < M; ++i) res.fn.values[i] += static_cast<double>(M) * conv[i];
    }
    if (remainder_est > 0) {
        double sm = 0.0;
        for (double v : svals) sm += v;
        sm /= static_cast<double>(M);
        for (double& v : res.fn.values) v += remainder_est * sm;
    }
    res.remainder_mass = remainder_est;
    res.tail_bound = smax * remainder_bound;
    res.converged = res.tail_bound <= tol;
    return res;
}

inline SampledPeriodicFn s_star(const PeriodicComponent& s, const MarginalSpectrum& other, double p,
                                double tol = 1e-6) {
    return s_star_series(s, other, p, tol).fn;
}

}  // namespace tensasym

#endif
