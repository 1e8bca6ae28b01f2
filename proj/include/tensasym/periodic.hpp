#ifndef TENSASYM_PERIODIC_HPP
#define TENSASYM_PERIODIC_HPP

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "common.hpp"
#include "fft.hpp"

namespace tensasym {

/// Samples of a periodic function on the uniform grid j * period / M.
struct SampledPeriodicFn {
    double period = 1.0;
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    double grid_point(std::size_t j) const { return period * static_cast<double>(j) / values.size(); }

    /// Periodic cubic Lagrange interpolation.
    double operator()(double x) const {
        const std::size_t M = values.size();
        if (M == 0) throw PreconditionError("empty sampled function");
        if (M < 4) return values[static_cast<std::size_t>(positive_mod(x, period) / period * M) % M];
        double u = positive_mod(x, period) / period * static_cast<double>(M);
        auto i = static_cast<std::int64_t>(std::floor(u));
        double f = u - static_cast<double>(i);
        auto at = [&](std::int64_t k) {
            k %= static_cast<std::int64_t>(M);
            if (k < 0) k += static_cast<std::int64_t>(M);
            return values[static_cast<std::size_t>(k)];
        };
        double wm = -f * (f - 1) * (f - 2) / 6.0;
        double w0 = (f + 1) * (f - 1) * (f - 2) / 2.0;
        double w1 = -(f + 1) * f * (f - 2) / 2.0;
        double w2 = (f + 1) * f * (f - 1) / 6.0;
        return wm * at(i - 1) + w0 * at(i) + w1 * at(i + 1) + w2 * at(i + 2);
    }

    double min() const { return *std::min_element(values.begin(), values.end()); }
    double max() const { return *std::max_element(values.begin(), values.end()); }
    double mean() const {
        double s = 0.0;
        for (double v : values) s += v;
        return s / static_cast<double>(values.size());
    }
    /// (max - min) / mean
    double oscillation() const { return (max() - min()) / mean(); }

    SampledPeriodicFn derivative_spectral() const { return {period, fft::spectral_derivative(values, period)}; }
    SampledPeriodicFn derivative_onesided() const {
        SampledPeriodicFn d{period, std::vector<double>(values.size())};
        const double h = period / values.size();
        for (std::size_t j = 0; j < values.size(); ++j)
            d.values[j] = (values[(j + 1) % values.size()] - values[j]) / h;
        return d;
    }
};

inline double sup_difference(const SampledPeriodicFn& a, const SampledPeriodicFn& b) {
    if (a.size() != b.size()) throw PreconditionError("sup_difference needs equal grids");
    double m = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) m = std::max(m, std::abs(a.values[j] - b.values[j]));
    return m;
}

/// Declared relation between two periods: T / T~ = m / n, or no common period.
struct PeriodRelation {
    enum class Kind { Common, Incommensurable };
    Kind kind = Kind::Common;
    long m = 1;
    long n = 1;

    static PeriodRelation common(long m = 1, long n = 1) { return {Kind::Common, m, n}; }
    static PeriodRelation incommensurable() { return {Kind::Incommensurable, 0, 0}; }
    bool is_common() const { return kind == Kind::Common; }
    bool operator==(const PeriodRelation&) const = default;
};

/// Largest admissible CosineS amplitude keeping rho monotone.
inline double cosine_amplitude_limit(double T, double p) {
    double q = T / (2.0 * kPi * p);
    return q / std::sqrt(1.0 + q * q);
}

struct StieltjesResult {
    double value = 0.0;
    double refinement_delta = 0.0;  // Cantor only: value(depth) - value(depth - 1)
    bool warning = false;
    std::string message;
};

/**
 * s(tau) = exp(-tau/p) rho(tau) with rho nondecreasing and
 * rho(tau + T) = exp(T/p) rho(tau).
 *
 * Piecewise families keep a table of rho over one period; evaluation
 * outside [0, T) goes through the scaling law.
 */
class PeriodicComponent {
public:
    struct ExpAffine {
        double a = 1.0;
    };
    struct PiecewiseLinearRho {
        std::vector<double> knots;      // rho samples, first at 0 and last at T
        std::vector<double> positions;  // empty -> uniform on [0, T]
    };
    struct CosineS {
        double a = 0.0;
    };
    struct CantorStaircase {
        int depth = 12;
    };
    using Family = std::variant<ExpAffine, PiecewiseLinearRho, CosineS, CantorStaircase>;

    static constexpr int kMaxCantorDepth = 20;

    PeriodicComponent() : PeriodicComponent(1.0, 2.0, ExpAffine{1.0}) {}

    PeriodicComponent(double T, double p, Family fam) : T_(T), p_(p), fam_(std::move(fam)) {
        if (!(T > 0) || !std::isfinite(T)) throw DomainError("period must be positive");
        if (!(p > 0) || !std::isfinite(p)) throw DomainError("exponent p must be positive");
        std::visit([this](auto& f) { init(f); }, fam_);
    }

    static PeriodicComponent constant(double a, double p, double T = 1.0) { return {T, p, ExpAffine{a}}; }
    static PeriodicComponent cosine(double a, double T, double p) { return {T, p, CosineS{a}}; }
    static PeriodicComponent cantor(int depth, double T, double p) { return {T, p, CantorStaircase{depth}}; }
    static PeriodicComponent piecewise(std::vector<double> knots, double T, double p,
                                       std::vector<double> positions = {}) {
        return {T, p, PiecewiseLinearRho{std::move(knots), std::move(positions)}};
    }

    double period() const { return T_; }
    double exponent() const { return p_; }
    const Family& family() const { return fam_; }
    bool is_constant() const { return std::holds_alternative<ExpAffine>(fam_); }
    bool is_smooth() const { return std::holds_alternative<ExpAffine>(fam_) || std::holds_alternative<CosineS>(fam_); }
    bool is_singular() const { return std::holds_alternative<CantorStaircase>(fam_); }
    bool is_piecewise() const { return !xs_.empty(); }
    int cantor_depth() const { return is_singular() ? std::get<CantorStaircase>(fam_).depth : 0; }

    double s(double tau) const {
        if (auto e = std::get_if<ExpAffine>(&fam_)) return e->a;
        double u = positive_mod(tau, T_);
        if (auto c = std::get_if<CosineS>(&fam_)) return 1.0 + c->a * std::cos(2.0 * kPi * u / T_);
        return std::exp(-u / p_) * table_rho(u);
    }

    double rho(double tau) const {
        if (auto e = std::get_if<ExpAffine>(&fam_)) return e->a * std::exp(tau / p_);
        if (std::holds_alternative<CosineS>(fam_)) return std::exp(tau / p_) * s(tau);
        double k = std::floor(tau / T_);
        double u = tau - k * T_;
        if (u < 0) u = 0;
        if (u >= T_) {
            u -= T_;
            k += 1;
        }
        return std::exp(k * T_ / p_) * table_rho(u);
    }

    /// Periodic density of e^{-tau/p} d rho; right derivative on piecewise families.
    double density(double tau) const {
        if (auto e = std::get_if<ExpAffine>(&fam_)) return e->a / p_;
        double u = positive_mod(tau, T_);
        if (auto c = std::get_if<CosineS>(&fam_)) {
            double w = 2.0 * kPi / T_;
            return (1.0 + c->a * std::cos(w * u)) / p_ - c->a * w * std::sin(w * u);
        }
        if (is_singular()) throw PreconditionError("singular component has no density");
        std::size_t i = piece(u);
        return std::exp(-u / p_) * slope(i);
    }

    /// s'(tau); one-sided (right) on piecewise families.
    double s_prime(double tau) const {
        if (std::holds_alternative<ExpAffine>(fam_)) return 0.0;
        double u = positive_mod(tau, T_);
        if (auto c = std::get_if<CosineS>(&fam_)) {
            double w = 2.0 * kPi / T_;
            return -c->a * w * std::sin(w * u);
        }
        std::size_t i = piece(u);
        return std::exp(-u / p_) * (slope(i) - table_rho(u) / p_);
    }

    double min_s() const { return min_s_; }
    double max_s() const { return max_s_; }
    double mean_s() const { return mean_s_; }
    /// Smallest value of (ln rho)' over a period; 0 when rho has flat parts.
    double min_log_rho_slope() const { return min_log_slope_; }

    const std::vector<double>& knot_positions() const { return xs_; }
    const std::vector<double>& knot_values() const { return ys_; }
    std::shared_ptr<const PeriodicComponent> coarser() const { return coarser_; }

    /**
     * Discretization of e^{-tau/p} d rho on [a, b]: Cantor steps become
     * midpoint atoms of their rising pieces, other piecewise families get
     * 8-point Gauss nodes per piece, smooth families Gauss nodes on
     * `panels_per_period` panels.
     */
    void discretize_measure(double a, double b, std::vector<double>& pos, std::vector<double>& w,
                            int panels_per_period = 64) const {
        if (!(b > a)) return;
        if (is_smooth()) {
            const auto& g = gauss8();
            int panels = std::max(1, static_cast<int>(std::ceil((b - a) / T_ * panels_per_period)));
            double h = (b - a) / panels;
            for (int i = 0; i < panels; ++i) {
                double c = a + (i + 0.5) * h;
                for (std::size_t j = 0; j < g.x.size(); ++j) {
                    double x = c + 0.5 * h * g.x[j];
                    pos.push_back(x);
                    w.push_back(0.5 * h * g.w[j] * density(x));
                }
            }
            return;
        }
        const bool atoms = is_singular();
        const auto& g = gauss8();
        auto k0 = static_cast<std::int64_t>(std::floor(a / T_));
        auto k1 = static_cast<std::int64_t>(std::floor(b / T_));
        for (std::int64_t k = k0; k <= k1; ++k) {
            double base = static_cast<double>(k) * T_;
            double lo = std::max(0.0, a - base), hi = std::min(T_, b - base);
            if (!(hi > lo)) continue;
            std::size_t i0 = piece(lo);
            for (std::size_t i = i0; i + 1 < xs_.size() && xs_[i] < hi; ++i) {
                double beta = slope(i);
                if (beta <= 0.0) continue;
                double l = std::max(lo, xs_[i]), r = std::min(hi, xs_[i + 1]);
                if (!(r > l)) continue;
                if (atoms) {
                    double m = 0.5 * (l + r);
                    pos.push_back(base + m);
                    w.push_back(std::exp(-m / p_) * beta * (r - l));
                } else {
                    double c = 0.5 * (l + r), hh = 0.5 * (r - l);
                    for (std::size_t j = 0; j < g.x.size(); ++j) {
                        double u = c + hh * g.x[j];
                        pos.push_back(base + u);
                        w.push_back(hh * g.w[j] * std::exp(-u / p_) * beta);
                    }
                }
            }
        }
    }

    /// int_a^b g(tau) e^{-tau/p} d rho(tau).
    template <class G>
    double integrate_measure(G&& g, double a, double b, const QuadratureSettings& qs = {}) const {
        if (!(b > a)) return 0.0;
        if (is_smooth()) {
            auto r = adaptive_simpson([&](double x) { return g(x) * density(x); }, a, b, qs);
            if (!r.converged) throw AccuracyError("Stieltjes quadrature did not converge", r.value, r.error);
            return r.value;
        }
        std::vector<double> pos, w;
        discretize_measure(a, b, pos, w);
        double total = 0.0;
        for (std::size_t j = 0; j < pos.size(); ++j) total += w[j] * g(pos[j]);
        return total;
    }

private:
    double T_, p_;
    Family fam_;
    std::vector<double> xs_, ys_;
    double min_s_ = 1.0, max_s_ = 1.0, mean_s_ = 1.0, min_log_slope_ = 0.0;
    std::shared_ptr<const PeriodicComponent> coarser_;

    std::size_t piece(double u) const {
        auto it = std::upper_bound(xs_.begin(), xs_.end(), u);
        std::size_t i = (it == xs_.begin()) ? 0 : static_cast<std::size_t>(it - xs_.begin()) - 1;
        return std::min(i, xs_.size() - 2);
    }
    double slope(std::size_t i) const { return (ys_[i + 1] - ys_[i]) / (xs_[i + 1] - xs_[i]); }
    double table_rho(double u) const {
        std::size_t i = piece(u);
        double t = (u - xs_[i]) / (xs_[i + 1] - xs_[i]);
        return ys_[i] + t * (ys_[i + 1] - ys_[i]);
    }

    void init(ExpAffine& e) {
        if (!(e.a > 0) || !std::isfinite(e.a)) throw DomainError("ExpAffine needs a > 0");
        min_s_ = max_s_ = mean_s_ = e.a;
        min_log_slope_ = 1.0 / p_;
    }

    void init(CosineS& c) {
        double lim = cosine_amplitude_limit(T_, p_);
        if (!(std::abs(c.a) < lim))
            throw DomainError("CosineS amplitude " + std::to_string(c.a) + " makes rho non-monotone (limit " +
                              std::to_string(lim) + " for T=" + std::to_string(T_) +
                              ", p=" + std::to_string(p_) + ")");
        const double w = 2.0 * kPi / T_;
        min_log_slope_ = 1.0 / p_;
        for (int j = 0; j < 4096; ++j) {
            double th = w * T_ * j / 4096.0;
            double d = 1.0 / p_ - c.a * w * std::sin(th) / (1.0 + c.a * std::cos(th));
            if (d < 0) throw DomainError("CosineS: rho decreasing on the validation grid");
            min_log_slope_ = std::min(min_log_slope_, d);
        }
        min_s_ = 1.0 - std::abs(c.a);
        max_s_ = 1.0 + std::abs(c.a);
        mean_s_ = 1.0;
    }

    void init(PiecewiseLinearRho& pl) {
        const std::size_t n = pl.knots.size();
        if (n < 2) throw DomainError("PiecewiseLinearRho needs at least two knots");
        if (!pl.positions.empty() && pl.positions.size() != n)
            throw DomainError("PiecewiseLinearRho: positions and knots differ in length");
        std::vector<double> xs(n);
        for (std::size_t i = 0; i < n; ++i)
            xs[i] = pl.positions.empty() ? T_ * static_cast<double>(i) / static_cast<double>(n - 1) : pl.positions[i];
        if (xs.front() != 0.0 || std::abs(xs.back() - T_) > 1e-12 * T_)
            throw DomainError("PiecewiseLinearRho positions must span [0, T]");
        xs.back() = T_;
        for (std::size_t i = 1; i < n; ++i)
            if (!(xs[i] > xs[i - 1])) throw DomainError("PiecewiseLinearRho positions must increase");
        if (!(pl.knots.front() > 0)) throw DomainError("PiecewiseLinearRho needs rho(0) > 0");
        for (std::size_t i = 1; i < n; ++i)
            if (pl.knots[i] < pl.knots[i - 1]) throw DomainError("PiecewiseLinearRho knots must be nondecreasing");
        double target = std::exp(T_ / p_) * pl.knots.front();
        if (std::abs(pl.knots.back() - target) > 1e-9 * target)
            throw DomainError("PiecewiseLinearRho violates rho(T) = exp(T/p) rho(0)");
        xs_ = std::move(xs);
        ys_ = pl.knots;
        ys_.back() = target;
        finish_table();
    }

    void init(CantorStaircase& c) {
        if (c.depth < 1 || c.depth > kMaxCantorDepth)
            throw DomainError("CantorStaircase depth must be in [1, " + std::to_string(kMaxCantorDepth) + "]");
        build_cantor(c.depth);
        if (c.depth > 1) coarser_ = std::make_shared<const PeriodicComponent>(T_, p_, CantorStaircase{c.depth - 1});
    }

    void build_cantor(int depth) {
        // left ends of the 2^depth retained triadic intervals, in units of 3^-depth
        std::vector<std::int64_t> left{0};
        std::int64_t unit = 1;
        for (int l = 0; l < depth; ++l) unit *= 3;
        std::int64_t step = unit;
        for (int l = 1; l <= depth; ++l) {
            step /= 3;
            std::vector<std::int64_t> next;
            next.reserve(left.size() * 2);
            for (auto a : left) {
                next.push_back(a);
                next.push_back(a + 2 * step);
            }
            left.swap(next);
        }
        const double jump = std::expm1(T_ / p_);
        const double cells = static_cast<double>(left.size());
        xs_.clear();
        ys_.clear();
        for (std::size_t i = 0; i < left.size(); ++i) {
            xs_.push_back(T_ * static_cast<double>(left[i]) / static_cast<double>(unit));
            xs_.push_back(T_ * static_cast<double>(left[i] + 1) / static_cast<double>(unit));
            ys_.push_back(1.0 + jump * (static_cast<double>(i) / cells));
            ys_.push_back(1.0 + jump * (static_cast<double>(i + 1) / cells));
        }
        xs_.back() = T_;
        ys_.back() = std::exp(T_ / p_);
        finish_table();
    }

    // min/max/mean of s and the minimal log slope from the rho table
    void finish_table() {
        min_s_ = std::numeric_limits<double>::infinity();
        max_s_ = 0.0;
        min_log_slope_ = std::numeric_limits<double>::infinity();
        double integral = 0.0;
        for (std::size_t i = 0; i + 1 < xs_.size(); ++i) {
            double x0 = xs_[i], h = xs_[i + 1] - x0, y0 = ys_[i], b = slope(i);
            double e0 = std::exp(-x0 / p_);
            double s0 = e0 * y0;
            min_s_ = std::min(min_s_, s0);
            max_s_ = std::max(max_s_, s0);
            if (b > 0) {
                double ustar = p_ - y0 / b;  // s' vanishes here, relative to x0
                if (ustar > 0 && ustar < h) max_s_ = std::max(max_s_, std::exp(-(x0 + ustar) / p_) * (y0 + b * ustar));
            }
            min_log_slope_ = std::min(min_log_slope_, b / ys_[i + 1]);
            double x = h / p_;
            double one_minus = -std::expm1(-x);
            double g;  // 1 - e^{-x}(1+x), cancellation-free
            if (x < 1e-2)
                g = x * x * (0.5 - x * (1.0 / 3.0 - x * (1.0 / 8.0 - x / 30.0)));
            else
                g = one_minus - x * std::exp(-x);
            integral += e0 * (y0 * p_ * one_minus + b * p_ * p_ * g);
        }
        double send = std::exp(-T_ / p_) * ys_.back();
        min_s_ = std::min(min_s_, send);
        max_s_ = std::max(max_s_, send);
        mean_s_ = integral / T_;
        if (!(min_s_ > 0)) throw DomainError("periodic component must stay positive");
    }
};

inline double eval_s(const PeriodicComponent& c, double tau) { return c.s(tau); }
inline double mean_s(const PeriodicComponent& c) { return c.mean_s(); }

/// int_a^b f(tau) d rho(tau) with a refinement delta for singular rho.
template <class F>
StieltjesResult stieltjes_integrate(F&& f, const PeriodicComponent& c, double a, double b, double tol = 1e-6,
                                    const QuadratureSettings& qs = {}) {
    if (!(b >= a)) throw PreconditionError("stieltjes_integrate needs b >= a");
    StieltjesResult r;
    const double p = c.exponent();
    auto g = [&](double x) { return f(x) * std::exp(x / p); };
    r.value = c.integrate_measure(g, a, b, qs);
    if (auto coarse = c.coarser()) {
        r.refinement_delta = r.value - coarse->integrate_measure(g, a, b, qs);
        if (std::abs(r.refinement_delta) > tol * std::max(1.0, std::abs(r.value))) {
            r.warning = true;
            r.message = "Cantor refinement delta above tolerance";
        }
    }
    return r;
}

namespace detail {
inline double common_period(const PeriodicComponent& s, const PeriodicComponent& st, const PeriodRelation& rel) {
    if (!rel.is_common())
        throw PreconditionError("incommensurable periods have no common period; use c_frak for the averaged constant");
    if (rel.m <= 0 || rel.n <= 0) throw PreconditionError("period relation needs positive integers m, n");
    double L = static_cast<double>(rel.n) * s.period();
    double L2 = static_cast<double>(rel.m) * st.period();
    if (std::abs(L - L2) > 1e-9 * L)
        throw PreconditionError("declared period relation T/T~ = m/n contradicts the component periods");
    return L;
}
}  // namespace detail

/// (s * s~)(eta) = (1/L) int_0^L s(eta - l) s~(l) dl on the common period L.
inline SampledPeriodicFn star_convolve(const PeriodicComponent& s, const PeriodicComponent& st,
                                       const PeriodRelation& rel = {}, std::size_t M = 4096) {
    const double L = detail::common_period(s, st, rel);
    std::vector<double> a(M), b(M);
    for (std::size_t j = 0; j < M; ++j) {
        double x = L * static_cast<double>(j) / static_cast<double>(M);
        a[j] = s.s(x);
        b[j] = st.s(x);
    }
    return {L, fft::circular_mean_convolution(a, b)};
}

/**
 * s_otimes(eta) = e^{-eta/p} (1/L) int_0^L rho(eta - sigma) d rho~(sigma)
 *              = (1/L) int_0^L s(eta - sigma) e^{-sigma/p} d rho~(sigma).
 */
inline SampledPeriodicFn s_otimes(const PeriodicComponent& s, const PeriodicComponent& st,
                                  const PeriodRelation& rel = {}, std::size_t M = 4096) {
    if (std::abs(s.exponent() - st.exponent()) > 1e-12 * s.exponent())
        throw PreconditionError("s_otimes needs equal exponents");
    const double L = detail::common_period(s, st, rel);
    SampledPeriodicFn out{L, std::vector<double>(M)};
    if (st.is_smooth()) {
        std::vector<double> a(M), m(M);
        for (std::size_t j = 0; j < M; ++j) {
            double x = L * static_cast<double>(j) / static_cast<double>(M);
            a[j] = s.s(x);
            m[j] = st.density(x);
        }
        out.values = fft::circular_mean_convolution(a, m);
        return out;
    }
    std::vector<double> pos, w;
    st.discretize_measure(0.0, L, pos, w);
    out.values = parallel_map<double>(M, [&](std::size_t i) {
        double eta = L * static_cast<double>(i) / static_cast<double>(M);
        double acc = 0.0;
        for (std::size_t j = 0; j < pos.size(); ++j) acc += w[j] * s.s(eta - pos[j]);
        return acc / L;
    });
    return out;
}

/// The same function as (s * s~)/p + (s * s~)', derivative taken spectrally; smooth pairs only.
inline SampledPeriodicFn s_otimes_star_form(const PeriodicComponent& s, const PeriodicComponent& st,
                                            const PeriodRelation& rel = {}, std::size_t M = 4096) {
    auto c = star_convolve(s, st, rel, M);
    auto d = c.derivative_spectral();
    for (std::size_t j = 0; j < M; ++j) c.values[j] = c.values[j] / s.exponent() + d.values[j];
    return c;
}

inline double c_frak(const PeriodicComponent& s, const PeriodicComponent& st, double p) {
    if (std::abs(s.exponent() - p) > 1e-12 * p || std::abs(st.exponent() - p) > 1e-12 * p)
        throw PreconditionError("c_frak needs both components at exponent p");
    return s.mean_s() * st.mean_s() / p;
}

/// Piecewise-linear rho through the samples of a positive periodic function.
inline PeriodicComponent rho_from_samples(const SampledPeriodicFn& f, double p) {
    const std::size_t M = f.size();
    std::vector<double> knots(M + 1), pos(M + 1);
    double run = 0.0;
    for (std::size_t j = 0; j <= M; ++j) {
        double x = (j == M) ? f.period : f.grid_point(j);
        double v = std::exp(x / p) * f.values[j % M];
        if (j > 0 && v < run) {
            if (run - v > 1e-9 * run) throw DomainError("sampled function does not come from a monotone rho");
            v = run;
        }
        run = v;
        knots[j] = v;
        pos[j] = x;
    }
    return PeriodicComponent::piecewise(std::move(knots), f.period, p, std::move(pos));
}

}  // namespace tensasym

#endif
