#ifndef TENSASYM_COMMON_HPP
#define TENSASYM_COMMON_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <exception>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tensasym {

// ---------------------------------------------------------------------------
// errors
// ---------------------------------------------------------------------------

struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// Model evaluated outside the range validated at construction.
struct RangeError : std::out_of_range {
    using std::out_of_range::out_of_range;
};

struct PreconditionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Requested accuracy not reached; the best estimate travels with the error.
struct AccuracyError : std::runtime_error {
    double best_estimate;
    double error_estimate;
    AccuracyError(const std::string& what, double best, double err)
        : std::runtime_error(what), best_estimate(best), error_estimate(err) {}
};

// A configuration whose hypotheses no implemented predictor covers.
struct UnsupportedCase : std::runtime_error {
    std::string hypothesis;
    UnsupportedCase(const std::string& what, std::string failed)
        : std::runtime_error(what), hypothesis(std::move(failed)) {}
};

// ---------------------------------------------------------------------------
// small numeric helpers
// ---------------------------------------------------------------------------

inline constexpr double kPi = std::numbers::pi;

/// Euclidean remainder, result in [0, m).
inline double positive_mod(double x, double m) {
    double r = std::fmod(x, m);
    if (r < 0) r += m;
    if (r >= m) r = 0.0;
    return r;
}

inline std::uint64_t double_bits(double x) {
    std::uint64_t u;
    std::memcpy(&u, &x, sizeof u);
    return u;
}

inline double bits_double(std::uint64_t u) {
    double x;
    std::memcpy(&x, &u, sizeof x);
    return x;
}

// ---------------------------------------------------------------------------
// quadrature
// ---------------------------------------------------------------------------

struct QuadratureSettings {
    double tol = 1e-9;  // relative
    int max_depth = 50;
    int initial_panels = 16;
};

struct QuadResult {
    double value = 0.0;
    double error = 0.0;
    bool converged = true;
};

/**
 * Adaptive Simpson with Richardson correction.
 *
 * The absolute target is tol times the magnitude of a coarse composite
 * estimate, so the tolerance behaves as a relative one. Intervals that hit
 * max_depth are accepted and flagged.
 */
template <class F>
QuadResult adaptive_simpson(F&& f, double a, double b, const QuadratureSettings& qs = {}) {
    QuadResult out;
    if (!(b > a)) return out;
    struct Seg {
        double a, b, fa, fm, fb, whole, eps;
        int depth;
    };
    const int panels = std::max(1, qs.initial_panels);
    const double h = (b - a) / panels;
    std::vector<Seg> work;
    work.reserve(256);
    double coarse = 0.0, coarse_abs = 0.0;
    std::vector<Seg> roots;
    roots.reserve(panels);
    double fl = f(a);
    for (int i = 0; i < panels; ++i) {
        double l = a + i * h;
        double r = (i + 1 == panels) ? b : a + (i + 1) * h;
        double m = 0.5 * (l + r);
        double fm = f(m), fr = f(r);
        double s = (r - l) / 6.0 * (fl + 4 * fm + fr);
        coarse += s;
        coarse_abs += (r - l) / 6.0 * (std::abs(fl) + 4 * std::abs(fm) + std::abs(fr));
        roots.push_back({l, r, fl, fm, fr, s, 0.0, 0});
        fl = fr;
    }
    double scale = std::max(std::abs(coarse), 1e-3 * coarse_abs);
    if (scale == 0.0) scale = std::numeric_limits<double>::min();
    const double eps_total = qs.tol * scale;
    // process panels left to right; the explicit stack keeps summation order fixed
    for (auto it = roots.rbegin(); it != roots.rend(); ++it) {
        it->eps = eps_total / panels;
        work.push_back(*it);
    }
    while (!work.empty()) {
        Seg s = work.back();
        work.pop_back();
        double m = 0.5 * (s.a + s.b);
        double lm = 0.5 * (s.a + m), rm = 0.5 * (m + s.b);
        double flm = f(lm), frm = f(rm);
        double left = (m - s.a) / 6.0 * (s.fa + 4 * flm + s.fm);
        double right = (s.b - m) / 6.0 * (s.fm + 4 * frm + s.fb);
        double diff = left + right - s.whole;
        if (std::abs(diff) <= 15.0 * s.eps || s.depth >= qs.max_depth || !(m > s.a && s.b > m)) {
            out.value += left + right + diff / 15.0;
            out.error += std::abs(diff) / 15.0;
            if (std::abs(diff) > 15.0 * s.eps) out.converged = false;
            continue;
        }
        work.push_back({m, s.b, s.fm, frm, s.fb, right, 0.5 * s.eps, s.depth + 1});
        work.push_back({s.a, m, s.fa, flm, s.fm, left, 0.5 * s.eps, s.depth + 1});
    }
    if (out.error > eps_total) out.converged = false;
    return out;
}

/// Gauss-Legendre nodes and weights on [-1, 1] (Newton on P_n).
struct GaussRule {
    std::vector<double> x, w;
};

inline GaussRule gauss_legendre(int n) {
    GaussRule g;
    g.x.resize(n);
    g.w.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1);
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            double dz = p1 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-16) break;
        }
        g.x[i] = -z;
        g.x[n - 1 - i] = z;
        g.w[i] = g.w[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
    }
    return g;
}

inline const GaussRule& gauss8() {
    static const GaussRule g = gauss_legendre(8);
    return g;
}

/// Fixed composite Gauss-Legendre; continuous in any parameter f depends on.
template <class F>
double composite_gauss(F&& f, double a, double b, int panels, const GaussRule& g = gauss8()) {
    if (!(b > a) || panels <= 0) return 0.0;
    const double h = (b - a) / panels;
    double total = 0.0;
    for (int i = 0; i < panels; ++i) {
        double c = a + (i + 0.5) * h;
        double part = 0.0;
        for (std::size_t j = 0; j < g.x.size(); ++j) part += g.w[j] * f(c + 0.5 * h * g.x[j]);
        total += 0.5 * h * part;
    }
    return total;
}

// ---------------------------------------------------------------------------
// threading
// ---------------------------------------------------------------------------

inline int& thread_count_setting() {
    static int n = 0;  // 0 -> runtime default
    return n;
}

inline void set_thread_count(int n) {
    thread_count_setting() = n;
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#endif
}

/// out[i] = f(i); each slot written by exactly one worker, so order never leaks.
template <class T, class F>
std::vector<T> parallel_map(std::size_t n, F&& f) {
    std::vector<T> out(n);
    std::exception_ptr err = nullptr;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic, 1)
#endif
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
        try {
            out[static_cast<std::size_t>(i)] = f(static_cast<std::size_t>(i));
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);
    return out;
}

/// sum_{i=1..n} f(i) over integers, in chunks; exact and order independent.
template <class F>
std::int64_t parallel_count_sum(std::int64_t n, F&& f, std::int64_t chunk = 256) {
    if (n <= 0) return 0;
    const std::int64_t nc = (n + chunk - 1) / chunk;
    auto parts = parallel_map<std::int64_t>(static_cast<std::size_t>(nc), [&](std::size_t c) {
        std::int64_t lo = static_cast<std::int64_t>(c) * chunk + 1, hi = std::min(n, lo + chunk - 1);
        std::int64_t s = 0;
        for (std::int64_t i = lo; i <= hi; ++i) s += f(i);
        return s;
    });
    std::int64_t total = 0;
    for (auto v : parts) total += v;
    return total;
}

}  // namespace tensasym

#endif
