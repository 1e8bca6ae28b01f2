#include <gtest/gtest.h>

#include <cmath>

#include "tensasym/smalldev.hpp"

using namespace tensasym;

namespace {
double exact_L_inverse_squares(double u) {
    // prod (1 + 2u/n^2) = sinh(pi sqrt(2u)) / (pi sqrt(2u))
    double z = kPi * std::sqrt(2 * u);
    double log_sinh = z + std::log1p(-std::exp(-2 * z)) - std::log(2.0);
    return -0.5 * (log_sinh - std::log(z));
}
}  // namespace

TEST(SmallDev, ExplicitExamples) {
    auto one = SmallDevModel::from_spectrum(MarginalSpectrum::explicit_list({1}));
    EXPECT_NEAR(L(one, 4), -std::log(3.0), 1e-15);
    EXPECT_NEAR(L_prime(one, 4), -1.0 / 9, 1e-15);
    EXPECT_NEAR(L_dprime(one, 4), 2.0 / 81, 1e-15);
    EXPECT_NEAR(solve_u(one, 0.1), 4.5, 1e-12);
    auto two = SmallDevModel::from_spectrum(MarginalSpectrum::explicit_list({1, 1}));
    EXPECT_NEAR(L(two, 4), -std::log(9.0), 1e-14);
    EXPECT_EQ(L_value(two, 4).tail_bound, 0.0);
    EXPECT_THROW(L(one, -1), DomainError);
    EXPECT_THROW(solve_u(one, 2.0), PreconditionError);
}

TEST(SmallDev, InverseSquaresAgainstProductFormula) {
    for (auto s : {MarginalSpectrum::power(2),
                   MarginalSpectrum::by_eigenvalue(2, SlowlyVaryingFn::constant(1), PeriodicComponent::constant(1, 2)),
                   MarginalSpectrum::by_counting(2, SlowlyVaryingFn::constant(1), PeriodicComponent::constant(1, 2))}) {
        auto m = SmallDevModel::from_spectrum(s, 2000);
        for (double u : {1.0, 100.0, 1e6}) {
            auto v = L_value(m, u);
            EXPECT_LT(v.tail_bound, 1e-3 * std::abs(v.value));
            EXPECT_NEAR(v.value, exact_L_inverse_squares(u), 1e-6 * std::abs(v.value)) << u;
        }
        EXPECT_NEAR(m.trace().value, kPi * kPi / 6, 1e-8);
    }
}

TEST(SmallDev, MonotoneAndStableUnderTruncation) {
    auto s = MarginalSpectrum::by_counting(2, SlowlyVaryingFn::logpow(0.5), PeriodicComponent::cosine(0.05, 1, 2));
    auto a = SmallDevModel::from_spectrum(s, 1000), b = SmallDevModel::from_spectrum(s, 100000);
    double prev = 0;
    for (int k = 0; k <= 30; ++k) {
        double u = std::pow(10.0, 0.3 * k);
        auto va = L_value(a, u), vb = L_value(b, u);
        EXPECT_LT(va.value, prev);
        prev = va.value;
        EXPECT_LE(std::abs(va.value - vb.value), va.tail_bound + vb.tail_bound + 1e-12 * std::abs(vb.value)) << u;
        EXPECT_LT(L_prime_value(a, u).value, 0);
        EXPECT_GT(L_dprime_value(a, u).value, 0);
    }
}

TEST(SmallDev, SolveResidual) {
    auto m = SmallDevModel::from_spectrum(MarginalSpectrum::power(2));
    for (double r : {1e-1, 1e-3, 1e-6}) {
        double u = solve_u(m, r);
        EXPECT_LE(std::abs(L_prime(m, u) + r), 1e-12 * r) << r;
    }
}

TEST(SmallDev, AccuracyErrorWhenTailTooLarge) {
    auto m = SmallDevModel::from_spectrum(MarginalSpectrum::power(1.1), 10);
    EXPECT_THROW(L(m, 1e-3), AccuracyError);
    EXPECT_THROW(SmallDevModel::from_spectrum(MarginalSpectrum::power(1.0)), DomainError);
    EXPECT_THROW(SmallDevModel::from_function([](std::int64_t n) { return 1.0 / n; }, 1.0, 10), PreconditionError);
}

TEST(SmallDev, RegimeFlag) {
    auto one = SmallDevModel::from_spectrum(MarginalSpectrum::explicit_list({1}));
    auto r = log_small_ball(one, 0.5);
    EXPECT_FALSE(r.in_regime);
    EXPECT_FALSE(r.tag.empty());
    auto m = SmallDevModel::from_spectrum(MarginalSpectrum::power(2));
    auto q = log_small_ball(m, 1e-3);
    EXPECT_TRUE(q.in_regime);
    EXPECT_GE(q.u2_lpp, kRegimeThreshold);
}

TEST(SmallDev, LeadingConstantOfInverseSquares) {
    // -ln P ~ pi^2 / (8 eps^2) for lambda_n = n^{-2}
    auto m = SmallDevModel::from_spectrum(MarginalSpectrum::power(2));
    std::vector<double> x, y;
    for (int k = 0; k <= 20; ++k) {
        double eps = std::pow(10.0, -2 - 0.1 * k);
        x.push_back(std::log(1 / eps));
        y.push_back(std::log(-log_small_ball(m, eps).ln_p));
    }
    EXPECT_NEAR(fit_slope(x, y).slope, 2.0, 0.02);
    std::vector<double> grid;
    for (int k = 0; k <= 30; ++k) grid.push_back(std::pow(10.0, -3 - 0.05 * k));
    auto z = extract_zeta(m, 2, 1.0, 0, grid);
    EXPECT_NEAR(z.zeta.back(), kPi * kPi / 8, 1e-3 * kPi * kPi / 8);
    EXPECT_LT(z.residual, 0.02);
    EXPECT_DOUBLE_EQ(z.period, 0.25);
}

TEST(SmallDev, ExponentSelfConsistency) {
    for (double p : {1.5, 2.0, 3.0}) {
        auto m = SmallDevModel::from_spectrum(MarginalSpectrum::power(p));
        std::vector<double> x, y;
        for (int k = 0; k <= 10; ++k) {
            double eps = std::pow(10.0, -2 - 0.1 * k);
            x.push_back(std::log(1 / eps));
            y.push_back(std::log(-log_small_ball(m, eps).ln_p));
        }
        double target = 2 / (p - 1);
        EXPECT_NEAR(fit_slope(x, y).slope, target, 0.03 * target) << p;
    }
}

TEST(SmallDev, FitSlopeExact) {
    std::vector<double> x{0, 1, 2, 3}, y{1, 3, 5, 7};
    auto f = fit_slope(x, y);
    EXPECT_NEAR(f.slope, 2, 1e-14);
    EXPECT_NEAR(f.intercept, 1, 1e-14);
    EXPECT_THROW(fit_slope({1}, {1}), PreconditionError);
}

TEST(SmallDev, TensorModel) {
    auto a = MarginalSpectrum::power(2);
    auto m = SmallDevModel::from_tensor({a, a}, 2, 5000);
    auto top = largest_products({a, a}, 5000);
    EXPECT_EQ(m.head(), top);
    EXPECT_EQ(m.tail_kind(), SmallDevModel::TailKind::PowerExtrapolation);
    // trace of the product = (pi^2/6)^2
    auto t = m.trace();
    EXPECT_NEAR(t.value, std::pow(kPi * kPi / 6, 2), t.tail_bound + 1e-6);
}

TEST(SmallDev, MonteCarloKnownProbabilities) {
    auto one = SmallDevModel::from_spectrum(MarginalSpectrum::explicit_list({1}));
    auto r = mc_small_ball(one, 0.1, 200000, 7);
    double p1 = std::erf(0.1 / std::sqrt(2.0));
    EXPECT_LE(r.ci_lo, p1);
    EXPECT_GE(r.ci_hi, p1);
    auto two = SmallDevModel::from_spectrum(MarginalSpectrum::explicit_list({1, 1}));
    auto q = mc_small_ball(two, 0.5, 200000, 8);
    double p2 = 1 - std::exp(-0.125);
    EXPECT_LE(q.ci_lo, p2);
    EXPECT_GE(q.ci_hi, p2);
}

TEST(SmallDev, MonteCarloIntervalShrinks) {
    auto one = SmallDevModel::from_spectrum(MarginalSpectrum::explicit_list({1}));
    auto a = mc_small_ball(one, 0.3, 100000, 3), b = mc_small_ball(one, 0.3, 200000, 3);
    EXPECT_NEAR((a.ci_hi - a.ci_lo) / (b.ci_hi - b.ci_lo), std::sqrt(2.0), 0.1);
}

TEST(SmallDev, MonteCarloDeterministic) {
    auto m = SmallDevModel::from_spectrum(MarginalSpectrum::power(2), 200);
    auto a = mc_small_ball(m, 0.6, 50000, 11), b = mc_small_ball(m, 0.6, 50000, 11);
    EXPECT_EQ(a.successes, b.successes);
    EXPECT_EQ(a.ci_lo, b.ci_lo);
    auto c = mc_small_ball(m, 0.6, 50000, 12);
    EXPECT_NE(a.successes, c.successes);
}

TEST(SmallDev, MonteCarloCoverage) {
    // 1000 repetitions: a single block of 100 misses 93 with probability about 0.1
    auto one = SmallDevModel::from_spectrum(MarginalSpectrum::explicit_list({1}));
    auto two = SmallDevModel::from_spectrum(MarginalSpectrum::explicit_list({1, 1}));
    const double p1 = std::erf(0.1 / std::sqrt(2.0)), p2 = 1 - std::exp(-0.125);
    int c1 = 0, c2 = 0;
    const int reps = 1000;
    for (std::uint64_t seed = 1; seed <= reps; ++seed) {
        auto r = mc_small_ball(one, 0.1, 10000, seed);
        c1 += r.ci_lo <= p1 && p1 <= r.ci_hi;
        auto q = mc_small_ball(two, 0.5, 10000, seed + reps);
        c2 += q.ci_lo <= p2 && p2 <= q.ci_hi;
    }
    EXPECT_GE(c1, 0.93 * reps);
    EXPECT_GE(c2, 0.93 * reps);
}

TEST(SmallDev, MonteCarloZeroSuccesses) {
    auto two = SmallDevModel::from_spectrum(MarginalSpectrum::explicit_list({1, 1}));
    auto r = mc_small_ball(two, 1e-6, 10000, 1);
    EXPECT_EQ(r.successes, 0);
    EXPECT_TRUE(r.one_sided);
    EXPECT_EQ(r.ci_lo, 0.0);
    EXPECT_NEAR(r.ci_hi, 1 - std::pow(0.05, 1e-4), 1e-15);
    EXPECT_THROW(mc_small_ball(two, 0.1, 9999, 1), PreconditionError);
}

TEST(SmallDev, PhiloxKnownAnswers) {
    auto z = Philox4x32::block({0, 0, 0, 0}, {0, 0});
    EXPECT_EQ(z, (Philox4x32::Block{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
    auto f = Philox4x32::block({~0u, ~0u, ~0u, ~0u}, {~0u, ~0u});
    EXPECT_EQ(f, (Philox4x32::Block{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
}
