#include <gtest/gtest.h>

#include <algorithm>
#include <boost/math/special_functions/zeta.hpp>
#include <cmath>
#include <random>

#include "tensasym/tensor.hpp"

using namespace tensasym;

namespace {

std::vector<double> geometric(int n, double q = 0.5) {
    std::vector<double> l;
    for (int k = 1; k <= n; ++k) l.push_back(std::pow(q, k - 1));
    return l;
}

std::int64_t brute(const std::vector<std::vector<double>>& ls, double t) {
    // products associated as ((x_{d-1} x_{d-2}) ...) x_0
    std::int64_t c = 0;
    std::vector<std::size_t> ix(ls.size(), 0);
    while (true) {
        double p = 1.0;
        for (std::size_t m = ls.size(); m-- > 0;) p = p * ls[m][ix[m]];
        c += p > t;
        std::size_t m = 0;
        while (m < ls.size() && ++ix[m] == ls[m].size()) ix[m++] = 0;
        if (m == ls.size()) break;
    }
    return c;
}

MarginalSpectrum cosine_model(double amp, double T = 1.0, double p = 2.0, SlowlyVaryingFn phi = SlowlyVaryingFn::constant(1)) {
    return MarginalSpectrum::by_counting(p, phi, PeriodicComponent::cosine(amp, T, p));
}

}  // namespace

TEST(Tensor, CountingExamples) {
    auto g = MarginalSpectrum::explicit_list(geometric(20));
    EXPECT_EQ(tensor_counting(g, g, 0.25), 3);
    EXPECT_EQ(tensor_counting(g, g, 1.0), 0);
    EXPECT_EQ(tensor_counting(g, g, 0.125), 6);  // j + k <= 4 with j, k >= 1
    EXPECT_EQ(tensor_counting_multi({g, g, g}, 0.25), 4);
    EXPECT_EQ(tensor_counting_multi({g}, 0.1), g.counting(0.1));
}

TEST(Tensor, ModelPairAgainstBruteForce) {
    auto p = MarginalSpectrum::power(2);
    std::vector<double> ev;
    for (int n = 1; n <= 10000; ++n) ev.push_back(p.eigenvalue(n));
    std::int64_t count = 0;
    for (double x : ev)
        for (double y : ev) {
            if (x * y <= 1e-6) break;
            ++count;
        }
    EXPECT_EQ(tensor_counting(p, p, 1e-6), count);
}

TEST(Tensor, MixedModelsAgainstBruteForce) {
    auto a = cosine_model(0.05), b = MarginalSpectrum::power(3);
    std::vector<double> ea, eb;
    for (int n = 1; n <= 200000; ++n) ea.push_back(a.eigenvalue(n));
    for (int n = 1; n <= 2000; ++n) eb.push_back(b.eigenvalue(n));
    for (double t : {1e-4, 3e-6, 1e-7}) {
        std::int64_t c = 0;
        for (double y : eb) {
            std::int64_t k = std::partition_point(ea.begin(), ea.end(), [&](double x) { return x * y > t; }) - ea.begin();
            ASSERT_LT(k, static_cast<std::int64_t>(ea.size()));
            c += k;
        }
        EXPECT_EQ(tensor_counting(a, b, t), c) << t;
        EXPECT_EQ(tensor_counting(b, a, t), c) << t;
    }
}

TEST(Tensor, RandomExplicitBruteForce) {
    std::mt19937_64 gen(5);
    std::uniform_int_distribution<int> len(1, 60), dim(1, 3);
    std::uniform_real_distribution<double> U(0, 1);
    for (int rep = 0; rep < 300; ++rep) {
        int d = dim(gen);
        std::vector<std::vector<double>> ls;
        std::vector<MarginalSpectrum> specs;
        for (int m = 0; m < d; ++m) {
            std::vector<double> l(len(gen));
            for (double& x : l) x = std::pow(U(gen), 3) + 1e-9;
            std::sort(l.rbegin(), l.rend());
            ls.push_back(l);
            specs.push_back(MarginalSpectrum::explicit_list(l));
        }
        double t = std::pow(U(gen), 2 * d) + 1e-12;
        EXPECT_EQ(tensor_counting_multi(specs, t), brute(ls, t));
    }
}

TEST(Tensor, PermutationInvarianceAndMonotonicity) {
    auto a = MarginalSpectrum::explicit_list(geometric(30, 0.5));
    auto b = MarginalSpectrum::explicit_list(geometric(30, 0.25));
    auto c = MarginalSpectrum::explicit_list(geometric(30, 0.125));
    std::vector<MarginalSpectrum> v{a, b, c};
    std::vector<int> perm{0, 1, 2};
    std::int64_t ref = tensor_counting_multi(v, 1e-4);
    do {
        EXPECT_EQ(tensor_counting_multi({v[perm[0]], v[perm[1]], v[perm[2]]}, 1e-4), ref);
    } while (std::next_permutation(perm.begin(), perm.end()));
    auto m1 = cosine_model(0.05), m2 = cosine_model(0.07);
    std::int64_t prev = 0;
    for (int k = 0; k <= 60; ++k) {
        double t = std::pow(10.0, -0.1 * k);
        auto n = tensor_counting(m1, m2, t);
        EXPECT_GE(n, prev);
        EXPECT_EQ(n, tensor_counting(m2, m1, t));
        prev = n;
    }
}

TEST(Tensor, RangeErrorsNameTheMarginal) {
    auto a = MarginalSpectrum::by_eigenvalue(2, SlowlyVaryingFn::constant(1), PeriodicComponent::constant(1, 2), 100);
    auto b = MarginalSpectrum::power(2);
    try {
        tensor_counting(a, b, 1e-8);
        FAIL();
    } catch (const RangeError& e) {
        EXPECT_NE(std::string(e.what()).find("marginal"), std::string::npos);
    }
}

TEST(Tensor, EigenvaluesAndLargestProducts) {
    auto h = MarginalSpectrum::explicit_list({1, 0.5});
    EXPECT_DOUBLE_EQ(tensor_eigenvalue({h, h}, 1), 1.0);
    EXPECT_DOUBLE_EQ(tensor_eigenvalue({h, h}, 3), 0.5);
    EXPECT_DOUBLE_EQ(tensor_eigenvalue({h, h}, 4), 0.25);
    EXPECT_THROW(tensor_eigenvalue({h, h}, 5), RangeError);
    auto a = cosine_model(0.05), b = MarginalSpectrum::power(3);
    EXPECT_DOUBLE_EQ(tensor_eigenvalue({a, b}, 1), a.lambda1() * b.lambda1());
    auto top = largest_products({a, b}, 300);
    for (std::int64_t n : {1, 2, 17, 150, 300}) {
        double l = tensor_eigenvalue({a, b}, n);
        EXPECT_EQ(l, top[static_cast<std::size_t>(n - 1)]);
        EXPECT_GE(tensor_counting(a, b, std::nextafter(l, 0.0)), n);
        EXPECT_LT(tensor_counting(a, b, l), n);
    }
    auto g = geometric(12, 0.7);
    std::vector<double> all;
    for (double x : g)
        for (double y : g)
            for (double z : g) all.push_back((z * y) * x);
    std::sort(all.rbegin(), all.rend());
    auto gl = MarginalSpectrum::explicit_list(g);
    auto lp = largest_products({gl, gl, gl}, 200);
    for (std::size_t i = 0; i < lp.size(); ++i) EXPECT_EQ(lp[i], all[i]);
}

TEST(Tensor, AlmostMellin) {
    auto one = SlowlyVaryingFn::constant(1);
    auto c = PeriodicComponent::constant(1, 2);
    EXPECT_NEAR(almost_mellin(one, c, one, c, std::exp(2.0)), 1.0, 1e-10);
    std::mt19937 gen(2);
    std::uniform_real_distribution<double> k(-2.5, 1.5), L(1, 40);
    for (int i = 0; i < 20; ++i) {
        auto f = SlowlyVaryingFn::logpow(k(gen)), g = SlowlyVaryingFn::logpow(k(gen));
        auto s = PeriodicComponent::cosine(0.05, 1, 2);
        auto st = (i % 2) ? PeriodicComponent::cosine(0.07, std::sqrt(2.0), 2)
                          : PeriodicComponent::cantor(10, std::log(6.0), 2.0);
        double tau = std::exp(L(gen));
        double full = almost_mellin(f, s, g, st, tau, MellinSplit::Full);
        double parts = almost_mellin(f, s, g, st, tau, MellinSplit::H) + almost_mellin(f, s, g, st, tau, MellinSplit::H1);
        EXPECT_NEAR(parts / full, 1.0, 1e-7);
    }
}

TEST(Tensor, AlmostMellinOrderEquivalence) {
    auto f = SlowlyVaryingFn::logpow(0.5), g = SlowlyVaryingFn::logpow(-0.5);
    auto s = PeriodicComponent::cosine(0.05, 1, 2), st = PeriodicComponent::cantor(12, std::log(6.0), 2.0);
    for (int k = 1; k <= 15; ++k) {
        double tau = std::pow(10.0, k);
        double r = almost_mellin(f, s, g, st, tau) / mellin_convolve(f, g, tau);
        // s in [0.95, 1.05]; the measure d rho~/rho~ has density between 0 and (max s~/min s~)/p ... bounded
        EXPECT_GT(r, 0.1);
        EXPECT_LT(r, 5.0);
    }
}

TEST(Tensor, Classification) {
    auto p2 = cosine_model(0.05), p3 = MarginalSpectrum::power(3);
    EXPECT_EQ(classify_case(p2, p3, PeriodRelation::incommensurable()).kind, CaseTag::Kind::DominantExponent);
    auto sw = classify_case(p3, p2, PeriodRelation::incommensurable());
    EXPECT_EQ(sw.kind, CaseTag::Kind::DominantExponent);
    EXPECT_TRUE(sw.swapped);
    EXPECT_EQ(sw.first.identity(), p2.identity());
    auto q = cosine_model(0.07);
    EXPECT_EQ(classify_case(p2, q, PeriodRelation::common()).kind, CaseTag::Kind::EqualDivergentCommon);
    EXPECT_EQ(classify_case(p2, cosine_model(0.07, std::sqrt(2.0)), PeriodRelation::incommensurable()).kind,
              CaseTag::Kind::EqualDivergentIncomm);
    auto c1 = MarginalSpectrum::by_counting(2, SlowlyVaryingFn::logpow(-2), PeriodicComponent::constant(1, 2));
    for (auto rel : {PeriodRelation::common(), PeriodRelation::incommensurable()})
        EXPECT_EQ(classify_case(c1, c1, rel).kind, CaseTag::Kind::BothConvergent);
    auto one = classify_case(p2, c1, PeriodRelation::common());
    EXPECT_EQ(one.kind, CaseTag::Kind::OneConvergent);
    EXPECT_EQ(one.first.identity(), c1.identity());
    EXPECT_THROW(classify_case(p2, c1, PeriodRelation::incommensurable()), UnsupportedCase);
    auto ex = MarginalSpectrum::explicit_list({1, 0.1});
    EXPECT_THROW(classify_case(ex, ex, PeriodRelation::common()), UnsupportedCase);
    EXPECT_EQ(classify_case(ex, p2, PeriodRelation::common()).first.identity(), p2.identity());
    EXPECT_THROW(classify_case(MarginalSpectrum::power(2), p3, PeriodRelation::common()), UnsupportedCase);
    // swapped marginals swap the declared ratio
    auto a = cosine_model(0.05, 2.0, 3.0), b = MarginalSpectrum::by_counting(2, SlowlyVaryingFn::constant(1), PeriodicComponent::cosine(0.05, 1.0, 2.0));
    auto t = classify_case(a, b, PeriodRelation::common(2, 1));
    EXPECT_TRUE(t.swapped);
    EXPECT_EQ(t.relation, PeriodRelation::common(1, 2));
}

TEST(Tensor, PredictionExamples) {
    auto one = PeriodicComponent::constant(1, 2);
    auto a = MarginalSpectrum::by_counting(2, SlowlyVaryingFn::constant(1), one);
    auto th1 = predict(classify_case(a, MarginalSpectrum::power(3), PeriodRelation::common()));
    const double z = boost::math::zeta(1.5);
    for (double t : {1e-4, 1e-8}) EXPECT_NEAR(th1(t) * std::sqrt(t), z, 1e-5);

    auto th3 = predict(classify_case(a, a, PeriodRelation::common()));
    for (double t : {1e-4, 1e-8}) EXPECT_NEAR(th3(t) / (0.5 * std::log(1 / t) / std::sqrt(t)), 1.0, 1e-8);

    PredictSettings closed;
    closed.mellin = MellinMode::ClosedForm;
    auto th5 = predict(classify_case(a, a, PeriodRelation::incommensurable()), closed);
    for (double t : {1e-4, 1e-8}) EXPECT_NEAR(th5(t) / (0.5 * (1 + std::log(1 / t)) / std::sqrt(t)), 1.0, 1e-12);
}

TEST(Tensor, PredictionsPositiveAndNonincreasing) {
    std::vector<std::pair<MarginalSpectrum, MarginalSpectrum>> pairs{
        {cosine_model(0.05), MarginalSpectrum::power(3)},
        {cosine_model(0.05), cosine_model(0.07)},
        {MarginalSpectrum::by_counting(2, SlowlyVaryingFn::logpow(-2), PeriodicComponent::constant(1, 2)), cosine_model(0.05)},
        {MarginalSpectrum::by_counting(2, SlowlyVaryingFn::logpow(-2), PeriodicComponent::constant(1, 2)),
         MarginalSpectrum::by_counting(2, SlowlyVaryingFn::logpow(-3), PeriodicComponent::cosine(0.05, 1, 2))}};
    for (auto& [a, b] : pairs) {
        auto pr = predict(classify_case(a, b, PeriodRelation::common()));
        double prev = 0;
        for (int k = 0; k <= 120; ++k) {
            double t = std::pow(10.0, -3 - 0.075 * k);
            double v = pr(t);
            EXPECT_GT(v, 0);
            EXPECT_GE(v, prev) << pr.tag.name() << " t=" << t;
            prev = v;
        }
    }
}

TEST(Tensor, SandwichComponents) {
    auto a = cosine_model(0.05), b = cosine_model(0.07);
    // eps >= lambda_1(b): no retained terms, S = 0
    auto z = sandwich_components(a, b, 0.999, 1.05, 0.95, 1e-8);
    EXPECT_EQ(z.S, b.lambda1() >= 0.999 ? z.S : 0.0);
    // direct evaluation of the finite sum
    const double eps = 0.01, t = 1e-8;
    auto r = sandwich_components(a, b, eps, 1.05, 0.95, t);
    double S = 0;
    for (int k = 1; b.eigenvalue(k) >= eps; ++k) S += a.s().s(std::log(1 / t) + std::log(b.eigenvalue(k))) * std::sqrt(b.eigenvalue(k));
    EXPECT_NEAR(r.S, S, 1e-12 * S);
    // empty central interval
    auto e = sandwich_components(a, b, 0.5, 1.05, 0.95, 0.9);
    EXPECT_EQ(e.central, 0.0);
    for (double tt : {1e-6, 1e-7, 1e-8, 1e-9, 1e-10}) {
        auto s = sandwich_components(a, b, eps, 1.05, 0.95, tt);
        double n = static_cast<double>(tensor_counting(a, b, tt));
        EXPECT_LE(s.lower, n) << tt;
        EXPECT_GE(s.upper, n) << tt;
    }
}

TEST(Tensor, EstimateR) {
    auto c = MarginalSpectrum::by_counting(2, SlowlyVaryingFn::constant(1), PeriodicComponent::constant(1, 2));
    std::vector<double> taus{1e3, 1e6, 1e9};
    auto r = estimate_r(c, c, taus);
    for (double v : r.r) EXPECT_NEAR(v, 0.5, 1e-8);
    auto a = cosine_model(0.05), b = cosine_model(0.07, std::sqrt(2.0));
    std::vector<double> grid;
    for (int k = 2; k <= 40; k += 2) grid.push_back(std::pow(10.0, k));
    auto est = estimate_r(a, b, grid);
    EXPECT_GT(est.min, 0.5 * 0.5);
    EXPECT_LT(est.max, 2.0 * 0.5);
    double early = 0, late = 0;
    for (std::size_t i = 0; i < 5; ++i) early = std::max(early, std::max(std::abs(est.drift_T[i]), std::abs(est.drift_Tt[i])));
    for (std::size_t i = grid.size() - 5; i < grid.size(); ++i)
        late = std::max(late, std::max(std::abs(est.drift_T[i]), std::abs(est.drift_Tt[i])));
    EXPECT_LT(late, early);
}
