#include <gtest/gtest.h>

#include <filesystem>

#include "tensasym/config.hpp"

using namespace tensasym;

namespace {
const char* kFull = R"({
  "spectra": [
    {"kind": "by_counting", "name": "a", "p": 2.0, "phi": {"kind": "logpow", "kappa": -2.0},
     "s": {"kind": "cosine", "T": 1.0, "a": 0.05, "p": 2.0}},
    {"kind": "by_eigenvalue", "p": 3.0, "psi": {"kind": "product", "factors": [2.0, {"kind": "logpow", "kappa": 0.5}]},
     "s": {"kind": "cosine", "T": 1.7917594692280550, "a": 0.01}, "n_max": 5000,
     "counting_form": {"phi": {"kind": "const", "c": 1.0}, "s": {"kind": "cantor", "T": 1.7917594692280550, "depth": 10}}},
    {"kind": "explicit", "lambdas": [1.0, 0.5, 0.25]},
    {"kind": "by_counting", "p": 2.0, "s": {"kind": "pl_rho", "T": 1.0, "knots": [1.0, 1.2, 1.2, 1.6487212707001282]}}
  ],
  "period_relation": {"kind": "common", "m": 2, "n": 1},
  "t_grid": {"start": 1e-2, "stop": 1e-8, "points": 13},
  "eps_grid": {"values": [0.1, 0.05, 0.01]},
  "tolerances": {"quad": 1e-10, "series": 1e-7, "ratio": 0.1, "smalldev": 1e-4},
  "options": {"tolerance": 0.2, "mellin": "closed_form"},
  "seed": 42
})";
}  // namespace

TEST(Config, RoundTripIsIdentity) {
    auto c = parse_config(kFull);
    auto text = serialize_config(c);
    auto d = parse_config(text);
    EXPECT_EQ(c, d);
    EXPECT_EQ(text, serialize_config(d));
    EXPECT_EQ(c.spectra.size(), 4u);
    EXPECT_EQ(c.seed, 42u);
    EXPECT_EQ(c.period_relation, PeriodRelation::common(2, 1));
    EXPECT_EQ(c.option<std::string>("mellin", ""), "closed_form");
    EXPECT_EQ(c.option<double>("missing", 3.5), 3.5);
    auto specs = c.build_spectra();
    EXPECT_TRUE(specs[1].has_counting_form());
    EXPECT_DOUBLE_EQ(specs[2].eigenvalue(3), 0.25);
}

TEST(Config, ShippedConfigsParseAndRoundTrip) {
    int n = 0;
    for (const auto& e : std::filesystem::directory_iterator(TENSASYM_CONFIG_DIR)) {
        if (e.path().extension() != ".json") continue;
        auto c = load_config(e.path().string());
        EXPECT_EQ(parse_config(serialize_config(c)), c) << e.path();
        EXPECT_NO_THROW(c.build_spectra()) << e.path();
        ++n;
    }
    EXPECT_GE(n, 10);
}

TEST(Config, Grids) {
    GridSpec g{1e-2, 1e-6, 5, {}};
    auto v = g.build();
    ASSERT_EQ(v.size(), 5u);
    EXPECT_EQ(v.front(), 1e-2);
    EXPECT_EQ(v.back(), 1e-6);
    EXPECT_NEAR(v[2], 1e-4, 1e-18);
    EXPECT_TRUE((GridSpec{1, 0.1, 0, {}}).build().empty());
    EXPECT_THROW(parse_config(R"({"t_grid": {"start": 1e-6, "stop": 1e-2, "points": 3}})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"t_grid": {"values": [0.1, 0.1]}})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"eps_grid": {"values": [0.1, -0.1]}})"), ConfigError);
    EXPECT_NO_THROW(parse_config(R"({"t_grid": {"start": 1e-2, "stop": 1e-3, "points": 0}})"));
}

TEST(Config, ValidationErrors) {
    EXPECT_THROW(parse_config("[1, 2]"), ConfigError);
    EXPECT_THROW(parse_config("{not json"), ConfigError);
    EXPECT_THROW(parse_config(R"({"tolerances": {"ratio": 0}})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"tolerances": {"quad": -1}})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"options": [1]})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"period_relation": {"kind": "sometimes"}})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"period_relation": {"kind": "common", "m": 0, "n": 1}})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"spectra": [{"kind": "wavelet"}]})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"spectra": [{"kind": "by_counting", "p": 2, "phi": {"kind": "exp"}}]})"), ConfigError);
    EXPECT_THROW(parse_config(R"({"spectra": [{"kind": "by_counting", "p": 2, "s": {"kind": "const", "p": 3}}]})"),
                 ConfigError);
    EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, BuildErrorsNameTheSpectrum) {
    auto c = parse_config(R"({"spectra": [{"kind": "by_counting", "name": "bad", "p": 2,
                                            "s": {"kind": "cosine", "T": 1, "a": 0.5}}]})");
    try {
        c.build_spectra();
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("bad"), std::string::npos);
    }
    auto k = parse_config(R"({"spectra": [{"kind": "by_counting", "p": 2, "s": {"kind": "spiral"}}]})");
    EXPECT_THROW(k.build_spectra(), ConfigError);
}

TEST(Config, SvfEncodings) {
    EXPECT_EQ(svf_from_json(json(2.5)).coefficient(), 2.5);
    auto f = svf_from_json(json::parse(R"({"kind": "product", "factors": [{"kind": "const", "c": 3}, {"kind": "logpow", "kappa": -1.5}]})"));
    EXPECT_DOUBLE_EQ(f.kappa(), -1.5);
    EXPECT_DOUBLE_EQ(f.coefficient(), 3.0);
    auto back = svf_from_json(svf_to_json(f));
    EXPECT_DOUBLE_EQ(back.at_log(7.0), f.at_log(7.0));
    EXPECT_THROW(svf_from_json(json::parse(R"({"c": 1})")), ConfigError);
}
