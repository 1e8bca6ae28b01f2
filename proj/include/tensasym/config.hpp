#ifndef TENSASYM_CONFIG_HPP
#define TENSASYM_CONFIG_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "common.hpp"
#include "periodic.hpp"
#include "spectrum.hpp"
#include "svf.hpp"

namespace tensasym {

using nlohmann::json;

// ---------------------------------------------------------------------------
// encodings
// ---------------------------------------------------------------------------

inline SlowlyVaryingFn svf_from_json(const json& j) {
    if (j.is_number()) return SlowlyVaryingFn::constant(j.get<double>());
    if (!j.is_object() || !j.contains("kind")) throw ConfigError("SVF needs a 'kind' (const | logpow | product)");
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "const") return SlowlyVaryingFn::constant(j.value("c", 1.0));
    if (kind == "logpow") return SlowlyVaryingFn::logpow(j.at("kappa").get<double>());
    if (kind == "product") {
        std::vector<SlowlyVaryingFn> fs;
        for (const auto& f : j.at("factors")) fs.push_back(svf_from_json(f));
        return SlowlyVaryingFn::product(std::move(fs));
    }
    throw ConfigError("unknown SVF kind '" + kind + "'");
}

inline json svf_to_json(const SlowlyVaryingFn& f) {
    const auto& v = f.variant();
    if (auto c = std::get_if<SlowlyVaryingFn::Const>(&v)) return json{{"kind", "const"}, {"c", c->c}};
    if (auto l = std::get_if<SlowlyVaryingFn::LogPow>(&v)) return json{{"kind", "logpow"}, {"kappa", l->kappa}};
    json arr = json::array();
    for (const auto& g : std::get<SlowlyVaryingFn::Product>(v).factors) arr.push_back(svf_to_json(g));
    return json{{"kind", "product"}, {"factors", arr}};
}

/// Periodic component encoding; the exponent p comes from the enclosing spectrum.
struct PeriodicSpec {
    std::string kind = "const";  // const | cosine | cantor | pl_rho
    double period = 1.0;
    double a = 1.0;
    int depth = 12;
    std::vector<double> knots, positions;

    bool operator==(const PeriodicSpec&) const = default;

    PeriodicComponent build(double p) const {
        if (kind == "const") return PeriodicComponent::constant(a, p, period);
        if (kind == "cosine") return PeriodicComponent::cosine(a, period, p);
        if (kind == "cantor") return PeriodicComponent::cantor(depth, period, p);
        if (kind == "pl_rho") return PeriodicComponent::piecewise(knots, period, p, positions);
        throw ConfigError("unknown periodic kind '" + kind + "'");
    }
};

inline void to_json(json& j, const PeriodicSpec& s) {
    j = json{{"kind", s.kind}, {"T", s.period}};
    if (s.kind == "const" || s.kind == "cosine") j["a"] = s.a;
    if (s.kind == "cantor") j["depth"] = s.depth;
    if (s.kind == "pl_rho") {
        j["knots"] = s.knots;
        if (!s.positions.empty()) j["positions"] = s.positions;
    }
}

inline void from_json(const json& j, PeriodicSpec& s) {
    s = PeriodicSpec{};
    s.kind = j.value("kind", std::string("const"));
    s.period = j.value("T", 1.0);
    if (s.kind == "const") s.a = j.value("a", 1.0);
    if (s.kind == "cosine") s.a = j.value("a", 0.0);
    if (s.kind == "cantor") s.depth = j.value("depth", 12);
    if (s.kind == "pl_rho") {
        s.knots = j.at("knots").get<std::vector<double>>();
        s.positions = j.value("positions", std::vector<double>{});
    }
}

struct SpectrumSpec {
    std::string kind = "by_eigenvalue";  // explicit | by_eigenvalue | by_counting
    std::vector<double> lambdas;
    double p = 2.0;
    json svf = json{{"kind", "const"}, {"c", 1.0}};  // psi for by_eigenvalue, phi for by_counting
    PeriodicSpec s;
    std::optional<json> counting_phi;  // declared counting-side form of a by_eigenvalue model
    std::optional<PeriodicSpec> counting_s;
    std::int64_t n_max = MarginalSpectrum::kDefaultNMax;
    std::string name;

    bool operator==(const SpectrumSpec&) const = default;

    MarginalSpectrum build() const {
        try {
            if (kind == "explicit") return MarginalSpectrum::explicit_list(lambdas);
            if (kind == "by_counting") return MarginalSpectrum::by_counting(p, svf_from_json(svf), s.build(p), n_max);
            if (kind == "by_eigenvalue") {
                MarginalSpectrum::ByEigenvalue e{p, svf_from_json(svf), s.build(p), std::nullopt};
                if (counting_phi)
                    e.counting_form = MarginalSpectrum::CountingForm{
                        svf_from_json(*counting_phi), counting_s.value_or(PeriodicSpec{}).build(p)};
                return MarginalSpectrum(std::move(e), n_max);
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& ex) {
            throw ConfigError("spectrum '" + name + "': " + ex.what());
        }
        throw ConfigError("unknown spectrum kind '" + kind + "'");
    }
};

inline void to_json(json& j, const SpectrumSpec& s) {
    j = json{{"kind", s.kind}};
    if (!s.name.empty()) j["name"] = s.name;
    if (s.kind == "explicit") {
        j["lambdas"] = s.lambdas;
        return;
    }
    j["p"] = s.p;
    j[s.kind == "by_counting" ? "phi" : "psi"] = s.svf;
    j["s"] = s.s;
    if (s.n_max != MarginalSpectrum::kDefaultNMax) j["n_max"] = s.n_max;
    if (s.counting_phi) {
        json cf{{"phi", *s.counting_phi}};
        if (s.counting_s) cf["s"] = *s.counting_s;
        j["counting_form"] = cf;
    }
}

inline void from_json(const json& j, SpectrumSpec& s) {
    s = SpectrumSpec{};
    s.kind = j.at("kind").get<std::string>();
    s.name = j.value("name", std::string());
    if (s.kind == "explicit") {
        s.lambdas = j.at("lambdas").get<std::vector<double>>();
        return;
    }
    if (s.kind != "by_eigenvalue" && s.kind != "by_counting") throw ConfigError("unknown spectrum kind '" + s.kind + "'");
    s.p = j.at("p").get<double>();
    const char* key = s.kind == "by_counting" ? "phi" : "psi";
    if (j.contains(key)) {
        svf_from_json(j.at(key));  // reject bad encodings early
        s.svf = j.at(key);
    }
    auto periodic = [&](const json& e) {
        if (e.contains("p") && std::abs(e.at("p").get<double>() - s.p) > 1e-12 * s.p)
            throw ConfigError("periodic component p differs from the spectrum p");
        return e.get<PeriodicSpec>();
    };
    if (j.contains("s")) s.s = periodic(j.at("s"));
    s.n_max = j.value("n_max", MarginalSpectrum::kDefaultNMax);
    if (j.contains("counting_form")) {
        const auto& cf = j.at("counting_form");
        svf_from_json(cf.at("phi"));
        s.counting_phi = cf.at("phi");
        if (cf.contains("s")) s.counting_s = periodic(cf.at("s"));
    }
}

inline void to_json(json& j, const PeriodRelation& r) {
    if (r.is_common())
        j = json{{"kind", "common"}, {"m", r.m}, {"n", r.n}};
    else
        j = json{{"kind", "incommensurable"}};
}

inline void from_json(const json& j, PeriodRelation& r) {
    auto kind = j.value("kind", std::string("common"));
    if (kind == "common")
        r = PeriodRelation::common(j.value("m", 1L), j.value("n", 1L));
    else if (kind == "incommensurable")
        r = PeriodRelation::incommensurable();
    else
        throw ConfigError("period_relation.kind must be 'common' or 'incommensurable'");
    if (r.is_common() && (r.m < 1 || r.n < 1)) throw ConfigError("period_relation m and n must be positive");
}

/// Geometric grid from start down to stop, or an explicit list of values.
struct GridSpec {
    double start = 1e-2, stop = 1e-6;
    int points = 0;
    std::vector<double> values;

    bool operator==(const GridSpec&) const = default;

    std::vector<double> build() const {
        if (!values.empty()) return values;
        std::vector<double> g;
        if (points <= 0) return g;
        if (points == 1) return {start};
        const double ls = std::log(start), le = std::log(stop);
        for (int i = 0; i < points; ++i) g.push_back(std::exp(ls + (le - ls) * i / (points - 1)));
        g.front() = start;
        g.back() = stop;
        return g;
    }

    void validate(const char* what) const {
        auto g = build();
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (!(g[i] > 0)) throw ConfigError(std::string(what) + " values must be positive");
            if (i && !(g[i] < g[i - 1])) throw ConfigError(std::string(what) + " must be strictly decreasing");
        }
    }
};

inline void to_json(json& j, const GridSpec& g) {
    if (!g.values.empty())
        j = json{{"values", g.values}};
    else
        j = json{{"start", g.start}, {"stop", g.stop}, {"points", g.points}};
}

inline void from_json(const json& j, GridSpec& g) {
    g = GridSpec{};
    if (j.contains("values")) {
        g.values = j.at("values").get<std::vector<double>>();
        return;
    }
    g.start = j.at("start").get<double>();
    g.stop = j.at("stop").get<double>();
    g.points = j.at("points").get<int>();
}

struct Tolerances {
    double quad = 1e-9;
    double series = 1e-6;
    double ratio = 0.05;
    double smalldev = 1e-3;

    bool operator==(const Tolerances&) const = default;
};

inline void to_json(json& j, const Tolerances& t) {
    j = json{{"quad", t.quad}, {"series", t.series}, {"ratio", t.ratio}, {"smalldev", t.smalldev}};
}

inline void from_json(const json& j, Tolerances& t) {
    t = Tolerances{};
    t.quad = j.value("quad", t.quad);
    t.series = j.value("series", t.series);
    t.ratio = j.value("ratio", t.ratio);
    t.smalldev = j.value("smalldev", t.smalldev);
}

struct ExperimentConfig {
    std::vector<SpectrumSpec> spectra;
    PeriodRelation period_relation = PeriodRelation::common();
    GridSpec t_grid;
    GridSpec eps_grid;
    Tolerances tolerances;
    json options = json::object();
    std::uint64_t seed = 1;

    bool operator==(const ExperimentConfig& o) const {
        return spectra == o.spectra && period_relation == o.period_relation && t_grid == o.t_grid &&
               eps_grid == o.eps_grid && tolerances == o.tolerances && options == o.options && seed == o.seed;
    }

    std::vector<MarginalSpectrum> build_spectra() const {
        std::vector<MarginalSpectrum> out;
        for (const auto& s : spectra) out.push_back(s.build());
        return out;
    }

    template <class T>
    T option(const std::string& key, T fallback) const {
        return options.contains(key) ? options.at(key).get<T>() : fallback;
    }
};

inline void to_json(json& j, const ExperimentConfig& c) {
    j = json{{"spectra", c.spectra},
             {"period_relation", c.period_relation},
             {"t_grid", c.t_grid},
             {"eps_grid", c.eps_grid},
             {"tolerances", c.tolerances},
             {"options", c.options},
             {"seed", c.seed}};
}

inline void validate(const ExperimentConfig& c) {
    c.t_grid.validate("t_grid");
    c.eps_grid.validate("eps_grid");
    const auto& t = c.tolerances;
    if (!(t.quad > 0 && t.series > 0 && t.ratio > 0 && t.smalldev > 0)) throw ConfigError("tolerances must be > 0");
    if (!c.options.is_object()) throw ConfigError("options must be an object");
}

inline void from_json(const json& j, ExperimentConfig& c) {
    c = ExperimentConfig{};
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    if (j.contains("spectra")) c.spectra = j.at("spectra").get<std::vector<SpectrumSpec>>();
    if (j.contains("period_relation")) c.period_relation = j.at("period_relation").get<PeriodRelation>();
    if (j.contains("t_grid")) c.t_grid = j.at("t_grid").get<GridSpec>();
    if (j.contains("eps_grid")) c.eps_grid = j.at("eps_grid").get<GridSpec>();
    if (j.contains("tolerances")) c.tolerances = j.at("tolerances").get<Tolerances>();
    if (j.contains("options")) c.options = j.at("options");
    c.seed = j.value("seed", std::uint64_t{1});
}

inline ExperimentConfig parse_config(const std::string& text) {
    ExperimentConfig c;
    try {
        c = json::parse(text).get<ExperimentConfig>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    validate(c);
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

inline std::string serialize_config(const ExperimentConfig& c) { return json(c).dump(2); }

}  // namespace tensasym

#endif
