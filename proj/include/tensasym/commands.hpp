#ifndef TENSASYM_COMMANDS_HPP
#define TENSASYM_COMMANDS_HPP

#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "config.hpp"
#include "smalldev.hpp"
#include "spectrum.hpp"
#include "tensor.hpp"

namespace tensasym {

/// Exit codes shared by the CLI.
enum ExitCode : int { kOk = 0, kToleranceMissed = 1, kUnsupported = 2, kConfigError = 3, kRuntimeError = 4 };

struct CommandOutput {
    std::string text;     // CSV or JSON
    std::string message;  // diagnostics for stderr
    int exit_code = kOk;
};

inline std::string fmt_num(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.15g", x);
    return buf;
}

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header) : cols_(header.size()) { row_strings(header); }
    template <class... Ts>
    void row(const Ts&... xs) {
        std::vector<std::string> cells{cell(xs)...};
        row_strings(cells);
    }
    void row_strings(const std::vector<std::string>& cells) {
        if (cells.size() != cols_) throw std::logic_error("csv row width mismatch");
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) os_ << ',';
            os_ << cells[i];
        }
        os_ << '\n';
    }
    std::string str() const { return os_.str(); }

private:
    std::size_t cols_;
    std::ostringstream os_;
    static std::string cell(double x) { return fmt_num(x); }
    static std::string cell(std::int64_t x) { return std::to_string(x); }
    static std::string cell(int x) { return std::to_string(x); }
    static std::string cell(const std::string& s) { return s; }
    static std::string cell(const char* s) { return s; }
};

namespace detail {

inline PredictSettings predict_settings(const ExperimentConfig& c) {
    PredictSettings ps;
    ps.quad.tol = c.tolerances.quad;
    ps.series_tol = c.tolerances.series;
    auto mode = c.option<std::string>("mellin", "numeric");
    if (mode == "closed_form")
        ps.mellin = MellinMode::ClosedForm;
    else if (mode != "numeric")
        throw ConfigError("options.mellin must be 'numeric' or 'closed_form'");
    ps.grid = c.option<std::size_t>("grid", 4096);
    return ps;
}

inline std::pair<MarginalSpectrum, MarginalSpectrum> pair_of(const ExperimentConfig& c) {
    if (c.spectra.size() != 2) throw ConfigError("this command needs exactly two spectra");
    auto s = c.build_spectra();
    return {s[0], s[1]};
}

inline AsymptoticPrediction make_prediction(const ExperimentConfig& c) {
    auto [a, b] = pair_of(c);
    auto tag = classify_case(a, b, c.period_relation);
    return predict(tag, predict_settings(c));
}

inline std::function<double(double)> prediction_column(const ExperimentConfig& c, const AsymptoticPrediction& pr) {
    auto form = c.option<std::string>("form", "full");
    if (form == "leading") return pr.leading;
    if (form != "full") throw ConfigError("options.form must be 'full' or 'leading'");
    return pr.evaluator;
}

inline std::int64_t count_row(const std::vector<MarginalSpectrum>& specs, double t) {
    try {
        return tensor_counting_multi(specs, t);
    } catch (const RangeError& e) {
        throw RangeError("row t = " + fmt_num(t) + ": " + e.what());
    }
}

inline SmallDevModel smalldev_model(const ExperimentConfig& c) {
    const auto n_cut = c.option<std::int64_t>("n_cut", SmallDevModel::kDefaultNCut);
    auto model = c.option<std::string>("model", c.spectra.size() == 1 ? "marginal" : "prediction");
    if (model == "marginal") {
        if (c.spectra.size() != 1) throw ConfigError("options.model 'marginal' needs one spectrum");
        return SmallDevModel::from_spectrum(c.spectra[0].build(), n_cut);
    }
    if (model == "tensor") {
        auto specs = c.build_spectra();
        double p = c.option<double>("p", std::numeric_limits<double>::quiet_NaN());
        if (std::isnan(p)) {
            p = std::numeric_limits<double>::infinity();
            for (const auto& s : specs) p = std::min(p, s.exponent());
        }
        return SmallDevModel::from_tensor(specs, p, n_cut);
    }
    if (model == "prediction") {
        auto pr = make_prediction(c);
        return SmallDevModel::from_spectrum(prediction_as_model(pr), n_cut);
    }
    throw ConfigError("options.model must be 'marginal', 'tensor' or 'prediction'");
}

inline double smalldev_p(const ExperimentConfig& c, const SmallDevModel& m) {
    return c.option<double>("p", m.p());
}

}  // namespace detail

/// Rows (t, N_exact).
inline CommandOutput cmd_count(const ExperimentConfig& c) {
    if (c.spectra.empty()) throw ConfigError("count needs at least one spectrum");
    auto specs = c.build_spectra();
    auto grid = c.t_grid.build();
    auto counts = parallel_map<std::int64_t>(grid.size(), [&](std::size_t i) { return detail::count_row(specs, grid[i]); });
    CsvWriter w({"t", "N_exact"});
    for (std::size_t i = 0; i < grid.size(); ++i) w.row(grid[i], counts[i]);
    return {w.str(), "", kOk};
}

inline CommandOutput cmd_classify(const ExperimentConfig& c) {
    auto [a, b] = detail::pair_of(c);
    auto tag = classify_case(a, b, c.period_relation);
    json j{{"case", tag.name()},
           {"swapped", tag.swapped},
           {"exponent", tag.first.exponent()},
           {"period_relation", tag.relation}};
    if (tag.first.has_counting_form()) j["first_phi"] = svf_to_json(tag.first.phi());
    if (tag.second.has_counting_form()) j["second_phi"] = svf_to_json(tag.second.phi());
    return {j.dump(2) + "\n", "", kOk};
}

/// Rows (t, N_pred, case_tag).
inline CommandOutput cmd_predict(const ExperimentConfig& c) {
    auto pr = detail::make_prediction(c);
    auto col = detail::prediction_column(c, pr);
    auto grid = c.t_grid.build();
    auto vals = parallel_map<double>(grid.size(), [&](std::size_t i) { return col(grid[i]); });
    CsvWriter w({"t", "N_pred", "case_tag"});
    for (std::size_t i = 0; i < grid.size(); ++i) w.row(grid[i], vals[i], pr.tag.name());
    return {w.str(), pr.form, kOk};
}

/// Side output when no predictor applies: the almost-Mellin ratio r and its period drifts.
inline std::string estimate_r_csv(const ExperimentConfig& c) {
    auto [a, b] = detail::pair_of(c);
    std::vector<double> taus;
    for (double t : c.t_grid.build()) taus.push_back(1.0 / t);
    QuadratureSettings qs;
    qs.tol = c.tolerances.quad;
    auto est = estimate_r(a, b, taus, qs);
    CsvWriter w({"ln_tau", "r", "drift_T", "drift_T_tilde"});
    for (std::size_t i = 0; i < est.r.size(); ++i) w.row(est.log_tau[i], est.r[i], est.drift_T[i], est.drift_Tt[i]);
    return w.str();
}

/**
 * Rows (t, N_exact, N_pred, ratio, case_tag). Exit code 1 when a ratio in the
 * final decade of the grid misses options "tolerance" (default tolerances.ratio).
 */
inline CommandOutput cmd_compare(const ExperimentConfig& c) {
    auto [a, b] = detail::pair_of(c);
    CaseTag tag = classify_case(a, b, c.period_relation);
    if (tag.kind == CaseTag::Kind::EqualDivergentIncomm && c.option<std::string>("incommensurable", "constant") == "explore") {
        return {estimate_r_csv(c),
                "no predictor: incommensurable periods in exploration mode; the side output lists the ratio r of the "
                "almost-Mellin to the Mellin convolution and its drift over each period",
                kUnsupported};
    }
    AsymptoticPrediction pr = [&] {
        try {
            return predict(tag, detail::predict_settings(c));
        } catch (const UnsupportedCase& e) {
            if (tag.kind == CaseTag::Kind::EqualDivergentIncomm)
                throw UnsupportedCase(std::string(e.what()) + "\n" + estimate_r_csv(c), e.hypothesis);
            throw;
        }
    }();
    auto col = detail::prediction_column(c, pr);
    const std::vector<MarginalSpectrum> specs{a, b};
    auto grid = c.t_grid.build();
    struct Row {
        std::int64_t exact;
        double pred;
    };
    auto rows = parallel_map<Row>(grid.size(), [&](std::size_t i) {
        return Row{detail::count_row(specs, grid[i]), col(grid[i])};
    });
    const double tol = c.option<double>("tolerance", c.tolerances.ratio);
    CsvWriter w({"t", "N_exact", "N_pred", "ratio", "case_tag"});
    bool ok = true;
    const double t_last = grid.empty() ? 0.0 : grid.back();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        double ratio = static_cast<double>(rows[i].exact) / rows[i].pred;
        w.row(grid[i], rows[i].exact, rows[i].pred, ratio, tag.name());
        if (grid[i] <= 10.0 * t_last * (1.0 + 1e-12) && !(std::abs(ratio - 1.0) <= tol)) ok = false;
    }
    std::string msg = pr.form;
    if (!ok) msg += "\nfinal-decade ratio outside tolerance " + fmt_num(tol);
    return {w.str(), msg, ok ? kOk : kToleranceMissed};
}

/// Rows (eps, ln_p_asymptotic, regime_flag, mc_p_hat, mc_ci_lo, mc_ci_hi); MC columns when options.mc_samples > 0.
inline CommandOutput cmd_smalldev(const ExperimentConfig& c) {
    auto m = detail::smalldev_model(c);
    SmallDevSettings st;
    st.accuracy = c.tolerances.smalldev;
    auto eps = c.eps_grid.build();
    const auto n_mc = c.option<std::int64_t>("mc_samples", 0);
    std::vector<SmallBallResult> res(eps.size());
    for (std::size_t i = 0; i < eps.size(); ++i) res[i] = log_small_ball(m, eps[i], st);
    CsvWriter w({"eps", "ln_p_asymptotic", "regime_flag", "mc_p_hat", "mc_ci_lo", "mc_ci_hi"});
    for (std::size_t i = 0; i < eps.size(); ++i) {
        std::string flag = res[i].in_regime ? "ok" : "outside";
        if (n_mc > 0) {
            auto mc = mc_small_ball(m, eps[i], n_mc, c.seed);
            w.row(eps[i], res[i].ln_p, flag, mc.p_hat, mc.ci_lo, mc.ci_hi);
        } else {
            w.row_strings({fmt_num(eps[i]), fmt_num(res[i].ln_p), flag, "", "", ""});
        }
    }
    return {w.str(), "", kOk};
}

/// Rows (eps, p_hat, ci_lo, ci_hi, successes, samples, one_sided).
inline CommandOutput cmd_mc(const ExperimentConfig& c) {
    auto m = detail::smalldev_model(c);
    auto eps = c.eps_grid.build();
    const auto n = c.option<std::int64_t>("mc_samples", 1000000);
    CsvWriter w({"eps", "p_hat", "ci_lo", "ci_hi", "successes", "samples", "one_sided"});
    for (double e : eps) {
        auto r = mc_small_ball(m, e, n, c.seed);
        w.row(e, r.p_hat, r.ci_lo, r.ci_hi, r.successes, r.samples, r.one_sided ? "1" : "0");
    }
    return {w.str(), "", kOk};
}

/**
 * JSON report: slope of ln(-ln P / ln^kappa(1/eps)) against ln(1/eps), its
 * target 2/(p-1), and the periodicity residual of zeta when options.period is set.
 */
inline CommandOutput cmd_fit(const ExperimentConfig& c) {
    auto m = detail::smalldev_model(c);
    SmallDevSettings st;
    st.accuracy = c.tolerances.smalldev;
    const double p = detail::smalldev_p(c, m);
    const double kappa = c.option<double>("kappa", 0.0);
    const double period = c.option<double>("period", 0.0);
    auto eps = c.eps_grid.build();
    auto rep = extract_zeta(m, p, period > 0 ? period : 1.0, kappa, eps, st);
    std::vector<double> x, y, y_raw;
    for (std::size_t i = 0; i < rep.x.size(); ++i) {
        x.push_back(rep.x[i]);
        y_raw.push_back(std::log(-rep.ln_p[i]));
        y.push_back(std::log(-rep.ln_p[i]) - kappa * std::log(rep.x[i]));
    }
    json j;
    j["p"] = p;
    j["kappa"] = kappa;
    j["target_slope"] = 2.0 / (p - 1.0);
    if (x.size() >= 2) {
        auto f = fit_slope(x, y);
        j["slope"] = f.slope;
        j["slope_unadjusted"] = fit_slope(x, y_raw).slope;
        j["relative_error"] = std::abs(f.slope / (2.0 / (p - 1.0)) - 1.0);
    }
    if (period > 0) {
        j["zeta"] = json{{"period", rep.period}, {"mean", rep.mean}, {"residual", rep.residual}};
    }
    json pts = json::array();
    for (std::size_t i = 0; i < rep.x.size(); ++i)
        pts.push_back(json{{"x", rep.x[i]}, {"ln_p", rep.ln_p[i]}, {"zeta", rep.zeta[i]}});
    j["points"] = pts;
    CommandOutput out{j.dump(2) + "\n", "", kOk};
    if (c.options.contains("max_relative_error") && j.contains("relative_error") &&
        !(j["relative_error"].get<double>() <= c.options["max_relative_error"].get<double>()))
        out.exit_code = kToleranceMissed;
    return out;
}

/// Dispatch by subcommand name; library errors become exit codes.
inline CommandOutput run_command(const std::string& name, const ExperimentConfig& c) {
    try {
        if (name == "count") return cmd_count(c);
        if (name == "predict") return cmd_predict(c);
        if (name == "compare") return cmd_compare(c);
        if (name == "classify") return cmd_classify(c);
        if (name == "smalldev") return cmd_smalldev(c);
        if (name == "mc") return cmd_mc(c);
        if (name == "fit") return cmd_fit(c);
        return {"", "unknown command '" + name + "'", kConfigError};
    } catch (const UnsupportedCase& e) {
        return {"", std::string("unsupported case: ") + e.what() + " (hypothesis: " + e.hypothesis + ")",
                kUnsupported};
    } catch (const ConfigError& e) {
        return {"", e.what(), kConfigError};
    } catch (const nlohmann::json::exception& e) {
        return {"", std::string("config: ") + e.what(), kConfigError};
    } catch (const std::exception& e) {
        return {"", e.what(), kRuntimeError};
    }
}

}  // namespace tensasym

#endif
