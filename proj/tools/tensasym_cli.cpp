#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "tensasym/tensasym.hpp"

int main(int argc, char** argv) {
    CLI::App app{"tensasym: counting and small-ball asymptotics for tensor products of compact operators"};
    app.require_subcommand(1);

    std::string config_path, out_path;
    int threads = 0;
    std::optional<std::uint64_t> seed;

    const std::vector<std::pair<std::string, std::string>> commands{
        {"count", "exact tensor-product counting N(t) on the t grid"},
        {"predict", "asymptotic prediction on the t grid"},
        {"compare", "exact counts against the prediction, with ratio check"},
        {"classify", "which asymptotic regime applies to the two marginals"},
        {"smalldev", "log small-ball probabilities on the eps grid"},
        {"mc", "Monte Carlo small-ball probabilities on the eps grid"},
        {"fit", "exponent fit and periodic-component report"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_path, "write output here instead of stdout");
        sub->add_option("--threads", threads, "worker threads (0 = runtime default)")->check(CLI::NonNegativeNumber);
        sub->add_option("--seed", seed, "override the config seed");
    }
    CLI11_PARSE(app, argc, argv);

    tensasym::set_thread_count(threads);
    const std::string name = app.get_subcommands().front()->get_name();

    tensasym::CommandOutput out;
    try {
        auto cfg = tensasym::load_config(config_path);
        if (seed) cfg.seed = *seed;
        out = tensasym::run_command(name, cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return tensasym::kConfigError;
    }

    if (!out.message.empty()) std::cerr << out.message << "\n";
    if (out_path.empty()) {
        std::cout << out.text;
    } else {
        std::ofstream f(out_path, std::ios::binary);
        if (!f) {
            std::cerr << "error: cannot write " << out_path << "\n";
            return tensasym::kRuntimeError;
        }
        f << out.text;
    }
    return out.exit_code;
}
