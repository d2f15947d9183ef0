// wattserve: power-aware LLM serving simulator and controller toolkit.
//
// Pipeline:  profile -> train -> simulate -> pareto / report
//
// Exit codes: 0 ok, 2 configuration error, 3 data error, 4 runtime error.

#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "wattserve/commands.hpp"

namespace {

std::filesystem::path out_root() {
    if (const char* env = std::getenv("WATTSERVE_OUT_ROOT")) return env;
    return ".";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"power-aware LLM serving simulator"};
    app.require_subcommand(1);

    std::string profiles_dir = "data/profiles";
    app.add_option("--profiles", profiles_dir, "directory with model profiles + platform.json");

    // profile
    auto* profile = app.add_subcommand("profile", "sweep the knob grid on the simulated backend");
    std::string grid_file, models_csv, profile_out = "out/profiling";
    std::uint64_t profile_seed = 7;
    double noise_sigma = 0.02;
    profile->add_option("--grid", grid_file, "sweep grid JSON (default: built-in full grid)");
    profile->add_option("--models", models_csv, "comma-separated model ids (default: all)");
    profile->add_option("--seed", profile_seed, "measurement noise seed");
    profile->add_option("--noise", noise_sigma, "multiplicative noise sigma (default 0.02)");
    profile->add_option("--out", profile_out, "output directory");

    // train
    auto* train = app.add_subcommand("train", "fit the tree-ensemble predictor");
    std::vector<std::string> datasets;
    std::string train_out = "out/model";
    std::uint64_t train_seed = 11;
    double holdout = 0.2;
    wattserve::HyperParams hp;
    train->add_option("--dataset", datasets, "profiling CSV file(s)")->required();
    train->add_option("--seed", train_seed, "bootstrap/split seed");
    train->add_option("--holdout", holdout, "held-out fraction (default 0.2)");
    train->add_option("--trees", hp.n_trees, "trees per target (default 100)");
    train->add_option("--max-depth", hp.max_depth, "tree depth limit (default 12)");
    train->add_option("--min-leaf", hp.min_leaf, "minimum rows per leaf (default 2)");
    train->add_option("--out", train_out, "output directory");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "run a cluster scenario");
    std::string scenario_file, predictor_file, policy_override, sim_out = "out/sim";
    simulate->add_option("--scenario", scenario_file, "scenario JSON")->required();
    simulate->add_option("--model", predictor_file, "trained predictor JSON");
    simulate->add_option("--policy", policy_override,
                         "override scenario policy (fixed|adaptive-batch|adaptive-cap|joint|"
                         "oracle|suite)");
    simulate->add_option("--out", sim_out, "output directory");

    // pareto
    auto* pareto = app.add_subcommand("pareto", "frontier construction per knob regime");
    std::string pareto_model, regimes_csv = "sw-only,hw-only,hw-sw,joint";
    std::string pareto_out = "out/pareto";
    pareto->add_option("--model-id", pareto_model, "profile name")->required();
    pareto->add_option("--regimes", regimes_csv, "comma-separated regime names");
    pareto->add_option("--out", pareto_out, "output directory");

    // report
    auto* report = app.add_subcommand("report", "markdown comparison across policies");
    std::vector<std::string> summary_files;
    std::string report_out = "out/report.md";
    report->add_option("--summary", summary_files, "policy summary JSON file(s)")->required();
    report->add_option("--out", report_out, "output markdown path");

    CLI11_PARSE(app, argc, argv);

    auto split_list = [](const std::string& s) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string item;
        while (std::getline(ss, item, ','))
            if (!item.empty()) out.push_back(item);
        return out;
    };

    const auto root = out_root();
    try {
        if (profile->parsed()) {
            const auto res = wattserve::cmd_profile(
                profiles_dir, std::filesystem::path(grid_file), split_list(models_csv),
                profile_seed, noise_sigma, root / profile_out);
            std::cout << "wrote " << res.dataset_files.size() << " dataset file(s), "
                      << res.total_records << " records\n";
        } else if (train->parsed()) {
            std::vector<std::filesystem::path> files(datasets.begin(), datasets.end());
            const auto res = wattserve::cmd_train(files, profiles_dir, hp, holdout, train_seed,
                                                  root / train_out);
            std::cout << "model: " << res.model_file.string() << "\n"
                      << "holdout MAPE: throughput " << res.holdout_mape.throughput * 100.0
                      << "%, power " << res.holdout_mape.power * 100.0 << "%\n";
        } else if (simulate->parsed()) {
            const auto res = wattserve::cmd_simulate(
                scenario_file, profiles_dir, std::filesystem::path(predictor_file),
                policy_override, root / sim_out);
            for (const auto& [p, s] : res.summaries)
                std::cout << wattserve::to_string(p)
                          << ": tokens/J=" << s.aggregate.tokens_per_joule
                          << " violation_rate=" << s.aggregate.qos_violation_rate << "\n";
        } else if (pareto->parsed()) {
            const auto res = wattserve::cmd_pareto(pareto_model, profiles_dir,
                                                   split_list(regimes_csv), root / pareto_out);
            std::cout << res.verdicts.dump(2) << "\n";
        } else if (report->parsed()) {
            std::vector<std::filesystem::path> files(summary_files.begin(), summary_files.end());
            const auto out = wattserve::cmd_report(files, root / report_out);
            std::cout << "wrote " << out.string() << "\n";
        }
    } catch (const wattserve::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const wattserve::data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
