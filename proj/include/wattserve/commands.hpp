#ifndef WATTSERVE_COMMANDS_HPP
#define WATTSERVE_COMMANDS_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "wattserve/calibrate.hpp"
#include "wattserve/forest.hpp"
#include "wattserve/metrics.hpp"
#include "wattserve/pareto.hpp"
#include "wattserve/scenario_io.hpp"
#include "wattserve/sweep.hpp"

// End-to-end commands behind the CLI subcommands: profile -> train ->
// simulate -> pareto/report. Each writes its outputs plus a manifest that
// records inputs, seeds and output hashes, so a rerun can be checked for
// bit-identical results.

namespace wattserve {

inline constexpr const char* kToolVersion = "0.1.0";

namespace fs = std::filesystem;

inline void write_manifest(const fs::path& out_dir, const std::string& command,
                           const json& params, const std::vector<fs::path>& outputs) {
    json files = json::object();
    for (const auto& p : outputs) {
        char hex[24];
        std::snprintf(hex, sizeof(hex), "%016llx",
                      static_cast<unsigned long long>(hash_file(p)));
        files[p.filename().string()] = hex;
    }
    write_json_file(out_dir / "manifest.json", json{{"tool_version", kToolVersion},
                                                    {"command", command},
                                                    {"params", params},
                                                    {"output_hashes", files}});
}

struct ProfileCmdResult {
    std::vector<fs::path> dataset_files;
    std::size_t total_records = 0;
};

inline ProfileCmdResult cmd_profile(const fs::path& profiles_dir, const fs::path& grid_file,
                                    const std::vector<std::string>& model_ids,
                                    std::uint64_t seed, double noise_sigma,
                                    const fs::path& out_dir) {
    const Platform platform = platform_from_json(parse_json_file(profiles_dir / "platform.json"));
    const ProfileRegistry registry = ProfileRegistry::load_dir(profiles_dir, platform.gpu);
    const SweepGrid grid = grid_file.empty() ? SweepGrid::default_grid()
                                             : grid_from_json(parse_json_file(grid_file));
    std::vector<std::string> ids = model_ids;
    if (ids.empty()) ids = registry.names();

    AnalyticBackend backend(platform.gpu, platform.coeffs);
    ProfileCmdResult res;
    fs::create_directories(out_dir);
    std::vector<fs::path> outputs;
    for (const auto& id : ids) {
        const ModelProfile& profile = registry.get(id);  // throws on unknown id
        const auto ds =
            run_sweep(grid, id, profile, platform.gpu, backend, seed ^ fnv1a64(id), noise_sigma);
        const fs::path csv = out_dir / (id + ".csv");
        const fs::path sidecar = out_dir / (id + ".meta.json");
        write_text_file(csv, dataset_to_csv(ds));
        write_json_file(sidecar, sidecar_to_json(ds));
        outputs.push_back(csv);
        outputs.push_back(sidecar);
        res.dataset_files.push_back(csv);
        res.total_records += ds.records.size();
    }
    write_manifest(out_dir, "profile",
                   json{{"seed", seed}, {"noise_sigma", noise_sigma}, {"models", ids}},
                   outputs);
    return res;
}

struct TrainCmdResult {
    fs::path model_file;
    MapeResult holdout_mape;
    std::vector<std::pair<std::string, double>> importance;
};

inline TrainCmdResult cmd_train(const std::vector<fs::path>& dataset_files,
                                const fs::path& profiles_dir, const HyperParams& hp,
                                double holdout_fraction, std::uint64_t seed,
                                const fs::path& out_dir) {
    const Platform platform = platform_from_json(parse_json_file(profiles_dir / "platform.json"));
    std::vector<ProfilingRecord> all;
    for (const auto& f : dataset_files) {
        auto recs = records_from_csv(f);
        all.insert(all.end(), recs.begin(), recs.end());
    }
    if (all.empty()) throw data_error("cmd_train: no records in the given datasets");

    const auto [train_set, heldout] = split_holdout(all, holdout_fraction, seed);
    PredictorBundle bundle = train_bundle(train_set, platform.coeffs, hp, seed);
    const MapeResult mape = evaluate_mape(bundle, heldout);

    fs::create_directories(out_dir);
    const fs::path model_file = out_dir / "predictor.json";
    write_json_file(model_file, bundle_to_json(bundle));

    json per_model = json::object();
    for (const auto& id : bundle.schema.model_ids) {
        bool any = false;
        for (const auto& r : heldout) any |= r.model == id;
        if (!any) continue;
        const auto m = evaluate_mape_for_model(bundle, heldout, id);
        per_model[id] = json{{"throughput", m.throughput}, {"power", m.power}};
    }
    json importance = json::array();
    TrainCmdResult res;
    res.importance = bundle.feature_importance("efficiency");
    for (const auto& [name, score] : res.importance)
        importance.push_back(json{{"feature", name}, {"importance", score}});
    const fs::path report = out_dir / "mape_report.json";
    write_json_file(report, json{{"pooled", json{{"throughput", mape.throughput},
                                                 {"power", mape.power}}},
                                 {"per_model", per_model},
                                 {"train_rows", train_set.size()},
                                 {"holdout_rows", heldout.size()},
                                 {"efficiency_feature_importance", importance}});

    write_manifest(out_dir, "train",
                   json{{"seed", seed},
                        {"holdout_fraction", holdout_fraction},
                        {"n_trees", hp.n_trees},
                        {"max_depth", hp.max_depth},
                        {"min_leaf", hp.min_leaf}},
                   {model_file, report});
    res.model_file = model_file;
    res.holdout_mape = mape;
    return res;
}

struct SimulateCmdResult {
    std::map<Policy, RunSummary> summaries;
    fs::path out_dir;
};

inline SimulateCmdResult cmd_simulate(const fs::path& scenario_file,
                                      const fs::path& profiles_dir,
                                      const fs::path& predictor_file,
                                      const std::string& policy_override,
                                      const fs::path& out_dir) {
    const Platform platform = platform_from_json(parse_json_file(profiles_dir / "platform.json"));
    const ProfileRegistry registry = ProfileRegistry::load_dir(profiles_dir, platform.gpu);
    Scenario sc = load_scenario(scenario_file);

    PredictorBundle bundle;
    const PredictorBundle* bundle_ptr = nullptr;
    if (!predictor_file.empty()) {
        bundle = bundle_from_json(parse_json_file(predictor_file));
        bundle_ptr = &bundle;
    }

    std::vector<Policy> policies;
    if (policy_override == "suite") {
        policies = {Policy::Fixed, Policy::AdaptiveBatch, Policy::AdaptiveCap, Policy::Joint,
                    Policy::Oracle};
    } else if (!policy_override.empty()) {
        policies = {policy_from_string(policy_override)};
    } else {
        policies = {sc.policy};
    }

    SimulateCmdResult res;
    res.out_dir = out_dir;
    fs::create_directories(out_dir);
    std::vector<fs::path> outputs;
    for (Policy p : policies) {
        Scenario s = sc;
        s.policy = p;
        const SimResult r = run_scenario(s, registry, platform, bundle_ptr);
        const RunSummary summary = summarize(r);
        const std::string prefix = to_string(p);
        const fs::path tele = out_dir / (prefix + "_telemetry.csv");
        const fs::path dec = out_dir / (prefix + "_decisions.csv");
        const fs::path req = out_dir / (prefix + "_requests.csv");
        const fs::path sum = out_dir / (prefix + "_summary.json");
        write_text_file(tele, telemetry_csv(r));
        write_text_file(dec, decisions_csv(r));
        write_text_file(req, requests_csv(r));
        write_json_file(sum, summary_to_json(summary, r));
        outputs.insert(outputs.end(), {tele, dec, req, sum});
        res.summaries.emplace(p, summary);
    }
    write_manifest(out_dir, "simulate",
                   json{{"scenario", sc.name},
                        {"seed", sc.seed},
                        {"policy", policy_override.empty() ? to_string(sc.policy)
                                                           : policy_override}},
                   outputs);
    return res;
}

struct ParetoCmdResult {
    std::map<std::string, std::vector<FrontierPoint>> frontiers;
    json verdicts;
};

inline ParetoCmdResult cmd_pareto(const std::string& model_id, const fs::path& profiles_dir,
                                  const std::vector<std::string>& regime_names,
                                  const fs::path& out_dir) {
    const Platform platform = platform_from_json(parse_json_file(profiles_dir / "platform.json"));
    const ProfileRegistry registry = ProfileRegistry::load_dir(profiles_dir, platform.gpu);
    const ModelProfile& profile = registry.get(model_id);

    const std::vector<double> caps{150, 200, 250, 300, 350, 400};
    const std::vector<int> batches{1, 4, 8, 16, 32, 64};
    const std::vector<int> tps{1, 2, 4};

    ParetoCmdResult res;
    fs::create_directories(out_dir);
    std::vector<fs::path> outputs;
    for (const auto& name : regime_names) {
        const RegimeSpec regime = regime_by_name(name);  // throws on unknown regime
        auto frontier = evaluate_regime(regime, profile, platform.gpu, platform.coeffs, caps,
                                        batches, tps);
        std::string csv = "cap_w,batch,tp,throughput_tps,efficiency_tpj\n";
        for (const auto& p : frontier)
            csv += fmt_num(p.point.cap_watts) + "," + std::to_string(p.point.batch) + "," +
                   std::to_string(p.point.tp) + "," + fmt_num(p.throughput_tps) + "," +
                   fmt_num(p.efficiency_tpj) + "\n";
        const fs::path f = out_dir / ("frontier_" + name + ".csv");
        write_text_file(f, csv);
        outputs.push_back(f);
        res.frontiers[name] = std::move(frontier);
    }

    json verdicts = json::object();
    if (res.frontiers.count("joint")) {
        for (const auto& [name, frontier] : res.frontiers) {
            if (name == "joint") continue;
            const auto rep = verify_dominance(res.frontiers.at("joint"), frontier);
            verdicts["joint_covers_" + name] = rep.dominated;
        }
    }
    if (res.frontiers.count("hw-only") && res.frontiers.count("sw-only")) {
        verdicts["hw_covers_sw"] =
            verify_dominance(res.frontiers.at("hw-only"), res.frontiers.at("sw-only")).dominated;
        verdicts["sw_covers_hw"] =
            verify_dominance(res.frontiers.at("sw-only"), res.frontiers.at("hw-only")).dominated;
    }
    json peaks = json::object();
    for (const auto& [name, frontier] : res.frontiers)
        peaks[name] = peak_efficiency(frontier);
    res.verdicts = json{{"model", model_id}, {"dominance", verdicts}, {"peak_efficiency", peaks}};
    const fs::path vfile = out_dir / "dominance.json";
    write_json_file(vfile, res.verdicts);
    outputs.push_back(vfile);

    write_manifest(out_dir, "pareto", json{{"model", model_id}, {"regimes", regime_names}},
                   outputs);
    return res;
}

inline fs::path cmd_report(const std::vector<fs::path>& summary_files, const fs::path& out_file) {
    std::map<Policy, RunSummary> summaries;
    for (const auto& f : summary_files) {
        const json j = parse_json_file(f);
        RunSummary rs;
        const auto& agg = j.at("aggregate");
        rs.aggregate.tokens_per_joule = agg.at("tokens_per_joule").get<double>();
        rs.aggregate.qos_violation_rate = agg.at("qos_violation_rate").get<double>();
        rs.aggregate.total_tokens = agg.at("total_tokens").get<double>();
        rs.aggregate.total_energy_j = agg.at("total_energy_j").get<double>();
        rs.cluster_tracking_mae_w = j.value("cluster_tracking_mae_w", 0.0);
        summaries[policy_from_string(j.at("policy").get<std::string>())] = rs;
    }
    if (summaries.empty()) throw data_error("cmd_report: no summary files given");
    write_text_file(out_file, comparison_report(summaries));
    return out_file;
}

}  // namespace wattserve

#endif
