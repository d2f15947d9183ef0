#ifndef WATTSERVE_SCENARIO_IO_HPP
#define WATTSERVE_SCENARIO_IO_HPP

#include <filesystem>

#include "wattserve/json_io.hpp"
#include "wattserve/sim.hpp"

namespace wattserve {

// Budget traces are two-column CSV: t_seconds, cluster watts. Values hold
// until the next row (piecewise constant).
inline std::vector<std::pair<double, double>> load_budget_trace(
    const std::filesystem::path& path) {
    std::vector<std::pair<double, double>> trace;
    for (const auto& row : read_csv(path, /*skip_header=*/true)) {
        if (row.size() != 2) throw data_error("budget trace rows must be t_seconds,watts");
        trace.emplace_back(std::stod(row[0]), std::stod(row[1]));
    }
    if (trace.empty()) throw data_error("empty budget trace: " + path.string());
    for (std::size_t i = 1; i < trace.size(); ++i)
        if (trace[i].first <= trace[i - 1].first)
            throw data_error("budget trace timestamps must be strictly increasing");
    return trace;
}

inline std::string trace_to_csv(const std::vector<std::pair<double, double>>& trace) {
    std::string out = "t_seconds,watts\n";
    for (const auto& [t, w] : trace) out += fmt_num(t) + "," + fmt_num(w) + "\n";
    return out;
}

// Scenario files reference a trace CSV by path relative to themselves.
inline Scenario scenario_from_json(const json& j, const std::filesystem::path& base_dir = {}) {
    Scenario sc;
    sc.name = j.at("name").get<std::string>();
    sc.duration_s = j.at("duration_s").get<double>();
    sc.interval_s = j.value("interval_s", 0.5);
    sc.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("output_tokens")) {
        sc.output_len.mean_tokens = j.at("output_tokens").at("mean").get<double>();
        sc.output_len.log_sigma = j.at("output_tokens").at("log_sigma").get<double>();
    }
    if (j.contains("cluster_budget_w") && !j.at("cluster_budget_w").is_null())
        sc.cluster_budget_w = j.at("cluster_budget_w").get<double>();
    if (j.contains("budget_trace_csv") && !j.at("budget_trace_csv").is_null()) {
        const std::filesystem::path p = j.at("budget_trace_csv").get<std::string>();
        sc.budget_trace = load_budget_trace(p.is_absolute() ? p : base_dir / p);
    }
    sc.policy = policy_from_string(j.value("policy", "joint"));
    const std::string obj = j.value("objective", "qos");
    if (obj == "qos")
        sc.objective = Objective::QosMaxEfficiency;
    else if (obj == "budget-throughput")
        sc.objective = Objective::BudgetMaxThroughput;
    else
        throw config_error("unknown objective: " + obj);
    if (j.contains("controller")) {
        const auto& c = j.at("controller");
        sc.controller.gains.kp = c.value("kp", 0.5);
        sc.controller.gains.ki = c.value("ki", 0.1);
        sc.controller.gains.kd = c.value("kd", 0.05);
        sc.controller.sustain_intervals = c.value("sustain_intervals", 3);
        sc.controller.integral_clamp = c.value("integral_clamp", 0.5);
        sc.epsilon = c.value("epsilon", 0.05);
        sc.controller.target_headroom = c.value("headroom", sc.epsilon);
        sc.controller.budget_margin = c.value("budget_margin", 0.02);
    } else {
        sc.controller.target_headroom = sc.epsilon;
        sc.controller.budget_margin = 0.02;
    }
    if (j.contains("candidates")) {
        sc.cand_caps = j.at("candidates").at("caps_w").get<std::vector<double>>();
        sc.cand_batches = j.at("candidates").at("batches").get<std::vector<int>>();
    }
    if (j.contains("initial")) {
        sc.initial_cap_w = j.at("initial").at("cap_w").get<double>();
        sc.initial_batch = j.at("initial").at("batch").get<int>();
    } else {
        sc.initial_cap_w = *std::max_element(sc.cand_caps.begin(), sc.cand_caps.end());
        sc.initial_batch = *std::max_element(sc.cand_batches.begin(), sc.cand_batches.end());
    }
    for (const auto& nj : j.at("nodes")) {
        ScenarioNode n;
        n.model_id = nj.at("model").get<std::string>();
        n.qos_fraction = nj.value("qos_fraction", 1.0);
        n.tp = nj.value("tp", 1);
        n.ep = nj.value("ep", 1);
        n.dp = nj.value("dp", 1);
        n.arrival_rate_per_s = nj.at("arrival_rate_per_s").get<double>();
        n.initial_backlog = nj.value("initial_backlog", 0);
        sc.nodes.push_back(n);
    }
    sc.validate();
    return sc;
}

inline Scenario load_scenario(const std::filesystem::path& path) {
    return scenario_from_json(parse_json_file(path), path.parent_path());
}

}  // namespace wattserve

#endif
