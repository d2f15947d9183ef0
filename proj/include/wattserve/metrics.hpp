#ifndef WATTSERVE_METRICS_HPP
#define WATTSERVE_METRICS_HPP

#include <map>
#include <string>
#include <vector>

#include "wattserve/json_io.hpp"
#include "wattserve/sim.hpp"

namespace wattserve {

struct MetricsSummary {
    double tokens_per_joule = 0.0;
    double qos_violation_rate = 0.0;   // fraction of intervals below target
    double power_tracking_mae_w = 0.0; // vs budget, over budget-active intervals
    double total_tokens = 0.0;
    double total_energy_j = 0.0;
    double mean_throughput_tps = 0.0;
};

// Per-node summary. Violations are interval-granular: any interval whose
// measured rate falls below the node's target counts, with no grace window.
inline MetricsSummary summarize_node(const NodeResult& node, double interval_s,
                                     bool budget_active) {
    MetricsSummary m;
    if (node.telemetry.empty()) throw data_error("summarize: empty telemetry log");
    std::size_t violations = 0;
    double tracking_abs = 0.0;
    std::size_t tracked = 0;
    for (const auto& t : node.telemetry) {
        m.total_tokens += t.throughput_tps * interval_s;
        m.total_energy_j += t.sys_power_w * interval_s;
        m.mean_throughput_tps += t.throughput_tps;
        if (node.throughput_target_tps > 0.0 && t.throughput_tps < node.throughput_target_tps)
            ++violations;
        if (budget_active && t.node_budget_w > 0.0) {
            tracking_abs += std::abs(t.sys_power_w - t.node_budget_w);
            ++tracked;
        }
    }
    const double n = static_cast<double>(node.telemetry.size());
    m.qos_violation_rate = static_cast<double>(violations) / n;
    m.mean_throughput_tps /= n;
    m.tokens_per_joule = m.total_energy_j > 0.0 ? m.total_tokens / m.total_energy_j : 0.0;
    m.power_tracking_mae_w = tracked > 0 ? tracking_abs / static_cast<double>(tracked) : 0.0;
    return m;
}

struct RunSummary {
    std::map<std::string, MetricsSummary> per_node;  // keyed "i:model"
    MetricsSummary aggregate;
    double cluster_tracking_mae_w = 0.0;  // cluster power vs the budget trace
};

inline RunSummary summarize(const SimResult& result) {
    const bool budget_active =
        result.scenario.cluster_budget_w.has_value() || !result.scenario.budget_trace.empty();
    RunSummary rs;
    double worst_violation = 0.0;
    for (std::size_t i = 0; i < result.nodes.size(); ++i) {
        const auto& node = result.nodes[i];
        MetricsSummary m = summarize_node(node, result.scenario.interval_s, budget_active);
        rs.aggregate.total_tokens += m.total_tokens;
        rs.aggregate.total_energy_j += m.total_energy_j;
        rs.aggregate.mean_throughput_tps += m.mean_throughput_tps;
        worst_violation = std::max(worst_violation, m.qos_violation_rate);
        rs.per_node[std::to_string(i) + ":" + node.model_id] = m;
    }
    rs.aggregate.tokens_per_joule =
        rs.aggregate.total_energy_j > 0.0
            ? rs.aggregate.total_tokens / rs.aggregate.total_energy_j
            : 0.0;
    rs.aggregate.qos_violation_rate = worst_violation;

    // track the cluster-wide draw against the external signal
    if (budget_active && !result.nodes.empty()) {
        const std::size_t n_int = result.nodes[0].telemetry.size();
        double abs_sum = 0.0;
        std::size_t counted = 0;
        for (std::size_t k = 0; k < n_int; ++k) {
            double cluster_w = 0.0, budget_w = 0.0;
            for (const auto& node : result.nodes) {
                cluster_w += node.telemetry[k].sys_power_w;
                budget_w += node.telemetry[k].node_budget_w;
            }
            const double target =
                !result.scenario.budget_trace.empty()
                    ? detail::trace_value(result.scenario.budget_trace,
                                          result.nodes[0].telemetry[k].t_s -
                                              result.scenario.interval_s)
                    : result.scenario.cluster_budget_w.value_or(budget_w);
            if (target > 0.0) {
                abs_sum += std::abs(cluster_w - target);
                ++counted;
            }
        }
        rs.cluster_tracking_mae_w = counted ? abs_sum / static_cast<double>(counted) : 0.0;
        rs.aggregate.power_tracking_mae_w = rs.cluster_tracking_mae_w;
    }
    return rs;
}

inline json summary_to_json(const RunSummary& rs, const SimResult& result) {
    auto metrics_json = [](const MetricsSummary& m) {
        return json{{"tokens_per_joule", m.tokens_per_joule},
                    {"qos_violation_rate", m.qos_violation_rate},
                    {"power_tracking_mae_w", m.power_tracking_mae_w},
                    {"total_tokens", m.total_tokens},
                    {"total_energy_j", m.total_energy_j},
                    {"mean_throughput_tps", m.mean_throughput_tps}};
    };
    json per_node = json::object();
    for (const auto& [k, v] : rs.per_node) per_node[k] = metrics_json(v);
    json targets = json::array();
    for (const auto& n : result.nodes)
        targets.push_back(json{{"model", n.model_id},
                               {"throughput_target_tps", n.throughput_target_tps}});
    return json{{"scenario", result.scenario.name},
                {"policy", to_string(result.scenario.policy)},
                {"seed", result.scenario.seed},
                {"per_node", per_node},
                {"aggregate", metrics_json(rs.aggregate)},
                {"cluster_tracking_mae_w", rs.cluster_tracking_mae_w},
                {"targets", targets}};
}

// ---- result logs as CSV ----------------------------------------------------

inline std::string telemetry_csv(const SimResult& r) {
    std::string out =
        "node,model,t_s,gpu_power_w,sys_power_w,throughput_tps,utilization,queue_depth,"
        "active_batch,node_budget_w,applied_cap_w,applied_batch_cap\n";
    for (std::size_t i = 0; i < r.nodes.size(); ++i)
        for (const auto& t : r.nodes[i].telemetry)
            out += std::to_string(i) + "," + r.nodes[i].model_id + "," + fmt_num(t.t_s) + "," +
                   fmt_num(t.gpu_power_w) + "," + fmt_num(t.sys_power_w) + "," +
                   fmt_num(t.throughput_tps) + "," + fmt_num(t.utilization) + "," +
                   std::to_string(t.queue_depth) + "," + std::to_string(t.active_batch) + "," +
                   fmt_num(t.node_budget_w) + "," + fmt_num(t.applied_cap_w) + "," +
                   std::to_string(t.applied_batch_cap) + "\n";
    return out;
}

inline std::string decisions_csv(const SimResult& r) {
    std::string out = "node,model,t_s,cap_w,batch,tp,ep,dp,applied,reason,err_norm,bias\n";
    for (std::size_t i = 0; i < r.nodes.size(); ++i)
        for (const auto& d : r.nodes[i].decisions)
            out += std::to_string(i) + "," + r.nodes[i].model_id + "," + fmt_num(d.t_s) + "," +
                   fmt_num(d.point.cap_watts) + "," + std::to_string(d.point.batch) + "," +
                   std::to_string(d.point.tp) + "," + std::to_string(d.point.ep) + "," +
                   std::to_string(d.point.dp) + "," + (d.applied ? "1" : "0") + "," +
                   to_string(d.reason) + "," + fmt_num(d.err_norm) + "," + fmt_num(d.bias) +
                   "\n";
    return out;
}

inline std::string requests_csv(const SimResult& r) {
    std::string out = "node,model,id,arrival_s,output_tokens,generated,completed_s\n";
    for (std::size_t i = 0; i < r.nodes.size(); ++i)
        for (const auto& q : r.nodes[i].requests)
            out += std::to_string(i) + "," + r.nodes[i].model_id + "," + std::to_string(q.id) +
                   "," + fmt_num(q.arrival_s) + "," + std::to_string(q.output_tokens) + "," +
                   fmt_num(q.generated) + "," + fmt_num(q.completed_s) + "\n";
    return out;
}

// Markdown comparison table for a baseline suite.
inline std::string comparison_report(const std::map<Policy, RunSummary>& summaries) {
    std::string out =
        "| policy | tokens/J | vs fixed | QoS violation rate | tracking MAE (W) | total tokens "
        "|\n|---|---|---|---|---|---|\n";
    const double base = summaries.count(Policy::Fixed)
                            ? summaries.at(Policy::Fixed).aggregate.tokens_per_joule
                            : 0.0;
    for (const auto& [p, s] : summaries) {
        const double rel = base > 0.0 ? s.aggregate.tokens_per_joule / base : 0.0;
        char relbuf[32];
        std::snprintf(relbuf, sizeof(relbuf), "%.3fx", rel);
        out += std::string("| ") + to_string(p) + " | " +
               fmt_num(s.aggregate.tokens_per_joule) + " | " + relbuf + " | " +
               fmt_num(s.aggregate.qos_violation_rate) + " | " +
               fmt_num(s.cluster_tracking_mae_w) + " | " +
               fmt_num(s.aggregate.total_tokens) + " |\n";
    }
    return out;
}

}  // namespace wattserve

#endif
