#ifndef WATTSERVE_ALLOCATOR_HPP
#define WATTSERVE_ALLOCATOR_HPP

#include <sstream>
#include <vector>

#include "wattserve/controller.hpp"

namespace wattserve {

struct AllocRequest {
    std::string model_id;
    double throughput_target_tps = 0.0;
    std::vector<OperatingPoint> candidates;
    Scorer score;
    int dp = 1;
};

struct AllocResult {
    std::vector<double> node_budgets_w;
    double total_allocated_w = 0.0;
    bool all_targets_satisfied = false;
};

namespace detail {

struct BudgetStep {
    double power_w;
    double throughput_tps;
};

// Budget levels at which the node's best reachable throughput jumps:
// candidates sorted by host power, filtered to the increasing envelope.
inline std::vector<BudgetStep> throughput_steps(const AllocRequest& n,
                                                const SystemPowerCoeffs& coeffs) {
    std::vector<BudgetStep> pts;
    for (const auto& c : n.candidates) {
        const auto s = n.score(c);
        const double p_node =
            c.dp * (coeffs.alpha * kGpusPerNode * s.gpu_power_w + coeffs.beta_watts);
        pts.push_back({p_node, c.dp * s.throughput_tps});
    }
    std::sort(pts.begin(), pts.end(), [](const BudgetStep& a, const BudgetStep& b) {
        if (a.power_w != b.power_w) return a.power_w < b.power_w;
        return a.throughput_tps > b.throughput_tps;
    });
    std::vector<BudgetStep> steps;
    double best = 0.0;
    for (const auto& p : pts) {
        if (p.throughput_tps > best + 1e-12) {
            steps.push_back(p);
            best = p.throughput_tps;
        }
    }
    return steps;
}

inline double best_throughput_under(const std::vector<BudgetStep>& steps, double budget_w) {
    double best = 0.0;
    for (const auto& s : steps) {
        if (s.power_w > budget_w) break;
        best = s.throughput_tps;
    }
    return best;
}

}  // namespace detail

// Water-filling split of a cluster power budget. Every node starts at the
// platform floor; each quantum goes to the node with the highest predicted
// marginal progress toward its throughput target per watt. Once every
// target is predicted satisfied the remainder goes wherever a quantum still
// buys throughput, and watts that buy nothing stay unallocated.
// selection_margin: the node controllers only accept configs predicted below
// budget*(1-margin), so grants must cover a step's power through that margin.
inline AllocResult allocate_budget(const std::vector<AllocRequest>& nodes,
                                   double cluster_budget_w, const GpuSpec& gpu,
                                   const SystemPowerCoeffs& coeffs, double quantum_w = 25.0,
                                   double selection_margin = 0.0) {
    if (nodes.empty()) throw config_error("allocate_budget: no nodes");

    std::vector<double> floor_w(nodes.size());
    double floor_total = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        floor_w[i] = nodes[i].dp *
                     (coeffs.alpha * kGpusPerNode * gpu.min_cap_watts + coeffs.beta_watts);
        floor_total += floor_w[i];
    }
    if (floor_total > cluster_budget_w) {
        std::ostringstream msg;
        msg << "allocate_budget: cluster budget " << cluster_budget_w
            << " W below the sum of node floors (";
        for (std::size_t i = 0; i < nodes.size(); ++i)
            msg << (i ? ", " : "") << nodes[i].model_id << "=" << floor_w[i] << " W";
        msg << ")";
        throw config_error(msg.str());
    }

    AllocResult res;
    res.node_budgets_w = floor_w;
    double remaining = cluster_budget_w - floor_total;

    std::vector<std::vector<detail::BudgetStep>> steps(nodes.size());
    std::vector<double> cur_thr(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        steps[i] = detail::throughput_steps(nodes[i], coeffs);
        for (auto& s : steps[i]) s.power_w /= 1.0 - selection_margin;
        cur_thr[i] = detail::best_throughput_under(steps[i], res.node_budgets_w[i]);
    }

    auto satisfied = [&](std::size_t i) {
        return cur_thr[i] >= nodes[i].throughput_target_tps;
    };

    // Watts are granted in quantum multiples: each round buys, for the node
    // with the best gain per watt, the step with the highest average rate
    // among all steps it can still afford. Considering every reachable step
    // (not just the next one) lets a node cross flat valleys in its
    // throughput-power envelope, e.g. the clock-floor region where extra
    // watts buy nothing until the cap climbs out of it. Phase 1 counts only
    // progress toward unmet targets; once every target is predicted
    // satisfied, the remainder chases marginal efficiency (extra tokens/s
    // per watt) until watts stop buying anything.
    while (remaining >= quantum_w) {
        bool any_unmet = false;
        for (std::size_t i = 0; i < nodes.size(); ++i) any_unmet |= !satisfied(i);

        double best_rate = 0.0, best_cost = 0.0;
        std::size_t best_i = nodes.size();
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (any_unmet && satisfied(i)) continue;
            for (const auto& s : steps[i]) {
                if (s.power_w <= res.node_budgets_w[i] || s.throughput_tps <= cur_thr[i])
                    continue;
                const double cost = std::ceil((s.power_w - res.node_budgets_w[i]) / quantum_w) *
                                    quantum_w;
                if (cost > remaining) break;
                const double gain =
                    any_unmet ? std::min(s.throughput_tps, nodes[i].throughput_target_tps) -
                                    std::min(cur_thr[i], nodes[i].throughput_target_tps)
                              : s.throughput_tps - cur_thr[i];
                if (gain <= 1e-12) continue;
                const double rate = gain / cost;
                const bool wins =
                    best_i == nodes.size() || rate > best_rate + 1e-12 ||
                    (rate > best_rate - 1e-12 &&
                     res.node_budgets_w[i] < res.node_budgets_w[best_i] - 1e-12);
                if (wins) {
                    best_rate = rate;
                    best_cost = cost;
                    best_i = i;
                }
            }
        }
        if (best_i == nodes.size()) break;  // no watt buys anything anywhere
        res.node_budgets_w[best_i] += best_cost;
        cur_thr[best_i] = detail::best_throughput_under(steps[best_i], res.node_budgets_w[best_i]);
        remaining -= best_cost;
    }

    // Remainder sweep: watts that buy no predicted throughput anywhere go
    // round-robin to the lowest-budget node, up to just past its most
    // expensive step. That slack lets a margined selection still clear its
    // top step, while watts beyond every node's ceiling stay unallocated.
    std::vector<double> ceiling(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i)
        ceiling[i] = steps[i].empty() ? res.node_budgets_w[i]
                                      : steps[i].back().power_w + 2.0 * quantum_w;
    while (remaining >= quantum_w) {
        std::size_t lo = nodes.size();
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (res.node_budgets_w[i] + quantum_w > ceiling[i]) continue;
            if (lo == nodes.size() || res.node_budgets_w[i] < res.node_budgets_w[lo]) lo = i;
        }
        if (lo == nodes.size()) break;
        res.node_budgets_w[lo] += quantum_w;
        remaining -= quantum_w;
    }

    res.total_allocated_w = 0.0;
    for (double b : res.node_budgets_w) res.total_allocated_w += b;
    res.all_targets_satisfied = true;
    for (std::size_t i = 0; i < nodes.size(); ++i)
        res.all_targets_satisfied &= satisfied(i);
    return res;
}

}  // namespace wattserve

#endif
