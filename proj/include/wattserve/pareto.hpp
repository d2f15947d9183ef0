#ifndef WATTSERVE_PARETO_HPP
#define WATTSERVE_PARETO_HPP

#include <algorithm>
#include <string>
#include <vector>

#include "wattserve/model.hpp"

namespace wattserve {

struct FrontierPoint {
    OperatingPoint point;
    double throughput_tps = 0.0;
    double efficiency_tpj = 0.0;
};

// p weakly dominates q: at least as good on both axes.
inline bool weakly_dominates(const FrontierPoint& p, const FrontierPoint& q) {
    return p.throughput_tps >= q.throughput_tps && p.efficiency_tpj >= q.efficiency_tpj;
}

inline bool strictly_dominates(const FrontierPoint& p, const FrontierPoint& q) {
    return weakly_dominates(p, q) &&
           (p.throughput_tps > q.throughput_tps || p.efficiency_tpj > q.efficiency_tpj);
}

// Maximal set under (throughput, efficiency) dominance, sorted by
// throughput. Exact ties on both axes keep the lower-cap point, mirroring
// the controller's tie-break.
inline std::vector<FrontierPoint> build_frontier(std::vector<FrontierPoint> points) {
    if (points.empty()) throw config_error("build_frontier: no points");
    std::sort(points.begin(), points.end(), [](const FrontierPoint& a, const FrontierPoint& b) {
        if (a.throughput_tps != b.throughput_tps) return a.throughput_tps < b.throughput_tps;
        if (a.efficiency_tpj != b.efficiency_tpj) return a.efficiency_tpj < b.efficiency_tpj;
        if (a.point.cap_watts != b.point.cap_watts) return a.point.cap_watts < b.point.cap_watts;
        return a.point.batch < b.point.batch;
    });
    // collapse exact (throughput, efficiency) ties onto the lower-cap point
    std::vector<FrontierPoint> uniq;
    for (const auto& p : points) {
        if (!uniq.empty() && uniq.back().throughput_tps == p.throughput_tps &&
            uniq.back().efficiency_tpj == p.efficiency_tpj)
            continue;
        uniq.push_back(p);
    }
    // sweep from the high-throughput end: a point survives iff its
    // efficiency beats everything with more throughput
    std::vector<FrontierPoint> frontier;
    double best_eff = -1.0;
    for (auto it = uniq.rbegin(); it != uniq.rend(); ++it) {
        if (it->efficiency_tpj > best_eff) {
            frontier.push_back(*it);
            best_eff = it->efficiency_tpj;
        }
    }
    std::reverse(frontier.begin(), frontier.end());
    return frontier;
}

struct DominanceReport {
    bool dominated = true;                  // every point of b covered by a
    std::vector<FrontierPoint> witnesses;   // points of b no point of a covers
};

inline DominanceReport verify_dominance(const std::vector<FrontierPoint>& a,
                                        const std::vector<FrontierPoint>& b) {
    DominanceReport rep;
    for (const auto& q : b) {
        bool covered = false;
        for (const auto& p : a) {
            if (weakly_dominates(p, q)) {
                covered = true;
                break;
            }
        }
        if (!covered) {
            rep.dominated = false;
            rep.witnesses.push_back(q);
        }
    }
    return rep;
}

// The four knob regimes compared in the frontier study. Fixed values are
// configurable so alternative slices can be explored.
struct RegimeSpec {
    std::string name;
    bool sweep_cap = false;
    bool sweep_batch = false;
    bool sweep_tp = false;
    double fixed_cap_w = 300.0;
    int fixed_batch = 64;
};

inline std::vector<RegimeSpec> default_regimes() {
    return {
        RegimeSpec{"sw-only", false, true, true, 300.0, 64},
        RegimeSpec{"hw-only", true, false, false, 300.0, 64},
        RegimeSpec{"hw-sw", true, true, false, 300.0, 64},
        RegimeSpec{"joint", true, true, true, 300.0, 64},
    };
}

inline RegimeSpec regime_by_name(const std::string& name) {
    for (const auto& r : default_regimes())
        if (r.name == name) return r;
    std::string valid;
    for (const auto& r : default_regimes()) valid += (valid.empty() ? "" : ", ") + r.name;
    throw config_error("unknown regime '" + name + "' (valid: " + valid + ")");
}

// Evaluate one regime's operating points analytically and build its frontier.
inline std::vector<FrontierPoint> evaluate_regime(
    const RegimeSpec& regime, const ModelProfile& profile, const GpuSpec& gpu,
    const SystemPowerCoeffs& coeffs, const std::vector<double>& cap_grid,
    const std::vector<int>& batch_grid, const std::vector<int>& tp_grid) {
    std::vector<double> caps = regime.sweep_cap ? cap_grid
                                                : std::vector<double>{regime.fixed_cap_w};
    std::vector<int> batches =
        regime.sweep_batch ? batch_grid : std::vector<int>{regime.fixed_batch};
    std::vector<int> tps =
        regime.sweep_tp ? tp_grid : std::vector<int>{profile.deployment.tp};

    std::vector<FrontierPoint> pts;
    for (double cap : caps)
        for (int batch : batches)
            for (int tp : tps) {
                if (!profile.comm_fixed_by_tp.count(tp)) continue;
                const OperatingPoint p{cap, batch, tp, profile.deployment.ep, 1};
                pts.push_back(FrontierPoint{p, cluster_throughput(p, profile, gpu),
                                            efficiency(p, profile, gpu, coeffs)});
            }
    return build_frontier(std::move(pts));
}

inline double peak_efficiency(const std::vector<FrontierPoint>& frontier) {
    double best = 0.0;
    for (const auto& p : frontier) best = std::max(best, p.efficiency_tpj);
    return best;
}

}  // namespace wattserve

#endif
