#ifndef WATTSERVE_FOREST_HPP
#define WATTSERVE_FOREST_HPP

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "wattserve/json_io.hpp"
#include "wattserve/rng.hpp"
#include "wattserve/sweep.hpp"

// Bagged regression trees (axis-aligned splits, mean-leaf prediction).
// Feature layout: [cap, batch, tp, ep, dp, one-hot(model_id)...]. Model
// identity is one-hot encoded; an ordinal code would impose a spurious
// order between unrelated models.

namespace wattserve {

struct FeatureSchema {
    std::vector<std::string> model_ids;  // sorted

    static constexpr int kNumeric = 5;  // cap, batch, tp, ep, dp

    int dim() const { return kNumeric + static_cast<int>(model_ids.size()); }

    std::vector<std::string> feature_names() const {
        std::vector<std::string> names{"cap_w", "batch", "tp", "ep", "dp"};
        for (const auto& m : model_ids) names.push_back("model:" + m);
        return names;
    }

    int model_index(const std::string& id) const {
        auto it = std::lower_bound(model_ids.begin(), model_ids.end(), id);
        if (it == model_ids.end() || *it != id)
            throw config_error("unknown model id in feature encoding: " + id);
        return static_cast<int>(it - model_ids.begin());
    }

    std::vector<double> encode(const OperatingPoint& p, const std::string& model_id) const {
        std::vector<double> x(dim(), 0.0);
        x[0] = p.cap_watts;
        x[1] = p.batch;
        x[2] = p.tp;
        x[3] = p.ep;
        x[4] = p.dp;
        x[kNumeric + model_index(model_id)] = 1.0;
        return x;
    }

    static FeatureSchema from_records(const std::vector<ProfilingRecord>& recs) {
        FeatureSchema s;
        for (const auto& r : recs) s.model_ids.push_back(r.model);
        std::sort(s.model_ids.begin(), s.model_ids.end());
        s.model_ids.erase(std::unique(s.model_ids.begin(), s.model_ids.end()),
                          s.model_ids.end());
        return s;
    }
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
};

struct HyperParams {
    int n_trees = 100;
    int max_depth = 14;  // 12 underfits the pooled multi-model grid
    int min_leaf = 2;
};

class RegressionTree {
public:
    std::vector<TreeNode> nodes;

    double predict(const std::vector<double>& x) const {
        int i = 0;
        while (nodes[i].feature >= 0)
            i = x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
        return nodes[i].value;
    }

    // Accumulates impurity decrease per feature, for importance scoring.
    void build(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
               std::vector<std::size_t> rows, const HyperParams& hp,
               std::vector<double>& impurity_gain) {
        nodes.clear();
        grow(X, y, std::move(rows), 0, hp, impurity_gain);
    }

private:
    static double sum_of(const std::vector<double>& y, const std::vector<std::size_t>& rows) {
        double s = 0.0;
        for (auto r : rows) s += y[r];
        return s;
    }

    int grow(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
             std::vector<std::size_t> rows, int depth, const HyperParams& hp,
             std::vector<double>& impurity_gain) {
        const int node_id = static_cast<int>(nodes.size());
        nodes.push_back({});
        const double n = static_cast<double>(rows.size());
        const double sum = sum_of(y, rows);
        const double mean = sum / n;

        double sse = 0.0;
        for (auto r : rows) sse += (y[r] - mean) * (y[r] - mean);

        if (depth >= hp.max_depth || rows.size() < 2 * static_cast<std::size_t>(hp.min_leaf) ||
            sse <= 1e-12) {
            nodes[node_id].value = mean;
            return node_id;
        }

        const int dim = static_cast<int>(X[0].size());
        int best_f = -1;
        double best_thr = 0.0, best_gain = 1e-12;

        std::vector<std::pair<double, double>> vy;
        vy.reserve(rows.size());
        for (int f = 0; f < dim; ++f) {
            vy.clear();
            for (auto r : rows) vy.emplace_back(X[r][f], y[r]);
            std::sort(vy.begin(), vy.end());
            if (vy.front().first == vy.back().first) continue;
            double left_sum = 0.0;
            for (std::size_t i = 0; i + 1 < vy.size(); ++i) {
                left_sum += vy[i].second;
                if (vy[i].first == vy[i + 1].first) continue;
                const double nl = static_cast<double>(i + 1);
                const double nr = n - nl;
                if (nl < hp.min_leaf || nr < hp.min_leaf) continue;
                // SSE reduction = sum^2/n split into per-side terms
                const double right_sum = sum - left_sum;
                const double gain =
                    left_sum * left_sum / nl + right_sum * right_sum / nr - sum * sum / n;
                if (gain > best_gain + 1e-12) {
                    best_gain = gain;
                    best_f = f;
                    best_thr = 0.5 * (vy[i].first + vy[i + 1].first);
                }
            }
        }

        if (best_f < 0) {
            nodes[node_id].value = mean;
            return node_id;
        }

        std::vector<std::size_t> left_rows, right_rows;
        for (auto r : rows)
            (X[r][best_f] <= best_thr ? left_rows : right_rows).push_back(r);
        rows.clear();
        rows.shrink_to_fit();

        impurity_gain[best_f] += best_gain;
        nodes[node_id].feature = best_f;
        nodes[node_id].threshold = best_thr;
        nodes[node_id].left = grow(X, y, std::move(left_rows), depth + 1, hp, impurity_gain);
        nodes[node_id].right = grow(X, y, std::move(right_rows), depth + 1, hp, impurity_gain);
        return node_id;
    }
};

class Forest {
public:
    HyperParams hp;
    std::vector<RegressionTree> trees;
    std::vector<double> impurity_gain;  // per feature, summed over trees

    double predict(const std::vector<double>& x) const {
        double s = 0.0;
        for (const auto& t : trees) s += t.predict(x);
        return s / static_cast<double>(trees.size());
    }

    std::vector<double> normalized_importance() const {
        std::vector<double> imp = impurity_gain;
        const double total = std::accumulate(imp.begin(), imp.end(), 0.0);
        if (total > 0.0)
            for (auto& v : imp) v /= total;
        return imp;
    }
};

inline Forest train_forest(const std::vector<std::vector<double>>& X,
                           const std::vector<double>& y, const HyperParams& hp,
                           std::uint64_t seed) {
    if (X.empty()) throw data_error("train_forest: empty training set");
    Forest f;
    f.hp = hp;
    f.impurity_gain.assign(X[0].size(), 0.0);
    f.trees.resize(hp.n_trees);
    for (int t = 0; t < hp.n_trees; ++t) {
        Rng rng = Rng::substream(seed, static_cast<std::uint64_t>(t));
        std::vector<std::size_t> rows(X.size());
        for (auto& r : rows) r = rng.next_u64() % X.size();
        std::sort(rows.begin(), rows.end());
        f.trees[t].build(X, y, std::move(rows), hp, f.impurity_gain);
    }
    return f;
}

struct PredictedMetrics {
    double throughput_hat = 0.0;
    double power_hat = 0.0;      // per-GPU watts
    double efficiency_hat = 0.0; // tokens/J via the host power model
};

// Forests for throughput and power (the controller's inputs) plus one for
// efficiency, kept for feature-importance reporting.
class PredictorBundle {
public:
    FeatureSchema schema;
    SystemPowerCoeffs coeffs;
    HyperParams hp;
    std::uint64_t seed = 0;
    Forest throughput_forest;
    Forest power_forest;
    Forest efficiency_forest;

    PredictedMetrics predict(const OperatingPoint& p, const std::string& model_id) const {
        const auto x = schema.encode(p, model_id);
        PredictedMetrics m;
        m.throughput_hat = throughput_forest.predict(x);
        m.power_hat = power_forest.predict(x);
        m.efficiency_hat =
            m.throughput_hat / (coeffs.alpha * kGpusPerNode * m.power_hat + coeffs.beta_watts);
        return m;
    }

    std::vector<std::pair<std::string, double>> feature_importance(
        const std::string& target = "efficiency") const {
        const Forest* f = &efficiency_forest;
        if (target == "throughput") f = &throughput_forest;
        else if (target == "power") f = &power_forest;
        else if (target != "efficiency") throw config_error("unknown importance target: " + target);
        const auto imp = f->normalized_importance();
        const auto names = schema.feature_names();
        std::vector<std::pair<std::string, double>> out;
        for (std::size_t i = 0; i < imp.size(); ++i) out.emplace_back(names[i], imp[i]);
        std::stable_sort(out.begin(), out.end(),
                         [](const auto& a, const auto& b) { return a.second > b.second; });
        return out;
    }
};

// Canonical row order before any sampling, so shuffled inputs train the
// same model.
inline std::vector<ProfilingRecord> canonical_order(std::vector<ProfilingRecord> recs) {
    std::sort(recs.begin(), recs.end(), [](const ProfilingRecord& a, const ProfilingRecord& b) {
        if (a.model != b.model) return a.model < b.model;
        if (a.point.cap_watts != b.point.cap_watts) return a.point.cap_watts < b.point.cap_watts;
        if (a.point.batch != b.point.batch) return a.point.batch < b.point.batch;
        if (a.point.tp != b.point.tp) return a.point.tp < b.point.tp;
        if (a.point.ep != b.point.ep) return a.point.ep < b.point.ep;
        return a.point.dp < b.point.dp;
    });
    return recs;
}

inline double record_efficiency(const ProfilingRecord& r, const SystemPowerCoeffs&) {
    return r.throughput_tps / r.sys_power_w;
}

inline PredictorBundle train_bundle(const std::vector<ProfilingRecord>& train_set,
                                    const SystemPowerCoeffs& coeffs, const HyperParams& hp,
                                    std::uint64_t seed) {
    if (train_set.empty()) throw data_error("train_bundle: empty training set");
    const auto recs = canonical_order(train_set);

    PredictorBundle b;
    b.schema = FeatureSchema::from_records(recs);
    b.coeffs = coeffs;
    b.hp = hp;
    b.seed = seed;

    std::vector<std::vector<double>> X;
    std::vector<double> y_thr, y_pow, y_eff;
    X.reserve(recs.size());
    for (const auto& r : recs) {
        X.push_back(b.schema.encode(r.point, r.model));
        y_thr.push_back(r.throughput_tps);
        y_pow.push_back(r.gpu_power_w);
        y_eff.push_back(record_efficiency(r, coeffs));
    }
    b.throughput_forest = train_forest(X, y_thr, hp, splitmix64(seed ^ 0x7468726fULL));
    b.power_forest = train_forest(X, y_pow, hp, splitmix64(seed ^ 0x706f7765ULL));
    b.efficiency_forest = train_forest(X, y_eff, hp, splitmix64(seed ^ 0x65666669ULL));
    return b;
}

struct MapeResult {
    double throughput = 0.0;
    double power = 0.0;
};

inline MapeResult evaluate_mape(const PredictorBundle& b,
                                const std::vector<ProfilingRecord>& heldout) {
    if (heldout.empty()) throw data_error("evaluate_mape: empty holdout");
    double se_t = 0.0, se_p = 0.0;
    for (const auto& r : heldout) {
        const auto m = b.predict(r.point, r.model);
        se_t += std::abs(m.throughput_hat - r.throughput_tps) / r.throughput_tps;
        se_p += std::abs(m.power_hat - r.gpu_power_w) / r.gpu_power_w;
    }
    const double n = static_cast<double>(heldout.size());
    return MapeResult{se_t / n, se_p / n};
}

inline MapeResult evaluate_mape_for_model(const PredictorBundle& b,
                                          const std::vector<ProfilingRecord>& heldout,
                                          const std::string& model_id) {
    std::vector<ProfilingRecord> filtered;
    for (const auto& r : heldout)
        if (r.model == model_id) filtered.push_back(r);
    return evaluate_mape(b, filtered);
}

// ---- serialization -------------------------------------------------------

inline json forest_to_json(const Forest& f) {
    json trees = json::array();
    for (const auto& t : f.trees) {
        json nodes = json::array();
        for (const auto& n : t.nodes) {
            if (n.feature < 0)
                nodes.push_back(json{{"v", n.value}});
            else
                nodes.push_back(json{{"f", n.feature}, {"t", n.threshold}, {"l", n.left},
                                     {"r", n.right}});
        }
        trees.push_back(std::move(nodes));
    }
    return json{{"trees", trees}, {"impurity_gain", f.impurity_gain}};
}

inline Forest forest_from_json(const json& j, const HyperParams& hp) {
    Forest f;
    f.hp = hp;
    f.impurity_gain = j.at("impurity_gain").get<std::vector<double>>();
    for (const auto& tj : j.at("trees")) {
        RegressionTree t;
        for (const auto& nj : tj) {
            TreeNode n;
            if (nj.contains("v")) {
                n.value = nj.at("v").get<double>();
            } else {
                n.feature = nj.at("f").get<int>();
                n.threshold = nj.at("t").get<double>();
                n.left = nj.at("l").get<int>();
                n.right = nj.at("r").get<int>();
            }
            t.nodes.push_back(n);
        }
        f.trees.push_back(std::move(t));
    }
    return f;
}

inline json bundle_to_json(const PredictorBundle& b) {
    return json{{"schema_version", 1},
                {"model_ids", b.schema.model_ids},
                {"system_power", coeffs_to_json(b.coeffs)},
                {"hyperparams",
                 json{{"n_trees", b.hp.n_trees}, {"max_depth", b.hp.max_depth},
                      {"min_leaf", b.hp.min_leaf}}},
                {"seed", b.seed},
                {"throughput", forest_to_json(b.throughput_forest)},
                {"power", forest_to_json(b.power_forest)},
                {"efficiency", forest_to_json(b.efficiency_forest)}};
}

inline PredictorBundle bundle_from_json(const json& j) {
    PredictorBundle b;
    b.schema.model_ids = j.at("model_ids").get<std::vector<std::string>>();
    b.coeffs = coeffs_from_json(j.at("system_power"));
    b.hp.n_trees = j.at("hyperparams").at("n_trees").get<int>();
    b.hp.max_depth = j.at("hyperparams").at("max_depth").get<int>();
    b.hp.min_leaf = j.at("hyperparams").at("min_leaf").get<int>();
    b.seed = j.at("seed").get<std::uint64_t>();
    b.throughput_forest = forest_from_json(j.at("throughput"), b.hp);
    b.power_forest = forest_from_json(j.at("power"), b.hp);
    b.efficiency_forest = forest_from_json(j.at("efficiency"), b.hp);
    return b;
}

}  // namespace wattserve

#endif
