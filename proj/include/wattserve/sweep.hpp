#ifndef WATTSERVE_SWEEP_HPP
#define WATTSERVE_SWEEP_HPP

#include <algorithm>
#include <optional>
#include <vector>

#include "wattserve/json_io.hpp"
#include "wattserve/model.hpp"
#include "wattserve/rng.hpp"

namespace wattserve {

struct SweepGrid {
    std::vector<double> caps;
    std::vector<int> batches;
    std::vector<int> tps;
    std::vector<int> eps;
    std::vector<int> dps;

    void validate() const {
        if (caps.empty() || batches.empty() || tps.empty() || eps.empty() || dps.empty())
            throw config_error("SweepGrid: all knob lists must be non-empty");
    }

    std::size_t candidate_count() const {
        return caps.size() * batches.size() * tps.size() * eps.size() * dps.size();
    }

    static SweepGrid default_grid() {
        return SweepGrid{{150, 200, 250, 300, 350, 400}, {1, 4, 8, 16, 32, 64},
                         {1, 2, 4},                      {1, 4, 8},
                         {1, 2, 3}};
    }
};

inline SweepGrid grid_from_json(const json& j) {
    SweepGrid g;
    g.caps = j.at("caps_w").get<std::vector<double>>();
    g.batches = j.at("batches").get<std::vector<int>>();
    g.tps = j.at("tps").get<std::vector<int>>();
    g.eps = j.at("eps").get<std::vector<int>>();
    g.dps = j.at("dps").get<std::vector<int>>();
    g.validate();
    return g;
}

inline json grid_to_json(const SweepGrid& g) {
    return json{{"caps_w", g.caps},
                {"batches", g.batches},
                {"tps", g.tps},
                {"eps", g.eps},
                {"dps", g.dps}};
}

struct ProfilingRecord {
    OperatingPoint point;
    std::string model;
    double throughput_tps = 0.0;
    double gpu_power_w = 0.0;   // per-GPU average
    double sys_power_w = 0.0;   // per-node host power
    double duration_s = 0.0;
};

struct SkippedPoint {
    OperatingPoint point;
    std::string reason;
};

struct ProfilingDataset {
    std::vector<ProfilingRecord> records;
    SweepGrid grid;
    std::uint64_t seed = 0;
    double noise_sigma = 0.0;
    bool complete = true;
    std::vector<SkippedPoint> skipped;
    std::vector<std::size_t> noise_outliers;  // record indices beyond the 5-sigma guard
};

// Measurement source. The default backend evaluates the analytic model in a
// saturated steady state; tests may substitute failing or canned backends.
class ProfilingBackend {
public:
    struct Sample {
        double throughput_tps;
        double gpu_power_w;
        double sys_power_w;
    };
    virtual ~ProfilingBackend() = default;
    virtual Sample measure(const OperatingPoint& point, const ModelProfile& profile) = 0;
};

class AnalyticBackend : public ProfilingBackend {
public:
    AnalyticBackend(GpuSpec gpu, SystemPowerCoeffs coeffs) : gpu_(gpu), coeffs_(coeffs) {}

    Sample measure(const OperatingPoint& point, const ModelProfile& profile) override {
        return Sample{throughput(point, profile, gpu_), avg_gpu_power(point, profile, gpu_),
                      node_system_power(point, profile, gpu_, coeffs_)};
    }

private:
    GpuSpec gpu_;
    SystemPowerCoeffs coeffs_;
};

// Reason a grid point cannot run on a given model, or empty if it can.
inline std::optional<std::string> infeasible_reason(const OperatingPoint& p,
                                                    const ModelProfile& profile,
                                                    const GpuSpec& gpu) {
    if (p.cap_watts < gpu.min_cap_watts || p.cap_watts > gpu.max_cap_watts)
        return "cap outside platform range";
    if (profile.comm_fixed_by_tp.find(p.tp) == profile.comm_fixed_by_tp.end())
        return "tp not calibrated for model";
    if (p.ep > 1 && profile.is_dense()) return "expert parallelism on dense model";
    if (p.ep > std::max(profile.num_experts, 1)) return "ep exceeds expert count";
    return std::nullopt;
}

// One record per feasible grid point, in canonical grid order (cap, batch,
// tp, ep, dp nesting) so the output is deterministic however points are
// scheduled. Multiplicative Gaussian noise models measurement scatter.
inline ProfilingDataset run_sweep(const SweepGrid& grid, const std::string& model_id,
                                  const ModelProfile& profile, const GpuSpec& gpu,
                                  ProfilingBackend& backend, std::uint64_t noise_seed,
                                  double noise_sigma = 0.02, double duration_s = 10.0) {
    grid.validate();
    ProfilingDataset ds;
    ds.grid = grid;
    ds.seed = noise_seed;
    ds.noise_sigma = noise_sigma;

    std::size_t point_index = 0;
    for (double cap : grid.caps)
        for (int batch : grid.batches)
            for (int tp : grid.tps)
                for (int ep : grid.eps)
                    for (int dp : grid.dps) {
                        const OperatingPoint p{cap, batch, tp, ep, dp};
                        const std::size_t idx = point_index++;
                        if (auto why = infeasible_reason(p, profile, gpu)) {
                            ds.skipped.push_back({p, *why});
                            continue;
                        }
                        ProfilingBackend::Sample s;
                        try {
                            s = backend.measure(p, profile);
                        } catch (const std::exception&) {
                            ds.complete = false;
                            return ds;
                        }
                        Rng rng = Rng::substream(noise_seed, idx);
                        ProfilingRecord r;
                        r.point = p;
                        r.model = model_id;
                        r.duration_s = duration_s;
                        bool outlier = false;
                        auto noisy = [&](double clean) {
                            const double factor = 1.0 + noise_sigma * rng.gaussian();
                            if (std::abs(factor - 1.0) > 5.0 * noise_sigma) outlier = true;
                            return clean * factor;
                        };
                        r.throughput_tps = noisy(s.throughput_tps);
                        r.gpu_power_w = noisy(s.gpu_power_w);
                        r.sys_power_w = noisy(s.sys_power_w);
                        if (outlier) ds.noise_outliers.push_back(ds.records.size());
                        ds.records.push_back(r);
                    }
    return ds;
}

inline const char* kDatasetHeader =
    "model,cap_w,batch,tp,ep,dp,throughput_tps,gpu_power_w,sys_power_w,duration_s";

inline std::string dataset_to_csv(const ProfilingDataset& ds) {
    std::string out = kDatasetHeader;
    out += "\n";
    for (const auto& r : ds.records) {
        out += r.model + "," + fmt_num(r.point.cap_watts) + "," + std::to_string(r.point.batch) +
               "," + std::to_string(r.point.tp) + "," + std::to_string(r.point.ep) + "," +
               std::to_string(r.point.dp) + "," + fmt_num(r.throughput_tps) + "," +
               fmt_num(r.gpu_power_w) + "," + fmt_num(r.sys_power_w) + "," +
               fmt_num(r.duration_s) + "\n";
    }
    return out;
}

inline std::vector<ProfilingRecord> records_from_csv(const std::filesystem::path& path) {
    std::vector<ProfilingRecord> out;
    for (const auto& row : read_csv(path, /*skip_header=*/true)) {
        if (row.size() != 10) throw data_error("bad dataset row in " + path.string());
        ProfilingRecord r;
        r.model = row[0];
        r.point.cap_watts = std::stod(row[1]);
        r.point.batch = std::stoi(row[2]);
        r.point.tp = std::stoi(row[3]);
        r.point.ep = std::stoi(row[4]);
        r.point.dp = std::stoi(row[5]);
        r.throughput_tps = std::stod(row[6]);
        r.gpu_power_w = std::stod(row[7]);
        r.sys_power_w = std::stod(row[8]);
        r.duration_s = std::stod(row[9]);
        out.push_back(r);
    }
    return out;
}

inline json sidecar_to_json(const ProfilingDataset& ds) {
    json skipped = json::array();
    for (const auto& s : ds.skipped)
        skipped.push_back(json{{"cap_w", s.point.cap_watts},
                               {"batch", s.point.batch},
                               {"tp", s.point.tp},
                               {"ep", s.point.ep},
                               {"dp", s.point.dp},
                               {"reason", s.reason}});
    return json{{"schema_version", 1},
                {"grid", grid_to_json(ds.grid)},
                {"seed", ds.seed},
                {"noise_sigma", ds.noise_sigma},
                {"complete", ds.complete},
                {"records", ds.records.size()},
                {"skipped", skipped},
                {"noise_outlier_records", ds.noise_outliers}};
}

// Deterministic train/holdout split, stratified per model so every model
// contributes the same fraction to the holdout.
inline std::pair<std::vector<ProfilingRecord>, std::vector<ProfilingRecord>> split_holdout(
    const std::vector<ProfilingRecord>& records, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0))
        throw config_error("split_holdout: fraction must be in (0,1)");
    std::map<std::string, std::vector<std::size_t>> by_model;
    for (std::size_t i = 0; i < records.size(); ++i) by_model[records[i].model].push_back(i);

    std::vector<bool> heldout(records.size(), false);
    std::uint64_t stratum = 0;
    for (auto& [model, idxs] : by_model) {
        Rng rng = Rng::substream(seed, fnv1a64(model) ^ stratum++);
        // Fisher-Yates, then take the first n_hold as holdout
        for (std::size_t i = idxs.size(); i > 1; --i) {
            const std::size_t j = rng.next_u64() % i;
            std::swap(idxs[i - 1], idxs[j]);
        }
        const std::size_t n_hold =
            static_cast<std::size_t>(std::lround(fraction * static_cast<double>(idxs.size())));
        for (std::size_t i = 0; i < n_hold && i < idxs.size(); ++i) heldout[idxs[i]] = true;
    }
    std::pair<std::vector<ProfilingRecord>, std::vector<ProfilingRecord>> out;
    for (std::size_t i = 0; i < records.size(); ++i)
        (heldout[i] ? out.second : out.first).push_back(records[i]);
    return out;
}

}  // namespace wattserve

#endif
