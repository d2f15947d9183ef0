#ifndef WATTSERVE_SIM_HPP
#define WATTSERVE_SIM_HPP

#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <tuple>
#include <vector>

#include "wattserve/allocator.hpp"
#include "wattserve/controller.hpp"
#include "wattserve/model.hpp"
#include "wattserve/rng.hpp"

// Interval-quantized cluster simulator. The controller acts every 500 ms, so
// the simulation advances in the same ticks: Poisson arrivals at interval
// start, a continuous-batching service loop inside the interval, telemetry
// and one control decision per interval. Arrival streams depend only on
// (scenario seed, node index), never on the policy, so policies compete on
// identical request sequences.

namespace wattserve {

enum class Policy { Fixed, AdaptiveBatch, AdaptiveCap, Joint, Oracle };

inline const char* to_string(Policy p) {
    switch (p) {
        case Policy::Fixed: return "fixed";
        case Policy::AdaptiveBatch: return "adaptive-batch";
        case Policy::AdaptiveCap: return "adaptive-cap";
        case Policy::Joint: return "joint";
        case Policy::Oracle: return "oracle";
    }
    return "?";
}

inline Policy policy_from_string(const std::string& s) {
    if (s == "fixed") return Policy::Fixed;
    if (s == "adaptive-batch") return Policy::AdaptiveBatch;
    if (s == "adaptive-cap") return Policy::AdaptiveCap;
    if (s == "joint") return Policy::Joint;
    if (s == "oracle") return Policy::Oracle;
    throw config_error("unknown policy: " + s);
}

struct OutputLenDist {
    double mean_tokens = 200.0;
    double log_sigma = 0.4;
};

struct ScenarioNode {
    std::string model_id;
    double qos_fraction = 1.0;  // target as a fraction of unconstrained throughput
    int tp = 1;
    int ep = 1;
    int dp = 1;
    double arrival_rate_per_s = 0.0;
    int initial_backlog = 0;  // requests queued at t=0 (system already under load)
};

struct Scenario {
    std::string name;
    double duration_s = 600.0;
    double interval_s = 0.5;
    std::uint64_t seed = 1;
    OutputLenDist output_len;
    std::optional<double> cluster_budget_w;
    std::vector<std::pair<double, double>> budget_trace;  // (t_s, cluster watts)
    Policy policy = Policy::Joint;
    Objective objective = Objective::QosMaxEfficiency;
    ControllerConfig controller;
    double epsilon = 0.05;
    std::vector<double> cand_caps{150, 200, 250, 300, 350, 400};
    std::vector<int> cand_batches{1, 4, 8, 16, 32, 64};
    std::vector<ScenarioNode> nodes;
    double initial_cap_w = 400.0;
    int initial_batch = 64;

    void validate() const {
        if (duration_s <= 0 || interval_s <= 0) throw config_error("scenario: bad duration");
        if (nodes.empty()) throw config_error("scenario: no nodes");
        if (cand_caps.empty() || cand_batches.empty())
            throw config_error("scenario: empty candidate grid");
        for (const auto& n : nodes) {
            if (n.arrival_rate_per_s < 0) throw config_error("scenario: negative arrival rate");
            if (n.qos_fraction <= 0 || n.qos_fraction > 1)
                throw config_error("scenario: qos_fraction must be in (0,1]");
        }
    }
};

// Continuous batching: the step batch tracks queue pressure up to the cap.
inline int effective_batch(int queue_depth, int running, int batch_cap) {
    if (queue_depth < 0 || running < 0 || batch_cap < 0)
        throw config_error("effective_batch: negative input");
    return std::min(batch_cap, running + queue_depth);
}

struct RequestRec {
    long id = 0;
    double arrival_s = 0.0;
    int output_tokens = 0;
    double generated = 0.0;
    double completed_s = -1.0;
    bool done() const { return completed_s >= 0.0; }
};

struct TelemetrySample {
    double t_s = 0.0;  // interval end
    double gpu_power_w = 0.0;
    double sys_power_w = 0.0;  // whole instance (all dp nodes)
    double throughput_tps = 0.0;
    double utilization = 0.0;
    int queue_depth = 0;
    int active_batch = 0;
    double node_budget_w = 0.0;  // 0 when unbudgeted
    double applied_cap_w = 0.0;
    int applied_batch_cap = 0;
};

struct DecisionRecord {
    double t_s = 0.0;
    OperatingPoint point;
    bool applied = false;
    DecisionReason reason = DecisionReason::HoldHysteresis;
    double err_norm = 0.0;
    double bias = 1.0;
};

struct NodeResult {
    std::string model_id;
    double throughput_target_tps = 0.0;
    std::vector<TelemetrySample> telemetry;
    std::vector<DecisionRecord> decisions;
    std::vector<RequestRec> requests;
    std::uint64_t arrival_stream_hash = 0;
};

struct SimResult {
    Scenario scenario;
    std::vector<NodeResult> nodes;
    double total_energy_j = 0.0;
};

namespace detail {

struct NodeRuntime {
    const ModelProfile* profile = nullptr;
    ScenarioNode cfg;
    double target_tps = 0.0;
    std::vector<OperatingPoint> candidates;
    Scorer scorer;
    ControllerState ctrl;
    double applied_cap = 400.0;
    double inflight_cap = 400.0;  // cap lands one interval after the batch knob
    int batch_cap = 64;
    std::deque<std::size_t> queue;
    std::vector<std::size_t> running;
    std::vector<RequestRec> requests;
    Rng arrivals = Rng(0);
    std::uint64_t arrival_hash = 0xcbf29ce484222325ULL;
    long next_id = 0;
    double node_budget = 0.0;  // 0 = unbudgeted
};

inline double trace_value(const std::vector<std::pair<double, double>>& trace, double t) {
    double v = trace.front().second;
    for (const auto& [ts, w] : trace) {
        if (ts <= t) v = w;
        else break;
    }
    return v;
}

// Candidate scores are pure functions of the operating point, so memoize
// them; dense demand-response grids re-score the same few hundred points
// every interval.
inline Scorer cached(Scorer inner) {
    auto cache = std::make_shared<std::map<std::tuple<double, int, int, int, int>,
                                           CandidateScore>>();
    return [inner = std::move(inner), cache](const OperatingPoint& p) {
        const auto key = std::make_tuple(p.cap_watts, p.batch, p.tp, p.ep, p.dp);
        auto it = cache->find(key);
        if (it != cache->end()) return it->second;
        const CandidateScore s = inner(p);
        cache->emplace(key, s);
        return s;
    };
}

// Facility-side power enforcement: walk the cap down until the expected
// host draw fits the node budget. Applied before the interval runs, so a
// budget can only be exceeded transiently via the actuation pipeline.
inline double enforce_cap(double cap, int batch, const NodeRuntime& n, const GpuSpec& gpu,
                          const SystemPowerCoeffs& coeffs) {
    if (n.node_budget <= 0.0 || batch < 1) return cap;
    double c = cap;
    while (c > gpu.min_cap_watts) {
        OperatingPoint p{c, batch, n.cfg.tp, n.cfg.ep, n.cfg.dp};
        if (cluster_system_power(p, *n.profile, gpu, coeffs) <= n.node_budget) return c;
        c = std::max(gpu.min_cap_watts, c - 5.0);
    }
    return gpu.min_cap_watts;
}

}  // namespace detail

class Simulator {
public:
    Simulator(const Scenario& sc, const ProfileRegistry& registry, const Platform& platform,
              const PredictorBundle* predictor)
        : sc_(sc), registry_(registry), platform_(platform), predictor_(predictor) {
        sc_.validate();
        const bool needs_predictor = sc_.policy == Policy::Joint ||
                                     sc_.policy == Policy::AdaptiveBatch ||
                                     sc_.policy == Policy::AdaptiveCap;
        if (needs_predictor && !predictor_)
            throw config_error("policy requires a trained predictor");
    }

    SimResult run() {
        setup_nodes();
        const int n_intervals = static_cast<int>(std::llround(sc_.duration_s / sc_.interval_s));
        SimResult result;
        result.scenario = sc_;
        result.nodes.resize(nodes_.size());

        double last_trace_w = -1.0;
        for (int k = 0; k < n_intervals; ++k) {
            const double t0 = k * sc_.interval_s;
            const double t1 = t0 + sc_.interval_s;

            // refresh budgets when the external signal moves
            if (!sc_.budget_trace.empty()) {
                const double w = detail::trace_value(sc_.budget_trace, t0);
                if (w != last_trace_w) {
                    assign_budgets(w);
                    last_trace_w = w;
                }
            }

            for (std::size_t ni = 0; ni < nodes_.size(); ++ni)
                step_node(nodes_[ni], result, ni, t0, t1);
        }

        for (std::size_t ni = 0; ni < nodes_.size(); ++ni) {
            auto& nr = result.nodes[ni];
            nr.model_id = nodes_[ni].cfg.model_id;
            nr.throughput_target_tps = nodes_[ni].target_tps;
            nr.requests = std::move(nodes_[ni].requests);
            nr.arrival_stream_hash = nodes_[ni].arrival_hash;
        }
        return result;
    }

    // Unconstrained reference rate a node's QoS fraction is taken against.
    static double unconstrained_throughput(const ScenarioNode& n, const ModelProfile& prof,
                                           const GpuSpec& gpu, const Scenario& sc) {
        const double cap = *std::max_element(sc.cand_caps.begin(), sc.cand_caps.end());
        const int batch = *std::max_element(sc.cand_batches.begin(), sc.cand_batches.end());
        const OperatingPoint p{cap, batch, n.tp, n.ep, n.dp};
        return n.dp * throughput(p, prof, gpu);
    }

private:
    void setup_nodes() {
        nodes_.clear();
        nodes_.resize(sc_.nodes.size());
        for (std::size_t i = 0; i < sc_.nodes.size(); ++i) {
            auto& n = nodes_[i];
            n.cfg = sc_.nodes[i];
            n.profile = &registry_.get(n.cfg.model_id);
            n.target_tps = n.cfg.qos_fraction *
                           unconstrained_throughput(n.cfg, *n.profile, platform_.gpu, sc_);
            n.candidates = build_candidates(n.cfg);
            n.scorer = detail::cached(sc_.policy == Policy::Oracle
                                          ? analytic_scorer(*n.profile, platform_.gpu)
                                          : (predictor_
                                                 ? predictor_scorer(*predictor_, n.cfg.model_id)
                                                 : analytic_scorer(*n.profile, platform_.gpu)));
            n.applied_cap = sc_.initial_cap_w;
            n.inflight_cap = sc_.initial_cap_w;
            n.batch_cap = sc_.initial_batch;
            n.ctrl.current = OperatingPoint{n.applied_cap, n.batch_cap, n.cfg.tp, n.cfg.ep,
                                            n.cfg.dp};
            n.arrivals = Rng::substream(sc_.seed, i);
            for (int b = 0; b < n.cfg.initial_backlog; ++b) spawn_request(n, 0.0);
        }
        if (sc_.cluster_budget_w && sc_.budget_trace.empty()) assign_budgets(*sc_.cluster_budget_w);
    }

    std::vector<OperatingPoint> build_candidates(const ScenarioNode& n) const {
        std::vector<double> caps = sc_.cand_caps;
        std::vector<int> batches = sc_.cand_batches;
        const int max_batch = *std::max_element(batches.begin(), batches.end());
        const double max_cap = *std::max_element(caps.begin(), caps.end());
        if (sc_.policy == Policy::AdaptiveBatch) caps = {max_cap};
        if (sc_.policy == Policy::AdaptiveCap) batches = {max_batch};
        if (sc_.policy == Policy::Fixed) {
            caps = {max_cap};
            batches = {max_batch};
        }
        std::vector<OperatingPoint> out;
        for (double c : caps)
            for (int b : batches) out.push_back(OperatingPoint{c, b, n.tp, n.ep, n.dp});
        return out;
    }

    // Split a cluster budget into per-instance budgets. The joint policies
    // get the model-guided water-filling split; the static baselines get the
    // blind equal split an operator would configure.
    void assign_budgets(double cluster_w) {
        if (sc_.policy == Policy::Joint || sc_.policy == Policy::Oracle) {
            std::vector<AllocRequest> reqs;
            for (auto& n : nodes_) {
                AllocRequest r;
                r.model_id = n.cfg.model_id;
                r.throughput_target_tps =
                    sc_.objective == Objective::QosMaxEfficiency ? n.target_tps : 0.0;
                r.candidates = n.candidates;
                r.score = n.scorer;
                r.dp = n.cfg.dp;
                reqs.push_back(std::move(r));
            }
            const auto alloc = allocate_budget(reqs, cluster_w, platform_.gpu, platform_.coeffs,
                                               25.0, sc_.controller.budget_margin);
            for (std::size_t i = 0; i < nodes_.size(); ++i)
                nodes_[i].node_budget = alloc.node_budgets_w[i];
        } else {
            int total_dp = 0;
            for (const auto& n : nodes_) total_dp += n.cfg.dp;
            for (auto& n : nodes_)
                n.node_budget = cluster_w * static_cast<double>(n.cfg.dp) / total_dp;
        }
    }

    void spawn_request(detail::NodeRuntime& n, double t) {
        const double log_mean = std::log(sc_.output_len.mean_tokens) -
                                0.5 * sc_.output_len.log_sigma * sc_.output_len.log_sigma;
        const int len = std::max(
            1, static_cast<int>(std::lround(n.arrivals.lognormal(log_mean,
                                                                 sc_.output_len.log_sigma))));
        RequestRec r;
        r.id = n.next_id++;
        r.arrival_s = t;
        r.output_tokens = len;
        n.arrival_hash = fnv1a64(std::to_string(r.id) + ":" + std::to_string(len) + "@" +
                                     fmt_num(t),
                                 n.arrival_hash);
        n.queue.push_back(n.requests.size());
        n.requests.push_back(r);
    }

    void step_node(detail::NodeRuntime& n, SimResult& result, std::size_t ni, double t0,
                   double t1) {
        // (1) arrivals for this interval
        const int n_arrivals = n.arrivals.poisson(n.cfg.arrival_rate_per_s * sc_.interval_s);
        for (int a = 0; a < n_arrivals; ++a) spawn_request(n, t0);

        // (2) effective step batch from queue pressure; per replica when the
        // instance is data-parallel (even fluid share across replicas)
        const int avail = static_cast<int>(n.running.size() + n.queue.size());
        const int per_replica_avail = (avail + n.cfg.dp - 1) / n.cfg.dp;
        const int b_eff = effective_batch(per_replica_avail, 0, n.batch_cap);
        const int slot_cap = b_eff * n.cfg.dp;

        // facility breaker keeps the measured draw inside the node budget
        const double cap =
            detail::enforce_cap(n.applied_cap, b_eff, n, platform_.gpu, platform_.coeffs);

        // (3)+(4) serve the interval with continuous admission: every active
        // sequence advances in lock-step, freed slots are refilled from the
        // queue mid-interval
        double tokens = 0.0, gpu_w = platform_.gpu.idle_watts, util = 0.0;
        if (b_eff >= 1) {
            const OperatingPoint p{cap, b_eff, n.cfg.tp, n.cfg.ep, n.cfg.dp};
            const double ts = step_timing(p, *n.profile, platform_.gpu).step_s;
            gpu_w = avg_gpu_power(p, *n.profile, platform_.gpu);
            const double steps_per_seq = sc_.interval_s / ts;
            double steps_left = steps_per_seq;
            while (steps_left > 1e-9) {
                while (static_cast<int>(n.running.size()) < slot_cap && !n.queue.empty()) {
                    n.running.push_back(n.queue.front());
                    n.queue.pop_front();
                }
                if (n.running.empty()) break;
                const int active = std::min<int>(slot_cap, static_cast<int>(n.running.size()));
                double chunk = steps_left;
                for (int i = 0; i < active; ++i) {
                    const auto& r = n.requests[n.running[i]];
                    chunk = std::min(chunk, r.output_tokens - r.generated);
                }
                chunk = std::max(chunk, 0.0);
                for (int i = 0; i < active; ++i)
                    n.requests[n.running[i]].generated += chunk;
                tokens += chunk * active;
                steps_left -= std::max(chunk, 1e-9);
                for (std::size_t i = 0; i < n.running.size();) {
                    auto& r = n.requests[n.running[i]];
                    if (r.generated >= r.output_tokens - 1e-7) {
                        r.generated = r.output_tokens;
                        r.completed_s = t1;
                        n.running.erase(n.running.begin() + i);
                    } else {
                        ++i;
                    }
                }
            }
            util = tokens / (static_cast<double>(slot_cap) * steps_per_seq);
        }

        const double sys_w = n.cfg.dp * (platform_.coeffs.alpha * kGpusPerNode * gpu_w +
                                         platform_.coeffs.beta_watts);
        result.total_energy_j += sys_w * sc_.interval_s;

        // (5) telemetry
        TelemetrySample tel;
        tel.t_s = t1;
        tel.gpu_power_w = gpu_w;
        tel.sys_power_w = sys_w;
        tel.throughput_tps = tokens / sc_.interval_s;
        tel.utilization = std::clamp(util, 0.0, 1.0);
        tel.queue_depth = static_cast<int>(n.queue.size());
        tel.active_batch = b_eff;
        tel.node_budget_w = n.node_budget;
        tel.applied_cap_w = cap;
        tel.applied_batch_cap = n.batch_cap;
        result.nodes[ni].telemetry.push_back(tel);

        // (6) control decision
        Targets targets;
        targets.throughput_tps = n.target_tps;
        targets.epsilon = sc_.epsilon;
        targets.objective = sc_.objective;
        if (n.node_budget > 0.0) targets.power_budget_w = n.node_budget;

        Decision decision{n.ctrl.current, false, DecisionReason::HoldHysteresis};
        double err = targets.throughput_tps > 0.0
                         ? (targets.throughput_tps - tel.throughput_tps) / targets.throughput_tps
                         : 0.0;
        if (sc_.policy != Policy::Fixed) {
            ControllerConfig cfg = sc_.controller;
            cfg.interval_s = sc_.interval_s;
            if (sc_.policy == Policy::Oracle) {
                cfg.gains = PidGains{0.0, 0.0, 0.0};  // exhaustive search, no feedback lag
                cfg.sustain_intervals = 0;
            }
            TelemetryInput ti{t1, tel.throughput_tps};
            auto [d, st] = control_step(ti, t1, targets, n.candidates, n.scorer,
                                        platform_.coeffs, n.ctrl, cfg);
            n.ctrl = st;
            decision = d;
            if (sc_.policy == Policy::Oracle && decision.reason != DecisionReason::HoldHysteresis)
                decision.reason = DecisionReason::OracleExhaustive;
        }
        DecisionRecord dr;
        dr.t_s = t1;
        dr.point = decision.point;
        dr.applied = decision.applied;
        dr.reason = decision.reason;
        dr.err_norm = err;
        dr.bias = n.ctrl.bias;
        result.nodes[ni].decisions.push_back(dr);

        // (7) actuation pipeline: the batch knob lands on the next interval,
        // the power cap one interval later (management-interface delay)
        n.applied_cap = n.inflight_cap;
        if (decision.applied) {
            n.batch_cap = decision.point.batch;
            n.inflight_cap = decision.point.cap_watts;
        }
    }

    Scenario sc_;
    const ProfileRegistry& registry_;
    const Platform& platform_;
    const PredictorBundle* predictor_;
    std::vector<detail::NodeRuntime> nodes_;
};

inline SimResult run_scenario(const Scenario& sc, const ProfileRegistry& registry,
                              const Platform& platform, const PredictorBundle* predictor) {
    return Simulator(sc, registry, platform, predictor).run();
}

// All five control strategies on identical seeds and arrival streams.
inline std::map<Policy, SimResult> run_baseline_suite(const Scenario& sc,
                                                      const ProfileRegistry& registry,
                                                      const Platform& platform,
                                                      const PredictorBundle* predictor) {
    std::map<Policy, SimResult> out;
    for (Policy p : {Policy::Fixed, Policy::AdaptiveBatch, Policy::AdaptiveCap, Policy::Joint,
                     Policy::Oracle}) {
        Scenario s = sc;
        s.policy = p;
        out.emplace(p, run_scenario(s, registry, platform, predictor));
    }
    return out;
}

}  // namespace wattserve

#endif
