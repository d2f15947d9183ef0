#ifndef WATTSERVE_CONTROLLER_HPP
#define WATTSERVE_CONTROLLER_HPP

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "wattserve/forest.hpp"
#include "wattserve/model.hpp"

namespace wattserve {

// What the runtime optimizes for. QoS mode maximizes efficiency subject to
// the throughput target; tracking mode maximizes throughput subject to an
// externally supplied power budget (demand-response operation).
enum class Objective { QosMaxEfficiency, BudgetMaxThroughput };

struct Targets {
    double throughput_tps = 0.0;            // required in QoS mode
    std::optional<double> power_budget_w;   // per-instance host power cap
    double epsilon = 0.05;                  // normalized deviation threshold
    Objective objective = Objective::QosMaxEfficiency;

    bool operator==(const Targets& o) const {
        return throughput_tps == o.throughput_tps && power_budget_w == o.power_budget_w &&
               epsilon == o.epsilon && objective == o.objective;
    }
};

struct PidGains {
    double kp = 0.5;
    double ki = 0.1;
    double kd = 0.05;
};

struct ControllerConfig {
    PidGains gains;
    int sustain_intervals = 3;    // deviation persistence before reconfiguring
    double integral_clamp = 0.5;  // anti-windup bound on the accumulated error
    double bias_min = 0.5;
    double bias_max = 2.0;
    double interval_s = 0.5;
    // Selection margin above the throughput target. Picking a config that
    // only just clears the target leaves it one prediction error away from
    // sitting inside the hysteresis dead-band below the target.
    double target_headroom = 0.0;
    // Power-budget margin. A config whose predicted draw sits exactly at the
    // budget trips the facility breaker whenever the prediction was a few
    // watts optimistic; in demand-limited regimes the breaker can then only
    // shed those watts by crushing the clock floor.
    double budget_margin = 0.0;
};

struct ControllerState {
    double bias = 1.0;  // multiplicative correction on predicted throughput
    double integral = 0.0;
    double prev_error = 0.0;
    bool has_prev_error = false;
    int sustain_count = 0;
    OperatingPoint current;
    std::optional<Targets> last_targets;
};

enum class DecisionReason {
    QosFeasibleMaxEfficiency,
    FallbackMaxThroughput,
    BudgetConstrainedMaxThroughput,
    HoldHysteresis,
    OracleExhaustive
};

inline const char* to_string(DecisionReason r) {
    switch (r) {
        case DecisionReason::QosFeasibleMaxEfficiency: return "qos-feasible-max-efficiency";
        case DecisionReason::FallbackMaxThroughput: return "fallback-max-throughput";
        case DecisionReason::BudgetConstrainedMaxThroughput:
            return "budget-constrained-max-throughput";
        case DecisionReason::HoldHysteresis: return "hold-hysteresis";
        case DecisionReason::OracleExhaustive: return "oracle-exhaustive";
    }
    return "?";
}

struct Decision {
    OperatingPoint point;
    bool applied = false;
    DecisionReason reason = DecisionReason::HoldHysteresis;
};

// Candidate scoring abstraction: the runtime scores with the trained
// predictor, the oracle policy scores with the analytic model itself.
struct CandidateScore {
    double throughput_tps = 0.0;
    double gpu_power_w = 0.0;
};

using Scorer = std::function<CandidateScore(const OperatingPoint&)>;

inline Scorer predictor_scorer(const PredictorBundle& bundle, std::string model_id) {
    return [&bundle, model_id = std::move(model_id)](const OperatingPoint& p) {
        const auto m = bundle.predict(p, model_id);
        return CandidateScore{m.throughput_hat, m.power_hat};
    };
}

inline Scorer analytic_scorer(const ModelProfile& profile, const GpuSpec& gpu) {
    return [&profile, &gpu](const OperatingPoint& p) {
        return CandidateScore{throughput(p, profile, gpu), avg_gpu_power(p, profile, gpu)};
    };
}

namespace detail {

// Relative comparison with a small tolerance; near-ties fall through to the
// deterministic knob order (lower cap, then smaller batch) so that rescaling
// all predictions by a common factor cannot flip the argmax.
inline bool better_candidate(double score_a, const OperatingPoint& a, double score_b,
                             const OperatingPoint& b) {
    const double scale = std::max({std::abs(score_a), std::abs(score_b), 1e-300});
    if ((score_a - score_b) / scale > 1e-9) return true;
    if ((score_b - score_a) / scale > 1e-9) return false;
    if (a.cap_watts != b.cap_watts) return a.cap_watts < b.cap_watts;
    return a.batch < b.batch;
}

}  // namespace detail

// Model-guided selection over the candidate grid. Predicted throughput is
// bias-corrected before the target test; the efficiency ranking itself uses
// the raw ratio (a common bias factor cannot change an argmax).
inline Decision select_config(const std::vector<OperatingPoint>& candidates,
                              const Targets& targets, const Scorer& score,
                              const SystemPowerCoeffs& coeffs, double bias = 1.0,
                              double target_headroom = 0.0, double budget_margin = 0.0) {
    if (candidates.empty()) throw config_error("select_config: empty candidate list");
    const double target = targets.throughput_tps * (1.0 + target_headroom);

    struct Scored {
        OperatingPoint point;
        double t_hat;   // instance-level tokens/s (all dp replicas)
        double p_node;  // host power for the whole instance
    };
    std::vector<Scored> scored;
    scored.reserve(candidates.size());
    for (const auto& c : candidates) {
        const auto s = score(c);
        const double p_node =
            c.dp * (coeffs.alpha * kGpusPerNode * s.gpu_power_w + coeffs.beta_watts);
        scored.push_back({c, c.dp * s.throughput_tps, p_node});
    }

    const bool budget_set = targets.power_budget_w.has_value();
    const double budget = budget_set ? *targets.power_budget_w * (1.0 - budget_margin) : 0.0;
    auto within_budget = [&](const Scored& s) { return !budget_set || s.p_node <= budget; };

    const Scored* best = nullptr;
    DecisionReason reason = DecisionReason::FallbackMaxThroughput;

    if (targets.objective == Objective::QosMaxEfficiency) {
        // C_ok: meets the target (and budget, when set); pick max efficiency.
        for (const auto& s : scored) {
            if (!within_budget(s) || s.t_hat * bias < target) continue;
            if (!best || detail::better_candidate(s.t_hat / s.p_node, s.point,
                                                  best->t_hat / best->p_node, best->point))
                best = &s;
        }
        if (best) reason = DecisionReason::QosFeasibleMaxEfficiency;
    }

    if (!best && budget_set) {
        // No config reaches the target: highest throughput the budget allows.
        for (const auto& s : scored) {
            if (!within_budget(s)) continue;
            if (!best ||
                detail::better_candidate(s.t_hat, s.point, best->t_hat, best->point))
                best = &s;
        }
        if (best) reason = DecisionReason::BudgetConstrainedMaxThroughput;
        if (!best) {
            // Budget below every candidate: least-power point, nearest feasible.
            for (const auto& s : scored) {
                if (!best || detail::better_candidate(-s.p_node, s.point, -best->p_node,
                                                      best->point))
                    best = &s;
            }
            reason = DecisionReason::BudgetConstrainedMaxThroughput;
        }
    }

    if (!best) {
        for (const auto& s : scored) {
            if (!best ||
                detail::better_candidate(s.t_hat, s.point, best->t_hat, best->point))
                best = &s;
        }
        reason = DecisionReason::FallbackMaxThroughput;
    }

    return Decision{best->point, true, reason};
}

struct TelemetryInput {
    double t_s = 0.0;
    double throughput_tps = 0.0;
};

// One control interval: measure, PID-correct the prediction bias, select,
// and apply only when the deviation has persisted (or constraints changed).
inline std::pair<Decision, ControllerState> control_step(
    const TelemetryInput& telemetry, double now_s, const Targets& targets,
    const std::vector<OperatingPoint>& candidates, const Scorer& score,
    const SystemPowerCoeffs& coeffs, const ControllerState& state,
    const ControllerConfig& cfg) {
    ControllerState st = state;

    if (now_s - telemetry.t_s > 1.5 * cfg.interval_s) {
        // stale telemetry: no error signal, hold everything
        return {Decision{st.current, false, DecisionReason::HoldHysteresis}, st};
    }

    // Target error gates reconfiguration (the hysteresis condition); the PID
    // bias itself corrects the model, so it tracks the gap between what the
    // predictor promised for the running config and what was measured.
    double err_norm = 0.0;
    if (targets.objective == Objective::QosMaxEfficiency && targets.throughput_tps > 0.0) {
        err_norm = (targets.throughput_tps - telemetry.throughput_tps) / targets.throughput_tps;

        const double promised = st.current.dp * score(st.current).throughput_tps * st.bias;
        if (promised > 0.0) {
            const double pred_err = (promised - telemetry.throughput_tps) / promised;
            st.integral = std::clamp(st.integral + pred_err, -cfg.integral_clamp,
                                     cfg.integral_clamp);
            const double deriv = st.has_prev_error ? pred_err - st.prev_error : 0.0;
            const double correction = cfg.gains.kp * pred_err + cfg.gains.ki * st.integral +
                                      cfg.gains.kd * deriv;
            // over-promise shrinks the bias, under-promise grows it
            st.bias = std::clamp(st.bias * (1.0 - correction), cfg.bias_min, cfg.bias_max);
            st.prev_error = pred_err;
            st.has_prev_error = true;
        }
    }

    const bool constraints_changed =
        !st.last_targets.has_value() || !(*st.last_targets == targets);
    st.last_targets = targets;

    if (std::abs(err_norm) > targets.epsilon)
        ++st.sustain_count;
    else
        st.sustain_count = 0;

    Decision chosen = select_config(candidates, targets, score, coeffs, st.bias,
                                    cfg.target_headroom, cfg.budget_margin);

    const bool may_apply =
        constraints_changed || st.sustain_count >= cfg.sustain_intervals;
    if (may_apply && chosen.point != st.current) {
        st.current = chosen.point;
        st.sustain_count = 0;
        return {chosen, st};
    }
    chosen.point = st.current;
    chosen.applied = false;
    if (!may_apply) chosen.reason = DecisionReason::HoldHysteresis;
    return {chosen, st};
}

}  // namespace wattserve

#endif
