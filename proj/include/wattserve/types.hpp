#ifndef WATTSERVE_TYPES_HPP
#define WATTSERVE_TYPES_HPP

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

namespace wattserve {

inline constexpr int kGpusPerNode = 4;

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct calibration_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Platform description for one GPU model. Caps are the settable power-limit
// range; max_frequency is the normalized clock at an uncapped part.
struct GpuSpec {
    double idle_watts = 40.0;
    double min_cap_watts = 100.0;
    double max_cap_watts = 400.0;
    double max_frequency = 1.0;

    void validate() const {
        if (!(min_cap_watts < max_cap_watts))
            throw config_error("GpuSpec: min_cap_watts must be below max_cap_watts");
        if (idle_watts < 0.0) throw config_error("GpuSpec: idle_watts must be >= 0");
        if (!(max_frequency > 0.0)) throw config_error("GpuSpec: max_frequency must be > 0");
    }
};

// Host-level power model: P_sys = alpha * sum(P_gpu) + beta, fitted per node.
struct SystemPowerCoeffs {
    double alpha = 1.05;
    double beta_watts = 345.0;

    void validate() const {
        if (!(alpha > 0.0)) throw config_error("SystemPowerCoeffs: alpha must be > 0");
    }
};

// Static sharding degrees a model instance is deployed with.
struct Deployment {
    int tp = 1;
    int ep = 1;
    int dp = 1;
};

// Calibrated per-model cost/power record. Times are normalized units: only
// ratios matter, the absolute token/s scale is set by calibration.
//
// Decode step model at operating point (cap, batch B, tp, dp):
//   f       = clamp((cap - min_cap) / (knee - min_cap), floor, 1) * f_max
//   t_comp  = (compute_fixed + compute_per_seq * B / tp) / f
//   t_comm  = (comm_fixed[tp] + comm_per_seq * B) * internode_factor^(dp-1)
//   t_step  = max(t_comp, t_comm) + (1 - overlap) * min(t_comp, t_comm)
struct ModelProfile {
    std::string name;
    double total_params_b = 0.0;
    double active_params_b = 0.0;
    int num_experts = 0;  // 0 for dense
    int top_k = 0;

    double compute_fixed = 0.0;             // per-step compute cost
    double compute_per_seq = 0.0;           // compute cost per batched sequence
    std::map<int, double> comm_fixed_by_tp; // per-step communication cost, keyed by TP
    double comm_per_seq = 0.0;              // communication cost per batched sequence
    double internode_factor = 1.0;          // multiplicative comm inflation per added node
    double knee_watts = 200.0;              // cap above which frequency stops rising
    double compute_power_base = 100.0;      // compute-phase demand intercept (W)
    double compute_power_per_seq = 0.0;     // compute-phase demand slope (W per seq/tp)
    double comm_power = 100.0;              // communication-phase draw (W)
    double overlap = 0.0;                   // compute/communication overlap fraction

    Deployment deployment;

    bool is_dense() const { return num_experts == 0; }

    void validate(const GpuSpec& gpu) const {
        if (name.empty()) throw config_error("ModelProfile: name must be set");
        if (compute_fixed < 0 || compute_per_seq < 0 || comm_per_seq < 0)
            throw config_error(name + ": cost coefficients must be >= 0");
        if (comm_fixed_by_tp.empty())
            throw config_error(name + ": comm_fixed_by_tp must not be empty");
        for (const auto& [tp, v] : comm_fixed_by_tp) {
            if (tp < 1 || v < 0)
                throw config_error(name + ": comm_fixed_by_tp entries must be tp>=1, cost>=0");
        }
        if (knee_watts < gpu.min_cap_watts || knee_watts > gpu.max_cap_watts)
            throw config_error(name + ": knee_watts outside platform cap range");
        if (comm_power < gpu.idle_watts)
            throw config_error(name + ": comm_power must be >= idle_watts");
        if (internode_factor < 1.0)
            throw config_error(name + ": internode_factor must be >= 1");
        if (overlap < 0.0 || overlap > 1.0)
            throw config_error(name + ": overlap must be in [0,1]");
    }
};

// One runtime configuration: the two dynamic knobs plus static parallelism.
struct OperatingPoint {
    double cap_watts = 400.0;
    int batch = 1;
    int tp = 1;
    int ep = 1;
    int dp = 1;

    void validate(const GpuSpec& gpu) const {
        if (cap_watts < gpu.min_cap_watts || cap_watts > gpu.max_cap_watts)
            throw std::out_of_range("OperatingPoint: cap outside platform range");
        if (batch < 1) throw config_error("OperatingPoint: batch must be >= 1");
        if (tp < 1 || ep < 1 || dp < 1)
            throw config_error("OperatingPoint: parallel degrees must be >= 1");
    }

    bool operator==(const OperatingPoint& o) const {
        return cap_watts == o.cap_watts && batch == o.batch && tp == o.tp && ep == o.ep &&
               dp == o.dp;
    }
    bool operator!=(const OperatingPoint& o) const { return !(*this == o); }
};

struct StepTiming {
    double compute_s = 0.0;
    double comm_s = 0.0;
    double step_s = 0.0;
};

}  // namespace wattserve

#endif
