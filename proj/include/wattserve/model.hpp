#ifndef WATTSERVE_MODEL_HPP
#define WATTSERVE_MODEL_HPP

#include <algorithm>
#include <span>

#include "wattserve/types.hpp"

// =========================================================================
// Analytic throughput/power model of multi-GPU decode serving.
//
//   Frequency law (power capping acts through DVFS):
//     f(cap) = f_max * clamp((cap - min_cap) / (knee - min_cap), 0.4, 1)
//   Frequency saturates at the knee; below it clocks scale with the cap,
//   with a floor of 0.4 at the bottom of the range (GPUs never clock to
//   zero, so the minimum cap still retains useful throughput).
//
//   A decode step produces one token per batched sequence. Compute time
//   scales with per-GPU work (batch/tp) and inversely with frequency;
//   communication time (all-reduce, expert all-to-all) is cap-independent
//   and inflates multiplicatively when the instance spans several nodes.
//
//   Per-GPU power is the time-weighted mix of the two phases. The compute
//   phase draws min(cap, demand(batch)): the cap binds until the workload's
//   demand at full clocks drops below it. The communication phase draws a
//   fixed, lower wattage (interconnect traffic does not load the SMs).
//
//   Host power per node: P_sys = alpha * sum_i P_gpu,i + beta. Every node
//   carries its own beta (fans, CPUs, PSU overhead), so a dp-wide instance
//   pays beta per node.
// =========================================================================

namespace wattserve {

inline constexpr double kFrequencyFloorRatio = 0.4;

inline double effective_frequency(double cap_watts, const GpuSpec& gpu,
                                  const ModelProfile& profile) {
    if (cap_watts < gpu.min_cap_watts || cap_watts > gpu.max_cap_watts)
        throw std::out_of_range("effective_frequency: cap outside platform range");
    const double span = profile.knee_watts - gpu.min_cap_watts;
    if (span <= 0.0) return gpu.max_frequency;
    const double ratio = (cap_watts - gpu.min_cap_watts) / span;
    return gpu.max_frequency * std::clamp(ratio, kFrequencyFloorRatio, 1.0);
}

// Compute-phase power demand at full clocks, before the cap is applied.
inline double compute_power_demand(const ModelProfile& profile, int batch, int tp) {
    return profile.compute_power_base +
           profile.compute_power_per_seq * static_cast<double>(batch) / tp;
}

inline StepTiming step_timing(const OperatingPoint& c, const ModelProfile& profile,
                              const GpuSpec& gpu) {
    c.validate(gpu);
    const auto it = profile.comm_fixed_by_tp.find(c.tp);
    if (it == profile.comm_fixed_by_tp.end())
        throw config_error(profile.name + ": no comm cost calibrated for tp=" +
                           std::to_string(c.tp));
    const double f = effective_frequency(c.cap_watts, gpu, profile);
    const double t_comp =
        (profile.compute_fixed + profile.compute_per_seq * c.batch / c.tp) / f;
    const double t_comm = (it->second + profile.comm_per_seq * c.batch) *
                          std::pow(profile.internode_factor, c.dp - 1);
    const double hi = std::max(t_comp, t_comm);
    const double lo = std::min(t_comp, t_comm);
    return StepTiming{t_comp, t_comm, hi + (1.0 - profile.overlap) * lo};
}

// Tokens per second for one data-parallel replica (one token per sequence
// per decode step).
inline double throughput(const OperatingPoint& c, const ModelProfile& profile,
                         const GpuSpec& gpu) {
    return static_cast<double>(c.batch) / step_timing(c, profile, gpu).step_s;
}

// Time-weighted per-GPU draw over one step.
inline double avg_gpu_power(const OperatingPoint& c, const ModelProfile& profile,
                            const GpuSpec& gpu) {
    const StepTiming t = step_timing(c, profile, gpu);
    const double p_comp = std::min(c.cap_watts, compute_power_demand(profile, c.batch, c.tp));
    const double comm_share = t.step_s - t.compute_s;
    return (t.compute_s * p_comp + comm_share * profile.comm_power) / t.step_s;
}

inline double system_power(std::span<const double> gpu_powers, const SystemPowerCoeffs& k) {
    if (gpu_powers.empty()) throw config_error("system_power: empty GPU power list");
    double sum = 0.0;
    for (double p : gpu_powers) sum += p;
    return k.alpha * sum + k.beta_watts;
}

// Host power for one of the instance's nodes (4 GPUs at the same draw).
inline double node_system_power(const OperatingPoint& c, const ModelProfile& profile,
                                const GpuSpec& gpu, const SystemPowerCoeffs& k) {
    const double p = avg_gpu_power(c, profile, gpu);
    return k.alpha * kGpusPerNode * p + k.beta_watts;
}

inline double cluster_system_power(const OperatingPoint& c, const ModelProfile& profile,
                                   const GpuSpec& gpu, const SystemPowerCoeffs& k) {
    return c.dp * node_system_power(c, profile, gpu, k);
}

inline double cluster_throughput(const OperatingPoint& c, const ModelProfile& profile,
                                 const GpuSpec& gpu) {
    return c.dp * throughput(c, profile, gpu);
}

// Tokens per joule over every node the instance occupies.
inline double efficiency(const OperatingPoint& c, const ModelProfile& profile,
                         const GpuSpec& gpu, const SystemPowerCoeffs& k) {
    return cluster_throughput(c, profile, gpu) / cluster_system_power(c, profile, gpu, k);
}

}  // namespace wattserve

#endif
