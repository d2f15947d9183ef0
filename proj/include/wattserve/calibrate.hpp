#ifndef WATTSERVE_CALIBRATE_HPP
#define WATTSERVE_CALIBRATE_HPP

#include <functional>
#include <sstream>
#include <vector>

#include "wattserve/model.hpp"
#include "wattserve/rng.hpp"

// Fits the free profile coefficients so the analytic model reproduces a set
// of measured (or published) anchor values. Plain coordinate descent with a
// bracketed golden-section line search per coefficient; no gradients needed
// and fully deterministic for a given seed.

namespace wattserve {

enum class AnchorMetric { Throughput, GpuPower, Efficiency };

struct Anchor {
    OperatingPoint point;
    AnchorMetric metric = AnchorMetric::Throughput;
    double value = 0.0;
};

struct CalibrationOptions {
    double rel_tolerance = 0.05;  // max relative error allowed on any anchor
    int max_rounds = 200;
    int restarts = 4;
    std::uint64_t seed = 1;
};

struct CalibrationResult {
    ModelProfile profile;
    std::vector<double> residuals;  // relative error per anchor
    double max_residual = 0.0;
    int rounds = 0;
};

namespace detail {

struct CoeffAccess {
    std::string name;
    std::function<double&(ModelProfile&)> ref;
    double lo;
    double hi;
};

inline std::vector<CoeffAccess> free_coefficients(const ModelProfile& tmpl,
                                                  const GpuSpec& gpu) {
    std::vector<CoeffAccess> cs;
    cs.push_back({"compute_fixed", [](ModelProfile& p) -> double& { return p.compute_fixed; },
                  0.0, 10.0});
    cs.push_back({"compute_per_seq",
                  [](ModelProfile& p) -> double& { return p.compute_per_seq; }, 0.0, 10.0});
    for (const auto& [tp, _] : tmpl.comm_fixed_by_tp) {
        int key = tp;
        cs.push_back({"comm_fixed_tp" + std::to_string(key),
                      [key](ModelProfile& p) -> double& { return p.comm_fixed_by_tp[key]; },
                      0.0, 10.0});
    }
    cs.push_back({"comm_per_seq", [](ModelProfile& p) -> double& { return p.comm_per_seq; },
                  0.0, 10.0});
    cs.push_back({"knee_watts", [](ModelProfile& p) -> double& { return p.knee_watts; },
                  gpu.min_cap_watts, gpu.max_cap_watts});
    cs.push_back({"internode_factor",
                  [](ModelProfile& p) -> double& { return p.internode_factor; }, 1.0, 4.0});
    cs.push_back({"comm_power", [](ModelProfile& p) -> double& { return p.comm_power; },
                  gpu.idle_watts, gpu.max_cap_watts});
    cs.push_back({"compute_power_base",
                  [](ModelProfile& p) -> double& { return p.compute_power_base; }, 0.0, 600.0});
    cs.push_back({"compute_power_per_seq",
                  [](ModelProfile& p) -> double& { return p.compute_power_per_seq; }, 0.0, 50.0});
    return cs;
}

inline double anchor_value(const ModelProfile& p, const GpuSpec& gpu,
                           const SystemPowerCoeffs& k, const Anchor& a) {
    switch (a.metric) {
        case AnchorMetric::Throughput: return throughput(a.point, p, gpu);
        case AnchorMetric::GpuPower: return avg_gpu_power(a.point, p, gpu);
        case AnchorMetric::Efficiency: return efficiency(a.point, p, gpu, k);
    }
    return 0.0;
}

inline double objective(const ModelProfile& p, const GpuSpec& gpu, const SystemPowerCoeffs& k,
                        const std::vector<Anchor>& anchors) {
    double sse = 0.0;
    for (const auto& a : anchors) {
        const double v = anchor_value(p, gpu, k, a);
        const double rel = (v - a.value) / a.value;
        sse += rel * rel;
    }
    return sse;
}

// Golden-section minimum of obj over [lo, hi].
inline double line_search(const std::function<double(double)>& obj, double lo, double hi,
                          int iters = 40) {
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = obj(c), fd = obj(d);
    for (int i = 0; i < iters; ++i) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = obj(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = obj(d);
        }
    }
    return fc < fd ? c : d;
}

}  // namespace detail

inline CalibrationResult calibrate(const ModelProfile& tmpl, const GpuSpec& gpu,
                                   const SystemPowerCoeffs& coeffs,
                                   const std::vector<Anchor>& anchors,
                                   const CalibrationOptions& opts = {}) {
    auto coeff_list = detail::free_coefficients(tmpl, gpu);
    if (anchors.size() < coeff_list.size()) {
        std::ostringstream msg;
        msg << "calibrate: " << anchors.size() << " anchors for " << coeff_list.size()
            << " free coefficients (underdetermined)";
        throw calibration_error(msg.str());
    }
    for (const auto& a : anchors)
        if (a.value <= 0.0) throw calibration_error("calibrate: anchor values must be > 0");

    Rng rng(opts.seed);
    ModelProfile best = tmpl;
    double best_obj = detail::objective(best, gpu, coeffs, anchors);
    int rounds_used = 0;

    for (int restart = 0; restart <= opts.restarts; ++restart) {
        ModelProfile cur = tmpl;
        if (restart > 0) {  // jittered restart around the template
            for (auto& c : coeff_list) {
                double& v = c.ref(cur);
                const double span = c.hi - c.lo;
                v = std::clamp(v * rng.uniform(0.6, 1.6) + rng.uniform(-0.02, 0.02) * span,
                               c.lo, c.hi);
            }
        }
        double cur_obj = detail::objective(cur, gpu, coeffs, anchors);
        for (int round = 0; round < opts.max_rounds; ++round) {
            ++rounds_used;
            const double before = cur_obj;
            for (auto& c : coeff_list) {
                const double saved = c.ref(cur);
                // search a window around the current value plus the full range
                // every few rounds to escape shallow local basins
                double lo = c.lo, hi = c.hi;
                if (round % 5 != 0) {
                    const double w = std::max(std::abs(saved) * 0.5, (c.hi - c.lo) * 0.02);
                    lo = std::max(c.lo, saved - w);
                    hi = std::min(c.hi, saved + w);
                }
                const double v = detail::line_search(
                    [&](double x) {
                        c.ref(cur) = x;
                        return detail::objective(cur, gpu, coeffs, anchors);
                    },
                    lo, hi);
                double new_obj;
                c.ref(cur) = v;
                new_obj = detail::objective(cur, gpu, coeffs, anchors);
                if (new_obj > cur_obj) {
                    c.ref(cur) = saved;  // keep the better of old/new
                } else {
                    cur_obj = new_obj;
                }
            }
            if (before - cur_obj < 1e-14) break;
        }
        if (cur_obj < best_obj) {
            best = cur;
            best_obj = cur_obj;
        }
        if (best_obj < 1e-12) break;
    }

    CalibrationResult res;
    res.profile = best;
    res.rounds = rounds_used;
    for (const auto& a : anchors) {
        const double v = detail::anchor_value(best, gpu, coeffs, a);
        res.residuals.push_back(std::abs(v - a.value) / a.value);
    }
    res.max_residual = *std::max_element(res.residuals.begin(), res.residuals.end());
    if (res.max_residual > opts.rel_tolerance) {
        std::ostringstream msg;
        msg << "calibrate: tolerance not reached, worst residual " << res.max_residual
            << " (allowed " << opts.rel_tolerance << ")";
        throw calibration_error(msg.str());
    }
    return res;
}

}  // namespace wattserve

#endif
