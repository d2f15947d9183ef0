#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "wattserve/model.hpp"

using namespace wattserve;

namespace {

GpuSpec test_gpu() { return GpuSpec{40.0, 100.0, 400.0, 1.0}; }

ModelProfile test_profile() {
    ModelProfile p;
    p.name = "test-moe";
    p.total_params_b = 10.0;
    p.active_params_b = 2.0;
    p.num_experts = 8;
    p.top_k = 2;
    p.compute_fixed = 0.002;
    p.compute_per_seq = 0.0008;
    p.comm_fixed_by_tp = {{1, 0.0004}, {2, 0.001}, {4, 0.004}};
    p.comm_per_seq = 0.0006;
    p.internode_factor = 1.3;
    p.knee_watts = 200.0;
    p.compute_power_base = 120.0;
    p.compute_power_per_seq = 6.0;
    p.comm_power = 110.0;
    p.overlap = 0.5;
    p.deployment = {2, 4, 1};
    return p;
}

}  // namespace

TEST_CASE("frequency law: knee and saturation") {
    const auto gpu = test_gpu();
    const auto prof = test_profile();
    CHECK(effective_frequency(prof.knee_watts, gpu, prof) == doctest::Approx(1.0));
    CHECK(effective_frequency(gpu.max_cap_watts, gpu, prof) == doctest::Approx(1.0));
    // midway between the floor cap and the knee: ratio 0.5 beats the 0.4 floor
    const double mid = 0.5 * (gpu.min_cap_watts + prof.knee_watts);
    CHECK(effective_frequency(mid, gpu, prof) == doctest::Approx(0.5));
    CHECK(effective_frequency(gpu.min_cap_watts, gpu, prof) ==
          doctest::Approx(kFrequencyFloorRatio));
    CHECK_THROWS_AS(effective_frequency(50.0, gpu, prof), std::out_of_range);
    CHECK_THROWS_AS(effective_frequency(450.0, gpu, prof), std::out_of_range);
}

TEST_CASE("frequency law: monotone, flat above the knee") {
    const auto gpu = test_gpu();
    const auto prof = test_profile();
    double prev = 0.0;
    for (double cap = 100.0; cap <= 400.0; cap += 10.0) {
        const double f = effective_frequency(cap, gpu, prof);
        CHECK(f >= prev - 1e-12);
        if (cap >= prof.knee_watts) CHECK(f == doctest::Approx(1.0));
        prev = f;
    }
}

TEST_CASE("step timing: overlap limits") {
    const auto gpu = test_gpu();
    auto prof = test_profile();

    prof.overlap = 0.0;
    OperatingPoint c{300.0, 16, 2, 4, 1};
    auto t = step_timing(c, prof, gpu);
    CHECK(t.step_s == doctest::Approx(t.compute_s + t.comm_s));

    prof.overlap = 1.0;
    t = step_timing(c, prof, gpu);
    CHECK(t.step_s == doctest::Approx(std::max(t.compute_s, t.comm_s)));

    prof.overlap = 0.5;
    t = step_timing(c, prof, gpu);
    CHECK(t.step_s >= std::max(t.compute_s, t.comm_s));
    CHECK(t.step_s <= t.compute_s + t.comm_s);
}

TEST_CASE("step timing: unknown tp is a configuration error") {
    const auto gpu = test_gpu();
    const auto prof = test_profile();
    CHECK_THROWS_AS(step_timing(OperatingPoint{300.0, 16, 3, 4, 1}, prof, gpu), config_error);
}

TEST_CASE("no fixed costs means batch doubling keeps throughput flat") {
    const auto gpu = test_gpu();
    auto prof = test_profile();
    prof.compute_fixed = 0.0;
    prof.comm_fixed_by_tp = {{2, 0.0}};
    const OperatingPoint a{300.0, 16, 2, 4, 1};
    const OperatingPoint b{300.0, 32, 2, 4, 1};
    CHECK(throughput(a, prof, gpu) == doctest::Approx(throughput(b, prof, gpu)));
}

TEST_CASE("throughput definition and cap monotonicity") {
    const auto gpu = test_gpu();
    auto prof = test_profile();
    // batch=1 with a 0.05 s step -> 20 tokens/s
    prof.overlap = 0.0;
    prof.compute_fixed = 0.04;
    prof.compute_per_seq = 0.0;
    prof.comm_fixed_by_tp = {{2, 0.01}};
    prof.comm_per_seq = 0.0;
    prof.knee_watts = 200.0;
    const OperatingPoint c{400.0, 1, 2, 4, 1};
    CHECK(throughput(c, prof, gpu) == doctest::Approx(20.0));

    const auto p2 = test_profile();
    double prev = 0.0;
    for (double cap : {150.0, 200.0, 250.0, 300.0, 350.0, 400.0}) {
        const double t = throughput(OperatingPoint{cap, 32, 2, 4, 1}, p2, gpu);
        CHECK(t >= prev - 1e-12);
        prev = t;
    }
}

TEST_CASE("gpu power: single phase and inactive cap") {
    const auto gpu = test_gpu();
    auto prof = test_profile();

    // no communication: power equals the compute phase draw
    prof.comm_fixed_by_tp = {{2, 0.0}};
    prof.comm_per_seq = 0.0;
    const OperatingPoint c{300.0, 8, 2, 4, 1};
    const double demand = compute_power_demand(prof, 8, 2);
    CHECK(avg_gpu_power(c, prof, gpu) == doctest::Approx(std::min(300.0, demand)));

    // demand below the cap: raising the cap above the knee leaves power flat
    auto p2 = test_profile();
    p2.compute_power_base = 100.0;
    p2.compute_power_per_seq = 1.0;
    const double pa = avg_gpu_power(OperatingPoint{300.0, 8, 2, 4, 1}, p2, gpu);
    const double pb = avg_gpu_power(OperatingPoint{400.0, 8, 2, 4, 1}, p2, gpu);
    CHECK(pa == doctest::Approx(pb));
}

TEST_CASE("gpu power stays between idle and cap when comm power fits the cap") {
    const auto gpu = test_gpu();
    const auto prof = test_profile();
    for (double cap : {150.0, 200.0, 300.0, 400.0})
        for (int batch : {1, 8, 64}) {
            const double p = avg_gpu_power(OperatingPoint{cap, batch, 2, 4, 1}, prof, gpu);
            CHECK(p >= gpu.idle_watts);
            CHECK(p <= cap + 1e-9);
        }
}

TEST_CASE("system power: linear host model") {
    const SystemPowerCoeffs k{1.05, 345.0};
    const std::vector<double> gpus{300.0, 300.0, 300.0, 300.0};
    CHECK(system_power(gpus, k) == doctest::Approx(1605.0));

    const std::vector<double> idle{0.0};
    CHECK(system_power(idle, k) == doctest::Approx(345.0));

    const SystemPowerCoeffs ident{1.0, 0.0};
    CHECK(system_power(gpus, ident) == doctest::Approx(1200.0));

    CHECK_THROWS_AS(system_power(std::vector<double>{}, k), config_error);
}

TEST_CASE("system power is affine in the GPU sum") {
    const SystemPowerCoeffs k{1.05, 345.0};
    const std::vector<double> a{210.0, 180.0, 170.0, 220.0};
    const std::vector<double> b{90.0, 110.0, 140.0, 100.0};
    std::vector<double> ab(4);
    for (int i = 0; i < 4; ++i) ab[i] = a[i] + b[i];
    CHECK(system_power(ab, k) + k.beta_watts ==
          doctest::Approx(system_power(a, k) + system_power(b, k)));
}

TEST_CASE("efficiency: definition and dp invariance of the per-node form") {
    const auto gpu = test_gpu();
    const auto prof = test_profile();
    const SystemPowerCoeffs k{1.05, 345.0};

    // 100 tokens/s at 500 W -> 0.2 tokens/J
    CHECK(100.0 / 500.0 == doctest::Approx(0.2));

    const OperatingPoint c{300.0, 32, 2, 4, 1};
    const double t = throughput(c, prof, gpu);
    const double p = node_system_power(c, prof, gpu, k);
    CHECK(efficiency(c, prof, gpu, k) == doctest::Approx(t / p));

    // replicas scale tokens and hosts together
    OperatingPoint c3 = c;
    c3.dp = 3;
    CHECK(cluster_throughput(c3, prof, gpu) ==
          doctest::Approx(3.0 * throughput(c3, prof, gpu)));
    CHECK(cluster_system_power(c3, prof, gpu, k) ==
          doctest::Approx(3.0 * node_system_power(c3, prof, gpu, k)));
}

TEST_CASE("multi-node comm inflation lowers efficiency") {
    const auto gpu = test_gpu();
    const auto prof = test_profile();
    const SystemPowerCoeffs k{1.05, 345.0};
    const OperatingPoint one{300.0, 64, 2, 4, 1};
    OperatingPoint three = one;
    three.dp = 3;
    CHECK(efficiency(three, prof, gpu, k) < efficiency(one, prof, gpu, k));
}

TEST_CASE("phase accounting sums to one without overlap") {
    const auto gpu = test_gpu();
    auto prof = test_profile();
    prof.overlap = 0.0;
    const auto t = step_timing(OperatingPoint{250.0, 16, 2, 4, 1}, prof, gpu);
    CHECK(t.compute_s / t.step_s + t.comm_s / t.step_s == doctest::Approx(1.0));
}
