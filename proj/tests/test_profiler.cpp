#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "wattserve/sweep.hpp"

using namespace wattserve;

namespace {

Platform load_platform() {
    return platform_from_json(parse_json_file("data/profiles/platform.json"));
}

struct FailingBackend : ProfilingBackend {
    int calls_before_failure;
    AnalyticBackend inner;
    FailingBackend(int n, GpuSpec g, SystemPowerCoeffs k)
        : calls_before_failure(n), inner(g, k) {}
    Sample measure(const OperatingPoint& p, const ModelProfile& prof) override {
        if (calls_before_failure-- <= 0) throw std::runtime_error("backend lost");
        return inner.measure(p, prof);
    }
};

}  // namespace

TEST_CASE("full grid has 972 candidate points per MoE model") {
    const auto grid = SweepGrid::default_grid();
    CHECK(grid.candidate_count() == 972);

    const auto platform = load_platform();
    const auto reg = ProfileRegistry::load_dir("data/profiles", platform.gpu);
    AnalyticBackend backend(platform.gpu, platform.coeffs);

    const auto ds = run_sweep(grid, "qwen15-moe-like", reg.get("qwen15-moe-like"),
                              platform.gpu, backend, 7);
    CHECK(ds.records.size() + ds.skipped.size() == 972);
    CHECK(ds.records.size() == 972);  // 64 experts: every EP in {1,4,8} is feasible
    CHECK(ds.complete);
}

TEST_CASE("dense models skip expert-parallel points with a recorded reason") {
    const auto platform = load_platform();
    const auto reg = ProfileRegistry::load_dir("data/profiles", platform.gpu);
    AnalyticBackend backend(platform.gpu, platform.coeffs);

    const auto ds = run_sweep(SweepGrid::default_grid(), "llama2-7b-like",
                              reg.get("llama2-7b-like"), platform.gpu, backend, 7);
    // ep in {4,8} infeasible: 6*6*3*2*3 = 648 skipped, 324 kept
    CHECK(ds.records.size() == 324);
    CHECK(ds.skipped.size() == 648);
    for (const auto& s : ds.skipped) CHECK(s.reason == "expert parallelism on dense model");
}

TEST_CASE("grid of one point yields one record") {
    const auto platform = load_platform();
    const auto reg = ProfileRegistry::load_dir("data/profiles", platform.gpu);
    AnalyticBackend backend(platform.gpu, platform.coeffs);
    const SweepGrid grid{{300.0}, {16}, {2}, {8}, {1}};
    const auto ds = run_sweep(grid, "qwen15-moe-like", reg.get("qwen15-moe-like"),
                              platform.gpu, backend, 3);
    CHECK(ds.records.size() == 1);
}

TEST_CASE("sweep output is byte-identical for the same grid and seed") {
    const auto platform = load_platform();
    const auto reg = ProfileRegistry::load_dir("data/profiles", platform.gpu);
    AnalyticBackend backend(platform.gpu, platform.coeffs);
    const auto& prof = reg.get("olmoe-like");
    const auto a = run_sweep(SweepGrid::default_grid(), "olmoe-like", prof, platform.gpu,
                             backend, 42);
    const auto b = run_sweep(SweepGrid::default_grid(), "olmoe-like", prof, platform.gpu,
                             backend, 42);
    CHECK(dataset_to_csv(a) == dataset_to_csv(b));
    CHECK(fnv1a64(dataset_to_csv(a)) == fnv1a64(dataset_to_csv(b)));

    const auto c = run_sweep(SweepGrid::default_grid(), "olmoe-like", prof, platform.gpu,
                             backend, 43);
    CHECK(dataset_to_csv(a) != dataset_to_csv(c));
}

TEST_CASE("measurement noise stays inside the 5-sigma guard") {
    const auto platform = load_platform();
    const auto reg = ProfileRegistry::load_dir("data/profiles", platform.gpu);
    AnalyticBackend backend(platform.gpu, platform.coeffs);
    const auto& prof = reg.get("mixtral-8x7b-like");
    const auto ds = run_sweep(SweepGrid::default_grid(), "mixtral-8x7b-like", prof,
                              platform.gpu, backend, 12345, 0.02);
    CHECK(ds.noise_outliers.empty());
    for (const auto& r : ds.records) {
        const double clean = throughput(r.point, prof, platform.gpu);
        CHECK(std::abs(r.throughput_tps - clean) / clean < 0.10);
    }
}

TEST_CASE("backend failure mid-sweep leaves a partial dataset flagged incomplete") {
    const auto platform = load_platform();
    const auto reg = ProfileRegistry::load_dir("data/profiles", platform.gpu);
    FailingBackend backend(10, platform.gpu, platform.coeffs);
    const auto ds = run_sweep(SweepGrid::default_grid(), "qwen15-moe-like",
                              reg.get("qwen15-moe-like"), platform.gpu, backend, 7);
    CHECK_FALSE(ds.complete);
    CHECK(ds.records.size() == 10);
    CHECK_FALSE(sidecar_to_json(ds).at("complete").get<bool>());
}

TEST_CASE("dataset round-trips through CSV") {
    const auto platform = load_platform();
    const auto reg = ProfileRegistry::load_dir("data/profiles", platform.gpu);
    AnalyticBackend backend(platform.gpu, platform.coeffs);
    const SweepGrid grid{{200.0, 300.0}, {1, 64}, {2}, {8}, {1, 3}};
    const auto ds = run_sweep(grid, "qwen15-moe-like", reg.get("qwen15-moe-like"),
                              platform.gpu, backend, 5);

    const auto tmp = std::filesystem::temp_directory_path() / "ws_dataset_test.csv";
    write_text_file(tmp, dataset_to_csv(ds));
    const auto back = records_from_csv(tmp);
    REQUIRE(back.size() == ds.records.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].model == ds.records[i].model);
        CHECK(back[i].point == ds.records[i].point);
        CHECK(back[i].throughput_tps ==
              doctest::Approx(ds.records[i].throughput_tps).epsilon(1e-9));
    }
    std::filesystem::remove(tmp);
}

TEST_CASE("holdout split: disjoint, exhaustive, deterministic, stratified") {
    const auto platform = load_platform();
    const auto reg = ProfileRegistry::load_dir("data/profiles", platform.gpu);
    AnalyticBackend backend(platform.gpu, platform.coeffs);
    auto ds = run_sweep(SweepGrid::default_grid(), "qwen15-moe-like",
                        reg.get("qwen15-moe-like"), platform.gpu, backend, 7);

    const auto [train, held] = split_holdout(ds.records, 0.2, 99);
    CHECK(train.size() + held.size() == 972);
    CHECK(held.size() == 194);  // round(0.2 * 972)
    CHECK(train.size() == 778);

    const auto [train2, held2] = split_holdout(ds.records, 0.2, 99);
    CHECK(held2.size() == held.size());
    for (std::size_t i = 0; i < held.size(); ++i) CHECK(held2[i].point == held[i].point);

    // two records split half and half
    std::vector<ProfilingRecord> two{ds.records[0], ds.records[1]};
    const auto [t2, h2] = split_holdout(two, 0.5, 1);
    CHECK(t2.size() == 1);
    CHECK(h2.size() == 1);

    CHECK_THROWS_AS(split_holdout(two, 0.0, 1), config_error);
    CHECK_THROWS_AS(split_holdout(two, 1.0, 1), config_error);
}
