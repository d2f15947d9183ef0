#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "wattserve/json_io.hpp"
#include "wattserve/pareto.hpp"
#include "wattserve/rng.hpp"

using namespace wattserve;

namespace {

Platform load_platform() {
    return platform_from_json(parse_json_file("data/profiles/platform.json"));
}

FrontierPoint fp(double t, double e, double cap = 300.0, int batch = 8) {
    return FrontierPoint{OperatingPoint{cap, batch, 2, 1, 1}, t, e};
}

const std::vector<double> kCaps{150, 200, 250, 300, 350, 400};
const std::vector<int> kBatches{1, 4, 8, 16, 32, 64};
const std::vector<int> kTps{1, 2, 4};

}  // namespace

TEST_CASE("single point is its own frontier") {
    const auto f = build_frontier({fp(100.0, 0.5)});
    REQUIRE(f.size() == 1);
    CHECK(f[0].throughput_tps == 100.0);
}

TEST_CASE("a dominated point is dropped") {
    const auto f = build_frontier({fp(100.0, 0.5), fp(90.0, 0.4)});
    REQUIRE(f.size() == 1);
    CHECK(f[0].throughput_tps == 100.0);
}

TEST_CASE("exact ties keep the lower-cap point") {
    const auto f = build_frontier({fp(100.0, 0.5, 350.0), fp(100.0, 0.5, 250.0)});
    REQUIRE(f.size() == 1);
    CHECK(f[0].point.cap_watts == 250.0);
}

TEST_CASE("frontier is minimal, complete, and efficiency-sorted") {
    Rng rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<FrontierPoint> pts;
        const int n = 2 + static_cast<int>(rng.next_u64() % 40);
        for (int i = 0; i < n; ++i)
            pts.push_back(fp(rng.uniform(10.0, 1000.0), rng.uniform(0.1, 2.0),
                             150.0 + 50.0 * (i % 6)));
        const auto f = build_frontier(pts);

        // minimal: no frontier point dominates another
        for (std::size_t i = 0; i < f.size(); ++i)
            for (std::size_t j = 0; j < f.size(); ++j)
                if (i != j) CHECK_FALSE(strictly_dominates(f[i], f[j]));

        // complete: every input is weakly dominated by some frontier point
        for (const auto& p : pts) {
            bool covered = false;
            for (const auto& q : f) covered |= weakly_dominates(q, p);
            CHECK(covered);
        }

        // sorted by throughput with strictly decreasing efficiency
        for (std::size_t i = 1; i < f.size(); ++i) {
            CHECK(f[i].throughput_tps > f[i - 1].throughput_tps);
            CHECK(f[i].efficiency_tpj < f[i - 1].efficiency_tpj);
        }
    }
}

TEST_CASE("a frontier weakly dominates itself") {
    const auto f = build_frontier({fp(100.0, 0.5), fp(200.0, 0.4), fp(300.0, 0.2)});
    const auto rep = verify_dominance(f, f);
    CHECK(rep.dominated);
    CHECK(rep.witnesses.empty());
}

TEST_CASE("dominance verdicts report witnesses") {
    const auto a = build_frontier({fp(100.0, 0.5)});
    const auto b = build_frontier({fp(120.0, 0.3)});
    const auto rep = verify_dominance(a, b);
    CHECK_FALSE(rep.dominated);
    REQUIRE(rep.witnesses.size() == 1);
    CHECK(rep.witnesses[0].throughput_tps == 120.0);
}

TEST_CASE("joint regime covers both single-knob regimes on every profile") {
    const auto platform = load_platform();
    const auto reg = ProfileRegistry::load_dir("data/profiles", platform.gpu);
    for (const auto& name : reg.names()) {
        const auto& prof = reg.get(name);
        const auto joint = evaluate_regime(regime_by_name("joint"), prof, platform.gpu,
                                           platform.coeffs, kCaps, kBatches, kTps);
        const auto hw = evaluate_regime(regime_by_name("hw-only"), prof, platform.gpu,
                                        platform.coeffs, kCaps, kBatches, kTps);
        const auto sw = evaluate_regime(regime_by_name("sw-only"), prof, platform.gpu,
                                        platform.coeffs, kCaps, kBatches, kTps);
        CHECK(verify_dominance(joint, hw).dominated);
        CHECK(verify_dominance(joint, sw).dominated);
    }
}

TEST_CASE("hw-only and sw-only frontiers do not cover each other") {
    const auto platform = load_platform();
    const auto reg = ProfileRegistry::load_dir("data/profiles", platform.gpu);
    for (const std::string name : {"mixtral-8x7b-like", "qwen15-moe-like", "olmoe-like"}) {
        const auto& prof = reg.get(name);
        const auto hw = evaluate_regime(regime_by_name("hw-only"), prof, platform.gpu,
                                        platform.coeffs, kCaps, kBatches, kTps);
        const auto sw = evaluate_regime(regime_by_name("sw-only"), prof, platform.gpu,
                                        platform.coeffs, kCaps, kBatches, kTps);
        CHECK_FALSE(verify_dominance(hw, sw).dominated);
        CHECK_FALSE(verify_dominance(sw, hw).dominated);
    }
}

TEST_CASE("unknown regime names list the valid presets") {
    CHECK_THROWS_WITH_AS(regime_by_name("hw+sw"), doctest::Contains("sw-only"), config_error);
}
