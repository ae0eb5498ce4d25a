#include <doctest.h>

#include <cmath>

#include <tilesim/analysis.hpp>
#include <tilesim/engine.hpp>

#include "support.hpp"

using namespace tilesim;
using tilesim::test::make_arch;
using tilesim::test::make_plan;
using tilesim::test::make_preload;

namespace {

SimReport run_report(const SchedulePlan& plan, const ArchConfig& arch, const Preload& preload) {
    return execute(gen_program(plan, arch), arch, preload).report;
}

}  // namespace

TEST_CASE("operational intensity is flops over HBM traffic") {
    SimReport r;
    r.flops_executed = 1000;
    r.hbm_bytes_read = 40;
    r.hbm_bytes_written = 10;
    CHECK(operational_intensity(r) == doctest::Approx(20.0));

    r.hbm_bytes_read = 0;
    r.hbm_bytes_written = 0;
    CHECK_THROWS_AS(operational_intensity(r), ZeroTraffic);
}

TEST_CASE("the dense GEMM upper bound on operational intensity") {
    // flops = 2MNK against minimal traffic (MK + KN + MN) * elem_bytes.
    const std::uint64_t m = 64, n = 48, k = 80, eb = 4;
    SimReport r;
    r.flops_executed = 2 * m * n * k;
    r.hbm_bytes_read = (m * k + k * n) * eb;
    r.hbm_bytes_written = m * n * eb;
    const double want = 2.0 * m * n * k / ((m * k + k * n + m * n) * eb);
    CHECK(operational_intensity(r) == doctest::Approx(want));
}

TEST_CASE("achieved_flops formula and limits") {
    const ArchConfig arch = make_arch(4, 4);
    SimReport r;
    r.flops_executed = 2048;
    r.total_cycles = 0;
    CHECK(achieved_flops(r, arch) == 0.0);

    // Every engine busy every cycle with full tiles reaches peak exactly:
    // flops per cycle = tiles * Em * En * 2.
    r.total_cycles = 100;
    r.flops_executed = 100ull * 16 * 64 * 16 * 2;
    CHECK(achieved_flops(r, arch) == doctest::Approx(peak_flops(arch)));
}

TEST_CASE("model engine efficiency on a 64x16 array") {
    CHECK(model_engine_efficiency(64, 528, 64, 64, 16) == doctest::Approx(1.0));
    CHECK(model_engine_efficiency(128, 66, 64, 64, 16) == doctest::Approx(0.825));
    CHECK(model_engine_efficiency(16, 528, 64, 64, 16) == doctest::Approx(0.25));
    CHECK(model_engine_efficiency(64, 528, 64, 64, 16) >
          model_engine_efficiency(128, 66, 64, 64, 16));
}

TEST_CASE("utilization identities") {
    const ArchConfig arch = make_arch(4, 4);
    const GemmShape shape{256, 256, 256};
    const SimReport r =
        run_report(make_plan(shape, 4, 4, 64, Dataflow::Summa, 1, true), arch,
                   make_preload(shape, 12));
    const UtilizationReport u = make_utilization(r, arch, 64, 64, 64);

    CHECK(u.compute_utilization > 0.0);
    CHECK(u.compute_utilization <= 1.0);
    CHECK(u.hbm_bw_utilization > 0.0);
    CHECK(u.hbm_bw_utilization <= 1.0);
    CHECK(u.engine_tile_utilization > 0.0);
    CHECK(u.engine_tile_utilization <= 1.0);

    // compute_utilization * peak == achieved, to 1e-12 relative.
    const double achieved = achieved_flops(r, arch);
    CHECK(std::abs(u.compute_utilization * peak_flops(arch) - achieved) <= 1e-12 * achieved);
}

TEST_CASE("baseline has lower operational intensity than summa") {
    const ArchConfig arch = make_arch(4, 4);
    const GemmShape shape{256, 256, 256};
    const Preload preload = make_preload(shape, 3);
    const SimReport base = run_report(make_plan(shape, 4, 4, 64, Dataflow::Baseline), arch, preload);
    const SimReport summa = run_report(make_plan(shape, 4, 4, 64, Dataflow::Summa), arch, preload);
    CHECK(operational_intensity(base) < operational_intensity(summa));
}

TEST_CASE("doubling elem_bytes halves operational intensity") {
    ArchConfig arch = make_arch(4, 4);
    const GemmShape shape{128, 128, 128};
    const Preload preload = make_preload(shape, 5);
    const auto plan = make_plan(shape, 4, 4, 32, Dataflow::Summa);
    const double oi4 = operational_intensity(run_report(plan, arch, preload));
    arch.elem_bytes = 8;
    const double oi8 = operational_intensity(run_report(plan, arch, preload));
    CHECK(oi4 == doctest::Approx(2.0 * oi8));
}

TEST_CASE("roofline points stay under the roofline") {
    const ArchConfig arch = make_arch(4, 4);
    const GemmShape shape{256, 256, 256};
    const Preload preload = make_preload(shape, 7);
    for (const Dataflow df : {Dataflow::Baseline, Dataflow::Summa, Dataflow::Systolic}) {
        const SimReport r = run_report(make_plan(shape, 4, 4, 64, df, 1, true), arch, preload);
        const RooflinePoint p = make_roofline_point(to_string(df), r, arch);
        CHECK(under_roofline(p, arch));
    }
}

TEST_CASE("emit_report marks the best row and recomputable ratios") {
    const ArchConfig arch = make_arch(4, 4);
    SimReport fast;
    fast.total_cycles = 100;
    fast.flops_executed = 10000;
    fast.hbm_bytes_read = 500;
    fast.hbm_bytes_written = 100;
    fast.engine_busy_by_tile.assign(16, 50);
    SimReport slow = fast;
    slow.total_cycles = 900;

    SUBCASE("single entry is its own best") {
        const std::string table = emit_report({{"only", fast}}, arch);
        const std::size_t row = table.find("only,100,");
        REQUIRE(row != std::string::npos);
        const std::string line = table.substr(row, table.find('\n', row) - row);
        CHECK(line.find(",1,") != std::string::npos);  // best marker set
    }
    SUBCASE("two entries ordered by the caller, best marked") {
        const std::string table = emit_report({{"slow", slow}, {"fast", fast}}, arch);
        const std::size_t fast_row = table.find("fast,");
        const std::size_t slow_row = table.find("slow,");
        REQUIRE(fast_row != std::string::npos);
        REQUIRE(slow_row != std::string::npos);
        // The fast row carries the best marker.
        const std::string fast_line = table.substr(fast_row, table.find('\n', fast_row) - fast_row);
        CHECK(fast_line.find(",1") != std::string::npos);

        // OI column reproduces flops / traffic.
        const double oi = 10000.0 / 600.0;
        std::ostringstream want;
        want << std::setprecision(6) << oi;
        CHECK(fast_line.find(want.str()) != std::string::npos);
    }
}

TEST_CASE("emit_roofline lists one point per run with ceiling comments") {
    const ArchConfig arch = make_arch(4, 4);
    SimReport r;
    r.total_cycles = 10;
    r.flops_executed = 1000;
    r.hbm_bytes_read = 100;
    r.engine_busy_by_tile.assign(16, 1);
    const std::string text = emit_roofline({{"p0", r}, {"p1", r}}, arch);
    CHECK(text.find("# peak_flops=") != std::string::npos);
    CHECK(text.find("# peak_hbm_bw=") != std::string::npos);
    CHECK(text.find("p0,10,") != std::string::npos);
    CHECK(text.find("p1,10,") != std::string::npos);
}
