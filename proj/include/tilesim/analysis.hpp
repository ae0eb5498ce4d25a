#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <tilesim/arch_config.hpp>
#include <tilesim/engine.hpp>

namespace tilesim {

struct RooflinePoint {
    std::string label;
    double operational_intensity = 0.0;  // flop / byte
    double achieved_flops = 0.0;         // FLOP / s
};

struct UtilizationReport {
    double compute_utilization = 0.0;       // achieved / peak FLOPs
    double hbm_bw_utilization = 0.0;        // achieved / peak bytes per second
    double engine_tile_utilization = 0.0;   // mean per-tile busy / total cycles
    double model_engine_efficiency = 0.0;   // useful MACs per array step
};

// flops_executed / (hbm read + written). Throws ZeroTraffic.
double operational_intensity(const SimReport& report);

// flops_executed * clock / total_cycles.
double achieved_flops(const SimReport& report, const ArchConfig& arch);

// Fraction of the Em x En array doing useful work on a TM x TN x TK tile:
// (TM*TN*TK) / (ceil(TM/Em) * ceil(TN/En) * TK * Em * En).
double model_engine_efficiency(std::uint64_t tm, std::uint64_t tn, std::uint64_t tk,
                               std::uint32_t engine_rows, std::uint32_t engine_cols);

UtilizationReport make_utilization(const SimReport& report, const ArchConfig& arch,
                                   std::uint64_t tm, std::uint64_t tn, std::uint64_t tk);

RooflinePoint make_roofline_point(const std::string& label, const SimReport& report,
                                  const ArchConfig& arch);

// Points must lie on or under min(peak, OI * peak_bw), within relative slack.
bool under_roofline(const RooflinePoint& point, const ArchConfig& arch, double slack = 1e-9);

// Comma-separated comparison table, one row per run, best-by-cycles marked.
std::string emit_report(const std::vector<std::pair<std::string, SimReport>>& reports,
                        const ArchConfig& arch);

// (label, OI, achieved) records for external plotting, with ceiling comments.
std::string emit_roofline(const std::vector<std::pair<std::string, SimReport>>& reports,
                          const ArchConfig& arch);

}  // namespace tilesim
