#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <tilesim/arch_config.hpp>
#include <tilesim/layout.hpp>
#include <tilesim/matrix.hpp>
#include <tilesim/program.hpp>

namespace tilesim {

// Cycle-level outcome of one simulation. Serialization is canonical text,
// so byte-identical reports mean identical runs.
struct SimReport {
    std::uint64_t total_cycles = 0;
    std::uint64_t flops_executed = 0;
    std::uint64_t hbm_bytes_read = 0;
    std::uint64_t hbm_bytes_written = 0;
    std::vector<std::uint64_t> hbm_read_by_channel;
    std::vector<std::uint64_t> hbm_written_by_channel;
    std::map<std::string, std::uint64_t> hbm_read_by_matrix;
    std::vector<std::uint64_t> engine_busy_by_tile;
    std::vector<std::uint64_t> superstep_end_cycles;
    // Directed link -> payload bytes moved, keyed by "from>to" node names.
    std::map<std::string, std::uint64_t> noc_bytes_by_link;
    std::uint64_t digest = 0;
    std::string ordering_tag = "ready-tile-op";

    std::string serialize() const;
};

struct TraceRecord {
    std::uint64_t cycle_start = 0;
    std::uint64_t cycle_end = 0;
    TileCoord tile;
    std::uint32_t superstep = 0;
    const char* op_kind = "";
    std::uint64_t bytes = 0;
    std::string resources;  // ';'-separated resource names
    std::uint64_t seq = 0;
};

std::string trace_to_csv(const std::vector<TraceRecord>& trace);

struct ExecOptions {
    bool collect_trace = false;
};

struct ExecResult {
    Matrix c;
    SimReport report;
    std::vector<TraceRecord> trace;
};

// Deterministic event-driven execution of a compiled program: functional
// GEMM semantics in doubles plus cycle timing with FIFO resource contention.
// Requests are granted in (ready cycle, tile id, op index) issue order.
ExecResult execute(const BspProgram& program, const ArchConfig& arch, const Preload& preload,
                   const ExecOptions& options = {});

// Triple-nested-loop oracle, k innermost ascending.
Matrix reference_gemm(const Matrix& a, const Matrix& b);

struct VerifyResult {
    bool pass = false;
    double max_abs_err = 0.0;
};

// Elementwise |c - oracle| <= atol + rtol * |oracle|. Exact for
// integer-valued inputs within double range regardless of summation order.
VerifyResult verify(const Matrix& c, const Matrix& a, const Matrix& b, double rtol = 1e-9,
                    double atol = 1e-12);

}  // namespace tilesim
