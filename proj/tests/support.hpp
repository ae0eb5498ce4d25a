#pragma once

// Shared helpers for the test binaries: programmatic arch/plan builders and
// a scratch-directory guard.

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <unistd.h>

#include <tilesim/arch_config.hpp>
#include <tilesim/layout.hpp>
#include <tilesim/matrix.hpp>
#include <tilesim/schedule.hpp>

namespace tilesim::test {

inline ArchConfig make_arch(std::uint32_t rows = 4, std::uint32_t cols = 4) {
    ArchConfig cfg;
    cfg.grid_rows = rows;
    cfg.grid_cols = cols;
    cfg.engine_rows = 64;
    cfg.engine_cols = 16;
    cfg.clock_ghz = 1.0;
    cfg.spm_bytes = 384 * 1024;
    cfg.spm_bw_bytes_per_cycle = 512;
    cfg.noc_link_bytes_per_cycle = 64;
    cfg.hop_latency_cycles = 1;
    cfg.hbm_channels_west = rows;
    cfg.hbm_channels_south = cols;
    cfg.hbm_channel_bytes_per_cycle = 32;
    cfg.elem_bytes = 4;
    cfg.mmad_startup_cycles = 0;
    return cfg;
}

inline LayoutDesc make_layout(std::uint64_t rows, std::uint64_t cols, SplitScheme split,
                              std::uint32_t tile_rows, std::uint32_t tile_cols,
                              std::uint32_t channels, std::uint32_t start = 0) {
    LayoutDesc d;
    d.matrix_rows = rows;
    d.matrix_cols = cols;
    d.split = split;
    d.tile_rows = tile_rows;
    d.tile_cols = tile_cols;
    d.channel_count = channels;
    d.channel_start = start;
    return d;
}

inline SchedulePlan make_plan(const GemmShape& shape, std::uint32_t logical_rows,
                              std::uint32_t logical_cols, std::uint64_t tk, Dataflow dataflow,
                              std::uint32_t k_split = 1, bool double_buffered = false,
                              std::uint32_t group_rows = 1, std::uint32_t group_cols = 1,
                              std::uint32_t layout_channels = 1,
                              SplitScheme layout_split = {1, 1}) {
    SchedulePlan plan;
    plan.shape = shape;
    plan.mapping.logical_rows = logical_rows;
    plan.mapping.logical_cols = logical_cols;
    plan.mapping.k_split = k_split;
    plan.tiling = derive_tiling(shape, plan.mapping, tk);
    plan.dataflow = dataflow;
    plan.double_buffered = double_buffered;
    plan.group_rows = group_rows;
    plan.group_cols = group_cols;
    plan.layouts["A"] =
        make_layout(shape.m, shape.k, layout_split, static_cast<std::uint32_t>(plan.tiling.tm),
                    static_cast<std::uint32_t>(plan.tiling.tk), layout_channels);
    plan.layouts["B"] =
        make_layout(shape.k, shape.n, layout_split, static_cast<std::uint32_t>(plan.tiling.tk),
                    static_cast<std::uint32_t>(plan.tiling.tn), layout_channels);
    plan.layouts["C"] =
        make_layout(shape.m, shape.n, layout_split, static_cast<std::uint32_t>(plan.tiling.tm),
                    static_cast<std::uint32_t>(plan.tiling.tn), layout_channels);
    return plan;
}

inline Preload make_preload(const GemmShape& shape, std::uint64_t seed, bool ints = true) {
    Preload p;
    p.matrices["A"] = random_matrix(shape.m, shape.k, seed, ints);
    p.matrices["B"] = random_matrix(shape.k, shape.n, seed + 1, ints);
    return p;
}

// Unique scratch directory removed on destruction.
class ScratchDir {
public:
    explicit ScratchDir(const std::string& stem) {
        static std::atomic<unsigned> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                (stem + "-" + std::to_string(::getpid()) + "-" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace tilesim::test
