#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <tilesim/arch_config.hpp>
#include <tilesim/errors.hpp>
#include <tilesim/fabric.hpp>
#include <tilesim/layout.hpp>

namespace tilesim {

struct GemmShape {
    std::uint64_t m = 0;
    std::uint64_t n = 0;
    std::uint64_t k = 0;

    auto operator<=>(const GemmShape&) const = default;
};

enum class ReductionPolicy : std::uint8_t {
    LowestSliceCommits,  // the k-slice-0 tile of each split-K group commits
    RotateCommits,       // committer rotates across output tiles
};

// How the physical grid is reinterpreted: an output-stationary logical grid
// of logical_rows x logical_cols tiles, each position owned by k_split tiles
// processing disjoint K slices (k_split == 1 is plain 2D).
struct Mapping {
    std::uint32_t logical_rows = 0;
    std::uint32_t logical_cols = 0;
    std::uint32_t k_split = 1;
    ReductionPolicy reduction_policy = ReductionPolicy::LowestSliceCommits;

    auto operator<=>(const Mapping&) const = default;
};

struct Tiling {
    std::uint64_t tm = 0;
    std::uint64_t tn = 0;
    std::uint64_t tk = 0;
    // Derived padded extents; recorded so programs need no recomputation.
    std::uint64_t padded_m = 0;
    std::uint64_t padded_n = 0;
    std::uint64_t k_steps_per_slice = 0;  // padded slice K / tk

    auto operator<=>(const Tiling&) const = default;
};

enum class Dataflow : std::uint8_t {
    Baseline,
    Summa,
    Systolic,
    SystolicOverSumma,  // outer systolic wavefront over inner SUMMA groups
    SummaOverSystolic,  // outer SUMMA broadcasts feeding inner systolic groups
    SplitKSumma,
};

std::string to_string(Dataflow df);
Dataflow dataflow_from_string(const std::string& s);
std::string to_string(ReductionPolicy p);
ReductionPolicy reduction_policy_from_string(const std::string& s);

struct SchedulePlan {
    GemmShape shape;
    Mapping mapping;
    Tiling tiling;
    Dataflow dataflow = Dataflow::Baseline;
    std::uint32_t group_rows = 1;  // hierarchical inner-group dims
    std::uint32_t group_cols = 1;
    std::map<std::string, LayoutDesc> layouts;  // keyed "A", "B", "C"
    bool double_buffered = false;
};

// Bit-slicing bijection between the physical grid and a logical
// (rows x cols x k_split) space: the physical (row, col) bit string is
// reinterpreted as ((lr * cols) + lc) * k_split + ks. Every logical row,
// column, k-group and stride group maps to a mask-expressible physical set.
struct LogicalRemap {
    std::uint32_t phys_rows = 0;
    std::uint32_t phys_cols = 0;
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;
    std::uint32_t k_split = 1;

    struct Logical {
        std::uint32_t lr = 0;
        std::uint32_t lc = 0;
        std::uint32_t ks = 0;
    };

    TileCoord to_physical(std::uint32_t lr, std::uint32_t lc, std::uint32_t ks = 0) const;
    Logical to_logical(TileCoord t) const;
};

// Validated remap; throws IncompatibleDims unless both spaces are powers of
// two with equal products.
LogicalRemap remap_indices(std::uint32_t phys_rows, std::uint32_t phys_cols,
                           std::uint32_t logical_rows, std::uint32_t logical_cols,
                           std::uint32_t k_split = 1);

// tm = ceil(m / logical_rows), tn = ceil(n / logical_cols), tk as given;
// padded extents recorded per the zero-padding rule.
Tiling derive_tiling(const GemmShape& shape, const Mapping& mapping, std::uint64_t tk);

// Per-tile working set in hardware bytes:
// (A slot + B slot) * (2 if double buffered else 1) + C slot.
std::uint64_t spm_budget(const SchedulePlan& plan, const ArchConfig& arch);

// Structural validation of everything checkable without generating the
// program. Throws InvalidPlan or IncompatibleDims.
void validate_plan(const SchedulePlan& plan, const ArchConfig& arch);

// Parse a schedule description document (`key = value` lines; see README for
// the key set) into a plan validated against the architecture.
SchedulePlan parse_schedule(const std::string& text, const ArchConfig& arch);
SchedulePlan parse_schedule_file(const std::string& path, const ArchConfig& arch);

}  // namespace tilesim
