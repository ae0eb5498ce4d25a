#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <tilesim/fabric.hpp>
#include <tilesim/schedule.hpp>

namespace tilesim {

enum class OpKind : std::uint8_t {
    HbmLoad,           // channel -> SPM slot, one tile-aligned rectangle
    HbmStore,          // SPM slot -> channel, clipped to the unpadded matrix
    MulticastSend,     // slot contents to every group member's slot
    CollectiveReduce,  // elementwise sum of members' slots into dst tile's slot
    NeighborSend,      // slot to a mesh-adjacent tile's slot
    Receive,           // completion point of a matching send on this tile
    Mmad,              // C slot += A slot * B slot on the tile engine
    AddReduce,         // dst slot += src slot elementwise on the tile engine
};

const char* to_string(OpKind kind);

enum class MatrixOperand : std::uint8_t { A, B, C };

const char* to_string(MatrixOperand m);

using SlotId = std::uint16_t;

// One operation in a tile's superstep list. A single struct covers all
// kinds; unused fields stay zero.
struct TileOp {
    OpKind kind = OpKind::Mmad;

    SlotId src_slot = 0;
    SlotId dst_slot = 0;
    SlotId aux_slot = 0;  // Mmad second operand (B)

    // HbmLoad / HbmStore: unclipped tile origin in matrix coordinates; the
    // transferred rectangle is the slot extent clipped to the matrix.
    MatrixOperand matrix = MatrixOperand::A;
    std::uint64_t base_row = 0;
    std::uint64_t base_col = 0;

    // Communication: superstep-unique tag pairing sends with receives.
    std::uint32_t tag = 0;
    GroupSpec group;        // MulticastSend, CollectiveReduce
    TileCoord peer;         // NeighborSend/UnicastSend destination, reduce destination
    std::uint64_t bytes = 0;  // timing payload (clipped elements * elem_bytes)

    // Mmad: operand extents for the latency formula.
    std::uint32_t mm_rows = 0;   // TM
    std::uint32_t mm_cols = 0;   // TN
    std::uint32_t mm_depth = 0;  // TK
    std::uint64_t flops = 0;     // 2 * unpadded volume of this op
};

struct SlotSpec {
    std::string name;
    std::uint32_t rows = 0;
    std::uint32_t cols = 0;

    std::uint64_t elems() const { return static_cast<std::uint64_t>(rows) * cols; }
};

// One superstep: per-tile operation lists (indexed row * grid_cols + col)
// with an implicit global barrier at the end.
struct Superstep {
    std::vector<std::vector<TileOp>> tile_ops;
};

// Compiled schedule: a sequence of supersteps over a fixed slot table.
// Self-contained for execution (layouts and shape travel with it).
struct BspProgram {
    GemmShape shape;
    Tiling tiling;
    Mapping mapping;
    Dataflow dataflow = Dataflow::Baseline;
    bool double_buffered = false;
    std::uint32_t grid_rows = 0;
    std::uint32_t grid_cols = 0;
    std::vector<SlotSpec> slots;
    std::map<std::string, LayoutDesc> layouts;
    std::vector<Superstep> steps;

    std::uint64_t slot_bytes_per_tile(std::uint32_t elem_bytes) const;
    std::uint32_t tile_index(TileCoord t) const { return t.row * grid_cols + t.col; }
};

// Compile a validated plan into a superstep program. Throws SpmOverflow when
// the working set exceeds the scratchpad, InvalidPlan for structural errors.
BspProgram gen_program(const SchedulePlan& plan, const ArchConfig& arch);

// Static well-formedness checks: every Receive tag matched by exactly one
// send in its superstep, slots written before read within each superstep,
// every unpadded output element stored exactly once. Throws InvalidPlan.
void validate_program(const BspProgram& program);

}  // namespace tilesim
