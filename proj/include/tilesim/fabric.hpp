#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <tilesim/arch_config.hpp>
#include <tilesim/errors.hpp>

namespace tilesim {

struct TileCoord {
    std::uint32_t row = 0;
    std::uint32_t col = 0;

    std::string row_col_string() const {
        return std::to_string(row) + "." + std::to_string(col);
    }

    auto operator<=>(const TileCoord&) const = default;
};

// Collective group selector/mask quadruple. Tile (i,j) belongs iff
// (i & m_row) == s_row and (j & m_col) == s_col. Selector bits outside the
// mask can never match, so such specs are rejected at construction.
struct GroupSpec {
    std::uint32_t s_row = 0;
    std::uint32_t s_col = 0;
    std::uint32_t m_row = 0;
    std::uint32_t m_col = 0;

    static GroupSpec make(std::uint32_t s_row, std::uint32_t m_row, std::uint32_t s_col,
                          std::uint32_t m_col);

    bool contains(TileCoord t) const {
        return (t.row & m_row) == s_row && (t.col & m_col) == s_col;
    }

    // Textual form `S_row/M_row:S_col/M_col` (decimal), used in traces.
    std::string to_string() const;
    static GroupSpec parse(const std::string& text);

    auto operator<=>(const GroupSpec&) const = default;
};

// Endpoint of a NoC link: either a tile router or an HBM channel port.
// Port nodes carry their attach router so routing needs no extra context.
struct NodeId {
    enum class Kind : std::uint8_t { Tile, Port };

    Kind kind = Kind::Tile;
    TileCoord coord;             // router position (attach router for ports)
    std::uint32_t channel = 0;   // valid when kind == Port

    static NodeId tile(TileCoord t) { return NodeId{Kind::Tile, t, 0}; }
    static NodeId port(std::uint32_t channel, TileCoord attach) {
        return NodeId{Kind::Port, attach, channel};
    }

    bool is_tile() const { return kind == Kind::Tile; }

    // Dense key for resource maps; ports live above the tile id space.
    std::uint64_t key(std::uint32_t grid_cols) const {
        if (kind == Kind::Tile)
            return static_cast<std::uint64_t>(coord.row) * grid_cols + coord.col;
        return (1ull << 40) + channel;
    }

    std::string to_string() const;

    auto operator<=>(const NodeId&) const = default;
};

// Port node for a configured channel, positioned at its attach router.
NodeId port_node(const ArchConfig& cfg, std::uint32_t channel);

struct Link {
    NodeId from;
    NodeId to;

    auto operator<=>(const Link&) const = default;
};

// Ordered list of directed links; consecutive links share a router and the
// path follows X-then-Y dimension order.
using Route = std::vector<Link>;

// Multicast/reduction tree on the mesh. Edges are stored parent-first from
// the root, so a single forward pass visits every parent before its children.
struct CollectiveTree {
    NodeId root;
    std::vector<Link> edges;
    std::vector<TileCoord> members;
};

// All tiles matching the spec on a rows x cols grid, row-major order.
// Exactly { (i,j) | (i & m_row) == s_row && (j & m_col) == s_col }.
std::vector<TileCoord> resolve_group(const GroupSpec& spec, std::uint32_t rows,
                                     std::uint32_t cols);

// Inverse of resolve_group: the canonical spec (mask restricted to grid
// bits) whose group is exactly `tiles`, or nullopt when no mask/selector
// pair exists and the caller must fall back to unicast sends.
std::optional<GroupSpec> mask_for_set(const std::vector<TileCoord>& tiles,
                                      std::uint32_t rows, std::uint32_t cols);

// Deterministic X-then-Y path. Length equals the Manhattan distance plus one
// edge per channel-port hop.
Route xy_route(NodeId src, NodeId dst);

// Union of XY routes from src to every member, shared prefixes merged; the
// payload traverses each tree edge exactly once.
CollectiveTree build_multicast_tree(NodeId src, const std::vector<TileCoord>& members);
CollectiveTree build_multicast_tree(NodeId src, const GroupSpec& group, std::uint32_t rows,
                                    std::uint32_t cols);

// Edge-reversed multicast tree rooted at dst; partial values combine
// elementwise at every interior node, in deterministic tree post-order.
CollectiveTree build_reduce_tree(const std::vector<TileCoord>& members, NodeId dst);
CollectiveTree build_reduce_tree(const GroupSpec& group, std::uint32_t rows,
                                 std::uint32_t cols, NodeId dst);

}  // namespace tilesim
