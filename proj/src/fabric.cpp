#include <tilesim/fabric.hpp>

#include <algorithm>
#include <bit>
#include <map>
#include <sstream>

namespace tilesim {

GroupSpec GroupSpec::make(std::uint32_t s_row, std::uint32_t m_row, std::uint32_t s_col,
                          std::uint32_t m_col) {
    if ((s_row & ~m_row) != 0 || (s_col & ~m_col) != 0) {
        throw SelectorOutsideMask("selector bits outside mask in " + GroupSpec{s_row, s_col, m_row, m_col}.to_string());
    }
    return GroupSpec{s_row, s_col, m_row, m_col};
}

std::string GroupSpec::to_string() const {
    std::ostringstream out;
    out << s_row << "/" << m_row << ":" << s_col << "/" << m_col;
    return out.str();
}

GroupSpec GroupSpec::parse(const std::string& text) {
    std::uint32_t sr, mr, sc, mc;
    char a, b, c;
    std::istringstream in(text);
    if (!(in >> sr >> a >> mr >> b >> sc >> c >> mc) || a != '/' || b != ':' || c != '/') {
        throw ParseError("bad group spec: " + text);
    }
    return make(sr, mr, sc, mc);
}

std::string NodeId::to_string() const {
    std::ostringstream out;
    if (kind == Kind::Tile) {
        out << coord.row << "." << coord.col;
    } else {
        out << "p" << channel;
    }
    return out.str();
}

NodeId port_node(const ArchConfig& cfg, std::uint32_t channel) {
    const auto [row, col] = cfg.channel_attach(channel);
    return NodeId::port(channel, TileCoord{row, col});
}

std::vector<TileCoord> resolve_group(const GroupSpec& spec, std::uint32_t rows,
                                     std::uint32_t cols) {
    // Enumerate the free (zero) mask bits of each dimension rather than
    // scanning the whole grid; selectors outside the grid yield empty sets.
    std::vector<TileCoord> out;
    std::vector<std::uint32_t> row_vals, col_vals;
    for (std::uint32_t i = 0; i < rows; ++i)
        if ((i & spec.m_row) == spec.s_row) row_vals.push_back(i);
    for (std::uint32_t j = 0; j < cols; ++j)
        if ((j & spec.m_col) == spec.s_col) col_vals.push_back(j);
    out.reserve(row_vals.size() * col_vals.size());
    for (std::uint32_t i : row_vals)
        for (std::uint32_t j : col_vals) out.push_back(TileCoord{i, j});
    return out;
}

namespace {

// 1D expressibility: a set is matchable by (selector, mask) iff its size is
// a power of two and equals 2^popcount(union of differing bits). The mask is
// then forced within the grid bit width.
std::optional<std::pair<std::uint32_t, std::uint32_t>> mask_for_values(
    const std::vector<std::uint32_t>& values, std::uint32_t extent) {
    if (values.empty()) return std::nullopt;
    std::uint32_t diff = 0;
    for (std::uint32_t v : values) diff |= v ^ values.front();
    const std::uint32_t free_bits = static_cast<std::uint32_t>(std::popcount(diff));
    if (values.size() != (1ull << free_bits)) return std::nullopt;
    const std::uint32_t grid_mask = extent - 1;  // extent is a power of two
    const std::uint32_t mask = grid_mask & ~diff;
    const std::uint32_t sel = values.front() & mask;
    return std::make_pair(sel, mask);
}

}  // namespace

std::optional<GroupSpec> mask_for_set(const std::vector<TileCoord>& tiles,
                                      std::uint32_t rows, std::uint32_t cols) {
    if (tiles.empty()) return std::nullopt;

    std::vector<std::uint32_t> row_vals, col_vals;
    for (const TileCoord& t : tiles) {
        row_vals.push_back(t.row);
        col_vals.push_back(t.col);
    }
    std::sort(row_vals.begin(), row_vals.end());
    row_vals.erase(std::unique(row_vals.begin(), row_vals.end()), row_vals.end());
    std::sort(col_vals.begin(), col_vals.end());
    col_vals.erase(std::unique(col_vals.begin(), col_vals.end()), col_vals.end());

    // The set must be the full Cartesian product of its projections.
    if (tiles.size() != row_vals.size() * col_vals.size()) return std::nullopt;

    const auto row_spec = mask_for_values(row_vals, rows);
    const auto col_spec = mask_for_values(col_vals, cols);
    if (!row_spec || !col_spec) return std::nullopt;

    const GroupSpec spec{row_spec->first, col_spec->first, row_spec->second, col_spec->second};
    // Product + per-dimension match guarantee correctness, but membership of
    // every input tile still needs the set to be duplicate-free.
    std::vector<TileCoord> sorted = tiles;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) return std::nullopt;
    return spec;
}

Route xy_route(NodeId src, NodeId dst) {
    Route route;
    if (src == dst) return route;

    NodeId cur = src;
    if (src.kind == NodeId::Kind::Port) {
        const NodeId router = NodeId::tile(src.coord);
        route.push_back(Link{cur, router});
        cur = router;
    }
    const TileCoord goal = dst.coord;

    // X (column) first, then Y (row).
    while (cur.coord.col != goal.col) {
        TileCoord next = cur.coord;
        next.col += (goal.col > cur.coord.col) ? 1 : -1;
        route.push_back(Link{cur, NodeId::tile(next)});
        cur = NodeId::tile(next);
    }
    while (cur.coord.row != goal.row) {
        TileCoord next = cur.coord;
        next.row += (goal.row > cur.coord.row) ? 1 : -1;
        route.push_back(Link{cur, NodeId::tile(next)});
        cur = NodeId::tile(next);
    }
    if (dst.kind == NodeId::Kind::Port) {
        route.push_back(Link{cur, dst});
    }
    return route;
}

CollectiveTree build_multicast_tree(NodeId src, const std::vector<TileCoord>& members) {
    CollectiveTree tree;
    tree.root = src;
    tree.members = members;
    std::sort(tree.members.begin(), tree.members.end());

    // XY routes from one source are prefix-consistent, so unioning them in
    // member order yields a tree with parents inserted before children.
    std::map<NodeId, bool> reached;
    reached[src] = true;
    for (const TileCoord& m : tree.members) {
        for (const Link& link : xy_route(src, NodeId::tile(m))) {
            if (reached.contains(link.to)) continue;
            reached[link.to] = true;
            tree.edges.push_back(link);
        }
    }
    return tree;
}

CollectiveTree build_multicast_tree(NodeId src, const GroupSpec& group, std::uint32_t rows,
                                    std::uint32_t cols) {
    return build_multicast_tree(src, resolve_group(group, rows, cols));
}

CollectiveTree build_reduce_tree(const std::vector<TileCoord>& members, NodeId dst) {
    CollectiveTree tree = build_multicast_tree(dst, members);
    for (Link& link : tree.edges) std::swap(link.from, link.to);
    return tree;
}

CollectiveTree build_reduce_tree(const GroupSpec& group, std::uint32_t rows,
                                 std::uint32_t cols, NodeId dst) {
    return build_reduce_tree(resolve_group(group, rows, cols), dst);
}

}  // namespace tilesim
