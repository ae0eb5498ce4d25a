#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include <tilesim/fabric.hpp>

#include "support.hpp"

using namespace tilesim;

namespace {

// Brute-force oracle: evaluate the membership predicate over every tile.
std::vector<TileCoord> enumerate_group(const GroupSpec& spec, std::uint32_t rows,
                                       std::uint32_t cols) {
    std::vector<TileCoord> out;
    for (std::uint32_t i = 0; i < rows; ++i)
        for (std::uint32_t j = 0; j < cols; ++j)
            if ((i & spec.m_row) == spec.s_row && (j & spec.m_col) == spec.s_col)
                out.push_back(TileCoord{i, j});
    return out;
}

// Exhaustive search over all mask/selector pairs on a small grid.
bool any_spec_matches(const std::vector<TileCoord>& want, std::uint32_t rows,
                      std::uint32_t cols) {
    for (std::uint32_t mr = 0; mr < rows; ++mr)
        for (std::uint32_t sr = 0; sr < rows; ++sr)
            for (std::uint32_t mc = 0; mc < cols; ++mc)
                for (std::uint32_t sc = 0; sc < cols; ++sc) {
                    if ((sr & ~mr) != 0 || (sc & ~mc) != 0) continue;
                    const GroupSpec spec{sr, sc, mr, mc};
                    if (enumerate_group(spec, rows, cols) == want) return true;
                }
    return false;
}

}  // namespace

TEST_CASE("resolve_group matches the coordinate predicate") {
    SUBCASE("one full row") {
        const auto got = resolve_group(GroupSpec::make(2, 3, 0, 0), 4, 4);
        const std::vector<TileCoord> want = {{2, 0}, {2, 1}, {2, 2}, {2, 3}};
        CHECK(got == want);
    }
    SUBCASE("zero masks match every tile") {
        CHECK(resolve_group(GroupSpec::make(0, 0, 0, 0), 8, 8).size() == 64);
    }
    SUBCASE("strided columns") {
        const auto got = resolve_group(GroupSpec::make(0, 0, 0, 1), 4, 4);
        REQUIRE(got.size() == 8);
        for (const TileCoord& t : got) CHECK((t.col == 0 || t.col == 2));
    }
}

TEST_CASE("resolve_group equals exhaustive enumeration on random specs") {
    std::mt19937_64 rng(2024);
    for (const std::uint32_t dim : {4u, 8u, 32u}) {
        for (int trial = 0; trial < 200; ++trial) {
            const std::uint32_t m_row = static_cast<std::uint32_t>(rng() % (2 * dim));
            const std::uint32_t m_col = static_cast<std::uint32_t>(rng() % (2 * dim));
            const std::uint32_t s_row = static_cast<std::uint32_t>(rng()) & m_row;
            const std::uint32_t s_col = static_cast<std::uint32_t>(rng()) & m_col;
            const GroupSpec spec = GroupSpec::make(s_row, m_row, s_col, m_col);
            CHECK(resolve_group(spec, dim, dim) == enumerate_group(spec, dim, dim));
        }
    }
}

TEST_CASE("selector bits outside the mask are rejected") {
    CHECK_THROWS_AS(GroupSpec::make(2, 1, 0, 0), SelectorOutsideMask);
    CHECK_THROWS_AS(GroupSpec::make(0, 0, 5, 4), SelectorOutsideMask);
}

TEST_CASE("group spec text form round-trips") {
    const GroupSpec spec = GroupSpec::make(2, 3, 1, 5);
    CHECK(spec.to_string() == "2/3:1/5");
    CHECK(GroupSpec::parse("2/3:1/5") == spec);
    CHECK_THROWS_AS(GroupSpec::parse("1-2-3"), ParseError);
}

TEST_CASE("mask_for_set inverts resolve_group") {
    SUBCASE("row group") {
        const std::vector<TileCoord> row = {{2, 0}, {2, 1}, {2, 2}, {2, 3}};
        const auto spec = mask_for_set(row, 4, 4);
        REQUIRE(spec.has_value());
        CHECK(spec->s_row == 2);
        CHECK(spec->m_row == 3);
        CHECK(spec->s_col == 0);
        CHECK(spec->m_col == 0);
    }
    SUBCASE("full grid is the all-zero spec") {
        const auto spec = mask_for_set(resolve_group(GroupSpec{0, 0, 0, 0}, 4, 4), 4, 4);
        REQUIRE(spec.has_value());
        CHECK(*spec == GroupSpec{0, 0, 0, 0});
    }
    SUBCASE("diagonal pair is not expressible") {
        const std::vector<TileCoord> diag = {{0, 0}, {1, 1}};
        CHECK_FALSE(mask_for_set(diag, 4, 4).has_value());
        CHECK_FALSE(any_spec_matches(diag, 4, 4));  // confirmed exhaustively
    }
    SUBCASE("round trip on canonical specs") {
        std::mt19937_64 rng(7);
        for (int trial = 0; trial < 300; ++trial) {
            const std::uint32_t dim = 8;
            const std::uint32_t m_row = static_cast<std::uint32_t>(rng() % dim);
            const std::uint32_t m_col = static_cast<std::uint32_t>(rng() % dim);
            const std::uint32_t s_row = static_cast<std::uint32_t>(rng()) & m_row;
            const std::uint32_t s_col = static_cast<std::uint32_t>(rng()) & m_col;
            const GroupSpec spec{s_row, s_col, m_row, m_col};
            const auto back = mask_for_set(resolve_group(spec, dim, dim), dim, dim);
            REQUIRE(back.has_value());
            CHECK(*back == spec);
        }
    }
}

TEST_CASE("xy routes are X-then-Y with Manhattan length") {
    const NodeId a = NodeId::tile({0, 0});
    const NodeId b = NodeId::tile({0, 3});
    CHECK(xy_route(a, b).size() == 3);

    const Route r = xy_route(NodeId::tile({1, 1}), NodeId::tile({3, 2}));
    REQUIRE(r.size() == 3);
    CHECK(r[0].to == NodeId::tile({1, 2}));  // east first
    CHECK(r[1].to == NodeId::tile({2, 2}));
    CHECK(r[2].to == NodeId::tile({3, 2}));

    CHECK(xy_route(NodeId::tile({2, 2}), NodeId::tile({2, 2})).empty());

    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const TileCoord s{static_cast<std::uint32_t>(rng() % 8),
                          static_cast<std::uint32_t>(rng() % 8)};
        const TileCoord d{static_cast<std::uint32_t>(rng() % 8),
                          static_cast<std::uint32_t>(rng() % 8)};
        const std::uint32_t manhattan = (s.row > d.row ? s.row - d.row : d.row - s.row) +
                                        (s.col > d.col ? s.col - d.col : d.col - s.col);
        CHECK(xy_route(NodeId::tile(s), NodeId::tile(d)).size() == manhattan);
    }
}

TEST_CASE("routes through channel ports add one edge per port hop") {
    const ArchConfig cfg = test::make_arch(4, 4);
    const NodeId port = port_node(cfg, 1);  // west channel 1 at router (1, 0)
    CHECK(port.coord == TileCoord{1, 0});
    const Route r = xy_route(port, NodeId::tile({1, 2}));
    CHECK(r.size() == 3);  // port hop + 2 mesh links
    CHECK(r[0].from == port);
    CHECK(r[0].to == NodeId::tile({1, 0}));
}

TEST_CASE("multicast tree merges shared prefixes") {
    SUBCASE("row chain") {
        const auto members = resolve_group(GroupSpec::make(2, 3, 0, 0), 4, 4);
        const CollectiveTree tree = build_multicast_tree(NodeId::tile({2, 0}), members);
        CHECK(tree.edges.size() == 3);  // vs 6 link traversals for 3 unicasts
        for (const Link& e : tree.edges) CHECK(e.from.coord.row == 2);
    }
    SUBCASE("singleton group at the source is empty") {
        const CollectiveTree tree =
            build_multicast_tree(NodeId::tile({1, 1}), {TileCoord{1, 1}});
        CHECK(tree.edges.empty());
    }
    SUBCASE("column group") {
        const auto members = resolve_group(GroupSpec::make(0, 0, 0, 3), 4, 4);
        const CollectiveTree tree = build_multicast_tree(NodeId::tile({0, 0}), members);
        CHECK(tree.edges.size() == 3);  // 3 south links
    }
    SUBCASE("edge count bounded by sum of route lengths") {
        std::mt19937_64 rng(5);
        for (int trial = 0; trial < 50; ++trial) {
            const std::uint32_t m_row = static_cast<std::uint32_t>(rng() % 8);
            const std::uint32_t m_col = static_cast<std::uint32_t>(rng() % 8);
            const GroupSpec spec{static_cast<std::uint32_t>(rng()) & m_row,
                                 static_cast<std::uint32_t>(rng()) & m_col, m_row, m_col};
            const auto members = resolve_group(spec, 8, 8);
            const NodeId src = NodeId::tile({static_cast<std::uint32_t>(rng() % 8),
                                             static_cast<std::uint32_t>(rng() % 8)});
            const CollectiveTree tree = build_multicast_tree(src, members);

            std::size_t total = 0;
            std::set<std::pair<NodeId, NodeId>> distinct;
            bool shared = false;
            for (const TileCoord& m : members) {
                const Route r = xy_route(src, NodeId::tile(m));
                total += r.size();
                for (const Link& l : r) {
                    if (!distinct.insert({l.from, l.to}).second) shared = true;
                }
            }
            CHECK(tree.edges.size() <= total);
            if (!shared) CHECK(tree.edges.size() == total);
            CHECK(tree.edges.size() == distinct.size());

            // Every member is reachable: count nodes seen.
            std::set<NodeId> reached{src};
            for (const Link& e : tree.edges) {
                CHECK(reached.contains(e.from));  // parent-first ordering
                reached.insert(e.to);
            }
            for (const TileCoord& m : members) CHECK(reached.contains(NodeId::tile(m)));
        }
    }
}

TEST_CASE("reduce tree is the edge-reversed multicast tree") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 30; ++trial) {
        const std::uint32_t m_col = static_cast<std::uint32_t>(rng() % 8);
        const GroupSpec spec{static_cast<std::uint32_t>(rng() % 8), 0u, 7u, m_col};
        const auto members = resolve_group(spec, 8, 8);
        const NodeId dst = NodeId::tile({static_cast<std::uint32_t>(rng() % 8),
                                         static_cast<std::uint32_t>(rng() % 8)});
        const CollectiveTree down = build_multicast_tree(dst, members);
        const CollectiveTree up = build_reduce_tree(members, dst);
        REQUIRE(down.edges.size() == up.edges.size());
        for (std::size_t i = 0; i < down.edges.size(); ++i) {
            CHECK(down.edges[i].from == up.edges[i].to);
            CHECK(down.edges[i].to == up.edges[i].from);
        }
    }

    SUBCASE("singleton group at the destination is empty") {
        CHECK(build_reduce_tree({TileCoord{2, 2}}, NodeId::tile({2, 2})).edges.empty());
    }
    SUBCASE("strided column group to a corner") {
        const auto members = resolve_group(GroupSpec::make(0, 0, 0, 1), 4, 4);
        const CollectiveTree up = build_reduce_tree(members, NodeId::tile({0, 0}));
        CHECK_FALSE(up.edges.empty());
        for (const Link& e : up.edges) CHECK(e.to != e.from);
    }
}
