#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include <tilesim/program.hpp>

#include "support.hpp"

using namespace tilesim;
using tilesim::test::make_arch;
using tilesim::test::make_plan;

namespace {

std::size_t count_ops(const BspProgram& prog, OpKind kind) {
    std::size_t n = 0;
    for (const Superstep& step : prog.steps)
        for (const auto& ops : step.tile_ops)
            for (const TileOp& op : ops) n += op.kind == kind ? 1 : 0;
    return n;
}

// Multiset of Mmad flops per tile: identifies which (output tile, k slice)
// pairs each tile covers, independent of how operands moved.
std::map<std::uint32_t, std::multiset<std::uint64_t>> mmad_work(const BspProgram& prog) {
    std::map<std::uint32_t, std::multiset<std::uint64_t>> work;
    for (const Superstep& step : prog.steps) {
        for (std::uint32_t t = 0; t < step.tile_ops.size(); ++t) {
            for (const TileOp& op : step.tile_ops[t]) {
                if (op.kind == OpKind::Mmad) work[t].insert(op.flops);
            }
        }
    }
    return work;
}

std::uint64_t load_bytes(const BspProgram& prog, MatrixOperand mat) {
    std::uint64_t bytes = 0;
    for (const Superstep& step : prog.steps)
        for (const auto& ops : step.tile_ops)
            for (const TileOp& op : ops)
                if (op.kind == OpKind::HbmLoad && op.matrix == mat) bytes += op.bytes;
    return bytes;
}

}  // namespace

TEST_CASE("summa superstep count: one per k-step plus the store step") {
    const ArchConfig arch = make_arch(4, 4);
    const auto plan = make_plan(GemmShape{256, 256, 256}, 4, 4, 64, Dataflow::Summa);
    const BspProgram prog = gen_program(plan, arch);
    CHECK(prog.steps.size() == 5);  // 4 compute + 1 store
    validate_program(prog);

    // Double buffering adds a communication-only prologue; the last compute
    // superstep becomes the epilogue with nothing left to prefetch.
    auto db = plan;
    db.double_buffered = true;
    const BspProgram prog_db = gen_program(db, arch);
    CHECK(prog_db.steps.size() == 6);  // prologue + 4 compute + store
    validate_program(prog_db);

    bool epilogue_has_comm = false;
    for (const auto& ops : prog_db.steps[4].tile_ops)
        for (const TileOp& op : ops) epilogue_has_comm |= op.kind != OpKind::Mmad;
    CHECK_FALSE(epilogue_has_comm);

    // The prologue carries loads only, no compute.
    bool prologue_has_mmad = false;
    for (const auto& ops : prog_db.steps.front().tile_ops)
        for (const TileOp& op : ops) prologue_has_mmad |= op.kind == OpKind::Mmad;
    CHECK_FALSE(prologue_has_mmad);
}

TEST_CASE("systolic wavefront: tile (3,3) first computes in superstep 6") {
    const ArchConfig arch = make_arch(4, 4);
    const auto plan = make_plan(GemmShape{256, 256, 256}, 4, 4, 64, Dataflow::Systolic);
    const BspProgram prog = gen_program(plan, arch);
    validate_program(prog);

    const std::uint32_t corner = 3 * 4 + 3;
    std::size_t first = 0;
    for (; first < prog.steps.size(); ++first) {
        bool has_mmad = false;
        for (const TileOp& op : prog.steps[first].tile_ops[corner])
            has_mmad |= op.kind == OpKind::Mmad;
        if (has_mmad) break;
    }
    CHECK(first == 6);
}

TEST_CASE("split-K emits one reduce per output tile and one store by the committer") {
    const ArchConfig arch = make_arch(4, 4);

    SUBCASE("lowest slice commits") {
        auto plan = make_plan(GemmShape{128, 128, 512}, 2, 1, 64, Dataflow::SplitKSumma, 8);
        const BspProgram prog = gen_program(plan, arch);
        validate_program(prog);

        // 2x1 logical outputs, 8-way split: 2 reduce groups of 8 instances.
        std::set<std::uint32_t> reduce_tags;
        std::size_t reduce_instances = 0;
        for (const auto& ops : prog.steps[prog.steps.size() - 2].tile_ops) {
            for (const TileOp& op : ops) {
                REQUIRE(op.kind == OpKind::CollectiveReduce);
                reduce_tags.insert(op.tag);
                reduce_instances++;
            }
        }
        CHECK(reduce_tags.size() == 2);
        CHECK(reduce_instances == 16);
        CHECK(count_ops(prog, OpKind::HbmStore) == 2);

        // The slice-0 member owns the store.
        const LogicalRemap remap = remap_indices(4, 4, 2, 1, 8);
        for (std::uint32_t lr = 0; lr < 2; ++lr) {
            const TileCoord committer = remap.to_physical(lr, 0, 0);
            bool found = false;
            for (const TileOp& op : prog.steps.back().tile_ops[committer.row * 4 + committer.col])
                found |= op.kind == OpKind::HbmStore;
            CHECK(found);
        }
    }
    SUBCASE("rotate_commits spreads committers") {
        auto plan = make_plan(GemmShape{128, 128, 512}, 1, 4, 64, Dataflow::SplitKSumma, 4);
        plan.mapping.reduction_policy = ReductionPolicy::RotateCommits;
        const BspProgram prog = gen_program(plan, arch);
        validate_program(prog);

        const LogicalRemap remap = remap_indices(4, 4, 1, 4, 4);
        std::set<std::uint32_t> storers;
        for (std::uint32_t t = 0; t < 16; ++t) {
            for (const TileOp& op : prog.steps.back().tile_ops[t])
                if (op.kind == OpKind::HbmStore) storers.insert(t);
        }
        // Committer slice rotates with the output index, so the four stores
        // land on four distinct tiles with distinct slice indices.
        CHECK(storers.size() == 4);
        std::set<std::uint32_t> slices;
        for (std::uint32_t t : storers)
            slices.insert(remap.to_logical(TileCoord{t / 4, t % 4}).ks);
        CHECK(slices.size() == 4);
    }
}

TEST_CASE("double-buffer alternation: slot computed in s is refilled in s+1") {
    const ArchConfig arch = make_arch(4, 4);
    for (const Dataflow df : {Dataflow::Baseline, Dataflow::Summa}) {
        auto plan = make_plan(GemmShape{256, 256, 256}, 4, 4, 64, df, 1, true);
        const BspProgram prog = gen_program(plan, arch);
        for (std::size_t s = 1; s + 2 < prog.steps.size(); ++s) {
            for (std::uint32_t t = 0; t < 16; ++t) {
                SlotId computed = 0;
                bool has_mmad = false;
                for (const TileOp& op : prog.steps[s].tile_ops[t]) {
                    if (op.kind == OpKind::Mmad) {
                        computed = op.src_slot;
                        has_mmad = true;
                    }
                }
                if (!has_mmad) continue;
                for (const TileOp& op : prog.steps[s + 1].tile_ops[t]) {
                    if (op.kind == OpKind::HbmLoad &&
                        prog.slots[op.dst_slot].name[0] == 'a') {
                        CHECK(op.dst_slot == computed);
                    }
                }
            }
        }
    }
}

TEST_CASE("all dataflows cover the same mmad work multiset") {
    const ArchConfig arch = make_arch(4, 4);
    const GemmShape shape{192, 160, 224};  // padded in every dimension
    const auto reference =
        mmad_work(gen_program(make_plan(shape, 4, 4, 64, Dataflow::Baseline), arch));
    for (const Dataflow df : {Dataflow::Summa, Dataflow::Systolic}) {
        for (const bool db : {false, true}) {
            const auto plan = make_plan(shape, 4, 4, 64, df, 1, db);
            CHECK(mmad_work(gen_program(plan, arch)) == reference);
        }
    }
    for (const Dataflow df : {Dataflow::SystolicOverSumma, Dataflow::SummaOverSystolic}) {
        for (const bool db : {false, true}) {
            const auto plan = make_plan(shape, 4, 4, 64, df, 1, db, 2, 2);
            CHECK(mmad_work(gen_program(plan, arch)) == reference);
        }
    }
}

TEST_CASE("summa loads each operand once per row or column owner") {
    const ArchConfig arch = make_arch(4, 4);
    const GemmShape shape{256, 256, 256};
    const BspProgram baseline =
        gen_program(make_plan(shape, 4, 4, 64, Dataflow::Baseline), arch);
    const BspProgram summa = gen_program(make_plan(shape, 4, 4, 64, Dataflow::Summa), arch);

    CHECK(load_bytes(summa, MatrixOperand::A) * 4 == load_bytes(baseline, MatrixOperand::A));
    CHECK(load_bytes(summa, MatrixOperand::B) * 4 == load_bytes(baseline, MatrixOperand::B));

    // On an r x c logical grid the A traffic shrinks by c and B by r.
    const BspProgram base28 = gen_program(make_plan(shape, 2, 8, 64, Dataflow::Baseline), arch);
    const BspProgram summa28 = gen_program(make_plan(shape, 2, 8, 64, Dataflow::Summa), arch);
    CHECK(load_bytes(summa28, MatrixOperand::A) * 8 == load_bytes(base28, MatrixOperand::A));
    CHECK(load_bytes(summa28, MatrixOperand::B) * 2 == load_bytes(base28, MatrixOperand::B));
}

TEST_CASE("validate_program rejects reads of never-written operand slots") {
    const ArchConfig arch = make_arch(4, 4);
    BspProgram prog = gen_program(make_plan(GemmShape{64, 64, 64}, 4, 4, 16, Dataflow::Summa), arch);
    // Drop the first tile's load so its broadcast reads an unwritten slot.
    auto& ops = prog.steps[0].tile_ops[0];
    const auto is_load = [](const TileOp& op) { return op.kind == OpKind::HbmLoad; };
    ops.erase(std::remove_if(ops.begin(), ops.end(), is_load), ops.end());
    CHECK_THROWS_AS(validate_program(prog), InvalidPlan);
}

TEST_CASE("programs for padded shapes stay well-formed") {
    const ArchConfig arch = make_arch(4, 4);
    const GemmShape shapes[] = {{128, 96, 160}, {64, 528, 512}, {100, 100, 100}};
    for (const GemmShape& shape : shapes) {
        for (const Dataflow df : {Dataflow::Baseline, Dataflow::Summa, Dataflow::Systolic}) {
            for (const bool db : {false, true}) {
                const auto plan = make_plan(shape, 2, 8, 32, df, 1, db);
                const BspProgram prog = gen_program(plan, arch);
                CHECK_NOTHROW(validate_program(prog));
            }
        }
    }
}

TEST_CASE("gen_program raises SpmOverflow before building") {
    ArchConfig arch = make_arch(4, 4);
    arch.spm_bytes = 4096;
    const auto plan = make_plan(GemmShape{256, 256, 256}, 4, 4, 64, Dataflow::Summa);
    CHECK_THROWS_AS(gen_program(plan, arch), SpmOverflow);
}

TEST_CASE("validate_program catches double stores") {
    const ArchConfig arch = make_arch(4, 4);
    BspProgram prog = gen_program(make_plan(GemmShape{64, 64, 64}, 4, 4, 16, Dataflow::Summa), arch);
    // Duplicate one store op.
    for (auto& ops : prog.steps.back().tile_ops) {
        if (!ops.empty() && ops[0].kind == OpKind::HbmStore) {
            ops.push_back(ops[0]);
            break;
        }
    }
    CHECK_THROWS_AS(validate_program(prog), InvalidPlan);
}

TEST_CASE("validate_program catches orphan receives") {
    const ArchConfig arch = make_arch(4, 4);
    BspProgram prog = gen_program(make_plan(GemmShape{64, 64, 64}, 4, 4, 16, Dataflow::Summa), arch);
    TileOp orphan;
    orphan.kind = OpKind::Receive;
    orphan.tag = 9999;
    prog.steps[0].tile_ops[0].push_back(orphan);
    CHECK_THROWS_AS(validate_program(prog), InvalidPlan);
}
