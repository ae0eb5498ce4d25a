#include <tilesim/program.hpp>

#include <array>
#include <cstdlib>
#include <map>
#include <sstream>

namespace tilesim {

const char* to_string(OpKind kind) {
    switch (kind) {
        case OpKind::HbmLoad: return "hbm_load";
        case OpKind::HbmStore: return "hbm_store";
        case OpKind::MulticastSend: return "mcast_send";
        case OpKind::CollectiveReduce: return "collective_reduce";
        case OpKind::NeighborSend: return "neighbor_send";
        case OpKind::Receive: return "receive";
        case OpKind::Mmad: return "mmad";
        case OpKind::AddReduce: return "add_reduce";
    }
    return "unknown";
}

const char* to_string(MatrixOperand m) {
    switch (m) {
        case MatrixOperand::A: return "A";
        case MatrixOperand::B: return "B";
        case MatrixOperand::C: return "C";
    }
    return "?";
}

std::uint64_t BspProgram::slot_bytes_per_tile(std::uint32_t elem_bytes) const {
    std::uint64_t total = 0;
    for (const SlotSpec& s : slots) total += s.elems() * elem_bytes;
    return total;
}

namespace {

// Generates the superstep program for one plan. Per-tile op lists are
// assembled in phases so that program order respects intra-superstep data
// hazards: sends of previous-iteration data come first, then HBM loads and
// the broadcasts fed by them, then receives, then relayed broadcasts, their
// receives, compute, and finally reductions/stores.
class ProgramBuilder {
public:
    ProgramBuilder(const SchedulePlan& plan, const ArchConfig& arch)
        : plan_(plan),
          arch_(arch),
          remap_(remap_indices(arch.grid_rows, arch.grid_cols, plan.mapping.logical_rows,
                               plan.mapping.logical_cols, plan.mapping.k_split)) {
        m_ = plan.shape.m;
        n_ = plan.shape.n;
        k_ = plan.shape.k;
        tm_ = plan.tiling.tm;
        tn_ = plan.tiling.tn;
        tk_ = plan.tiling.tk;
        lr_count_ = plan.mapping.logical_rows;
        lc_count_ = plan.mapping.logical_cols;
        ks_count_ = plan.mapping.k_split;
        steps_ = plan.tiling.k_steps_per_slice;
        db_ = plan.double_buffered;
    }

    BspProgram build() {
        prog_.shape = plan_.shape;
        prog_.tiling = plan_.tiling;
        prog_.mapping = plan_.mapping;
        prog_.dataflow = plan_.dataflow;
        prog_.double_buffered = db_;
        prog_.grid_rows = arch_.grid_rows;
        prog_.grid_cols = arch_.grid_cols;
        prog_.layouts = plan_.layouts;

        prog_.slots.push_back(SlotSpec{"a0", static_cast<std::uint32_t>(tm_),
                                       static_cast<std::uint32_t>(tk_)});
        prog_.slots.push_back(SlotSpec{"b0", static_cast<std::uint32_t>(tk_),
                                       static_cast<std::uint32_t>(tn_)});
        prog_.slots.push_back(SlotSpec{"c", static_cast<std::uint32_t>(tm_),
                                       static_cast<std::uint32_t>(tn_)});
        if (db_) {
            prog_.slots.push_back(SlotSpec{"a1", static_cast<std::uint32_t>(tm_),
                                           static_cast<std::uint32_t>(tk_)});
            prog_.slots.push_back(SlotSpec{"b1", static_cast<std::uint32_t>(tk_),
                                           static_cast<std::uint32_t>(tn_)});
        }
        if (prog_.slot_bytes_per_tile(arch_.elem_bytes) > arch_.spm_bytes) {
            throw SpmOverflow(prog_.slot_bytes_per_tile(arch_.elem_bytes), arch_.spm_bytes);
        }

        switch (plan_.dataflow) {
            case Dataflow::Baseline:
                build_baseline();
                break;
            case Dataflow::Summa:
            case Dataflow::SplitKSumma:
                build_summa_family(lr_count_, lc_count_);
                break;
            case Dataflow::SystolicOverSumma:
                build_summa_family(plan_.group_rows, plan_.group_cols);
                break;
            case Dataflow::Systolic:
                build_systolic_family(lr_count_, lc_count_);
                break;
            case Dataflow::SummaOverSystolic:
                build_systolic_family(plan_.group_rows, plan_.group_cols);
                break;
        }
        emit_reduce();
        emit_store();
        return std::move(prog_);
    }

private:
    static constexpr int kPhases = 8;
    enum Phase {
        kSendOld = 0,   // forwards of previous-iteration data
        kLoad = 1,      // HBM loads and broadcasts of freshly loaded data
        kRecv1 = 2,     // receives of forwards / first-level broadcasts
        kSendRelay = 3, // broadcasts whose payload arrived in kRecv1
        kRecv2 = 4,     // receives of relayed broadcasts
        kCompute = 5,
        kCollective = 6,
        kStore = 7,
    };

    SlotId slot_a(std::int64_t step) const {
        return (db_ && (step & 1)) ? SlotId{3} : SlotId{0};
    }
    SlotId slot_b(std::int64_t step) const {
        return (db_ && (step & 1)) ? SlotId{4} : SlotId{1};
    }
    static constexpr SlotId kSlotC = 2;

    static std::uint64_t clip(std::uint64_t base, std::uint64_t len, std::uint64_t limit) {
        if (base >= limit) return 0;
        const std::uint64_t end = std::min(base + len, limit);
        return end - base;
    }
    std::uint64_t em(std::uint32_t lr) const { return clip(lr * tm_, tm_, m_); }
    std::uint64_t en(std::uint32_t lc) const { return clip(lc * tn_, tn_, n_); }
    std::uint64_t ek(std::uint64_t g) const { return clip(g * tk_, tk_, k_); }
    std::uint64_t a_elems(std::uint32_t lr, std::uint64_t g) const { return em(lr) * ek(g); }
    std::uint64_t b_elems(std::uint64_t g, std::uint32_t lc) const { return ek(g) * en(lc); }
    std::uint64_t c_elems(std::uint32_t lr, std::uint32_t lc) const { return em(lr) * en(lc); }

    TileCoord phys(std::uint32_t lr, std::uint32_t lc, std::uint32_t ks) const {
        return remap_.to_physical(lr, lc, ks);
    }
    std::uint32_t tidx(TileCoord t) const { return t.row * arch_.grid_cols + t.col; }

    void begin_step() {
        cur_.assign(arch_.tile_count(), {});
        tags_.clear();
        next_tag_ = 0;
    }

    void end_step() {
        Superstep step;
        step.tile_ops.resize(arch_.tile_count());
        for (std::uint32_t t = 0; t < arch_.tile_count(); ++t) {
            for (int phase = 0; phase < kPhases; ++phase) {
                auto& ops = cur_[t][phase];
                step.tile_ops[t].insert(step.tile_ops[t].end(), ops.begin(), ops.end());
            }
        }
        prog_.steps.push_back(std::move(step));
    }

    std::uint32_t tag_for(const std::string& key) {
        const auto it = tags_.find(key);
        if (it != tags_.end()) return it->second;
        const std::uint32_t tag = next_tag_++;
        tags_[key] = tag;
        return tag;
    }

    void push(TileCoord tile, Phase phase, TileOp op) {
        cur_[tidx(tile)][phase].push_back(op);
    }

    void emit_load(TileCoord tile, MatrixOperand mat, std::uint64_t base_row,
                   std::uint64_t base_col, SlotId dst, std::uint64_t elems) {
        TileOp op;
        op.kind = OpKind::HbmLoad;
        op.matrix = mat;
        op.base_row = base_row;
        op.base_col = base_col;
        op.dst_slot = dst;
        op.bytes = elems * arch_.elem_bytes;
        push(tile, kLoad, op);
    }

    // Broadcast `slot` from root to every tile of `members`; the root's own
    // copy is already in place, so only other members get a Receive.
    void emit_mcast(TileCoord root, const std::vector<TileCoord>& members, SlotId slot,
                    std::uint64_t elems, const std::string& key, Phase send_phase,
                    Phase recv_phase) {
        const auto spec = mask_for_set(members, arch_.grid_rows, arch_.grid_cols);
        if (!spec) throw InvalidPlan("generated group is not mask-expressible");
        const std::uint32_t tag = tag_for(key);

        TileOp send;
        send.kind = OpKind::MulticastSend;
        send.tag = tag;
        send.group = *spec;
        send.src_slot = slot;
        send.dst_slot = slot;
        send.bytes = elems * arch_.elem_bytes;
        push(root, send_phase, send);

        for (const TileCoord& m : members) {
            if (m == root) continue;
            TileOp recv;
            recv.kind = OpKind::Receive;
            recv.tag = tag;
            recv.dst_slot = slot;
            push(m, recv_phase, recv);
        }
    }

    // Point-to-point transfer; a true mesh neighbor uses the single-link op,
    // anything further is a singleton multicast routed across the mesh.
    void emit_unicast(TileCoord src, TileCoord dst, SlotId slot, std::uint64_t elems,
                      const std::string& key, Phase send_phase, Phase recv_phase) {
        const std::uint32_t tag = tag_for(key);
        const std::uint32_t dist = (src.row > dst.row ? src.row - dst.row : dst.row - src.row) +
                                   (src.col > dst.col ? src.col - dst.col : dst.col - src.col);
        TileOp send;
        send.tag = tag;
        send.src_slot = slot;
        send.dst_slot = slot;
        send.peer = dst;
        send.bytes = elems * arch_.elem_bytes;
        if (dist == 1) {
            send.kind = OpKind::NeighborSend;
        } else {
            send.kind = OpKind::MulticastSend;
            send.group = GroupSpec{dst.row, dst.col, arch_.grid_rows - 1, arch_.grid_cols - 1};
        }
        push(src, send_phase, send);

        TileOp recv;
        recv.kind = OpKind::Receive;
        recv.tag = tag;
        recv.dst_slot = slot;
        push(dst, recv_phase, recv);
    }

    void emit_mmad(TileCoord tile, std::uint32_t lr, std::uint32_t lc, std::uint64_t g,
                   std::int64_t step) {
        TileOp op;
        op.kind = OpKind::Mmad;
        op.src_slot = slot_a(step);
        op.aux_slot = slot_b(step);
        op.dst_slot = kSlotC;
        op.mm_rows = static_cast<std::uint32_t>(tm_);
        op.mm_cols = static_cast<std::uint32_t>(tn_);
        op.mm_depth = static_cast<std::uint32_t>(tk_);
        op.flops = 2 * em(lr) * en(lc) * ek(g);
        push(tile, kCompute, op);
    }

    std::vector<TileCoord> logical_row_tiles(std::uint32_t lr, std::uint32_t oj,
                                             std::uint32_t inner_cols, std::uint32_t ks) const {
        std::vector<TileCoord> out;
        for (std::uint32_t gj = 0; gj < inner_cols; ++gj) {
            out.push_back(phys(lr, oj * inner_cols + gj, ks));
        }
        return out;
    }

    std::vector<TileCoord> logical_col_tiles(std::uint32_t lc, std::uint32_t oi,
                                             std::uint32_t inner_rows, std::uint32_t ks) const {
        std::vector<TileCoord> out;
        for (std::uint32_t gi = 0; gi < inner_rows; ++gi) {
            out.push_back(phys(oi * inner_rows + gi, lc, ks));
        }
        return out;
    }

    // ---- baseline: every tile streams its own operands, no on-chip traffic.
    void build_baseline() {
        const std::int64_t total = static_cast<std::int64_t>(steps_);
        const std::int64_t w_count = db_ ? total + 1 : total;
        for (std::int64_t w = 0; w < w_count; ++w) {
            begin_step();
            const std::int64_t t = db_ ? w - 1 : w;
            const std::int64_t acq = db_ ? t + 1 : t;
            for (std::uint32_t lr = 0; lr < lr_count_; ++lr) {
                for (std::uint32_t lc = 0; lc < lc_count_; ++lc) {
                    const TileCoord tile = phys(lr, lc, 0);
                    if (acq >= 0 && acq < total) {
                        const std::uint64_t g = static_cast<std::uint64_t>(acq);
                        if (a_elems(lr, g) > 0)
                            emit_load(tile, MatrixOperand::A, lr * tm_, g * tk_, slot_a(acq),
                                      a_elems(lr, g));
                        if (b_elems(g, lc) > 0)
                            emit_load(tile, MatrixOperand::B, g * tk_, lc * tn_, slot_b(acq),
                                      b_elems(g, lc));
                    }
                    if (t >= 0 && t < total) {
                        const std::uint64_t g = static_cast<std::uint64_t>(t);
                        if (a_elems(lr, g) > 0 && b_elems(g, lc) > 0)
                            emit_mmad(tile, lr, lc, g, t);
                    }
                }
            }
            end_step();
        }
    }

    // ---- SUMMA and its relatives.
    //
    // The grid splits into outer_rows x outer_cols groups of inner_rows x
    // inner_cols tiles. Within a group each k-step broadcasts an A tile
    // along each inner row and a B tile down each inner column (rotating
    // owners). With one group this is plain SUMMA; with several, groups run
    // an outer systolic wavefront and forward operand pieces to their east
    // and south neighbors. Split-K runs one SUMMA per k-slice plane.
    void build_summa_family(std::uint32_t inner_rows, std::uint32_t inner_cols) {
        const std::uint32_t outer_rows = lr_count_ / inner_rows;
        const std::uint32_t outer_cols = lc_count_ / inner_cols;
        const std::int64_t total = static_cast<std::int64_t>(steps_);
        const std::int64_t skew = (outer_rows - 1) + (outer_cols - 1);
        const std::int64_t w_count = total + skew + (db_ ? 1 : 0);

        for (std::int64_t w = 0; w < w_count; ++w) {
            begin_step();
            for (std::uint32_t ks = 0; ks < ks_count_; ++ks) {
                for (std::uint32_t oi = 0; oi < outer_rows; ++oi) {
                    for (std::uint32_t oj = 0; oj < outer_cols; ++oj) {
                        const std::int64_t t = (db_ ? w - 1 : w) - oi - oj;
                        const std::int64_t acq = db_ ? t + 1 : t;
                        const std::int64_t fwd = db_ ? t : t - 1;
                        emit_summa_group(ks, oi, oj, inner_rows, inner_cols, outer_rows,
                                         outer_cols, t, acq, fwd);
                    }
                }
            }
            end_step();
        }
    }

    void emit_summa_group(std::uint32_t ks, std::uint32_t oi, std::uint32_t oj,
                          std::uint32_t inner_rows, std::uint32_t inner_cols,
                          std::uint32_t outer_rows, std::uint32_t outer_cols, std::int64_t t,
                          std::int64_t acq, std::int64_t fwd) {
        const std::int64_t total = static_cast<std::int64_t>(steps_);

        // Forward previous pieces to the east/south neighbor group.
        if (fwd >= 0 && fwd < total) {
            const std::uint64_t g = ks * steps_ + fwd;
            const std::uint32_t holder_gj = static_cast<std::uint32_t>(fwd % inner_cols);
            const std::uint32_t holder_gi = static_cast<std::uint32_t>(fwd % inner_rows);
            if (oj + 1 < outer_cols) {
                for (std::uint32_t gi = 0; gi < inner_rows; ++gi) {
                    const std::uint32_t lr = oi * inner_rows + gi;
                    if (a_elems(lr, g) == 0) continue;
                    const TileCoord src = phys(lr, oj * inner_cols + holder_gj, ks);
                    const TileCoord dst = phys(lr, (oj + 1) * inner_cols + holder_gj, ks);
                    emit_unicast(src, dst, slot_a(fwd), a_elems(lr, g),
                                 "uA:" + std::to_string(tidx(dst)), kSendOld, kRecv1);
                }
            }
            if (oi + 1 < outer_rows) {
                for (std::uint32_t gj = 0; gj < inner_cols; ++gj) {
                    const std::uint32_t lc = oj * inner_cols + gj;
                    if (b_elems(g, lc) == 0) continue;
                    const TileCoord src = phys(oi * inner_rows + holder_gi, lc, ks);
                    const TileCoord dst = phys((oi + 1) * inner_rows + holder_gi, lc, ks);
                    emit_unicast(src, dst, slot_b(fwd), b_elems(g, lc),
                                 "uB:" + std::to_string(tidx(dst)), kSendOld, kRecv1);
                }
            }
        }

        // Acquire and distribute the pieces for step `acq`.
        if (acq >= 0 && acq < total) {
            const std::uint64_t g = ks * steps_ + acq;
            const std::uint32_t holder_gj = static_cast<std::uint32_t>(acq % inner_cols);
            const std::uint32_t holder_gi = static_cast<std::uint32_t>(acq % inner_rows);
            for (std::uint32_t gi = 0; gi < inner_rows; ++gi) {
                const std::uint32_t lr = oi * inner_rows + gi;
                if (a_elems(lr, g) == 0) continue;
                const TileCoord holder = phys(lr, oj * inner_cols + holder_gj, ks);
                const Phase mcast_phase = (oj == 0) ? kLoad : kSendRelay;
                if (oj == 0) {
                    emit_load(holder, MatrixOperand::A, lr * tm_, g * tk_, slot_a(acq),
                              a_elems(lr, g));
                }
                // oj > 0: the west group's forward delivered into the slot
                // (Receive emitted by the sender context above).
                if (inner_cols > 1) {
                    emit_mcast(holder, logical_row_tiles(lr, oj, inner_cols, ks), slot_a(acq),
                               a_elems(lr, g), "mA:" + std::to_string(tidx(holder)),
                               mcast_phase, kRecv2);
                }
            }
            for (std::uint32_t gj = 0; gj < inner_cols; ++gj) {
                const std::uint32_t lc = oj * inner_cols + gj;
                if (b_elems(g, lc) == 0) continue;
                const TileCoord holder = phys(oi * inner_rows + holder_gi, lc, ks);
                const Phase mcast_phase = (oi == 0) ? kLoad : kSendRelay;
                if (oi == 0) {
                    emit_load(holder, MatrixOperand::B, g * tk_, lc * tn_, slot_b(acq),
                              b_elems(g, lc));
                }
                if (inner_rows > 1) {
                    emit_mcast(holder, logical_col_tiles(lc, oi, inner_rows, ks), slot_b(acq),
                               b_elems(g, lc), "mB:" + std::to_string(tidx(holder)),
                               mcast_phase, kRecv2);
                }
            }
        }

        // Accumulate.
        if (t >= 0 && t < total) {
            const std::uint64_t g = ks * steps_ + t;
            for (std::uint32_t gi = 0; gi < inner_rows; ++gi) {
                for (std::uint32_t gj = 0; gj < inner_cols; ++gj) {
                    const std::uint32_t lr = oi * inner_rows + gi;
                    const std::uint32_t lc = oj * inner_cols + gj;
                    if (a_elems(lr, g) > 0 && b_elems(g, lc) > 0) {
                        emit_mmad(phys(lr, lc, ks), lr, lc, g, t);
                    }
                }
            }
        }
    }

    // ---- systolic wavefront and its SUMMA-fed variant.
    //
    // A tiles enter at the west edge of each inner group and hop east one
    // tile per superstep; B tiles enter north and hop south. Tile (gi, gj)
    // first computes in superstep gi + gj. With one group spanning the grid
    // the edges feed straight from HBM; with several groups the entry tiles
    // are fed by an outer SUMMA broadcast from a rotating owner group.
    void build_systolic_family(std::uint32_t inner_rows, std::uint32_t inner_cols) {
        const std::uint32_t outer_rows = lr_count_ / inner_rows;
        const std::uint32_t outer_cols = lc_count_ / inner_cols;
        const std::int64_t total = static_cast<std::int64_t>(steps_);
        const std::int64_t skew = (inner_rows - 1) + (inner_cols - 1);
        const std::int64_t w_count = total + skew + (db_ ? 1 : 0);

        for (std::int64_t w = 0; w < w_count; ++w) {
            begin_step();
            for (std::uint32_t lr = 0; lr < lr_count_; ++lr) {
                for (std::uint32_t lc = 0; lc < lc_count_; ++lc) {
                    const std::uint32_t gi = lr % inner_rows;
                    const std::uint32_t gj = lc % inner_cols;
                    const std::int64_t t = (db_ ? w - 1 : w) - gi - gj;
                    const std::int64_t acq = db_ ? t + 1 : t;
                    const std::int64_t fwd = db_ ? t : t - 1;
                    const TileCoord tile = phys(lr, lc, 0);

                    if (fwd >= 0 && fwd < total) {
                        const std::uint64_t g = static_cast<std::uint64_t>(fwd);
                        if (gj + 1 < inner_cols && a_elems(lr, g) > 0) {
                            const TileCoord dst = phys(lr, lc + 1, 0);
                            emit_unicast(tile, dst, slot_a(fwd), a_elems(lr, g),
                                         "uA:" + std::to_string(tidx(dst)), kSendOld, kRecv1);
                        }
                        if (gi + 1 < inner_rows && b_elems(g, lc) > 0) {
                            const TileCoord dst = phys(lr + 1, lc, 0);
                            emit_unicast(tile, dst, slot_b(fwd), b_elems(g, lc),
                                         "uB:" + std::to_string(tidx(dst)), kSendOld, kRecv1);
                        }
                    }

                    if (acq >= 0 && acq < total) {
                        const std::uint64_t g = static_cast<std::uint64_t>(acq);
                        if (gj == 0 && a_elems(lr, g) > 0) {
                            const std::uint32_t owner_oj =
                                static_cast<std::uint32_t>(acq % outer_cols);
                            if (lc / inner_cols == owner_oj) {
                                emit_load(tile, MatrixOperand::A, lr * tm_, g * tk_,
                                          slot_a(acq), a_elems(lr, g));
                                if (outer_cols > 1) {
                                    std::vector<TileCoord> entries;
                                    for (std::uint32_t oj = 0; oj < outer_cols; ++oj)
                                        entries.push_back(phys(lr, oj * inner_cols, 0));
                                    emit_mcast(tile, entries, slot_a(acq), a_elems(lr, g),
                                               "mA:" + std::to_string(tidx(tile)), kLoad,
                                               kRecv1);
                                }
                            }
                        }
                        if (gi == 0 && b_elems(g, lc) > 0) {
                            const std::uint32_t owner_oi =
                                static_cast<std::uint32_t>(acq % outer_rows);
                            if (lr / inner_rows == owner_oi) {
                                emit_load(tile, MatrixOperand::B, g * tk_, lc * tn_,
                                          slot_b(acq), b_elems(g, lc));
                                if (outer_rows > 1) {
                                    std::vector<TileCoord> entries;
                                    for (std::uint32_t oi = 0; oi < outer_rows; ++oi)
                                        entries.push_back(phys(oi * inner_rows, lc, 0));
                                    emit_mcast(tile, entries, slot_b(acq), b_elems(g, lc),
                                               "mB:" + std::to_string(tidx(tile)), kLoad,
                                               kRecv1);
                                }
                            }
                        }
                    }

                    if (t >= 0 && t < total) {
                        const std::uint64_t g = static_cast<std::uint64_t>(t);
                        if (a_elems(lr, g) > 0 && b_elems(g, lc) > 0) {
                            emit_mmad(tile, lr, lc, g, t);
                        }
                    }
                }
            }
            end_step();
        }
    }

    std::uint32_t committer_slice(std::uint32_t lr, std::uint32_t lc) const {
        if (plan_.mapping.reduction_policy == ReductionPolicy::LowestSliceCommits) return 0;
        return (lr * lc_count_ + lc) % ks_count_;
    }

    void emit_reduce() {
        if (ks_count_ <= 1) return;
        begin_step();
        for (std::uint32_t lr = 0; lr < lr_count_; ++lr) {
            for (std::uint32_t lc = 0; lc < lc_count_; ++lc) {
                if (c_elems(lr, lc) == 0) continue;
                std::vector<TileCoord> members;
                for (std::uint32_t ks = 0; ks < ks_count_; ++ks)
                    members.push_back(phys(lr, lc, ks));
                const auto spec = mask_for_set(members, arch_.grid_rows, arch_.grid_cols);
                if (!spec) throw InvalidPlan("split-K group is not mask-expressible");
                const TileCoord dst = phys(lr, lc, committer_slice(lr, lc));
                const std::uint32_t tag =
                    tag_for("r:" + std::to_string(lr) + ":" + std::to_string(lc));
                for (const TileCoord& member : members) {
                    TileOp op;
                    op.kind = OpKind::CollectiveReduce;
                    op.tag = tag;
                    op.group = *spec;
                    op.peer = dst;
                    op.src_slot = kSlotC;
                    op.dst_slot = kSlotC;
                    op.bytes = c_elems(lr, lc) * arch_.elem_bytes;
                    push(member, kCollective, op);
                }
            }
        }
        end_step();
    }

    void emit_store() {
        begin_step();
        for (std::uint32_t lr = 0; lr < lr_count_; ++lr) {
            for (std::uint32_t lc = 0; lc < lc_count_; ++lc) {
                if (c_elems(lr, lc) == 0) continue;
                const std::uint32_t ks = ks_count_ > 1 ? committer_slice(lr, lc) : 0;
                TileOp op;
                op.kind = OpKind::HbmStore;
                op.matrix = MatrixOperand::C;
                op.base_row = lr * tm_;
                op.base_col = lc * tn_;
                op.src_slot = kSlotC;
                op.bytes = c_elems(lr, lc) * arch_.elem_bytes;
                push(phys(lr, lc, ks), kStore, op);
            }
        }
        end_step();
    }

    const SchedulePlan& plan_;
    const ArchConfig& arch_;
    LogicalRemap remap_;
    BspProgram prog_;

    std::uint64_t m_ = 0, n_ = 0, k_ = 0;
    std::uint64_t tm_ = 0, tn_ = 0, tk_ = 0;
    std::uint32_t lr_count_ = 0, lc_count_ = 0, ks_count_ = 1;
    std::uint64_t steps_ = 0;
    bool db_ = false;

    std::vector<std::array<std::vector<TileOp>, kPhases>> cur_;
    std::map<std::string, std::uint32_t> tags_;
    std::uint32_t next_tag_ = 0;
};

}  // namespace

BspProgram gen_program(const SchedulePlan& plan, const ArchConfig& arch) {
    validate_plan(plan, arch);
    ProgramBuilder builder(plan, arch);
    return builder.build();
}

void validate_program(const BspProgram& program) {
    const std::uint32_t tiles = program.grid_rows * program.grid_cols;
    for (std::size_t s = 0; s < program.steps.size(); ++s) {
        const Superstep& step = program.steps[s];
        if (step.tile_ops.size() != tiles) {
            throw InvalidPlan("superstep " + std::to_string(s) + " has wrong tile count");
        }
        std::map<std::uint32_t, int> sends;
        std::map<std::uint32_t, int> receives;
        for (const auto& ops : step.tile_ops) {
            for (const TileOp& op : ops) {
                if (op.kind == OpKind::MulticastSend || op.kind == OpKind::NeighborSend) {
                    sends[op.tag]++;
                } else if (op.kind == OpKind::Receive) {
                    receives[op.tag]++;
                }
            }
        }
        for (const auto& [tag, count] : receives) {
            const auto it = sends.find(tag);
            if (it == sends.end() || it->second != 1) {
                throw InvalidPlan("superstep " + std::to_string(s) + ": receive tag " +
                                  std::to_string(tag) + " lacks a unique matching send");
            }
        }
    }

    // Operand slots must be filled by a load or receive before compute or a
    // send reads them. The accumulator slots start zeroed, so only slots
    // named a*/b* are tracked.
    std::vector<std::vector<bool>> written(tiles, std::vector<bool>(program.slots.size(), false));
    auto tracked = [&program](SlotId s) {
        const char c = program.slots[s].name.empty() ? '?' : program.slots[s].name[0];
        return c == 'a' || c == 'b';
    };
    for (std::size_t s = 0; s < program.steps.size(); ++s) {
        for (std::uint32_t t = 0; t < tiles; ++t) {
            for (const TileOp& op : program.steps[s].tile_ops[t]) {
                auto require_written = [&](SlotId slot) {
                    if (tracked(slot) && !written[t][slot]) {
                        throw InvalidPlan("superstep " + std::to_string(s) + ": tile " +
                                          std::to_string(t) + " reads slot " +
                                          program.slots[slot].name + " before any write");
                    }
                };
                switch (op.kind) {
                    case OpKind::HbmLoad:
                        written[t][op.dst_slot] = true;
                        break;
                    case OpKind::Receive:
                        written[t][op.dst_slot] = true;
                        break;
                    case OpKind::MulticastSend:
                    case OpKind::NeighborSend:
                        require_written(op.src_slot);
                        break;
                    case OpKind::Mmad:
                        require_written(op.src_slot);
                        require_written(op.aux_slot);
                        break;
                    case OpKind::HbmStore:
                    case OpKind::CollectiveReduce:
                    case OpKind::AddReduce:
                        require_written(op.src_slot);
                        break;
                }
            }
        }
    }

    // Every unpadded output element must be stored exactly once.
    std::vector<std::uint8_t> stored(program.shape.m * program.shape.n, 0);
    for (const Superstep& step : program.steps) {
        for (const auto& ops : step.tile_ops) {
            for (const TileOp& op : ops) {
                if (op.kind != OpKind::HbmStore) continue;
                const std::uint64_t r1 =
                    std::min(op.base_row + program.tiling.tm, program.shape.m);
                const std::uint64_t c1 =
                    std::min(op.base_col + program.tiling.tn, program.shape.n);
                for (std::uint64_t r = op.base_row; r < r1; ++r) {
                    for (std::uint64_t c = op.base_col; c < c1; ++c) {
                        if (stored[r * program.shape.n + c]++) {
                            throw InvalidPlan("output element stored twice");
                        }
                    }
                }
            }
        }
    }
    for (std::uint8_t v : stored) {
        if (v != 1) throw InvalidPlan("output element never stored");
    }
}

}  // namespace tilesim
