#include <tilesim/engine.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <optional>
#include <sstream>
#include <tuple>

#include <tilesim/fabric.hpp>

namespace tilesim {

namespace {

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return b == 0 ? 0 : (a + b - 1) / b; }

struct Resource {
    std::uint64_t free = 0;
    std::uint64_t busy = 0;
};

struct LinkState {
    Resource res;
    std::uint64_t bytes = 0;
};

struct SlotHazard {
    std::uint64_t write_end = 0;
    std::uint64_t read_end = 0;
    bool pending = false;  // blocked on an unfinished collective
};

// Completed send: payload snapshot plus per-member delivery cycles.
struct Delivery {
    std::vector<double> payload;
    std::map<std::uint32_t, std::uint64_t> at;
};

struct Contribution {
    std::uint64_t ready = 0;
    std::vector<double> values;
};

struct CollectiveState {
    GroupSpec group;
    TileCoord dst;
    SlotId dst_slot = 0;
    std::uint64_t bytes = 0;
    std::vector<TileCoord> members;
    std::map<std::uint32_t, Contribution> contributions;
    std::vector<std::pair<std::uint32_t, std::uint64_t>> instance_starts;  // tile, ready
};

// Wormhole-style path walk: the head advances hop by hop, each resource is
// occupied for its serialization window starting when the head reaches it,
// and the tail (delivery) trails the slowest window. Uncontended this gives
// total = sum(hops) * hop_latency + max serialization.
struct Walk {
    std::uint64_t head;
    std::uint64_t deliv;
    std::string* names;

    explicit Walk(std::uint64_t start, std::string* trace_names = nullptr)
        : head(start), deliv(start), names(trace_names) {}

    void step(Resource& r, std::uint64_t ser, std::uint64_t hop, const std::string& name) {
        const std::uint64_t acq = std::max(head, r.free);
        r.free = acq + ser;
        r.busy += ser;
        head = acq + hop;
        deliv = std::max(deliv, acq + ser) + hop;
        if (names) {
            if (!names->empty()) names->push_back(';');
            names->append(name);
        }
    }
};

class Executor {
public:
    Executor(const BspProgram& program, const ArchConfig& arch, const Preload& preload,
             const ExecOptions& options)
        : prog_(program), arch_(arch), opt_(options) {
        if (prog_.grid_rows != arch_.grid_rows || prog_.grid_cols != arch_.grid_cols) {
            throw InvalidPlan("program grid does not match the architecture");
        }
        if (prog_.slot_bytes_per_tile(arch_.elem_bytes) > arch_.spm_bytes) {
            throw SpmOverflowAtRuntime(
                "slot working set of " +
                std::to_string(prog_.slot_bytes_per_tile(arch_.elem_bytes)) +
                " bytes exceeds SPM capacity " + std::to_string(arch_.spm_bytes));
        }
        for (const char* name : {"A", "B"}) {
            if (!preload.matrices.contains(name)) throw PreloadMissingMatrix(name);
        }
        a_ = &preload.matrices.at("A");
        b_ = &preload.matrices.at("B");
        if (a_->rows != prog_.shape.m || a_->cols != prog_.shape.k) {
            throw ShapeMismatch("preload A is " + std::to_string(a_->rows) + "x" +
                                std::to_string(a_->cols) + ", program expects " +
                                std::to_string(prog_.shape.m) + "x" +
                                std::to_string(prog_.shape.k));
        }
        if (b_->rows != prog_.shape.k || b_->cols != prog_.shape.n) {
            throw ShapeMismatch("preload B is " + std::to_string(b_->rows) + "x" +
                                std::to_string(b_->cols) + ", program expects " +
                                std::to_string(prog_.shape.k) + "x" +
                                std::to_string(prog_.shape.n));
        }
        for (const char* name : {"A", "B", "C"}) {
            if (!prog_.layouts.contains(name)) throw InvalidPlan("program lacks layout " + std::string(name));
            if (prog_.layouts.at(name).channel_count > arch_.channel_count()) {
                throw InvalidPlan("layout uses more channels than the architecture provides");
            }
        }

        const std::uint32_t tiles = arch_.tile_count();
        engines_.resize(tiles);
        hbm_dma_.resize(tiles);
        noc_dma_.resize(tiles);
        channels_.resize(arch_.channel_count());
        slots_.resize(tiles);
        hazards_.resize(tiles);
        for (std::uint32_t t = 0; t < tiles; ++t) {
            slots_[t].reserve(prog_.slots.size());
            for (const SlotSpec& s : prog_.slots) slots_[t].emplace_back(s.elems(), 0.0);
            hazards_[t].resize(prog_.slots.size());
        }
        c_ = Matrix(prog_.shape.m, prog_.shape.n);
        store_count_.assign(prog_.shape.m * prog_.shape.n, 0);
        report_.hbm_read_by_channel.assign(arch_.channel_count(), 0);
        report_.hbm_written_by_channel.assign(arch_.channel_count(), 0);
        report_.engine_busy_by_tile.assign(tiles, 0);
        report_.hbm_read_by_matrix["A"] = 0;
        report_.hbm_read_by_matrix["B"] = 0;
    }

    ExecResult run() {
        for (std::uint32_t s = 0; s < prog_.steps.size(); ++s) {
            run_superstep(prog_.steps[s], s);
        }
        for (std::uint8_t count : store_count_) {
            if (count != 1) throw InvalidPlan("output element store count != 1");
        }

        report_.total_cycles = step_start_;
        report_.flops_executed = flops_;
        for (std::uint32_t t = 0; t < arch_.tile_count(); ++t) {
            report_.engine_busy_by_tile[t] = engines_[t].busy;
        }
        for (const auto& [key, link] : links_) {
            report_.noc_bytes_by_link[key.first.to_string() + ">" + key.second.to_string()] =
                link.bytes;
        }
        report_.digest = digest();

        ExecResult result;
        result.c = std::move(c_);
        result.report = std::move(report_);
        result.trace = std::move(trace_);
        std::sort(result.trace.begin(), result.trace.end(),
                  [](const TraceRecord& x, const TraceRecord& y) {
                      return std::tie(x.superstep, x.cycle_start, x.tile, x.seq) <
                             std::tie(y.superstep, y.cycle_start, y.tile, y.seq);
                  });
        return result;
    }

private:
    // ---- superstep scheduling ----------------------------------------

    void run_superstep(const Superstep& step, std::uint32_t index) {
        cur_step_ = index;
        step_end_ = step_start_;
        deliveries_.clear();
        collectives_.clear();

        const std::uint32_t tiles = arch_.tile_count();
        std::vector<std::size_t> cursor(tiles, 0);
        std::size_t remaining = 0;
        for (const auto& ops : step.tile_ops) remaining += ops.size();

        while (remaining > 0) {
            std::int64_t best_tile = -1;
            std::uint64_t best_ready = 0;
            for (std::uint32_t t = 0; t < tiles; ++t) {
                if (cursor[t] >= step.tile_ops[t].size()) continue;
                const TileOp& op = step.tile_ops[t][cursor[t]];
                const auto ready = try_ready(t, op);
                if (!ready) continue;
                if (best_tile < 0 || *ready < best_ready) {
                    best_tile = t;
                    best_ready = *ready;
                }
            }
            if (best_tile < 0) {
                throw UnmatchedReceive("superstep " + std::to_string(index) +
                                       " deadlocked: a receive or collective has no "
                                       "matching sender");
            }
            const TileOp& op = step.tile_ops[best_tile][cursor[best_tile]];
            schedule(static_cast<std::uint32_t>(best_tile), op, best_ready);
            cursor[best_tile]++;
            remaining--;
        }

        for (const auto& [tag, cs] : collectives_) {
            if (cs.contributions.size() != cs.members.size()) {
                throw UnmatchedReceive("superstep " + std::to_string(index) +
                                       ": collective reduce tag " + std::to_string(tag) +
                                       " is missing member contributions");
            }
        }

        report_.superstep_end_cycles.push_back(step_end_);
        step_start_ = step_end_;  // barrier
    }

    std::optional<std::uint64_t> try_ready(std::uint32_t tile, const TileOp& op) {
        std::uint64_t ready = step_start_;
        bool ok = true;
        auto read = [&](SlotId s) {
            const SlotHazard& h = hazards_[tile][s];
            if (h.pending) ok = false;
            ready = std::max(ready, h.write_end);
        };
        auto write = [&](SlotId s) {
            const SlotHazard& h = hazards_[tile][s];
            if (h.pending) ok = false;
            ready = std::max(ready, std::max(h.write_end, h.read_end));
        };
        switch (op.kind) {
            case OpKind::HbmLoad:
                write(op.dst_slot);
                break;
            case OpKind::HbmStore:
                read(op.src_slot);
                break;
            case OpKind::MulticastSend:
            case OpKind::NeighborSend:
                read(op.src_slot);
                break;
            case OpKind::Receive: {
                write(op.dst_slot);
                if (!deliveries_.contains(op.tag)) return std::nullopt;
                break;
            }
            case OpKind::CollectiveReduce:
                read(op.src_slot);
                if (tile == tile_index(op.peer)) write(op.dst_slot);
                break;
            case OpKind::Mmad:
                read(op.src_slot);
                read(op.aux_slot);
                write(op.dst_slot);
                break;
            case OpKind::AddReduce:
                read(op.src_slot);
                write(op.dst_slot);
                break;
        }
        if (!ok) return std::nullopt;
        return ready;
    }

    void schedule(std::uint32_t tile, const TileOp& op, std::uint64_t ready) {
        std::string names;
        std::string* trace_names = opt_.collect_trace ? &names : nullptr;
        std::uint64_t end = ready;
        bool deferred = false;

        switch (op.kind) {
            case OpKind::HbmLoad:
                end = do_hbm_load(tile, op, ready, trace_names);
                break;
            case OpKind::HbmStore:
                end = do_hbm_store(tile, op, ready, trace_names);
                break;
            case OpKind::MulticastSend:
                end = do_multicast(tile, op, ready, trace_names);
                break;
            case OpKind::NeighborSend:
                end = do_neighbor_send(tile, op, ready, trace_names);
                break;
            case OpKind::Receive:
                end = do_receive(tile, op, ready);
                break;
            case OpKind::CollectiveReduce:
                deferred = !do_collective(tile, op, ready);
                break;
            case OpKind::Mmad:
                end = do_mmad(tile, op, ready, trace_names);
                break;
            case OpKind::AddReduce:
                end = do_add_reduce(tile, op, ready, trace_names);
                break;
        }

        if (!deferred) {
            step_end_ = std::max(step_end_, end);
            if (opt_.collect_trace && op.kind != OpKind::CollectiveReduce) {
                trace_.push_back(TraceRecord{ready, end, tile_coord(tile), cur_step_,
                                             to_string(op.kind), op.bytes, std::move(names),
                                             seq_++});
            }
        }
    }

    // ---- op implementations -------------------------------------------

    std::uint64_t do_hbm_load(std::uint32_t tile, const TileOp& op, std::uint64_t start,
                              std::string* names) {
        const LayoutDesc& layout = prog_.layouts.at(to_string(op.matrix));
        const std::uint32_t channel = static_cast<std::uint32_t>(
            channel_of_block(op.base_row / layout.block_rows(),
                             op.base_col / layout.block_cols(), layout));

        Walk walk(start, names);
        walk.step(channels_[channel], ceil_div(op.bytes, arch_.hbm_channel_bytes_per_cycle), 0,
                  "ch:" + std::to_string(channel));
        const Route route = xy_route(port_node(arch_, channel), NodeId::tile(tile_coord(tile)));
        const std::uint64_t ser_link = ceil_div(op.bytes, arch_.noc_link_bytes_per_cycle);
        for (const Link& l : route) {
            walk.step(link(l).res, ser_link, arch_.hop_latency_cycles, link_name(l));
            link(l).bytes += op.bytes;
        }
        walk.step(hbm_dma_[tile], ceil_div(op.bytes, arch_.spm_bw_bytes_per_cycle), 0,
                  "dmah:" + tile_coord(tile).row_col_string());

        fill_slot_from_matrix(tile, op);
        report_.hbm_bytes_read += op.bytes;
        report_.hbm_read_by_channel[channel] += op.bytes;
        report_.hbm_read_by_matrix[to_string(op.matrix)] += op.bytes;

        hazards_[tile][op.dst_slot].write_end =
            std::max(hazards_[tile][op.dst_slot].write_end, walk.deliv);
        return walk.deliv;
    }

    std::uint64_t do_hbm_store(std::uint32_t tile, const TileOp& op, std::uint64_t start,
                               std::string* names) {
        const LayoutDesc& layout = prog_.layouts.at("C");
        const std::uint32_t channel = static_cast<std::uint32_t>(
            channel_of_block(op.base_row / layout.block_rows(),
                             op.base_col / layout.block_cols(), layout));

        Walk walk(start, names);
        walk.step(hbm_dma_[tile], ceil_div(op.bytes, arch_.spm_bw_bytes_per_cycle), 0,
                  "dmah:" + tile_coord(tile).row_col_string());
        const Route route = xy_route(NodeId::tile(tile_coord(tile)), port_node(arch_, channel));
        const std::uint64_t ser_link = ceil_div(op.bytes, arch_.noc_link_bytes_per_cycle);
        for (const Link& l : route) {
            walk.step(link(l).res, ser_link, arch_.hop_latency_cycles, link_name(l));
            link(l).bytes += op.bytes;
        }
        walk.step(channels_[channel], ceil_div(op.bytes, arch_.hbm_channel_bytes_per_cycle), 0,
                  "ch:" + std::to_string(channel));

        commit_store(tile, op);
        report_.hbm_bytes_written += op.bytes;
        report_.hbm_written_by_channel[channel] += op.bytes;

        hazards_[tile][op.src_slot].read_end =
            std::max(hazards_[tile][op.src_slot].read_end, walk.deliv);
        return walk.deliv;
    }

    std::uint64_t do_multicast(std::uint32_t tile, const TileOp& op, std::uint64_t start,
                               std::string* names) {
        const std::vector<TileCoord> members =
            resolve_group(op.group, arch_.grid_rows, arch_.grid_cols);
        const CollectiveTree tree = build_multicast_tree(NodeId::tile(tile_coord(tile)), members);

        Resource& dma = noc_dma_[tile];
        const std::uint64_t ser_dma = ceil_div(op.bytes, arch_.spm_bw_bytes_per_cycle);
        const std::uint64_t acq = std::max(start, dma.free);
        dma.free = acq + ser_dma;
        dma.busy += ser_dma;
        if (names) names->append("dman:" + tile_coord(tile).row_col_string());

        // Per-node (head arrival, tail delivery) along the tree.
        std::map<std::uint64_t, std::pair<std::uint64_t, std::uint64_t>> state;
        state[node_key(tree.root)] = {acq, acq + ser_dma};
        const std::uint64_t ser_link = ceil_div(op.bytes, arch_.noc_link_bytes_per_cycle);
        for (const Link& edge : tree.edges) {
            const auto [arr, del] = state.at(node_key(edge.from));
            LinkState& l = link(edge);
            const std::uint64_t eacq = std::max(arr, l.res.free);
            l.res.free = eacq + ser_link;
            l.res.busy += ser_link;
            l.bytes += op.bytes;
            state[node_key(edge.to)] = {eacq + arch_.hop_latency_cycles,
                                        std::max(del, eacq + ser_link) +
                                            arch_.hop_latency_cycles};
            if (names) {
                names->push_back(';');
                names->append(link_name(edge));
            }
        }

        if (names) {
            names->push_back(';');
            names->append("grp:" + op.group.to_string());
        }

        Delivery delivery;
        delivery.payload = slots_[tile][op.src_slot];
        std::uint64_t end = state.at(node_key(tree.root)).second;
        for (const TileCoord& m : tree.members) {
            const std::uint64_t t = state.at(node_key(NodeId::tile(m))).second;
            delivery.at[tile_index(m)] = t;
            end = std::max(end, t);
        }
        // Self delivery into a different slot is a local copy at no NoC cost.
        if (delivery.at.contains(tile) && op.dst_slot != op.src_slot) {
            slots_[tile][op.dst_slot] = delivery.payload;
            hazards_[tile][op.dst_slot].write_end =
                std::max(hazards_[tile][op.dst_slot].write_end, delivery.at[tile]);
        }
        deliveries_[op.tag] = std::move(delivery);

        hazards_[tile][op.src_slot].read_end =
            std::max(hazards_[tile][op.src_slot].read_end, end);
        return end;
    }

    std::uint64_t do_neighbor_send(std::uint32_t tile, const TileOp& op, std::uint64_t start,
                                   std::string* names) {
        const Route route = xy_route(NodeId::tile(tile_coord(tile)), NodeId::tile(op.peer));
        if (route.size() != 1) throw InvalidPlan("neighbor send between non-adjacent tiles");

        Walk walk(start, names);
        walk.step(noc_dma_[tile], ceil_div(op.bytes, arch_.spm_bw_bytes_per_cycle), 0,
                  "dman:" + tile_coord(tile).row_col_string());
        walk.step(link(route[0]).res, ceil_div(op.bytes, arch_.noc_link_bytes_per_cycle),
                  arch_.hop_latency_cycles, link_name(route[0]));
        link(route[0]).bytes += op.bytes;

        Delivery delivery;
        delivery.payload = slots_[tile][op.src_slot];
        delivery.at[tile_index(op.peer)] = walk.deliv;
        deliveries_[op.tag] = std::move(delivery);

        hazards_[tile][op.src_slot].read_end =
            std::max(hazards_[tile][op.src_slot].read_end, walk.deliv);
        return walk.deliv;
    }

    std::uint64_t do_receive(std::uint32_t tile, const TileOp& op, std::uint64_t ready) {
        const Delivery& delivery = deliveries_.at(op.tag);
        const auto it = delivery.at.find(tile);
        if (it == delivery.at.end()) {
            throw UnmatchedReceive("tile " + tile_coord(tile).row_col_string() +
                                   " receives tag " + std::to_string(op.tag) +
                                   " but is not addressed by the send");
        }
        const std::uint64_t end = std::max(ready, it->second);
        auto& slot = slots_[tile][op.dst_slot];
        if (slot.size() != delivery.payload.size()) {
            throw ShapeMismatch("receive payload does not fit the destination slot");
        }
        slot = delivery.payload;
        hazards_[tile][op.dst_slot].write_end =
            std::max(hazards_[tile][op.dst_slot].write_end, end);
        return end;
    }

    // Returns false while contributions are still outstanding; the final
    // instance triggers the tree walk and unblocks the slots.
    bool do_collective(std::uint32_t tile, const TileOp& op, std::uint64_t ready) {
        CollectiveState& cs = collectives_[op.tag];
        if (cs.members.empty()) {
            cs.group = op.group;
            cs.dst = op.peer;
            cs.dst_slot = op.dst_slot;
            cs.bytes = op.bytes;
            cs.members = resolve_group(op.group, arch_.grid_rows, arch_.grid_cols);
        }
        bool is_member = false;
        for (const TileCoord& m : cs.members) is_member = is_member || tile_index(m) == tile;
        if (!is_member || cs.contributions.contains(tile)) {
            throw UnmatchedReceive("unexpected collective contribution from tile " +
                                   tile_coord(tile).row_col_string());
        }
        cs.contributions[tile] = Contribution{ready, slots_[tile][op.src_slot]};
        cs.instance_starts.emplace_back(tile, ready);
        hazards_[tile][op.src_slot].pending = true;
        if (tile == tile_index(cs.dst)) hazards_[tile][cs.dst_slot].pending = true;

        if (cs.contributions.size() == cs.members.size()) {
            finalize_collective(op.tag, op.src_slot);
            return true;
        }
        return false;
    }

    void finalize_collective(std::uint32_t tag, SlotId src_slot) {
        CollectiveState& cs = collectives_.at(tag);
        const NodeId root = NodeId::tile(cs.dst);
        const CollectiveTree tree = build_reduce_tree(cs.members, root);
        const std::uint64_t ser_link = ceil_div(cs.bytes, arch_.noc_link_bytes_per_cycle);
        const std::uint64_t ser_dma = ceil_div(cs.bytes, arch_.spm_bw_bytes_per_cycle);
        std::string names;
        std::string* trace_names = opt_.collect_trace ? &names : nullptr;

        // Leaf contributions drain through each member's NoC DMA, then flow
        // root-ward; an edge starts once its whole subtree has arrived and
        // interior combines add no extra cycles.
        std::map<std::uint64_t, std::uint64_t> node_ready;
        for (const TileCoord& m : cs.members) {
            const std::uint32_t idx = tile_index(m);
            Resource& dma = noc_dma_[idx];
            const std::uint64_t acq = std::max(cs.contributions.at(idx).ready, dma.free);
            dma.free = acq + ser_dma;
            dma.busy += ser_dma;
            node_ready[node_key(NodeId::tile(m))] = acq + ser_dma;
            if (trace_names) {
                if (!names.empty()) names.push_back(';');
                names.append("dman:" + m.row_col_string());
            }
        }
        for (auto it = tree.edges.rbegin(); it != tree.edges.rend(); ++it) {
            const Link& edge = *it;  // child -> parent
            LinkState& l = link(edge);
            const std::uint64_t child_ready = node_ready[node_key(edge.from)];
            const std::uint64_t acq = std::max(child_ready, l.res.free);
            l.res.free = acq + ser_link;
            l.res.busy += ser_link;
            l.bytes += cs.bytes;
            std::uint64_t& parent = node_ready[node_key(edge.to)];
            parent = std::max(parent, acq + ser_link + arch_.hop_latency_cycles);
            if (trace_names) {
                names.push_back(';');
                names.append(link_name(edge));
            }
        }
        const std::uint64_t done = node_ready[node_key(root)];
        if (trace_names) {
            names.push_back(';');
            names.append("grp:" + cs.group.to_string());
        }

        // Elementwise sum in tree post-order: own contribution first, then
        // each child subtree in edge-insertion order.
        std::map<std::uint64_t, std::vector<NodeId>> children;
        for (const Link& edge : tree.edges) children[node_key(edge.to)].push_back(edge.from);
        std::vector<double> total = reduce_subtree(root, children, cs);
        const std::uint32_t dst_idx = tile_index(cs.dst);
        slots_[dst_idx][cs.dst_slot] = std::move(total);

        for (const TileCoord& m : cs.members) {
            const std::uint32_t idx = tile_index(m);
            SlotHazard& h = hazards_[idx][src_slot];
            h.pending = false;
            h.read_end = std::max(h.read_end, done);
        }
        SlotHazard& dst_hazard = hazards_[dst_idx][cs.dst_slot];
        dst_hazard.pending = false;
        dst_hazard.write_end = std::max(dst_hazard.write_end, done);

        step_end_ = std::max(step_end_, done);
        if (opt_.collect_trace) {
            for (const auto& [tile, start] : cs.instance_starts) {
                trace_.push_back(TraceRecord{start, done, tile_coord(tile), cur_step_,
                                             to_string(OpKind::CollectiveReduce), cs.bytes,
                                             names, seq_++});
            }
        }
    }

    std::vector<double> reduce_subtree(NodeId node,
                                       const std::map<std::uint64_t, std::vector<NodeId>>& children,
                                       const CollectiveState& cs) {
        std::vector<double> acc;
        const bool member = node.is_tile() &&
                            std::binary_search(cs.members.begin(), cs.members.end(), node.coord);
        if (member) {
            acc = cs.contributions.at(tile_index(node.coord)).values;
        }
        const auto it = children.find(node_key(node));
        if (it != children.end()) {
            for (const NodeId& child : it->second) {
                std::vector<double> sub = reduce_subtree(child, children, cs);
                if (acc.empty()) {
                    acc = std::move(sub);
                } else {
                    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += sub[i];
                }
            }
        }
        return acc;
    }

    std::uint64_t do_mmad(std::uint32_t tile, const TileOp& op, std::uint64_t ready,
                          std::string* names) {
        Resource& engine = engines_[tile];
        const std::uint64_t latency =
            arch_.mmad_startup_cycles +
            ceil_div(op.mm_rows, arch_.engine_rows) * ceil_div(op.mm_cols, arch_.engine_cols) *
                op.mm_depth;
        const std::uint64_t acq = std::max(ready, engine.free);
        engine.free = acq + latency;
        engine.busy += latency;
        if (names) names->append("eng:" + tile_coord(tile).row_col_string());

        const auto& a = slots_[tile][op.src_slot];
        const auto& b = slots_[tile][op.aux_slot];
        auto& c = slots_[tile][op.dst_slot];
        const std::uint32_t rows = prog_.slots[op.src_slot].rows;
        const std::uint32_t depth = prog_.slots[op.src_slot].cols;
        const std::uint32_t cols = prog_.slots[op.aux_slot].cols;
        for (std::uint32_t i = 0; i < rows; ++i) {
            for (std::uint32_t kk = 0; kk < depth; ++kk) {
                const double av = a[i * depth + kk];
                if (av == 0.0) continue;
                const double* brow = &b[static_cast<std::size_t>(kk) * cols];
                double* crow = &c[static_cast<std::size_t>(i) * cols];
                for (std::uint32_t j = 0; j < cols; ++j) crow[j] += av * brow[j];
            }
        }
        flops_ += op.flops;

        hazards_[tile][op.src_slot].read_end =
            std::max(hazards_[tile][op.src_slot].read_end, acq + latency);
        hazards_[tile][op.aux_slot].read_end =
            std::max(hazards_[tile][op.aux_slot].read_end, acq + latency);
        hazards_[tile][op.dst_slot].write_end =
            std::max(hazards_[tile][op.dst_slot].write_end, acq + latency);
        return acq + latency;
    }

    std::uint64_t do_add_reduce(std::uint32_t tile, const TileOp& op, std::uint64_t ready,
                                std::string* names) {
        Resource& engine = engines_[tile];
        const SlotSpec& spec = prog_.slots[op.dst_slot];
        const std::uint64_t latency =
            ceil_div(spec.rows, arch_.engine_rows) * ceil_div(spec.cols, arch_.engine_cols);
        const std::uint64_t acq = std::max(ready, engine.free);
        engine.free = acq + latency;
        engine.busy += latency;
        if (names) names->append("eng:" + tile_coord(tile).row_col_string());

        const auto& src = slots_[tile][op.src_slot];
        auto& dst = slots_[tile][op.dst_slot];
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];

        hazards_[tile][op.src_slot].read_end =
            std::max(hazards_[tile][op.src_slot].read_end, acq + latency);
        hazards_[tile][op.dst_slot].write_end =
            std::max(hazards_[tile][op.dst_slot].write_end, acq + latency);
        return acq + latency;
    }

    // ---- functional helpers -------------------------------------------

    void fill_slot_from_matrix(std::uint32_t tile, const TileOp& op) {
        const Matrix& src = op.matrix == MatrixOperand::A ? *a_ : *b_;
        const SlotSpec& spec = prog_.slots[op.dst_slot];
        auto& slot = slots_[tile][op.dst_slot];
        std::fill(slot.begin(), slot.end(), 0.0);
        if (op.base_row >= src.rows || op.base_col >= src.cols) return;
        const std::uint64_t rows = std::min<std::uint64_t>(spec.rows, src.rows - op.base_row);
        const std::uint64_t cols = std::min<std::uint64_t>(spec.cols, src.cols - op.base_col);
        for (std::uint64_t r = 0; r < rows; ++r) {
            const double* from = &src.data[(op.base_row + r) * src.cols + op.base_col];
            double* to = &slot[r * spec.cols];
            std::copy(from, from + cols, to);
        }
    }

    void commit_store(std::uint32_t tile, const TileOp& op) {
        const SlotSpec& spec = prog_.slots[op.src_slot];
        const auto& slot = slots_[tile][op.src_slot];
        if (op.base_row >= c_.rows || op.base_col >= c_.cols) return;
        const std::uint64_t rows = std::min<std::uint64_t>(spec.rows, c_.rows - op.base_row);
        const std::uint64_t cols = std::min<std::uint64_t>(spec.cols, c_.cols - op.base_col);
        for (std::uint64_t r = 0; r < rows; ++r) {
            for (std::uint64_t c = 0; c < cols; ++c) {
                c_.at(op.base_row + r, op.base_col + c) = slot[r * spec.cols + c];
                store_count_[(op.base_row + r) * c_.cols + op.base_col + c]++;
            }
        }
    }

    std::uint64_t digest() const {
        std::uint64_t h = 1469598103934665603ull;  // FNV-1a
        auto mix = [&h](const void* data, std::size_t size) {
            const auto* bytes = static_cast<const unsigned char*>(data);
            for (std::size_t i = 0; i < size; ++i) {
                h ^= bytes[i];
                h *= 1099511628211ull;
            }
        };
        mix(c_.data.data(), c_.data.size() * sizeof(double));
        const std::uint64_t fields[] = {step_start_, flops_, report_.hbm_bytes_read,
                                        report_.hbm_bytes_written};
        mix(fields, sizeof(fields));
        return h;
    }

    // ---- small utilities ----------------------------------------------

    TileCoord tile_coord(std::uint32_t index) const {
        return TileCoord{index / arch_.grid_cols, index % arch_.grid_cols};
    }
    std::uint32_t tile_index(TileCoord t) const { return t.row * arch_.grid_cols + t.col; }
    std::uint64_t node_key(NodeId n) const { return n.key(arch_.grid_cols); }

    LinkState& link(const Link& l) { return links_[{l.from, l.to}]; }
    static std::string link_name(const Link& l) {
        return "l:" + l.from.to_string() + ">" + l.to.to_string();
    }

    const BspProgram& prog_;
    const ArchConfig& arch_;
    const ExecOptions& opt_;
    const Matrix* a_ = nullptr;
    const Matrix* b_ = nullptr;
    Matrix c_;
    std::vector<std::uint8_t> store_count_;

    std::vector<std::vector<std::vector<double>>> slots_;
    std::vector<std::vector<SlotHazard>> hazards_;
    std::vector<Resource> engines_, hbm_dma_, noc_dma_, channels_;
    std::map<std::pair<NodeId, NodeId>, LinkState> links_;

    std::map<std::uint32_t, Delivery> deliveries_;
    std::map<std::uint32_t, CollectiveState> collectives_;

    SimReport report_;
    std::vector<TraceRecord> trace_;
    std::uint64_t flops_ = 0;
    std::uint64_t seq_ = 0;
    std::uint64_t step_start_ = 0;
    std::uint64_t step_end_ = 0;
    std::uint32_t cur_step_ = 0;
};

}  // namespace

ExecResult execute(const BspProgram& program, const ArchConfig& arch, const Preload& preload,
                   const ExecOptions& options) {
    Executor executor(program, arch, preload, options);
    return executor.run();
}

std::string SimReport::serialize() const {
    std::ostringstream out;
    out << "total_cycles=" << total_cycles << "\n";
    out << "flops_executed=" << flops_executed << "\n";
    out << "hbm_bytes_read=" << hbm_bytes_read << "\n";
    out << "hbm_bytes_written=" << hbm_bytes_written << "\n";
    out << "hbm_read_by_matrix=";
    for (const auto& [name, bytes] : hbm_read_by_matrix) out << name << ":" << bytes << ",";
    out << "\n";
    out << "hbm_read_by_channel=";
    for (std::uint64_t v : hbm_read_by_channel) out << v << ",";
    out << "\n";
    out << "hbm_written_by_channel=";
    for (std::uint64_t v : hbm_written_by_channel) out << v << ",";
    out << "\n";
    out << "engine_busy_by_tile=";
    for (std::uint64_t v : engine_busy_by_tile) out << v << ",";
    out << "\n";
    out << "superstep_end_cycles=";
    for (std::uint64_t v : superstep_end_cycles) out << v << ",";
    out << "\n";
    out << "noc_bytes_by_link=";
    for (const auto& [name, bytes] : noc_bytes_by_link) out << name << ":" << bytes << ",";
    out << "\n";
    out << "ordering=" << ordering_tag << "\n";
    out << "digest=" << digest << "\n";
    return out.str();
}

std::string trace_to_csv(const std::vector<TraceRecord>& trace) {
    std::ostringstream out;
    out << "cycle_start,cycle_end,tile,superstep,op_kind,bytes,resource_list\n";
    for (const TraceRecord& r : trace) {
        out << r.cycle_start << "," << r.cycle_end << "," << r.tile.row << "." << r.tile.col
            << "," << r.superstep << "," << r.op_kind << "," << r.bytes << "," << r.resources
            << "\n";
    }
    return out.str();
}

Matrix reference_gemm(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw ShapeMismatch("reference_gemm: inner dimensions disagree");
    Matrix c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t j = 0; j < b.cols; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) {
                acc += a.at(i, k) * b.at(k, j);
            }
            c.at(i, j) = acc;
        }
    }
    return c;
}

VerifyResult verify(const Matrix& c, const Matrix& a, const Matrix& b, double rtol, double atol) {
    if (a.cols != b.rows || c.rows != a.rows || c.cols != b.cols) {
        throw ShapeMismatch("verify: operand shapes disagree");
    }
    const Matrix oracle = reference_gemm(a, b);
    VerifyResult result;
    result.pass = true;
    for (std::size_t i = 0; i < c.data.size(); ++i) {
        const double err = std::abs(c.data[i] - oracle.data[i]);
        result.max_abs_err = std::max(result.max_abs_err, err);
        if (err > atol + rtol * std::abs(oracle.data[i])) result.pass = false;
    }
    return result;
}

}  // namespace tilesim
