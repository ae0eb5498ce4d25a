#include <tilesim/schedule.hpp>

#include <bit>
#include <fstream>
#include <sstream>

namespace tilesim {

namespace {

bool is_power_of_two(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

std::uint64_t ceil_div(std::uint64_t a, std::uint64_t b) { return (a + b - 1) / b; }

}  // namespace

std::string to_string(Dataflow df) {
    switch (df) {
        case Dataflow::Baseline: return "baseline";
        case Dataflow::Summa: return "summa";
        case Dataflow::Systolic: return "systolic";
        case Dataflow::SystolicOverSumma: return "systolic_over_summa";
        case Dataflow::SummaOverSystolic: return "summa_over_systolic";
        case Dataflow::SplitKSumma: return "splitk_summa";
    }
    return "unknown";
}

Dataflow dataflow_from_string(const std::string& s) {
    if (s == "baseline") return Dataflow::Baseline;
    if (s == "summa") return Dataflow::Summa;
    if (s == "systolic") return Dataflow::Systolic;
    if (s == "systolic_over_summa") return Dataflow::SystolicOverSumma;
    if (s == "summa_over_systolic") return Dataflow::SummaOverSystolic;
    if (s == "splitk_summa") return Dataflow::SplitKSumma;
    throw ParseError("unknown dataflow: " + s);
}

std::string to_string(ReductionPolicy p) {
    return p == ReductionPolicy::LowestSliceCommits ? "lowest_slice_commits" : "rotate_commits";
}

ReductionPolicy reduction_policy_from_string(const std::string& s) {
    if (s == "lowest_slice_commits") return ReductionPolicy::LowestSliceCommits;
    if (s == "rotate_commits") return ReductionPolicy::RotateCommits;
    throw ParseError("unknown reduction policy: " + s);
}

TileCoord LogicalRemap::to_physical(std::uint32_t lr, std::uint32_t lc, std::uint32_t ks) const {
    const std::uint64_t v =
        (static_cast<std::uint64_t>(lr) * cols + lc) * k_split + ks;
    return TileCoord{static_cast<std::uint32_t>(v / phys_cols),
                     static_cast<std::uint32_t>(v % phys_cols)};
}

LogicalRemap::Logical LogicalRemap::to_logical(TileCoord t) const {
    const std::uint64_t v = static_cast<std::uint64_t>(t.row) * phys_cols + t.col;
    Logical l;
    l.ks = static_cast<std::uint32_t>(v % k_split);
    const std::uint64_t plane = v / k_split;
    l.lc = static_cast<std::uint32_t>(plane % cols);
    l.lr = static_cast<std::uint32_t>(plane / cols);
    return l;
}

LogicalRemap remap_indices(std::uint32_t phys_rows, std::uint32_t phys_cols,
                           std::uint32_t logical_rows, std::uint32_t logical_cols,
                           std::uint32_t k_split) {
    for (std::uint32_t d : {phys_rows, phys_cols, logical_rows, logical_cols, k_split}) {
        if (!is_power_of_two(d)) {
            throw IncompatibleDims("remap dimensions must be powers of two");
        }
    }
    const std::uint64_t phys = static_cast<std::uint64_t>(phys_rows) * phys_cols;
    const std::uint64_t logical =
        static_cast<std::uint64_t>(logical_rows) * logical_cols * k_split;
    if (phys != logical) {
        throw IncompatibleDims("physical grid holds " + std::to_string(phys) +
                               " tiles but logical space needs " + std::to_string(logical));
    }
    return LogicalRemap{phys_rows, phys_cols, logical_rows, logical_cols, k_split};
}

Tiling derive_tiling(const GemmShape& shape, const Mapping& mapping, std::uint64_t tk) {
    if (tk == 0) throw NonPositiveValue("tiling.tk");
    Tiling t;
    t.tm = ceil_div(shape.m, mapping.logical_rows);
    t.tn = ceil_div(shape.n, mapping.logical_cols);
    t.tk = tk;
    t.padded_m = t.tm * mapping.logical_rows;
    t.padded_n = t.tn * mapping.logical_cols;
    const std::uint64_t slice_k = ceil_div(shape.k, mapping.k_split);
    t.k_steps_per_slice = ceil_div(slice_k, tk);
    return t;
}

std::uint64_t spm_budget(const SchedulePlan& plan, const ArchConfig& arch) {
    const std::uint64_t eb = arch.elem_bytes;
    const std::uint64_t a = plan.tiling.tm * plan.tiling.tk * eb;
    const std::uint64_t b = plan.tiling.tk * plan.tiling.tn * eb;
    const std::uint64_t c = plan.tiling.tm * plan.tiling.tn * eb;
    return (a + b) * (plan.double_buffered ? 2 : 1) + c;
}

void validate_plan(const SchedulePlan& plan, const ArchConfig& arch) {
    if (plan.shape.m == 0 || plan.shape.n == 0 || plan.shape.k == 0) {
        throw InvalidPlan("GEMM shape dimensions must be positive");
    }
    const Mapping& map = plan.mapping;
    // remap_indices enforces powers of two and the tile-count product.
    remap_indices(arch.grid_rows, arch.grid_cols, map.logical_rows, map.logical_cols,
                  map.k_split);

    if (plan.tiling.tm == 0 || plan.tiling.tn == 0 || plan.tiling.tk == 0) {
        throw InvalidPlan("tiling dimensions must be positive");
    }

    const bool hierarchical = plan.dataflow == Dataflow::SystolicOverSumma ||
                              plan.dataflow == Dataflow::SummaOverSystolic;
    if (hierarchical) {
        if (plan.group_rows <= 1 || plan.group_cols <= 1) {
            throw InvalidPlan("hierarchical dataflows need group dims > 1");
        }
        if (!is_power_of_two(plan.group_rows) || !is_power_of_two(plan.group_cols)) {
            throw InvalidPlan("group dims must be powers of two");
        }
        if (map.logical_rows % plan.group_rows != 0 ||
            map.logical_cols % plan.group_cols != 0) {
            throw InvalidPlan("group dims must divide the logical grid");
        }
    } else if (plan.group_rows != 1 || plan.group_cols != 1) {
        throw InvalidPlan("group dims apply to hierarchical dataflows only");
    }

    if (plan.dataflow == Dataflow::SplitKSumma) {
        if (map.k_split <= 1) throw InvalidPlan("splitk_summa requires k_split > 1");
    } else if (map.k_split != 1) {
        throw InvalidPlan(to_string(plan.dataflow) + " requires k_split = 1");
    }

    for (const char* name : {"A", "B", "C"}) {
        const auto it = plan.layouts.find(name);
        if (it == plan.layouts.end()) throw InvalidPlan(std::string("missing layout for ") + name);
        const LayoutDesc& d = it->second;
        d.validate(name);
        if (d.channel_count > arch.channel_count()) {
            throw InvalidPlan(std::string("layout.") + name +
                              " uses more channels than the architecture provides");
        }
        // Layout tile dims must match the workload tiling so every program
        // rectangle lands in a single block on a single channel.
        const bool a = std::string(name) == "A";
        const bool b = std::string(name) == "B";
        const std::uint64_t want_rows = a ? plan.shape.m : (b ? plan.shape.k : plan.shape.m);
        const std::uint64_t want_cols = a ? plan.shape.k : (b ? plan.shape.n : plan.shape.n);
        const std::uint64_t want_tr = a ? plan.tiling.tm : (b ? plan.tiling.tk : plan.tiling.tm);
        const std::uint64_t want_tc = a ? plan.tiling.tk : (b ? plan.tiling.tn : plan.tiling.tn);
        if (d.matrix_rows != want_rows || d.matrix_cols != want_cols ||
            d.tile_rows != want_tr || d.tile_cols != want_tc) {
            throw InvalidPlan(std::string("layout.") + name +
                              " dims disagree with the shape/tiling");
        }
    }

    if (spm_budget(plan, arch) > arch.spm_bytes) {
        throw SpmOverflow(spm_budget(plan, arch), arch.spm_bytes);
    }
}

namespace {

LayoutDesc layout_for(const std::string& name, const GemmShape& shape, const Tiling& tiling,
                      SplitScheme split, std::uint32_t channels, std::uint32_t start) {
    LayoutDesc d;
    if (name == "A") {
        d.matrix_rows = shape.m;
        d.matrix_cols = shape.k;
        d.tile_rows = static_cast<std::uint32_t>(tiling.tm);
        d.tile_cols = static_cast<std::uint32_t>(tiling.tk);
    } else if (name == "B") {
        d.matrix_rows = shape.k;
        d.matrix_cols = shape.n;
        d.tile_rows = static_cast<std::uint32_t>(tiling.tk);
        d.tile_cols = static_cast<std::uint32_t>(tiling.tn);
    } else {
        d.matrix_rows = shape.m;
        d.matrix_cols = shape.n;
        d.tile_rows = static_cast<std::uint32_t>(tiling.tm);
        d.tile_cols = static_cast<std::uint32_t>(tiling.tn);
    }
    d.split = split;
    d.channel_count = channels;
    d.channel_start = start;
    return d;
}

}  // namespace

SchedulePlan parse_schedule(const std::string& text, const ArchConfig& arch) {
    const auto kv = parse_kv_document(text);

    auto get = [&kv](const std::string& key) -> const std::string& {
        const auto it = kv.find(key);
        if (it == kv.end()) throw MissingField(key);
        return it->second;
    };
    auto get_or = [&kv](const std::string& key, const std::string& fallback) {
        const auto it = kv.find(key);
        return it == kv.end() ? fallback : it->second;
    };
    auto integer = [](const std::string& key, const std::string& value) -> std::uint64_t {
        try {
            std::size_t pos = 0;
            const std::uint64_t v = std::stoull(value, &pos);
            if (pos != value.size()) throw ParseError("");
            return v;
        } catch (const std::exception&) {
            throw ParseError("bad integer for " + key + ": " + value);
        }
    };

    SchedulePlan plan;
    plan.shape.m = integer("shape.m", get("shape.m"));
    plan.shape.n = integer("shape.n", get("shape.n"));
    plan.shape.k = integer("shape.k", get("shape.k"));
    plan.mapping.logical_rows =
        static_cast<std::uint32_t>(integer("mapping.logical_rows", get("mapping.logical_rows")));
    plan.mapping.logical_cols =
        static_cast<std::uint32_t>(integer("mapping.logical_cols", get("mapping.logical_cols")));
    plan.mapping.k_split =
        static_cast<std::uint32_t>(integer("mapping.k_split", get_or("mapping.k_split", "1")));
    plan.mapping.reduction_policy = reduction_policy_from_string(
        get_or("mapping.reduction_policy", "lowest_slice_commits"));
    plan.dataflow = dataflow_from_string(get("dataflow"));
    plan.group_rows = static_cast<std::uint32_t>(integer("group_rows", get_or("group_rows", "1")));
    plan.group_cols = static_cast<std::uint32_t>(integer("group_cols", get_or("group_cols", "1")));
    const std::string db = get_or("double_buffered", "false");
    if (db != "true" && db != "false") throw ParseError("double_buffered must be true or false");
    plan.double_buffered = db == "true";

    if (plan.mapping.logical_rows == 0 || plan.mapping.logical_cols == 0 ||
        plan.mapping.k_split == 0) {
        throw NonPositiveValue("mapping");
    }
    plan.tiling = derive_tiling(plan.shape, plan.mapping, integer("tiling.tk", get("tiling.tk")));

    for (const char* name : {"A", "B", "C"}) {
        const std::string prefix = std::string("layout.") + name + ".";
        SplitScheme split{1, 1};
        const std::string split_text = get_or(prefix + "split", "1x1");
        const std::size_t x = split_text.find('x');
        if (x == std::string::npos) throw ParseError("bad split for " + prefix + "split");
        split.rows = static_cast<std::uint32_t>(integer(prefix + "split", split_text.substr(0, x)));
        split.cols =
            static_cast<std::uint32_t>(integer(prefix + "split", split_text.substr(x + 1)));
        const std::uint32_t channels =
            static_cast<std::uint32_t>(integer(prefix + "channels", get_or(prefix + "channels", "1")));
        const std::uint32_t start =
            static_cast<std::uint32_t>(integer(prefix + "start", get_or(prefix + "start", "0")));
        plan.layouts[name] = layout_for(name, plan.shape, plan.tiling, split, channels, start);
    }

    // Reject typos: every key must be known.
    for (const auto& [key, value] : kv) {
        static const char* known[] = {
            "shape.m", "shape.n", "shape.k", "mapping.logical_rows", "mapping.logical_cols",
            "mapping.k_split", "mapping.reduction_policy", "tiling.tk", "dataflow",
            "group_rows", "group_cols", "double_buffered"};
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        for (const char* m : {"A", "B", "C"}) {
            const std::string prefix = std::string("layout.") + m + ".";
            ok = ok || key == prefix + "split" || key == prefix + "channels" ||
                 key == prefix + "start";
        }
        if (!ok) throw ParseError("unknown schedule key: " + key);
    }

    validate_plan(plan, arch);
    return plan;
}

SchedulePlan parse_schedule_file(const std::string& path, const ArchConfig& arch) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open schedule file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_schedule(ss.str(), arch);
}

}  // namespace tilesim
