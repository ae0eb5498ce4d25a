#include <tilesim/arch_config.hpp>

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace tilesim {

namespace {

bool is_power_of_two(std::uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

// Integer with optional K/M binary suffix.
std::uint64_t parse_size(const std::string& key, const std::string& value) {
    std::string v = value;
    std::uint64_t mult = 1;
    if (!v.empty() && (v.back() == 'K' || v.back() == 'k')) {
        mult = 1024;
        v.pop_back();
    } else if (!v.empty() && (v.back() == 'M' || v.back() == 'm')) {
        mult = 1024 * 1024;
        v.pop_back();
    }
    v = trim(v);
    if (v.empty() || v[0] == '-') throw ParseError("bad integer for key " + key + ": " + value);
    char* end = nullptr;
    const std::uint64_t n = std::strtoull(v.c_str(), &end, 10);
    if (end == nullptr || *end != '\0') throw ParseError("bad integer for key " + key + ": " + value);
    return n * mult;
}

double parse_real(const std::string& key, const std::string& value) {
    char* end = nullptr;
    const double d = std::strtod(value.c_str(), &end);
    if (end == nullptr || *end != '\0') throw ParseError("bad number for key " + key + ": " + value);
    return d;
}

}  // namespace

std::pair<std::uint32_t, std::uint32_t> ArchConfig::channel_attach(std::uint32_t channel) const {
    if (channel < hbm_channels_west) {
        const std::uint32_t row = channel * grid_rows / hbm_channels_west;
        return {row, 0};
    }
    const std::uint32_t s = channel - hbm_channels_west;
    const std::uint32_t col = s * grid_cols / hbm_channels_south;
    return {grid_rows - 1, col};
}

// Shared with schedule files: split `key = value` lines into a map.
std::map<std::string, std::string> parse_kv_document(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected `key = value`: " + line);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ParseError("empty key in line: " + line);
        kv[key] = value;
    }
    return kv;
}

ArchConfig load_config(const std::string& text) {
    const auto kv = parse_kv_document(text);

    static const char* known[] = {
        "grid_rows", "grid_cols", "engine_rows", "engine_cols", "clock_ghz",
        "spm_bytes", "spm_bw_bytes_per_cycle", "noc_link_bytes_per_cycle",
        "hop_latency_cycles", "hbm_channels_west", "hbm_channels_south",
        "hbm_channel_bytes_per_cycle", "elem_bytes", "mmad_startup_cycles"};
    for (const auto& [key, value] : kv) {
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw ParseError("unknown configuration key: " + key);
    }

    auto require = [&kv](const std::string& key) -> const std::string& {
        auto it = kv.find(key);
        if (it == kv.end()) throw MissingField(key);
        return it->second;
    };
    auto positive = [&](const std::string& key) {
        const std::uint64_t n = parse_size(key, require(key));
        if (n == 0) throw NonPositiveValue(key);
        return n;
    };
    auto non_negative = [&](const std::string& key, std::uint64_t fallback,
                            bool required) -> std::uint64_t {
        auto it = kv.find(key);
        if (it == kv.end()) {
            if (required) throw MissingField(key);
            return fallback;
        }
        return parse_size(key, it->second);
    };

    ArchConfig cfg;
    cfg.grid_rows = static_cast<std::uint32_t>(positive("grid_rows"));
    cfg.grid_cols = static_cast<std::uint32_t>(positive("grid_cols"));
    cfg.engine_rows = static_cast<std::uint32_t>(positive("engine_rows"));
    cfg.engine_cols = static_cast<std::uint32_t>(positive("engine_cols"));
    cfg.clock_ghz = parse_real("clock_ghz", require("clock_ghz"));
    if (cfg.clock_ghz <= 0.0) throw NonPositiveValue("clock_ghz");
    cfg.spm_bytes = positive("spm_bytes");
    cfg.spm_bw_bytes_per_cycle = positive("spm_bw_bytes_per_cycle");
    cfg.noc_link_bytes_per_cycle = positive("noc_link_bytes_per_cycle");
    cfg.hop_latency_cycles =
        static_cast<std::uint32_t>(non_negative("hop_latency_cycles", 0, true));
    cfg.hbm_channels_west =
        static_cast<std::uint32_t>(non_negative("hbm_channels_west", 0, true));
    cfg.hbm_channels_south =
        static_cast<std::uint32_t>(non_negative("hbm_channels_south", 0, true));
    cfg.hbm_channel_bytes_per_cycle = positive("hbm_channel_bytes_per_cycle");
    cfg.elem_bytes = static_cast<std::uint32_t>(positive("elem_bytes"));
    cfg.mmad_startup_cycles =
        static_cast<std::uint32_t>(non_negative("mmad_startup_cycles", 0, false));

    if (!is_power_of_two(cfg.grid_rows)) throw NonPowerOfTwoGrid("grid_rows");
    if (!is_power_of_two(cfg.grid_cols)) throw NonPowerOfTwoGrid("grid_cols");
    if (cfg.hbm_channels_west > cfg.grid_rows) throw ChannelCountExceedsEdge("hbm_channels_west");
    if (cfg.hbm_channels_south > cfg.grid_cols) throw ChannelCountExceedsEdge("hbm_channels_south");
    return cfg;
}

ArchConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoFailure("cannot open configuration file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_config(ss.str());
}

std::string serialize_config(const ArchConfig& cfg) {
    std::ostringstream out;
    out.precision(17);
    out << "grid_rows = " << cfg.grid_rows << "\n"
        << "grid_cols = " << cfg.grid_cols << "\n"
        << "engine_rows = " << cfg.engine_rows << "\n"
        << "engine_cols = " << cfg.engine_cols << "\n"
        << "clock_ghz = " << cfg.clock_ghz << "\n"
        << "spm_bytes = " << cfg.spm_bytes << "\n"
        << "spm_bw_bytes_per_cycle = " << cfg.spm_bw_bytes_per_cycle << "\n"
        << "noc_link_bytes_per_cycle = " << cfg.noc_link_bytes_per_cycle << "\n"
        << "hop_latency_cycles = " << cfg.hop_latency_cycles << "\n"
        << "hbm_channels_west = " << cfg.hbm_channels_west << "\n"
        << "hbm_channels_south = " << cfg.hbm_channels_south << "\n"
        << "hbm_channel_bytes_per_cycle = " << cfg.hbm_channel_bytes_per_cycle << "\n"
        << "elem_bytes = " << cfg.elem_bytes << "\n"
        << "mmad_startup_cycles = " << cfg.mmad_startup_cycles << "\n";
    return out.str();
}

double peak_flops(const ArchConfig& cfg) {
    return static_cast<double>(cfg.grid_rows) * cfg.grid_cols * cfg.engine_rows *
           cfg.engine_cols * 2.0 * cfg.clock_ghz * 1e9;
}

double peak_hbm_bw(const ArchConfig& cfg) {
    return static_cast<double>(cfg.channel_count()) *
           static_cast<double>(cfg.hbm_channel_bytes_per_cycle) * cfg.clock_ghz * 1e9;
}

}  // namespace tilesim
