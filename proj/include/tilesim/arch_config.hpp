#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>

#include <tilesim/errors.hpp>

namespace tilesim {

// Split a line-oriented `key = value` document ('#' comments) into a map.
// Shared by configuration, schedule, and candidate-list parsers.
std::map<std::string, std::string> parse_kv_document(const std::string& text);

// Full hardware description of the tile grid: compute-element array per
// tile, scratchpad, NoC link width, and edge-attached HBM channels.
// Immutable after construction; safe to share across concurrent simulations.
struct ArchConfig {
    std::uint32_t grid_rows = 0;  // tiles per column (power of two)
    std::uint32_t grid_cols = 0;  // tiles per row (power of two)
    std::uint32_t engine_rows = 0;  // MAC array rows per tile
    std::uint32_t engine_cols = 0;  // MAC array cols per tile
    double clock_ghz = 0.0;         // shared clock for engine, NoC and HBM
    std::uint64_t spm_bytes = 0;
    std::uint64_t spm_bw_bytes_per_cycle = 0;
    std::uint64_t noc_link_bytes_per_cycle = 0;  // per directed link
    std::uint32_t hop_latency_cycles = 0;
    std::uint32_t hbm_channels_west = 0;
    std::uint32_t hbm_channels_south = 0;
    std::uint64_t hbm_channel_bytes_per_cycle = 0;
    std::uint32_t elem_bytes = 0;            // timing width of one element
    std::uint32_t mmad_startup_cycles = 0;   // fixed per-MMAD overhead

    std::uint32_t channel_count() const { return hbm_channels_west + hbm_channels_south; }
    std::uint32_t tile_count() const { return grid_rows * grid_cols; }

    // Router a channel attaches to. West channels spread down the west edge,
    // south channels across the south edge, stride grid/side count.
    std::pair<std::uint32_t, std::uint32_t> channel_attach(std::uint32_t channel) const;
};

// Parse a line-oriented `key = value` document ('#' comments, K/M binary
// suffixes on sizes). Keys match the field names above. Throws MissingField,
// NonPositiveValue, NonPowerOfTwoGrid, ChannelCountExceedsEdge or ParseError,
// each naming the offending key.
ArchConfig load_config(const std::string& text);

ArchConfig load_config_file(const std::string& path);

// Canonical textual form; load_config(serialize_config(c)) == c.
std::string serialize_config(const ArchConfig& cfg);

// grid_rows * grid_cols * Em * En * 2 * clock, in FLOP/s.
double peak_flops(const ArchConfig& cfg);

// (west + south channels) * per-channel rate * clock, in bytes/s.
double peak_hbm_bw(const ArchConfig& cfg);

}  // namespace tilesim
