#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <tilesim/errors.hpp>
#include <tilesim/matrix.hpp>

namespace tilesim {

// Coarse partitioning of a matrix into a split_rows x split_cols grid of
// blocks, the unit of distribution across HBM channels.
struct SplitScheme {
    std::uint32_t rows = 1;
    std::uint32_t cols = 1;

    auto operator<=>(const SplitScheme&) const = default;
};

// Maps matrix elements to (channel, byte offset). Blocks go to channels
// round-robin; inside a block, tile_rows x tile_cols tiles are stored
// contiguously in row-major order, elements row-major within each tile.
// Matrices are zero-padded up to multiples of split * tile in each
// dimension; the engine masks padded regions out of stores.
struct LayoutDesc {
    std::uint64_t matrix_rows = 0;
    std::uint64_t matrix_cols = 0;
    SplitScheme split;
    std::uint32_t tile_rows = 0;
    std::uint32_t tile_cols = 0;
    std::uint32_t channel_start = 0;
    std::uint32_t channel_count = 1;
    std::uint32_t elem_bytes = 8;  // storage width; preload files hold f64

    std::uint64_t padded_rows() const;
    std::uint64_t padded_cols() const;
    std::uint64_t block_rows() const { return padded_rows() / split.rows; }  // BM
    std::uint64_t block_cols() const { return padded_cols() / split.cols; }  // BN
    std::uint64_t block_bytes() const { return block_rows() * block_cols() * elem_bytes; }
    std::uint64_t block_count() const {
        return static_cast<std::uint64_t>(split.rows) * split.cols;
    }

    void validate(const std::string& name) const;

    auto operator<=>(const LayoutDesc&) const = default;
};

struct Address {
    std::uint32_t channel = 0;
    std::uint64_t byte_offset = 0;

    auto operator<=>(const Address&) const = default;
};

// (channel_start + block_row * split_cols + block_col) mod channel_count.
std::uint32_t channel_of_block(std::uint64_t block_row, std::uint64_t block_col,
                               const LayoutDesc& layout);

// Channel plus byte offset of one (possibly padded) element. Blocks mapped
// to the same channel are stored there in block-index order.
Address address_of(std::uint64_t elem_row, std::uint64_t elem_col, const LayoutDesc& layout);

// Total bytes the layout stores on one channel.
std::uint64_t channel_extent_bytes(const LayoutDesc& layout, std::uint32_t channel);

struct PreloadEntry {
    std::string name;
    LayoutDesc layout;
    // channel -> (file name relative to the manifest, byte count)
    std::map<std::uint32_t, std::pair<std::string, std::uint64_t>> files;
};

struct PreloadManifest {
    std::vector<PreloadEntry> entries;

    const PreloadEntry* find(const std::string& name) const;
    std::string serialize() const;
    static PreloadManifest parse(const std::string& text);
};

struct Preload {
    std::map<std::string, Matrix> matrices;
    std::map<std::string, LayoutDesc> layouts;
};

// Emit one binary per (matrix, channel) holding that channel's blocks in
// block-index order as little-endian doubles, plus the manifest file.
// Padding elements are written as zeros.
PreloadManifest write_preload(const std::map<std::string, Matrix>& matrices,
                              const std::map<std::string, LayoutDesc>& layouts,
                              const std::string& dir,
                              const std::string& manifest_name = "preload.manifest");

// Exact inverse of write_preload. Throws SizeMismatch when a binary's size
// disagrees with the manifest or the layout, UnknownEncoding for anything
// other than f64le.
Preload read_preload(const std::string& manifest_path);

}  // namespace tilesim
