#include <tilesim/layout.hpp>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "preload binaries are little-endian; big-endian hosts are unsupported");

namespace tilesim {

namespace {

std::uint64_t round_up(std::uint64_t value, std::uint64_t multiple) {
    return (value + multiple - 1) / multiple * multiple;
}

}  // namespace

std::uint64_t LayoutDesc::padded_rows() const {
    return round_up(matrix_rows, static_cast<std::uint64_t>(split.rows) * tile_rows);
}

std::uint64_t LayoutDesc::padded_cols() const {
    return round_up(matrix_cols, static_cast<std::uint64_t>(split.cols) * tile_cols);
}

void LayoutDesc::validate(const std::string& name) const {
    auto positive = [&name](std::uint64_t v, const char* field) {
        if (v == 0) throw NonPositiveValue(name + "." + field);
    };
    positive(matrix_rows, "rows");
    positive(matrix_cols, "cols");
    positive(split.rows, "split_rows");
    positive(split.cols, "split_cols");
    positive(tile_rows, "tm");
    positive(tile_cols, "tn");
    positive(channel_count, "channels");
    positive(elem_bytes, "elem_bytes");
    if (channel_start >= channel_count)
        throw InvalidPlan(name + ": channel_start must be below channel_count");
}

std::uint32_t channel_of_block(std::uint64_t block_row, std::uint64_t block_col,
                               const LayoutDesc& layout) {
    const std::uint64_t index = block_row * layout.split.cols + block_col;
    return static_cast<std::uint32_t>((layout.channel_start + index) % layout.channel_count);
}

Address address_of(std::uint64_t elem_row, std::uint64_t elem_col, const LayoutDesc& layout) {
    const std::uint64_t bm = layout.block_rows();
    const std::uint64_t bn = layout.block_cols();
    const std::uint64_t block_row = elem_row / bm;
    const std::uint64_t block_col = elem_col / bn;
    const std::uint64_t block_index = block_row * layout.split.cols + block_col;

    // Position of this block among the blocks round-robined onto the same
    // channel: first block index on the channel is (channel - start) mod count.
    const std::uint32_t channel = channel_of_block(block_row, block_col, layout);
    const std::uint64_t first_on_channel =
        (channel + layout.channel_count - layout.channel_start) % layout.channel_count;
    const std::uint64_t block_ordinal = (block_index - first_on_channel) / layout.channel_count;

    const std::uint64_t local_row = elem_row % bm;
    const std::uint64_t local_col = elem_col % bn;
    const std::uint64_t tile_row = local_row / layout.tile_rows;
    const std::uint64_t tile_col = local_col / layout.tile_cols;
    const std::uint64_t tiles_per_row = bn / layout.tile_cols;
    const std::uint64_t tile_index = tile_row * tiles_per_row + tile_col;
    const std::uint64_t tile_bytes =
        static_cast<std::uint64_t>(layout.tile_rows) * layout.tile_cols * layout.elem_bytes;
    const std::uint64_t in_tile =
        (local_row % layout.tile_rows) * layout.tile_cols + (local_col % layout.tile_cols);

    return Address{channel, block_ordinal * layout.block_bytes() + tile_index * tile_bytes +
                                in_tile * layout.elem_bytes};
}

std::uint64_t channel_extent_bytes(const LayoutDesc& layout, std::uint32_t channel) {
    if (channel >= layout.channel_count) return 0;
    const std::uint64_t blocks = layout.block_count();
    const std::uint64_t base = blocks / layout.channel_count;
    const std::uint64_t remainder = blocks % layout.channel_count;
    // Channels [start, start + remainder) mod count receive one extra block.
    const std::uint64_t offset =
        (channel + layout.channel_count - layout.channel_start) % layout.channel_count;
    const std::uint64_t count = base + (offset < remainder ? 1 : 0);
    return count * layout.block_bytes();
}

const PreloadEntry* PreloadManifest::find(const std::string& name) const {
    for (const PreloadEntry& e : entries)
        if (e.name == name) return &e;
    return nullptr;
}

std::string PreloadManifest::serialize() const {
    std::ostringstream out;
    for (const PreloadEntry& e : entries) {
        out << "matrix=" << e.name << " rows=" << e.layout.matrix_rows
            << " cols=" << e.layout.matrix_cols << " encoding=f64le"
            << " split=" << e.layout.split.rows << "x" << e.layout.split.cols
            << " tm=" << e.layout.tile_rows << " tn=" << e.layout.tile_cols
            << " channels=" << e.layout.channel_count << " start=" << e.layout.channel_start;
        for (const auto& [channel, file] : e.files) {
            out << " file." << channel << "=" << file.first << ":" << file.second;
        }
        out << "\n";
    }
    return out.str();
}

namespace {

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const std::uint64_t v = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ParseError("bad integer for " + key + ": " + value);
    }
}

}  // namespace

PreloadManifest PreloadManifest::parse(const std::string& text) {
    PreloadManifest manifest;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream tokens(line);
        std::string token;
        PreloadEntry entry;
        entry.layout.elem_bytes = 0;  // set by encoding token
        bool any = false;
        while (tokens >> token) {
            const std::size_t eq = token.find('=');
            if (eq == std::string::npos) throw ParseError("bad manifest token: " + token);
            const std::string key = token.substr(0, eq);
            const std::string value = token.substr(eq + 1);
            any = true;
            if (key == "matrix") {
                entry.name = value;
            } else if (key == "rows") {
                entry.layout.matrix_rows = parse_u64(key, value);
            } else if (key == "cols") {
                entry.layout.matrix_cols = parse_u64(key, value);
            } else if (key == "encoding") {
                if (value != "f64le") throw UnknownEncoding("unknown element encoding: " + value);
                entry.layout.elem_bytes = 8;
            } else if (key == "split") {
                const std::size_t x = value.find('x');
                if (x == std::string::npos) throw ParseError("bad split: " + value);
                entry.layout.split.rows = static_cast<std::uint32_t>(parse_u64(key, value.substr(0, x)));
                entry.layout.split.cols = static_cast<std::uint32_t>(parse_u64(key, value.substr(x + 1)));
            } else if (key == "tm") {
                entry.layout.tile_rows = static_cast<std::uint32_t>(parse_u64(key, value));
            } else if (key == "tn") {
                entry.layout.tile_cols = static_cast<std::uint32_t>(parse_u64(key, value));
            } else if (key == "channels") {
                entry.layout.channel_count = static_cast<std::uint32_t>(parse_u64(key, value));
            } else if (key == "start") {
                entry.layout.channel_start = static_cast<std::uint32_t>(parse_u64(key, value));
            } else if (key.rfind("file.", 0) == 0) {
                const std::uint32_t channel =
                    static_cast<std::uint32_t>(parse_u64(key, key.substr(5)));
                const std::size_t colon = value.rfind(':');
                if (colon == std::string::npos) throw ParseError("bad file token: " + token);
                entry.files[channel] = {value.substr(0, colon),
                                        parse_u64(key, value.substr(colon + 1))};
            } else {
                throw ParseError("unknown manifest key: " + key);
            }
        }
        if (!any) continue;
        if (entry.name.empty()) throw ParseError("manifest stanza without matrix name");
        if (entry.layout.elem_bytes == 0) throw ParseError("manifest stanza without encoding");
        manifest.entries.push_back(std::move(entry));
    }
    return manifest;
}

PreloadManifest write_preload(const std::map<std::string, Matrix>& matrices,
                              const std::map<std::string, LayoutDesc>& layouts,
                              const std::string& dir, const std::string& manifest_name) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);

    PreloadManifest manifest;
    for (const auto& [name, matrix] : matrices) {
        const auto it = layouts.find(name);
        if (it == layouts.end()) throw InvalidPlan("no layout for matrix " + name);
        LayoutDesc layout = it->second;
        layout.matrix_rows = matrix.rows;
        layout.matrix_cols = matrix.cols;
        layout.elem_bytes = 8;
        layout.validate(name);

        PreloadEntry entry;
        entry.name = name;
        entry.layout = layout;

        std::map<std::uint32_t, std::vector<double>> channel_data;
        for (std::uint32_t ch = 0; ch < layout.channel_count; ++ch) {
            const std::uint64_t bytes = channel_extent_bytes(layout, ch);
            if (bytes > 0) channel_data[ch].assign(bytes / 8, 0.0);
        }
        const std::uint64_t pr = layout.padded_rows();
        const std::uint64_t pc = layout.padded_cols();
        for (std::uint64_t r = 0; r < pr; ++r) {
            for (std::uint64_t c = 0; c < pc; ++c) {
                if (r >= matrix.rows || c >= matrix.cols) continue;  // keep padding zero
                const Address addr = address_of(r, c, layout);
                channel_data[addr.channel][addr.byte_offset / 8] = matrix.at(r, c);
            }
        }

        for (const auto& [ch, values] : channel_data) {
            const std::string file_name = name + ".ch" + std::to_string(ch) + ".bin";
            const fs::path path = fs::path(dir) / file_name;
            std::ofstream out(path, std::ios::binary);
            if (!out) throw IoFailure("cannot write " + path.string());
            out.write(reinterpret_cast<const char*>(values.data()),
                      static_cast<std::streamsize>(values.size() * 8));
            if (!out) throw IoFailure("short write to " + path.string());
            entry.files[ch] = {file_name, values.size() * 8};
        }
        manifest.entries.push_back(std::move(entry));
    }

    const fs::path manifest_path = fs::path(dir) / manifest_name;
    std::ofstream out(manifest_path);
    if (!out) throw IoFailure("cannot write " + manifest_path.string());
    out << manifest.serialize();
    return manifest;
}

Preload read_preload(const std::string& manifest_path) {
    namespace fs = std::filesystem;
    std::ifstream in(manifest_path);
    if (!in) throw IoFailure("cannot open manifest: " + manifest_path);
    std::ostringstream ss;
    ss << in.rdbuf();
    const PreloadManifest manifest = PreloadManifest::parse(ss.str());
    const fs::path dir = fs::path(manifest_path).parent_path();

    Preload preload;
    for (const PreloadEntry& entry : manifest.entries) {
        const LayoutDesc& layout = entry.layout;
        layout.validate(entry.name);

        std::map<std::uint32_t, std::vector<double>> channel_data;
        for (const auto& [ch, file] : entry.files) {
            const std::uint64_t expected = channel_extent_bytes(layout, ch);
            if (file.second != expected) {
                throw SizeMismatch(entry.name + " channel " + std::to_string(ch) +
                                   ": manifest declares " + std::to_string(file.second) +
                                   " bytes, layout expects " + std::to_string(expected));
            }
            const fs::path path = dir / file.first;
            std::ifstream bin(path, std::ios::binary | std::ios::ate);
            if (!bin) throw SizeMismatch("missing channel binary: " + path.string());
            const std::uint64_t actual = static_cast<std::uint64_t>(bin.tellg());
            if (actual != file.second) {
                throw SizeMismatch(path.string() + ": file holds " + std::to_string(actual) +
                                   " bytes, manifest declares " + std::to_string(file.second));
            }
            bin.seekg(0);
            std::vector<double> values(actual / 8);
            bin.read(reinterpret_cast<char*>(values.data()),
                     static_cast<std::streamsize>(actual));
            if (!bin) throw IoFailure("short read from " + path.string());
            channel_data[ch] = std::move(values);
        }
        // Every channel with a nonzero extent must be present.
        for (std::uint32_t ch = 0; ch < layout.channel_count; ++ch) {
            if (channel_extent_bytes(layout, ch) > 0 && !channel_data.contains(ch)) {
                throw SizeMismatch(entry.name + ": manifest missing channel " +
                                   std::to_string(ch));
            }
        }

        Matrix matrix(layout.matrix_rows, layout.matrix_cols);
        for (std::uint64_t r = 0; r < matrix.rows; ++r) {
            for (std::uint64_t c = 0; c < matrix.cols; ++c) {
                const Address addr = address_of(r, c, layout);
                matrix.at(r, c) = channel_data[addr.channel][addr.byte_offset / 8];
            }
        }
        preload.matrices[entry.name] = std::move(matrix);
        preload.layouts[entry.name] = layout;
    }
    return preload;
}

}  // namespace tilesim
