#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "dynafed/errors.hpp"
#include "dynafed/harness/io.hpp"
#include "dynafed/model/mlp.hpp"
#include "dynafed/synthesis/synthetic.hpp"
#include "dynafed/synthesis/trajectory.hpp"

namespace dynafed {

// Layout: "DYNA", u32 version, u32 block count, then per block
// u16 name length, name bytes, u64 element count, f64 values. All little-endian.
inline constexpr char kCheckpointMagic[4] = {'D', 'Y', 'N', 'A'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Block {
    std::string name;
    std::vector<double> values;

    friend bool operator==(const Block&, const Block&) = default;
};

inline std::vector<std::uint8_t> encode_blocks(std::span<const Block> blocks) {
    std::vector<std::uint8_t> out(kCheckpointMagic, kCheckpointMagic + 4);
    put_little_endian(out, kCheckpointVersion, 4);
    put_little_endian(out, blocks.size(), 4);
    for (const auto& b : blocks) {
        if (b.name.size() > std::numeric_limits<std::uint16_t>::max()) throw ValidationError("block name too long");
        put_little_endian(out, b.name.size(), 2);
        out.insert(out.end(), b.name.begin(), b.name.end());
        put_little_endian(out, b.values.size(), 8);
        for (double v : b.values) put_little_endian(out, std::bit_cast<std::uint64_t>(v), 8);
    }
    return out;
}

inline std::vector<Block> decode_blocks(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    const auto magic = r.take(4, "checkpoint header");
    if (!std::equal(magic.begin(), magic.end(), kCheckpointMagic)) {
        throw BadMagicError("not a DYNA checkpoint", 0);
    }
    const auto version = r.little_endian(4, "checkpoint header");
    if (version != kCheckpointVersion) {
        throw BadVersionError("unsupported checkpoint version " + std::to_string(version), 4);
    }
    const auto count = r.little_endian(4, "checkpoint header");
    std::vector<Block> blocks;
    for (std::uint64_t i = 0; i < count; ++i) {
        Block b;
        const auto len = r.little_endian(2, "block name length");
        const auto name = r.take(len, "block name");
        b.name.assign(name.begin(), name.end());
        const auto n = r.little_endian(8, "block length");
        if (n > r.remaining() / 8) {
            throw TruncatedFileError("truncated block '" + b.name + "': " + std::to_string(n) + " values declared",
                                     bytes.size());
        }
        b.values.reserve(n);
        for (std::uint64_t k = 0; k < n; ++k) b.values.push_back(std::bit_cast<double>(r.little_endian(8, "block data")));
        blocks.push_back(std::move(b));
    }
    if (r.remaining() != 0) throw ParseError("trailing bytes after the last block", r.offset());
    return blocks;
}

inline void write_blocks(const std::filesystem::path& path, std::span<const Block> blocks) {
    write_file_bytes(path, encode_blocks(blocks));
}

inline std::vector<Block> read_blocks(const std::filesystem::path& path) { return decode_blocks(read_file_bytes(path)); }

inline const Block& find_block(std::span<const Block> blocks, const std::string& name) {
    for (const auto& b : blocks)
        if (b.name == name) return b;
    throw ParseError("checkpoint has no block '" + name + "'", 0);
}

namespace detail {

inline std::vector<double> as_doubles(std::span<const std::size_t> v) { return {v.begin(), v.end()}; }

inline std::vector<std::size_t> as_sizes(const Block& b) {
    std::vector<std::size_t> out;
    for (double v : b.values) {
        if (!(v >= 0.0) || v != std::floor(v) || v > 9.0e15) {
            throw ParseError("block '" + b.name + "' holds a non-integral size", 0);
        }
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

inline MlpSpec spec_from(std::span<const Block> blocks) {
    try {
        return MlpSpec(as_sizes(find_block(blocks, "layers")));
    } catch (const ParseError&) {
        throw;
    } catch (const ValidationError& e) {
        throw ParseError(std::string("invalid layer block: ") + e.what(), 0);
    }
}

}  // namespace detail

// ---- parameters: blocks {layers, w}

inline std::vector<Block> to_blocks(const ParamVector& w) {
    return {{"layers", detail::as_doubles(w.spec().layer_sizes)}, {"w", {w.values().begin(), w.values().end()}}};
}

inline ParamVector params_from_blocks(std::span<const Block> blocks) {
    const MlpSpec spec = detail::spec_from(blocks);
    const Block& w = find_block(blocks, "w");
    if (w.values.size() != spec.param_count()) throw ParseError("block 'w' does not match the layer sizes", 0);
    return ParamVector(spec, w.values);
}

// ---- synthetic data: blocks {X, Ylogits, meta = [n, d, K]}

inline std::vector<Block> to_blocks(const SyntheticDataset& d) {
    return {{"X", {d.X.values().begin(), d.X.values().end()}},
            {"Ylogits", {d.Ylogits.values().begin(), d.Ylogits.values().end()}},
            {"meta", {double(d.size()), double(d.dim()), double(d.num_classes())}}};
}

inline SyntheticDataset synthetic_from_blocks(std::span<const Block> blocks) {
    const auto meta = detail::as_sizes(find_block(blocks, "meta"));
    if (meta.size() != 3 || meta[0] == 0 || meta[1] == 0 || meta[2] == 0) {
        throw ParseError("block 'meta' must hold positive [n, d, K]", 0);
    }
    const Block& x = find_block(blocks, "X");
    const Block& y = find_block(blocks, "Ylogits");
    if (x.values.size() != meta[0] * meta[1] || y.values.size() != meta[0] * meta[2]) {
        throw ParseError("synthetic blocks do not match 'meta'", 0);
    }
    return {Tensor(Shape{meta[0], meta[1]}, x.values), Tensor(Shape{meta[0], meta[2]}, y.values)};
}

// ---- trajectory: blocks {layers, rounds, w = checkpoints concatenated}

inline std::vector<Block> to_blocks(const Trajectory& traj) {
    traj.validate();
    Block w{"w", {}};
    for (const auto& c : traj.checkpoints) w.values.insert(w.values.end(), c.values().begin(), c.values().end());
    return {{"layers", detail::as_doubles(traj.spec().layer_sizes)},
            {"rounds", {traj.rounds.begin(), traj.rounds.end()}},
            std::move(w)};
}

inline Trajectory trajectory_from_blocks(std::span<const Block> blocks) {
    const MlpSpec spec = detail::spec_from(blocks);
    const Block& rounds = find_block(blocks, "rounds");
    const Block& w = find_block(blocks, "w");
    const std::size_t P = spec.param_count();
    if (rounds.values.empty() || w.values.size() != rounds.values.size() * P) {
        throw ParseError("trajectory blocks are inconsistent", 0);
    }
    Trajectory traj;
    for (std::size_t i = 0; i < rounds.values.size(); ++i) {
        const double r = rounds.values[i];
        if (r != std::floor(r) || std::abs(r) > 1e9) throw ParseError("non-integral round number", 0);
        std::vector<double> v(w.values.begin() + static_cast<std::ptrdiff_t>(i * P),
                              w.values.begin() + static_cast<std::ptrdiff_t>((i + 1) * P));
        try {
            traj.push_back(static_cast<int>(r), ParamVector(spec, std::move(v)));
        } catch (const ParseError&) {
            throw;
        } catch (const ValidationError& e) {
            throw ParseError(std::string("invalid trajectory: ") + e.what(), 0);
        }
    }
    return traj;
}

inline void save_checkpoint(const ParamVector& w, const std::filesystem::path& path) { write_blocks(path, to_blocks(w)); }
inline void save_checkpoint(const SyntheticDataset& d, const std::filesystem::path& path) {
    write_blocks(path, to_blocks(d));
}
inline void save_checkpoint(const Trajectory& t, const std::filesystem::path& path) { write_blocks(path, to_blocks(t)); }

inline ParamVector load_params(const std::filesystem::path& path) { return params_from_blocks(read_blocks(path)); }
inline SyntheticDataset load_synthetic(const std::filesystem::path& path) {
    return synthetic_from_blocks(read_blocks(path));
}
inline Trajectory load_trajectory(const std::filesystem::path& path) { return trajectory_from_blocks(read_blocks(path)); }

}  // namespace dynafed
