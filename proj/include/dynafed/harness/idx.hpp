#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "dynafed/errors.hpp"
#include "dynafed/federation/dataset.hpp"
#include "dynafed/harness/io.hpp"

namespace dynafed {

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

struct IdxImages {
    std::size_t count = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> pixels;  // count * rows * cols, row-major
};

inline IdxImages parse_idx_images(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    const auto magic = r.big_endian(4, "IDX image header");
    if (magic != kIdxImagesMagic) throw BadMagicError("not an IDX image file (magic " + std::to_string(magic) + ")", 0);
    IdxImages img;
    img.count = r.big_endian(4, "IDX image header");
    img.rows = r.big_endian(4, "IDX image header");
    img.cols = r.big_endian(4, "IDX image header");
    const unsigned __int128 wide = static_cast<unsigned __int128>(img.count) * img.rows * img.cols;
    if (wide > r.remaining()) {
        throw TruncatedFileError("truncated IDX pixel data: header declares more pixels than the file holds",
                                 bytes.size());
    }
    const auto total = static_cast<std::size_t>(wide);
    const auto px = r.take(total, "IDX pixel data");
    img.pixels.assign(px.begin(), px.end());
    if (r.remaining() != 0) throw ParseError("trailing bytes after IDX pixel data", r.offset());
    return img;
}

inline std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    const auto magic = r.big_endian(4, "IDX label header");
    if (magic != kIdxLabelsMagic) throw BadMagicError("not an IDX label file (magic " + std::to_string(magic) + ")", 0);
    const std::size_t count = r.big_endian(4, "IDX label header");
    const auto data = r.take(count, "IDX label data");
    if (r.remaining() != 0) throw ParseError("trailing bytes after IDX label data", r.offset());
    return {data.begin(), data.end()};
}

/// Pixels scaled by 1/255 and flattened per image. K defaults to max label + 1.
inline LabeledDataset idx_dataset(const IdxImages& img, std::span<const std::uint8_t> labels,
                                  std::optional<std::size_t> num_classes = std::nullopt) {
    if (labels.size() != img.count) {
        throw ParseError("label count " + std::to_string(labels.size()) + " does not match image count " +
                             std::to_string(img.count),
                         4);
    }
    if (img.count == 0) throw ValidationError("IDX files contain no samples");
    const std::size_t d = img.rows * img.cols;
    Tensor X(Shape{img.count, d});
    for (std::size_t i = 0; i < img.pixels.size(); ++i) X.values()[i] = static_cast<double>(img.pixels[i]) / 255.0;
    std::vector<int> y(labels.begin(), labels.end());
    const std::size_t K = num_classes.value_or(static_cast<std::size_t>(*std::max_element(y.begin(), y.end())) + 1);
    return LabeledDataset(std::move(X), std::move(y), K);
}

inline LabeledDataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path,
                               std::optional<std::size_t> num_classes = std::nullopt) {
    const IdxImages img = parse_idx_images(read_file_bytes(images_path));
    const auto labels = parse_idx_labels(read_file_bytes(labels_path));
    return idx_dataset(img, labels, num_classes);
}

}  // namespace dynafed
