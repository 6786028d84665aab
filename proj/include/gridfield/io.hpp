#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gridfield/image.hpp"

namespace gridfield {

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Ordered key-value pairs used for map sidecars and run metadata. Written as
/// plain text, one `key value` pair per line.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

void write_key_values(const std::filesystem::path& path, const KeyValues& kv);
KeyValues read_key_values(const std::filesystem::path& path);
/// First value for a key, or nullopt.
const std::string* find_key(const KeyValues& kv, const std::string& key);

/// Canonical float map format: raw 32-bit IEEE-754 little-endian values,
/// row-major from the top-left pixel, with a `<file>.meta` sidecar naming at
/// least width, height, units and the signed-square convention flag. Invalid
/// pixels are stored as quiet NaN (the mask file is authoritative).
void write_float_map(const std::filesystem::path& path, const Image& img,
                     const std::string& units, bool signed_square,
                     const KeyValues& extra = {});
Image read_float_map(const std::filesystem::path& path, KeyValues* meta_out = nullptr);

/// 8-bit mask companion (raw bytes, nonzero = valid) with the same sidecar
/// scheme.
void write_mask(const std::filesystem::path& path, const Mask& mask, const KeyValues& extra = {});
Mask read_mask(const std::filesystem::path& path);

/// Grayscale PNG input frames, 8- or 16-bit, linearly mapped onto [0, 1].
Image read_gray_png(const std::filesystem::path& path);
/// 16-bit grayscale PNG of values clamped to [0, 1] (synthetic frames).
void write_gray16_png(const std::filesystem::path& path, const Image& img);
/// 8-bit-per-channel RGB PNG (rendered output).
void write_rgb_png(const std::filesystem::path& path, const RgbImage& img);

/// Reads either format by extension: .png -> grayscale PNG, anything else ->
/// float map with sidecar.
Image read_image_any(const std::filesystem::path& path);

}  // namespace gridfield
