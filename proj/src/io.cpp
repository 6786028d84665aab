#include "gridfield/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

namespace gridfield {

namespace fs = std::filesystem;

namespace {

uint32_t to_le32(uint32_t v) {
    if constexpr (std::endian::native == std::endian::little) return v;
    return __builtin_bswap32(v);
}

fs::path sidecar_path(const fs::path& path) {
    fs::path p = path;
    p += ".meta";
    return p;
}

struct FileCloser {
    void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const fs::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw IoError("cannot open " + path.string());
    return f;
}

}  // namespace

void write_key_values(const fs::path& path, const KeyValues& kv) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    for (const auto& [key, value] : kv) out << key << ' ' << value << '\n';
    if (!out) throw IoError("failed writing " + path.string());
}

KeyValues read_key_values(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    KeyValues kv;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto space = line.find(' ');
        if (space == std::string::npos)
            kv.emplace_back(line, "");
        else
            kv.emplace_back(line.substr(0, space), line.substr(space + 1));
    }
    return kv;
}

const std::string* find_key(const KeyValues& kv, const std::string& key) {
    for (const auto& [k, v] : kv)
        if (k == key) return &v;
    return nullptr;
}

void write_float_map(const fs::path& path, const Image& img, const std::string& units,
                     bool signed_square, const KeyValues& extra) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    std::vector<uint32_t> row(img.width());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x)
            row[x] = to_le32(std::bit_cast<uint32_t>(static_cast<float>(img.at(x, y))));
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size() * sizeof(uint32_t)));
    }
    if (!out) throw IoError("failed writing " + path.string());

    KeyValues kv{{"width", std::to_string(img.width())},
                 {"height", std::to_string(img.height())},
                 {"dtype", "float32_le"},
                 {"units", units},
                 {"signed_square", signed_square ? "1" : "0"},
                 {"invalid", "nan"}};
    kv.insert(kv.end(), extra.begin(), extra.end());
    write_key_values(sidecar_path(path), kv);
}

Image read_float_map(const fs::path& path, KeyValues* meta_out) {
    const KeyValues kv = read_key_values(sidecar_path(path));
    const std::string* ws = find_key(kv, "width");
    const std::string* hs = find_key(kv, "height");
    if (!ws || !hs) throw IoError("sidecar for " + path.string() + " lacks width/height");
    const int w = std::stoi(*ws), h = std::stoi(*hs);

    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    Image img(w, h);
    std::vector<uint32_t> row(w);
    for (int y = 0; y < h; ++y) {
        in.read(reinterpret_cast<char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(uint32_t)));
        if (!in) throw IoError("truncated float map " + path.string());
        for (int x = 0; x < w; ++x)
            img.at(x, y) = static_cast<double>(std::bit_cast<float>(to_le32(row[x])));
    }
    if (meta_out) *meta_out = kv;
    return img;
}

void write_mask(const fs::path& path, const Mask& mask, const KeyValues& extra) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(mask.bytes()),
              static_cast<std::streamsize>(mask.size()));
    if (!out) throw IoError("failed writing " + path.string());
    KeyValues kv{{"width", std::to_string(mask.width())},
                 {"height", std::to_string(mask.height())},
                 {"dtype", "uint8"},
                 {"units", "mask"},
                 {"valid_value", "255"}};
    kv.insert(kv.end(), extra.begin(), extra.end());
    write_key_values(sidecar_path(path), kv);
}

Mask read_mask(const fs::path& path) {
    const KeyValues kv = read_key_values(sidecar_path(path));
    const std::string* ws = find_key(kv, "width");
    const std::string* hs = find_key(kv, "height");
    if (!ws || !hs) throw IoError("sidecar for " + path.string() + " lacks width/height");
    const int w = std::stoi(*ws), h = std::stoi(*hs);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    Mask mask(w, h, false);
    in.read(reinterpret_cast<char*>(mask.bytes()), static_cast<std::streamsize>(mask.size()));
    if (!in) throw IoError("truncated mask " + path.string());
    return mask;
}

Image read_gray_png(const fs::path& path) {
    FilePtr fp = open_file(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("libpng init failed");
    }
    std::vector<png_bytep> row_ptrs;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("failed reading PNG " + path.string());
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);
    if (color != PNG_COLOR_TYPE_GRAY) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError(path.string() + ": only grayscale PNG input frames are supported");
    }
    if (depth < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
        depth = 8;
    }
    if (depth == 16) png_set_swap(png);  // stored big-endian
    png_read_update_info(png, info);

    const size_t stride = png_get_rowbytes(png, info);
    std::vector<uint8_t> buf(stride * h);
    row_ptrs.resize(h);
    for (png_uint_32 y = 0; y < h; ++y) row_ptrs[y] = buf.data() + y * stride;
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Image img(static_cast<int>(w), static_cast<int>(h));
    if (depth == 16) {
        for (png_uint_32 y = 0; y < h; ++y) {
            const uint16_t* row = reinterpret_cast<const uint16_t*>(buf.data() + y * stride);
            for (png_uint_32 x = 0; x < w; ++x)
                img.at(static_cast<int>(x), static_cast<int>(y)) = row[x] / 65535.0;
        }
    } else {
        for (png_uint_32 y = 0; y < h; ++y) {
            const uint8_t* row = buf.data() + y * stride;
            for (png_uint_32 x = 0; x < w; ++x)
                img.at(static_cast<int>(x), static_cast<int>(y)) = row[x] / 255.0;
        }
    }
    return img;
}

void write_gray16_png(const fs::path& path, const Image& img) {
    FilePtr fp = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng init failed");
    }
    std::vector<uint16_t> row(img.width());
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("failed writing PNG " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.width(), img.height(), 16, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_set_swap(png);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            double v = img.at(x, y);
            v = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
            row[x] = static_cast<uint16_t>(std::lround(v * 65535.0));
        }
        png_write_row(png, reinterpret_cast<png_bytep>(row.data()));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void write_rgb_png(const fs::path& path, const RgbImage& img) {
    FilePtr fp = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("failed writing PNG " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y)
        png_write_row(png, const_cast<png_bytep>(img.pixel(0, y)));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image read_image_any(const fs::path& path) {
    if (path.extension() == ".png") return read_gray_png(path);
    return read_float_map(path);
}

}  // namespace gridfield
