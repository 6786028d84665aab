#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridfield {

/// 2-D single-channel raster, row-major, top-left origin. x indexes columns,
/// y indexes rows. Values are doubles internally; file I/O converts to the
/// 32-bit float map format (see io.hpp).
class Image {
public:
    Image() = default;
    Image(int width, int height, double fill = 0.0)
        : width_(width), height_(height),
          data_(static_cast<size_t>(width) * height, fill) {
        if (width <= 0 || height <= 0)
            throw std::invalid_argument("Image dimensions must be positive");
    }

    int width() const { return width_; }
    int height() const { return height_; }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& at(int x, int y) { return data_[static_cast<size_t>(y) * width_ + x]; }
    double at(int x, int y) const { return data_[static_cast<size_t>(y) * width_ + x]; }
    double& operator[](size_t i) { return data_[i]; }
    double operator[](size_t i) const { return data_[i]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    bool same_shape(const Image& o) const {
        return width_ == o.width_ && height_ == o.height_;
    }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> data_;
};

/// 8-bit validity mask aligned with an Image; nonzero = valid.
class Mask {
public:
    Mask() = default;
    Mask(int width, int height, bool fill = true)
        : width_(width), height_(height),
          data_(static_cast<size_t>(width) * height, fill ? 255 : 0) {
        if (width <= 0 || height <= 0)
            throw std::invalid_argument("Mask dimensions must be positive");
    }

    int width() const { return width_; }
    int height() const { return height_; }
    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    bool at(int x, int y) const { return data_[static_cast<size_t>(y) * width_ + x] != 0; }
    void set(int x, int y, bool v) { data_[static_cast<size_t>(y) * width_ + x] = v ? 255 : 0; }
    bool operator[](size_t i) const { return data_[i] != 0; }
    void set(size_t i, bool v) { data_[i] = v ? 255 : 0; }

    uint8_t* bytes() { return data_.data(); }
    const uint8_t* bytes() const { return data_.data(); }

    size_t count_valid() const {
        size_t n = 0;
        for (uint8_t b : data_) n += (b != 0);
        return n;
    }

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<uint8_t> data_;
};

/// Interleaved 8-bit RGB image for rendered output.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> rgb;  // 3 bytes per pixel, row-major

    RgbImage() = default;
    RgbImage(int w, int h) : width(w), height(h), rgb(static_cast<size_t>(w) * h * 3, 0) {}
    uint8_t* pixel(int x, int y) { return &rgb[(static_cast<size_t>(y) * width + x) * 3]; }
    const uint8_t* pixel(int x, int y) const { return &rgb[(static_cast<size_t>(y) * width + x) * 3]; }
};

inline double quiet_nan() { return std::numeric_limits<double>::quiet_NaN(); }

/// Mean over pixels that are finite (and valid, when a mask is given).
double masked_mean(const Image& img, const Mask* mask = nullptr);
/// Standard deviation companion to masked_mean (population form).
double masked_stddev(const Image& img, const Mask* mask = nullptr);
/// Median of valid finite pixels; throws if the selection is empty.
double masked_median(const Image& img, const Mask* mask = nullptr);

}  // namespace gridfield
