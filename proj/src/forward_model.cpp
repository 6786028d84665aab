#include "gridfield/forward_model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace gridfield {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

uint64_t mix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

struct QuadraticCoeffs {
    double a, b, c;  // exponent form a*x^2 + 2*b*x*y + c*y^2
};

QuadraticCoeffs kernel_quadratic(const DarkFieldKernelParams& p) {
    const double c2 = std::cos(p.theta) * std::cos(p.theta);
    const double s2 = std::sin(p.theta) * std::sin(p.theta);
    const double s2t = std::sin(2.0 * p.theta);
    const double ivx = 1.0 / (p.sigma_x * p.sigma_x);
    const double ivy = 1.0 / (p.sigma_y * p.sigma_y);
    QuadraticCoeffs q;
    q.a = 0.5 * (c2 * ivx + s2 * ivy);
    q.b = 0.25 * s2t * (ivy - ivx);
    q.c = 0.5 * (s2 * ivx + c2 * ivy);
    return q;
}

}  // namespace

void GridParams::validate() const {
    if (!(period > 2.0))
        throw std::invalid_argument("grid period must exceed 2 pixels");
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw std::invalid_argument("grid absorption must lie in [0, 1]");
}

void Geometry::validate() const {
    if (!(odd_m > 0.0))
        throw std::invalid_argument("object-to-detector distance must be positive");
    if (!(pixel_size_m > 0.0))
        throw std::invalid_argument("pixel size must be positive");
}

void SampleField::validate() const {
    if (transmission.empty()) throw std::invalid_argument("sample field is empty");
    if (!transmission.same_shape(theta) || !transmission.same_shape(sigma_x) ||
        !transmission.same_shape(sigma_y))
        throw std::invalid_argument("sample field maps must share one shape");
    if (shift_x && !transmission.same_shape(*shift_x))
        throw std::invalid_argument("shift_x map shape mismatch");
    if (shift_y && !transmission.same_shape(*shift_y))
        throw std::invalid_argument("shift_y map shape mismatch");
    for (size_t i = 0; i < transmission.size(); ++i) {
        if (!(transmission[i] >= 0.0 && transmission[i] <= 1.0))
            throw std::invalid_argument("transmission values must lie in [0, 1]");
        if (sigma_x[i] < 0.0 || sigma_y[i] < 0.0)
            throw std::invalid_argument("synthesis blur widths must be non-negative");
    }
}

void NoiseModel::validate() const {
    if (kind == NoiseKind::poisson && !(counts_per_unit_intensity > 0.0))
        throw std::invalid_argument("poisson noise requires positive counts per unit intensity");
}

double eval_df_kernel(const DarkFieldKernelParams& params, double x, double y) {
    if (!(params.sigma_x > 0.0) || !(params.sigma_y > 0.0))
        throw std::domain_error(
            "degenerate blur kernel (sigma = 0); use a delta kernel instead");
    const QuadraticCoeffs q = kernel_quadratic(params);
    const double norm = 1.0 / (kTwoPi * params.sigma_x * params.sigma_y);
    return norm * std::exp(-q.a * x * x - 2.0 * q.b * x * y - q.c * y * y);
}

double sigma_to_angle(double sigma_px, const Geometry& geometry) {
    geometry.validate();
    return sigma_px * geometry.pixel_size_m / geometry.odd_m;
}

double signed_sigma_sq_to_angle_sq(double sigma_sq_px2, const Geometry& geometry) {
    geometry.validate();
    const double scale = geometry.pixel_size_m / geometry.odd_m;
    return sigma_sq_px2 * scale * scale;
}

double eval_grid_image(const GridParams& grid, double x, double y) {
    const double w = kTwoPi / grid.period;
    const double a = grid.alpha;
    return 1.0 - 0.75 * a + 0.25 * a * std::sin(w * x) + 0.25 * a * std::sin(w * y) +
           0.125 * a * std::cos(w * (x - y)) - 0.125 * a * std::cos(w * (x + y));
}

double eval_sample_grid_image(const GridParams& grid, const DarkFieldKernelParams& df,
                              double T, double x, double y) {
    const double w = kTwoPi / grid.period;
    const double al = grid.alpha;
    const double p2 = grid.period * grid.period;
    const double sx2 = df.sigma_x * df.sigma_x;
    const double sy2 = df.sigma_y * df.sigma_y;
    const double a = kPi * kPi / p2 * (sx2 + sy2);
    const double b = kPi * kPi / p2 * (sx2 - sy2);
    const double c2t = std::cos(2.0 * df.theta);
    const double s2t = std::sin(2.0 * df.theta);
    return T * (1.0 - 0.75 * al +
                0.25 * al * std::exp(-a - b * c2t) * std::sin(w * x) +
                0.25 * al * std::exp(-a + b * c2t) * std::sin(w * y) +
                0.125 * al * std::exp(-2.0 * a - 2.0 * b * s2t) * std::cos(w * (x - y)) -
                0.125 * al * std::exp(-2.0 * a + 2.0 * b * s2t) * std::cos(w * (x + y)));
}

uint64_t pixel_rng_seed(uint64_t seed, int x, int y, uint32_t stream) {
    uint64_t s = seed;
    s ^= 0x9e3779b97f4a7c15ULL * (static_cast<uint64_t>(static_cast<uint32_t>(y)) << 32 |
                                  static_cast<uint32_t>(x));
    s ^= 0xda942042e4dd58b5ULL * (static_cast<uint64_t>(stream) + 1);
    return mix64(s);  // decorrelate nearby pixels
}

namespace {

void apply_poisson(Image& img, const NoiseModel& noise, uint64_t seed, uint32_t stream) {
    const double c = noise.counts_per_unit_intensity;
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            double v = img.at(x, y);
            if (!std::isfinite(v) || v <= 0.0) {
                img.at(x, y) = std::isfinite(v) ? 0.0 : v;
                continue;
            }
            std::mt19937_64 rng(pixel_rng_seed(seed, x, y, stream));
            std::poisson_distribution<long long> dist(v * c);
            img.at(x, y) = static_cast<double>(dist(rng)) / c;
        }
    }
}

}  // namespace

std::pair<Image, Image> synthesize_pair(int width, int height, const GridParams& grid,
                                        const SampleField& field, const NoiseModel& noise,
                                        uint64_t seed) {
    grid.validate();
    field.validate();
    noise.validate();
    if (field.transmission.width() != width || field.transmission.height() != height)
        throw std::invalid_argument("sample field shape does not match requested image shape");

    Image ig(width, height);
    Image isg(width, height);
    // Pixel (col,row) samples the model at its center, relative to the image
    // center, plus a quarter-period anchor so a grid hole lands at the center.
    const double x0 = -0.5 * width + 0.25 * grid.period;
    const double y0 = -0.5 * height + 0.25 * grid.period;

#pragma omp parallel for schedule(static)
    for (int row = 0; row < height; ++row) {
        for (int col = 0; col < width; ++col) {
            const double x = (col + 0.5) + x0;
            const double y = (row + 0.5) + y0;
            ig.at(col, row) = eval_grid_image(grid, x, y);
            DarkFieldKernelParams df{field.theta.at(col, row), field.sigma_x.at(col, row),
                                     field.sigma_y.at(col, row)};
            double xs = x + (field.shift_x ? field.shift_x->at(col, row) : 0.0);
            double ys = y + (field.shift_y ? field.shift_y->at(col, row) : 0.0);
            isg.at(col, row) =
                eval_sample_grid_image(grid, df, field.transmission.at(col, row), xs, ys);
        }
    }

    if (noise.kind == NoiseKind::poisson) {
        apply_poisson(isg, noise, seed, 1);
        if (noise.apply_to_grid) apply_poisson(ig, noise, seed, 0);
    }
    return {std::move(ig), std::move(isg)};
}

SampleField SampleField::uniform(int width, int height, double T, double theta,
                                 double sigma_x, double sigma_y) {
    SampleField f;
    f.transmission = Image(width, height, T);
    f.theta = Image(width, height, theta);
    f.sigma_x = Image(width, height, sigma_x);
    f.sigma_y = Image(width, height, sigma_y);
    return f;
}

Image numeric_convolution_oracle(const Image& grid_image, const DarkFieldKernelParams& df,
                                 int supersample) {
    if (supersample < 1) throw std::invalid_argument("supersample must be >= 1");
    if (df.sigma_x < 0.0 || df.sigma_y < 0.0)
        throw std::invalid_argument("kernel widths must be non-negative");

    const double sigma_max = std::max(df.sigma_x, df.sigma_y);
    if (sigma_max == 0.0) return grid_image;  // delta kernel

    // The input raster is `supersample` times finer than the kernel's pixel
    // units, so the kernel taps land on that finer lattice. Truncation at
    // +/-6 sigma leaves < 1e-8 of the mass; renormalization restores it.
    const int radius = std::max(1, static_cast<int>(std::ceil(6.0 * sigma_max * supersample)));
    const int support = 2 * radius + 1;
    if (support > grid_image.width() || support > grid_image.height())
        throw std::invalid_argument(
            "kernel support exceeds image bounds; pad the input image before convolving");

    std::vector<double> kernel(static_cast<size_t>(support) * support, 0.0);
    const double pitch = 1.0 / supersample;
    double total = 0.0;
    for (int ky = -radius; ky <= radius; ++ky) {
        for (int kx = -radius; kx <= radius; ++kx) {
            const double v = eval_df_kernel(df, kx * pitch, ky * pitch);
            kernel[static_cast<size_t>(ky + radius) * support + (kx + radius)] = v;
            total += v;
        }
    }
    for (double& v : kernel) v /= total;

    Image out(grid_image.width(), grid_image.height(), quiet_nan());
#pragma omp parallel for schedule(static)
    for (int y = radius; y < grid_image.height() - radius; ++y) {
        for (int x = radius; x < grid_image.width() - radius; ++x) {
            double acc = 0.0;
            for (int ky = -radius; ky <= radius; ++ky)
                for (int kx = -radius; kx <= radius; ++kx)
                    acc += kernel[static_cast<size_t>(ky + radius) * support + (kx + radius)] *
                           grid_image.at(x - kx, y - ky);
            out.at(x, y) = acc;
        }
    }
    return out;
}

}  // namespace gridfield
