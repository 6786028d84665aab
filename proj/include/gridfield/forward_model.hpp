#pragma once

#include <cstdint>
#include <optional>
#include <utility>

#include "gridfield/image.hpp"

namespace gridfield {

/// Anisotropic Gaussian blur kernel: sigma_x/sigma_y are the standard
/// deviations (pixels) along the kernel axes, theta rotates those axes
/// clockwise in the image plane.
struct DarkFieldKernelParams {
    double theta = 0.0;
    double sigma_x = 0.0;
    double sigma_y = 0.0;
};

/// Sinusoidal absorption-grid reference pattern.
struct GridParams {
    double period = 8.0;  // pixels, > 2
    double alpha = 0.2;   // absorption in [0, 1]

    void validate() const;
};

/// Imaging geometry used to convert pixel-space blur widths into scattering
/// cone half-angles.
struct Geometry {
    double odd_m = 0.0;         // object-to-detector distance, meters
    double pixel_size_m = 0.0;  // effective pixel size, meters
    std::optional<double> energy_keV;        // metadata only
    std::optional<double> sample_to_grid_m;  // metadata only

    void validate() const;
};

/// Per-pixel ground-truth sample description for synthesis. All maps share
/// one shape; shift maps displace the grid pattern rigidly (in pixels).
struct SampleField {
    Image transmission;  // [0, 1]
    Image theta;         // radians
    Image sigma_x;       // pixels, >= 0
    Image sigma_y;       // pixels, >= 0
    std::optional<Image> shift_x;  // pixels
    std::optional<Image> shift_y;  // pixels

    /// Uniform field of the given shape.
    static SampleField uniform(int width, int height, double T, double theta,
                               double sigma_x, double sigma_y);
    void validate() const;
};

enum class NoiseKind { none, poisson };

struct NoiseModel {
    NoiseKind kind = NoiseKind::none;
    double counts_per_unit_intensity = 0.0;  // photons, > 0 when poisson
    bool apply_to_grid = false;  // grid/flat references are long-exposure by default

    void validate() const;
};

/// Kernel density at (x, y) in 1/pixels^2. Requires sigma_x, sigma_y > 0;
/// throws std::domain_error for degenerate widths (treat those as a delta
/// kernel instead).
double eval_df_kernel(const DarkFieldKernelParams& params, double x, double y);

/// Small-angle conversion of a blur width (pixels) to a scattering cone
/// half-angle (radians).
double sigma_to_angle(double sigma_px, const Geometry& geometry);

/// Same conversion applied to a signed squared width; the sign is preserved
/// so complex widths survive the unit change.
double signed_sigma_sq_to_angle_sq(double sigma_sq_px2, const Geometry& geometry);

/// Grid-only intensity model at continuous position (x, y), flat-field
/// normalized (1 at a fully transmitting hole center).
double eval_grid_image(const GridParams& grid, double x, double y);

/// Sample-and-grid intensity model: the grid model blurred by the kernel and
/// scaled by the transmission T. sigma = 0 reduces to T * grid.
double eval_sample_grid_image(const GridParams& grid, const DarkFieldKernelParams& df,
                              double T, double x, double y);

/// Rasterize a grid-only / sample-and-grid image pair at pixel centers.
/// The grid phase is anchored so a hole center sits at the image center.
/// Deterministic for a fixed seed; noise is applied to the sample-and-grid
/// image (and to the grid image too only when the model requests it).
std::pair<Image, Image> synthesize_pair(int width, int height, const GridParams& grid,
                                        const SampleField& field, const NoiseModel& noise,
                                        uint64_t seed);

/// Independent check of the analytical sample-and-grid model: discrete
/// convolution of the rasterized grid with a rasterized, renormalized kernel
/// (support truncated at +/-6 sigma). `supersample` declares how much finer
/// the input raster is than the kernel's pixel units; the kernel taps are
/// laid on that finer lattice, which suppresses sampling aliasing for narrow
/// kernels. Border pixels whose kernel support leaves the image are NaN;
/// throws if the support does not fit in the image at all (pad the input
/// first).
Image numeric_convolution_oracle(const Image& grid_image, const DarkFieldKernelParams& df,
                                 int supersample);

/// Deterministic per-pixel RNG stream index, shared by synthesis and tests.
uint64_t pixel_rng_seed(uint64_t seed, int x, int y, uint32_t stream);

}  // namespace gridfield
