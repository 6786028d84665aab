#pragma once

#include <array>
#include <memory>
#include <stdexcept>
#include <vector>

#include "gridfield/image.hpp"

namespace gridfield {

struct FitError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PeriodEstimationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raw sliding-inner-product map of a k x k kernel over a 2k x 2k search
/// window: (k+1)^2 fully overlapping placements, indexed by displacement.
/// Zero displacement sits at index ceil(k/2) along each axis (the geometric
/// center for even k).
struct CorrelationMap {
    int k = 0;
    std::vector<double> values;  // (k+1)^2, row-major over (j, i)

    CorrelationMap() = default;
    explicit CorrelationMap(int kernel_size)
        : k(kernel_size), values(static_cast<size_t>(kernel_size + 1) * (kernel_size + 1), 0.0) {}

    int side() const { return k + 1; }
    int zero_index() const { return (k + 1) / 2; }  // == ceil(k/2)
    double displacement(int index) const { return index - zero_index(); }
    double& at(int ix, int jy) { return values[static_cast<size_t>(jy) * side() + ix]; }
    double at(int ix, int jy) const { return values[static_cast<size_t>(jy) * side() + ix]; }
};

/// Fitted parameters of the five-term correlation-space model
///   f(i,j) = c0 + c1 cos(w i + phi_i) + c2 cos(w j + phi_j)
///          + c3 cos(w (i-j) + phi_i - phi_j) + c4 cos(w (i+j) + phi_i + phi_j),
/// w = 2 pi / p. Amplitudes are reported as magnitudes; phases lie in
/// (-pi, pi]. phi_i/phi_j come from the two single-axis terms; the diagonal
/// terms' phase disagreement is kept as a fit-quality diagnostic.
struct CoefficientSet {
    std::array<double, 5> c{};  // c0..c4
    double phi_i = 0.0;
    double phi_j = 0.0;
    double phi_diff_residual = 0.0;  // diagonal-difference term phase minus (phi_i - phi_j)
    double phi_sum_residual = 0.0;   // diagonal-sum term phase minus (phi_i + phi_j)
};

/// Linear least-squares fitter for the correlation model at fixed kernel size
/// and period. The design depends only on (k, p), so the solve operator is
/// precomputed once and applied per map. Throws FitError when the design is
/// rank-deficient (map too small for nine parameters).
class CorrelationModelFit {
public:
    CorrelationModelFit(int k, double p);
    ~CorrelationModelFit();
    CorrelationModelFit(CorrelationModelFit&&) noexcept;
    CorrelationModelFit& operator=(CorrelationModelFit&&) noexcept;

    CoefficientSet fit(const CorrelationMap& map) const;
    /// Model value for a fitted parameter set at displacement (i, j).
    double evaluate(const CoefficientSet& set, double i, double j) const;

    int kernel_size() const { return k_; }
    double period() const { return p_; }

private:
    struct Impl;
    int k_;
    double p_;
    std::unique_ptr<Impl> impl_;
};

/// One-off convenience wrapper around CorrelationModelFit.
CoefficientSet fit_correlation_model(const CorrelationMap& map, double p);

/// Raw local correlation of the k x k kernel at `center` in kernel_source
/// against the 2k x 2k window at the same center in window_source. Both
/// windows must lie fully inside their images (throws std::out_of_range).
CorrelationMap local_correlation(const Image& kernel_source, const Image& window_source,
                                 int center_x, int center_y, int k);

/// Per-pixel fitted coefficients for the auto (grid*grid) and cross
/// (grid*sample-grid) correlations, on the valid retrieval region: input
/// dims shrunk by the window margin k on every side. map pixel (0,0)
/// corresponds to input pixel (origin_x, origin_y).
struct CoefficientMaps {
    int k = 0;
    double p = 0.0;
    int origin_x = 0;
    int origin_y = 0;
    std::array<Image, 5> c_gg;   // auto-correlation amplitudes c0..c4
    std::array<Image, 5> c_gsg;  // cross-correlation amplitudes c0..c4
    Image phi_i_gg, phi_j_gg;    // auto-fit phases
    Image phi_i_gsg, phi_j_gsg;  // cross-fit phases
    Mask valid;

    int width() const { return valid.width(); }
    int height() const { return valid.height(); }
};

/// Sweep every pixel where the windows fit, correlating the grid-only kernel
/// against both images and fitting the model to each map. Work is distributed
/// across `n_workers` threads (0 = all available); output is independent of
/// the schedule. Requires k >= ceil(p).
CoefficientMaps compute_coefficient_maps(const Image& grid_image, const Image& sample_grid_image,
                                         int k, double p, int n_workers = 0);

/// Single-threaded reference implementation of the sweep, kept for testing
/// and benchmarking against the parallel kernel.
CoefficientMaps compute_coefficient_maps_serial(const Image& grid_image,
                                                const Image& sample_grid_image, int k, double p);

/// Box-filter every coefficient map over round(p) x round(p) neighborhoods,
/// excluding invalid pixels from each average. Phase maps are averaged as
/// unit phasors so wrapped values survive. A pixel stays invalid only when
/// its whole neighborhood is invalid.
CoefficientMaps average_over_period(const CoefficientMaps& maps, double p, int n_workers = 0);

/// Coefficient-uniformity score used by select_kernel_size: the sum over the
/// five auto-correlation coefficients of std/mean across a pixel lattice with
/// the given stride (1 = exhaustive). Lattice points whose windows touch a
/// masked-out input pixel are skipped when `exclude` is given.
double kernel_uniformity_score(const Image& grid_image, double p, int k, int stride,
                               const Mask* exclude = nullptr);

/// Pick the kernel size in [k_min, k_max] whose auto-correlation coefficients
/// are most uniform across the grid-only image (ties go to the smaller k).
/// stride 0 selects the default lattice step of ceil(p).
int select_kernel_size(const Image& grid_image, double p, int k_min, int k_max, int stride = 0,
                       const Mask* exclude = nullptr);

/// Estimate the grid period from the fundamental peak of the discrete Fourier
/// magnitude along each image axis (parabolic sub-bin refinement, mean of the
/// two axes). Throws PeriodEstimationError when no significant peak exists.
double estimate_grid_period(const Image& grid_image);

/// ceil() guarded against values that sit a rounding error above an integer
/// (auto-estimated periods land there routinely).
int ceil_period(double p);

}  // namespace gridfield
