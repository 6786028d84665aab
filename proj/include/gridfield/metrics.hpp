#pragma once

#include <optional>
#include <utility>

#include "gridfield/correlation.hpp"
#include "gridfield/forward_model.hpp"
#include "gridfield/image.hpp"
#include "gridfield/retrieval.hpp"

namespace gridfield {

/// Scattering cone half-angles as signed squares (radians^2), plus the
/// dominant direction copied from the solution.
struct AngleMaps {
    Image theta_M_sq;  // signed, radians^2
    Image theta_m_sq;  // signed, radians^2
    Image theta;       // radians in [0, pi]
    Mask valid;

    int width() const { return valid.width(); }
    int height() const { return valid.height(); }
};

/// Scalar dark-field strength and asymmetry maps.
struct MetricMaps {
    Image rms_sq;  // signed, same squared units as the inputs
    Image asy;     // dimensionless in [0, 1]
};

/// Convert squared pixel widths to squared scattering angles via the
/// small-angle factor (pixel_size / odd)^2, preserving signs.
AngleMaps angles_from_solution(const DarkFieldSolutionMaps& solution, const Geometry& geometry);

/// Signed mean of the two squared angles. The displayed strength is
/// sqrt(max(value, 0)); negative values record net sharpening.
double theta_rms_sq(double theta_M_sq, double theta_m_sq);

/// Piecewise asymmetry in [0, 1]. With r2 = theta_m_sq / theta_M_sq (only
/// for theta_M_sq > 0): 1 - sqrt(r2) on r2 in [1/9, 1];
/// sqrt((theta_M_sq - theta_m_sq) / (2 theta_M_sq)) on r2 in [-1, 1/9);
/// 0 otherwise. The two branches agree exactly at r2 = 1/9.
double theta_asy(double theta_M_sq, double theta_m_sq);

/// rms_sq / asy maps from angle maps (works identically on pixel-unit
/// squared widths when no geometry is available).
MetricMaps compute_metrics(const AngleMaps& angles);

/// Displayed strength for a signed square: sqrt of the positive part.
double displayed_rms(double rms_sq);

/// Combine direction (hue), asymmetry (saturation) and strength (value) into
/// an RGB image. theta = 0 and pi are the same red; theta = pi/2 is blue.
/// Invalid or sharpening-only pixels render black. max_rms (same units as
/// sqrt(rms_sq)) fixes the value-channel scale; pass nullopt to use the image
/// maximum. Returns the scale actually used through max_rms_used.
RgbImage compose_hsv(const Image& theta, const MetricMaps& metrics, const Mask& valid,
                     std::optional<double> max_rms, double* max_rms_used = nullptr);

/// Hue-circle RGB for a direction in [0, pi] at full saturation/value;
/// exposed for tests and the documentation color wheel.
void direction_to_rgb(double theta, double saturation, double value, uint8_t rgb[3]);

/// Grid-pattern displacement (pixels) from the cross-minus-auto fitted phase
/// differences, wrapped to half a period either way.
std::pair<Image, Image> phase_shift_maps(const CoefficientMaps& maps, double p);

}  // namespace gridfield
