#pragma once

#include <array>
#include <optional>
#include <utility>

#include "gridfield/correlation.hpp"
#include "gridfield/image.hpp"

namespace gridfield {

/// Log-ratio intermediates of the four modulated correlation terms, in
/// squared pixels. Each entry equals one row of the linear system that the
/// blur widths satisfy.
struct ARow {
    double a1 = 0.0, a2 = 0.0, a3 = 0.0, a4 = 0.0;
};

/// Per-pixel retrieval output. Blur widths are carried as signed squares:
/// a negative value records a visibility increase (sharpening), i.e. an
/// imaginary width of magnitude sqrt(-value).
struct DarkFieldSolutionMaps {
    Image transmission;      // dimensionless
    Image theta;             // dominant blur direction, radians in [0, pi]
    Image sigma_M_sq;        // semi-major squared width, pixels^2, signed
    Image sigma_m_sq;        // semi-minor squared width, pixels^2, signed
    Mask valid;
    Mask theta_degenerate;   // direction undefined (isotropic blur)

    int width() const { return valid.width(); }
    int height() const { return valid.height(); }
};

/// Transmission from the constant correlation terms. Requires c_gg0 > 0
/// (callers treat violations as invalid pixels).
double solve_transmission(double c_gg0, double c_gsg0);

/// Log-ratio rows from the four cross/auto amplitude ratios. The two
/// diagonal terms carry twice the blur exponent, hence the extra 1/2 on
/// their rows. Returns nullopt when any log argument is non-positive
/// (noise-dominated or model-violating pixel).
std::optional<ARow> compute_A(const std::array<double, 4>& coeff_ratios, double T, double p);

struct ThetaSolution {
    double theta = 0.0;
    bool degenerate = false;
};

/// Blur direction from the row differences: theta = atan2(a4-a3, a2-a1)/2,
/// in (-pi/2, pi/2]. Near-isotropic inputs (both differences below a relative
/// threshold) return theta = 0 flagged degenerate.
ThetaSolution solve_theta(const ARow& a);

/// Closed-form least-squares widths of the 4x2 linear system (Moore-Penrose
/// pseudoinverse evaluated symbolically). May be negative; see the signed
/// squares convention.
std::pair<double, double> solve_sigmas(const ARow& a, double theta);

struct CanonicalSolution {
    double sigma_M_sq = 0.0;
    double sigma_m_sq = 0.0;
    double theta = 0.0;
};

/// Order the squared widths so sigma_M_sq >= sigma_m_sq (adding pi/2 to theta
/// when the axes swap) and wrap theta into [0, pi].
CanonicalSolution canonicalize(double sigma_x_sq, double sigma_y_sq, double theta);

/// Full per-pixel solve over coefficient maps: transmission, log-ratio rows,
/// direction, widths, canonicalization. Invalidity propagates per pixel.
DarkFieldSolutionMaps retrieve_field(const CoefficientMaps& maps, double p, int n_workers = 0);

}  // namespace gridfield
