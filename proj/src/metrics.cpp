#include "gridfield/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gridfield {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

double wrap_phase(double phi) {
    phi = std::remainder(phi, kTwoPi);
    if (phi <= -kPi) phi = kPi;
    return phi;
}

}  // namespace

AngleMaps angles_from_solution(const DarkFieldSolutionMaps& solution, const Geometry& geometry) {
    geometry.validate();
    const int w = solution.width(), h = solution.height();
    AngleMaps out;
    out.theta_M_sq = Image(w, h, quiet_nan());
    out.theta_m_sq = Image(w, h, quiet_nan());
    out.theta = solution.theta;
    out.valid = solution.valid;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            out.theta_M_sq.at(x, y) = signed_sigma_sq_to_angle_sq(solution.sigma_M_sq.at(x, y), geometry);
            out.theta_m_sq.at(x, y) = signed_sigma_sq_to_angle_sq(solution.sigma_m_sq.at(x, y), geometry);
        }
    return out;
}

double theta_rms_sq(double theta_M_sq, double theta_m_sq) {
    return 0.5 * (theta_M_sq + theta_m_sq);
}

double theta_asy(double theta_M_sq, double theta_m_sq) {
    if (!(theta_M_sq > 0.0)) return 0.0;  // major angle complex: asymmetry undefined
    const double r2 = theta_m_sq / theta_M_sq;
    if (r2 >= 1.0 / 9.0 && r2 <= 1.0) return 1.0 - std::sqrt(r2);
    if (r2 >= -1.0 && r2 < 1.0 / 9.0)
        return std::sqrt((theta_M_sq - theta_m_sq) / (2.0 * theta_M_sq));
    return 0.0;  // r2 < -1: strength itself is complex, asymmetry not meaningful
}

MetricMaps compute_metrics(const AngleMaps& angles) {
    const int w = angles.width(), h = angles.height();
    MetricMaps out;
    out.rms_sq = Image(w, h, quiet_nan());
    out.asy = Image(w, h, quiet_nan());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double M = angles.theta_M_sq.at(x, y);
            const double m = angles.theta_m_sq.at(x, y);
            if (!std::isfinite(M) || !std::isfinite(m)) continue;
            out.rms_sq.at(x, y) = theta_rms_sq(M, m);
            out.asy.at(x, y) = theta_asy(M, m);
        }
    return out;
}

double displayed_rms(double rms_sq) {
    return rms_sq > 0.0 ? std::sqrt(rms_sq) : 0.0;
}

void direction_to_rgb(double theta, double saturation, double value, uint8_t rgb[3]) {
    // Directions are headless (0 and pi identical); map the half-turn onto a
    // full hue circle anchored red at 0/pi and blue at pi/2. The circle runs
    // red->green->blue over [0, pi/2] and blue->magenta->red over [pi/2, pi].
    double t = theta / kPi;           // [0, 1]
    t -= std::floor(t);               // tolerate wrapped input
    const double hue = t <= 0.5 ? (4.0 / 3.0) * t : (2.0 / 3.0) + (2.0 / 3.0) * (t - 0.5);

    const double s = std::clamp(saturation, 0.0, 1.0);
    const double v = std::clamp(value, 0.0, 1.0);
    const double hf = hue * 6.0;
    const int sector = std::min(5, static_cast<int>(hf));
    const double f = hf - sector;
    const double p = v * (1.0 - s);
    const double q = v * (1.0 - s * f);
    const double u = v * (1.0 - s * (1.0 - f));
    double r, g, b;
    switch (sector) {
        case 0: r = v; g = u; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = u; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = u; g = p; b = v; break;
        default: r = v; g = p; b = q; break;
    }
    rgb[0] = static_cast<uint8_t>(std::lround(r * 255.0));
    rgb[1] = static_cast<uint8_t>(std::lround(g * 255.0));
    rgb[2] = static_cast<uint8_t>(std::lround(b * 255.0));
}

RgbImage compose_hsv(const Image& theta, const MetricMaps& metrics, const Mask& valid,
                     std::optional<double> max_rms, double* max_rms_used) {
    const int w = theta.width(), h = theta.height();
    if (!metrics.rms_sq.same_shape(theta) || !metrics.asy.same_shape(theta) ||
        valid.width() != w || valid.height() != h)
        throw std::invalid_argument("compose_hsv: map shapes differ");

    double scale;
    if (max_rms) {
        if (!(*max_rms > 0.0)) throw std::invalid_argument("max_rms must be positive");
        scale = *max_rms;
    } else {
        scale = 0.0;
        for (size_t i = 0; i < metrics.rms_sq.size(); ++i)
            if (valid[i]) scale = std::max(scale, displayed_rms(metrics.rms_sq[i]));
    }
    if (max_rms_used) *max_rms_used = scale;

    RgbImage out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            uint8_t* px = out.pixel(x, y);
            if (!valid.at(x, y)) { px[0] = px[1] = px[2] = 0; continue; }
            const double strength = displayed_rms(metrics.rms_sq.at(x, y));
            const double value = scale > 0.0 ? strength / scale : 0.0;
            const double sat = metrics.asy.at(x, y);
            const double dir = theta.at(x, y);
            if (!std::isfinite(value) || !std::isfinite(sat) || !std::isfinite(dir)) {
                px[0] = px[1] = px[2] = 0;
                continue;
            }
            direction_to_rgb(dir, sat, value, px);
        }
    return out;
}

std::pair<Image, Image> phase_shift_maps(const CoefficientMaps& maps, double p) {
    const int w = maps.width(), h = maps.height();
    Image shift_x(w, h, quiet_nan());
    Image shift_y(w, h, quiet_nan());
    const double to_pixels = p / kTwoPi;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!maps.valid.at(x, y)) continue;
            shift_x.at(x, y) = wrap_phase(maps.phi_i_gsg.at(x, y) - maps.phi_i_gg.at(x, y)) * to_pixels;
            shift_y.at(x, y) = wrap_phase(maps.phi_j_gsg.at(x, y) - maps.phi_j_gg.at(x, y)) * to_pixels;
        }
    return {std::move(shift_x), std::move(shift_y)};
}

}  // namespace gridfield
