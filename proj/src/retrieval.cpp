#include "gridfield/retrieval.hpp"

#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gridfield {

namespace {

constexpr double kPi = 3.14159265358979323846;

}  // namespace

double solve_transmission(double c_gg0, double c_gsg0) {
    if (!(c_gg0 > 0.0))
        throw std::domain_error("auto-correlation constant term must be positive");
    return c_gsg0 / c_gg0;
}

std::optional<ARow> compute_A(const std::array<double, 4>& coeff_ratios, double T, double p) {
    if (!(T > 0.0)) return std::nullopt;
    const double scale = p * p / (kPi * kPi);
    double ln[4];
    for (int n = 0; n < 4; ++n) {
        const double arg = coeff_ratios[n] / T;
        if (!(arg > 0.0) || !std::isfinite(arg)) return std::nullopt;
        ln[n] = std::log(arg);
    }
    ARow a;
    a.a1 = scale * ln[0];
    a.a2 = scale * ln[1];
    a.a3 = 0.5 * scale * ln[2];
    a.a4 = 0.5 * scale * ln[3];
    return a;
}

ThetaSolution solve_theta(const ARow& a) {
    const double num = a.a4 - a.a3;
    const double den = a.a2 - a.a1;
    const double magnitude = std::abs(a.a1) + std::abs(a.a2) + std::abs(a.a3) + std::abs(a.a4);
    const double threshold = 1e-3 * (magnitude + 1e-30);
    if (std::abs(num) < threshold && std::abs(den) < threshold)
        return {0.0, true};  // isotropic: direction is meaningless
    return {0.5 * std::atan2(num, den), false};
}

std::pair<double, double> solve_sigmas(const ARow& a, double theta) {
    const double c = std::cos(2.0 * theta);
    const double s = std::sin(2.0 * theta);
    const double sx2 = 0.125 * (-a.a1 * (2.0 * c + 1.0) + a.a2 * (2.0 * c - 1.0) -
                                a.a3 * (2.0 * s + 1.0) + a.a4 * (2.0 * s - 1.0));
    const double sy2 = 0.125 * (a.a1 * (2.0 * c - 1.0) - a.a2 * (2.0 * c + 1.0) +
                                a.a3 * (2.0 * s - 1.0) - a.a4 * (2.0 * s + 1.0));
    return {sx2, sy2};
}

CanonicalSolution canonicalize(double sigma_x_sq, double sigma_y_sq, double theta) {
    CanonicalSolution out;
    if (sigma_x_sq < sigma_y_sq) {
        out.sigma_M_sq = sigma_y_sq;
        out.sigma_m_sq = sigma_x_sq;
        out.theta = theta;
    } else if (sigma_y_sq < sigma_x_sq) {
        out.sigma_M_sq = sigma_x_sq;
        out.sigma_m_sq = sigma_y_sq;
        out.theta = theta + 0.5 * kPi;
    } else {
        out.sigma_M_sq = sigma_x_sq;
        out.sigma_m_sq = sigma_y_sq;
        out.theta = theta;
    }
    while (out.theta < 0.0) out.theta += kPi;
    while (out.theta > kPi) out.theta -= kPi;
    return out;
}

DarkFieldSolutionMaps retrieve_field(const CoefficientMaps& maps, double p, int n_workers) {
    const int w = maps.width();
    const int h = maps.height();
    DarkFieldSolutionMaps out;
    out.transmission = Image(w, h, quiet_nan());
    out.theta = Image(w, h, quiet_nan());
    out.sigma_M_sq = Image(w, h, quiet_nan());
    out.sigma_m_sq = Image(w, h, quiet_nan());
    out.valid = Mask(w, h, false);
    out.theta_degenerate = Mask(w, h, false);

    int workers = n_workers;
    if (workers <= 0) {
#ifdef _OPENMP
        workers = omp_get_max_threads();
#else
        workers = 1;
#endif
    }

#pragma omp parallel for schedule(static) num_threads(workers) if (workers > 1)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!maps.valid.at(x, y)) continue;
            const double c_gg0 = maps.c_gg[0].at(x, y);
            if (!(c_gg0 > 0.0)) continue;
            const double T = maps.c_gsg[0].at(x, y) / c_gg0;
            out.transmission.at(x, y) = T;

            std::array<double, 4> ratios;
            bool ok = true;
            for (int n = 1; n <= 4; ++n) {
                const double denom = maps.c_gg[n].at(x, y);
                if (!(denom > 0.0)) { ok = false; break; }
                ratios[n - 1] = maps.c_gsg[n].at(x, y) / denom;
            }
            if (!ok) continue;

            const auto a = compute_A(ratios, T, p);
            if (!a) continue;
            const ThetaSolution th = solve_theta(*a);
            const auto [sx2, sy2] = solve_sigmas(*a, th.theta);
            const CanonicalSolution canon = canonicalize(sx2, sy2, th.theta);

            out.theta.at(x, y) = canon.theta;
            out.sigma_M_sq.at(x, y) = canon.sigma_M_sq;
            out.sigma_m_sq.at(x, y) = canon.sigma_m_sq;
            out.theta_degenerate.set(x, y, th.degenerate);
            out.valid.set(x, y, std::isfinite(T) && std::isfinite(canon.sigma_M_sq) &&
                                    std::isfinite(canon.sigma_m_sq) && std::isfinite(canon.theta));
        }
    }
    return out;
}

}  // namespace gridfield
