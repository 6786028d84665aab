#include <cmath>
#include <random>

#include "doctest.h"
#include "gridfield/metrics.hpp"
#include "gridfield/pipeline.hpp"
#include "test_helpers.hpp"

using namespace gridfield;
using namespace gridfield::testing;

namespace {

Geometry beam_geometry() {
    Geometry g;
    g.pixel_size_m = 12.3e-6;
    g.odd_m = 1.5;
    return g;
}

DarkFieldSolutionMaps single_pixel_solution(double T, double theta, double sM2, double sm2) {
    DarkFieldSolutionMaps s;
    s.transmission = Image(1, 1, T);
    s.theta = Image(1, 1, theta);
    s.sigma_M_sq = Image(1, 1, sM2);
    s.sigma_m_sq = Image(1, 1, sm2);
    s.valid = Mask(1, 1, true);
    s.theta_degenerate = Mask(1, 1, false);
    return s;
}

}  // namespace

TEST_CASE("angle conversion keeps signs and magnitudes") {
    const Geometry g = beam_geometry();
    const double unit = 8.2e-6;  // one pixel of blur in radians

    AngleMaps a = angles_from_solution(single_pixel_solution(0.8, 0.4, 9.0, 1.0), g);
    CHECK(a.theta_M_sq.at(0, 0) == doctest::Approx(9.0 * unit * unit).epsilon(1e-9));
    CHECK(std::sqrt(a.theta_M_sq.at(0, 0)) == doctest::Approx(24.6e-6).epsilon(1e-9));

    AngleMaps zero = angles_from_solution(single_pixel_solution(1.0, 0.0, 0.0, 0.0), g);
    CHECK(zero.theta_M_sq.at(0, 0) == 0.0);

    AngleMaps sharp = angles_from_solution(single_pixel_solution(1.0, 0.0, 1.0, -4.0), g);
    CHECK(sharp.theta_m_sq.at(0, 0) == doctest::Approx(-4.0 * unit * unit).epsilon(1e-9));
    CHECK(std::sqrt(-sharp.theta_m_sq.at(0, 0)) == doctest::Approx(2.0 * unit).epsilon(1e-9));
}

TEST_CASE("strength metric: equal angles, the frozen example, and sign arithmetic") {
    CHECK(theta_rms_sq(4.0, 4.0) == doctest::Approx(4.0));

    // 3 px and 1 px of blur at 8.2 urad per pixel.
    const double M = 605.16e-12, m = 67.24e-12;
    CHECK(std::sqrt(theta_rms_sq(M, m)) == doctest::Approx(18.336e-6).epsilon(1e-3));

    const double signed_rms = theta_rms_sq(4e-12, -16e-12);
    CHECK(signed_rms == doctest::Approx(-6e-12));
    CHECK(displayed_rms(signed_rms) == 0.0);  // complex strength renders as zero
    CHECK(signed_rms < 0.0);                  // but the stored value keeps the sign
}

TEST_CASE("strength metric is monotone in both signed squares") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> sq(-5.0, 5.0);
    for (int i = 0; i < 2000; ++i) {
        const double M = sq(rng), m = sq(rng), bump = std::abs(sq(rng));
        CHECK(theta_rms_sq(M + bump, m) >= theta_rms_sq(M, m));
        CHECK(theta_rms_sq(M, m + bump) >= theta_rms_sq(M, m));
    }
}

TEST_CASE("asymmetry metric: anchors, branch continuity, and range") {
    CHECK(theta_asy(4.0, 4.0) == doctest::Approx(0.0));          // isotropic
    CHECK(theta_asy(9.0, 1.0) == doctest::Approx(1.0 - 1.0 / 3.0).epsilon(1e-12));
    CHECK(theta_asy(1.0, -1.0) == doctest::Approx(1.0).epsilon(1e-12));  // maximal
    CHECK(theta_asy(1.0, 1.0 / 9.0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(theta_asy(-1.0, -2.0) == 0.0);   // complex major angle
    CHECK(theta_asy(1.0, -1.5) == 0.0);    // below the defined band
    CHECK(theta_asy(0.0, 0.0) == 0.0);

    // Both branch expressions agree exactly at the crossover ratio.
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> logM(-12.0, 2.0);
    for (int i = 0; i < 10000; ++i) {
        const double M = std::pow(10.0, logM(rng));
        const double m = M / 9.0;
        const double branch1 = 1.0 - std::sqrt(m / M);
        const double branch2 = std::sqrt((M - m) / (2.0 * M));
        CHECK(std::abs(branch1 - branch2) < 1e-12);
        CHECK(theta_asy(M, m) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    }

    std::uniform_real_distribution<double> sq(-20.0, 20.0);
    for (int i = 0; i < 5000; ++i) {
        const double v = theta_asy(sq(rng), sq(rng));
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("hsv composition: anchors of the direction wheel") {
    uint8_t rgb[3];
    direction_to_rgb(0.0, 1.0, 1.0, rgb);
    CHECK(rgb[0] == 255); CHECK(rgb[1] == 0); CHECK(rgb[2] == 0);    // red at 0
    direction_to_rgb(kPi, 1.0, 1.0, rgb);
    CHECK(rgb[0] == 255); CHECK(rgb[1] == 0); CHECK(rgb[2] == 0);    // red at pi
    direction_to_rgb(kPi / 2.0, 1.0, 1.0, rgb);
    CHECK(rgb[0] == 0); CHECK(rgb[1] == 0); CHECK(rgb[2] == 255);    // blue at pi/2
    direction_to_rgb(0.7, 0.0, 1.0, rgb);
    CHECK(rgb[0] == rgb[1]);                                          // gray when isotropic
    CHECK(rgb[1] == rgb[2]);
    CHECK(rgb[0] == 255);
}

TEST_CASE("hsv composition: value scaling, black floor, and explicit scale errors") {
    const int n = 3;
    Image theta(n, 1, 0.0);
    theta.at(1, 0) = kPi / 2.0;
    theta.at(2, 0) = kPi;
    MetricMaps metrics;
    metrics.rms_sq = Image(n, 1, 0.0);
    metrics.asy = Image(n, 1, 1.0);
    Mask valid(n, 1, true);

    SUBCASE("all strengths non-positive render black") {
        metrics.rms_sq.at(0, 0) = -1.0;
        double used = -1.0;
        const RgbImage img = compose_hsv(theta, metrics, valid, std::nullopt, &used);
        CHECK(used == 0.0);
        for (int x = 0; x < n; ++x) {
            CHECK(img.pixel(x, 0)[0] == 0);
            CHECK(img.pixel(x, 0)[1] == 0);
            CHECK(img.pixel(x, 0)[2] == 0);
        }
    }

    SUBCASE("saturated pixel at the display maximum") {
        metrics.rms_sq.at(1, 0) = 4.0;
        const RgbImage img = compose_hsv(theta, metrics, valid, 2.0, nullptr);
        CHECK(img.pixel(1, 0)[0] == 0);
        CHECK(img.pixel(1, 0)[1] == 0);
        CHECK(img.pixel(1, 0)[2] == 255);  // pure saturated blue
    }

    SUBCASE("theta 0 and pi give identical pixels") {
        metrics.rms_sq = Image(n, 1, 1.0);
        metrics.asy = Image(n, 1, 0.63);
        const RgbImage img = compose_hsv(theta, metrics, valid, 1.0, nullptr);
        CHECK(img.pixel(0, 0)[0] == img.pixel(2, 0)[0]);
        CHECK(img.pixel(0, 0)[1] == img.pixel(2, 0)[1]);
        CHECK(img.pixel(0, 0)[2] == img.pixel(2, 0)[2]);
    }

    SUBCASE("non-positive explicit scale is refused") {
        CHECK_THROWS_AS(compose_hsv(theta, metrics, valid, 0.0, nullptr), std::invalid_argument);
        CHECK_THROWS_AS(compose_hsv(theta, metrics, valid, -3.0, nullptr), std::invalid_argument);
    }
}

TEST_CASE("phase shift maps: identity input gives zero shifts") {
    auto [ig, isg] = uniform_pair(72, {8.0, 0.2}, 1.0, 0.0, 0.0, 0.0);
    const CoefficientMaps maps = compute_coefficient_maps(ig, ig, 8, 8.0, 2);
    auto [sx, sy] = phase_shift_maps(maps, 8.0);
    for (int y = 0; y < sx.height(); ++y)
        for (int x = 0; x < sx.width(); ++x) {
            CHECK(std::abs(sx.at(x, y)) < 1e-9);
            CHECK(std::abs(sy.at(x, y)) < 1e-9);
        }
}

TEST_CASE("phase shift maps recover rigid sub-period displacements") {
    const GridParams grid{8.0, 0.2};
    auto [ig, isg] = uniform_pair(96, grid, 1.0, 0.0, 0.0, 0.0, 0.5, 0.0);
    const CoefficientMaps maps =
        average_over_period(compute_coefficient_maps(ig, isg, 8, grid.period, 2), grid.period, 2);
    auto [sx, sy] = phase_shift_maps(maps, grid.period);
    CHECK(masked_mean(sx, &maps.valid) == doctest::Approx(0.5).epsilon(0.02 / 0.5));
    CHECK(std::abs(masked_mean(sy, &maps.valid)) < 0.02);
}

TEST_CASE("phase shift maps wrap whole-period displacements") {
    const GridParams grid{8.0, 0.2};
    auto [ig, isg] = uniform_pair(96, grid, 1.0, 0.0, 0.0, 0.0, grid.period + 0.5, 0.0);
    const CoefficientMaps maps =
        average_over_period(compute_coefficient_maps(ig, isg, 8, grid.period, 2), grid.period, 2);
    auto [sx, sy] = phase_shift_maps(maps, grid.period);
    CHECK(masked_mean(sx, &maps.valid) == doctest::Approx(0.5).epsilon(0.05));
}

TEST_CASE("recovered shift is linear in the true shift") {
    const GridParams grid{8.0, 0.2};
    for (double shift : {-2.0, -0.75, 0.25, 1.5, 3.0}) {
        auto [ig, isg] = uniform_pair(80, grid, 1.0, 0.0, 0.0, 0.0, shift, 0.0);
        const CoefficientMaps maps =
            average_over_period(compute_coefficient_maps(ig, isg, 8, grid.period, 1), grid.period, 1);
        auto [sx, sy] = phase_shift_maps(maps, grid.period);
        CHECK(std::abs(masked_mean(sx, &maps.valid) - shift) < 0.02 * grid.period);
    }
}
