#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gridfield/correlation.hpp"
#include "gridfield/forward_model.hpp"
#include "gridfield/io.hpp"
#include "gridfield/metrics.hpp"
#include "gridfield/retrieval.hpp"

namespace gridfield {

/// Pipeline failures carry the stage that raised them.
struct PipelineError : std::runtime_error {
    PipelineError(const std::string& stage, const std::string& what)
        : std::runtime_error("[" + stage + "] " + what), stage_name(stage) {}
    std::string stage_name;
};

/// Named rectangle in retrieved-map coordinates.
struct Roi {
    std::string name;
    int x = 0, y = 0, width = 0, height = 0;
};

Roi parse_roi(const std::string& spec);  // "name:x,y,w,h"

/// Single configuration surface for every subcommand; flags mirror these
/// field names.
struct RunConfig {
    // inputs (retrieve)
    std::string grid_path;
    std::vector<std::string> sample_grid_paths;  // >1 = frame sequence
    std::string sample_only_path;
    std::string flat_path;
    std::string dark_path;

    // geometry
    std::optional<double> odd_m;
    std::optional<double> pixel_size_m;
    std::optional<double> energy_keV;
    std::optional<double> sample_to_grid_m;

    // retrieval parameters
    std::optional<double> period;     // pixels; unset = estimate from grid image
    std::optional<int> kernel_size;   // pixels; unset = select from grid image
    double flat_min_valid_fraction = 0.99;
    double divide_threshold_rel = 1e-3;
    std::optional<double> max_rms;    // display scale, radians
    int workers = 0;                  // 0 = all hardware threads
    std::vector<Roi> rois;

    // synthesis parameters
    int width = 256;
    int height = 256;
    GridParams grid{8.0, 0.2};
    double transmission = 1.0;
    double theta = 0.0;
    double sigma_x = 0.0;
    double sigma_y = 0.0;
    double shift_x = 0.0;
    double shift_y = 0.0;
    std::string field_preset = "uniform";  // uniform | stripes
    NoiseModel noise;
    uint64_t seed = 0;
    bool write_png_frames = false;

    std::string out_dir;
};

/// (raw - dark) / (flat - dark); pixels with a non-positive denominator become
/// NaN and are cleared in `invalid_out`. Refuses inputs whose flat-dark
/// difference is positive on less than `min_valid_fraction` of the pixels.
Image flat_dark_correct(const Image& raw, const Image& flat, const Image& dark,
                        Mask* invalid_out = nullptr, double min_valid_fraction = 0.99);

/// Elementwise I_sg / I_s with near-zero denominators (below rel_threshold
/// times the sample-only mean) marked invalid.
Image divide_sample_only(const Image& sample_grid, const Image& sample_only,
                         Mask* invalid_out = nullptr, double rel_threshold = 1e-3);

/// Synthetic stripe pattern: four strongly scattering vertical stripes with
/// different dominant directions on a clean background.
struct StripeBand {
    int x0 = 0, x1 = 0;  // frame columns [x0, x1)
    double theta = 0.0;  // dominant scattering direction
};
std::vector<StripeBand> stripe_layout(int width);
SampleField make_stripe_field(int width, int height, double sigma_major = 3.0,
                              double sigma_minor = 0.3, double stripe_transmission = 0.9);

/// In-memory end-to-end retrieval (no file I/O); the CLI wraps this.
struct RetrieveParams {
    std::optional<double> period;
    std::optional<int> kernel_size;
    std::optional<Geometry> geometry;
    std::optional<double> max_rms;
    int workers = 0;
};

struct RetrieveResult {
    double period = 0.0;
    bool period_was_estimated = false;
    int kernel_size = 0;
    bool kernel_was_selected = false;
    CoefficientMaps coeffs;          // period-averaged
    DarkFieldSolutionMaps solution;  // pixel-unit signed squares
    std::optional<AngleMaps> angles; // only with geometry
    MetricMaps metrics;              // radians^2 with geometry, else pixels^2
    Image shift_x, shift_y;          // pixels
    RgbImage hsv;
    double max_rms_used = 0.0;
    std::vector<std::string> warnings;
};

RetrieveResult retrieve_from_images(const Image& grid_image, const Image& sample_grid_image,
                                    const RetrieveParams& params);

/// File-level pipeline entry points (subcommands). All throw PipelineError.
void run_synth(const RunConfig& config);
void run_retrieve(const RunConfig& config);
void run_hsv(const std::filesystem::path& bundle_dir, std::optional<double> max_rms,
             const std::filesystem::path& out_png = {});
double run_period(const RunConfig& config);

/// A retrieval output directory loaded back into memory.
struct MapBundle {
    KeyValues meta;
    Image transmission, theta, sigma_M_sq, sigma_m_sq;
    std::optional<Image> theta_M_sq, theta_m_sq;
    Image rms_sq, asy, shift_x, shift_y;
    Mask valid;
    bool has_geometry = false;
};
MapBundle load_bundle(const std::filesystem::path& dir);

/// Mask-aware per-ROI statistics. Scattering-angle columns use the signed
/// display convention (negative real values stand in for complex angles).
struct RoiStats {
    std::string name;
    size_t pixels = 0;
    double theta_M_mean = 0, theta_M_std = 0;  // displayed units (urad or px)
    double theta_m_mean = 0, theta_m_std = 0;
    double theta_mean = 0, theta_std = 0;      // radians
    double T_mean = 0, T_std = 0;
    double rms_mean = 0, rms_std = 0;          // displayed units (urad or px)
    double asy_mean = 0, asy_std = 0;
};
std::vector<RoiStats> run_roi_stats(const MapBundle& bundle, const std::vector<Roi>& rois);
std::string format_roi_table(const std::vector<RoiStats>& stats, bool physical_units);

}  // namespace gridfield
