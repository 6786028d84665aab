#include "gridfield/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace gridfield {

namespace fs = std::filesystem;

namespace {

std::string fmt_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_sci(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6e", v);
    return buf;
}

template <typename F>
auto stage(const std::string& name, F&& fn) {
    try {
        return fn();
    } catch (const PipelineError&) {
        throw;
    } catch (const std::exception& e) {
        throw PipelineError(name, e.what());
    }
}

double displayed_signed(double signed_sq) {
    return signed_sq >= 0.0 ? std::sqrt(signed_sq) : -std::sqrt(-signed_sq);
}

}  // namespace

Roi parse_roi(const std::string& spec) {
    const auto colon = spec.find(':');
    Roi roi;
    std::string rect = spec;
    if (colon != std::string::npos) {
        roi.name = spec.substr(0, colon);
        rect = spec.substr(colon + 1);
    }
    int x, y, w, h;
    if (std::sscanf(rect.c_str(), "%d,%d,%d,%d", &x, &y, &w, &h) != 4)
        throw std::invalid_argument("ROI must look like name:x,y,w,h (got '" + spec + "')");
    if (w <= 0 || h <= 0) throw std::invalid_argument("ROI width/height must be positive");
    if (roi.name.empty()) roi.name = "roi";
    roi.x = x; roi.y = y; roi.width = w; roi.height = h;
    return roi;
}

Image flat_dark_correct(const Image& raw, const Image& flat, const Image& dark,
                        Mask* invalid_out, double min_valid_fraction) {
    if (!raw.same_shape(flat) || !raw.same_shape(dark))
        throw std::invalid_argument("flat/dark correction inputs differ in shape");

    size_t positive = 0;
    for (size_t i = 0; i < raw.size(); ++i)
        if (flat[i] - dark[i] > 0.0) ++positive;
    if (static_cast<double>(positive) < min_valid_fraction * static_cast<double>(raw.size()))
        throw std::runtime_error("flat minus dark is non-positive on too many pixels");

    Image out(raw.width(), raw.height());
    if (invalid_out) *invalid_out = Mask(raw.width(), raw.height(), true);
    for (size_t i = 0; i < raw.size(); ++i) {
        const double denom = flat[i] - dark[i];
        if (denom > 0.0) {
            out[i] = (raw[i] - dark[i]) / denom;
        } else {
            out[i] = quiet_nan();
            if (invalid_out) invalid_out->set(i, false);
        }
    }
    return out;
}

Image divide_sample_only(const Image& sample_grid, const Image& sample_only,
                         Mask* invalid_out, double rel_threshold) {
    if (!sample_grid.same_shape(sample_only))
        throw std::invalid_argument("sample-and-grid and sample-only images differ in shape");
    double mean = 0.0;
    size_t n = 0;
    for (size_t i = 0; i < sample_only.size(); ++i)
        if (std::isfinite(sample_only[i])) { mean += sample_only[i]; ++n; }
    if (n == 0) throw std::runtime_error("sample-only image has no finite pixels");
    mean /= static_cast<double>(n);
    const double threshold = rel_threshold * std::abs(mean);

    Image out(sample_grid.width(), sample_grid.height());
    if (invalid_out) *invalid_out = Mask(sample_grid.width(), sample_grid.height(), true);
    for (size_t i = 0; i < sample_grid.size(); ++i) {
        const double denom = sample_only[i];
        if (std::isfinite(denom) && std::abs(denom) > threshold) {
            out[i] = sample_grid[i] / denom;
        } else {
            out[i] = quiet_nan();
            if (invalid_out) invalid_out->set(i, false);
        }
    }
    return out;
}

std::vector<StripeBand> stripe_layout(int width) {
    // Four stripes spread evenly, directions matching strongly oriented
    // fibre bundles: near-vertical through near-horizontal.
    static constexpr double directions[4] = {1.63, 1.07, 0.56, 0.01};
    std::vector<StripeBand> bands;
    const int stripe_width = std::max(8, width / 8);
    for (int i = 0; i < 4; ++i) {
        const int center = (2 * i + 1) * width / 8;
        StripeBand band;
        band.x0 = center - stripe_width / 2;
        band.x1 = band.x0 + stripe_width;
        band.theta = directions[i];
        bands.push_back(band);
    }
    return bands;
}

SampleField make_stripe_field(int width, int height, double sigma_major, double sigma_minor,
                              double stripe_transmission) {
    SampleField field = SampleField::uniform(width, height, 1.0, 0.0, 0.0, 0.0);
    for (const StripeBand& band : stripe_layout(width)) {
        for (int y = 0; y < height; ++y)
            for (int x = std::max(0, band.x0); x < std::min(width, band.x1); ++x) {
                field.transmission.at(x, y) = stripe_transmission;
                field.theta.at(x, y) = band.theta;
                field.sigma_x.at(x, y) = sigma_minor;
                field.sigma_y.at(x, y) = sigma_major;  // major axis, rotated by theta
            }
    }
    return field;
}

RetrieveResult retrieve_from_images(const Image& grid_image, const Image& sample_grid_image,
                                    const RetrieveParams& params) {
    RetrieveResult result;

    if (params.period) {
        result.period = *params.period;
        if (!(result.period > 2.0)) throw std::invalid_argument("period must exceed 2 pixels");
    } else {
        result.period = estimate_grid_period(grid_image);
        result.period_was_estimated = true;
    }

    const int k_floor = ceil_period(result.period);
    if (params.kernel_size) {
        result.kernel_size = *params.kernel_size;
        if (result.kernel_size < k_floor)
            throw std::invalid_argument("kernel size must be at least ceil(period)");
    } else {
        result.kernel_size = select_kernel_size(grid_image, result.period, k_floor, 3 * k_floor);
        result.kernel_was_selected = true;
    }

    CoefficientMaps raw = compute_coefficient_maps(grid_image, sample_grid_image,
                                                   result.kernel_size, result.period,
                                                   params.workers);
    result.coeffs = average_over_period(raw, result.period, params.workers);
    result.solution = retrieve_field(result.coeffs, result.period, params.workers);

    if (params.geometry) {
        result.angles = angles_from_solution(result.solution, *params.geometry);
        result.metrics = compute_metrics(*result.angles);
    } else {
        result.warnings.push_back(
            "geometry missing: angle maps skipped, strength/asymmetry use pixel units");
        AngleMaps pixel_units;
        pixel_units.theta_M_sq = result.solution.sigma_M_sq;
        pixel_units.theta_m_sq = result.solution.sigma_m_sq;
        pixel_units.theta = result.solution.theta;
        pixel_units.valid = result.solution.valid;
        result.metrics = compute_metrics(pixel_units);
    }

    auto [sx, sy] = phase_shift_maps(result.coeffs, result.period);
    result.shift_x = std::move(sx);
    result.shift_y = std::move(sy);

    result.hsv = compose_hsv(result.solution.theta, result.metrics, result.solution.valid,
                             params.max_rms, &result.max_rms_used);
    return result;
}

namespace {

struct FrameIo {
    std::string sample_grid_path;
    Image sample_grid;
};

Geometry geometry_from_config(const RunConfig& config) {
    Geometry g;
    g.odd_m = *config.odd_m;
    g.pixel_size_m = *config.pixel_size_m;
    g.energy_keV = config.energy_keV;
    g.sample_to_grid_m = config.sample_to_grid_m;
    g.validate();
    return g;
}

KeyValues base_metadata(const char* mode) {
    KeyValues kv;
    kv.emplace_back("tool", "gridfield");
    kv.emplace_back("mode", mode);
    kv.emplace_back("complete", "0");
    return kv;
}

void append_geometry(KeyValues& kv, const RunConfig& config) {
    if (config.odd_m) kv.emplace_back("odd_m", fmt_g17(*config.odd_m));
    if (config.pixel_size_m) kv.emplace_back("pixel_size_m", fmt_g17(*config.pixel_size_m));
    if (config.energy_keV) kv.emplace_back("energy_keV", fmt_g17(*config.energy_keV));
    if (config.sample_to_grid_m)
        kv.emplace_back("sample_to_grid_m", fmt_g17(*config.sample_to_grid_m));
}

void set_complete(KeyValues& kv) {
    for (auto& [key, value] : kv)
        if (key == "complete") { value = "1"; return; }
}

void write_bundle(const fs::path& dir, const RetrieveResult& result, KeyValues meta,
                  int frame_width, int frame_height, const std::vector<Roi>& rois) {
    fs::create_directories(dir);
    const bool physical = result.angles.has_value();

    meta.emplace_back("map_width", std::to_string(result.solution.width()));
    meta.emplace_back("map_height", std::to_string(result.solution.height()));
    meta.emplace_back("origin_x", std::to_string(result.coeffs.origin_x));
    meta.emplace_back("origin_y", std::to_string(result.coeffs.origin_y));
    meta.emplace_back("frame_width", std::to_string(frame_width));
    meta.emplace_back("frame_height", std::to_string(frame_height));
    meta.emplace_back("period", fmt_g17(result.period));
    meta.emplace_back("period_source", result.period_was_estimated ? "auto" : "explicit");
    meta.emplace_back("kernel_size", std::to_string(result.kernel_size));
    meta.emplace_back("kernel_source", result.kernel_was_selected ? "auto" : "explicit");
    meta.emplace_back("angle_units", physical ? "radians^2" : "pixels^2");
    meta.emplace_back("murad_per_radian", "1000000");
    meta.emplace_back("max_rms", fmt_g17(result.max_rms_used));
    meta.emplace_back("max_rms_units", physical ? "radians" : "pixels");
    for (const std::string& w : result.warnings) meta.emplace_back("warning", w);

    const fs::path meta_path = dir / "run_meta.txt";
    write_key_values(meta_path, meta);  // marks the bundle incomplete while maps land

    const KeyValues origin{{"origin_x", std::to_string(result.coeffs.origin_x)},
                           {"origin_y", std::to_string(result.coeffs.origin_y)},
                           {"frame_width", std::to_string(frame_width)},
                           {"frame_height", std::to_string(frame_height)}};

    write_float_map(dir / "transmission.f32", result.solution.transmission, "dimensionless",
                    false, origin);
    write_float_map(dir / "theta.f32", result.solution.theta, "radians", false, origin);
    write_float_map(dir / "sigma_M_sq.f32", result.solution.sigma_M_sq, "pixels^2", true, origin);
    write_float_map(dir / "sigma_m_sq.f32", result.solution.sigma_m_sq, "pixels^2", true, origin);
    if (result.angles) {
        write_float_map(dir / "theta_M_sq.f32", result.angles->theta_M_sq, "radians^2", true,
                        origin);
        write_float_map(dir / "theta_m_sq.f32", result.angles->theta_m_sq, "radians^2", true,
                        origin);
    }
    write_float_map(dir / "rms_sq.f32", result.metrics.rms_sq,
                    physical ? "radians^2" : "pixels^2", true, origin);
    write_float_map(dir / "asy.f32", result.metrics.asy, "dimensionless", false, origin);
    write_float_map(dir / "shift_x.f32", result.shift_x, "pixels", false, origin);
    write_float_map(dir / "shift_y.f32", result.shift_y, "pixels", false, origin);
    write_mask(dir / "valid.u8", result.solution.valid, origin);
    write_mask(dir / "theta_degenerate.u8", result.solution.theta_degenerate, origin);
    write_rgb_png(dir / "hsv.png", result.hsv);

    if (!rois.empty()) {
        const MapBundle bundle = load_bundle(dir);
        const std::vector<RoiStats> stats = run_roi_stats(bundle, rois);
        std::ofstream table(dir / "roi_stats.tsv");
        table << format_roi_table(stats, physical);
    }

    set_complete(meta);
    write_key_values(meta_path, meta);
}

}  // namespace

void run_synth(const RunConfig& config) {
    if (config.out_dir.empty()) throw PipelineError("config", "output directory required");
    stage("synth", [&] {
        config.grid.validate();
        SampleField field;
        if (config.field_preset == "uniform") {
            field = SampleField::uniform(config.width, config.height, config.transmission,
                                         config.theta, config.sigma_x, config.sigma_y);
            if (config.shift_x != 0.0) field.shift_x = Image(config.width, config.height, config.shift_x);
            if (config.shift_y != 0.0) field.shift_y = Image(config.width, config.height, config.shift_y);
        } else if (config.field_preset == "stripes") {
            field = make_stripe_field(config.width, config.height);
        } else {
            throw std::invalid_argument("unknown field preset '" + config.field_preset + "'");
        }

        auto [ig, isg] = synthesize_pair(config.width, config.height, config.grid, field,
                                         config.noise, config.seed);

        const fs::path dir(config.out_dir);
        fs::create_directories(dir);
        KeyValues meta = base_metadata("synth");
        meta.emplace_back("width", std::to_string(config.width));
        meta.emplace_back("height", std::to_string(config.height));
        meta.emplace_back("period", fmt_g17(config.grid.period));
        meta.emplace_back("alpha", fmt_g17(config.grid.alpha));
        meta.emplace_back("field", config.field_preset);
        meta.emplace_back("transmission", fmt_g17(config.transmission));
        meta.emplace_back("theta", fmt_g17(config.theta));
        meta.emplace_back("sigma_x", fmt_g17(config.sigma_x));
        meta.emplace_back("sigma_y", fmt_g17(config.sigma_y));
        meta.emplace_back("shift_x", fmt_g17(config.shift_x));
        meta.emplace_back("shift_y", fmt_g17(config.shift_y));
        meta.emplace_back("noise", config.noise.kind == NoiseKind::poisson ? "poisson" : "none");
        if (config.noise.kind == NoiseKind::poisson) {
            meta.emplace_back("counts_per_unit_intensity",
                              fmt_g17(config.noise.counts_per_unit_intensity));
            meta.emplace_back("noise_on_grid", config.noise.apply_to_grid ? "1" : "0");
        }
        meta.emplace_back("seed", std::to_string(config.seed));
        append_geometry(meta, config);
        const fs::path meta_path = dir / "synth_meta.txt";
        write_key_values(meta_path, meta);

        write_float_map(dir / "grid.f32", ig, "intensity", false);
        write_float_map(dir / "sample_grid.f32", isg, "intensity", false);
        write_float_map(dir / "truth_transmission.f32", field.transmission, "dimensionless", false);
        write_float_map(dir / "truth_theta.f32", field.theta, "radians", false);
        write_float_map(dir / "truth_sigma_x.f32", field.sigma_x, "pixels", false);
        write_float_map(dir / "truth_sigma_y.f32", field.sigma_y, "pixels", false);
        if (field.shift_x) write_float_map(dir / "truth_shift_x.f32", *field.shift_x, "pixels", false);
        if (field.shift_y) write_float_map(dir / "truth_shift_y.f32", *field.shift_y, "pixels", false);
        if (config.write_png_frames) {
            write_gray16_png(dir / "grid.png", ig);
            write_gray16_png(dir / "sample_grid.png", isg);
        }

        set_complete(meta);
        write_key_values(meta_path, meta);
        return 0;
    });
}

void run_retrieve(const RunConfig& config) {
    if (config.out_dir.empty()) throw PipelineError("config", "output directory required");
    if (config.grid_path.empty()) throw PipelineError("config", "grid-only image required");
    if (config.sample_grid_paths.empty())
        throw PipelineError("config", "at least one sample-and-grid image required");
    if (config.odd_m.has_value() != config.pixel_size_m.has_value())
        throw PipelineError("config", "geometry needs both odd_m and pixel_size_m");

    // Load and correct every input frame up front.
    Image flat, dark;
    const bool correct = !config.flat_path.empty() || !config.dark_path.empty();
    if (correct) {
        if (config.flat_path.empty() || config.dark_path.empty())
            throw PipelineError("config", "flat/dark correction needs both images");
        stage("load-inputs", [&] {
            flat = read_image_any(config.flat_path);
            dark = read_image_any(config.dark_path);
            return 0;
        });
    }
    auto load_corrected = [&](const std::string& path) {
        return stage("flat-dark-correct", [&] {
            Image img = stage("load-inputs", [&] { return read_image_any(path); });
            if (correct)
                img = flat_dark_correct(img, flat, dark, nullptr, config.flat_min_valid_fraction);
            return img;
        });
    };

    const Image grid_image = load_corrected(config.grid_path);

    Image sample_only;
    if (!config.sample_only_path.empty()) sample_only = load_corrected(config.sample_only_path);

    // Period and kernel size come from the grid-only reference once per run,
    // never per frame.
    RetrieveParams params;
    params.workers = config.workers;
    params.max_rms = config.max_rms;
    if (config.odd_m) params.geometry = geometry_from_config(config);

    double period;
    bool period_auto = !config.period.has_value();
    period = stage("estimate-period", [&] {
        return config.period ? *config.period : estimate_grid_period(grid_image);
    });
    if (!(period > 2.0)) throw PipelineError("estimate-period", "period must exceed 2 pixels");

    bool kernel_auto = !config.kernel_size.has_value();
    const int kernel_size = stage("select-kernel", [&] {
        if (config.kernel_size) {
            if (*config.kernel_size < ceil_period(period))
                throw std::invalid_argument("kernel size must be at least ceil(period)");
            return *config.kernel_size;
        }
        const int k_floor = ceil_period(period);
        return select_kernel_size(grid_image, period, k_floor, 3 * k_floor);
    });
    params.period = period;
    params.kernel_size = kernel_size;

    const bool sequence = config.sample_grid_paths.size() > 1;
    for (size_t frame = 0; frame < config.sample_grid_paths.size(); ++frame) {
        const std::string& path = config.sample_grid_paths[frame];
        Image sample_grid = load_corrected(path);
        if (!sample_only.empty())
            sample_grid = stage("divide-sample-only", [&] {
                return divide_sample_only(sample_grid, sample_only, nullptr,
                                          config.divide_threshold_rel);
            });

        RetrieveResult result = stage("retrieve", [&] {
            return retrieve_from_images(grid_image, sample_grid, params);
        });
        // Selection provenance belongs to the run, not the per-frame call.
        result.period_was_estimated = period_auto;
        result.kernel_was_selected = kernel_auto;

        KeyValues meta = base_metadata("retrieve");
        meta.emplace_back("grid", config.grid_path);
        meta.emplace_back("sample_grid", path);
        if (sequence) {
            meta.emplace_back("frame_index", std::to_string(frame));
            meta.emplace_back("frame_count", std::to_string(config.sample_grid_paths.size()));
        }
        if (!config.sample_only_path.empty()) meta.emplace_back("sample_only", config.sample_only_path);
        if (correct) {
            meta.emplace_back("flat", config.flat_path);
            meta.emplace_back("dark", config.dark_path);
        }
        append_geometry(meta, config);
        meta.emplace_back("workers", std::to_string(config.workers));

        fs::path dir(config.out_dir);
        if (sequence) {
            char sub[32];
            std::snprintf(sub, sizeof sub, "frame_%04zu", frame);
            dir /= sub;
        }
        stage("write-outputs", [&] {
            write_bundle(dir, result, std::move(meta), grid_image.width(), grid_image.height(),
                         config.rois);
            return 0;
        });
    }
}

void run_hsv(const fs::path& bundle_dir, std::optional<double> max_rms, const fs::path& out_png) {
    stage("hsv", [&] {
        const MapBundle bundle = load_bundle(bundle_dir);
        MetricMaps metrics{bundle.rms_sq, bundle.asy};
        double used = 0.0;
        const RgbImage img = compose_hsv(bundle.theta, metrics, bundle.valid, max_rms, &used);
        const fs::path out = out_png.empty() ? bundle_dir / "hsv.png" : out_png;
        write_rgb_png(out, img);
        KeyValues kv{{"max_rms", fmt_g17(used)},
                     {"max_rms_source", max_rms ? "explicit" : "auto"}};
        write_key_values(out.string() + ".meta", kv);
        return 0;
    });
}

double run_period(const RunConfig& config) {
    if (config.grid_path.empty()) throw PipelineError("config", "grid-only image required");
    return stage("estimate-period", [&] {
        Image grid = read_image_any(config.grid_path);
        if (!config.flat_path.empty() && !config.dark_path.empty()) {
            const Image flat = read_image_any(config.flat_path);
            const Image dark = read_image_any(config.dark_path);
            grid = flat_dark_correct(grid, flat, dark, nullptr, config.flat_min_valid_fraction);
        }
        return estimate_grid_period(grid);
    });
}

MapBundle load_bundle(const fs::path& dir) {
    MapBundle bundle;
    bundle.meta = read_key_values(dir / "run_meta.txt");
    bundle.transmission = read_float_map(dir / "transmission.f32");
    bundle.theta = read_float_map(dir / "theta.f32");
    bundle.sigma_M_sq = read_float_map(dir / "sigma_M_sq.f32");
    bundle.sigma_m_sq = read_float_map(dir / "sigma_m_sq.f32");
    if (fs::exists(dir / "theta_M_sq.f32")) {
        bundle.theta_M_sq = read_float_map(dir / "theta_M_sq.f32");
        bundle.theta_m_sq = read_float_map(dir / "theta_m_sq.f32");
        bundle.has_geometry = true;
    }
    bundle.rms_sq = read_float_map(dir / "rms_sq.f32");
    bundle.asy = read_float_map(dir / "asy.f32");
    bundle.shift_x = read_float_map(dir / "shift_x.f32");
    bundle.shift_y = read_float_map(dir / "shift_y.f32");
    bundle.valid = read_mask(dir / "valid.u8");
    return bundle;
}

namespace {

struct Accumulator {
    double sum = 0.0, sum_sq = 0.0;
    size_t n = 0;
    void add(double v) { sum += v; sum_sq += v * v; ++n; }
    double mean() const { return sum / static_cast<double>(n); }
    double stddev() const {
        const double m = mean();
        return std::sqrt(std::max(0.0, sum_sq / static_cast<double>(n) - m * m));
    }
};

}  // namespace

std::vector<RoiStats> run_roi_stats(const MapBundle& bundle, const std::vector<Roi>& rois) {
    const double unit = bundle.has_geometry ? 1e6 : 1.0;  // radians -> microradians
    const Image& M = bundle.has_geometry ? *bundle.theta_M_sq : bundle.sigma_M_sq;
    const Image& m = bundle.has_geometry ? *bundle.theta_m_sq : bundle.sigma_m_sq;

    std::vector<RoiStats> out;
    for (const Roi& roi : rois) {
        if (roi.x < 0 || roi.y < 0 || roi.x + roi.width > bundle.valid.width() ||
            roi.y + roi.height > bundle.valid.height())
            throw std::invalid_argument("ROI '" + roi.name + "' lies outside the map bounds");

        Accumulator aM, am, ath, aT, arms, aasy;
        for (int y = roi.y; y < roi.y + roi.height; ++y)
            for (int x = roi.x; x < roi.x + roi.width; ++x) {
                if (!bundle.valid.at(x, y)) continue;
                aM.add(displayed_signed(M.at(x, y)) * unit);
                am.add(displayed_signed(m.at(x, y)) * unit);
                ath.add(bundle.theta.at(x, y));
                aT.add(bundle.transmission.at(x, y));
                arms.add(displayed_signed(bundle.rms_sq.at(x, y)) * unit);
                aasy.add(bundle.asy.at(x, y));
            }
        if (aM.n == 0)
            throw std::runtime_error("ROI '" + roi.name + "' contains no valid pixels");

        RoiStats s;
        s.name = roi.name;
        s.pixels = aM.n;
        s.theta_M_mean = aM.mean(); s.theta_M_std = aM.stddev();
        s.theta_m_mean = am.mean(); s.theta_m_std = am.stddev();
        s.theta_mean = ath.mean(); s.theta_std = ath.stddev();
        s.T_mean = aT.mean(); s.T_std = aT.stddev();
        s.rms_mean = arms.mean(); s.rms_std = arms.stddev();
        s.asy_mean = aasy.mean(); s.asy_std = aasy.stddev();
        out.push_back(s);
    }
    return out;
}

std::string format_roi_table(const std::vector<RoiStats>& stats, bool physical_units) {
    const char* u = physical_units ? "urad" : "px";
    std::ostringstream out;
    out << "roi\tpixels";
    for (const char* col : {"theta_M", "theta_m"})
        out << '\t' << col << '_' << u << "_mean\t" << col << '_' << u << "_std";
    out << "\ttheta_rad_mean\ttheta_rad_std\tT_mean\tT_std";
    out << "\ttheta_rms_" << u << "_mean\ttheta_rms_" << u << "_std";
    out << "\ttheta_asy_mean\ttheta_asy_std\n";
    for (const RoiStats& s : stats) {
        out << s.name << '\t' << s.pixels;
        for (double v : {s.theta_M_mean, s.theta_M_std, s.theta_m_mean, s.theta_m_std,
                         s.theta_mean, s.theta_std, s.T_mean, s.T_std, s.rms_mean, s.rms_std,
                         s.asy_mean, s.asy_std})
            out << '\t' << fmt_sci(v);
        out << '\n';
    }
    return out.str();
}

}  // namespace gridfield
