// Command-line front end: synthesis, retrieval, HSV re-rendering, ROI
// statistics and period estimation around the gridfield library.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gridfield/pipeline.hpp"

namespace fs = std::filesystem;
using namespace gridfield;

namespace {

struct CliState {
    RunConfig config;
    std::vector<std::string> roi_specs;
    double max_rms_in = 0.0;
    bool max_rms_given = false;
    std::string noise_kind = "none";
    double counts = 0.0;
    bool noise_on_grid = false;
    double odd = 0.0, pixel_size = 0.0, energy = 0.0, sample_to_grid = 0.0;
    std::string bundle_dir;
    std::string out_file;
    double period_in = 0.0;
    int kernel_in = 0;
};

void add_geometry_flags(CLI::App* cmd, CliState& st) {
    cmd->add_option("--odd", st.odd, "Object-to-detector distance in meters");
    cmd->add_option("--pixel-size", st.pixel_size, "Effective pixel size in meters");
    cmd->add_option("--energy", st.energy, "X-ray energy in keV (metadata only)");
    cmd->add_option("--sample-to-grid", st.sample_to_grid,
                    "Sample-to-grid distance in meters (metadata only)");
}

bool option_given(CLI::App* cmd, const char* name) {
    const CLI::Option* opt = cmd->get_option_no_throw(name);
    return opt && opt->count() > 0;
}

void finish_config(CliState& st, CLI::App* cmd) {
    if (option_given(cmd, "--odd")) st.config.odd_m = st.odd;
    if (option_given(cmd, "--pixel-size")) st.config.pixel_size_m = st.pixel_size;
    if (option_given(cmd, "--energy")) st.config.energy_keV = st.energy;
    if (option_given(cmd, "--sample-to-grid")) st.config.sample_to_grid_m = st.sample_to_grid;
    if (cmd->get_name() == "retrieve") {
        if (option_given(cmd, "--period")) st.config.period = st.period_in;
        if (option_given(cmd, "--kernel-size")) st.config.kernel_size = st.kernel_in;
    }
    for (const std::string& spec : st.roi_specs) st.config.rois.push_back(parse_roi(spec));
    if (st.max_rms_given) {
        // Physical runs take the scale in microradians; pixel-unit runs
        // (no geometry) take it in pixels.
        const bool physical = st.config.odd_m.has_value();
        st.config.max_rms = physical ? st.max_rms_in * 1e-6 : st.max_rms_in;
    }
    if (st.noise_kind == "poisson") {
        st.config.noise.kind = NoiseKind::poisson;
        st.config.noise.counts_per_unit_intensity = st.counts;
        st.config.noise.apply_to_grid = st.noise_on_grid;
    }
}

std::vector<Roi> parse_rois(const std::vector<std::string>& specs) {
    std::vector<Roi> rois;
    for (const std::string& s : specs) rois.push_back(parse_roi(s));
    return rois;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Single-grid directional dark-field synthesis and retrieval"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from a config file (sections per subcommand)");

    CliState st;

    // synth ------------------------------------------------------------
    CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic grid / sample pair");
    synth->add_option("--out,-o", st.config.out_dir, "Output directory")->required();
    synth->add_option("--width", st.config.width, "Image width in pixels");
    synth->add_option("--height", st.config.height, "Image height in pixels");
    synth->add_option("--period,-p", st.config.grid.period, "Grid period in pixels");
    synth->add_option("--alpha", st.config.grid.alpha, "Grid absorption in [0,1]");
    synth->add_option("--transmission,-T", st.config.transmission, "Sample transmission");
    synth->add_option("--theta", st.config.theta, "Blur rotation in radians");
    synth->add_option("--sigma-x", st.config.sigma_x, "Blur width along x in pixels");
    synth->add_option("--sigma-y", st.config.sigma_y, "Blur width along y in pixels");
    synth->add_option("--shift-x", st.config.shift_x, "Rigid grid displacement in x, pixels");
    synth->add_option("--shift-y", st.config.shift_y, "Rigid grid displacement in y, pixels");
    synth->add_option("--field", st.config.field_preset, "Field preset: uniform or stripes");
    synth->add_option("--noise", st.noise_kind, "Noise model: none or poisson");
    synth->add_option("--counts", st.counts, "Poisson counts per unit intensity");
    synth->add_flag("--noise-on-grid", st.noise_on_grid,
                    "Apply noise to the grid-only image as well");
    synth->add_option("--seed", st.config.seed, "Random seed");
    synth->add_flag("--png", st.config.write_png_frames, "Also write 16-bit grayscale PNG frames");
    add_geometry_flags(synth, st);

    // retrieve ----------------------------------------------------------
    CLI::App* retrieve = app.add_subcommand("retrieve", "Run the dark-field retrieval pipeline");
    retrieve->add_option("--grid,-g", st.config.grid_path, "Grid-only image")->required();
    retrieve->add_option("--sample-grid,-s", st.config.sample_grid_paths,
                         "Sample-and-grid image(s); several paths form a frame sequence")
        ->required();
    retrieve->add_option("--sample-only", st.config.sample_only_path,
                         "Sample-only image to divide out");
    retrieve->add_option("--flat", st.config.flat_path, "Flat-field image");
    retrieve->add_option("--dark", st.config.dark_path, "Dark-current image");
    retrieve->add_option("--period,-p", st.period_in, "Grid period in pixels (omit to estimate)");
    retrieve->add_option("--kernel-size,-k", st.kernel_in,
                         "Correlation kernel size in pixels (omit to select)");
    retrieve->add_option("--max-rms", st.max_rms_in,
                         "Display scale for the HSV value channel (microradians, or pixels "
                         "without geometry)")
        ->each([&](const std::string&) { st.max_rms_given = true; });
    retrieve->add_option("--roi", st.roi_specs, "Named ROI rectangle name:x,y,w,h (repeatable)");
    retrieve->add_option("--workers,-j", st.config.workers, "Worker threads (0 = all)");
    retrieve->add_option("--flat-min-valid", st.config.flat_min_valid_fraction,
                         "Minimum fraction of positive flat-dark pixels");
    retrieve->add_option("--divide-threshold", st.config.divide_threshold_rel,
                         "Sample-only denominator threshold relative to its mean");
    retrieve->add_option("--out,-o", st.config.out_dir, "Output directory")->required();
    add_geometry_flags(retrieve, st);

    // hsv ----------------------------------------------------------------
    CLI::App* hsv = app.add_subcommand("hsv", "Re-render the HSV image from a retrieval bundle");
    hsv->add_option("--bundle,-b", st.bundle_dir, "Retrieval output directory")->required();
    double hsv_max = 0.0;
    bool hsv_max_given = false;
    hsv->add_option("--max-rms", hsv_max,
                    "Display scale (microradians, or pixels for pixel-unit bundles)")
        ->each([&](const std::string&) { hsv_max_given = true; });
    hsv->add_option("--out,-o", st.out_file, "Output PNG path (default <bundle>/hsv.png)");

    // roi-stats ------------------------------------------------------------
    CLI::App* roi_stats = app.add_subcommand("roi-stats", "Mask-aware ROI statistics table");
    roi_stats->add_option("--bundle,-b", st.bundle_dir, "Retrieval output directory")->required();
    roi_stats->add_option("--roi", st.roi_specs, "Named ROI rectangle name:x,y,w,h (repeatable)")
        ->required();
    roi_stats->add_option("--out,-o", st.out_file, "Write the table here instead of stdout");

    // period ----------------------------------------------------------------
    CLI::App* period = app.add_subcommand("period", "Estimate the grid period from an image");
    period->add_option("--grid,-g", st.config.grid_path, "Grid-only image")->required();
    period->add_option("--flat", st.config.flat_path, "Flat-field image");
    period->add_option("--dark", st.config.dark_path, "Dark-current image");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*synth) {
            finish_config(st, synth);
            run_synth(st.config);
        } else if (*retrieve) {
            finish_config(st, retrieve);
            run_retrieve(st.config);
        } else if (*hsv) {
            std::optional<double> scale;
            if (hsv_max_given) {
                const KeyValues meta = read_key_values(fs::path(st.bundle_dir) / "run_meta.txt");
                const std::string* units = find_key(meta, "max_rms_units");
                const bool physical = units && *units == "radians";
                scale = physical ? hsv_max * 1e-6 : hsv_max;
            }
            run_hsv(st.bundle_dir, scale, st.out_file.empty() ? fs::path() : fs::path(st.out_file));
        } else if (*roi_stats) {
            const MapBundle bundle = load_bundle(st.bundle_dir);
            const auto stats = run_roi_stats(bundle, parse_rois(st.roi_specs));
            const std::string table = format_roi_table(stats, bundle.has_geometry);
            if (st.out_file.empty()) {
                std::cout << table;
            } else {
                std::ofstream out(st.out_file);
                if (!out) throw IoError("cannot open " + st.out_file);
                out << table;
            }
        } else if (*period) {
            std::printf("%.6f\n", run_period(st.config));
        }
    } catch (const std::exception& e) {
        std::cerr << "gridfield: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
