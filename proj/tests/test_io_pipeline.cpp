#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "gridfield/io.hpp"
#include "gridfield/pipeline.hpp"
#include "test_helpers.hpp"

using namespace gridfield;
using namespace gridfield::testing;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("gridfield_test_" + tag);
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::vector<char> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

bool same_bytes(const fs::path& a, const fs::path& b) { return slurp(a) == slurp(b); }

}  // namespace

TEST_CASE("float map round trip is float32-exact, NaN included") {
    TempDir tmp("f32");
    Image img(7, 5);
    for (size_t i = 0; i < img.size(); ++i) img[i] = -3.0 + 0.37 * static_cast<double>(i);
    img.at(2, 1) = quiet_nan();
    write_float_map(tmp.path / "m.f32", img, "pixels^2", true, {{"origin_x", "4"}});

    KeyValues meta;
    const Image back = read_float_map(tmp.path / "m.f32", &meta);
    REQUIRE(back.same_shape(img));
    for (size_t i = 0; i < img.size(); ++i) {
        if (std::isnan(img[i]))
            CHECK(std::isnan(back[i]));
        else
            CHECK(back[i] == static_cast<double>(static_cast<float>(img[i])));
    }
    CHECK(*find_key(meta, "units") == "pixels^2");
    CHECK(*find_key(meta, "signed_square") == "1");
    CHECK(*find_key(meta, "origin_x") == "4");

    // The payload is bit-exact little-endian float32.
    const auto bytes = slurp(tmp.path / "m.f32");
    REQUIRE(bytes.size() == img.size() * 4);
    float first;
    std::memcpy(&first, bytes.data(), 4);
    CHECK(first == static_cast<float>(img[0]));
}

TEST_CASE("mask round trip") {
    TempDir tmp("mask");
    Mask mask(9, 4, true);
    mask.set(3, 2, false);
    mask.set(8, 0, false);
    write_mask(tmp.path / "m.u8", mask);
    const Mask back = read_mask(tmp.path / "m.u8");
    REQUIRE(back.width() == 9);
    REQUIRE(back.height() == 4);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 9; ++x) CHECK(back.at(x, y) == mask.at(x, y));
}

TEST_CASE("16-bit grayscale PNG round trip within quantization") {
    TempDir tmp("png");
    auto [ig, isg] = uniform_pair(48, {8.0, 0.2}, 1.0, 0.0, 0.0, 0.0);
    write_gray16_png(tmp.path / "g.png", ig);
    const Image back = read_gray_png(tmp.path / "g.png");
    REQUIRE(back.same_shape(ig));
    CHECK(max_abs_diff_finite(back, ig) <= 0.5 / 65535.0 + 1e-9);
}

TEST_CASE("rgb PNG writes a decodable file") {
    TempDir tmp("rgb");
    RgbImage img(4, 3);
    img.pixel(1, 1)[0] = 200;
    write_rgb_png(tmp.path / "c.png", img);
    CHECK(fs::file_size(tmp.path / "c.png") > 0);
}

TEST_CASE("flat/dark correction: identities and exact inversion") {
    const int n = 24;
    const Image flat = random_image(n, n, 1, 0.8, 1.2);
    const Image dark = random_image(n, n, 2, 0.01, 0.05);
    Image zeros(n, n, 0.0);

    // raw = flat with zero dark -> all ones.
    const Image ones = flat_dark_correct(flat, flat, zeros);
    for (size_t i = 0; i < ones.size(); ++i) CHECK(ones[i] == doctest::Approx(1.0).epsilon(1e-12));

    // raw = dark -> all zeros.
    const Image z = flat_dark_correct(dark, flat, dark);
    for (size_t i = 0; i < z.size(); ++i) CHECK(z[i] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));

    // Constructed raw recovers the underlying signal exactly.
    const Image signal = random_image(n, n, 3, 0.2, 1.0);
    Image raw(n, n);
    for (size_t i = 0; i < raw.size(); ++i) raw[i] = signal[i] * (flat[i] - dark[i]) + dark[i];
    const Image recovered = flat_dark_correct(raw, flat, dark);
    CHECK(max_abs_diff_finite(recovered, signal) < 1e-12);
}

TEST_CASE("flat/dark correction flags bad denominators and rejects bad flats") {
    const int n = 16;
    Image flat(n, n, 1.0);
    Image dark(n, n, 0.1);
    Image raw(n, n, 0.7);
    flat.at(4, 4) = 0.05;  // below dark
    Mask invalid;
    const Image out = flat_dark_correct(raw, flat, dark, &invalid, 0.9);
    CHECK(!invalid.at(4, 4));
    CHECK(std::isnan(out.at(4, 4)));
    CHECK(invalid.at(0, 0));

    Image bad_flat(n, n, 0.0);
    CHECK_THROWS(flat_dark_correct(raw, bad_flat, dark, nullptr, 0.99));
    CHECK_THROWS_AS(flat_dark_correct(raw, Image(8, 8, 1.0), dark), std::invalid_argument);
}

TEST_CASE("sample-only division: identity, separable recovery, zero masking") {
    const int n = 20;
    const Image isg = random_image(n, n, 5, 0.5, 1.0);
    const Image ones(n, n, 1.0);
    const Image unchanged = divide_sample_only(isg, ones);
    CHECK(max_abs_diff_finite(unchanged, isg) == 0.0);

    // Separable synthetic: dividing out T*f leaves the grid factor.
    const Image gridpart = random_image(n, n, 6, 0.8, 1.2);
    const Image sample = random_image(n, n, 7, 0.4, 0.9);
    Image combined(n, n);
    for (size_t i = 0; i < combined.size(); ++i) combined[i] = gridpart[i] * sample[i];
    const Image recovered = divide_sample_only(combined, sample);
    CHECK(max_abs_diff_finite(recovered, gridpart) < 1e-12);

    Image with_zero = sample;
    with_zero.at(3, 3) = 0.0;
    Mask invalid;
    const Image masked = divide_sample_only(combined, with_zero, &invalid);
    CHECK(!invalid.at(3, 3));
    CHECK(std::isnan(masked.at(3, 3)));
}

TEST_CASE("roi parsing") {
    const Roi roi = parse_roi("pith:3,4,10,20");
    CHECK(roi.name == "pith");
    CHECK(roi.x == 3);
    CHECK(roi.y == 4);
    CHECK(roi.width == 10);
    CHECK(roi.height == 20);
    CHECK_THROWS_AS(parse_roi("bad"), std::invalid_argument);
    CHECK_THROWS_AS(parse_roi("r:1,2,0,5"), std::invalid_argument);
}

TEST_CASE("synth/retrieve file pipeline with ROI statistics") {
    TempDir tmp("pipe");
    RunConfig synth;
    synth.out_dir = (tmp.path / "fix").string();
    synth.width = 160;
    synth.height = 160;
    synth.grid = {8.0, 0.2};
    synth.transmission = 0.8;
    synth.theta = kPi / 6.0;
    synth.sigma_x = 1.0;
    synth.sigma_y = 3.0;
    run_synth(synth);
    CHECK(fs::exists(tmp.path / "fix" / "grid.f32"));
    CHECK(fs::exists(tmp.path / "fix" / "truth_sigma_y.f32"));
    const KeyValues synth_meta = read_key_values(tmp.path / "fix" / "synth_meta.txt");
    CHECK(*find_key(synth_meta, "complete") == "1");
    CHECK(*find_key(synth_meta, "seed") == "0");

    RunConfig ret;
    ret.grid_path = (tmp.path / "fix" / "grid.f32").string();
    ret.sample_grid_paths = {(tmp.path / "fix" / "sample_grid.f32").string()};
    ret.out_dir = (tmp.path / "out").string();
    ret.odd_m = 1.5;
    ret.pixel_size_m = 12.3e-6;
    ret.workers = 2;
    ret.rois = {parse_roi("center:40,40,40,40")};
    run_retrieve(ret);

    const MapBundle bundle = load_bundle(tmp.path / "out");
    CHECK(bundle.has_geometry);
    CHECK(*find_key(bundle.meta, "complete") == "1");
    CHECK(*find_key(bundle.meta, "period_source") == "auto");
    CHECK(*find_key(bundle.meta, "kernel_source") == "auto");

    const auto stats = run_roi_stats(bundle, ret.rois);
    REQUIRE(stats.size() == 1);
    CHECK(stats[0].pixels == 1600);
    CHECK(stats[0].T_mean == doctest::Approx(0.8).epsilon(1e-3));
    CHECK(stats[0].theta_M_mean == doctest::Approx(24.6).epsilon(0.01));  // microradians
    CHECK(stats[0].theta_m_mean == doctest::Approx(8.2).epsilon(0.01));
    CHECK(stats[0].rms_mean == doctest::Approx(18.336).epsilon(0.01));
    CHECK(stats[0].asy_mean == doctest::Approx(2.0 / 3.0).epsilon(0.01));
    CHECK(fs::exists(tmp.path / "out" / "roi_stats.tsv"));

    const std::string table = format_roi_table(stats, true);
    CHECK(table.find("theta_M_urad_mean") != std::string::npos);
    CHECK(table.find("center\t1600\t") != std::string::npos);

    SUBCASE("bundles are reproducible from their recorded metadata alone") {
        RunConfig redo = ret;
        redo.out_dir = (tmp.path / "redo").string();
        redo.period = std::stod(*find_key(bundle.meta, "period"));
        redo.kernel_size = std::stoi(*find_key(bundle.meta, "kernel_size"));
        redo.rois.clear();
        run_retrieve(redo);
        for (const char* name : {"transmission.f32", "theta.f32", "sigma_M_sq.f32",
                                 "sigma_m_sq.f32", "rms_sq.f32", "asy.f32", "shift_x.f32",
                                 "shift_y.f32", "valid.u8", "hsv.png"})
            CHECK(same_bytes(tmp.path / "out" / name, tmp.path / "redo" / name));
    }

    SUBCASE("roi outside the map bounds or fully invalid fails by name") {
        CHECK_THROWS_WITH_AS(run_roi_stats(bundle, {parse_roi("huge:0,0,500,500")}),
                             doctest::Contains("huge"), std::invalid_argument);
    }

    SUBCASE("hsv re-render with an explicit scale") {
        run_hsv(tmp.path / "out", 30e-6, tmp.path / "out" / "hsv_rescaled.png");
        CHECK(fs::exists(tmp.path / "out" / "hsv_rescaled.png"));
        const KeyValues kv = read_key_values(tmp.path / "out" / "hsv_rescaled.png.meta");
        CHECK(*find_key(kv, "max_rms_source") == "explicit");
    }
}

TEST_CASE("degraded mode without geometry skips angle maps and records a warning") {
    TempDir tmp("nogeo");
    auto [ig, isg] = uniform_pair(128, {8.0, 0.2}, 0.9, 0.3, 0.8, 1.6);
    RunConfig ret;
    ret.out_dir = (tmp.path / "out").string();
    ret.grid_path = (tmp.path / "g.f32").string();
    ret.sample_grid_paths = {(tmp.path / "s.f32").string()};
    write_float_map(ret.grid_path, ig, "intensity", false);
    write_float_map(ret.sample_grid_paths[0], isg, "intensity", false);
    ret.period = 8.0;
    ret.kernel_size = 8;
    run_retrieve(ret);

    CHECK(!fs::exists(tmp.path / "out" / "theta_M_sq.f32"));
    CHECK(fs::exists(tmp.path / "out" / "sigma_M_sq.f32"));
    const MapBundle bundle = load_bundle(tmp.path / "out");
    CHECK(!bundle.has_geometry);
    CHECK(*find_key(bundle.meta, "angle_units") == "pixels^2");
    REQUIRE(find_key(bundle.meta, "warning") != nullptr);
    const auto stats = run_roi_stats(bundle, {parse_roi("all:20,20,60,60")});
    CHECK(stats[0].theta_M_mean == doctest::Approx(1.6).epsilon(0.02));  // pixels now
    CHECK(format_roi_table(stats, bundle.has_geometry).find("theta_M_px_mean") !=
          std::string::npos);
}

TEST_CASE("auto-estimated non-integer period lands in the metadata") {
    TempDir tmp("autop");
    auto [ig, isg] = uniform_pair(256, {12.48, 0.3}, 0.9, 0.3, 0.6, 1.2);
    RunConfig ret;
    ret.grid_path = (tmp.path / "g.f32").string();
    ret.sample_grid_paths = {(tmp.path / "s.f32").string()};
    ret.out_dir = (tmp.path / "out").string();
    ret.kernel_size = 13;  // keep the sweep cheap; the period stays automatic
    write_float_map(ret.grid_path, ig, "intensity", false);
    write_float_map(ret.sample_grid_paths[0], isg, "intensity", false);
    run_retrieve(ret);

    const KeyValues meta = read_key_values(tmp.path / "out" / "run_meta.txt");
    CHECK(*find_key(meta, "period_source") == "auto");
    CHECK(std::stod(*find_key(meta, "period")) == doctest::Approx(12.48).epsilon(0.05 / 12.48));
}

TEST_CASE("stripe preset synthesis and background statistics") {
    TempDir tmp("stripes");
    RunConfig synth;
    synth.out_dir = (tmp.path / "fix").string();
    synth.width = 256;
    synth.height = 96;
    synth.field_preset = "stripes";
    run_synth(synth);
    const Image truth_sy = read_float_map(tmp.path / "fix" / "truth_sigma_y.f32");
    CHECK(masked_mean(truth_sy) > 0.0);  // stripes carry blur, background none
    double lo = 1e9, hi = -1e9;
    for (size_t i = 0; i < truth_sy.size(); ++i) {
        lo = std::min(lo, truth_sy[i]);
        hi = std::max(hi, truth_sy[i]);
    }
    CHECK(lo == 0.0);
    CHECK(hi == 3.0);

    RunConfig ret;
    ret.grid_path = (tmp.path / "fix" / "grid.f32").string();
    ret.sample_grid_paths = {(tmp.path / "fix" / "sample_grid.f32").string()};
    ret.out_dir = (tmp.path / "out").string();
    ret.period = 8.0;
    ret.kernel_size = 8;
    run_retrieve(ret);
    const MapBundle bundle = load_bundle(tmp.path / "out");

    // A background rectangle far from every stripe: no sample there.
    const auto stats = run_roi_stats(bundle, {parse_roi("background:116,20,8,40")});
    CHECK(stats[0].T_mean == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(std::abs(stats[0].theta_M_mean) < 0.05);  // pixels; no blur retrieved
    CHECK(std::abs(stats[0].rms_mean) < 0.05);

    SUBCASE("a fully invalid ROI fails by name") {
        MapBundle broken = bundle;
        for (int y = 2; y < 8; ++y)
            for (int x = 2; x < 8; ++x) broken.valid.set(x, y, false);
        CHECK_THROWS_WITH_AS(run_roi_stats(broken, {parse_roi("dead:2,2,6,6")}),
                             doctest::Contains("dead"), std::runtime_error);
    }

    CHECK_THROWS_AS(
        [&] {
            RunConfig bad = synth;
            bad.field_preset = "swirl";
            bad.out_dir = (tmp.path / "nope").string();
            run_synth(bad);
        }(),
        PipelineError);
}

TEST_CASE("frame sequences share one period and kernel choice") {
    TempDir tmp("frames");
    const GridParams grid{8.0, 0.2};
    auto [ig, frame0] = uniform_pair(96, grid, 0.9, 0.2, 0.5, 1.0);
    auto [ig2, frame1] = uniform_pair(96, grid, 0.7, 1.2, 0.4, 1.4);
    write_float_map(tmp.path / "g.f32", ig, "intensity", false);
    write_float_map(tmp.path / "f0.f32", frame0, "intensity", false);
    write_float_map(tmp.path / "f1.f32", frame1, "intensity", false);

    RunConfig ret;
    ret.grid_path = (tmp.path / "g.f32").string();
    ret.sample_grid_paths = {(tmp.path / "f0.f32").string(), (tmp.path / "f1.f32").string()};
    ret.out_dir = (tmp.path / "seq").string();
    run_retrieve(ret);

    const KeyValues m0 = read_key_values(tmp.path / "seq" / "frame_0000" / "run_meta.txt");
    const KeyValues m1 = read_key_values(tmp.path / "seq" / "frame_0001" / "run_meta.txt");
    CHECK(*find_key(m0, "period") == *find_key(m1, "period"));
    CHECK(*find_key(m0, "kernel_size") == *find_key(m1, "kernel_size"));
    CHECK(*find_key(m0, "frame_index") == "0");
    CHECK(*find_key(m1, "frame_index") == "1");
    CHECK(*find_key(m1, "frame_count") == "2");

    const MapBundle b0 = load_bundle(tmp.path / "seq" / "frame_0000");
    const MapBundle b1 = load_bundle(tmp.path / "seq" / "frame_0001");
    CHECK(masked_mean(b0.transmission, &b0.valid) == doctest::Approx(0.9).epsilon(1e-3));
    CHECK(masked_mean(b1.transmission, &b1.valid) == doctest::Approx(0.7).epsilon(1e-3));
}

TEST_CASE("png frames feed the retrieval pipeline") {
    TempDir tmp("pngpipe");
    RunConfig synth;
    synth.out_dir = (tmp.path / "fix").string();
    synth.width = 128;
    synth.height = 128;
    synth.transmission = 0.8;
    synth.write_png_frames = true;
    run_synth(synth);

    RunConfig ret;
    ret.grid_path = (tmp.path / "fix" / "grid.png").string();
    ret.sample_grid_paths = {(tmp.path / "fix" / "sample_grid.png").string()};
    ret.out_dir = (tmp.path / "out").string();
    ret.period = 8.0;
    ret.kernel_size = 8;
    run_retrieve(ret);
    const MapBundle bundle = load_bundle(tmp.path / "out");
    CHECK(masked_mean(bundle.transmission, &bundle.valid) == doctest::Approx(0.8).epsilon(2e-3));
}

TEST_CASE("pipeline errors carry their stage") {
    RunConfig bad;
    bad.out_dir = "/tmp/gridfield_nonexistent_out";
    bad.grid_path = "/tmp/gridfield_does_not_exist.f32";
    bad.sample_grid_paths = {"/tmp/gridfield_does_not_exist2.f32"};
    try {
        run_retrieve(bad);
        FAIL("expected a pipeline error");
    } catch (const PipelineError& e) {
        CHECK(std::string(e.what()).find("[") == 0);
        CHECK(!e.stage_name.empty());
    }
}

TEST_CASE("half-specified geometry is rejected up front") {
    RunConfig bad;
    bad.out_dir = "/tmp/gridfield_halfgeo_out";
    bad.grid_path = "g.f32";
    bad.sample_grid_paths = {"s.f32"};
    bad.odd_m = 1.5;  // pixel size missing
    CHECK_THROWS_AS(run_retrieve(bad), PipelineError);
}

TEST_CASE("a failed stage leaves the bundle marked incomplete") {
    TempDir tmp("incomplete");
    auto [ig, isg] = uniform_pair(72, {8.0, 0.2}, 1.0, 0.0, 0.0, 0.0);
    RunConfig ret;
    ret.grid_path = (tmp.path / "g.f32").string();
    ret.sample_grid_paths = {(tmp.path / "s.f32").string()};
    ret.out_dir = (tmp.path / "out").string();
    ret.period = 8.0;
    ret.kernel_size = 8;
    ret.rois = {parse_roi("offmap:0,0,999,999")};  // fails after the maps land
    write_float_map(ret.grid_path, ig, "intensity", false);
    write_float_map(ret.sample_grid_paths[0], isg, "intensity", false);

    CHECK_THROWS(run_retrieve(ret));
    const KeyValues meta = read_key_values(tmp.path / "out" / "run_meta.txt");
    CHECK(*find_key(meta, "complete") == "0");
}
