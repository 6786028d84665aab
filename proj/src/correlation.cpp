#include "gridfield/correlation.hpp"

#include <Eigen/Dense>
#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gridfield {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

double wrap_phase(double phi) {
    phi = std::remainder(phi, kTwoPi);  // (-pi, pi] up to the -pi boundary
    if (phi <= -kPi) phi = kPi;
    return phi;
}

int resolve_workers(int n_workers) {
    if (n_workers > 0) return n_workers;
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

// Kernel footprint: k pixels starting floor(k/2) left/above the center, so
// the 2k window [c-k, c+k-1] always contains every kernel placement.
inline int kernel_start(int center, int k) { return center - k / 2; }

void check_window_bounds(const Image& img, int cx, int cy, int k, const char* role) {
    if (k < 1) throw std::invalid_argument("kernel size must be positive");
    if (cx < k || cx > img.width() - k || cy < k || cy > img.height() - k)
        throw std::out_of_range(std::string(role) + " window leaves the image bounds");
}

// Shared inner loop for the auto/cross pair: one pass over the kernel pixels
// accumulates both inner products in the same order as local_correlation.
void correlate_pair_into(const Image& kernel_src, const Image& win_a, const Image& win_b,
                         int cx, int cy, int k, CorrelationMap& out_a, CorrelationMap& out_b) {
    const int x0 = kernel_start(cx, k);
    const int y0 = kernel_start(cy, k);
    const int zero = out_a.zero_index();
    for (int oj = 0; oj <= k; ++oj) {
        const int dy = oj - zero;
        for (int oi = 0; oi <= k; ++oi) {
            const int dx = oi - zero;
            double sum_a = 0.0;
            double sum_b = 0.0;
            for (int b = y0; b < y0 + k; ++b) {
                const double* krow = kernel_src.data() + static_cast<size_t>(b) * kernel_src.width();
                const double* arow = win_a.data() + static_cast<size_t>(b + dy) * win_a.width() + dx;
                const double* brow = win_b.data() + static_cast<size_t>(b + dy) * win_b.width() + dx;
                for (int a = x0; a < x0 + k; ++a) {
                    sum_a += krow[a] * arow[a];
                    sum_b += krow[a] * brow[a];
                }
            }
            out_a.at(oi, oj) = sum_a;
            out_b.at(oi, oj) = sum_b;
        }
    }
}

}  // namespace

int ceil_period(double p) {
    // Auto-estimated periods can sit one rounding error above an integer;
    // do not let that bump the ceiling.
    return static_cast<int>(std::ceil(p - 1e-6));
}

CorrelationMap local_correlation(const Image& kernel_source, const Image& window_source,
                                 int center_x, int center_y, int k) {
    check_window_bounds(kernel_source, center_x, center_y, k, "kernel");
    check_window_bounds(window_source, center_x, center_y, k, "search");
    CorrelationMap map(k);
    const int x0 = kernel_start(center_x, k);
    const int y0 = kernel_start(center_y, k);
    const int zero = map.zero_index();
    for (int oj = 0; oj <= k; ++oj) {
        const int dy = oj - zero;
        for (int oi = 0; oi <= k; ++oi) {
            const int dx = oi - zero;
            double sum = 0.0;
            for (int b = y0; b < y0 + k; ++b) {
                const double* krow =
                    kernel_source.data() + static_cast<size_t>(b) * kernel_source.width();
                const double* wrow =
                    window_source.data() + static_cast<size_t>(b + dy) * window_source.width() + dx;
                for (int a = x0; a < x0 + k; ++a) sum += krow[a] * wrow[a];
            }
            map.at(oi, oj) = sum;
        }
    }
    return map;
}

struct CorrelationModelFit::Impl {
    Eigen::MatrixXd solver;  // 9 x (k+1)^2 least-squares operator
};

CorrelationModelFit::CorrelationModelFit(int k, double p) : k_(k), p_(p) {
    if (!(p > 2.0)) throw std::invalid_argument("period must exceed 2 pixels");
    if (k < 1) throw std::invalid_argument("kernel size must be positive");

    const int side = k + 1;
    const int n = side * side;
    const int zero = (k + 1) / 2;
    const double w = kTwoPi / p;

    // Columns: constant, then in-phase/quadrature pairs for the i, j, i-j and
    // i+j terms of the correlation model.
    Eigen::MatrixXd design(n, 9);
    for (int oj = 0; oj < side; ++oj) {
        const double j = oj - zero;
        for (int oi = 0; oi < side; ++oi) {
            const double i = oi - zero;
            const int row = oj * side + oi;
            design(row, 0) = 1.0;
            design(row, 1) = std::cos(w * i);
            design(row, 2) = std::sin(w * i);
            design(row, 3) = std::cos(w * j);
            design(row, 4) = std::sin(w * j);
            design(row, 5) = std::cos(w * (i - j));
            design(row, 6) = std::sin(w * (i - j));
            design(row, 7) = std::cos(w * (i + j));
            design(row, 8) = std::sin(w * (i + j));
        }
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() < 9)
        throw FitError("correlation-model design is rank-deficient (kernel too small for the period)");

    impl_ = std::make_unique<Impl>();
    impl_->solver = (design.transpose() * design).ldlt().solve(design.transpose());
}

CorrelationModelFit::~CorrelationModelFit() = default;
CorrelationModelFit::CorrelationModelFit(CorrelationModelFit&&) noexcept = default;
CorrelationModelFit& CorrelationModelFit::operator=(CorrelationModelFit&&) noexcept = default;

CoefficientSet CorrelationModelFit::fit(const CorrelationMap& map) const {
    if (map.k != k_) throw std::invalid_argument("correlation map size does not match the fitter");
    const Eigen::Map<const Eigen::VectorXd> y(map.values.data(),
                                              static_cast<Eigen::Index>(map.values.size()));
    Eigen::Matrix<double, 9, 1> beta;
    beta.noalias() = impl_->solver * y;

    CoefficientSet set;
    set.c[0] = beta(0);
    double phase[4];
    for (int t = 0; t < 4; ++t) {
        const double a = beta(1 + 2 * t);      // amplitude * cos(phase)
        const double b = beta(2 + 2 * t);      // -amplitude * sin(phase)
        set.c[t + 1] = std::hypot(a, b);
        phase[t] = wrap_phase(std::atan2(-b, a));
    }
    set.phi_i = phase[0];
    set.phi_j = phase[1];
    set.phi_diff_residual = wrap_phase(phase[2] - (set.phi_i - set.phi_j));
    set.phi_sum_residual = wrap_phase(phase[3] - (set.phi_i + set.phi_j));
    return set;
}

double CorrelationModelFit::evaluate(const CoefficientSet& set, double i, double j) const {
    const double w = kTwoPi / p_;
    return set.c[0] + set.c[1] * std::cos(w * i + set.phi_i) +
           set.c[2] * std::cos(w * j + set.phi_j) +
           set.c[3] * std::cos(w * (i - j) + set.phi_i - set.phi_j) +
           set.c[4] * std::cos(w * (i + j) + set.phi_i + set.phi_j);
}

CoefficientSet fit_correlation_model(const CorrelationMap& map, double p) {
    return CorrelationModelFit(map.k, p).fit(map);
}

namespace {

CoefficientMaps make_empty_maps(const Image& grid_image, int k, double p) {
    const int mw = grid_image.width() - 2 * k + 1;
    const int mh = grid_image.height() - 2 * k + 1;
    if (mw < 1 || mh < 1)
        throw std::invalid_argument("image too small for the correlation window");
    CoefficientMaps maps;
    maps.k = k;
    maps.p = p;
    maps.origin_x = k;
    maps.origin_y = k;
    for (auto* bank : {&maps.c_gg, &maps.c_gsg})
        for (auto& img : *bank) img = Image(mw, mh, quiet_nan());
    maps.phi_i_gg = Image(mw, mh, quiet_nan());
    maps.phi_j_gg = Image(mw, mh, quiet_nan());
    maps.phi_i_gsg = Image(mw, mh, quiet_nan());
    maps.phi_j_gsg = Image(mw, mh, quiet_nan());
    maps.valid = Mask(mw, mh, false);
    return maps;
}

void check_sweep_inputs(const Image& grid_image, const Image& sample_grid_image, int k, double p) {
    if (!grid_image.same_shape(sample_grid_image))
        throw std::invalid_argument("grid-only and sample-and-grid images must match in shape");
    if (!(p > 2.0)) throw std::invalid_argument("period must exceed 2 pixels");
    if (k < ceil_period(p))
        throw std::invalid_argument("kernel size must be at least ceil(period)");
}

// Writes one pixel's pair of fits into the maps; shared by the serial and
// parallel sweeps so both produce identical results.
void store_fits(CoefficientMaps& maps, int mx, int my, const CoefficientSet& gg,
                const CoefficientSet& gsg) {
    bool ok = true;
    for (int n = 0; n < 5; ++n) {
        maps.c_gg[n].at(mx, my) = gg.c[n];
        maps.c_gsg[n].at(mx, my) = gsg.c[n];
        ok = ok && std::isfinite(gg.c[n]) && std::isfinite(gsg.c[n]);
    }
    maps.phi_i_gg.at(mx, my) = gg.phi_i;
    maps.phi_j_gg.at(mx, my) = gg.phi_j;
    maps.phi_i_gsg.at(mx, my) = gsg.phi_i;
    maps.phi_j_gsg.at(mx, my) = gsg.phi_j;
    ok = ok && std::isfinite(gg.phi_i) && std::isfinite(gg.phi_j) &&
         std::isfinite(gsg.phi_i) && std::isfinite(gsg.phi_j);
    maps.valid.set(mx, my, ok);
}

}  // namespace

CoefficientMaps compute_coefficient_maps(const Image& grid_image, const Image& sample_grid_image,
                                         int k, double p, int n_workers) {
    check_sweep_inputs(grid_image, sample_grid_image, k, p);
    CoefficientMaps maps = make_empty_maps(grid_image, k, p);
    const CorrelationModelFit fitter(k, p);
    const int mw = maps.width();
    const int mh = maps.height();
    const int workers = resolve_workers(n_workers);

#pragma omp parallel num_threads(workers) if (workers > 1)
    {
        CorrelationMap auto_map(k);
        CorrelationMap cross_map(k);
#pragma omp for schedule(static)
        for (int my = 0; my < mh; ++my) {
            const int cy = my + k;
            for (int mx = 0; mx < mw; ++mx) {
                const int cx = mx + k;
                correlate_pair_into(grid_image, grid_image, sample_grid_image, cx, cy, k,
                                    auto_map, cross_map);
                store_fits(maps, mx, my, fitter.fit(auto_map), fitter.fit(cross_map));
            }
        }
    }
    return maps;
}

CoefficientMaps compute_coefficient_maps_serial(const Image& grid_image,
                                                const Image& sample_grid_image, int k, double p) {
    check_sweep_inputs(grid_image, sample_grid_image, k, p);
    CoefficientMaps maps = make_empty_maps(grid_image, k, p);
    const CorrelationModelFit fitter(k, p);
    for (int my = 0; my < maps.height(); ++my) {
        const int cy = my + k;
        for (int mx = 0; mx < maps.width(); ++mx) {
            const int cx = mx + k;
            CorrelationMap auto_map = local_correlation(grid_image, grid_image, cx, cy, k);
            CorrelationMap cross_map = local_correlation(grid_image, sample_grid_image, cx, cy, k);
            store_fits(maps, mx, my, fitter.fit(auto_map), fitter.fit(cross_map));
        }
    }
    return maps;
}

namespace {

struct BoxWindow {
    int lo, hi;  // inclusive offsets
};

BoxWindow box_window(double p) {
    const int r = std::max<int>(1, std::lround(p));
    return {-(r / 2), -(r / 2) + r - 1};
}

// Mask-aware box filter; fixed row-major accumulation order keeps the result
// schedule-independent.
void box_filter_linear(const Image& src, const Mask& valid, BoxWindow w, Image& dst) {
    const int width = src.width(), height = src.height();
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double sum = 0.0;
            int count = 0;
            const int y0 = std::max(0, y + w.lo), y1 = std::min(height - 1, y + w.hi);
            const int x0 = std::max(0, x + w.lo), x1 = std::min(width - 1, x + w.hi);
            for (int b = y0; b <= y1; ++b)
                for (int a = x0; a <= x1; ++a)
                    if (valid.at(a, b) && std::isfinite(src.at(a, b))) {
                        sum += src.at(a, b);
                        ++count;
                    }
            dst.at(x, y) = count > 0 ? sum / count : quiet_nan();
        }
    }
}

// Phases are averaged as unit phasors so values near the wrap boundary do not
// cancel.
void box_filter_phase(const Image& src, const Mask& valid, BoxWindow w, Image& dst) {
    const int width = src.width(), height = src.height();
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double sum_cos = 0.0, sum_sin = 0.0;
            int count = 0;
            const int y0 = std::max(0, y + w.lo), y1 = std::min(height - 1, y + w.hi);
            const int x0 = std::max(0, x + w.lo), x1 = std::min(width - 1, x + w.hi);
            for (int b = y0; b <= y1; ++b)
                for (int a = x0; a <= x1; ++a)
                    if (valid.at(a, b) && std::isfinite(src.at(a, b))) {
                        sum_cos += std::cos(src.at(a, b));
                        sum_sin += std::sin(src.at(a, b));
                        ++count;
                    }
            dst.at(x, y) = count > 0 ? wrap_phase(std::atan2(sum_sin, sum_cos)) : quiet_nan();
        }
    }
}

}  // namespace

CoefficientMaps average_over_period(const CoefficientMaps& maps, double p, int n_workers) {
    if (!(p > 0.0)) throw std::invalid_argument("period must be positive");
    const BoxWindow w = box_window(p);
    CoefficientMaps out = maps;

    // 14 independent filter jobs; run them across the worker pool.
    const Image* srcs[14];
    Image* dsts[14];
    bool phase[14];
    int jobs = 0;
    for (int n = 0; n < 5; ++n) {
        srcs[jobs] = &maps.c_gg[n]; dsts[jobs] = &out.c_gg[n]; phase[jobs++] = false;
        srcs[jobs] = &maps.c_gsg[n]; dsts[jobs] = &out.c_gsg[n]; phase[jobs++] = false;
    }
    srcs[jobs] = &maps.phi_i_gg; dsts[jobs] = &out.phi_i_gg; phase[jobs++] = true;
    srcs[jobs] = &maps.phi_j_gg; dsts[jobs] = &out.phi_j_gg; phase[jobs++] = true;
    srcs[jobs] = &maps.phi_i_gsg; dsts[jobs] = &out.phi_i_gsg; phase[jobs++] = true;
    srcs[jobs] = &maps.phi_j_gsg; dsts[jobs] = &out.phi_j_gsg; phase[jobs++] = true;

    const int workers = resolve_workers(n_workers);
#pragma omp parallel for schedule(dynamic) num_threads(workers) if (workers > 1)
    for (int job = 0; job < jobs; ++job) {
        if (phase[job])
            box_filter_phase(*srcs[job], maps.valid, w, *dsts[job]);
        else
            box_filter_linear(*srcs[job], maps.valid, w, *dsts[job]);
    }

    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x) {
            // Valid when any neighborhood sample existed.
            out.valid.set(x, y, std::isfinite(out.c_gg[0].at(x, y)));
        }
    return out;
}

double kernel_uniformity_score(const Image& grid_image, double p, int k, int stride,
                               const Mask* exclude) {
    if (stride < 1) throw std::invalid_argument("stride must be positive");
    const CorrelationModelFit fitter(k, p);
    std::array<std::vector<double>, 5> samples;

    CorrelationMap map(k);
    for (int cy = k; cy <= grid_image.height() - k; cy += stride) {
        for (int cx = k; cx <= grid_image.width() - k; cx += stride) {
            if (exclude) {
                bool touched = false;
                for (int b = cy - k; b <= cy + k - 1 && !touched; ++b)
                    for (int a = cx - k; a <= cx + k - 1; ++a)
                        if (exclude->at(a, b)) { touched = true; break; }
                if (touched) continue;
            }
            correlate_pair_into(grid_image, grid_image, grid_image, cx, cy, k, map, map);
            const CoefficientSet set = fitter.fit(map);
            bool finite = true;
            for (int n = 0; n < 5; ++n) finite = finite && std::isfinite(set.c[n]);
            if (!finite) continue;
            for (int n = 0; n < 5; ++n) samples[n].push_back(set.c[n]);
        }
    }
    if (samples[0].empty())
        throw std::invalid_argument("no usable lattice points for kernel-size scoring");

    double score = 0.0;
    for (int n = 0; n < 5; ++n) {
        const auto& v = samples[n];
        double mean = 0.0;
        for (double s : v) mean += s;
        mean /= static_cast<double>(v.size());
        double var = 0.0;
        for (double s : v) var += (s - mean) * (s - mean);
        const double sd = std::sqrt(var / static_cast<double>(v.size()));
        if (sd == 0.0) continue;
        score += mean != 0.0 ? sd / std::abs(mean) : std::numeric_limits<double>::infinity();
    }
    return score;
}

int select_kernel_size(const Image& grid_image, double p, int k_min, int k_max, int stride,
                       const Mask* exclude) {
    if (k_min > k_max) throw std::invalid_argument("empty kernel-size range");
    if (k_min < ceil_period(p))
        throw std::invalid_argument("kernel-size range must start at or above ceil(period)");
    if (stride == 0) stride = ceil_period(p);

    int best_k = -1;
    double best_score = std::numeric_limits<double>::infinity();
    for (int k = k_min; k <= k_max; ++k) {
        if (2 * k > grid_image.width() || 2 * k > grid_image.height()) break;
        const double score = kernel_uniformity_score(grid_image, p, k, stride, exclude);
        // Ties (within rounding noise) keep the smaller kernel.
        if (best_k < 0 || score < best_score - 1e-9 * (1.0 + best_score)) {
            best_score = score;
            best_k = k;
        }
    }
    if (best_k < 0) throw std::invalid_argument("no kernel size fits the image");
    return best_k;
}

namespace {

std::mutex fftw_plan_mutex;

// Magnitude spectrum of a Hann-windowed, mean-subtracted profile.
std::vector<double> profile_spectrum(const std::vector<double>& profile) {
    const int n = static_cast<int>(profile.size());
    std::vector<double> in(n);
    double mean = 0.0;
    for (double v : profile) mean += v;
    mean /= n;
    for (int i = 0; i < n; ++i) {
        const double hann = 0.5 * (1.0 - std::cos(kTwoPi * i / (n - 1)));
        in[i] = (profile[i] - mean) * hann;
    }

    std::vector<double> mag(n / 2 + 1, 0.0);
    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex);
        fftw_complex* out =
            static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)));
        fftw_plan plan = fftw_plan_dft_r2c_1d(n, in.data(), out, FFTW_ESTIMATE);
        fftw_execute(plan);
        for (int f = 0; f <= n / 2; ++f) mag[f] = std::hypot(out[f][0], out[f][1]);
        fftw_destroy_plan(plan);
        fftw_free(out);
    }
    return mag;
}

double axis_period(const std::vector<double>& profile) {
    const int n = static_cast<int>(profile.size());
    if (n < 16) throw PeriodEstimationError("image too small for period estimation");
    const std::vector<double> mag = profile_spectrum(profile);
    const int f_lo = 3;  // skip DC and window leakage
    const int f_hi = n / 2 - 1;
    if (f_hi <= f_lo) throw PeriodEstimationError("image too small for period estimation");

    int peak = f_lo;
    for (int f = f_lo; f <= f_hi; ++f)
        if (mag[f] > mag[peak]) peak = f;

    std::vector<double> rest(mag.begin() + f_lo, mag.begin() + f_hi + 1);
    std::nth_element(rest.begin(), rest.begin() + rest.size() / 2, rest.end());
    const double med = rest[rest.size() / 2];
    if (!(mag[peak] > 10.0 * med) || !(mag[peak] > 0.0))
        throw PeriodEstimationError("no significant spectral peak; supply the grid period explicitly");

    // Parabolic sub-bin refinement on the log magnitude.
    double delta = 0.0;
    const double m0 = mag[peak], ml = mag[peak - 1], mr = mag[peak + 1];
    if (ml > 0.0 && mr > 0.0 && m0 > 0.0) {
        const double l0 = std::log(m0), ll = std::log(ml), lr = std::log(mr);
        const double denom = ll - 2.0 * l0 + lr;
        if (denom < 0.0) delta = std::clamp(0.5 * (ll - lr) / denom, -0.5, 0.5);
    }
    return n / (peak + delta);
}

}  // namespace

double estimate_grid_period(const Image& grid_image) {
    const int w = grid_image.width(), h = grid_image.height();
    // Axis profiles; non-finite pixels are replaced by the image mean so a few
    // masked pixels cannot poison the spectrum.
    double mean = 0.0;
    size_t n_finite = 0;
    for (size_t i = 0; i < grid_image.size(); ++i)
        if (std::isfinite(grid_image[i])) {
            mean += grid_image[i];
            ++n_finite;
        }
    if (n_finite == 0) throw PeriodEstimationError("image has no finite pixels");
    mean /= static_cast<double>(n_finite);

    std::vector<double> profile_x(w, 0.0), profile_y(h, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const double v = grid_image.at(x, y);
            const double u = std::isfinite(v) ? v : mean;
            profile_x[x] += u;
            profile_y[y] += u;
        }

    const double px = axis_period(profile_x);
    const double py = axis_period(profile_y);
    return 0.5 * (px + py);
}

}  // namespace gridfield
