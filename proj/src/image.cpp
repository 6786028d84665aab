#include "gridfield/image.hpp"

#include <algorithm>

namespace gridfield {

namespace {

template <typename F>
void for_each_selected(const Image& img, const Mask* mask, F&& f) {
    for (size_t i = 0; i < img.size(); ++i) {
        if (mask && !(*mask)[i]) continue;
        double v = img[i];
        if (!std::isfinite(v)) continue;
        f(v);
    }
}

}  // namespace

double masked_mean(const Image& img, const Mask* mask) {
    double sum = 0.0;
    size_t n = 0;
    for_each_selected(img, mask, [&](double v) { sum += v; ++n; });
    if (n == 0) throw std::runtime_error("masked_mean: no valid pixels");
    return sum / static_cast<double>(n);
}

double masked_stddev(const Image& img, const Mask* mask) {
    double mean = masked_mean(img, mask);
    double acc = 0.0;
    size_t n = 0;
    for_each_selected(img, mask, [&](double v) {
        acc += (v - mean) * (v - mean);
        ++n;
    });
    return std::sqrt(acc / static_cast<double>(n));
}

double masked_median(const Image& img, const Mask* mask) {
    std::vector<double> vals;
    vals.reserve(img.size());
    for_each_selected(img, mask, [&](double v) { vals.push_back(v); });
    if (vals.empty()) throw std::runtime_error("masked_median: no valid pixels");
    size_t mid = vals.size() / 2;
    std::nth_element(vals.begin(), vals.begin() + mid, vals.end());
    double hi = vals[mid];
    if (vals.size() % 2 == 1) return hi;
    std::nth_element(vals.begin(), vals.begin() + mid - 1, vals.begin() + mid);
    return 0.5 * (vals[mid - 1] + hi);
}

}  // namespace gridfield
