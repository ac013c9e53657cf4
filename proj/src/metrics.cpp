#include "viewpaint/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "viewpaint/error.hpp"
#include "viewpaint/kernels.hpp"

namespace viewpaint {

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;

double psnr_from_mse(double mse, double max_val) {
    if (mse < 1e-10) return 99.0;
    return std::min(99.0, 10.0 * std::log10(max_val * max_val / mse));
}

std::array<double, kWin> gauss_taps() {
    std::array<double, kWin> w{};
    double sum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        const double d = i - (kWin - 1) / 2.0;
        w[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * kSigma * kSigma));
        sum += w[static_cast<std::size_t>(i)];
    }
    for (auto& v : w) v /= sum;
    return w;
}

// Gaussian-weighted window sums of `src` (h*w), separably: horizontal taps
// then vertical taps. Output is (h-10) x (w-10), one value per valid window.
std::vector<double> window_sums(const std::vector<double>& src, int h, int w) {
    static const std::array<double, kWin> taps = gauss_taps();
    const int wo = w - kWin + 1, ho = h - kWin + 1;
    std::vector<double> horiz(static_cast<std::size_t>(h) * wo);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < wo; ++x) {
            double s = 0.0;
            for (int k = 0; k < kWin; ++k)
                s += taps[static_cast<std::size_t>(k)] *
                     src[static_cast<std::size_t>(y) * w + x + k];
            horiz[static_cast<std::size_t>(y) * wo + x] = s;
        }
    std::vector<double> out(static_cast<std::size_t>(ho) * wo);
    for (int y = 0; y < ho; ++y)
        for (int x = 0; x < wo; ++x) {
            double s = 0.0;
            for (int k = 0; k < kWin; ++k)
                s += taps[static_cast<std::size_t>(k)] *
                     horiz[static_cast<std::size_t>(y + k) * wo + x];
            out[static_cast<std::size_t>(y) * wo + x] = s;
        }
    return out;
}

struct HW {
    int channels, h, w;
};

HW image_dims(const Tensor& t, const char* who) {
    if (t.rank() == 2) return {1, t.shape()[0], t.shape()[1]};
    if (t.rank() == 3) return {t.shape()[0], t.shape()[1], t.shape()[2]};
    throw DimensionError(std::string(who) + ": expected [H,W] or [C,H,W], got " +
                         shape_str(t.shape()));
}

// Mean SSIM over the valid windows of one channel plane. `include` (if not
// null) selects windows; `used` returns how many contributed.
double ssim_plane(const float* a, const float* b, int h, int w, double max_val,
                  const std::vector<char>* include, std::size_t& used) {
    const double c1 = (0.01 * max_val) * (0.01 * max_val);
    const double c2 = (0.03 * max_val) * (0.03 * max_val);
    const std::size_t n = static_cast<std::size_t>(h) * w;
    std::vector<double> va(n), vb(n), vaa(n), vbb(n), vab(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = a[i], y = b[i];
        va[i] = x;
        vb[i] = y;
        vaa[i] = x * x;
        vbb[i] = y * y;
        vab[i] = x * y;
    }
    const auto sa = window_sums(va, h, w);
    const auto sb = window_sums(vb, h, w);
    const auto saa = window_sums(vaa, h, w);
    const auto sbb = window_sums(vbb, h, w);
    const auto sab = window_sums(vab, h, w);
    double acc = 0.0;
    used = 0;
    for (std::size_t i = 0; i < sa.size(); ++i) {
        if (include && !(*include)[i]) continue;
        const double mu_a = sa[i], mu_b = sb[i];
        const double var_a = saa[i] - mu_a * mu_a;
        const double var_b = sbb[i] - mu_b * mu_b;
        const double cov = sab[i] - mu_a * mu_b;
        acc += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
               ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
        ++used;
    }
    return used ? acc / static_cast<double>(used) : 0.0;
}

double ssim_impl(const Tensor& a, const Tensor& b, double max_val,
                 const std::vector<char>* include, std::size_t& windows) {
    const HW d = image_dims(a, "ssim");
    if (d.h < kWin || d.w < kWin)
        throw ContractError("ssim: image " + std::to_string(d.h) + "x" + std::to_string(d.w) +
                            " is smaller than the 11x11 window");
    const std::size_t plane = static_cast<std::size_t>(d.h) * d.w;
    double acc = 0.0;
    windows = 0;
    for (int c = 0; c < d.channels; ++c) {
        std::size_t used = 0;
        acc += ssim_plane(a.data().data() + static_cast<std::size_t>(c) * plane,
                          b.data().data() + static_cast<std::size_t>(c) * plane, d.h, d.w,
                          max_val, include, used);
        windows = used;  // identical across channels
    }
    return acc / d.channels;
}

}  // namespace

double psnr(const Tensor& a, const Tensor& b, double max_val) {
    if (!a.defined() || !b.defined() || a.shape() != b.shape())
        throw DimensionError("psnr: shapes differ: " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    if (!(max_val > 0.0)) throw ContractError("psnr: max_val must be positive");
    const double mse =
        kern::active().sqdiff_sum(a.data().data(), b.data().data(), a.size()) /
        static_cast<double>(a.size());
    return psnr_from_mse(mse, max_val);
}

double ssim(const Tensor& a, const Tensor& b, double max_val) {
    if (!a.defined() || !b.defined() || a.shape() != b.shape())
        throw DimensionError("ssim: shapes differ: " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    if (!(max_val > 0.0)) throw ContractError("ssim: max_val must be positive");
    std::size_t windows = 0;
    return ssim_impl(a, b, max_val, nullptr, windows);
}

MetricReport full_metrics(const Tensor& a, const Tensor& b) {
    MetricReport r;
    r.psnr = psnr(a, b, 1.0);
    std::size_t windows = 0;
    r.ssim = ssim_impl(a, b, 1.0, nullptr, windows);
    r.windows = windows;
    const HW d = image_dims(a, "full_metrics");
    r.pixels = static_cast<std::size_t>(d.h) * d.w;
    r.region = "full";
    return r;
}

MetricReport masked_metrics(const Tensor& a, const Tensor& b, const Tensor& mask) {
    if (!a.defined() || !b.defined() || a.shape() != b.shape())
        throw DimensionError("masked_metrics: shapes differ: " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    const HW d = image_dims(a, "masked_metrics");
    if (mask.rank() != 2 || mask.shape()[0] != d.h || mask.shape()[1] != d.w)
        throw DimensionError("masked_metrics: mask " + shape_str(mask.shape()) +
                             " does not match image " + shape_str(a.shape()));

    auto mv = mask.data();
    std::size_t set = 0;
    for (float v : mv) set += v != 0.0f;
    if (set == 0) throw ContractError("masked_metrics: empty mask");

    // PSNR over masked pixels (all channels of each masked pixel)
    const std::size_t plane = static_cast<std::size_t>(d.h) * d.w;
    double se = 0.0;
    for (int c = 0; c < d.channels; ++c) {
        const float* pa = a.data().data() + static_cast<std::size_t>(c) * plane;
        const float* pb = b.data().data() + static_cast<std::size_t>(c) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
            if (mv[i] == 0.0f) continue;
            const double diff = static_cast<double>(pa[i]) - pb[i];
            se += diff * diff;
        }
    }
    MetricReport r;
    r.psnr = psnr_from_mse(se / (static_cast<double>(set) * d.channels), 1.0);

    // SSIM over windows containing at least one masked pixel, found through
    // a summed-area table of the mask
    if (d.h < kWin || d.w < kWin)
        throw ContractError("masked_metrics: image " + std::to_string(d.h) + "x" +
                            std::to_string(d.w) + " is smaller than the 11x11 window");
    std::vector<std::int64_t> sat(static_cast<std::size_t>(d.h + 1) * (d.w + 1), 0);
    const auto at = [&sat, &d](int y, int x) -> std::int64_t& {
        return sat[static_cast<std::size_t>(y) * (d.w + 1) + x];
    };
    for (int y = 0; y < d.h; ++y)
        for (int x = 0; x < d.w; ++x)
            at(y + 1, x + 1) = at(y, x + 1) + at(y + 1, x) - at(y, x) +
                               (mv[static_cast<std::size_t>(y) * d.w + x] != 0.0f ? 1 : 0);
    const int wo = d.w - kWin + 1, ho = d.h - kWin + 1;
    std::vector<char> include(static_cast<std::size_t>(ho) * wo);
    for (int y = 0; y < ho; ++y)
        for (int x = 0; x < wo; ++x)
            include[static_cast<std::size_t>(y) * wo + x] =
                (at(y + kWin, x + kWin) - at(y, x + kWin) - at(y + kWin, x) + at(y, x)) > 0;

    std::size_t windows = 0;
    r.ssim = ssim_impl(a, b, 1.0, &include, windows);
    r.windows = windows;
    r.pixels = set;
    r.region = "masked";
    return r;
}

}  // namespace viewpaint
