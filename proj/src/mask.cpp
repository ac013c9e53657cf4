#include "viewpaint/mask.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "viewpaint/error.hpp"
#include "viewpaint/io.hpp"

namespace viewpaint {

void MaskSpec::align(int p) {
    patch_mask = patch_align(pixel_mask, p);
    patch_size = p;
}

Tensor patch_align(const Tensor& pixel_mask, int patch_size) {
    if (!pixel_mask.defined() || pixel_mask.rank() != 2)
        throw DimensionError("patch_align: expected [H,W] mask");
    const int h = pixel_mask.shape()[0], w = pixel_mask.shape()[1];
    if (patch_size <= 0 || h % patch_size != 0 || w % patch_size != 0)
        throw DimensionError("patch_align: extents " + shape_str(pixel_mask.shape()) +
                             " not divisible by patch size " + std::to_string(patch_size));
    const int gw = w / patch_size;
    std::vector<float> out(static_cast<std::size_t>(h / patch_size) * gw, 0.0f);
    auto src = pixel_mask.data();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (src[static_cast<std::size_t>(y) * w + x] != 0.0f)
                out[static_cast<std::size_t>(y / patch_size) * gw + x / patch_size] = 1.0f;
    return Tensor::from_data({h / patch_size, gw}, std::move(out));
}

MaskSpec random_rect_mask(int h, int w, int n_rects, double target_ratio, Rng& rng) {
    if (h <= 0 || w <= 0) throw ContractError("random_rect_mask: empty grid");
    if (n_rects < 1) throw ContractError("random_rect_mask: n_rects must be >= 1");
    if (!(target_ratio > 0.0 && target_ratio < 1.0))
        throw ContractError("random_rect_mask: target_ratio must be in (0,1)");

    // Per-rectangle coverage q so that a union of n independent rectangles
    // averages the target ratio, then scale the base U[0.1,0.5]*min(h,w)
    // side range to that coverage.
    const int m = std::min(h, w);
    const double q = 1.0 - std::pow(1.0 - target_ratio, 1.0 / n_rects);
    const double s = std::sqrt(q * h * w) / (0.3 * m);
    const double lo = 0.1 * m * s, hi = 0.5 * m * s;

    for (int attempt = 0; attempt < 1000; ++attempt) {
        std::vector<float> grid(static_cast<std::size_t>(h) * w, 0.0f);
        for (int i = 0; i < n_rects; ++i) {
            const int rw = std::clamp(static_cast<int>(std::lround(rng.uniform(lo, hi))), 1, w);
            const int rh = std::clamp(static_cast<int>(std::lround(rng.uniform(lo, hi))), 1, h);
            const int x0 = static_cast<int>(rng.uniform_int(0, w - rw));
            const int y0 = static_cast<int>(rng.uniform_int(0, h - rh));
            for (int y = y0; y < y0 + rh; ++y)
                std::fill_n(grid.begin() + static_cast<std::size_t>(y) * w + x0, rw, 1.0f);
        }
        std::size_t set = 0;
        for (float v : grid) set += v != 0.0f;
        const double ratio = static_cast<double>(set) / (static_cast<double>(h) * w);
        if (std::fabs(ratio - target_ratio) <= 0.05) {
            MaskSpec spec;
            spec.pixel_mask = Tensor::from_data({h, w}, std::move(grid));
            spec.achieved_ratio = ratio;
            spec.provenance = "random";
            return spec;
        }
    }
    throw GenerationError("random_rect_mask: no draw within 0.05 of target " +
                          std::to_string(target_ratio) + " after 1000 attempts");
}

MaskSpec load_mask(const std::string& path) {
    Tensor img = load_png(path);
    if (img.shape()[0] != 1)
        throw FormatError("mask must be single-channel, got " +
                          std::to_string(img.shape()[0]) + " channels [" + path + "]");
    const int h = img.shape()[1], w = img.shape()[2];
    std::vector<float> grid(static_cast<std::size_t>(h) * w);
    std::size_t set = 0;
    auto src = img.data();
    const float thresh = 127.0f / 255.0f;  // decoded values are byte/255
    for (std::size_t i = 0; i < grid.size(); ++i) {
        grid[i] = src[i] > thresh ? 1.0f : 0.0f;
        set += grid[i] != 0.0f;
    }
    MaskSpec spec;
    spec.pixel_mask = Tensor::from_data({h, w}, std::move(grid));
    spec.achieved_ratio = static_cast<double>(set) / (static_cast<double>(h) * w);
    spec.provenance = "file";
    return spec;
}

void save_mask(const MaskSpec& spec, const std::string& path) {
    if (!spec.pixel_mask.defined() || spec.pixel_mask.rank() != 2)
        throw DimensionError("save_mask: expected [H,W] mask");
    const int h = spec.pixel_mask.shape()[0], w = spec.pixel_mask.shape()[1];
    std::vector<float> img(spec.pixel_mask.data().begin(), spec.pixel_mask.data().end());
    save_png(path, Tensor::from_data({1, h, w}, std::move(img)));
}

}  // namespace viewpaint
