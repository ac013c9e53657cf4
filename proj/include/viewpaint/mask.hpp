#pragma once

#include <string>

#include "viewpaint/rng.hpp"
#include "viewpaint/tensor.hpp"

namespace viewpaint {

// Binary inpainting mask; 1 = unknown / to inpaint, 0 = known.
struct MaskSpec {
    Tensor pixel_mask;            // [H,W], entries 0 or 1
    Tensor patch_mask;            // [H/p,W/p]; undefined until align()
    int patch_size = 0;           // 0 until align() is called
    double achieved_ratio = 0.0;  // set pixels / (H*W)
    std::string provenance;       // "random" | "file"

    /// Fill patch_mask from pixel_mask (any set pixel marks its patch).
    void align(int patch_size);
};

/// Union of n_rects random axis-aligned rectangles, redrawn until the set
/// ratio lands within target_ratio ± 0.05. Side lengths are uniform over a
/// range scaled so the expected union ratio matches the target.
MaskSpec random_rect_mask(int h, int w, int n_rects, double target_ratio, Rng& rng);

/// Patch-grid mask: a patch is set iff any contained pixel is set.
Tensor patch_align(const Tensor& pixel_mask, int patch_size);

/// Read a single-channel PNG; pixel values > 127 become 1.
MaskSpec load_mask(const std::string& path);

/// Write pixel_mask as an 8-bit single-channel PNG (0 or 255).
void save_mask(const MaskSpec& spec, const std::string& path);

}  // namespace viewpaint
