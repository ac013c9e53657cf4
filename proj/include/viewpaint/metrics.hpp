#pragma once

#include <cstddef>
#include <string>

#include "viewpaint/tensor.hpp"

namespace viewpaint {

struct MetricReport {
    double psnr = 0.0;   // dB, capped at 99
    double ssim = 0.0;   // in [-1, 1]
    std::string region;  // "full" | "masked"
    std::size_t pixels = 0;   // pixels contributing to the PSNR
    std::size_t windows = 0;  // windows per channel contributing to the SSIM
};

/// 10*log10(max_val^2 / MSE), capped at 99 dB (identical images report 99).
/// Accepts any equal-shaped tensors; the MSE runs over every entry.
double psnr(const Tensor& a, const Tensor& b, double max_val = 1.0);

/// Windowed SSIM: 11x11 Gaussian window (sigma 1.5),
/// C1=(0.01*max_val)^2, C2=(0.03*max_val)^2, mean over valid windows.
/// [H,W] or [C,H,W]; channels are averaged.
double ssim(const Tensor& a, const Tensor& b, double max_val = 1.0);

/// Full-image report on [0,1] images (max_val = 1).
MetricReport full_metrics(const Tensor& a, const Tensor& b);

/// PSNR over masked pixels only; SSIM averaged over windows that contain at
/// least one masked pixel. mask is [H,W] with 1 = evaluate.
MetricReport masked_metrics(const Tensor& a, const Tensor& b, const Tensor& mask);

}  // namespace viewpaint
