#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "ssim_oracle.hpp"
#include "viewpaint/error.hpp"
#include "viewpaint/metrics.hpp"
#include "viewpaint/rng.hpp"
#include "viewpaint/tensor.hpp"

using namespace viewpaint;
using oracle::brute_ssim;

namespace {

Tensor uniform_img(const Shape& s, Rng& rng) {
    std::size_t n = 1;
    for (int d : s) n *= static_cast<std::size_t>(d);
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.uniform());
    return Tensor::from_data(s, std::move(v));
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("psnr: cap, analytic value, symmetry") {
    Rng rng(1);
    Tensor a = uniform_img({3, 16, 16}, rng);
    CHECK(psnr(a, a) == 99.0);

    std::vector<float> bv(a.data().begin(), a.data().end());
    for (auto& v : bv) v += 0.1f;
    Tensor b = Tensor::from_data({3, 16, 16}, std::move(bv));
    CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-5));

    Tensor c = uniform_img({3, 16, 16}, rng);
    CHECK(psnr(a, c) == psnr(c, a));

    CHECK_THROWS_AS(psnr(a, uniform_img({3, 16, 15}, rng)), DimensionError);
    CHECK_THROWS_AS(psnr(a, a, 0.0), ContractError);
}

TEST_CASE("psnr matches a direct reimplementation") {
    Rng rng(2);
    for (double max_val : {1.0, 255.0}) {
        Tensor a = uniform_img({2, 9, 13}, rng);
        Tensor b = uniform_img({2, 9, 13}, rng);
        double mse = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = static_cast<double>(a.data()[i]) - b.data()[i];
            mse += d * d;
        }
        mse /= static_cast<double>(a.size());
        const double want = 10.0 * std::log10(max_val * max_val / mse);
        CHECK(psnr(a, b, max_val) == doctest::Approx(want).epsilon(1e-9));
    }
}

TEST_CASE("ssim: identity is exactly one, broken structure is below one") {
    Rng rng(3);
    Tensor a = uniform_img({1, 16, 16}, rng);
    CHECK(ssim(a, a) == 1.0);

    std::vector<float> inv(a.data().begin(), a.data().end());
    for (auto& v : inv) v = 1.0f - v;
    Tensor b = Tensor::from_data({1, 16, 16}, std::move(inv));
    CHECK(ssim(a, b) < 1.0);
}

TEST_CASE("ssim stays within [-1,1]") {
    Rng rng(4);
    for (int rep = 0; rep < 5; ++rep) {
        Tensor a = uniform_img({1, 12, 12}, rng);
        Tensor b = uniform_img({1, 12, 12}, rng);
        const double v = ssim(a, b);
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }
    // mean-matched reflection is anti-correlated: structure term near -1,
    // luminance term near +1, so the product goes negative but stays >= -1
    Rng rng2(5);
    Tensor x = uniform_img({1, 11, 11}, rng2);
    std::vector<float> neg(x.data().begin(), x.data().end());
    for (auto& v : neg) v = 1.0f - v;
    const double v = ssim(x, Tensor::from_data({1, 11, 11}, std::move(neg)));
    CHECK(v >= -1.0);
    CHECK(v < 0.0);
}

TEST_CASE("ssim matches the brute-force per-window oracle") {
    Rng rng(6);
    {
        Tensor a = uniform_img({1, 16, 16}, rng);
        Tensor b = uniform_img({1, 16, 16}, rng);
        CHECK(ssim(a, b) == doctest::Approx(brute_ssim(a, b, 1.0)).epsilon(1e-9));
    }
    {
        Tensor a = uniform_img({3, 13, 17}, rng);
        Tensor b = uniform_img({3, 13, 17}, rng);
        CHECK(ssim(a, b) == doctest::Approx(brute_ssim(a, b, 1.0)).epsilon(1e-9));
        CHECK(ssim(a, b, 255.0) == doctest::Approx(brute_ssim(a, b, 255.0)).epsilon(1e-9));
    }
    // rank-2 input is a single channel
    Tensor a2 = uniform_img({14, 14}, rng);
    Tensor b2 = uniform_img({14, 14}, rng);
    CHECK(ssim(a2, b2) == doctest::Approx(brute_ssim(a2, b2, 1.0)).epsilon(1e-9));
}

TEST_CASE("ssim rejects images smaller than the window") {
    Rng rng(7);
    Tensor a = uniform_img({1, 8, 16}, rng);
    CHECK_THROWS_AS(ssim(a, a), ContractError);
}

TEST_CASE("metrics are invariant to simultaneous channel permutation") {
    Rng rng(8);
    Tensor a = uniform_img({3, 12, 12}, rng);
    Tensor b = uniform_img({3, 12, 12}, rng);
    const std::array<int, 3> perm{2, 0, 1};
    const std::size_t plane = 144;
    std::vector<float> pa(a.size()), pb(b.size());
    for (int c = 0; c < 3; ++c) {
        std::copy_n(a.data().data() + static_cast<std::size_t>(perm[static_cast<std::size_t>(c)]) * plane,
                    plane, pa.data() + static_cast<std::size_t>(c) * plane);
        std::copy_n(b.data().data() + static_cast<std::size_t>(perm[static_cast<std::size_t>(c)]) * plane,
                    plane, pb.data() + static_cast<std::size_t>(c) * plane);
    }
    Tensor ap = Tensor::from_data({3, 12, 12}, std::move(pa));
    Tensor bp = Tensor::from_data({3, 12, 12}, std::move(pb));
    CHECK(psnr(ap, bp) == doctest::Approx(psnr(a, b)).epsilon(1e-12));
    CHECK(ssim(ap, bp) == doctest::Approx(ssim(a, b)).epsilon(1e-12));
}

TEST_CASE("masked_metrics: full mask equals full-image metrics") {
    Rng rng(9);
    Tensor a = uniform_img({3, 16, 16}, rng);
    Tensor b = uniform_img({3, 16, 16}, rng);
    MetricReport full = full_metrics(a, b);
    CHECK(full.region == "full");
    CHECK(full.pixels == 256u);
    CHECK(full.windows == 36u);  // (16-10)^2

    MetricReport m = masked_metrics(a, b, Tensor::full({16, 16}, 1.0f));
    CHECK(m.region == "masked");
    CHECK(m.pixels == 256u);
    CHECK(m.windows == 36u);
    CHECK(m.psnr == doctest::Approx(full.psnr).epsilon(1e-9));
    CHECK(m.ssim == doctest::Approx(full.ssim).epsilon(1e-12));
}

TEST_CASE("masked_metrics: single-pixel mask gives the per-pixel PSNR") {
    Rng rng(10);
    Tensor a = uniform_img({3, 16, 16}, rng);
    std::vector<float> bv(a.data().begin(), a.data().end());
    const std::size_t plane = 256, pix = 5 * 16 + 7;
    const std::array<float, 3> diffs{0.1f, -0.2f, 0.05f};
    for (int c = 0; c < 3; ++c) bv[static_cast<std::size_t>(c) * plane + pix] += diffs[static_cast<std::size_t>(c)];
    Tensor b = Tensor::from_data({3, 16, 16}, std::move(bv));

    std::vector<float> mv(256, 0.0f);
    mv[pix] = 1.0f;
    MetricReport m = masked_metrics(a, b, Tensor::from_data({16, 16}, std::move(mv)));
    CHECK(m.pixels == 1u);
    double mse = 0.0;
    for (int c = 0; c < 3; ++c) {
        const double d = static_cast<double>(b.data()[static_cast<std::size_t>(c) * plane + pix]) -
                         a.data()[static_cast<std::size_t>(c) * plane + pix];
        mse += d * d;
    }
    mse /= 3.0;
    CHECK(m.psnr == doctest::Approx(10.0 * std::log10(1.0 / mse)).epsilon(1e-9));
}

TEST_CASE("masked_metrics: half mask crop oracle and window recomputation") {
    Rng rng(11);
    const int h = 16, w = 32, half = 16;
    Tensor a = uniform_img({3, h, w}, rng);
    Tensor b = uniform_img({3, h, w}, rng);
    std::vector<float> mv(static_cast<std::size_t>(h) * w, 0.0f);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < half; ++x) mv[static_cast<std::size_t>(y) * w + x] = 1.0f;
    MetricReport m = masked_metrics(a, b, Tensor::from_data({h, w}, std::move(mv)));
    CHECK(m.pixels == static_cast<std::size_t>(h) * half);

    // PSNR equals the PSNR of the cropped left halves exactly
    std::vector<float> ca(static_cast<std::size_t>(3) * h * half), cb(ca.size());
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < half; ++x) {
                const std::size_t src = (static_cast<std::size_t>(c) * h + y) * w + x;
                const std::size_t dst = (static_cast<std::size_t>(c) * h + y) * half + x;
                ca[dst] = a.data()[src];
                cb[dst] = b.data()[src];
            }
    const double crop_psnr =
        psnr(Tensor::from_data({3, h, half}, std::move(ca)),
             Tensor::from_data({3, h, half}, std::move(cb)));
    CHECK(m.psnr == doctest::Approx(crop_psnr).epsilon(1e-9));

    // SSIM equals a direct recomputation over the windows that touch the mask
    const int ho = h - 10, wo = w - 10;
    std::vector<char> include(static_cast<std::size_t>(ho) * wo, 0);
    for (int y = 0; y < ho; ++y)
        for (int x = 0; x < wo; ++x)
            include[static_cast<std::size_t>(y) * wo + x] = x <= half - 1;  // window [x, x+10] meets x < 16
    const std::size_t included =
        static_cast<std::size_t>(std::count(include.begin(), include.end(), 1));
    CHECK(m.windows == included);
    CHECK(m.ssim == doctest::Approx(brute_ssim(a, b, 1.0, &include)).epsilon(1e-9));
}

TEST_CASE("masked_metrics contracts") {
    Rng rng(12);
    Tensor a = uniform_img({3, 16, 16}, rng);
    CHECK_THROWS_AS(masked_metrics(a, a, Tensor::zeros({16, 16})), ContractError);
    CHECK_THROWS_AS(masked_metrics(a, a, Tensor::zeros({8, 8})), DimensionError);
    CHECK_THROWS_AS(masked_metrics(a, uniform_img({3, 16, 15}, rng), Tensor::full({16, 16}, 1.0f)),
                    DimensionError);
}

}  // TEST_SUITE
