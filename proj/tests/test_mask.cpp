#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "viewpaint/error.hpp"
#include "viewpaint/io.hpp"
#include "viewpaint/mask.hpp"
#include "viewpaint/rng.hpp"
#include "viewpaint/tensor.hpp"

using namespace viewpaint;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

Tensor bernoulli_mask(int h, int w, double p, Rng& rng) {
    std::vector<float> v(static_cast<std::size_t>(h) * w);
    for (auto& x : v) x = rng.uniform() < p ? 1.0f : 0.0f;
    return Tensor::from_data({h, w}, std::move(v));
}

std::size_t count_set(const Tensor& t) {
    std::size_t n = 0;
    for (float v : t.data()) n += v != 0.0f;
    return n;
}

}  // namespace

TEST_SUITE("mask") {

TEST_CASE("patch_align basics") {
    Tensor zeros = Tensor::zeros({16, 16});
    Tensor pz = patch_align(zeros, 4);
    CHECK(pz.shape() == Shape{4, 4});
    CHECK(count_set(pz) == 0);

    std::vector<float> one(256, 0.0f);
    one[5 * 16 + 3] = 1.0f;  // pixel (5,3) -> patch (1,0)
    Tensor po = patch_align(Tensor::from_data({16, 16}, std::move(one)), 4);
    CHECK(count_set(po) == 1);
    CHECK(po.data()[1 * 4 + 0] == 1.0f);

    CHECK_THROWS_AS(patch_align(Tensor::zeros({16}), 4), DimensionError);
    CHECK_THROWS_AS(patch_align(Tensor::zeros({15, 16}), 4), DimensionError);
    CHECK_THROWS_AS(patch_align(Tensor::zeros({16, 16}), 0), DimensionError);
}

TEST_CASE("patch_align matches a brute-force double loop") {
    Rng rng(71);
    const int cases[][3] = {{16, 16, 4}, {24, 32, 8}, {12, 12, 3}};
    for (auto [h, w, p] : cases) {
        Tensor m = bernoulli_mask(h, w, 0.15, rng);
        Tensor got = patch_align(m, p);
        const int gh = h / p, gw = w / p;
        REQUIRE(got.shape() == Shape{gh, gw});
        for (int py = 0; py < gh; ++py)
            for (int px = 0; px < gw; ++px) {
                bool any = false;
                for (int y = py * p; y < (py + 1) * p; ++y)
                    for (int x = px * p; x < (px + 1) * p; ++x)
                        any = any || m.data()[static_cast<std::size_t>(y) * w + x] != 0.0f;
                CHECK(got.data()[static_cast<std::size_t>(py) * gw + px] == (any ? 1.0f : 0.0f));
            }
    }
}

TEST_CASE("patch_align is monotone under adding pixels") {
    Rng rng(72);
    Tensor m1 = bernoulli_mask(16, 16, 0.1, rng);
    std::vector<float> v2(m1.data().begin(), m1.data().end());
    for (auto& x : v2)
        if (rng.uniform() < 0.2) x = 1.0f;
    Tensor p1 = patch_align(m1, 4);
    Tensor p2 = patch_align(Tensor::from_data({16, 16}, std::move(v2)), 4);
    for (std::size_t i = 0; i < p1.size(); ++i) CHECK(p2.data()[i] >= p1.data()[i]);
}

TEST_CASE("random_rect_mask: spec fields and band") {
    Rng rng(5);
    MaskSpec spec = random_rect_mask(32, 32, 10, 0.4, rng);
    CHECK(spec.pixel_mask.shape() == Shape{32, 32});
    CHECK(spec.provenance == "random");
    CHECK(spec.patch_size == 0);
    for (float v : spec.pixel_mask.data()) CHECK((v == 0.0f || v == 1.0f));
    const double recount =
        static_cast<double>(count_set(spec.pixel_mask)) / (32.0 * 32.0);
    CHECK(spec.achieved_ratio == recount);
    CHECK(std::fabs(spec.achieved_ratio - 0.4) <= 0.05);

    spec.align(4);
    CHECK(spec.patch_size == 4);
    Tensor want = patch_align(spec.pixel_mask, 4);
    CHECK(std::memcmp(spec.patch_mask.data().data(), want.data().data(),
                      want.size() * sizeof(float)) == 0);
}

TEST_CASE("one rectangle at target 0.25 covers 256 +/- 51 pixels") {
    Rng rng(6);
    for (int rep = 0; rep < 20; ++rep) {
        MaskSpec spec = random_rect_mask(32, 32, 1, 0.25, rng);
        const std::size_t set = count_set(spec.pixel_mask);
        CHECK(set >= 205);
        CHECK(set <= 307);
        // a single rectangle: the set pixels fill their bounding box
        int x0 = 32, x1 = -1, y0 = 32, y1 = -1;
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                if (spec.pixel_mask.data()[static_cast<std::size_t>(y) * 32 + x] != 0.0f) {
                    x0 = std::min(x0, x);
                    x1 = std::max(x1, x);
                    y0 = std::min(y0, y);
                    y1 = std::max(y1, y);
                }
        CHECK(set == static_cast<std::size_t>(x1 - x0 + 1) * (y1 - y0 + 1));
    }
}

TEST_CASE("mean achieved ratio over 1000 draws is within 0.02 of target") {
    Rng rng(7);
    double acc = 0.0;
    const int n = 1000;
    for (int i = 0; i < n; ++i) acc += random_rect_mask(32, 32, 10, 0.4, rng).achieved_ratio;
    const double mean = acc / n;
    CHECK(std::fabs(mean - 0.4) <= 0.02);
}

TEST_CASE("ablation sweep ratios all generate") {
    Rng rng(8);
    for (double r : {0.3, 0.4, 0.5, 0.6, 0.7}) {
        for (int rep = 0; rep < 5; ++rep) {
            MaskSpec spec = random_rect_mask(32, 32, 10, r, rng);
            CHECK(std::fabs(spec.achieved_ratio - r) <= 0.05);
        }
    }
}

TEST_CASE("generation is deterministic under a fixed seed") {
    Rng a(99), b(99);
    MaskSpec ma = random_rect_mask(32, 32, 10, 0.4, a);
    MaskSpec mb = random_rect_mask(32, 32, 10, 0.4, b);
    CHECK(ma.achieved_ratio == mb.achieved_ratio);
    CHECK(std::memcmp(ma.pixel_mask.data().data(), mb.pixel_mask.data().data(),
                      ma.pixel_mask.size() * sizeof(float)) == 0);
}

TEST_CASE("contract and infeasibility errors") {
    Rng rng(1);
    CHECK_THROWS_AS(random_rect_mask(0, 32, 1, 0.3, rng), ContractError);
    CHECK_THROWS_AS(random_rect_mask(32, 32, 0, 0.3, rng), ContractError);
    CHECK_THROWS_AS(random_rect_mask(32, 32, 1, 0.0, rng), ContractError);
    CHECK_THROWS_AS(random_rect_mask(32, 32, 1, 1.0, rng), ContractError);
    // on a 2x2 grid one rectangle covers 1/4, 1/2 or 1 of the area;
    // no outcome lies within 0.05 of 0.6
    CHECK_THROWS_AS(random_rect_mask(2, 2, 1, 0.6, rng), GenerationError);
}

TEST_CASE("mask files round trip") {
    Rng rng(21);
    MaskSpec spec = random_rect_mask(32, 32, 4, 0.3, rng);
    const std::string p = temp_path("vp_mask_roundtrip.png");
    save_mask(spec, p);
    MaskSpec back = load_mask(p);
    CHECK(back.provenance == "file");
    CHECK(back.achieved_ratio == spec.achieved_ratio);
    CHECK(std::memcmp(back.pixel_mask.data().data(), spec.pixel_mask.data().data(),
                      spec.pixel_mask.size() * sizeof(float)) == 0);
    std::filesystem::remove(p);
}

TEST_CASE("load_mask thresholds and rejects multi-channel input") {
    const std::string pw = temp_path("vp_mask_white.png");
    const std::string pb = temp_path("vp_mask_black.png");
    const std::string pc = temp_path("vp_mask_rgb.png");
    save_png(pw, Tensor::full({1, 8, 8}, 1.0f));
    save_png(pb, Tensor::zeros({1, 8, 8}));
    save_png(pc, Tensor::full({3, 8, 8}, 1.0f));

    MaskSpec white = load_mask(pw);
    CHECK(count_set(white.pixel_mask) == 64);
    CHECK(white.achieved_ratio == 1.0);
    MaskSpec black = load_mask(pb);
    CHECK(count_set(black.pixel_mask) == 0);
    CHECK(black.achieved_ratio == 0.0);
    CHECK_THROWS_AS(load_mask(pc), FormatError);

    // 127 maps to 0, 128 maps to 1
    const std::string pt = temp_path("vp_mask_thresh.png");
    save_png(pt, Tensor::from_data({1, 1, 2}, {127.0f / 255.0f, 128.0f / 255.0f}));
    MaskSpec th = load_mask(pt);
    CHECK(th.pixel_mask.data()[0] == 0.0f);
    CHECK(th.pixel_mask.data()[1] == 1.0f);

    for (const auto& p : {pw, pb, pc, pt}) std::filesystem::remove(p);
}

}  // TEST_SUITE
