#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "viewpaint/error.hpp"
#include "viewpaint/io.hpp"
#include "viewpaint/pairs.hpp"
#include "viewpaint/rng.hpp"
#include "viewpaint/tensor.hpp"

using namespace viewpaint;

namespace {

std::string temp_dir(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

bool same_bits(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() &&
           std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(float)) == 0;
}

std::string fingerprint(const Scene& sc) {
    std::ostringstream os;
    os << sc.view_size << '|';
    for (float v : sc.bg_base) os << v << ',';
    for (float v : sc.bg_dx) os << v << ',';
    for (float v : sc.bg_dy) os << v << ',';
    for (const auto& r : sc.rects) {
        os << r.x << ' ' << r.y << ' ' << r.w << ' ' << r.h << ' ' << r.layer << ' ';
        for (float c : r.color) os << c << ',';
    }
    return os.str();
}

// A scene with exactly the given rectangles and a flat mid-gray background.
Scene flat_scene(std::vector<SceneRect> rects, int view_size = 32) {
    Scene sc;
    sc.view_size = view_size;
    sc.canvas_w = 2 * view_size;
    sc.bg_base = {0.5f, 0.5f, 0.5f};
    sc.bg_dx = {0.0f, 0.0f, 0.0f};
    sc.bg_dy = {0.0f, 0.0f, 0.0f};
    sc.rects = std::move(rects);
    std::stable_sort(sc.rects.begin(), sc.rects.end(),
                     [](const SceneRect& a, const SceneRect& b) { return a.layer < b.layer; });
    return sc;
}

}  // namespace

TEST_SUITE("pairs") {

TEST_CASE("gen_scene: determinism, K range, collision scan") {
    Scene a = gen_scene(42), b = gen_scene(42);
    CHECK(fingerprint(a) == fingerprint(b));
    CHECK(a.canvas_w == 2 * a.view_size);

    std::set<std::string> seen;
    for (std::uint64_t s = 0; s < 1000; ++s) {
        Scene sc = gen_scene(s);
        CHECK(sc.rects.size() >= 3);
        CHECK(sc.rects.size() <= 8);
        for (std::size_t i = 1; i < sc.rects.size(); ++i)
            CHECK(sc.rects[i - 1].layer <= sc.rects[i].layer);  // back-to-front order
        seen.insert(fingerprint(sc));
    }
    CHECK(seen.size() >= 999);
}

TEST_CASE("render_view: canonical view matches scene description") {
    Scene sc = gen_scene(7);
    const int s = sc.view_size;
    Tensor v = render_view(sc, 0, 0.0);
    CHECK(v.shape() == Shape{3, s, s});
    for (float x : v.data()) {
        CHECK(x >= 0.0f);
        CHECK(x <= 1.0f);
    }

    auto ids = render_ids(sc, 0);
    int bg_checked = 0, fg_checked = 0;
    for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) {
            const int id = ids[static_cast<std::size_t>(y) * s + x];
            for (int c = 0; c < 3; ++c) {
                const float got = v.data()[(static_cast<std::size_t>(c) * s + y) * s + x];
                float want;
                if (id < 0) {
                    want = sc.bg_base[static_cast<std::size_t>(c)] +
                           sc.bg_dx[static_cast<std::size_t>(c)] * (static_cast<float>(x) / (s - 1)) +
                           sc.bg_dy[static_cast<std::size_t>(c)] * (static_cast<float>(y) / (s - 1));
                } else {
                    want = sc.rects[static_cast<std::size_t>(id)].color[static_cast<std::size_t>(c)];
                }
                CHECK(got == std::clamp(want, 0.0f, 1.0f));
            }
            (id < 0 ? bg_checked : fg_checked)++;
        }
    CHECK(bg_checked > 0);
    CHECK(fg_checked > 0);
}

TEST_CASE("render_view: brightness is a clamped gain") {
    Scene sc = flat_scene({});
    Tensor v = render_view(sc, 0, 0.1);
    for (float x : v.data()) CHECK(x == doctest::Approx(0.55).epsilon(1e-6));
    Tensor z = render_view(sc, 3, -1.0);
    for (float x : z.data()) CHECK(x == 0.0f);

    Scene sg = gen_scene(12);
    Tensor base = render_view(sg, 5, 0.0);
    Tensor brighter = render_view(sg, 5, 0.2);
    for (std::size_t i = 0; i < base.size(); ++i) CHECK(brighter.data()[i] >= base.data()[i]);
}

TEST_CASE("render_view window must stay inside the canvas") {
    Scene sc = gen_scene(3);
    CHECK_THROWS_AS(render_view(sc, -1, 0.0), ContractError);
    CHECK_THROWS_AS(render_view(sc, sc.view_size + 1, 0.0), ContractError);
    CHECK_NOTHROW(render_view(sc, sc.view_size, 0.0));
}

TEST_CASE("layers shift by their depth factor") {
    SceneRect near{10, 4, 6, 6, 2, {1.0f, 0.0f, 0.0f}};
    SceneRect far{10, 20, 6, 6, 0, {0.0f, 1.0f, 0.0f}};
    Scene sc = flat_scene({near, far});
    const int s = sc.view_size;

    auto first_col_of = [&](int offset, int id) {
        auto ids = render_ids(sc, offset);
        for (int x = 0; x < s; ++x)
            for (int y = 0; y < s; ++y)
                if (ids[static_cast<std::size_t>(y) * s + x] == id) return x;
        return -1;
    };
    // flat_scene sorts back-to-front, so the far rectangle is index 0
    CHECK(first_col_of(0, 1) == 10);
    CHECK(first_col_of(10, 1) == 0);   // near layer tracks the camera fully
    CHECK(first_col_of(0, 0) == 10);
    CHECK(first_col_of(10, 0) == 6);   // far layer shifts by round(0.4 * 10)
}

TEST_CASE("occlusion probe: hidden rectangle is revealed by parallax") {
    // near rectangle fully covers the far one at offset 0
    SceneRect far{10, 8, 8, 8, 0, {0.0f, 1.0f, 0.0f}};
    SceneRect near{9, 7, 10, 10, 2, {1.0f, 0.0f, 0.0f}};
    Scene sc = flat_scene({far, near});
    auto ids0 = render_ids(sc, 0);
    CHECK(std::count(ids0.begin(), ids0.end(), 0) == 0);  // far invisible
    CHECK(std::count(ids0.begin(), ids0.end(), 1) == 100);

    // at offset 8 the near layer moves 8 columns, the far layer only 3
    auto ids8 = render_ids(sc, 8);
    CHECK(std::count(ids8.begin(), ids8.end(), 0) > 0);
    CHECK(parallax_occlusion(sc, 0, 8));

    // same-layer overlap does not count as parallax occlusion
    SceneRect a{10, 8, 8, 8, 1, {0.0f, 1.0f, 0.0f}};
    SceneRect b{12, 10, 8, 8, 1, {1.0f, 0.0f, 0.0f}};
    Scene flat = flat_scene({a, b});
    CHECK(!parallax_occlusion(flat, 0, 10));
}

TEST_CASE("make_pair: pinned ranges give exact fields") {
    PairRanges rg;
    rg.min_offset = rg.max_offset = 0;
    rg.min_delta = rg.max_delta = 0.0;
    ScenePair p = make_pair(100, rg);
    CHECK(p.offset == 0);
    CHECK(p.overlap == 1.0);
    CHECK(p.quality_score == 1.0);
    CHECK(same_bits(p.view_a, p.view_b));

    rg.min_offset = rg.max_offset = 16;
    rg.min_delta = rg.max_delta = 0.1;
    ScenePair q = make_pair(100, rg);
    CHECK(q.overlap == 0.5);
    CHECK(q.quality_score == doctest::Approx(0.45).epsilon(1e-12));
    CHECK(!same_bits(q.view_a, q.view_b));

    rg.min_offset = rg.max_offset = 32;  // disjoint windows
    rg.min_delta = rg.max_delta = 0.0;
    CHECK(make_pair(100, rg).overlap == 0.0);

    rg.min_offset = 5;
    rg.max_offset = 4;
    CHECK_THROWS_AS(make_pair(100, rg), ContractError);
}

TEST_CASE("make_pair is deterministic") {
    PairRanges rg;
    ScenePair a = make_pair(77, rg), b = make_pair(77, rg);
    CHECK(a.offset == b.offset);
    CHECK(a.brightness_delta == b.brightness_delta);
    CHECK(same_bits(a.view_a, b.view_a));
    CHECK(same_bits(a.view_b, b.view_b));
}

TEST_CASE("complementarity: parallax occlusion in at least 30% of kept pairs") {
    PairRanges rg;  // offsets over the full [0, 32]
    int kept = 0, hits = 0;
    for (std::uint64_t seed = 0; seed < 600; ++seed) {
        ScenePair p = make_pair(seed, rg);
        if (p.overlap < 0.5 || p.overlap > 0.9) continue;
        ++kept;
        hits += parallax_occlusion(gen_scene(seed), 0, p.offset);
    }
    CHECK(kept > 100);
    CHECK(static_cast<double>(hits) / kept >= 0.3);
}

TEST_CASE("make_dataset: layout, filter, audit, determinism") {
    const std::string d1 = temp_dir("vp_pairs_ds1");
    const std::string d2 = temp_dir("vp_pairs_ds2");
    std::filesystem::remove_all(d1);
    std::filesystem::remove_all(d2);

    PairFilter f;
    auto recs = make_dataset(25, 1234, f, d1);
    REQUIRE(recs.size() == 25);
    PairRanges full;
    for (int i = 0; i < 25; ++i) {
        const auto& r = recs[static_cast<std::size_t>(i)];
        CHECK(r.id == i);
        CHECK(r.overlap >= 0.5);
        CHECK(r.overlap <= 0.9);
        CHECK(r.overlap == 1.0 - static_cast<double>(r.offset) / 32.0);
        CHECK(r.quality == doctest::Approx(r.overlap * (1.0 - std::fabs(r.delta))).epsilon(1e-12));
        // regenerating from the recorded seed reproduces the pair
        ScenePair p = make_pair(r.seed, full);
        CHECK(p.offset == r.offset);
        CHECK(p.brightness_delta == r.delta);
    }

    // on-disk images byte-match a re-render
    char name[32];
    std::snprintf(name, sizeof(name), "%05d", 7);
    ScenePair p7 = make_pair(recs[7].seed, full);
    CHECK(read_file(d1 + "/pairs/" + name + "_a.png") == encode_png(p7.view_a));
    CHECK(read_file(d1 + "/pairs/" + name + "_b.png") == encode_png(p7.view_b));

    // index round trip is exact
    auto loaded = load_index(d1);
    REQUIRE(loaded.size() == recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        CHECK(loaded[i].id == recs[i].id);
        CHECK(loaded[i].seed == recs[i].seed);
        CHECK(loaded[i].offset == recs[i].offset);
        CHECK(loaded[i].delta == recs[i].delta);
        CHECK(loaded[i].overlap == recs[i].overlap);
        CHECK(loaded[i].quality == recs[i].quality);
    }

    // byte-identical re-run
    make_dataset(25, 1234, f, d2);
    CHECK(read_file(d1 + "/index.json") == read_file(d2 + "/index.json"));
    CHECK(read_file(d1 + "/pairs/00000_a.png") == read_file(d2 + "/pairs/00000_a.png"));
    CHECK(read_file(d1 + "/pairs/00013_b.png") == read_file(d2 + "/pairs/00013_b.png"));

    CHECK_THROWS_AS(make_dataset(0, 1, f, d1), ContractError);

    std::filesystem::remove_all(d1);
    std::filesystem::remove_all(d2);
}

}  // TEST_SUITE
