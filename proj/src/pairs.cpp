#include "viewpaint/pairs.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "viewpaint/error.hpp"
#include "viewpaint/io.hpp"

namespace viewpaint {

std::string pair_image_path(const std::string& dir, int id, char view) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%05d_%c.png", id, view);
    return dir + "/pairs/" + buf;
}

Scene gen_scene(std::uint64_t seed, int view_size) {
    if (view_size < 2) throw ContractError("gen_scene: view_size must be >= 2");
    Scene sc;
    sc.seed = seed;
    sc.view_size = view_size;
    sc.canvas_w = 2 * view_size;
    Rng rng(derive_seed(seed, 0));
    for (auto& v : sc.bg_base) v = static_cast<float>(rng.uniform(0.2, 0.8));
    for (auto& v : sc.bg_dx) v = static_cast<float>(rng.uniform(-0.2, 0.2));
    for (auto& v : sc.bg_dy) v = static_cast<float>(rng.uniform(-0.2, 0.2));
    const int k = static_cast<int>(rng.uniform_int(3, 8));
    const int lo = std::max(1, static_cast<int>(std::lround(0.15 * view_size)));
    const int hi = std::max(lo, static_cast<int>(std::lround(0.45 * view_size)));
    for (int i = 0; i < k; ++i) {
        SceneRect r;
        r.layer = static_cast<int>(rng.uniform_int(0, 2));
        r.w = static_cast<int>(rng.uniform_int(lo, hi));
        r.h = static_cast<int>(rng.uniform_int(lo, hi));
        r.x = static_cast<int>(rng.uniform_int(0, sc.canvas_w - r.w));
        r.y = static_cast<int>(rng.uniform_int(0, view_size - r.h));
        for (auto& c : r.color) c = static_cast<float>(rng.uniform(0.05, 0.95));
        sc.rects.push_back(r);
    }
    std::stable_sort(sc.rects.begin(), sc.rects.end(),
                     [](const SceneRect& a, const SceneRect& b) { return a.layer < b.layer; });
    return sc;
}

namespace {

void check_window(const Scene& sc, int offset, const char* who) {
    if (offset < 0 || offset + sc.view_size > sc.canvas_w)
        throw ContractError(std::string(who) + ": window at offset " + std::to_string(offset) +
                            " leaves the canvas (view " + std::to_string(sc.view_size) +
                            ", canvas " + std::to_string(sc.canvas_w) + ")");
}

int screen_x(const SceneRect& r, int offset) {
    return r.x - static_cast<int>(std::lround(kDepthFactors[static_cast<std::size_t>(r.layer)] *
                                              offset));
}

}  // namespace

Tensor render_view(const Scene& sc, int offset, double brightness_delta) {
    check_window(sc, offset, "render_view");
    const int s = sc.view_size;
    const float denom = s > 1 ? static_cast<float>(s - 1) : 1.0f;
    std::vector<float> img(static_cast<std::size_t>(3) * s * s);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < s; ++y)
            for (int x = 0; x < s; ++x)
                img[(static_cast<std::size_t>(c) * s + y) * s + x] =
                    sc.bg_base[static_cast<std::size_t>(c)] +
                    sc.bg_dx[static_cast<std::size_t>(c)] * (static_cast<float>(x) / denom) +
                    sc.bg_dy[static_cast<std::size_t>(c)] * (static_cast<float>(y) / denom);
    for (int layer = 0; layer < 3; ++layer)
        for (const auto& r : sc.rects) {
            if (r.layer != layer) continue;
            const int sx = screen_x(r, offset);
            for (int y = std::max(0, r.y); y < std::min(s, r.y + r.h); ++y)
                for (int x = std::max(0, sx); x < std::min(s, sx + r.w); ++x)
                    for (int c = 0; c < 3; ++c)
                        img[(static_cast<std::size_t>(c) * s + y) * s + x] =
                            r.color[static_cast<std::size_t>(c)];
        }
    const float gain = static_cast<float>(1.0 + brightness_delta);
    for (auto& v : img) v = std::clamp(v * gain, 0.0f, 1.0f);
    return Tensor::from_data({3, s, s}, std::move(img));
}

std::vector<int> render_ids(const Scene& sc, int offset) {
    check_window(sc, offset, "render_ids");
    const int s = sc.view_size;
    std::vector<int> ids(static_cast<std::size_t>(s) * s, -1);
    for (int layer = 0; layer < 3; ++layer)
        for (std::size_t i = 0; i < sc.rects.size(); ++i) {
            const auto& r = sc.rects[i];
            if (r.layer != layer) continue;
            const int sx = screen_x(r, offset);
            for (int y = std::max(0, r.y); y < std::min(s, r.y + r.h); ++y)
                for (int x = std::max(0, sx); x < std::min(s, sx + r.w); ++x)
                    ids[static_cast<std::size_t>(y) * s + x] = static_cast<int>(i);
        }
    return ids;
}

bool parallax_occlusion(const Scene& sc, int offset_a, int offset_b) {
    const int s = sc.view_size;
    const auto ia = render_ids(sc, offset_a);
    const auto ib = render_ids(sc, offset_b);
    for (std::size_t i = 0; i < sc.rects.size(); ++i) {
        const auto& r = sc.rects[i];
        const int sxa = screen_x(r, offset_a);
        const int sxb = screen_x(r, offset_b);
        for (int ly = 0; ly < r.h; ++ly) {
            const int y = r.y + ly;
            if (y < 0 || y >= s) continue;
            for (int lx = 0; lx < r.w; ++lx) {
                const int xa = sxa + lx, xb = sxb + lx;
                if (xa < 0 || xa >= s || xb < 0 || xb >= s) continue;
                const bool va = ia[static_cast<std::size_t>(y) * s + xa] == static_cast<int>(i);
                const bool vb = ib[static_cast<std::size_t>(y) * s + xb] == static_cast<int>(i);
                if (va != vb) return true;  // hidden by a nearer layer in one view only
            }
        }
    }
    return false;
}

ScenePair make_pair(std::uint64_t seed, const PairRanges& rg, int view_size) {
    if (rg.min_offset > rg.max_offset || rg.min_delta > rg.max_delta)
        throw ContractError("make_pair: empty range");
    Scene sc = gen_scene(seed, view_size);
    Rng rng(derive_seed(seed, 1));
    ScenePair p;
    p.offset = static_cast<int>(rng.uniform_int(rg.min_offset, rg.max_offset));
    p.brightness_delta = rng.uniform(rg.min_delta, rg.max_delta);
    p.view_a = render_view(sc, 0, 0.0);
    p.view_b = render_view(sc, p.offset, p.brightness_delta);
    p.overlap = 1.0 - std::fabs(static_cast<double>(p.offset)) / view_size;
    p.quality_score = p.overlap * (1.0 - std::fabs(p.brightness_delta));
    return p;
}

std::vector<PairRecord> make_dataset(int n, std::uint64_t seed, const PairFilter& filter,
                                     const std::string& dir, int view_size) {
    if (n < 1) throw ContractError("make_dataset: n must be >= 1");
    if (filter.min_overlap > filter.max_overlap)
        throw ContractError("make_dataset: empty overlap filter");
    std::filesystem::create_directories(dir + "/pairs");

    PairRanges rg;
    rg.max_offset = view_size;  // full translation range; the filter selects
    std::vector<PairRecord> recs;
    nlohmann::json jpairs = nlohmann::json::array();
    const std::uint64_t budget = static_cast<std::uint64_t>(n) * 1000 + 100000;
    for (std::uint64_t k = 0; recs.size() < static_cast<std::size_t>(n); ++k) {
        if (k > budget)
            throw GenerationError("make_dataset: overlap filter accepted fewer than " +
                                  std::to_string(n) + " pairs in " + std::to_string(budget) +
                                  " candidates");
        const std::uint64_t ps = derive_seed(seed, k);
        ScenePair p = make_pair(ps, rg, view_size);
        if (p.overlap < filter.min_overlap || p.overlap > filter.max_overlap) continue;
        const int id = static_cast<int>(recs.size());
        save_png(pair_image_path(dir, id, 'a'), p.view_a);
        save_png(pair_image_path(dir, id, 'b'), p.view_b);
        recs.push_back({id, ps, p.offset, p.brightness_delta, p.overlap, p.quality_score});
        jpairs.push_back({{"id", id},
                          {"seed", std::to_string(ps)},
                          {"offset", p.offset},
                          {"delta", p.brightness_delta},
                          {"overlap", p.overlap},
                          {"quality", p.quality_score}});
    }
    nlohmann::json root = {{"seed", std::to_string(seed)},
                           {"view_size", view_size},
                           {"pairs", jpairs}};
    const std::string text = root.dump(2) + "\n";
    write_file(dir + "/index.json", std::vector<unsigned char>(text.begin(), text.end()));
    return recs;
}

std::vector<PairRecord> load_index(const std::string& dir) {
    const auto bytes = read_file(dir + "/index.json");
    const std::string text(bytes.begin(), bytes.end());
    try {
        const auto root = nlohmann::json::parse(text);
        std::vector<PairRecord> recs;
        for (const auto& jp : root.at("pairs")) {
            PairRecord r;
            r.id = jp.at("id").get<int>();
            r.seed = std::stoull(jp.at("seed").get<std::string>());
            r.offset = jp.at("offset").get<int>();
            r.delta = jp.at("delta").get<double>();
            r.overlap = jp.at("overlap").get<double>();
            r.quality = jp.at("quality").get<double>();
            recs.push_back(r);
        }
        return recs;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("index.json: " + std::string(e.what()) + " [" + dir + "]");
    }
}

}  // namespace viewpaint
