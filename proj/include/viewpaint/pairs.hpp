#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "viewpaint/rng.hpp"
#include "viewpaint/tensor.hpp"

namespace viewpaint {

// One colored rectangle in a scene; layer 0 is farthest from the camera.
struct SceneRect {
    int x = 0, y = 0, w = 0, h = 0;
    int layer = 0;
    std::array<float, 3> color{};
};

/// Horizontal parallax factor per depth layer: nearer layers track the
/// camera translation more.
inline constexpr std::array<double, 3> kDepthFactors{0.4, 0.7, 1.0};

// Procedural scene: a background gradient plus K rectangles on a canvas
// twice as wide as the rendered view, leaving room for the camera to
// translate horizontally.
struct Scene {
    std::uint64_t seed = 0;
    int view_size = 32;
    int canvas_w = 64;
    std::array<float, 3> bg_base{}, bg_dx{}, bg_dy{};
    std::vector<SceneRect> rects;  // sorted back-to-front
};

struct ScenePair {
    Tensor view_a, view_b;  // [3,S,S] in [0,1]
    int offset = 0;         // horizontal camera translation in pixels
    double brightness_delta = 0.0;
    double overlap = 0.0;        // 1 - |offset|/S
    double quality_score = 0.0;  // overlap * (1 - |brightness_delta|)
};

/// Deterministic scene from a seed; K in [3,8] rectangles.
Scene gen_scene(std::uint64_t seed, int view_size = 32);

/// Crop the canvas at horizontal `offset` (each layer shifted by its depth
/// factor), apply multiplicative brightness (1 + delta), clamp to [0,1].
Tensor render_view(const Scene& scene, int offset, double brightness_delta);

/// Per-pixel rectangle index (-1 = background) for the same projection.
std::vector<int> render_ids(const Scene& scene, int offset);

/// True when some rectangle pixel lying inside both view windows is hidden
/// by a nearer layer in exactly one of the two views (parallax
/// disocclusion).
bool parallax_occlusion(const Scene& scene, int offset_a, int offset_b);

struct PairRanges {
    int min_offset = 0, max_offset = 32;  // inclusive, pixels
    double min_delta = -0.2, max_delta = 0.2;
};

/// View A is the canonical render (offset 0, delta 0); view B gets a drawn
/// offset and brightness delta.
ScenePair make_pair(std::uint64_t seed, const PairRanges& ranges, int view_size = 32);

struct PairFilter {
    double min_overlap = 0.5, max_overlap = 0.9;
};

struct PairRecord {
    int id = 0;
    std::uint64_t seed = 0;
    int offset = 0;
    double delta = 0.0, overlap = 0.0, quality = 0.0;
};

/// Generate candidate pairs from consecutive child seeds of `seed`, keep
/// those whose overlap passes the filter, and write
/// `pairs/{id}_a.png` / `pairs/{id}_b.png` plus `index.json` under `dir`.
/// Returns the index.
std::vector<PairRecord> make_dataset(int n, std::uint64_t seed, const PairFilter& filter,
                                     const std::string& dir, int view_size = 32);

/// Parse a dataset's index.json back into records.
std::vector<PairRecord> load_index(const std::string& dir);

/// Path of a stored view image inside a dataset directory, e.g.
/// pair_image_path(dir, 7, 'a') == dir + "/pairs/00007_a.png".
std::string pair_image_path(const std::string& dir, int id, char view);

}  // namespace viewpaint
