#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "viewpaint/rng.hpp"
#include "viewpaint/schedule.hpp"
#include "viewpaint/tensor.hpp"

namespace viewpaint {

// Two-image noise predictor: a shared-weight ViT encoder over the noisy
// target and the clean second view, then decoder blocks whose cross
// attention lets target tokens read the second view, and a linear head
// back to patch pixels.
struct DenoiserConfig {
    int image_size = 32;
    int patch_size = 4;
    int channels = 3;
    int embed_dim = 128;  // one width for encoder and decoder
    int enc_depth = 4;
    int dec_depth = 3;
    int enc_heads = 4;
    int dec_heads = 4;
    int mlp_ratio = 4;
    int time_embed_dim = 128;

    int grid() const { return image_size / patch_size; }
    int n_patches() const { return grid() * grid(); }
    int patch_dim() const { return channels * patch_size * patch_size; }

    /// Throws ConfigError when divisibility invariants fail.
    void validate() const;
};

/// Config matching the scale reported for the full model (image 256,
/// patch 8, depths 12/8, heads 12/16, width 768).
DenoiserConfig paper_scale_config();

struct LayerNormParams {
    Tensor g, b;
};

struct AttentionParams {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
};

struct MlpParams {
    Tensor w1, b1, w2, b2;
};

struct EncBlockParams {
    LayerNormParams ln1;
    AttentionParams attn;
    LayerNormParams ln2;
    MlpParams mlp;
};

struct DecBlockParams {
    LayerNormParams ln1;
    AttentionParams self_attn;
    LayerNormParams ln2;
    AttentionParams cross_attn;
    LayerNormParams ln3;
    MlpParams mlp;
};

struct DenoiserModel {
    DenoiserConfig config;

    Tensor patch_proj_w, patch_proj_b;
    Tensor pos_xt, pos_ctx;  // learned positional embeddings per stream
    std::vector<EncBlockParams> enc;
    Tensor time_w1, time_b1, time_w2, time_b2;
    std::vector<DecBlockParams> dec;
    Tensor head_w, head_b;  // zero-initialized so eps_hat starts at 0

    /// Fresh model; projections truncated-normal(0.02), norms identity,
    /// output head zero. All parameters require grad.
    static DenoiserModel init(const DenoiserConfig& cfg, Rng& rng);

    /// Stable name -> tensor view of every parameter (shared storage).
    std::vector<std::pair<std::string, Tensor>> parameters();

    std::size_t param_count();
};

/// Closed-form parameter count for a config.
std::size_t expected_param_count(const DenoiserConfig& cfg);

/// [C,H,W] -> [N, C*p*p]: non-overlapping patches in row-major grid order,
/// each flattened channel-first. Differentiable.
Tensor patchify(const Tensor& img, int patch_size);

/// Inverse of patchify.
Tensor unpatchify(const Tensor& patches, int channels, int height, int width, int patch_size);

/// Sinusoidal embedding of t through the two-layer MLP; shape [1, embed_dim].
Tensor time_embedding(int t, const DenoiserModel& m);

/// Encoder over one patch sequence with the given positional table
/// (m.pos_xt or m.pos_ctx); both streams share every other weight.
/// No final norm: the residual stream keeps the input scale, which the
/// noise prediction must track (the near-terminal reverse steps divide by
/// sqrt(alpha_t) ~ 0.03 and would amplify any scale-blind error into chain
/// divergence).
Tensor encode(const Tensor& img_patches, const DenoiserModel& m, const Tensor& pos_embed);

/// Decoder: self-attention over xt tokens, cross-attention into ctx
/// tokens, MLP, repeated dec_depth times; time embedding is added to the
/// xt tokens before the first block. The linear head reads the raw
/// residual stream (no final norm, same reason as encode). Returns patch
/// pixels [N, C*p*p].
Tensor decode(const Tensor& xt_tokens, const Tensor& ctx_tokens, const Tensor& t_embed,
              const DenoiserModel& m);

/// Full noise prediction g(x_t, t, ctx) -> eps_hat, shape of xt.
Tensor predict_eps(const Tensor& xt, int t, const Tensor& ctx, const DenoiserModel& m,
                   const NoiseSchedule& s);

}  // namespace viewpaint
