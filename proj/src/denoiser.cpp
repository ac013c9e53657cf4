#include "viewpaint/denoiser.hpp"

#include <cmath>
#include <string>

#include "viewpaint/error.hpp"

namespace viewpaint {

void DenoiserConfig::validate() const {
    if (image_size <= 0 || patch_size <= 0 || channels <= 0 || embed_dim <= 0 ||
        enc_depth <= 0 || dec_depth <= 0 || enc_heads <= 0 || dec_heads <= 0 ||
        mlp_ratio <= 0 || time_embed_dim <= 0)
        throw ConfigError("denoiser config: all fields must be positive");
    if (image_size % patch_size != 0)
        throw ConfigError("denoiser config: image_size " + std::to_string(image_size) +
                          " not divisible by patch_size " + std::to_string(patch_size));
    if (embed_dim % enc_heads != 0 || embed_dim % dec_heads != 0)
        throw ConfigError("denoiser config: embed_dim " + std::to_string(embed_dim) +
                          " not divisible by head counts " + std::to_string(enc_heads) + "/" +
                          std::to_string(dec_heads));
    if (time_embed_dim % 2 != 0)
        throw ConfigError("denoiser config: time_embed_dim must be even");
}

DenoiserConfig paper_scale_config() {
    DenoiserConfig c;
    c.image_size = 256;
    c.patch_size = 8;
    c.channels = 3;
    c.embed_dim = 768;
    c.enc_depth = 12;
    c.dec_depth = 8;
    c.enc_heads = 12;
    c.dec_heads = 16;
    c.mlp_ratio = 4;
    c.time_embed_dim = 768;
    return c;
}

// ---- initialization ------------------------------------------------------

namespace {

Tensor trunc_normal(const Shape& shape, Rng& rng, float std_dev = 0.02f) {
    Tensor t = Tensor::zeros(shape);
    for (auto& v : t.raw_data()) {
        double x;
        do {
            x = rng.normal() * std_dev;
        } while (std::fabs(x) > 2.0 * std_dev);
        v = static_cast<float>(x);
    }
    t.set_requires_grad(true);
    return t;
}

Tensor const_param(const Shape& shape, float value) {
    Tensor t = Tensor::full(shape, value);
    t.set_requires_grad(true);
    return t;
}

LayerNormParams init_ln(int d) { return {const_param({d}, 1.0f), const_param({d}, 0.0f)}; }

AttentionParams init_attn(int d, Rng& rng) {
    return {trunc_normal({d, d}, rng), const_param({d}, 0.0f), trunc_normal({d, d}, rng),
            const_param({d}, 0.0f),    trunc_normal({d, d}, rng), const_param({d}, 0.0f),
            trunc_normal({d, d}, rng), const_param({d}, 0.0f)};
}

MlpParams init_mlp(int d, int ratio, Rng& rng) {
    const int hidden = d * ratio;
    return {trunc_normal({d, hidden}, rng), const_param({hidden}, 0.0f),
            trunc_normal({hidden, d}, rng), const_param({d}, 0.0f)};
}

}  // namespace

DenoiserModel DenoiserModel::init(const DenoiserConfig& cfg, Rng& rng) {
    cfg.validate();
    DenoiserModel m;
    m.config = cfg;
    const int d = cfg.embed_dim;
    m.patch_proj_w = trunc_normal({cfg.patch_dim(), d}, rng);
    m.patch_proj_b = const_param({d}, 0.0f);
    m.pos_xt = trunc_normal({cfg.n_patches(), d}, rng);
    m.pos_ctx = trunc_normal({cfg.n_patches(), d}, rng);
    for (int i = 0; i < cfg.enc_depth; ++i)
        m.enc.push_back({init_ln(d), init_attn(d, rng), init_ln(d),
                         init_mlp(d, cfg.mlp_ratio, rng)});
    m.time_w1 = trunc_normal({cfg.time_embed_dim, d}, rng);
    m.time_b1 = const_param({d}, 0.0f);
    m.time_w2 = trunc_normal({d, d}, rng);
    m.time_b2 = const_param({d}, 0.0f);
    for (int i = 0; i < cfg.dec_depth; ++i)
        m.dec.push_back({init_ln(d), init_attn(d, rng), init_ln(d), init_attn(d, rng),
                         init_ln(d), init_mlp(d, cfg.mlp_ratio, rng)});
    m.head_w = const_param({d, cfg.patch_dim()}, 0.0f);
    m.head_b = const_param({cfg.patch_dim()}, 0.0f);
    return m;
}

namespace {

void push(std::vector<std::pair<std::string, Tensor>>& out, const std::string& name,
          const Tensor& t) {
    out.emplace_back(name, t);
}

void push_ln(std::vector<std::pair<std::string, Tensor>>& out, const std::string& p,
             const LayerNormParams& ln) {
    push(out, p + ".g", ln.g);
    push(out, p + ".b", ln.b);
}

void push_attn(std::vector<std::pair<std::string, Tensor>>& out, const std::string& p,
               const AttentionParams& a) {
    push(out, p + ".wq", a.wq);
    push(out, p + ".bq", a.bq);
    push(out, p + ".wk", a.wk);
    push(out, p + ".bk", a.bk);
    push(out, p + ".wv", a.wv);
    push(out, p + ".bv", a.bv);
    push(out, p + ".wo", a.wo);
    push(out, p + ".bo", a.bo);
}

void push_mlp(std::vector<std::pair<std::string, Tensor>>& out, const std::string& p,
              const MlpParams& mlp) {
    push(out, p + ".w1", mlp.w1);
    push(out, p + ".b1", mlp.b1);
    push(out, p + ".w2", mlp.w2);
    push(out, p + ".b2", mlp.b2);
}

}  // namespace

std::vector<std::pair<std::string, Tensor>> DenoiserModel::parameters() {
    std::vector<std::pair<std::string, Tensor>> out;
    push(out, "patch_proj.w", patch_proj_w);
    push(out, "patch_proj.b", patch_proj_b);
    push(out, "pos.xt", pos_xt);
    push(out, "pos.ctx", pos_ctx);
    for (std::size_t i = 0; i < enc.size(); ++i) {
        const std::string p = "enc" + std::to_string(i);
        push_ln(out, p + ".ln1", enc[i].ln1);
        push_attn(out, p + ".attn", enc[i].attn);
        push_ln(out, p + ".ln2", enc[i].ln2);
        push_mlp(out, p + ".mlp", enc[i].mlp);
    }
    push(out, "time.w1", time_w1);
    push(out, "time.b1", time_b1);
    push(out, "time.w2", time_w2);
    push(out, "time.b2", time_b2);
    for (std::size_t i = 0; i < dec.size(); ++i) {
        const std::string p = "dec" + std::to_string(i);
        push_ln(out, p + ".ln1", dec[i].ln1);
        push_attn(out, p + ".self", dec[i].self_attn);
        push_ln(out, p + ".ln2", dec[i].ln2);
        push_attn(out, p + ".cross", dec[i].cross_attn);
        push_ln(out, p + ".ln3", dec[i].ln3);
        push_mlp(out, p + ".mlp", dec[i].mlp);
    }
    push(out, "head.w", head_w);
    push(out, "head.b", head_b);
    return out;
}

std::size_t DenoiserModel::param_count() {
    std::size_t n = 0;
    for (auto& [name, t] : parameters()) n += t.size();
    return n;
}

std::size_t expected_param_count(const DenoiserConfig& cfg) {
    const std::size_t d = static_cast<std::size_t>(cfg.embed_dim);
    const std::size_t pd = static_cast<std::size_t>(cfg.patch_dim());
    const std::size_t n = static_cast<std::size_t>(cfg.n_patches());
    const std::size_t te = static_cast<std::size_t>(cfg.time_embed_dim);
    const std::size_t hidden = d * static_cast<std::size_t>(cfg.mlp_ratio);
    const std::size_t ln = 2 * d;
    const std::size_t attn = 4 * (d * d + d);
    const std::size_t mlp = d * hidden + hidden + hidden * d + d;
    std::size_t total = 0;
    total += pd * d + d;            // patch projection
    total += 2 * n * d;             // positional tables
    total += static_cast<std::size_t>(cfg.enc_depth) * (2 * ln + attn + mlp);
    total += te * d + d + d * d + d;  // time MLP
    total += static_cast<std::size_t>(cfg.dec_depth) * (3 * ln + 2 * attn + mlp);
    total += d * pd + pd;           // output head
    return total;
}

// ---- forward pieces ------------------------------------------------------

Tensor patchify(const Tensor& img, int patch_size) {
    if (!img.defined() || img.rank() != 3)
        throw DimensionError("patchify: expected [C,H,W] tensor");
    const int c = img.shape()[0], h = img.shape()[1], w = img.shape()[2];
    if (patch_size <= 0 || h % patch_size != 0 || w % patch_size != 0)
        throw DimensionError("patchify: extents " + shape_str(img.shape()) +
                             " not divisible by patch size " + std::to_string(patch_size));
    const int gr = h / patch_size, gc = w / patch_size;
    // [C,H,W] -> [C,gr,p,gc,p] -> [gr,gc,C,p,p] -> [N, C*p*p]
    Tensor x = reshape(img, {c, gr, patch_size, gc, patch_size});
    x = transpose(x, 0, 1);  // [gr, C, p, gc, p]
    x = transpose(x, 1, 3);  // [gr, gc, p, C, p]
    x = transpose(x, 2, 3);  // [gr, gc, C, p, p]
    return reshape(x, {gr * gc, c * patch_size * patch_size});
}

Tensor unpatchify(const Tensor& patches, int channels, int height, int width, int patch_size) {
    if (!patches.defined() || patches.rank() != 2)
        throw DimensionError("unpatchify: expected [N, C*p*p] tensor");
    const int gr = height / patch_size, gc = width / patch_size;
    if (height % patch_size != 0 || width % patch_size != 0 ||
        patches.shape()[0] != gr * gc ||
        patches.shape()[1] != channels * patch_size * patch_size)
        throw DimensionError("unpatchify: patches " + shape_str(patches.shape()) +
                             " incompatible with [" + std::to_string(channels) + "," +
                             std::to_string(height) + "," + std::to_string(width) + "], p=" +
                             std::to_string(patch_size));
    Tensor x = reshape(patches, {gr, gc, channels, patch_size, patch_size});
    x = transpose(x, 2, 3);  // [gr, gc, p, C, p]
    x = transpose(x, 1, 3);  // [gr, C, p, gc, p]
    x = transpose(x, 0, 1);  // [C, gr, p, gc, p]
    return reshape(x, {channels, height, width});
}

namespace {

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    return add(matmul(x, w), b);
}

Tensor ln_affine(const Tensor& x, const LayerNormParams& p) {
    return add(mul(layer_norm(x, -1), p.g), p.b);
}

Tensor mlp_forward(const Tensor& x, const MlpParams& p) {
    return linear(gelu(linear(x, p.w1, p.b1)), p.w2, p.b2);
}

// Multi-head attention; queries from q_src, keys/values from kv_src.
// Heads are column slices, so no head reshapes are materialized.
Tensor attention(const Tensor& q_src, const Tensor& kv_src, const AttentionParams& p,
                 int heads) {
    const int d = q_src.shape()[1];
    const int hd = d / heads;
    Tensor q = linear(q_src, p.wq, p.bq);
    Tensor k = linear(kv_src, p.wk, p.bk);
    Tensor v = linear(kv_src, p.wv, p.bv);
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(hd));
    std::vector<Tensor> outs;
    outs.reserve(static_cast<std::size_t>(heads));
    for (int h = 0; h < heads; ++h) {
        Tensor qh = slice(q, 1, h * hd, hd);
        Tensor kh = slice(k, 1, h * hd, hd);
        Tensor vh = slice(v, 1, h * hd, hd);
        Tensor scores = scale(matmul_nt(qh, kh), inv_scale);
        outs.push_back(matmul(softmax(scores, -1), vh));
    }
    Tensor cat = concat(outs, 1);
    return linear(cat, p.wo, p.bo);
}

}  // namespace

Tensor time_embedding(int t, const DenoiserModel& m) {
    const int te = m.config.time_embed_dim;
    const int half = te / 2;
    std::vector<float> sin_emb(static_cast<std::size_t>(te));
    for (int i = 0; i < half; ++i) {
        const double freq = std::exp(-std::log(10000.0) * i / half);
        sin_emb[static_cast<std::size_t>(i)] = static_cast<float>(std::sin(t * freq));
        sin_emb[static_cast<std::size_t>(half + i)] = static_cast<float>(std::cos(t * freq));
    }
    Tensor base = Tensor::from_data({1, te}, std::move(sin_emb));
    return linear(gelu(linear(base, m.time_w1, m.time_b1)), m.time_w2, m.time_b2);
}

Tensor encode(const Tensor& img_patches, const DenoiserModel& m, const Tensor& pos_embed) {
    if (img_patches.rank() != 2 || img_patches.shape()[1] != m.config.patch_dim())
        throw DimensionError("encode: patches " + shape_str(img_patches.shape()) +
                             " do not match patch_dim " + std::to_string(m.config.patch_dim()));
    if (img_patches.shape()[0] != pos_embed.shape()[0])
        throw DimensionError("encode: patch count " + std::to_string(img_patches.shape()[0]) +
                             " does not match positional table " +
                             std::to_string(pos_embed.shape()[0]));
    Tensor x = add(linear(img_patches, m.patch_proj_w, m.patch_proj_b), pos_embed);
    for (const auto& blk : m.enc) {
        Tensor n1 = ln_affine(x, blk.ln1);
        x = add(x, attention(n1, n1, blk.attn, m.config.enc_heads));
        x = add(x, mlp_forward(ln_affine(x, blk.ln2), blk.mlp));
    }
    // No final norm: token magnitude must survive to the head (see header).
    return x;
}

Tensor decode(const Tensor& xt_tokens, const Tensor& ctx_tokens, const Tensor& t_embed,
              const DenoiserModel& m) {
    const int d = m.config.embed_dim;
    if (xt_tokens.rank() != 2 || xt_tokens.shape()[1] != d || ctx_tokens.rank() != 2 ||
        ctx_tokens.shape()[1] != d)
        throw DimensionError("decode: token width mismatch, " + shape_str(xt_tokens.shape()) +
                             " and " + shape_str(ctx_tokens.shape()) + " vs embed_dim " +
                             std::to_string(d));
    Tensor x = add(xt_tokens, t_embed);
    for (const auto& blk : m.dec) {
        Tensor n1 = ln_affine(x, blk.ln1);
        x = add(x, attention(n1, n1, blk.self_attn, m.config.dec_heads));
        x = add(x, attention(ln_affine(x, blk.ln2), ctx_tokens, blk.cross_attn,
                             m.config.dec_heads));
        x = add(x, mlp_forward(ln_affine(x, blk.ln3), blk.mlp));
    }
    return linear(x, m.head_w, m.head_b);
}

Tensor predict_eps(const Tensor& xt, int t, const Tensor& ctx, const DenoiserModel& m,
                   const NoiseSchedule& s) {
    if (t < 1 || t > s.T)
        throw ContractError("predict_eps: step " + std::to_string(t) + " outside [1," +
                            std::to_string(s.T) + "]");
    const auto& cfg = m.config;
    const Shape want = {cfg.channels, cfg.image_size, cfg.image_size};
    if (xt.shape() != want || ctx.shape() != want)
        throw DimensionError("predict_eps: images must both be " + shape_str(want) + ", got " +
                             shape_str(xt.shape()) + " and " + shape_str(ctx.shape()));
    Tensor xt_tok = encode(patchify(xt, cfg.patch_size), m, m.pos_xt);
    Tensor ctx_tok = encode(patchify(ctx, cfg.patch_size), m, m.pos_ctx);
    Tensor patches = decode(xt_tok, ctx_tok, time_embedding(t, m), m);
    return unpatchify(patches, cfg.channels, cfg.image_size, cfg.image_size, cfg.patch_size);
}

}  // namespace viewpaint
