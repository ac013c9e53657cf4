#pragma once

// Plain double-precision re-implementation of the denoiser forward pass,
// written directly from the math with nested loops. Serves as an
// independent oracle: forward outputs are compared elementwise against the
// tensor-library model, and finite differences through this code give
// clean reference gradients (no f32 rounding in the difference quotient).

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "viewpaint/denoiser.hpp"

namespace refm {

struct Mat {
    int r = 0, c = 0;
    std::vector<double> v;
    Mat() = default;
    Mat(int r_, int c_) : r(r_), c(c_), v(static_cast<std::size_t>(r_) * c_, 0.0) {}
    double& at(int i, int j) { return v[static_cast<std::size_t>(i) * c + j]; }
    double at(int i, int j) const { return v[static_cast<std::size_t>(i) * c + j]; }
};

inline Mat from_tensor(const viewpaint::Tensor& t, int r, int c) {
    Mat m(r, c);
    auto d = t.data();
    for (std::size_t i = 0; i < d.size(); ++i) m.v[i] = d[i];
    return m;
}

inline std::vector<double> vec_from_tensor(const viewpaint::Tensor& t) {
    auto d = t.data();
    return std::vector<double>(d.begin(), d.end());
}

inline Mat matmul(const Mat& a, const Mat& b) {
    Mat c(a.r, b.c);
    for (int i = 0; i < a.r; ++i)
        for (int k = 0; k < a.c; ++k) {
            const double av = a.at(i, k);
            for (int j = 0; j < b.c; ++j) c.at(i, j) += av * b.at(k, j);
        }
    return c;
}

inline Mat matmul_nt(const Mat& a, const Mat& b) {
    Mat c(a.r, b.r);
    for (int i = 0; i < a.r; ++i)
        for (int j = 0; j < b.r; ++j) {
            double s = 0.0;
            for (int k = 0; k < a.c; ++k) s += a.at(i, k) * b.at(j, k);
            c.at(i, j) = s;
        }
    return c;
}

inline Mat add(const Mat& a, const Mat& b) {
    Mat c = a;
    for (std::size_t i = 0; i < c.v.size(); ++i) c.v[i] += b.v[i];
    return c;
}

inline Mat add_row(const Mat& a, const std::vector<double>& row) {
    Mat c = a;
    for (int i = 0; i < c.r; ++i)
        for (int j = 0; j < c.c; ++j) c.at(i, j) += row[static_cast<std::size_t>(j)];
    return c;
}

inline Mat linear(const Mat& x, const Mat& w, const std::vector<double>& b) {
    return add_row(matmul(x, w), b);
}

inline double gelu1(double x) {
    const double kc = 0.7978845608028654;  // sqrt(2/pi)
    const double ka = 0.044715;
    return 0.5 * x * (1.0 + std::tanh(kc * (x + ka * x * x * x)));
}

inline Mat gelu(const Mat& a) {
    Mat c = a;
    for (auto& x : c.v) x = gelu1(x);
    return c;
}

inline Mat softmax_rows(const Mat& a) {
    Mat c = a;
    for (int i = 0; i < c.r; ++i) {
        double mx = c.at(i, 0);
        for (int j = 1; j < c.c; ++j) mx = std::max(mx, c.at(i, j));
        double den = 0.0;
        for (int j = 0; j < c.c; ++j) {
            c.at(i, j) = std::exp(c.at(i, j) - mx);
            den += c.at(i, j);
        }
        for (int j = 0; j < c.c; ++j) c.at(i, j) /= den;
    }
    return c;
}

struct RefLn {
    std::vector<double> g, b;
};

inline Mat ln_affine(const Mat& a, const RefLn& p, double eps = 1e-5) {
    Mat c = a;
    for (int i = 0; i < c.r; ++i) {
        double mu = 0.0;
        for (int j = 0; j < c.c; ++j) mu += c.at(i, j);
        mu /= c.c;
        double var = 0.0;
        for (int j = 0; j < c.c; ++j) {
            const double d = c.at(i, j) - mu;
            var += d * d;
        }
        var /= c.c;
        const double inv = 1.0 / std::sqrt(var + eps);
        for (int j = 0; j < c.c; ++j) {
            const std::size_t jj = static_cast<std::size_t>(j);
            c.at(i, j) = (c.at(i, j) - mu) * inv * p.g[jj] + p.b[jj];
        }
    }
    return c;
}

struct RefAttn {
    Mat wq, wk, wv, wo;
    std::vector<double> bq, bk, bv, bo;
};

inline Mat attention(const Mat& q_src, const Mat& kv_src, const RefAttn& p, int heads) {
    const int d = q_src.c;
    const int hd = d / heads;
    Mat q = linear(q_src, p.wq, p.bq);
    Mat k = linear(kv_src, p.wk, p.bk);
    Mat v = linear(kv_src, p.wv, p.bv);
    Mat cat(q.r, d);
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(hd));
    for (int h = 0; h < heads; ++h) {
        const int off = h * hd;
        Mat qh(q.r, hd), kh(k.r, hd), vh(v.r, hd);
        for (int i = 0; i < q.r; ++i)
            for (int j = 0; j < hd; ++j) qh.at(i, j) = q.at(i, off + j);
        for (int i = 0; i < k.r; ++i)
            for (int j = 0; j < hd; ++j) {
                kh.at(i, j) = k.at(i, off + j);
                vh.at(i, j) = v.at(i, off + j);
            }
        Mat scores = matmul_nt(qh, kh);
        for (auto& s : scores.v) s *= inv_scale;
        Mat out = matmul(softmax_rows(scores), vh);
        for (int i = 0; i < out.r; ++i)
            for (int j = 0; j < hd; ++j) cat.at(i, off + j) = out.at(i, j);
    }
    return linear(cat, p.wo, p.bo);
}

struct RefMlp {
    Mat w1, w2;
    std::vector<double> b1, b2;
};

inline Mat mlp_forward(const Mat& x, const RefMlp& p) {
    return linear(gelu(linear(x, p.w1, p.b1)), p.w2, p.b2);
}

struct RefEnc {
    RefLn ln1;
    RefAttn attn;
    RefLn ln2;
    RefMlp mlp;
};

struct RefDec {
    RefLn ln1;
    RefAttn self_attn;
    RefLn ln2;
    RefAttn cross_attn;
    RefLn ln3;
    RefMlp mlp;
};

struct RefModel {
    viewpaint::DenoiserConfig cfg;
    Mat patch_w;
    std::vector<double> patch_b;
    Mat pos_xt, pos_ctx;
    std::vector<RefEnc> enc;
    Mat time_w1, time_w2;
    std::vector<double> time_b1, time_b2;
    std::vector<RefDec> dec;
    Mat head_w;
    std::vector<double> head_b;

    static RefModel from(viewpaint::DenoiserModel& m) {
        const auto& c = m.config;
        const int d = c.embed_dim;
        RefModel r;
        r.cfg = c;
        r.patch_w = from_tensor(m.patch_proj_w, c.patch_dim(), d);
        r.patch_b = vec_from_tensor(m.patch_proj_b);
        r.pos_xt = from_tensor(m.pos_xt, c.n_patches(), d);
        r.pos_ctx = from_tensor(m.pos_ctx, c.n_patches(), d);
        auto ln = [](const viewpaint::LayerNormParams& p) {
            return RefLn{vec_from_tensor(p.g), vec_from_tensor(p.b)};
        };
        auto attn = [d](const viewpaint::AttentionParams& p) {
            return RefAttn{from_tensor(p.wq, d, d),   from_tensor(p.wk, d, d),
                           from_tensor(p.wv, d, d),   from_tensor(p.wo, d, d),
                           vec_from_tensor(p.bq),     vec_from_tensor(p.bk),
                           vec_from_tensor(p.bv),     vec_from_tensor(p.bo)};
        };
        auto mlp = [d, &c](const viewpaint::MlpParams& p) {
            const int hidden = d * c.mlp_ratio;
            return RefMlp{from_tensor(p.w1, d, hidden), from_tensor(p.w2, hidden, d),
                          vec_from_tensor(p.b1), vec_from_tensor(p.b2)};
        };
        for (auto& b : m.enc) r.enc.push_back({ln(b.ln1), attn(b.attn), ln(b.ln2), mlp(b.mlp)});
        r.time_w1 = from_tensor(m.time_w1, c.time_embed_dim, d);
        r.time_b1 = vec_from_tensor(m.time_b1);
        r.time_w2 = from_tensor(m.time_w2, d, d);
        r.time_b2 = vec_from_tensor(m.time_b2);
        for (auto& b : m.dec)
            r.dec.push_back({ln(b.ln1), attn(b.self_attn), ln(b.ln2), attn(b.cross_attn),
                             ln(b.ln3), mlp(b.mlp)});
        r.head_w = from_tensor(m.head_w, d, c.patch_dim());
        r.head_b = vec_from_tensor(m.head_b);
        return r;
    }

    Mat patchify(const std::vector<double>& img) const {
        const int p = cfg.patch_size, g = cfg.grid(), ch = cfg.channels, w = cfg.image_size;
        Mat out(cfg.n_patches(), cfg.patch_dim());
        for (int gi = 0; gi < g; ++gi)
            for (int gj = 0; gj < g; ++gj)
                for (int c = 0; c < ch; ++c)
                    for (int rr = 0; rr < p; ++rr)
                        for (int cc = 0; cc < p; ++cc) {
                            const std::size_t src =
                                (static_cast<std::size_t>(c) * w + gi * p + rr) * w + gj * p + cc;
                            out.at(gi * g + gj, (c * p + rr) * p + cc) = img[src];
                        }
        return out;
    }

    std::vector<double> unpatchify(const Mat& patches) const {
        const int p = cfg.patch_size, g = cfg.grid(), ch = cfg.channels, w = cfg.image_size;
        std::vector<double> img(static_cast<std::size_t>(ch) * w * w);
        for (int gi = 0; gi < g; ++gi)
            for (int gj = 0; gj < g; ++gj)
                for (int c = 0; c < ch; ++c)
                    for (int rr = 0; rr < p; ++rr)
                        for (int cc = 0; cc < p; ++cc) {
                            const std::size_t dst =
                                (static_cast<std::size_t>(c) * w + gi * p + rr) * w + gj * p + cc;
                            img[dst] = patches.at(gi * g + gj, (c * p + rr) * p + cc);
                        }
        return img;
    }

    std::vector<double> time_base(int t) const {
        const int half = cfg.time_embed_dim / 2;
        std::vector<double> e(static_cast<std::size_t>(cfg.time_embed_dim));
        for (int i = 0; i < half; ++i) {
            const double freq = std::exp(-std::log(10000.0) * i / half);
            e[static_cast<std::size_t>(i)] = std::sin(t * freq);
            e[static_cast<std::size_t>(half + i)] = std::cos(t * freq);
        }
        return e;
    }

    Mat encode(const Mat& patches, const Mat& pos) const {
        Mat x = add(linear(patches, patch_w, patch_b), pos);
        for (const auto& blk : enc) {
            Mat n1 = ln_affine(x, blk.ln1);
            x = add(x, attention(n1, n1, blk.attn, cfg.enc_heads));
            x = add(x, mlp_forward(ln_affine(x, blk.ln2), blk.mlp));
        }
        return x;
    }

    std::vector<double> predict(const std::vector<double>& xt, const std::vector<double>& ctx,
                                int t) const {
        Mat xt_tok = encode(patchify(xt), pos_xt);
        Mat ctx_tok = encode(patchify(ctx), pos_ctx);
        Mat base(1, cfg.time_embed_dim);
        base.v = time_base(t);
        Mat temb = linear(gelu(linear(base, time_w1, time_b1)), time_w2, time_b2);
        Mat x = xt_tok;
        for (int i = 0; i < x.r; ++i)
            for (int j = 0; j < x.c; ++j) x.at(i, j) += temb.at(0, j);
        for (const auto& blk : dec) {
            Mat n1 = ln_affine(x, blk.ln1);
            x = add(x, attention(n1, n1, blk.self_attn, cfg.dec_heads));
            x = add(x, attention(ln_affine(x, blk.ln2), ctx_tok, blk.cross_attn, cfg.dec_heads));
            x = add(x, mlp_forward(ln_affine(x, blk.ln3), blk.mlp));
        }
        return unpatchify(linear(x, head_w, head_b));
    }

    /// Mutable flat storage in the same order as DenoiserModel::parameters().
    std::vector<std::pair<std::string, std::vector<double>*>> parameters() {
        std::vector<std::pair<std::string, std::vector<double>*>> out;
        auto push = [&out](const std::string& n, std::vector<double>* p) {
            out.emplace_back(n, p);
        };
        auto push_ln = [&push](const std::string& p, RefLn& l) {
            push(p + ".g", &l.g);
            push(p + ".b", &l.b);
        };
        auto push_attn = [&push](const std::string& p, RefAttn& a) {
            push(p + ".wq", &a.wq.v);
            push(p + ".bq", &a.bq);
            push(p + ".wk", &a.wk.v);
            push(p + ".bk", &a.bk);
            push(p + ".wv", &a.wv.v);
            push(p + ".bv", &a.bv);
            push(p + ".wo", &a.wo.v);
            push(p + ".bo", &a.bo);
        };
        auto push_mlp = [&push](const std::string& p, RefMlp& m) {
            push(p + ".w1", &m.w1.v);
            push(p + ".b1", &m.b1);
            push(p + ".w2", &m.w2.v);
            push(p + ".b2", &m.b2);
        };
        push("patch_proj.w", &patch_w.v);
        push("patch_proj.b", &patch_b);
        push("pos.xt", &pos_xt.v);
        push("pos.ctx", &pos_ctx.v);
        for (std::size_t i = 0; i < enc.size(); ++i) {
            const std::string p = "enc" + std::to_string(i);
            push_ln(p + ".ln1", enc[i].ln1);
            push_attn(p + ".attn", enc[i].attn);
            push_ln(p + ".ln2", enc[i].ln2);
            push_mlp(p + ".mlp", enc[i].mlp);
        }
        push("time.w1", &time_w1.v);
        push("time.b1", &time_b1);
        push("time.w2", &time_w2.v);
        push("time.b2", &time_b2);
        for (std::size_t i = 0; i < dec.size(); ++i) {
            const std::string p = "dec" + std::to_string(i);
            push_ln(p + ".ln1", dec[i].ln1);
            push_attn(p + ".self", dec[i].self_attn);
            push_ln(p + ".ln2", dec[i].ln2);
            push_attn(p + ".cross", dec[i].cross_attn);
            push_ln(p + ".ln3", dec[i].ln3);
            push_mlp(p + ".mlp", dec[i].mlp);
        }
        push("head.w", &head_w.v);
        push("head.b", &head_b);
        return out;
    }
};

}  // namespace refm
