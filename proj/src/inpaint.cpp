#include "viewpaint/inpaint.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "viewpaint/diffusion.hpp"
#include "viewpaint/error.hpp"

namespace viewpaint {

std::vector<int> JumpSchedule::timepoints() const {
    std::vector<int> ts;
    ts.reserve(deltas.size() + 1);
    int t = T;
    ts.push_back(t);
    for (int d : deltas) {
        t += d;
        ts.push_back(t);
    }
    return ts;
}

int JumpSchedule::denoise_count() const {
    int n = 0;
    for (int d : deltas)
        if (d == -1) ++n;
    return n;
}

int JumpSchedule::renoise_count() const {
    return static_cast<int>(deltas.size()) - denoise_count();
}

JumpSchedule build_jump_schedule(int T, int jump_length, int n_jumps) {
    if (T < 1 || jump_length < 1 || n_jumps < 1)
        throw ContractError("build_jump_schedule: T, jump_length and n_jumps must be positive");
    JumpSchedule js;
    js.T = T;
    js.jump_length = jump_length;
    js.n_jumps = n_jumps;
    // Re-noise budget per site: sites are the multiples of jump_length
    // strictly below T - jump_length, each allowing n_jumps - 1 extra
    // up/down cycles.
    std::vector<int> budget(static_cast<std::size_t>(T) + 1, 0);
    for (int site = 0; site < T - jump_length; site += jump_length)
        budget[static_cast<std::size_t>(site)] = n_jumps - 1;
    int t = T;
    while (t >= 1) {
        js.deltas.push_back(-1);
        --t;
        if (budget[static_cast<std::size_t>(t)] > 0) {
            --budget[static_cast<std::size_t>(t)];
            js.deltas.push_back(jump_length);
            t += jump_length;
        }
    }
    return js;
}

namespace {

void check_task_shapes(const InpaintTask& task, const Tensor& xt) {
    if (xt.shape() != task.x0_known.shape() || xt.shape() != task.ctx.shape())
        throw DimensionError("conditioned_reverse_step: state " + shape_str(xt.shape()) +
                             ", known " + shape_str(task.x0_known.shape()) + " and context " +
                             shape_str(task.ctx.shape()) + " must share one shape");
    if (xt.rank() != 3)
        throw DimensionError("conditioned_reverse_step: images must be [C,H,W], got " +
                             shape_str(xt.shape()));
    const Shape want_mask = {xt.shape()[1], xt.shape()[2]};
    if (task.mask.shape() != want_mask)
        throw DimensionError("conditioned_reverse_step: mask " + shape_str(task.mask.shape()) +
                             " does not match image rows/cols " + shape_str(want_mask));
}

Tensor inverted(const Tensor& mask) {
    std::vector<float> inv(mask.data().begin(), mask.data().end());
    for (float& v : inv) v = 1.0f - v;
    return Tensor::from_data(mask.shape(), std::move(inv));
}

/// Known region re-noised to level t-1, consuming one image of normals.
Tensor known_at_prev(const InpaintTask& task, const Tensor& x0k, int t, Rng& rng) {
    const NoiseSchedule& s = task.schedule;
    const Tensor eps = randn(x0k.shape(), rng);
    double mean_coef, noise_coef;
    if (task.known_noise == KnownNoise::marginal) {
        const double ab = s.alpha_bar(t - 1);
        mean_coef = std::sqrt(ab);
        noise_coef = std::sqrt(1.0 - ab);
    } else {
        mean_coef = std::sqrt(s.alpha_bar(t));
        noise_coef = std::sqrt(1.0 - s.alpha(t));
    }
    return add(scale(x0k, mean_coef), scale(eps, noise_coef));
}

Tensor merge(const Tensor& mask, const Tensor& inv_mask, const Tensor& masked_part,
             const Tensor& known_part) {
    return add(mul(mask, masked_part), mul(inv_mask, known_part));
}

}  // namespace

Tensor conditioned_reverse_step(const InpaintTask& task, const Tensor& xt, int t,
                                const DenoiserModel& model, Rng& rng) {
    const NoiseSchedule& s = task.schedule;
    if (t < 1 || t > s.T)
        throw ContractError("conditioned_reverse_step: step " + std::to_string(t) +
                            " outside [1," + std::to_string(s.T) + "]");
    check_task_shapes(task, xt);
    const Tensor eps_hat = predict_eps(xt, t, task.ctx, model, s);
    const Tensor xm = reverse_step(xt, eps_hat, t, s, rng);
    const Tensor xk = known_at_prev(task, to_model_range(task.x0_known), t, rng);
    return merge(task.mask, inverted(task.mask), xm, xk);
}

Tensor renoise_jump(const Tensor& x, int t_from, int t_to, const NoiseSchedule& s, Rng& rng) {
    if (t_from < 0 || t_to <= t_from || t_to > s.T)
        throw ContractError("renoise_jump: need 0 <= t_from < t_to <= T, got t_from=" +
                            std::to_string(t_from) + " t_to=" + std::to_string(t_to) + " T=" +
                            std::to_string(s.T));
    Tensor out = x;
    for (int t = t_from + 1; t <= t_to; ++t) out = forward_step(out, t, s, rng);
    return out;
}

InpaintResult inpaint(const InpaintTask& task, const DenoiserModel& model,
                      const InpaintObserver& observer) {
    const NoiseSchedule& s = task.schedule;
    if (s.T < 1) throw ContractError("inpaint: schedule is empty");
    const auto& cfg = model.config;
    const Shape want = {cfg.channels, cfg.image_size, cfg.image_size};
    if (task.x0_known.shape() != want)
        throw DimensionError("inpaint: task images must be " + shape_str(want) + " to match the "
                             "model, got " + shape_str(task.x0_known.shape()));
    check_task_shapes(task, task.x0_known);
    for (float v : task.mask.data())
        if (v != 0.0f && v != 1.0f)
            throw ContractError("inpaint: mask entries must be exactly 0 or 1");

    const JumpSchedule js = build_jump_schedule(s.T, task.jump_length, task.n_jumps);
    Rng rng(task.seed);
    Tensor x = randn(want, rng);

    // The context view is constant; encode it once and reuse the tokens at
    // every model evaluation (identical operations to predict_eps).
    const Tensor ctx_tok = encode(patchify(task.ctx, cfg.patch_size), model, model.pos_ctx);
    const Tensor x0k = to_model_range(task.x0_known);
    const Tensor inv_mask = inverted(task.mask);

    InpaintResult res;
    res.denoise_transitions = js.denoise_count();
    int t = s.T;
    int transition = 0;
    for (int delta : js.deltas) {
        if (delta == -1) {
            Tensor xt_tok = encode(patchify(x, cfg.patch_size), model, model.pos_xt);
            Tensor patches = decode(xt_tok, ctx_tok, time_embedding(t, model), model);
            Tensor eps_hat =
                unpatchify(patches, cfg.channels, cfg.image_size, cfg.image_size, cfg.patch_size);
            ++res.model_evals;
            Tensor xm = reverse_step(x, eps_hat, t, s, rng);
            Tensor xk = known_at_prev(task, x0k, t, rng);
            x = merge(task.mask, inv_mask, xm, xk);
            --t;
        } else {
            x = renoise_jump(x, t, t + delta, s, rng);
            t += delta;
        }
        ++transition;
        if (observer) observer(transition, t, x);
    }

    res.model_space = merge(task.mask, inv_mask, x, x0k);
    res.image = merge(task.mask, inv_mask, from_model_range(x), task.x0_known);
    return res;
}

}  // namespace viewpaint
