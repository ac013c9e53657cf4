#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "viewpaint/denoiser.hpp"
#include "viewpaint/rng.hpp"
#include "viewpaint/schedule.hpp"
#include "viewpaint/tensor.hpp"

namespace viewpaint {

// Sequence of timestep transitions for mask-conditioned sampling with
// resampling: -1 denoises one step, +jump_length re-noises jump_length
// consecutive forward steps. The walk starts at T and ends at 0.
struct JumpSchedule {
    int T = 0;
    int jump_length = 1;
    int n_jumps = 1;
    std::vector<int> deltas;

    /// The visited timesteps, starting at T and ending at 0.
    std::vector<int> timepoints() const;
    int denoise_count() const;
    int renoise_count() const;
};

/// Descend from T to 0; at every jump_length-th site below T - jump_length,
/// insert (n_jumps - 1) cycles of re-noising jump_length steps up and
/// denoising back down, harmonizing mask boundaries. n_jumps = 1 gives the
/// plain T-step chain. Throws ContractError for non-positive arguments.
JumpSchedule build_jump_schedule(int T, int jump_length, int n_jumps);

// How the known region is re-noised to level t-1 before being merged:
//   marginal: sqrt(abar_{t-1}) x0 + sqrt(1 - abar_{t-1}) eps
//             (the closed-form forward marginal at t-1; the default)
//   stepwise: sqrt(abar_t) x0 + sqrt(1 - alpha_t) eps
//             (cumulative mean at t with the single-step variance; kept as
//             an alternate mode for comparison, but statistically
//             inconsistent with the marginal at t-1 when t > 1)
enum class KnownNoise { marginal, stepwise };

struct InpaintTask {
    Tensor x0_known;  // [C,H,W] in [0,1]; known pixels are ground truth
    Tensor mask;      // [H,W], 1 = unknown / to generate, 0 = known
    Tensor ctx;       // [C,H,W] in [0,1]; clean second view for cross-attention
    NoiseSchedule schedule;
    int jump_length = 10;
    int n_jumps = 10;
    std::uint64_t seed = 0;
    KnownNoise known_noise = KnownNoise::marginal;
};

/// One mask-conditioned reverse transition t -> t-1 on a model-range state.
/// Always draws, in order, one image of reverse-step noise and one image of
/// known-region noise, so the stream does not depend on the mask. The
/// masked region follows the model's reverse step; the known region is
/// x0_known re-noised to level t-1 per task.known_noise; the two are merged
/// through the mask. Throws ContractError for t outside [1,T] and
/// DimensionError on shape mismatches.
Tensor conditioned_reverse_step(const InpaintTask& task, const Tensor& xt, int t,
                                const DenoiserModel& model, Rng& rng);

/// Forward re-noising from level t_from to t_to: one sampled forward step
/// per intermediate level. Throws ContractError unless
/// 0 <= t_from < t_to <= T.
Tensor renoise_jump(const Tensor& x, int t_from, int t_to, const NoiseSchedule& s, Rng& rng);

struct InpaintResult {
    Tensor image;        // [0,1]; known pixels bit-identical to task.x0_known
    Tensor model_space;  // raw [-1,1] chain output, known region pasted
    int model_evals = 0;
    int denoise_transitions = 0;
};

/// Called after every transition with the transition index, the timestep
/// just reached, and the current model-range state.
using InpaintObserver = std::function<void(int transition, int t, const Tensor& x)>;

/// Run the full jump schedule from x_T ~ N(0,I), merging the known region
/// every denoise transition; the clean context view is encoded once and
/// cross-attended at every model evaluation. The known region of the
/// returned images is pasted from the input at the end. Deterministic in
/// task.seed.
InpaintResult inpaint(const InpaintTask& task, const DenoiserModel& model,
                      const InpaintObserver& observer = {});

}  // namespace viewpaint
