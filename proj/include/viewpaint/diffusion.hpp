#pragma once

#include "viewpaint/rng.hpp"
#include "viewpaint/schedule.hpp"
#include "viewpaint/tensor.hpp"

namespace viewpaint {

// Pure diffusion math. Every function is deterministic given the explicit
// generator; none of them mutate their tensor arguments.

struct ReverseStepParams {
    Tensor mean;
    double variance = 0.0;
};

/// One forward noising step: sqrt(1-beta_t) x_{t-1} + sqrt(beta_t) eps.
Tensor forward_step(const Tensor& x_prev, int t, const NoiseSchedule& s, Rng& rng);

/// Closed-form marginal: sqrt(abar_t) x0 + sqrt(1-abar_t) eps.
Tensor forward_marginal(const Tensor& x0, int t, const NoiseSchedule& s, const Tensor& eps);

/// Gaussian posterior q(x_{t-1} | x_t, x0): mean and (scalar) variance.
ReverseStepParams posterior_params(const Tensor& x0, const Tensor& xt, int t,
                                   const NoiseSchedule& s);

/// Predicted posterior mean from predicted noise:
/// (x_t - beta_t/sqrt(1-abar_t) eps_hat) / sqrt(alpha_t).
Tensor mean_from_eps(const Tensor& xt, const Tensor& eps_hat, int t, const NoiseSchedule& s);

/// One reverse sampling step. Always consumes one image worth of normals
/// from `rng` so callers advancing in lockstep stay aligned; the noise is
/// only applied for t > 1.
Tensor reverse_step(const Tensor& xt, const Tensor& eps_hat, int t, const NoiseSchedule& s,
                    Rng& rng);

/// Training objective: mean squared error between true and predicted noise.
Tensor loss_eps(const Tensor& eps, const Tensor& eps_hat);

// The diffusion chain operates on images mapped to [-1,1]; files and
// metrics use [0,1]. Plain data transforms, not differentiable.

/// 2x - 1: [0,1] image values to the range the chain uses.
Tensor to_model_range(const Tensor& img);

/// (x+1)/2 clamped to [0,1].
Tensor from_model_range(const Tensor& x);

}  // namespace viewpaint
