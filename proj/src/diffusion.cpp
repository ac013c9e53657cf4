#include "viewpaint/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "viewpaint/error.hpp"

namespace viewpaint {

namespace {

void check_t(int t, const NoiseSchedule& s, const char* op) {
    if (t < 1 || t > s.T)
        throw ContractError(std::string(op) + ": step " + std::to_string(t) + " outside [1," +
                            std::to_string(s.T) + "]");
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shapes differ, " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
}

}  // namespace

Tensor forward_step(const Tensor& x_prev, int t, const NoiseSchedule& s, Rng& rng) {
    check_t(t, s, "forward_step");
    const double beta = s.beta(t);
    Tensor eps = randn(x_prev.shape(), rng);
    return add(scale(x_prev, std::sqrt(1.0 - beta)), scale(eps, std::sqrt(beta)));
}

Tensor forward_marginal(const Tensor& x0, int t, const NoiseSchedule& s, const Tensor& eps) {
    check_t(t, s, "forward_marginal");
    check_same_shape(x0, eps, "forward_marginal");
    const double ab = s.alpha_bar(t);
    return add(scale(x0, std::sqrt(ab)), scale(eps, std::sqrt(1.0 - ab)));
}

ReverseStepParams posterior_params(const Tensor& x0, const Tensor& xt, int t,
                                   const NoiseSchedule& s) {
    check_t(t, s, "posterior_params");
    check_same_shape(x0, xt, "posterior_params");
    const double ab = s.alpha_bar(t);
    const double ab_prev = s.alpha_bar(t - 1);
    const double beta = s.beta(t);
    const double alpha = s.alpha(t);
    const double denom = 1.0 - ab;
    if (denom < 1e-12)
        throw NumericError("posterior_params: 1-alpha_bar(t) below 1e-12 at t=" +
                           std::to_string(t));
    const double c0 = std::sqrt(ab_prev) * beta / denom;
    const double ct = std::sqrt(alpha) * (1.0 - ab_prev) / denom;
    ReverseStepParams p;
    p.mean = add(scale(x0, c0), scale(xt, ct));
    p.variance = (1.0 - ab_prev) / denom * beta;
    return p;
}

Tensor mean_from_eps(const Tensor& xt, const Tensor& eps_hat, int t, const NoiseSchedule& s) {
    check_t(t, s, "mean_from_eps");
    check_same_shape(xt, eps_hat, "mean_from_eps");
    const double alpha = s.alpha(t);
    const double ab = s.alpha_bar(t);
    const double coef = s.beta(t) / std::sqrt(1.0 - ab);
    return scale(sub(xt, scale(eps_hat, coef)), 1.0 / std::sqrt(alpha));
}

Tensor reverse_step(const Tensor& xt, const Tensor& eps_hat, int t, const NoiseSchedule& s,
                    Rng& rng) {
    Tensor mean = mean_from_eps(xt, eps_hat, t, s);
    Tensor z = randn(xt.shape(), rng);  // drawn unconditionally; see header
    if (t == 1) return mean;
    const double var = s.posterior_var(t);
    if (var == 0.0) return mean;
    return add(mean, scale(z, std::sqrt(var)));
}

Tensor loss_eps(const Tensor& eps, const Tensor& eps_hat) {
    check_same_shape(eps, eps_hat, "loss_eps");
    return mse(eps, eps_hat);
}

Tensor to_model_range(const Tensor& img) {
    std::vector<float> out(img.data().begin(), img.data().end());
    for (float& v : out) v = 2.0f * v - 1.0f;
    return Tensor::from_data(img.shape(), std::move(out));
}

Tensor from_model_range(const Tensor& x) {
    std::vector<float> out(x.data().begin(), x.data().end());
    for (float& v : out) v = std::clamp((v + 1.0f) * 0.5f, 0.0f, 1.0f);
    return Tensor::from_data(x.shape(), std::move(out));
}

}  // namespace viewpaint
