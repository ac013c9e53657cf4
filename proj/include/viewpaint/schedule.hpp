#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace viewpaint {

// Noise schedule over T steps. All quantities are kept in double so the
// product identities hold to near machine precision; they become f32 only
// when multiplied into tensors. Immutable after construction.
//
// Storage is 1-indexed over t in [1,T]; alpha_bar(0) = 1 by convention.
struct NoiseSchedule {
    int T = 0;
    std::string kind;  // "cosine" | "laplace"
    double mu = 0.0;   // laplace location (log-SNR median)
    double b = 0.0;    // laplace scale
    std::vector<double> betas;           // size T+1, [0] unused
    std::vector<double> alphas;          // 1 - beta
    std::vector<double> alpha_bars;      // running product, [0] = 1
    std::vector<double> posterior_vars;  // (1-abar_{t-1})/(1-abar_t) * beta_t

    double beta(int t) const;
    double alpha(int t) const;
    double alpha_bar(int t) const;  // accepts t = 0
    double posterior_var(int t) const;

    /// Round-trippable description, e.g. "cosine:T=100" or
    /// "laplace:T=1000,mu=0,b=0.5", for checkpoint manifests.
    std::string descriptor() const;
    static NoiseSchedule from_descriptor(const std::string& desc);
};

NoiseSchedule cosine_schedule(int T);
NoiseSchedule laplace_schedule(int T, double mu = 0.0, double b = 0.5);

/// Signal-to-noise ratio alpha_bar/(1-alpha_bar) at step t, capped at 1e12.
double snr(const NoiseSchedule& s, int t);

/// CSV rows "t,beta,alpha_bar,snr,posterior_var" with a header line.
void dump_schedule_csv(const NoiseSchedule& s, std::ostream& os);

}  // namespace viewpaint
