#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "viewpaint/denoiser.hpp"
#include "viewpaint/pairs.hpp"
#include "viewpaint/rng.hpp"
#include "viewpaint/schedule.hpp"
#include "viewpaint/tensor.hpp"

namespace viewpaint {

// Decoupled weight-decay adaptive-moment optimizer (AdamW). Moments are
// stored as f32 tensors aligned with the parameter list order; the update
// arithmetic runs in double and narrows once per assignment, so a state
// round-tripped through a checkpoint resumes bit-exactly.
struct OptimizerState {
    double lr = 4e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 0.01;
    double eps = 1e-8;
    std::int64_t step = 0;
    std::vector<Tensor> m;  // first moments, one per parameter
    std::vector<Tensor> v;  // second moments

    /// Zero moments shaped like `params`; step = 0.
    static OptimizerState init(const std::vector<std::pair<std::string, Tensor>>& params,
                               double lr = 4e-4);

    /// One update from the gradients currently stored on `params`:
    ///   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2,
    ///   p <- p - lr * (mhat / (sqrt(vhat) + eps) + wd * p)
    /// with bias-corrected mhat, vhat. Parameters without a gradient are
    /// treated as having zero gradient (weight decay still applies).
    /// Increments step. Throws ContractError if `params` does not match the
    /// shapes captured at init.
    void apply(const std::vector<std::pair<std::string, Tensor>>& params);
};

struct TrainConfig {
    int epochs = 1;
    int batch_size = 16;
    double lr = 4e-4;
    double weight_decay = 0.01;
    std::string schedule = "cosine";  // "cosine" | "laplace"
    int T = 100;
    std::uint64_t seed = 0;
    int checkpoint_stride = 0;  // epochs between checkpoints; 0 = final only
    std::string dataset_dir;
    DenoiserConfig model;

    /// Throws ConfigError on non-positive sizes, unknown schedule, or an
    /// invalid model config. epochs may be zero (checkpoint of the
    /// initialization).
    void validate() const;

    NoiseSchedule make_schedule() const;
};

/// Strict JSON parse of a TrainConfig; unknown keys anywhere are a
/// ConfigError. Recognized keys: epochs, batch_size, learning_rate,
/// weight_decay, schedule, T, seed, checkpoint_stride, dataset, and a
/// nested "model" object with the DenoiserConfig field names.
TrainConfig parse_train_config(const std::string& json_text);

/// One optimization step over a batch of pairs. Per pair, in batch order:
/// draw t uniform in [1,T], then eps ~ N(0,I); x_t is the closed-form
/// marginal of view_a mapped to [-1,1]; the clean view_b (kept in [0,1]) is
/// the cross-attended context. The loss is the mean over the batch of the
/// per-element MSE between eps and the prediction; gradients flow through a
/// fresh tape per sample with the loss scaled by 1/batch. Returns the batch
/// loss. Throws TrainingError with a diagnostic dump if the loss is not
/// finite, ContractError on an empty batch.
double train_step(DenoiserModel& model, const std::vector<ScenePair>& batch,
                  const NoiseSchedule& s, OptimizerState& opt, Rng& rng);

/// Mean eps-prediction MSE over `pairs` without recording gradients; t and
/// eps are drawn from `rng` in the same per-pair order as train_step.
double eval_loss(const DenoiserModel& model, const std::vector<ScenePair>& pairs,
                 const NoiseSchedule& s, Rng& rng);

// Checkpoint directory layout:
//   manifest.json            config, hyperparameters, step/epoch counters,
//                            schedule descriptor, parameter name list
//   params/<name>.icdf       one tensor per parameter
//   opt_m/<name>.icdf        first moments
//   opt_v/<name>.icdf        second moments
// Writing is deterministic: identical state produces identical bytes.
struct Checkpoint {
    DenoiserModel model;
    OptimizerState opt;
    int epoch = 0;                    // completed epochs
    std::string schedule_descriptor;  // e.g. "cosine:T=100"
};

void save_checkpoint(DenoiserModel& model, const OptimizerState& opt, const std::string& path,
                     int epoch = 0, const std::string& schedule_descriptor = "");

/// Restore a checkpoint. Missing or mismatched tensor files raise a
/// FormatError naming the offending tensor. When `expect` is given, a
/// differing stored model config raises ConfigError.
Checkpoint load_checkpoint(const std::string& path, const DenoiserConfig* expect = nullptr);

/// Load every pair of a generated dataset (index.json plus PNG views) into
/// memory, in index order.
std::vector<ScenePair> load_pairs(const std::string& dir);

struct TrainResult {
    DenoiserModel model;
    OptimizerState opt;
    int epochs_run = 0;
    std::vector<double> losses;  // one entry per optimizer step
};

/// Full training run. Randomness: model init uses derive_seed(seed, 0);
/// epoch e (0-based) shuffles and draws from Rng(derive_seed(seed, 1 + e)),
/// so resuming from an epoch-boundary checkpoint replays the identical
/// stream. When out_dir is nonempty, writes loss.csv ("step,epoch,loss",
/// one row per step), stride checkpoints epoch_NNNN/ and a final one under
/// final/. resume_from names a checkpoint directory to continue from; its
/// config and schedule must match. Batches are contiguous runs of the
/// shuffled order; the last batch of an epoch may be short.
TrainResult train(const TrainConfig& cfg, const std::string& out_dir = "",
                  const std::string& resume_from = "");

}  // namespace viewpaint
