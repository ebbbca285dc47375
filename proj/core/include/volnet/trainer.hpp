#pragma once

#include <span>
#include <string>
#include <vector>

#include "volnet/network.hpp"
#include "volnet/series.hpp"

namespace volnet {

struct BatchItem {
    const Volume* voxels = nullptr; // normalized rank-3 sample
    int label = 0;
};

/// Learning rate at an epoch: lr0 * decay_factor^floor(epoch / decay_every).
double lr_at_epoch(std::size_t epoch, const CnnConfig& config);

/// One SGD-momentum update over a mini-batch: accumulates the gradient of
/// the mean-BCE-plus-L2 loss, applies v <- momentum*v + g and
/// theta <- theta - lr*v, and returns the pre-update batch loss. Gradients
/// are zeroed at entry. Per-sample passes run in fixed-size chunks reduced
/// in chunk order, so the result is independent of the thread count.
double train_step(CnnParams& params, std::span<const BatchItem> batch, double lr,
                  const CnnConfig& config);

struct EpochStats {
    std::size_t epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double val_loss = 0.0;
    double val_auc = 0.0;
};

struct TrainHistory {
    std::vector<EpochStats> epochs;
    std::size_t best_epoch = 0;
    std::string stop_reason; // "early_stop" or "max_epochs"
};

/// Early-stopping bookkeeping carried across a checkpoint/resume boundary.
struct TrainerState {
    std::size_t next_epoch = 0;
    long best_epoch = -1;
    double best_val_auc = 0.0;
    std::size_t epochs_since_improve = 0;
    TrainHistory history;
};

/// Everything needed to continue an interrupted run exactly.
struct ResumePoint {
    CnnParams params;      // current parameters with velocity buffers
    CnnParams best_params; // snapshot from the best epoch so far
    TrainerState state;
};

struct TrainResult {
    CnnParams best_params;  // parameters from the best-validation-AUC epoch
    CnnParams final_params; // parameters and velocities after the last step
    TrainHistory history;
    TrainerState end_state;
};

/// Full training loop: seeded per-epoch shuffles, mini-batches with the
/// last partial batch kept, per-epoch validation AUC (subject-level soft
/// vote), early stopping on that AUC, and best-epoch parameter snapshots.
/// Train and validation subject sets must be disjoint. Passing `resume`
/// continues a checkpointed run; with the same config, data and seed the
/// continuation is bit-identical to an uninterrupted run.
TrainResult train(const CnnConfig& config, std::span<const Sample3D> train_samples,
                  std::span<const Sample3D> val_samples, const ResumePoint* resume = nullptr);

/// Probabilities for many normalized samples; read-only on the parameters
/// and parallel over samples, results indexed by position.
std::vector<double> predict_batch(const CnnConfig& config, const CnnParams& params,
                                  std::span<const Sample3D> samples);

} // namespace volnet
