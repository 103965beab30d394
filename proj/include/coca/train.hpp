#pragma once

#include "coca/augment.hpp"
#include "coca/model.hpp"
#include "coca/objective.hpp"
#include "coca/series.hpp"

#include <limits>
#include <vector>

namespace coca {

struct TrainConfig {
    double learning_rate = 3e-4;
    double weight_decay = 5e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.99;
    int batch_size = 64;
    int max_epochs = 100;
    int center_freeze_epoch = 10;  // e: center updates stop after epoch e-1
    int early_stop_patience = 10;
    double early_stop_min_delta = 1e-5;
    double clip_norm = 5.0;
    std::uint64_t seed = 42;

    void validate() const;
};

// One record per completed epoch; similarity and spread statistics are
// batch-size-weighted means over the epoch's training batches, computed on
// l2-normalized projections against the center in effect for each batch.
struct EpochRecord {
    int epoch = 0;
    double loss = 0.0;
    double invariance = 0.0;
    double variance_q = 0.0;
    double variance_q_prime = 0.0;
    double sim_q_ce = 0.0;
    double sim_qp_ce = 0.0;
    double sim_q_qp = 0.0;
    double proj_std = 0.0;  // mean per-dimension std of normalized projections
    std::uint64_t center_hash = 0;
};

struct TrainHistory {
    std::vector<EpochRecord> records;
    int best_epoch = -1;
    double best_loss = std::numeric_limits<double>::infinity();
    bool early_stopped = false;
};

// Decoupled-weight-decay adaptive-moment update with global-norm clipping.
class AdamW {
public:
    AdamW(const ParamStore& params, const TrainConfig& cfg);
    void step(ParamStore& params, const std::vector<Matrix>& grads);

private:
    std::vector<Matrix> m_;
    std::vector<Matrix> v_;
    long step_count_ = 0;
    double lr_, wd_, b1_, b2_, clip_;
};

struct NamedNormStats {
    std::string object_id;
    NormStats stats;
};

struct TrainedModel {
    ModelConfig model_config;
    ParamStore params;   // best-loss checkpoint
    ParamStore buffers;  // BN running statistics at the best epoch
    Center center;       // frozen one-class center
    TrainHistory history;
    std::vector<NamedNormStats> norm_stats;
};

// Trains one network on the pooled training windows of the given objects:
// per epoch the augmented set is regenerated and shuffled; the center is
// recomputed per batch while epoch < e and frozen from a full eval-mode pass
// over the training windows at the end of epoch e-1; optimization is AdamW
// on the configured loss variant; early stopping watches the train loss.
TrainedModel train(const std::vector<TimeSeriesObject>& objects, const ModelConfig& model_cfg,
                   const ObjectiveConfig& obj_cfg, const TrainConfig& train_cfg,
                   const AugmentConfig& aug_cfg);

struct CollapseReport {
    bool enough_data = false;
    bool collapsed = false;
    double final_proj_std = 0.0;
    double final_loss = 0.0;
};

// Hypersphere-collapse diagnostic: flags when the final epoch's mean
// per-dimension projection std fell below 0.01 * gamma while the loss is
// below 1e-3. Needs at least two epochs of history.
CollapseReport collapse_probe(const TrainHistory& history, double gamma = 1.0);

}  // namespace coca
