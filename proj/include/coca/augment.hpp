#pragma once

#include "coca/series.hpp"

namespace coca {

// Jitter/scale expansion of a training batch. Disabled == NoAug variant.
struct AugmentConfig {
    double jitter_ratio = 0.35;
    double scale_ratio = 0.8;
    bool enabled = true;

    void validate() const {
        require(jitter_ratio >= 0.0, "jitter_ratio must be >= 0");
        require(scale_ratio >= 0.0, "scale_ratio must be >= 0");
    }
};

// Adds i.i.d. Normal(0, sigma^2) noise per element. Labels/spans copied.
WindowBatch jitter(const WindowBatch& batch, double sigma, Rng& rng);

// Multiplies each window by one scalar drawn from Normal(1, sigma^2),
// shared across the window's T x d elements.
WindowBatch scale(const WindowBatch& batch, double sigma, Rng& rng);

// enabled: original + jittered copy + scaled copy (3N windows, originals
// first). disabled: the original batch.
WindowBatch expand_training_set(const WindowBatch& batch, const AugmentConfig& cfg, Rng& rng);

}  // namespace coca
