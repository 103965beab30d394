#pragma once

#include "coca/model.hpp"
#include "coca/objective.hpp"
#include "coca/train.hpp"

#include <string>

namespace coca {

// Versioned binary container: model config, named weight arrays, BN running
// buffers, the frozen center, and per-object normalization statistics.
// Round-trips bit-exactly (raw little-endian doubles).
struct Checkpoint {
    ModelConfig config;
    ParamStore params;
    ParamStore buffers;
    Center center;
    std::vector<NamedNormStats> norm_stats;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace coca
