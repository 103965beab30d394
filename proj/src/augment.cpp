#include "coca/augment.hpp"

namespace coca {

WindowBatch jitter(const WindowBatch& batch, double sigma, Rng& rng) {
    require(sigma >= 0.0, "jitter: sigma must be >= 0");
    WindowBatch out = batch;
    if (sigma == 0.0) return out;
    std::normal_distribution<double> noise(0.0, sigma);
    for (Eigen::Index j = 0; j < out.values.cols(); ++j)
        for (Eigen::Index i = 0; i < out.values.rows(); ++i) out.values(i, j) += noise(rng);
    return out;
}

WindowBatch scale(const WindowBatch& batch, double sigma, Rng& rng) {
    require(sigma >= 0.0, "scale: sigma must be >= 0");
    WindowBatch out = batch;
    if (sigma == 0.0) return out;
    std::normal_distribution<double> factor(1.0, sigma);
    const int T = out.window_length;
    for (int i = 0; i < out.count(); ++i)
        out.values.middleCols(i * T, T) *= factor(rng);
    return out;
}

WindowBatch expand_training_set(const WindowBatch& batch, const AugmentConfig& cfg, Rng& rng) {
    cfg.validate();
    if (!cfg.enabled) return batch;
    const WindowBatch jittered = jitter(batch, cfg.jitter_ratio, rng);
    const WindowBatch scaled = scale(batch, cfg.scale_ratio, rng);

    WindowBatch out;
    out.object_id = batch.object_id;
    out.window_length = batch.window_length;
    const int n = batch.count();
    out.values.resize(batch.values.rows(), 3 * batch.values.cols());
    out.values << batch.values, jittered.values, scaled.values;
    out.window_labels.reserve(static_cast<std::size_t>(3 * n));
    out.spans.reserve(static_cast<std::size_t>(3 * n));
    for (int copy = 0; copy < 3; ++copy) {
        out.window_labels.insert(out.window_labels.end(), batch.window_labels.begin(),
                                 batch.window_labels.end());
        out.spans.insert(out.spans.end(), batch.spans.begin(), batch.spans.end());
    }
    return out;
}

}  // namespace coca
