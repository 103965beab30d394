#include "coca/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace coca {

void TrainConfig::validate() const {
    require(learning_rate > 0.0, "train: learning_rate must be > 0");
    require(weight_decay >= 0.0, "train: weight_decay must be >= 0");
    require(adam_beta1 >= 0.0 && adam_beta1 < 1.0, "train: beta1 must be in [0,1)");
    require(adam_beta2 >= 0.0 && adam_beta2 < 1.0, "train: beta2 must be in [0,1)");
    require(batch_size >= 2, "train: batch_size must be >= 2 (variance term)");
    require(max_epochs >= 1, "train: max_epochs must be >= 1");
    require(center_freeze_epoch >= 1, "train: center_freeze_epoch must be >= 1");
    require(early_stop_patience >= 1, "train: early_stop_patience must be >= 1");
}

AdamW::AdamW(const ParamStore& params, const TrainConfig& cfg)
    : lr_(cfg.learning_rate),
      wd_(cfg.weight_decay),
      b1_(cfg.adam_beta1),
      b2_(cfg.adam_beta2),
      clip_(cfg.clip_norm) {
    m_.reserve(static_cast<std::size_t>(params.count()));
    v_.reserve(static_cast<std::size_t>(params.count()));
    for (int i = 0; i < params.count(); ++i) {
        m_.push_back(Matrix::Zero(params.value(i).rows(), params.value(i).cols()));
        v_.push_back(Matrix::Zero(params.value(i).rows(), params.value(i).cols()));
    }
}

void AdamW::step(ParamStore& params, const std::vector<Matrix>& grads) {
    require(grads.size() == m_.size(), "AdamW: gradient count mismatch");
    double sq = 0.0;
    for (const Matrix& g : grads) sq += g.squaredNorm();
    const double norm = std::sqrt(sq);
    const double scale = (clip_ > 0.0 && norm > clip_) ? clip_ / norm : 1.0;

    ++step_count_;
    const double bc1 = 1.0 - std::pow(b1_, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(b2_, static_cast<double>(step_count_));
    constexpr double kEps = 1e-8;
    for (std::size_t i = 0; i < m_.size(); ++i) {
        const Matrix g = grads[i] * scale;
        m_[i] = b1_ * m_[i] + (1.0 - b1_) * g;
        v_[i] = b2_ * v_[i] + (1.0 - b2_) * g.cwiseProduct(g);
        Matrix& p = params.value(static_cast<int>(i));
        p -= lr_ * ((m_[i] / bc1).array() / ((v_[i] / bc2).array().sqrt() + kEps)).matrix();
        p -= lr_ * wd_ * p;
    }
}

namespace {

// Pools the training windows of all objects into one batch; spans keep their
// per-object indices and are only carried for bookkeeping.
WindowBatch pooled_train_windows(const std::vector<TimeSeriesObject>& objects,
                                 const ModelConfig& cfg,
                                 std::vector<NamedNormStats>* stats_out) {
    require(!objects.empty(), "train: at least one object required");
    std::vector<WindowBatch> parts;
    for (const TimeSeriesObject& obj : objects) {
        NamedNormStats ns;
        ns.object_id = obj.id;
        ns.stats = fit_normalizer(obj);
        const TimeSeriesObject normed = normalize(obj, ns.stats);
        parts.push_back(make_windows(normed, cfg.window_length, Split::Train));
        stats_out->push_back(std::move(ns));
    }
    if (parts.size() == 1) return parts.front();

    WindowBatch pool;
    pool.object_id = "train-pool";
    pool.window_length = cfg.window_length;
    Eigen::Index cols = 0;
    for (const WindowBatch& p : parts) {
        require(p.values.rows() == parts.front().values.rows(),
                "train: objects disagree on channel count");
        cols += p.values.cols();
    }
    pool.values.resize(parts.front().values.rows(), cols);
    Eigen::Index at = 0;
    for (const WindowBatch& p : parts) {
        pool.values.middleCols(at, p.values.cols()) = p.values;
        at += p.values.cols();
        pool.window_labels.insert(pool.window_labels.end(), p.window_labels.begin(),
                                  p.window_labels.end());
        pool.spans.insert(pool.spans.end(), p.spans.begin(), p.spans.end());
    }
    return pool;
}

Matrix gather_windows(const WindowBatch& batch, const std::vector<int>& idx) {
    const int t = batch.window_length;
    Matrix x(batch.values.rows(), static_cast<Eigen::Index>(idx.size()) * t);
    for (std::size_t k = 0; k < idx.size(); ++k)
        x.middleCols(static_cast<Eigen::Index>(k) * t, t) = batch.values.middleCols(idx[k] * t, t);
    return x;
}

double mean_per_dim_std(const Matrix& q) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < q.rows(); ++j) {
        const double mean = q.row(j).mean();
        acc += std::sqrt((q.row(j).array() - mean).square().mean());
    }
    return acc / static_cast<double>(q.rows());
}

// Eval-mode full pass over the base training windows, chunked to bound the
// tape size; returns the frozen center.
Center freeze_center(CocaNetwork& net, const WindowBatch& base, const ObjectiveConfig& obj_cfg) {
    const int n = base.count();
    const int t = base.window_length;
    const int chunk = 256;
    Matrix qn(net.config().project_channels, n);
    Matrix qpn(net.config().project_channels, n);
    for (int at = 0; at < n; at += chunk) {
        const int m = std::min(chunk, n - at);
        const Matrix x = base.values.middleCols(static_cast<Eigen::Index>(at) * t,
                                                static_cast<Eigen::Index>(m) * t);
        if (obj_cfg.variant == Variant::CocaVi) {
            // The view-contrast variant has no reconstruction branch; its
            // center lives on the single encode+project path.
            ad::Tape tape;
            auto tp = net.register_params(tape);
            ad::Var q = net.project_view(tape, tp, x, m, Mode::Eval, nullptr, false);
            qn.middleCols(at, m) = l2_normalize_columns(tape.value(q));
            qpn.middleCols(at, m) = qn.middleCols(at, m);
        } else {
            const auto [q, qp] = net.forward_values(x, m, Mode::Eval, nullptr);
            qn.middleCols(at, m) = l2_normalize_columns(q);
            qpn.middleCols(at, m) = l2_normalize_columns(qp);
        }
    }
    Center ce = compute_center(qn, qpn);
    ce.frozen = true;
    return ce;
}

}  // namespace

TrainedModel train(const std::vector<TimeSeriesObject>& objects, const ModelConfig& model_cfg,
                   const ObjectiveConfig& obj_cfg, const TrainConfig& train_cfg,
                   const AugmentConfig& aug_cfg) {
    model_cfg.validate();
    obj_cfg.validate();
    train_cfg.validate();
    aug_cfg.validate();

    TrainedModel result;
    result.model_config = model_cfg;
    WindowBatch base = pooled_train_windows(objects, model_cfg, &result.norm_stats);
    require(base.count() >= 1, "train: no training windows");

    CocaNetwork net(model_cfg, train_cfg.seed);
    AdamW optimizer(net.params(), train_cfg);
    Rng rng(train_cfg.seed ^ 0x9E3779B97F4A7C15ull);

    Center center;  // live during warmup, frozen at the end of epoch e-1
    TrainHistory& history = result.history;
    ParamStore best_params = net.params();
    ParamStore best_buffers = net.buffers();
    int epochs_since_improvement = 0;
    const int freeze_epoch = train_cfg.center_freeze_epoch;
    const bool coca_vi = obj_cfg.variant == Variant::CocaVi;

    for (int epoch = 0; epoch < train_cfg.max_epochs; ++epoch) {
        // CocaVi contrasts the two augmentations directly, so the training
        // set is the original windows and views are drawn per batch.
        const WindowBatch epoch_set =
            coca_vi ? base : expand_training_set(base, aug_cfg, rng);

        std::vector<int> order(static_cast<std::size_t>(epoch_set.count()));
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);

        double ep_loss = 0, ep_inv = 0, ep_vq = 0, ep_vqp = 0;
        double ep_simq = 0, ep_simqp = 0, ep_simqqp = 0, ep_std = 0;
        long ep_n = 0;
        Center snapshot;  // center in effect for the epoch's last batch

        for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(train_cfg.batch_size)) {
            const std::size_t m =
                std::min<std::size_t>(static_cast<std::size_t>(train_cfg.batch_size),
                                      order.size() - at);
            if (m < 2) continue;  // variance term needs at least two samples
            const std::vector<int> idx(order.begin() + static_cast<long>(at),
                                       order.begin() + static_cast<long>(at + m));
            const int nb = static_cast<int>(m);
            const auto batch_no = at / static_cast<std::size_t>(train_cfg.batch_size);

            try {
            ad::Tape tape;
            CocaNetwork::TapeParams tp = net.register_params(tape);
            ad::Var q_raw, qp_raw;
            if (coca_vi) {
                WindowBatch views;
                views.object_id = epoch_set.object_id;
                views.window_length = epoch_set.window_length;
                views.values = gather_windows(epoch_set, idx);
                views.window_labels.assign(m, 0);
                views.spans.assign(m, Span{});
                const WindowBatch v1 = jitter(views, aug_cfg.jitter_ratio, rng);
                const WindowBatch v2 = scale(views, aug_cfg.scale_ratio, rng);
                q_raw = net.project_view(tape, tp, v1.values, nb, Mode::Train, &rng, true);
                qp_raw = net.project_view(tape, tp, v2.values, nb, Mode::Train, &rng, true);
            } else {
                const Matrix x = gather_windows(epoch_set, idx);
                CocaNetwork::TapeForward fw =
                    net.forward_batch(tape, tp, x, nb, Mode::Train, &rng, true);
                q_raw = fw.q_raw;
                qp_raw = fw.q_prime_raw;
            }

            ensure(tape.value(q_raw).allFinite() && tape.value(qp_raw).allFinite(),
                   "non-finite projections");
            const Matrix qn = l2_normalize_columns(tape.value(q_raw));
            const Matrix qpn = l2_normalize_columns(tape.value(qp_raw));
            const Center batch_center =
                epoch < freeze_epoch ? compute_center(qn, qpn) : center;
            snapshot = batch_center;

            TapeLoss loss = build_loss_graph(tape, q_raw, qp_raw, batch_center.values, obj_cfg);
            const double loss_value = tape.value(loss.total)(0, 0);
            ensure(std::isfinite(loss_value), "non-finite loss");

            tape.backward(loss.total);
            std::vector<Matrix> grads;
            grads.reserve(tp.vars.size());
            for (ad::Var v : tp.vars) grads.push_back(tape.grad(v));
            optimizer.step(net.params(), grads);

            const double w = static_cast<double>(nb);
            ep_loss += w * loss_value;
            ep_inv += w * tape.value(loss.invariance)(0, 0);
            ep_vq += w * tape.value(loss.variance_q)(0, 0);
            ep_vqp += w * tape.value(loss.variance_q_prime)(0, 0);
            ep_simq += (batch_center.values.transpose() * qn).sum();
            ep_simqp += (batch_center.values.transpose() * qpn).sum();
            ep_simqqp += qn.cwiseProduct(qpn).colwise().sum().sum();
            // Spread on the unit sphere: the quantity hypersphere collapse
            // destroys, independent of radial scale.
            ep_std += w * mean_per_dim_std(qn);
            ep_n += nb;
            } catch (const std::exception& e) {
                throw std::runtime_error("training diverged at epoch " + std::to_string(epoch) +
                                         ", batch " + std::to_string(batch_no) + ": " + e.what());
            }
        }
        require(ep_n > 0, "train: batch size leaves no usable batches");

        if (epoch == freeze_epoch - 1) center = freeze_center(net, base, obj_cfg);

        EpochRecord rec;
        rec.epoch = epoch;
        const double inv_n = 1.0 / static_cast<double>(ep_n);
        rec.loss = ep_loss * inv_n;
        rec.invariance = ep_inv * inv_n;
        rec.variance_q = ep_vq * inv_n;
        rec.variance_q_prime = ep_vqp * inv_n;
        rec.sim_q_ce = ep_simq * inv_n;
        rec.sim_qp_ce = ep_simqp * inv_n;
        rec.sim_q_qp = ep_simqqp * inv_n;
        rec.proj_std = ep_std * inv_n;
        rec.center_hash = center.frozen ? center.hash() : snapshot.hash();
        history.records.push_back(rec);

        if (rec.loss < history.best_loss - train_cfg.early_stop_min_delta) {
            history.best_loss = rec.loss;
            history.best_epoch = epoch;
            best_params = net.params();
            best_buffers = net.buffers();
            epochs_since_improvement = 0;
        } else {
            ++epochs_since_improvement;
            if (epochs_since_improvement >= train_cfg.early_stop_patience) {
                history.early_stopped = true;
                break;
            }
        }
    }

    // Short runs can finish before the scheduled freeze; the returned center
    // is always frozen so scoring has a fixed reference.
    if (!center.frozen) center = freeze_center(net, base, obj_cfg);

    result.params = std::move(best_params);
    result.buffers = std::move(best_buffers);
    result.center = center;
    return result;
}

CollapseReport collapse_probe(const TrainHistory& history, double gamma) {
    CollapseReport report;
    if (history.records.size() < 2) return report;
    report.enough_data = true;
    const EpochRecord& last = history.records.back();
    report.final_proj_std = last.proj_std;
    report.final_loss = last.loss;
    report.collapsed = last.proj_std < 0.01 * gamma && last.loss < 1e-3;
    return report;
}

}  // namespace coca
