#pragma once

// Shared helpers for the unit and acceptance suites: the toy-model
// finite-difference gradient check and small data builders.

#include "coca/model.hpp"
#include "coca/objective.hpp"

#include <cmath>
#include <string>

namespace coca::testing {

// Toy configuration used by every gradient check: T=8, d=1, K=4, P=6,
// dropout off so the forward pass is a deterministic function of the
// parameters.
inline ModelConfig toy_model_config() {
    ModelConfig cfg;
    cfg.in_channels = 1;
    cfg.conv_channels = {3, 5, 4};
    cfg.kernel_size = 4;
    cfg.dropout = 0.0;
    cfg.hidden_size = 3;
    cfg.project_channels = 6;
    cfg.window_length = 8;
    return cfg;
}

inline Matrix toy_batch(const ModelConfig& cfg, int n, unsigned seed) {
    Rng rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    Matrix x(cfg.in_channels, static_cast<Eigen::Index>(n) * cfg.window_length);
    for (Eigen::Index c = 0; c < x.cols(); ++c)
        for (Eigen::Index r = 0; r < x.rows(); ++r) x(r, c) = dist(rng);
    return x;
}

inline Vector unit_center(int dim, unsigned seed) {
    Rng rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    Vector v(dim);
    for (Eigen::Index i = 0; i < dim; ++i) v(i) = dist(rng);
    return v / v.norm();
}

struct GradCheckResult {
    bool ok = true;
    double worst_abs = 0.0;     // |analytic - fd| at the worst coordinate
    double worst_ref = 0.0;     // |fd| there
    std::string worst_param;
    long checked = 0;
};

// Central finite differences over every parameter scalar of the toy model
// against the tape gradient of the configured loss variant. The center is a
// fixed constant; CocaVi gets two fixed views through the encoder+projector
// path, everything else runs the two-branch forward.
inline GradCheckResult full_model_gradcheck(const ObjectiveConfig& obj_cfg, std::uint64_t seed,
                                            double rtol = 1e-3, double atol = 1e-5,
                                            int batch = 2) {
    const ModelConfig model_cfg = toy_model_config();
    CocaNetwork net(model_cfg, seed);
    const Matrix x1 = toy_batch(model_cfg, batch, static_cast<unsigned>(seed) + 1);
    const Matrix x2 = toy_batch(model_cfg, batch, static_cast<unsigned>(seed) + 2);
    const Vector center = unit_center(model_cfg.project_channels, static_cast<unsigned>(seed) + 3);

    const bool vi = obj_cfg.variant == Variant::CocaVi;
    auto loss_value_and_grads = [&](std::vector<Matrix>* grads) {
        ad::Tape tape;
        CocaNetwork::TapeParams tp = net.register_params(tape);
        ad::Var q_raw, qp_raw;
        if (vi) {
            q_raw = net.project_view(tape, tp, x1, batch, Mode::Train, nullptr, false);
            qp_raw = net.project_view(tape, tp, x2, batch, Mode::Train, nullptr, false);
        } else {
            auto fw = net.forward_batch(tape, tp, x1, batch, Mode::Train, nullptr, false);
            q_raw = fw.q_raw;
            qp_raw = fw.q_prime_raw;
        }
        const TapeLoss loss = build_loss_graph(tape, q_raw, qp_raw, center, obj_cfg);
        const double value = tape.value(loss.total)(0, 0);
        if (grads) {
            tape.backward(loss.total);
            grads->clear();
            for (ad::Var v : tp.vars) grads->push_back(tape.grad(v));
        }
        return value;
    };

    std::vector<Matrix> grads;
    loss_value_and_grads(&grads);

    GradCheckResult result;
    ParamStore& params = net.params();
    const double h = 1e-5;
    std::size_t flat = 0;
    for (int p = 0; p < params.count(); ++p) {
        for (Eigen::Index i = 0; i < params.value(p).size(); ++i, ++flat) {
            const double saved = params.get_scalar(flat);
            params.set_scalar(flat, saved + h);
            const double up = loss_value_and_grads(nullptr);
            params.set_scalar(flat, saved - h);
            const double down = loss_value_and_grads(nullptr);
            params.set_scalar(flat, saved);

            const double fd = (up - down) / (2.0 * h);
            const double analytic = grads[static_cast<std::size_t>(p)].data()[i];
            const double diff = std::abs(analytic - fd);
            ++result.checked;
            if (diff > atol + rtol * std::abs(fd)) {
                result.ok = false;
                if (diff > result.worst_abs) {
                    result.worst_abs = diff;
                    result.worst_ref = std::abs(fd);
                    result.worst_param = params.name(p);
                }
            }
        }
    }
    return result;
}

}  // namespace coca::testing
