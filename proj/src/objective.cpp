#include "coca/objective.hpp"

#include <algorithm>
#include <cmath>

namespace coca {

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::Full: return "full";
        case Variant::NoOC: return "nooc";
        case Variant::NoCL: return "nocl";
        case Variant::NoVar: return "novar";
        case Variant::CocaVi: return "coca-vi";
    }
    return "?";
}

void ObjectiveConfig::validate() const {
    require(nu > 0.0 && nu <= 1.0, "objective: nu must be in (0,1]");
    require(gamma > 0.0, "objective: gamma must be > 0");
    require(epsilon > 0.0, "objective: epsilon must be > 0");
    require(lambda >= 0.0 && mu >= 0.0, "objective: lambda/mu must be >= 0");
    const double e = resolved_eta();
    require(e > 0.0 && e < 1.0, "objective: eta must be in (0,1)");
}

double cosine_sim(const Vector& u, const Vector& v) {
    require(u.size() == v.size(), "cosine_sim: dimension mismatch");
    const double nu_ = u.norm();
    const double nv = v.norm();
    require(nu_ > 0.0 && nv > 0.0, "cosine_sim: undefined for a zero vector");
    return u.dot(v) / (nu_ * nv);
}

Matrix l2_normalize_columns(const Matrix& m) {
    Matrix out(m.rows(), m.cols());
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const double n = m.col(c).norm();
        require(n > 0.0, "l2_normalize_columns: zero vector at column " + std::to_string(c));
        out.col(c) = m.col(c) / n;
    }
    return out;
}

Center compute_center(const Matrix& q_normalized, const Matrix& q_prime_normalized) {
    require(q_normalized.cols() >= 1, "compute_center: empty batch");
    require(q_normalized.rows() == q_prime_normalized.rows() &&
                q_normalized.cols() == q_prime_normalized.cols(),
            "compute_center: batch shape mismatch");
    Vector mean = (q_normalized.rowwise().sum() + q_prime_normalized.rowwise().sum()) /
                  (2.0 * static_cast<double>(q_normalized.cols()));
    for (Eigen::Index j = 0; j < mean.size(); ++j) {
        if (std::abs(mean(j)) < 1e-6) mean(j) = mean(j) < 0.0 ? -1e-6 : 1e-6;
    }
    Center ce;
    ce.values = mean / mean.norm();
    return ce;
}

Vector anomaly_scores(const Matrix& q_normalized, const Matrix& q_prime_normalized,
                      const Center& center) {
    require(std::abs(center.values.norm() - 1.0) < 1e-6, "anomaly_scores: center must be unit norm");
    require(q_normalized.cols() == q_prime_normalized.cols(),
            "anomaly_scores: batch size mismatch");
    const Eigen::Index n = q_normalized.cols();
    Vector s(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double nq = q_normalized.col(i).norm();
        const double nqp = q_prime_normalized.col(i).norm();
        require(nq > 0.0 && nqp > 0.0, "anomaly_scores: zero projection vector");
        s(i) = 2.0 - q_normalized.col(i).dot(center.values) / nq -
               q_prime_normalized.col(i).dot(center.values) / nqp;
    }
    return s;
}

double invariance(const Vector& scores) {
    require(scores.size() > 0, "invariance: empty batch");
    return scores.mean();
}

double nearest_rank_quantile(const Vector& values, double level) {
    require(values.size() > 0, "quantile: empty input");
    require(level > 0.0 && level <= 1.0, "quantile: level must be in (0,1]");
    std::vector<double> sorted(values.data(), values.data() + values.size());
    std::sort(sorted.begin(), sorted.end());
    const auto n = static_cast<double>(sorted.size());
    auto rank = static_cast<long>(std::ceil(level * n));
    rank = std::max<long>(1, std::min<long>(rank, sorted.size()));
    return sorted[static_cast<std::size_t>(rank - 1)];
}

SoftBoundary soft_boundary_invariance(const Vector& scores, double nu, double eta) {
    require(scores.size() > 0, "soft_boundary_invariance: empty batch");
    require(nu > 0.0 && nu <= 1.0, "soft_boundary_invariance: nu must be in (0,1]");
    require(eta > 0.0 && eta < 1.0, "soft_boundary_invariance: eta must be in (0,1)");
    SoftBoundary out;
    out.boundary = nearest_rank_quantile(scores, 1.0 - eta);
    const double excess = (scores.array() - out.boundary).cwiseMax(0.0).sum();
    out.value = out.boundary + excess / (nu * static_cast<double>(scores.size()));
    return out;
}

double variance_term(const Matrix& q_normalized, double gamma, double epsilon) {
    require(q_normalized.cols() >= 2, "variance_term: batch must have at least 2 samples");
    const Eigen::Index p = q_normalized.rows();
    double acc = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
        const double mean = q_normalized.row(j).mean();
        const double var = (q_normalized.row(j).array() - mean).square().mean();
        acc += std::max(0.0, gamma - std::sqrt(var + epsilon));
    }
    return acc / static_cast<double>(p);
}

LossBreakdown coca_loss(const Matrix& q_raw, const Matrix& q_prime_raw, const Center& center,
                        const ObjectiveConfig& cfg) {
    cfg.validate();
    require(q_raw.allFinite() && q_prime_raw.allFinite(), "coca_loss: non-finite projections");
    require(q_raw.cols() == q_prime_raw.cols(), "coca_loss: batch size mismatch");

    const Matrix q = l2_normalize_columns(q_raw);
    const Matrix qp = l2_normalize_columns(q_prime_raw);
    const Eigen::Index n = q.cols();

    // Similarities use the normalized projections; the variance hinge acts on
    // the raw projector outputs, where the gamma target is attainable.
    LossBreakdown out;
    switch (cfg.variant) {
        case Variant::Full:
        case Variant::CocaVi: {
            const Vector s = anomaly_scores(q, qp, center);
            if (cfg.mode == LossMode::Soft) {
                const SoftBoundary sb = soft_boundary_invariance(s, cfg.nu, cfg.resolved_eta());
                out.invariance = sb.value;
                out.boundary = sb.boundary;
            } else {
                out.invariance = invariance(s);
            }
            out.variance_q = variance_term(q_raw, cfg.gamma, cfg.epsilon);
            out.variance_q_prime = variance_term(q_prime_raw, cfg.gamma, cfg.epsilon);
            out.total = cfg.lambda * out.invariance +
                        0.5 * cfg.mu * (out.variance_q + out.variance_q_prime);
            break;
        }
        case Variant::NoOC: {
            double acc = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) acc += 1.0 - q.col(i).dot(qp.col(i));
            out.invariance = acc / static_cast<double>(n);
            out.variance_q = variance_term(q_raw, cfg.gamma, cfg.epsilon);
            out.variance_q_prime = variance_term(q_prime_raw, cfg.gamma, cfg.epsilon);
            out.total = cfg.lambda * out.invariance +
                        0.5 * cfg.mu * (out.variance_q + out.variance_q_prime);
            break;
        }
        case Variant::NoCL: {
            double acc = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) acc += 1.0 - q.col(i).dot(center.values);
            out.invariance = acc / static_cast<double>(n);
            out.variance_q = variance_term(q_raw, cfg.gamma, cfg.epsilon);
            out.variance_q_prime = 0.0;
            out.total = cfg.lambda * out.invariance + 0.5 * cfg.mu * out.variance_q;
            break;
        }
        case Variant::NoVar: {
            const Vector s = anomaly_scores(q, qp, center);
            if (cfg.mode == LossMode::Soft) {
                const SoftBoundary sb = soft_boundary_invariance(s, cfg.nu, cfg.resolved_eta());
                out.invariance = sb.value;
                out.boundary = sb.boundary;
            } else {
                out.invariance = invariance(s);
            }
            out.variance_q = 0.0;
            out.variance_q_prime = 0.0;
            out.total = cfg.lambda * out.invariance;
            break;
        }
    }
    return out;
}

namespace {

ad::Var tape_variance_term(ad::Tape& t, ad::Var q_normalized, const ObjectiveConfig& cfg) {
    require(t.value(q_normalized).cols() >= 2,
            "variance_term: batch must have at least 2 samples");
    ad::Var mu = t.rowwise_mean(q_normalized);
    ad::Var centered = t.sub_col(q_normalized, mu);
    ad::Var var = t.rowwise_mean(t.mul(centered, centered));
    ad::Var sd = t.sqrt(t.add_scalar(var, cfg.epsilon));
    return t.mean_all(t.relu(t.rsub_scalar(cfg.gamma, sd)));
}

// boundary + sum(max(0, s - boundary)) / (nu n); gradient reaches the
// selected score through quantile_select.
ad::Var tape_soft_boundary(ad::Tape& t, ad::Var s, const ObjectiveConfig& cfg, double* boundary) {
    const auto n = static_cast<int>(t.value(s).cols());
    int rank = static_cast<int>(std::ceil((1.0 - cfg.resolved_eta()) * n));
    rank = std::max(1, std::min(rank, n));
    ad::Var b = t.quantile_select(s, rank - 1);
    *boundary = t.value(b)(0, 0);
    ad::Var excess = t.sum_all(t.relu(t.sub_col(s, b)));
    return t.add(b, t.scale(excess, 1.0 / (cfg.nu * static_cast<double>(n))));
}

}  // namespace

TapeLoss build_loss_graph(ad::Tape& t, ad::Var q_raw, ad::Var q_prime_raw, const Vector& center,
                          const ObjectiveConfig& cfg) {
    cfg.validate();
    require(t.value(q_raw).cols() == t.value(q_prime_raw).cols(),
            "build_loss_graph: batch size mismatch");
    ad::Var qn = t.l2_normalize_cols(q_raw);
    ad::Var qpn = t.l2_normalize_cols(q_prime_raw);
    ad::Var ce_row = t.constant(center.transpose());

    TapeLoss out;
    switch (cfg.variant) {
        case Variant::Full:
        case Variant::CocaVi:
        case Variant::NoVar: {
            ad::Var s = t.rsub_scalar(2.0, t.add(t.matmul(ce_row, qn), t.matmul(ce_row, qpn)));
            out.invariance = cfg.mode == LossMode::Soft
                                 ? tape_soft_boundary(t, s, cfg, &out.boundary)
                                 : t.mean_all(s);
            if (cfg.variant == Variant::NoVar) {
                out.variance_q = t.constant(Matrix::Zero(1, 1));
                out.variance_q_prime = t.constant(Matrix::Zero(1, 1));
                out.total = t.scale(out.invariance, cfg.lambda);
            } else {
                out.variance_q = tape_variance_term(t, q_raw, cfg);
                out.variance_q_prime = tape_variance_term(t, q_prime_raw, cfg);
                out.total = t.add(t.scale(out.invariance, cfg.lambda),
                                  t.scale(t.add(out.variance_q, out.variance_q_prime),
                                          0.5 * cfg.mu));
            }
            break;
        }
        case Variant::NoOC: {
            ad::Var inv = t.mean_all(t.rsub_scalar(1.0, t.colwise_dot(qn, qpn)));
            out.invariance = inv;
            out.variance_q = tape_variance_term(t, q_raw, cfg);
            out.variance_q_prime = tape_variance_term(t, q_prime_raw, cfg);
            out.total = t.add(t.scale(inv, cfg.lambda),
                              t.scale(t.add(out.variance_q, out.variance_q_prime), 0.5 * cfg.mu));
            break;
        }
        case Variant::NoCL: {
            ad::Var inv = t.mean_all(t.rsub_scalar(1.0, t.matmul(ce_row, qn)));
            out.invariance = inv;
            out.variance_q = tape_variance_term(t, q_raw, cfg);
            out.variance_q_prime = t.constant(Matrix::Zero(1, 1));
            out.total = t.add(t.scale(inv, cfg.lambda), t.scale(out.variance_q, 0.5 * cfg.mu));
            break;
        }
    }
    return out;
}

}  // namespace coca
