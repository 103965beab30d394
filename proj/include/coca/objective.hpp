#pragma once

#include "coca/autodiff.hpp"
#include "coca/common.hpp"

#include <string>

namespace coca {

// The l2-normalized one-class center. Projections score by angular distance
// from it; it is treated as a constant by every loss gradient.
struct Center {
    Vector values;
    bool frozen = false;

    int dim() const { return static_cast<int>(values.size()); }
    std::uint64_t hash() const { return hash_vector(values); }
};

enum class LossMode { Hard, Soft };
enum class Variant { Full, NoOC, NoCL, NoVar, CocaVi };

std::string variant_name(Variant v);

struct ObjectiveConfig {
    double lambda = 1.0;
    double mu = 0.1;
    double gamma = 1.0;
    double epsilon = 1e-4;
    double nu = 0.01;      // soft-boundary trade-off, in (0,1]
    double eta = -1.0;     // quantile level; < 0 means "use nu"
    LossMode mode = LossMode::Hard;
    Variant variant = Variant::Full;

    double resolved_eta() const { return eta < 0.0 ? nu : eta; }
    void validate() const;
};

// Per-batch loss decomposition. boundary is the soft-mode quantile value
// (0 in hard mode).
struct LossBreakdown {
    double invariance = 0.0;
    double variance_q = 0.0;
    double variance_q_prime = 0.0;
    double boundary = 0.0;
    double total = 0.0;
};

// u.v / (|u||v|). Throws on a zero vector.
double cosine_sim(const Vector& u, const Vector& v);

// One-class center: mean of the 2N normalized projections, with components
// below 1e-6 in magnitude pushed to sign * 1e-6 before the final
// l2-normalization. Q / Qp are P x N column batches of unit vectors.
Center compute_center(const Matrix& q_normalized, const Matrix& q_prime_normalized);

// Per-window anomaly score S_i = 2 - sim(q_i, Ce) - sim(q'_i, Ce), in [0,4].
Vector anomaly_scores(const Matrix& q_normalized, const Matrix& q_prime_normalized,
                      const Center& center);

// Mean score over the batch.
double invariance(const Vector& scores);

struct SoftBoundary {
    double value = 0.0;     // the d_soft term
    double boundary = 0.0;  // (1 - eta)-quantile of the scores
};

// Nearest-rank (1 - eta)-quantile plus hinge excess scaled by 1/(nu N).
SoftBoundary soft_boundary_invariance(const Vector& scores, double nu, double eta);

// Nearest-rank quantile: index ceil(level * n) - 1 of the ascending sort.
double nearest_rank_quantile(const Vector& values, double level);

// Mean over dimensions of max(0, gamma - sqrt(sigma_j^2 + epsilon)), with
// per-dimension batch standard deviation (divide-by-N). Requires N >= 2.
double variance_term(const Matrix& q_normalized, double gamma, double epsilon);

// Full COCA loss family on raw (un-normalized) projection batches. For the
// CocaVi variant the caller supplies the two augmented-view projections in
// place of (Q, Q'). The center is a constant input.
LossBreakdown coca_loss(const Matrix& q_raw, const Matrix& q_prime_raw, const Center& center,
                        const ObjectiveConfig& cfg);

// Columns scaled to unit norm. Throws on a zero column.
Matrix l2_normalize_columns(const Matrix& m);

// Differentiable twin of coca_loss, built on a tape so training can
// backpropagate through it. The center is a constant; the soft-mode
// boundary's gradient flows through the selected quantile score. Values
// agree with coca_loss to machine precision (cross-checked in tests).
struct TapeLoss {
    ad::Var total;
    ad::Var invariance;
    ad::Var variance_q;
    ad::Var variance_q_prime;
    double boundary = 0.0;
};

TapeLoss build_loss_graph(ad::Tape& tape, ad::Var q_raw, ad::Var q_prime_raw,
                          const Vector& center, const ObjectiveConfig& cfg);

}  // namespace coca
