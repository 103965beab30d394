#pragma once

#include "coca/common.hpp"

#include <functional>
#include <vector>

namespace coca::ad {

// Handle into a Tape; valid only for the tape that produced it.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Element-gather plan for expressing Conv1D as matmul(weights, im2col(x)).
// src holds, for every output element (column-major), the flat column-major
// index into the source matrix, or -1 for padding.
struct Im2ColPlan {
    int in_rows = 0;
    int out_rows = 0;
    int cols = 0;
    std::vector<int> src;
};

Im2ColPlan make_im2col_plan(int in_channels, int time_steps, int n_samples, int kernel,
                            int pad_left);

// Reverse-mode tape over dense Eigen matrices. Values are computed eagerly;
// backward() walks nodes in reverse creation order, propagating gradients
// only along paths that reach tracked leaves.
//
// Batched activations use the layout (channels x n_samples*time): sample n's
// step t lives in column n*time + t.
class Tape {
public:
    // Leaves. input() is tracked (gradient accumulated), constant() is not.
    Var input(const Matrix& v);
    Var constant(const Matrix& v);

    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);  // elementwise
    Var scale(Var a, double s);
    Var add_scalar(Var a, double s);
    Var rsub_scalar(double s, Var a);  // s - a, elementwise
    Var matmul(Var a, Var b);
    Var transpose(Var a);

    // Column-broadcast ops; col is (rows x 1).
    Var add_col(Var a, Var col);
    Var sub_col(Var a, Var col);
    Var mul_col(Var a, Var col);

    Var relu(Var a);
    Var sigmoid(Var a);
    Var tanh(Var a);
    Var sqrt(Var a);  // elementwise; requires strictly positive input

    Var rows(Var a, int first, int count);
    Var gather_cols(Var a, std::vector<int> idx);
    Var im2col(Var x, const Im2ColPlan& plan);

    // (C x n*len) -> (C x n*len/2), max over adjacent column pairs per sample.
    Var maxpool_time(Var x, int n_samples, int len);
    // (C x n*len) -> (C x n), mean over each sample's len columns.
    Var mean_pool_time(Var x, int n_samples, int len);
    // (C x n*len) -> (C x n), column n*len + t of every sample.
    Var time_slice(Var x, int n_samples, int len, int t);

    Var rowwise_mean(Var a);  // (R x C) -> (R x 1)
    Var sum_all(Var a);       // -> (1 x 1)
    Var mean_all(Var a);      // -> (1 x 1)

    Var l2_normalize_cols(Var a);
    Var colwise_dot(Var a, Var b);  // (P x N), (P x N) -> (1 x N)

    // kth smallest entry (0-based) of a 1 x N row; ties resolved by column
    // order. Gradient flows to the selected entry.
    Var quantile_select(Var s, int k);

    // Inverted dropout; identity when rate == 0.
    Var dropout(Var a, double rate, Rng& rng);

    // Batch norm over columns, per row. gamma/beta are (C x 1) leaves.
    // Train mode uses in-batch statistics (biased variance) and reports them
    // so callers can maintain running estimates; eval mode applies the given
    // running statistics as constants.
    Var batchnorm_train(Var x, Var gamma, Var beta, double eps, Vector* batch_mean,
                        Vector* batch_var);
    Var batchnorm_eval(Var x, Var gamma, Var beta, const Vector& running_mean,
                       const Vector& running_var, double eps);

    void backward(Var loss);

    const Matrix& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
    // Gradient of the last backward() w.r.t. v; zeros if v was not reached.
    Matrix grad(Var v) const;

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Matrix value;
        Matrix grad;  // empty until touched
        bool requires_grad = false;
        std::function<void(Tape&, const Matrix&)> backprop;
    };

    std::vector<Node> nodes_;

    Var alloc(Matrix value, bool requires_grad);
    Node& node(Var v) { return nodes_[static_cast<std::size_t>(v.id)]; }
    const Node& node(Var v) const { return nodes_[static_cast<std::size_t>(v.id)]; }
    void accumulate(Var v, const Matrix& g);
    bool tracked(Var v) const { return node(v).requires_grad; }
};

// Mean of several same-shaped vars.
Var mean_vars(Tape& tape, const std::vector<Var>& vars);

}  // namespace coca::ad
