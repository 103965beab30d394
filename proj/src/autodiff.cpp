#include "coca/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace coca::ad {

Im2ColPlan make_im2col_plan(int in_channels, int time_steps, int n_samples, int kernel,
                            int pad_left) {
    Im2ColPlan plan;
    plan.in_rows = in_channels;
    plan.out_rows = in_channels * kernel;
    plan.cols = n_samples * time_steps;
    plan.src.assign(static_cast<std::size_t>(plan.out_rows) * plan.cols, -1);
    for (int n = 0; n < n_samples; ++n) {
        for (int t = 0; t < time_steps; ++t) {
            const int col = n * time_steps + t;
            for (int c = 0; c < in_channels; ++c) {
                for (int u = 0; u < kernel; ++u) {
                    const int tau = t - pad_left + u;
                    if (tau < 0 || tau >= time_steps) continue;
                    const int row = c * kernel + u;
                    const int src_col = n * time_steps + tau;
                    plan.src[static_cast<std::size_t>(col) * plan.out_rows + row] =
                        src_col * in_channels + c;
                }
            }
        }
    }
    return plan;
}

Var Tape::alloc(Matrix value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate(Var v, const Matrix& g) {
    Node& n = node(v);
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    n.grad += g;
}

Var Tape::input(const Matrix& v) { return alloc(v, true); }

Var Tape::constant(const Matrix& v) { return alloc(v, false); }

Matrix Tape::grad(Var v) const {
    const Node& n = node(v);
    if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
}

void Tape::backward(Var loss) {
    require(loss.valid() && value(loss).size() == 1, "backward: loss must be a 1x1 node");
    for (auto& n : nodes_) n.grad.resize(0, 0);
    node(loss).grad = Matrix::Constant(1, 1, 1.0);
    for (int i = loss.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.grad.size() == 0 || !n.backprop) continue;
        n.backprop(*this, n.grad);
    }
}

Var Tape::add(Var a, Var b) {
    Var out = alloc(value(a) + value(b), tracked(a) || tracked(b));
    node(out).backprop = [a, b](Tape& t, const Matrix& g) {
        t.accumulate(a, g);
        t.accumulate(b, g);
    };
    return out;
}

Var Tape::sub(Var a, Var b) {
    Var out = alloc(value(a) - value(b), tracked(a) || tracked(b));
    node(out).backprop = [a, b](Tape& t, const Matrix& g) {
        t.accumulate(a, g);
        t.accumulate(b, -g);
    };
    return out;
}

Var Tape::mul(Var a, Var b) {
    Var out = alloc(value(a).cwiseProduct(value(b)), tracked(a) || tracked(b));
    node(out).backprop = [a, b](Tape& t, const Matrix& g) {
        t.accumulate(a, g.cwiseProduct(t.value(b)));
        t.accumulate(b, g.cwiseProduct(t.value(a)));
    };
    return out;
}

Var Tape::scale(Var a, double s) {
    Var out = alloc(value(a) * s, tracked(a));
    node(out).backprop = [a, s](Tape& t, const Matrix& g) { t.accumulate(a, g * s); };
    return out;
}

Var Tape::add_scalar(Var a, double s) {
    Var out = alloc(value(a).array() + s, tracked(a));
    node(out).backprop = [a](Tape& t, const Matrix& g) { t.accumulate(a, g); };
    return out;
}

Var Tape::rsub_scalar(double s, Var a) {
    Var out = alloc(s - value(a).array(), tracked(a));
    node(out).backprop = [a](Tape& t, const Matrix& g) { t.accumulate(a, -g); };
    return out;
}

Var Tape::matmul(Var a, Var b) {
    Var out = alloc(value(a) * value(b), tracked(a) || tracked(b));
    node(out).backprop = [a, b](Tape& t, const Matrix& g) {
        t.accumulate(a, g * t.value(b).transpose());
        t.accumulate(b, t.value(a).transpose() * g);
    };
    return out;
}

Var Tape::transpose(Var a) {
    Var out = alloc(value(a).transpose(), tracked(a));
    node(out).backprop = [a](Tape& t, const Matrix& g) { t.accumulate(a, g.transpose()); };
    return out;
}

Var Tape::add_col(Var a, Var col) {
    require(value(col).cols() == 1 && value(col).rows() == value(a).rows(),
            "add_col: shape mismatch");
    Var out = alloc(value(a).colwise() + value(col).col(0), tracked(a) || tracked(col));
    node(out).backprop = [a, col](Tape& t, const Matrix& g) {
        t.accumulate(a, g);
        t.accumulate(col, g.rowwise().sum());
    };
    return out;
}

Var Tape::sub_col(Var a, Var col) {
    require(value(col).cols() == 1 && value(col).rows() == value(a).rows(),
            "sub_col: shape mismatch");
    Var out = alloc(value(a).colwise() - value(col).col(0), tracked(a) || tracked(col));
    node(out).backprop = [a, col](Tape& t, const Matrix& g) {
        t.accumulate(a, g);
        t.accumulate(col, -g.rowwise().sum());
    };
    return out;
}

Var Tape::mul_col(Var a, Var col) {
    require(value(col).cols() == 1 && value(col).rows() == value(a).rows(),
            "mul_col: shape mismatch");
    Var out = alloc(value(a).array().colwise() * value(col).col(0).array(),
                    tracked(a) || tracked(col));
    node(out).backprop = [a, col](Tape& t, const Matrix& g) {
        t.accumulate(a, g.array().colwise() * t.value(col).col(0).array());
        t.accumulate(col, g.cwiseProduct(t.value(a)).rowwise().sum());
    };
    return out;
}

Var Tape::relu(Var a) {
    Var out = alloc(value(a).cwiseMax(0.0), tracked(a));
    node(out).backprop = [a](Tape& t, const Matrix& g) {
        t.accumulate(a, (t.value(a).array() > 0.0).select(g, Matrix::Zero(g.rows(), g.cols())));
    };
    return out;
}

Var Tape::sigmoid(Var a) {
    Matrix v = (1.0 / (1.0 + (-value(a).array()).exp())).matrix();
    Var out = alloc(std::move(v), tracked(a));
    node(out).backprop = [a, out](Tape& t, const Matrix& g) {
        const auto& s = t.value(out).array();
        t.accumulate(a, (g.array() * s * (1.0 - s)).matrix());
    };
    return out;
}

Var Tape::tanh(Var a) {
    Var out = alloc(value(a).array().tanh(), tracked(a));
    node(out).backprop = [a, out](Tape& t, const Matrix& g) {
        const auto& v = t.value(out).array();
        t.accumulate(a, (g.array() * (1.0 - v * v)).matrix());
    };
    return out;
}

Var Tape::sqrt(Var a) {
    require((value(a).array() > 0.0).all(), "sqrt: input must be strictly positive");
    Var out = alloc(value(a).array().sqrt(), tracked(a));
    node(out).backprop = [a, out](Tape& t, const Matrix& g) {
        t.accumulate(a, (g.array() * 0.5 / t.value(out).array()).matrix());
    };
    return out;
}

Var Tape::rows(Var a, int first, int count) {
    Var out = alloc(value(a).middleRows(first, count), tracked(a));
    node(out).backprop = [a, first, count](Tape& t, const Matrix& g) {
        Matrix full = Matrix::Zero(t.value(a).rows(), t.value(a).cols());
        full.middleRows(first, count) = g;
        t.accumulate(a, full);
    };
    return out;
}

Var Tape::gather_cols(Var a, std::vector<int> idx) {
    Matrix v(value(a).rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) v.col(static_cast<Eigen::Index>(k)) = value(a).col(idx[k]);
    Var out = alloc(std::move(v), tracked(a));
    node(out).backprop = [a, idx = std::move(idx)](Tape& t, const Matrix& g) {
        Matrix full = Matrix::Zero(t.value(a).rows(), t.value(a).cols());
        for (std::size_t k = 0; k < idx.size(); ++k)
            full.col(idx[k]) += g.col(static_cast<Eigen::Index>(k));
        t.accumulate(a, full);
    };
    return out;
}

Var Tape::im2col(Var x, const Im2ColPlan& plan) {
    require(value(x).rows() == plan.in_rows && value(x).cols() == plan.cols,
            "im2col: plan does not match input shape");
    Matrix v(plan.out_rows, plan.cols);
    const double* src = value(x).data();
    for (int c = 0; c < plan.cols; ++c) {
        for (int r = 0; r < plan.out_rows; ++r) {
            const int s = plan.src[static_cast<std::size_t>(c) * plan.out_rows + r];
            v(r, c) = s < 0 ? 0.0 : src[s];
        }
    }
    Var out = alloc(std::move(v), tracked(x));
    node(out).backprop = [x, idx = plan.src, rows = plan.out_rows](Tape& t, const Matrix& g) {
        Matrix full = Matrix::Zero(t.value(x).rows(), t.value(x).cols());
        double* dst = full.data();
        for (Eigen::Index c = 0; c < g.cols(); ++c)
            for (int r = 0; r < rows; ++r) {
                const int s = idx[static_cast<std::size_t>(c) * rows + r];
                if (s >= 0) dst[s] += g(r, c);
            }
        t.accumulate(x, full);
    };
    return out;
}

Var Tape::maxpool_time(Var x, int n_samples, int len) {
    require(len % 2 == 0, "maxpool_time: sample length must be even");
    require(value(x).cols() == static_cast<Eigen::Index>(n_samples) * len,
            "maxpool_time: shape mismatch");
    const int out_len = len / 2;
    const Eigen::Index c_rows = value(x).rows();
    Matrix v(c_rows, static_cast<Eigen::Index>(n_samples) * out_len);
    Eigen::MatrixXi sel(c_rows, v.cols());
    for (int n = 0; n < n_samples; ++n) {
        for (int t = 0; t < out_len; ++t) {
            const int c0 = n * len + 2 * t;
            const int oc = n * out_len + t;
            for (Eigen::Index r = 0; r < c_rows; ++r) {
                const double a = value(x)(r, c0);
                const double b = value(x)(r, c0 + 1);
                if (a >= b) {
                    v(r, oc) = a;
                    sel(r, oc) = c0;
                } else {
                    v(r, oc) = b;
                    sel(r, oc) = c0 + 1;
                }
            }
        }
    }
    Var out = alloc(std::move(v), tracked(x));
    node(out).backprop = [x, sel = std::move(sel)](Tape& t, const Matrix& g) {
        Matrix full = Matrix::Zero(t.value(x).rows(), t.value(x).cols());
        for (Eigen::Index c = 0; c < g.cols(); ++c)
            for (Eigen::Index r = 0; r < g.rows(); ++r) full(r, sel(r, c)) += g(r, c);
        t.accumulate(x, full);
    };
    return out;
}

Var Tape::mean_pool_time(Var x, int n_samples, int len) {
    require(value(x).cols() == static_cast<Eigen::Index>(n_samples) * len,
            "mean_pool_time: shape mismatch");
    Matrix v(value(x).rows(), n_samples);
    for (int n = 0; n < n_samples; ++n)
        v.col(n) = value(x).middleCols(n * len, len).rowwise().mean();
    Var out = alloc(std::move(v), tracked(x));
    node(out).backprop = [x, n_samples, len](Tape& t, const Matrix& g) {
        Matrix full(t.value(x).rows(), t.value(x).cols());
        for (int n = 0; n < n_samples; ++n)
            full.middleCols(n * len, len) = (g.col(n) / len).replicate(1, len);
        t.accumulate(x, full);
    };
    return out;
}

Var Tape::time_slice(Var x, int n_samples, int len, int t) {
    std::vector<int> idx(static_cast<std::size_t>(n_samples));
    for (int n = 0; n < n_samples; ++n) idx[static_cast<std::size_t>(n)] = n * len + t;
    return gather_cols(x, std::move(idx));
}

Var Tape::rowwise_mean(Var a) {
    const double c = static_cast<double>(value(a).cols());
    Var out = alloc(value(a).rowwise().mean(), tracked(a));
    node(out).backprop = [a, c](Tape& t, const Matrix& g) {
        t.accumulate(a, (g / c).replicate(1, t.value(a).cols()));
    };
    return out;
}

Var Tape::sum_all(Var a) {
    Var out = alloc(Matrix::Constant(1, 1, value(a).sum()), tracked(a));
    node(out).backprop = [a](Tape& t, const Matrix& g) {
        t.accumulate(a, Matrix::Constant(t.value(a).rows(), t.value(a).cols(), g(0, 0)));
    };
    return out;
}

Var Tape::mean_all(Var a) {
    const double n = static_cast<double>(value(a).size());
    Var out = alloc(Matrix::Constant(1, 1, value(a).mean()), tracked(a));
    node(out).backprop = [a, n](Tape& t, const Matrix& g) {
        t.accumulate(a, Matrix::Constant(t.value(a).rows(), t.value(a).cols(), g(0, 0) / n));
    };
    return out;
}

Var Tape::l2_normalize_cols(Var a) {
    const Eigen::Index n = value(a).cols();
    Vector norms(n);
    Matrix v(value(a).rows(), n);
    for (Eigen::Index c = 0; c < n; ++c) {
        const double nrm = value(a).col(c).norm();
        ensure(nrm > 1e-12, "l2_normalize_cols: zero vector at column " + std::to_string(c));
        norms(c) = nrm;
        v.col(c) = value(a).col(c) / nrm;
    }
    Var out = alloc(std::move(v), tracked(a));
    node(out).backprop = [a, out, norms = std::move(norms)](Tape& t, const Matrix& g) {
        Matrix gx(g.rows(), g.cols());
        for (Eigen::Index c = 0; c < g.cols(); ++c) {
            const auto y = t.value(out).col(c);
            gx.col(c) = (g.col(c) - y * y.dot(g.col(c))) / norms(c);
        }
        t.accumulate(a, gx);
    };
    return out;
}

Var Tape::colwise_dot(Var a, Var b) {
    Var out = alloc(value(a).cwiseProduct(value(b)).colwise().sum(), tracked(a) || tracked(b));
    node(out).backprop = [a, b](Tape& t, const Matrix& g) {
        t.accumulate(a, t.value(b).array().rowwise() * g.row(0).array());
        t.accumulate(b, t.value(a).array().rowwise() * g.row(0).array());
    };
    return out;
}

Var Tape::quantile_select(Var s, int k) {
    require(value(s).rows() == 1, "quantile_select: expects a 1 x N row");
    const Eigen::Index n = value(s).cols();
    require(k >= 0 && k < n, "quantile_select: rank out of range");
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int i, int j) {
        const double vi = value(s)(0, i), vj = value(s)(0, j);
        return vi < vj || (vi == vj && i < j);
    });
    const int chosen = order[static_cast<std::size_t>(k)];
    Var out = alloc(Matrix::Constant(1, 1, value(s)(0, chosen)), tracked(s));
    node(out).backprop = [s, chosen](Tape& t, const Matrix& g) {
        Matrix full = Matrix::Zero(1, t.value(s).cols());
        full(0, chosen) = g(0, 0);
        t.accumulate(s, full);
    };
    return out;
}

Var Tape::dropout(Var a, double rate, Rng& rng) {
    require(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0,1)");
    if (rate == 0.0) return a;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Matrix mask(value(a).rows(), value(a).cols());
    const double keep = 1.0 - rate;
    for (Eigen::Index c = 0; c < mask.cols(); ++c)
        for (Eigen::Index r = 0; r < mask.rows(); ++r)
            mask(r, c) = unif(rng) < keep ? 1.0 / keep : 0.0;
    Var out = alloc(value(a).cwiseProduct(mask), tracked(a));
    node(out).backprop = [a, mask = std::move(mask)](Tape& t, const Matrix& g) {
        t.accumulate(a, g.cwiseProduct(mask));
    };
    return out;
}

Var Tape::batchnorm_train(Var x, Var gamma, Var beta, double eps, Vector* batch_mean,
                          Vector* batch_var) {
    const Matrix& xv = value(x);
    const Eigen::Index m = xv.cols();
    require(m >= 1, "batchnorm_train: empty batch");
    Vector mu = xv.rowwise().mean();
    Vector var(xv.rows());
    for (Eigen::Index r = 0; r < xv.rows(); ++r)
        var(r) = (xv.row(r).array() - mu(r)).square().mean();
    Vector istd = (var.array() + eps).rsqrt();
    Matrix xhat = (xv.colwise() - mu).array().colwise() * istd.array();
    Matrix y = (xhat.array().colwise() * value(gamma).col(0).array()).colwise() +
               value(beta).col(0).array();
    if (batch_mean) *batch_mean = mu;
    if (batch_var) *batch_var = var;

    Var out = alloc(std::move(y), tracked(x) || tracked(gamma) || tracked(beta));
    node(out).backprop = [x, gamma, beta, istd = std::move(istd), xhat = std::move(xhat)](
                             Tape& t, const Matrix& g) {
        const double m = static_cast<double>(g.cols());
        t.accumulate(beta, g.rowwise().sum());
        t.accumulate(gamma, g.cwiseProduct(xhat).rowwise().sum());
        // dL/dx per row r: istd/m * (m*dxhat - sum(dxhat) - xhat * sum(dxhat .* xhat))
        Matrix dxhat = g.array().colwise() * t.value(gamma).col(0).array();
        Vector sum_dxhat = dxhat.rowwise().sum();
        Vector sum_dxhat_xhat = dxhat.cwiseProduct(xhat).rowwise().sum();
        Matrix dx = ((dxhat * m).colwise() - sum_dxhat) -
                    (xhat.array().colwise() * sum_dxhat_xhat.array()).matrix();
        dx = (dx.array().colwise() * (istd.array() / m)).matrix();
        t.accumulate(x, dx);
    };
    return out;
}

Var Tape::batchnorm_eval(Var x, Var gamma, Var beta, const Vector& running_mean,
                         const Vector& running_var, double eps) {
    Vector istd = (running_var.array() + eps).rsqrt();
    Matrix xhat = (value(x).colwise() - running_mean).array().colwise() * istd.array();
    Matrix y = (xhat.array().colwise() * value(gamma).col(0).array()).colwise() +
               value(beta).col(0).array();
    Var out = alloc(std::move(y), tracked(x) || tracked(gamma) || tracked(beta));
    node(out).backprop = [x, gamma, beta, istd = std::move(istd), xhat = std::move(xhat)](
                             Tape& t, const Matrix& g) {
        t.accumulate(beta, g.rowwise().sum());
        t.accumulate(gamma, g.cwiseProduct(xhat).rowwise().sum());
        t.accumulate(x, (g.array().colwise() * (t.value(gamma).col(0).array() * istd.array()))
                            .matrix());
    };
    return out;
}

Var mean_vars(Tape& tape, const std::vector<Var>& vars) {
    require(!vars.empty(), "mean_vars: empty list");
    Var acc = vars.front();
    for (std::size_t i = 1; i < vars.size(); ++i) acc = tape.add(acc, vars[i]);
    return tape.scale(acc, 1.0 / static_cast<double>(vars.size()));
}

}  // namespace coca::ad
