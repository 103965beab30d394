#pragma once

#include "coca/autodiff.hpp"
#include "coca/common.hpp"

#include <string>
#include <utility>
#include <vector>

namespace coca {

enum class Mode { Train, Eval };

// Architecture of the encoder / Seq2Seq / projector stack.
// conv_channels holds the three encoder block widths; the last entry is the
// representation width K. Three stride-2 poolings require window_length to
// be divisible by 8, giving L = window_length / 8 latent steps.
struct ModelConfig {
    int in_channels = 1;
    std::vector<int> conv_channels = {32, 64, 64};
    int kernel_size = 4;
    double dropout = 0.45;
    int hidden_size = 128;     // Seq2Seq LSTM state width
    int project_channels = 400;
    int window_length = 32;

    int repre_channels() const { return conv_channels.back(); }
    int latent_steps() const { return window_length / 8; }
    int projector_hidden() const { return repre_channels(); }
    void validate() const;
};

// Named dense parameter arrays with a stable order, addressable by name or
// index, plus flat scalar access for optimizers and finite differences.
class ParamStore {
public:
    int add(const std::string& name, Matrix value);
    int index_of(const std::string& name) const;  // -1 when absent

    int count() const { return static_cast<int>(values_.size()); }
    const std::string& name(int i) const { return names_[static_cast<std::size_t>(i)]; }
    Matrix& value(int i) { return values_[static_cast<std::size_t>(i)]; }
    const Matrix& value(int i) const { return values_[static_cast<std::size_t>(i)]; }
    Matrix& value(const std::string& name);
    const Matrix& value(const std::string& name) const;

    std::size_t scalar_count() const;
    double get_scalar(std::size_t flat) const;
    void set_scalar(std::size_t flat, double v);

    bool same_shapes(const ParamStore& other) const;

private:
    std::vector<std::string> names_;
    std::vector<Matrix> values_;
};

// The COCA network: temporal-convolution feature encoder f, LSTM Seq2Seq
// g (encoder) and h (decoder + FC), and MLP projector p. One projector
// serves both branches. Batched activations are laid out channel-major,
// (channels x n_samples * time).
class CocaNetwork {
public:
    CocaNetwork(ModelConfig cfg, std::uint64_t seed);
    CocaNetwork(ModelConfig cfg, ParamStore params, ParamStore buffers);

    const ModelConfig& config() const { return cfg_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    ParamStore& buffers() { return buffers_; }
    const ParamStore& buffers() const { return buffers_; }

    // Parameter leaves registered on a tape, aligned with params() order.
    struct TapeParams {
        std::vector<ad::Var> vars;
    };
    TapeParams register_params(ad::Tape& tape) const;

    struct TapeForward {
        ad::Var latent;                  // (K x n*L)
        std::vector<ad::Var> rec_steps;  // L entries, each (K x n), aligned with latent order
        ad::Var q_raw;                   // (P x n)
        ad::Var q_prime_raw;             // (P x n)
    };

    // Two-branch forward for a batch x of shape (d x n*T). Train mode applies
    // dropout (needs rng) and batch statistics; update_stats additionally
    // refreshes BN running statistics from the batch.
    TapeForward forward_batch(ad::Tape& tape, const TapeParams& tp, const Matrix& x, int n,
                              Mode mode, Rng* rng, bool update_stats);

    // Encoder + projector only (the augmented-view contrast path).
    ad::Var project_view(ad::Tape& tape, const TapeParams& tp, const Matrix& x, int n, Mode mode,
                         Rng* rng, bool update_stats);

    // Plain single-window surface; window is (T x d), latent sequences are
    // (L x K). These never touch running statistics.
    Matrix encode(const Matrix& window, Mode mode = Mode::Eval, Rng* rng = nullptr);
    Matrix reconstruct(const Matrix& latent);
    Vector project(const Matrix& latent, Mode mode = Mode::Eval, Rng* rng = nullptr);
    std::pair<Vector, Vector> forward(const Matrix& window, Mode mode = Mode::Eval,
                                      Rng* rng = nullptr);

    // Plain batched forward returning raw projection values (P x n) each.
    std::pair<Matrix, Matrix> forward_values(const Matrix& x, int n, Mode mode = Mode::Eval,
                                             Rng* rng = nullptr);

private:
    struct Indices {
        struct Conv {
            int w = -1, b = -1, bn_gamma = -1, bn_beta = -1;
            int bn_rmean = -1, bn_rvar = -1;  // buffer indices
        };
        struct Lstm {
            int w_ih = -1, w_hh = -1, b = -1;
        };
        std::vector<Conv> blocks;
        std::vector<Lstm> enc_layers;
        std::vector<Lstm> dec_layers;
        int fc_w = -1, fc_b = -1;
        int proj1_w = -1, proj1_b = -1, proj_bn_gamma = -1, proj_bn_beta = -1;
        int proj_bn_rmean = -1, proj_bn_rvar = -1;  // buffers
        int proj2_w = -1, proj2_b = -1;
    };

    enum class InitKind { Zero, One, Normal, Uniform };
    struct InitRule {
        InitKind kind = InitKind::Zero;
        double arg = 0.0;  // std for Normal, bound for Uniform
    };

    void build_layout();
    void init_weights(std::uint64_t seed);
    const ad::Im2ColPlan& plan_for(int block, int n);

    ad::Var build_encoder(ad::Tape& tape, const TapeParams& tp, ad::Var x, int n, Mode mode,
                          Rng* rng, bool update_stats);
    // Returns the decoder step outputs re-reversed into time order.
    std::vector<ad::Var> build_seq2seq(ad::Tape& tape, const TapeParams& tp, ad::Var latent,
                                       int n, Mode mode, Rng* rng);
    ad::Var build_projector(ad::Tape& tape, const TapeParams& tp, ad::Var pooled, Mode mode,
                            Rng* rng, bool update_stats);
    void lstm_step(ad::Tape& tape, const TapeParams& tp, const Indices::Lstm& layer, ad::Var x,
                   ad::Var& h, ad::Var& c);
    void update_running(int buffer_idx, const Vector& batch_stat);

    ModelConfig cfg_;
    ParamStore params_;
    ParamStore buffers_;
    Indices idx_;
    std::vector<InitRule> init_rules_;
    std::vector<ad::Im2ColPlan> conv_plans_;  // cached per (block, n)
    std::vector<int> conv_plan_n_;

    static constexpr double kBnEps = 1e-5;
    static constexpr double kBnMomentum = 0.1;
};

}  // namespace coca
