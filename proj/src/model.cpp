#include "coca/model.hpp"

#include <cmath>

namespace coca {

void ModelConfig::validate() const {
    require(in_channels >= 1, "model: in_channels must be >= 1");
    require(conv_channels.size() == 3, "model: conv_channels must have 3 entries");
    for (int c : conv_channels) require(c >= 1, "model: conv channels must be >= 1");
    require(kernel_size >= 1, "model: kernel_size must be >= 1");
    require(dropout >= 0.0 && dropout < 1.0, "model: dropout must be in [0,1)");
    require(hidden_size >= 1, "model: hidden_size must be >= 1");
    require(project_channels >= 1, "model: project_channels must be >= 1");
    require(window_length >= 8 && window_length % 8 == 0,
            "model: window_length must be a positive multiple of 8 (three stride-2 poolings)");
}

int ParamStore::add(const std::string& name, Matrix value) {
    require(index_of(name) < 0, "ParamStore: duplicate name '" + name + "'");
    names_.push_back(name);
    values_.push_back(std::move(value));
    return count() - 1;
}

int ParamStore::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return static_cast<int>(i);
    return -1;
}

Matrix& ParamStore::value(const std::string& name) {
    const int i = index_of(name);
    require(i >= 0, "ParamStore: unknown name '" + name + "'");
    return values_[static_cast<std::size_t>(i)];
}

const Matrix& ParamStore::value(const std::string& name) const {
    const int i = index_of(name);
    require(i >= 0, "ParamStore: unknown name '" + name + "'");
    return values_[static_cast<std::size_t>(i)];
}

std::size_t ParamStore::scalar_count() const {
    std::size_t n = 0;
    for (const Matrix& m : values_) n += static_cast<std::size_t>(m.size());
    return n;
}

double ParamStore::get_scalar(std::size_t flat) const {
    for (const Matrix& m : values_) {
        const auto n = static_cast<std::size_t>(m.size());
        if (flat < n) return m.data()[flat];
        flat -= n;
    }
    throw std::out_of_range("ParamStore: flat index out of range");
}

void ParamStore::set_scalar(std::size_t flat, double v) {
    for (Matrix& m : values_) {
        const auto n = static_cast<std::size_t>(m.size());
        if (flat < n) {
            m.data()[flat] = v;
            return;
        }
        flat -= n;
    }
    throw std::out_of_range("ParamStore: flat index out of range");
}

bool ParamStore::same_shapes(const ParamStore& other) const {
    if (count() != other.count()) return false;
    for (int i = 0; i < count(); ++i) {
        if (names_[static_cast<std::size_t>(i)] != other.name(i)) return false;
        if (value(i).rows() != other.value(i).rows() || value(i).cols() != other.value(i).cols())
            return false;
    }
    return true;
}

void CocaNetwork::build_layout() {
    cfg_.validate();
    const int k = cfg_.kernel_size;
    const int h = cfg_.hidden_size;
    const int repre = cfg_.repre_channels();

    init_rules_.clear();
    auto param = [&](const std::string& name, int r, int c, InitRule rule) {
        init_rules_.push_back(rule);
        return params_.add(name, Matrix::Zero(r, c));
    };
    auto buffer = [&](const std::string& name, int r, double fill) {
        return buffers_.add(name, Matrix::Constant(r, 1, fill));
    };

    idx_.blocks.resize(3);
    int cin = cfg_.in_channels;
    for (int i = 0; i < 3; ++i) {
        const int cout = cfg_.conv_channels[static_cast<std::size_t>(i)];
        const std::string base = "enc.b" + std::to_string(i + 1) + ".";
        auto& blk = idx_.blocks[static_cast<std::size_t>(i)];
        blk.w = param(base + "conv.w", cout, cin * k,
                      {InitKind::Normal, std::sqrt(2.0 / (cin * k))});
        blk.b = param(base + "conv.b", cout, 1, {InitKind::Zero, 0.0});
        blk.bn_gamma = param(base + "bn.gamma", cout, 1, {InitKind::One, 0.0});
        blk.bn_beta = param(base + "bn.beta", cout, 1, {InitKind::Zero, 0.0});
        blk.bn_rmean = buffer(base + "bn.rmean", cout, 0.0);
        blk.bn_rvar = buffer(base + "bn.rvar", cout, 1.0);
        cin = cout;
    }

    const double lstm_bound = 1.0 / std::sqrt(static_cast<double>(h));
    auto lstm = [&](const std::string& base, int in_dim) {
        Indices::Lstm l;
        l.w_ih = param(base + ".w_ih", 4 * h, in_dim, {InitKind::Uniform, lstm_bound});
        l.w_hh = param(base + ".w_hh", 4 * h, h, {InitKind::Uniform, lstm_bound});
        l.b = param(base + ".b", 4 * h, 1, {InitKind::Uniform, lstm_bound});
        return l;
    };
    for (int l = 0; l < 3; ++l)
        idx_.enc_layers.push_back(lstm("s2s.enc.l" + std::to_string(l), l == 0 ? repre : h));
    for (int l = 0; l < 3; ++l)
        idx_.dec_layers.push_back(lstm("s2s.dec.l" + std::to_string(l), l == 0 ? repre : h));

    const double fc_bound = 1.0 / std::sqrt(static_cast<double>(h));
    idx_.fc_w = param("s2s.fc.w", repre, h, {InitKind::Uniform, fc_bound});
    idx_.fc_b = param("s2s.fc.b", repre, 1, {InitKind::Uniform, fc_bound});

    const int hid = cfg_.projector_hidden();
    const double p1_bound = 1.0 / std::sqrt(static_cast<double>(repre));
    const double p2_bound = 1.0 / std::sqrt(static_cast<double>(hid));
    idx_.proj1_w = param("proj.fc1.w", hid, repre, {InitKind::Uniform, p1_bound});
    idx_.proj1_b = param("proj.fc1.b", hid, 1, {InitKind::Uniform, p1_bound});
    idx_.proj_bn_gamma = param("proj.bn.gamma", hid, 1, {InitKind::One, 0.0});
    idx_.proj_bn_beta = param("proj.bn.beta", hid, 1, {InitKind::Zero, 0.0});
    idx_.proj_bn_rmean = buffer("proj.bn.rmean", hid, 0.0);
    idx_.proj_bn_rvar = buffer("proj.bn.rvar", hid, 1.0);
    idx_.proj2_w = param("proj.fc2.w", cfg_.project_channels, hid, {InitKind::Uniform, p2_bound});
    idx_.proj2_b = param("proj.fc2.b", cfg_.project_channels, 1, {InitKind::Uniform, p2_bound});
}

void CocaNetwork::init_weights(std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(-1.0, 1.0);
    for (int i = 0; i < params_.count(); ++i) {
        const InitRule rule = init_rules_[static_cast<std::size_t>(i)];
        Matrix& m = params_.value(i);
        switch (rule.kind) {
            case InitKind::Zero: m.setZero(); break;
            case InitKind::One: m.setOnes(); break;
            case InitKind::Normal:
                for (Eigen::Index x = 0; x < m.size(); ++x) m.data()[x] = rule.arg * normal(rng);
                break;
            case InitKind::Uniform:
                for (Eigen::Index x = 0; x < m.size(); ++x) m.data()[x] = rule.arg * uniform(rng);
                break;
        }
    }
}

CocaNetwork::CocaNetwork(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    build_layout();
    init_weights(seed);
}

CocaNetwork::CocaNetwork(ModelConfig cfg, ParamStore params, ParamStore buffers)
    : cfg_(std::move(cfg)) {
    build_layout();
    require(params_.same_shapes(params), "CocaNetwork: parameter store does not match config");
    require(buffers_.same_shapes(buffers), "CocaNetwork: buffer store does not match config");
    params_ = std::move(params);
    buffers_ = std::move(buffers);
}

CocaNetwork::TapeParams CocaNetwork::register_params(ad::Tape& tape) const {
    TapeParams tp;
    tp.vars.reserve(static_cast<std::size_t>(params_.count()));
    for (int i = 0; i < params_.count(); ++i) tp.vars.push_back(tape.input(params_.value(i)));
    return tp;
}

const ad::Im2ColPlan& CocaNetwork::plan_for(int block, int n) {
    const int key = block * 1000003 + n;
    for (std::size_t i = 0; i < conv_plan_n_.size(); ++i)
        if (conv_plan_n_[i] == key) return conv_plans_[i];
    const int cin = block == 0 ? cfg_.in_channels
                               : cfg_.conv_channels[static_cast<std::size_t>(block - 1)];
    const int t_len = cfg_.window_length >> block;
    const int pad_left = (cfg_.kernel_size - 1) / 2;
    conv_plans_.push_back(ad::make_im2col_plan(cin, t_len, n, cfg_.kernel_size, pad_left));
    conv_plan_n_.push_back(key);
    return conv_plans_.back();
}

void CocaNetwork::update_running(int buffer_idx, const Vector& batch_stat) {
    Matrix& buf = buffers_.value(buffer_idx);
    buf.col(0) = (1.0 - kBnMomentum) * buf.col(0) + kBnMomentum * batch_stat;
}

ad::Var CocaNetwork::build_encoder(ad::Tape& tape, const TapeParams& tp, ad::Var x, int n,
                                   Mode mode, Rng* rng, bool update_stats) {
    int t_len = cfg_.window_length;
    ad::Var h = x;
    for (int i = 0; i < 3; ++i) {
        const auto& blk = idx_.blocks[static_cast<std::size_t>(i)];
        ad::Var cols = tape.im2col(h, plan_for(i, n));
        ad::Var conv = tape.add_col(tape.matmul(tp.vars[static_cast<std::size_t>(blk.w)], cols),
                                    tp.vars[static_cast<std::size_t>(blk.b)]);
        ad::Var bn;
        if (mode == Mode::Train) {
            Vector bm, bv;
            bn = tape.batchnorm_train(conv, tp.vars[static_cast<std::size_t>(blk.bn_gamma)],
                                      tp.vars[static_cast<std::size_t>(blk.bn_beta)], kBnEps, &bm,
                                      &bv);
            if (update_stats) {
                update_running(blk.bn_rmean, bm);
                update_running(blk.bn_rvar, bv);
            }
        } else {
            bn = tape.batchnorm_eval(conv, tp.vars[static_cast<std::size_t>(blk.bn_gamma)],
                                     tp.vars[static_cast<std::size_t>(blk.bn_beta)],
                                     buffers_.value(blk.bn_rmean).col(0),
                                     buffers_.value(blk.bn_rvar).col(0), kBnEps);
        }
        h = tape.maxpool_time(tape.relu(bn), n, t_len);
        t_len /= 2;
        if (i == 0 && mode == Mode::Train && cfg_.dropout > 0.0) {
            require(rng != nullptr, "train-mode forward with dropout requires an rng");
            h = tape.dropout(h, cfg_.dropout, *rng);
        }
    }
    return h;
}

void CocaNetwork::lstm_step(ad::Tape& tape, const TapeParams& tp, const Indices::Lstm& layer,
                            ad::Var x, ad::Var& h, ad::Var& c) {
    const int hs = cfg_.hidden_size;
    ad::Var gates = tape.add_col(
        tape.add(tape.matmul(tp.vars[static_cast<std::size_t>(layer.w_ih)], x),
                 tape.matmul(tp.vars[static_cast<std::size_t>(layer.w_hh)], h)),
        tp.vars[static_cast<std::size_t>(layer.b)]);
    ad::Var in_gate = tape.sigmoid(tape.rows(gates, 0, hs));
    ad::Var forget = tape.sigmoid(tape.rows(gates, hs, hs));
    ad::Var cell_in = tape.tanh(tape.rows(gates, 2 * hs, hs));
    ad::Var out_gate = tape.sigmoid(tape.rows(gates, 3 * hs, hs));
    c = tape.add(tape.mul(forget, c), tape.mul(in_gate, cell_in));
    h = tape.mul(out_gate, tape.tanh(c));
}

std::vector<ad::Var> CocaNetwork::build_seq2seq(ad::Tape& tape, const TapeParams& tp,
                                                ad::Var latent, int n, Mode mode, Rng* rng) {
    const int steps = cfg_.latent_steps();
    const int hs = cfg_.hidden_size;
    const int repre = cfg_.repre_channels();
    const bool dropout_on = mode == Mode::Train && cfg_.dropout > 0.0;
    if (dropout_on) require(rng != nullptr, "train-mode forward with dropout requires an rng");

    ad::Var zero_h = tape.constant(Matrix::Zero(hs, n));
    std::vector<ad::Var> h(3, zero_h), c(3, zero_h);
    for (int t = 0; t < steps; ++t) {
        ad::Var inp = tape.time_slice(latent, n, steps, t);
        for (std::size_t l = 0; l < 3; ++l) {
            lstm_step(tape, tp, idx_.enc_layers[l], inp, h[l], c[l]);
            inp = h[l];
            if (l < 2 && dropout_on) inp = tape.dropout(inp, cfg_.dropout, *rng);
        }
    }

    // Decoder starts from the encoder's final states and feeds back its own
    // emissions, zero vector first, emitting in reverse time order.
    std::vector<ad::Var> dh = h, dc = c;
    ad::Var prev = tape.constant(Matrix::Zero(repre, n));
    std::vector<ad::Var> reversed;
    reversed.reserve(static_cast<std::size_t>(steps));
    for (int j = 0; j < steps; ++j) {
        ad::Var inp = prev;
        for (std::size_t l = 0; l < 3; ++l) {
            lstm_step(tape, tp, idx_.dec_layers[l], inp, dh[l], dc[l]);
            inp = dh[l];
            if (l < 2 && dropout_on) inp = tape.dropout(inp, cfg_.dropout, *rng);
        }
        ad::Var y = tape.add_col(tape.matmul(tp.vars[static_cast<std::size_t>(idx_.fc_w)], inp),
                                 tp.vars[static_cast<std::size_t>(idx_.fc_b)]);
        reversed.push_back(y);
        prev = y;
    }
    std::vector<ad::Var> aligned(static_cast<std::size_t>(steps));
    for (int t = 0; t < steps; ++t)
        aligned[static_cast<std::size_t>(t)] = reversed[static_cast<std::size_t>(steps - 1 - t)];
    return aligned;
}

ad::Var CocaNetwork::build_projector(ad::Tape& tape, const TapeParams& tp, ad::Var pooled,
                                     Mode mode, Rng* rng, bool update_stats) {
    (void)rng;
    ad::Var a = tape.add_col(tape.matmul(tp.vars[static_cast<std::size_t>(idx_.proj1_w)], pooled),
                             tp.vars[static_cast<std::size_t>(idx_.proj1_b)]);
    ad::Var bn;
    if (mode == Mode::Train) {
        Vector bm, bv;
        bn = tape.batchnorm_train(a, tp.vars[static_cast<std::size_t>(idx_.proj_bn_gamma)],
                                  tp.vars[static_cast<std::size_t>(idx_.proj_bn_beta)], kBnEps,
                                  &bm, &bv);
        if (update_stats) {
            update_running(idx_.proj_bn_rmean, bm);
            update_running(idx_.proj_bn_rvar, bv);
        }
    } else {
        bn = tape.batchnorm_eval(a, tp.vars[static_cast<std::size_t>(idx_.proj_bn_gamma)],
                                 tp.vars[static_cast<std::size_t>(idx_.proj_bn_beta)],
                                 buffers_.value(idx_.proj_bn_rmean).col(0),
                                 buffers_.value(idx_.proj_bn_rvar).col(0), kBnEps);
    }
    return tape.add_col(
        tape.matmul(tp.vars[static_cast<std::size_t>(idx_.proj2_w)], tape.relu(bn)),
        tp.vars[static_cast<std::size_t>(idx_.proj2_b)]);
}

CocaNetwork::TapeForward CocaNetwork::forward_batch(ad::Tape& tape, const TapeParams& tp,
                                                    const Matrix& x, int n, Mode mode, Rng* rng,
                                                    bool update_stats) {
    require(x.rows() == cfg_.in_channels &&
                x.cols() == static_cast<Eigen::Index>(n) * cfg_.window_length,
            "forward_batch: input must be (in_channels x n*window_length)");
    TapeForward fw;
    ad::Var xv = tape.constant(x);
    fw.latent = build_encoder(tape, tp, xv, n, mode, rng, update_stats);
    fw.rec_steps = build_seq2seq(tape, tp, fw.latent, n, mode, rng);
    ad::Var pooled_q = tape.mean_pool_time(fw.latent, n, cfg_.latent_steps());
    fw.q_raw = build_projector(tape, tp, pooled_q, mode, rng, update_stats);
    ad::Var pooled_qp = ad::mean_vars(tape, fw.rec_steps);
    fw.q_prime_raw = build_projector(tape, tp, pooled_qp, mode, rng, update_stats);
    return fw;
}

ad::Var CocaNetwork::project_view(ad::Tape& tape, const TapeParams& tp, const Matrix& x, int n,
                                  Mode mode, Rng* rng, bool update_stats) {
    require(x.rows() == cfg_.in_channels &&
                x.cols() == static_cast<Eigen::Index>(n) * cfg_.window_length,
            "project_view: input must be (in_channels x n*window_length)");
    ad::Var xv = tape.constant(x);
    ad::Var z = build_encoder(tape, tp, xv, n, mode, rng, update_stats);
    ad::Var pooled = tape.mean_pool_time(z, n, cfg_.latent_steps());
    return build_projector(tape, tp, pooled, mode, rng, update_stats);
}

Matrix CocaNetwork::encode(const Matrix& window, Mode mode, Rng* rng) {
    require(window.rows() == cfg_.window_length && window.cols() == cfg_.in_channels,
            "encode: window must be (window_length x in_channels)");
    ad::Tape tape;
    TapeParams tp = register_params(tape);
    ad::Var x = tape.constant(window.transpose());
    ad::Var z = build_encoder(tape, tp, x, 1, mode, rng, false);
    return tape.value(z).transpose();  // (L x K)
}

Matrix CocaNetwork::reconstruct(const Matrix& latent) {
    require(latent.rows() == cfg_.latent_steps() && latent.cols() == cfg_.repre_channels(),
            "reconstruct: latent must be (latent_steps x repre_channels)");
    ad::Tape tape;
    TapeParams tp = register_params(tape);
    ad::Var z = tape.constant(latent.transpose());
    const std::vector<ad::Var> steps = build_seq2seq(tape, tp, z, 1, Mode::Eval, nullptr);
    Matrix out(cfg_.latent_steps(), cfg_.repre_channels());
    for (int t = 0; t < cfg_.latent_steps(); ++t)
        out.row(t) = tape.value(steps[static_cast<std::size_t>(t)]).col(0).transpose();
    return out;
}

Vector CocaNetwork::project(const Matrix& latent, Mode mode, Rng* rng) {
    require(latent.rows() == cfg_.latent_steps() && latent.cols() == cfg_.repre_channels(),
            "project: latent must be (latent_steps x repre_channels)");
    ad::Tape tape;
    TapeParams tp = register_params(tape);
    ad::Var z = tape.constant(latent.transpose());
    ad::Var pooled = tape.mean_pool_time(z, 1, cfg_.latent_steps());
    ad::Var q = build_projector(tape, tp, pooled, mode, rng, false);
    return tape.value(q).col(0);
}

std::pair<Vector, Vector> CocaNetwork::forward(const Matrix& window, Mode mode, Rng* rng) {
    require(window.rows() == cfg_.window_length && window.cols() == cfg_.in_channels,
            "forward: window must be (window_length x in_channels)");
    const auto [q, qp] = forward_values(window.transpose(), 1, mode, rng);
    return {q.col(0), qp.col(0)};
}

std::pair<Matrix, Matrix> CocaNetwork::forward_values(const Matrix& x, int n, Mode mode,
                                                      Rng* rng) {
    ad::Tape tape;
    TapeParams tp = register_params(tape);
    TapeForward fw = forward_batch(tape, tp, x, n, mode, rng, false);
    return {tape.value(fw.q_raw), tape.value(fw.q_prime_raw)};
}

}  // namespace coca
