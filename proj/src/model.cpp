#include "mctscem/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mctscem {

namespace {

double softplus(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

struct ParamLayout {
    int in, h, out;
    int w1_ofs, b1_ofs, w2_ofs, b2_ofs, w3_ofs, b3_ofs, total;

    ParamLayout(int input_dim, int hidden, int output_dim) : in(input_dim), h(hidden), out(output_dim) {
        w1_ofs = 0;
        b1_ofs = w1_ofs + h * in;
        w2_ofs = b1_ofs + h;
        b2_ofs = w2_ofs + h * h;
        w3_ofs = b2_ofs + h;
        b3_ofs = w3_ofs + out * h;
        total = b3_ofs + out;
    }
};

using ConstMatMap = Eigen::Map<const Mat>;
using ConstVecMap = Eigen::Map<const Vec>;
using MatMap = Eigen::Map<Mat>;
using VecMap = Eigen::Map<Vec>;

}  // namespace

// ---------------------------------------------------------------------------
// TransitionModel defaults

void TransitionModel::predict_member_batch(int member, const Mat& states, const Mat& actions,
                                           Mat& mean_out, Mat& var_out) const {
    const Eigen::Index n = states.rows();
    mean_out.resize(n, state_dim());
    var_out.resize(n, state_dim());
    for (Eigen::Index i = 0; i < n; ++i) {
        GaussianPrediction p = predict_member(member, State{states.row(i).transpose()},
                                              Action{actions.row(i).transpose()});
        mean_out.row(i) = p.mean.transpose();
        var_out.row(i) = p.var.transpose();
    }
}

State TransitionModel::predict_mean_next(const State& s, const Action& a) const {
    const int m = num_members();
    Vec acc = Vec::Zero(state_dim());
    for (int i = 0; i < m; ++i) acc += predict_member(i, s, a).mean;
    return State{acc / static_cast<double>(m)};
}

State TransitionModel::predict_sampled_next(const State& s, const Action& a, RngStream& rng) const {
    const int m = rng.uniform_int(num_members());
    GaussianPrediction p = predict_member(m, s, a);
    Vec out(p.mean.size());
    for (Eigen::Index j = 0; j < out.size(); ++j)
        out(j) = rng.normal(p.mean(j), std::sqrt(p.var(j)));
    return State{std::move(out)};
}

Mat TransitionModel::predict_aggregate_samples(const State& s, const Action& a, int n,
                                               RngStream& rng) const {
    std::vector<GaussianPrediction> preds;
    preds.reserve(static_cast<std::size_t>(num_members()));
    for (int m = 0; m < num_members(); ++m) preds.push_back(predict_member(m, s, a));
    return draw_aggregate_samples(preds, n, rng);
}

Mat draw_aggregate_samples(const std::vector<GaussianPrediction>& members, int n, RngStream& rng) {
    if (members.empty() || n < 1) throw std::invalid_argument("draw_aggregate_samples: empty input");
    const Eigen::Index d = members.front().mean.size();
    Mat samples(static_cast<Eigen::Index>(members.size()) * n, d);
    Eigen::Index row = 0;
    for (const GaussianPrediction& p : members) {
        for (int i = 0; i < n; ++i, ++row) {
            for (Eigen::Index j = 0; j < d; ++j)
                samples(row, j) = rng.normal(p.mean(j), std::sqrt(p.var(j)));
        }
    }
    return samples;
}

// ---------------------------------------------------------------------------
// NormalizationStats

NormalizationStats NormalizationStats::fit(const Mat& rows, double eps) {
    NormalizationStats stats;
    stats.mean = rows.colwise().mean();
    const Mat centered = rows.rowwise() - stats.mean.transpose();
    stats.std = (centered.array().square().colwise().mean()).sqrt().transpose().matrix();
    stats.std = stats.std.cwiseMax(eps);
    return stats;
}

Mat NormalizationStats::normalize_rows(const Mat& rows) const {
    return ((rows.rowwise() - mean.transpose()).array().rowwise() / std.transpose().array()).matrix();
}

Mat NormalizationStats::denormalize_rows(const Mat& rows) const {
    return (rows.array().rowwise() * std.transpose().array()).matrix().rowwise() + mean.transpose();
}

// ---------------------------------------------------------------------------
// GaussianMlp

GaussianMlp::GaussianMlp(int input_dim, int target_dim, MlpConfig cfg, RngStream& rng)
    : input_dim_(input_dim), target_dim_(target_dim), cfg_(cfg) {
    const int out = 2 * target_dim + 1;
    const ParamLayout lay(input_dim, cfg.hidden, out);
    params_ = Vec::Zero(lay.total);

    auto glorot = [&rng](MatMap w, int fan_in, int fan_out) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (Eigen::Index i = 0; i < w.size(); ++i)
            w.data()[i] = rng.uniform(-limit, limit);
    };
    glorot(MatMap(params_.data() + lay.w1_ofs, lay.h, lay.in), lay.in, lay.h);
    glorot(MatMap(params_.data() + lay.w2_ofs, lay.h, lay.h), lay.h, lay.h);
    glorot(MatMap(params_.data() + lay.w3_ofs, lay.out, lay.h), lay.h, lay.out);
}

void GaussianMlp::set_flat_params(const Vec& p) {
    if (p.size() != params_.size()) throw std::invalid_argument("set_flat_params: size mismatch");
    params_ = p;
}

GaussianMlp::Output GaussianMlp::forward(const Mat& inputs) const {
    const int d = target_dim_;
    const ParamLayout lay(input_dim_, cfg_.hidden, 2 * d + 1);
    ConstMatMap w1(params_.data() + lay.w1_ofs, lay.h, lay.in);
    ConstVecMap b1(params_.data() + lay.b1_ofs, lay.h);
    ConstMatMap w2(params_.data() + lay.w2_ofs, lay.h, lay.h);
    ConstVecMap b2(params_.data() + lay.b2_ofs, lay.h);
    ConstMatMap w3(params_.data() + lay.w3_ofs, lay.out, lay.h);
    ConstVecMap b3(params_.data() + lay.b3_ofs, lay.out);

    const Mat h1 = ((inputs * w1.transpose()).rowwise() + b1.transpose()).array().tanh().matrix();
    const Mat h2 = ((h1 * w2.transpose()).rowwise() + b2.transpose()).array().tanh().matrix();
    const Mat o = (h2 * w3.transpose()).rowwise() + b3.transpose();

    Output out;
    out.mean = o.leftCols(d);
    out.reward = o.col(2 * d);

    Mat lv = o.middleCols(d, d);
    for (Eigen::Index i = 0; i < lv.rows(); ++i) {
        for (Eigen::Index j = 0; j < lv.cols(); ++j) {
            double v = cfg_.logvar_max - softplus(cfg_.logvar_max - lv(i, j));
            v = cfg_.logvar_min + softplus(v - cfg_.logvar_min);
            lv(i, j) = v;
        }
    }
    out.var = lv.array().exp().matrix();
    return out;
}

double GaussianMlp::loss(const Mat& inputs, const Mat& targets, const Vec& rewards,
                         Vec* grad_out) const {
    const int d = target_dim_;
    const Eigen::Index n = inputs.rows();
    const double inv_n = 1.0 / static_cast<double>(n);
    const ParamLayout lay(input_dim_, cfg_.hidden, 2 * d + 1);
    ConstMatMap w1(params_.data() + lay.w1_ofs, lay.h, lay.in);
    ConstVecMap b1(params_.data() + lay.b1_ofs, lay.h);
    ConstMatMap w2(params_.data() + lay.w2_ofs, lay.h, lay.h);
    ConstVecMap b2(params_.data() + lay.b2_ofs, lay.h);
    ConstMatMap w3(params_.data() + lay.w3_ofs, lay.out, lay.h);
    ConstVecMap b3(params_.data() + lay.b3_ofs, lay.out);

    const Mat h1 = ((inputs * w1.transpose()).rowwise() + b1.transpose()).array().tanh().matrix();
    const Mat h2 = ((h1 * w2.transpose()).rowwise() + b2.transpose()).array().tanh().matrix();
    const Mat o = (h2 * w3.transpose()).rowwise() + b3.transpose();

    const Mat mu = o.leftCols(d);
    const Mat lv_raw = o.middleCols(d, d);
    const Vec rhat = o.col(2 * d);

    Mat lv1(n, d), lv(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            lv1(i, j) = cfg_.logvar_max - softplus(cfg_.logvar_max - lv_raw(i, j));
            lv(i, j) = cfg_.logvar_min + softplus(lv1(i, j) - cfg_.logvar_min);
        }
    }
    const Mat var = lv.array().exp().matrix();
    const Mat err = mu - targets;
    const Vec rerr = rhat - rewards;

    const double nll = 0.5 * ((err.array().square() / var.array()) + lv.array()).sum();
    const double rmse = 0.5 * rerr.array().square().sum();
    const double total = (nll + rmse) * inv_n;

    if (grad_out == nullptr) return total;

    // Backward pass.
    Mat d_o(n, 2 * d + 1);
    d_o.leftCols(d) = ((err.array() / var.array()) * inv_n).matrix();
    Mat d_lv = ((0.5 * (1.0 - err.array().square() / var.array())) * inv_n).matrix();
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            const double s_lower = sigmoid(lv1(i, j) - cfg_.logvar_min);
            const double s_upper = sigmoid(cfg_.logvar_max - lv_raw(i, j));
            d_lv(i, j) *= s_lower * s_upper;
        }
    }
    d_o.middleCols(d, d) = d_lv;
    d_o.col(2 * d) = rerr * inv_n;

    grad_out->resize(lay.total);
    MatMap d_w3(grad_out->data() + lay.w3_ofs, lay.out, lay.h);
    VecMap d_b3(grad_out->data() + lay.b3_ofs, lay.out);
    MatMap d_w2(grad_out->data() + lay.w2_ofs, lay.h, lay.h);
    VecMap d_b2(grad_out->data() + lay.b2_ofs, lay.h);
    MatMap d_w1(grad_out->data() + lay.w1_ofs, lay.h, lay.in);
    VecMap d_b1(grad_out->data() + lay.b1_ofs, lay.h);

    d_w3 = d_o.transpose() * h2;
    d_b3 = d_o.colwise().sum();
    const Mat d_h2 = d_o * w3;
    const Mat d_z2 = (d_h2.array() * (1.0 - h2.array().square())).matrix();
    d_w2 = d_z2.transpose() * h1;
    d_b2 = d_z2.colwise().sum();
    const Mat d_h1 = d_z2 * w2;
    const Mat d_z1 = (d_h1.array() * (1.0 - h1.array().square())).matrix();
    d_w1 = d_z1.transpose() * inputs;
    d_b1 = d_z1.colwise().sum();

    return total;
}

// ---------------------------------------------------------------------------
// EnsembleModel

EnsembleModel::EnsembleModel(int d_s, int d_a, int members, double var_floor, ModelConfig cfg,
                             std::uint64_t init_seed)
    : d_s_(d_s), d_a_(d_a), var_floor_(var_floor), cfg_(cfg), init_seed_(init_seed) {
    if (members < 1) throw std::invalid_argument("ensemble needs at least one member");
    RngStream root(init_seed);
    MlpConfig mlp{cfg.hidden, cfg.logvar_min, cfg.logvar_max};
    members_.reserve(static_cast<std::size_t>(members));
    for (int m = 0; m < members; ++m) {
        RngStream init_rng = root.child(0x1417, static_cast<std::uint64_t>(m));
        members_.emplace_back(d_s + d_a, d_s, mlp, init_rng);
    }
    const int n_params = members_.front().num_params();
    adam_m_.assign(members_.size(), Vec::Zero(n_params));
    adam_v_.assign(members_.size(), Vec::Zero(n_params));
    adam_t_.assign(members_.size(), 0);
}

Mat EnsembleModel::build_input(const Mat& states, const Mat& actions) const {
    Mat x(states.rows(), d_s_ + d_a_);
    x.leftCols(d_s_) = state_norm_.normalize_rows(states);
    x.rightCols(d_a_) = action_norm_.normalize_rows(actions);
    return x;
}

GaussianPrediction EnsembleModel::predict_member(int member, const State& s, const Action& a) const {
    require_trained();
    Mat mean, var;
    EnsembleModel::predict_member_batch(member, s.values.transpose(), a.values.transpose(), mean, var);
    return GaussianPrediction{mean.row(0).transpose(), var.row(0).transpose()};
}

void EnsembleModel::predict_member_batch(int member, const Mat& states, const Mat& actions,
                                         Mat& mean_out, Mat& var_out) const {
    require_trained();
    const GaussianMlp& net = members_.at(static_cast<std::size_t>(member));
    const GaussianMlp::Output out = net.forward(build_input(states, actions));
    mean_out = states + delta_norm_.denormalize_rows(out.mean);
    var_out = (out.var.array().rowwise() * delta_norm_.std.transpose().array().square())
                  .max(var_floor_)
                  .matrix();
}

double EnsembleModel::predict_reward_mean(const State& s, const Action& a) const {
    return predict_reward_mean_batch(s.values.transpose(), a.values.transpose())(0);
}

Vec EnsembleModel::predict_reward_mean_batch(const Mat& states, const Mat& actions) const {
    require_trained();
    const Mat x = build_input(states, actions);
    Vec acc = Vec::Zero(states.rows());
    for (const GaussianMlp& net : members_) acc += net.forward(x).reward;
    acc /= static_cast<double>(members_.size());
    return ((acc * reward_norm_.std(0)).array() + reward_norm_.mean(0)).matrix();
}

std::vector<std::vector<double>> EnsembleModel::train(const ReplayBuffer& buffer, int epochs,
                                                      RngStream rng) {
    if (buffer.empty()) throw std::invalid_argument("train: empty replay buffer");
    if (epochs <= 0) return {};

    const Eigen::Index n = static_cast<Eigen::Index>(buffer.size());
    Mat states(n, d_s_), actions(n, d_a_), deltas(n, d_s_);
    Mat rewards(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Transition& tr = buffer[static_cast<std::size_t>(i)];
        states.row(i) = tr.state.values.transpose();
        actions.row(i) = tr.action.values.transpose();
        deltas.row(i) = (tr.next_state.values - tr.state.values).transpose();
        rewards(i, 0) = tr.reward;
    }
    state_norm_ = NormalizationStats::fit(states);
    action_norm_ = NormalizationStats::fit(actions);
    delta_norm_ = NormalizationStats::fit(deltas);
    reward_norm_ = NormalizationStats::fit(rewards);

    Mat x(n, d_s_ + d_a_);
    x.leftCols(d_s_) = state_norm_.normalize_rows(states);
    x.rightCols(d_a_) = action_norm_.normalize_rows(actions);
    const Mat y = delta_norm_.normalize_rows(deltas);
    const Vec r = ((rewards.col(0).array() - reward_norm_.mean(0)) / reward_norm_.std(0)).matrix();

    const int n_members = num_members();
    std::vector<std::vector<double>> traces(static_cast<std::size_t>(n_members));

    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kAdamEps = 1e-8;

#pragma omp parallel for schedule(static)
    for (int m = 0; m < n_members; ++m) {
        RngStream member_rng = rng.child(0xB007, static_cast<std::uint64_t>(m));
        GaussianMlp& net = members_[static_cast<std::size_t>(m)];
        Vec& adam_m = adam_m_[static_cast<std::size_t>(m)];
        Vec& adam_v = adam_v_[static_cast<std::size_t>(m)];

        // Bootstrap resample of the full buffer.
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
        for (auto& i : idx) i = static_cast<Eigen::Index>(member_rng.uniform_int(static_cast<int>(n)));

        Vec grad(net.num_params());
        std::vector<double>& trace = traces[static_cast<std::size_t>(m)];
        trace.reserve(static_cast<std::size_t>(epochs));

        for (int epoch = 0; epoch < epochs; ++epoch) {
            // Fisher-Yates reshuffle of the bootstrap sample.
            for (std::size_t i = idx.size(); i > 1; --i) {
                const std::size_t j = static_cast<std::size_t>(member_rng.uniform_int(static_cast<int>(i)));
                std::swap(idx[i - 1], idx[j]);
            }

            double loss_sum = 0.0;
            for (Eigen::Index start = 0; start < n; start += cfg_.batch_size) {
                const Eigen::Index rows = std::min<Eigen::Index>(cfg_.batch_size, n - start);
                Mat xb(rows, x.cols());
                Mat yb(rows, y.cols());
                Vec rb(rows);
                for (Eigen::Index i = 0; i < rows; ++i) {
                    const Eigen::Index src = idx[static_cast<std::size_t>(start + i)];
                    xb.row(i) = x.row(src);
                    yb.row(i) = y.row(src);
                    rb(i) = r(src);
                }
                const double batch_loss = net.loss(xb, yb, rb, &grad);
                loss_sum += batch_loss * static_cast<double>(rows);

                ++adam_t_[static_cast<std::size_t>(m)];
                const double t = static_cast<double>(adam_t_[static_cast<std::size_t>(m)]);
                adam_m = kBeta1 * adam_m + (1.0 - kBeta1) * grad;
                adam_v = (kBeta2 * adam_v.array() + (1.0 - kBeta2) * grad.array().square()).matrix();
                const double bc1 = 1.0 - std::pow(kBeta1, t);
                const double bc2 = 1.0 - std::pow(kBeta2, t);
                Vec step = ((adam_m / bc1).array() /
                            ((adam_v / bc2).array().sqrt() + kAdamEps))
                               .matrix();
                net.params_ -= cfg_.learning_rate * step;
            }
            trace.push_back(loss_sum / static_cast<double>(n));
        }
    }

    trained_ = true;
    return traces;
}

// ---------------------------------------------------------------------------
// Checkpoint serialization (text, hexfloat, bit-exact round trip)

namespace {

void write_doubles(std::ostream& os, const double* data, Eigen::Index count) {
    char buf[64];
    for (Eigen::Index i = 0; i < count; ++i) {
        std::snprintf(buf, sizeof(buf), "%a", data[i]);
        os << buf << (((i + 1) % 8 == 0) ? '\n' : ' ');
    }
    if (count % 8 != 0) os << '\n';
}

Vec read_doubles(std::istream& is, Eigen::Index count) {
    Vec out(count);
    std::string tok;
    for (Eigen::Index i = 0; i < count; ++i) {
        if (!(is >> tok)) throw std::runtime_error("checkpoint: truncated file");
        out(i) = std::strtod(tok.c_str(), nullptr);
    }
    return out;
}

void write_stats(std::ostream& os, const NormalizationStats& st) {
    os << st.mean.size() << '\n';
    write_doubles(os, st.mean.data(), st.mean.size());
    write_doubles(os, st.std.data(), st.std.size());
}

NormalizationStats read_stats(std::istream& is) {
    Eigen::Index d = 0;
    if (!(is >> d)) throw std::runtime_error("checkpoint: truncated stats");
    NormalizationStats st;
    st.mean = read_doubles(is, d);
    st.std = read_doubles(is, d);
    return st;
}

}  // namespace

void EnsembleModel::save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    os << "mctscem-ensemble v1\n";
    os << d_s_ << ' ' << d_a_ << ' ' << num_members() << ' ' << cfg_.hidden << '\n';
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%a %a %a %a", cfg_.logvar_min, cfg_.logvar_max, var_floor_,
                  cfg_.learning_rate);
    os << buf << '\n';
    os << cfg_.epochs << ' ' << cfg_.batch_size << ' ' << cfg_.buffer_capacity << '\n';
    os << init_seed_ << ' ' << (trained_ ? 1 : 0) << '\n';
    if (trained_) {
        write_stats(os, state_norm_);
        write_stats(os, action_norm_);
        write_stats(os, delta_norm_);
        write_stats(os, reward_norm_);
    }
    for (const GaussianMlp& net : members_) {
        os << net.num_params() << '\n';
        write_doubles(os, net.flat_params().data(), net.flat_params().size());
    }
    if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

EnsembleModel EnsembleModel::load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    std::string magic, version;
    is >> magic >> version;
    if (magic != "mctscem-ensemble" || version != "v1")
        throw std::runtime_error("checkpoint: unrecognized format in " + path);

    int d_s = 0, d_a = 0, members = 0;
    ModelConfig cfg;
    is >> d_s >> d_a >> members >> cfg.hidden;
    std::string tok;
    is >> tok; cfg.logvar_min = std::strtod(tok.c_str(), nullptr);
    is >> tok; cfg.logvar_max = std::strtod(tok.c_str(), nullptr);
    is >> tok; const double var_floor = std::strtod(tok.c_str(), nullptr);
    is >> tok; cfg.learning_rate = std::strtod(tok.c_str(), nullptr);
    is >> cfg.epochs >> cfg.batch_size >> cfg.buffer_capacity;
    std::uint64_t seed = 0;
    int trained_flag = 0;
    is >> seed >> trained_flag;
    if (!is) throw std::runtime_error("checkpoint: truncated header in " + path);

    EnsembleModel model(d_s, d_a, members, var_floor, cfg, seed);
    if (trained_flag != 0) {
        model.state_norm_ = read_stats(is);
        model.action_norm_ = read_stats(is);
        model.delta_norm_ = read_stats(is);
        model.reward_norm_ = read_stats(is);
        model.trained_ = true;
    }
    for (GaussianMlp& net : model.members_) {
        Eigen::Index n_params = 0;
        if (!(is >> n_params) || n_params != net.num_params())
            throw std::runtime_error("checkpoint: parameter count mismatch in " + path);
        net.params_ = read_doubles(is, n_params);
    }
    return model;
}

// ---------------------------------------------------------------------------
// RewardSource

Vec RewardSource::batch(const Mat& states, const Mat& actions) const {
    Vec out(states.rows());
    for (Eigen::Index i = 0; i < states.rows(); ++i)
        out(i) = (*this)(State{states.row(i).transpose()}, Action{actions.row(i).transpose()});
    return out;
}

}  // namespace mctscem
