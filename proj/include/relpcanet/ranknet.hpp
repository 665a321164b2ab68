#ifndef RELPCANET_RANKNET_HPP
#define RELPCANET_RANKNET_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "relpcanet/errors.hpp"
#include "relpcanet/matrix.hpp"
#include "relpcanet/random.hpp"
#include "relpcanet/relarm.hpp"
#include "relpcanet/target.hpp"

namespace relpcanet::ranknet {

struct RpropConfig {
    double eta_plus = 1.2;
    double eta_minus = 0.5;
    double delta0 = 0.1;
    double delta_min = 1e-6;
    double delta_max = 50.0;
};

struct NetworkConfig {
    std::size_t input_dim = 1;
    std::vector<std::size_t> hidden_layers{10, 10, 10};  // ranking layer appended implicitly
    std::uint64_t seed = 0;
    std::size_t epochs = 500;
    double loss_tolerance = 1e-7;
    RpropConfig rprop;

    void check() const {
        if (input_dim < 1) throw Error(ErrorKind::InvalidInput, "input_dim must be >= 1");
        for (std::size_t w : hidden_layers)
            if (w < 1) throw Error(ErrorKind::InvalidInput, "hidden layer widths must be >= 1");
        if (epochs < 1) throw Error(ErrorKind::InvalidInput, "epochs must be >= 1");
    }
};

// Shared-parameter scorer: hidden layers apply affine + log-sigmoid, the
// final ranking layer is affine to a scalar.
struct RankModel {
    std::vector<Matrix> weights;              // layer l: out x in
    std::vector<std::vector<double>> biases;  // layer l: out

    std::size_t input_dim() const { return weights.front().cols(); }
    std::size_t layer_count() const { return weights.size(); }
};

// Gradient (or step-size/previous-gradient) storage with the same shapes as
// the model parameters.
struct ParamGrads {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;

    static ParamGrads zeros_like(const RankModel& m) {
        ParamGrads g;
        for (const auto& w : m.weights) g.weights.emplace_back(w.rows(), w.cols(), 0.0);
        for (const auto& b : m.biases) g.biases.emplace_back(b.size(), 0.0);
        return g;
    }

    static ParamGrads filled_like(const RankModel& m, double v) {
        ParamGrads g = zeros_like(m);
        for (auto& w : g.weights) std::fill(w.data().begin(), w.data().end(), v);
        for (auto& b : g.biases) std::fill(b.begin(), b.end(), v);
        return g;
    }
};

struct PairTarget {
    std::size_t i;
    std::size_t j;
    double t;  // target probability that i outranks j
};

using PairBatch = std::vector<PairTarget>;

// All i<j pairs of a validated target matrix; the diagonal never trains.
inline PairBatch make_pair_batch(const target::TargetMatrix& tm) {
    PairBatch batch;
    const std::size_t m = tm.t.rows();
    batch.reserve(m * (m - 1) / 2);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j) batch.push_back({i, j, tm.t(i, j)});
    return batch;
}

inline double log_sigmoid_transfer(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Uniform [-1/sqrt(fan_in), +1/sqrt(fan_in)] weights, zero biases,
// deterministic per seed (draw order: layer by layer, row-major).
inline RankModel init_model(const NetworkConfig& cfg) {
    cfg.check();
    RandomSource rng(cfg.seed);
    std::vector<std::size_t> widths{cfg.input_dim};
    widths.insert(widths.end(), cfg.hidden_layers.begin(), cfg.hidden_layers.end());
    widths.push_back(1);  // ranking layer

    RankModel m;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const std::size_t in = widths[l], out = widths[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        Matrix w(out, in);
        for (std::size_t r = 0; r < out; ++r)
            for (std::size_t c = 0; c < in; ++c) w(r, c) = rng.next_double(-bound, bound);
        m.weights.push_back(std::move(w));
        m.biases.emplace_back(out, 0.0);
    }
    return m;
}

namespace detail {

// Activations per layer for one input; activations[0] is the input itself,
// the last entry is the scalar rank value.
inline std::vector<std::vector<double>> forward(const RankModel& m, std::span<const double> a) {
    std::vector<std::vector<double>> acts;
    acts.reserve(m.layer_count() + 1);
    acts.emplace_back(a.begin(), a.end());
    for (std::size_t l = 0; l < m.layer_count(); ++l) {
        const Matrix& w = m.weights[l];
        const std::vector<double>& prev = acts.back();
        std::vector<double> cur(w.rows());
        for (std::size_t r = 0; r < w.rows(); ++r) {
            double z = m.biases[l][r];
            for (std::size_t c = 0; c < w.cols(); ++c) z += w(r, c) * prev[c];
            cur[r] = (l + 1 == m.layer_count()) ? z : log_sigmoid_transfer(z);
        }
        acts.push_back(std::move(cur));
    }
    return acts;
}

// Backpropagate a scalar output gradient through one branch, accumulating
// into shared-parameter gradients.
inline void backward(const RankModel& m, const std::vector<std::vector<double>>& acts,
                     double out_grad, ParamGrads& g) {
    std::vector<double> delta{out_grad};
    for (std::size_t l = m.layer_count(); l-- > 0;) {
        const Matrix& w = m.weights[l];
        const std::vector<double>& below = acts[l];
        for (std::size_t r = 0; r < w.rows(); ++r) {
            g.biases[l][r] += delta[r];
            for (std::size_t c = 0; c < w.cols(); ++c) g.weights[l](r, c) += delta[r] * below[c];
        }
        if (l == 0) break;
        std::vector<double> next(w.cols(), 0.0);
        for (std::size_t c = 0; c < w.cols(); ++c) {
            double s = 0.0;
            for (std::size_t r = 0; r < w.rows(); ++r) s += w(r, c) * delta[r];
            next[c] = s * below[c] * (1.0 - below[c]);  // log-sigmoid derivative
        }
        delta = std::move(next);
    }
}

}  // namespace detail

inline double score(const RankModel& m, std::span<const double> a) {
    if (a.size() != m.input_dim())
        throw Error(ErrorKind::InvalidInput, "feature length " + std::to_string(a.size()) +
                                                 " does not match input_dim " +
                                                 std::to_string(m.input_dim()));
    return detail::forward(m, a).back()[0];
}

// Posterior probability that i outranks j given their rank values.
inline double pair_probability(double rank_i, double rank_j) {
    return 1.0 / (1.0 + std::exp(-(rank_i - rank_j)));
}

// Cross-entropy pair loss with probability clamped away from the log poles.
inline double pair_loss(double t_ij, double p_ij) {
    constexpr double eps = 1e-12;
    const double p = std::clamp(p_ij, eps, 1.0 - eps);
    return -t_ij * std::log(p) - (1.0 - t_ij) * std::log(1.0 - p);
}

namespace detail {

struct BatchEval {
    double mean_loss = 0.0;
    ParamGrads grads;
};

// Mean pair loss and its exact gradient. Each entity's activations are
// computed once; output gradients from all pairs containing the entity are
// summed before the single backward pass (shared siamese parameters make the
// gradient linear in the output coefficient).
inline BatchEval evaluate_batch(const RankModel& m, const PairBatch& batch, const Matrix& features) {
    if (batch.empty()) throw Error(ErrorKind::InvalidInput, "empty pair batch");
    const std::size_t mrows = features.rows();
    std::vector<std::vector<std::vector<double>>> acts(mrows);
    std::vector<double> ranks(mrows, 0.0);
    std::vector<double> coef(mrows, 0.0);
    std::vector<bool> used(mrows, false);
    for (const auto& p : batch) used[p.i] = used[p.j] = true;
    for (std::size_t i = 0; i < mrows; ++i)
        if (used[i]) {
            acts[i] = forward(m, features.row(i));
            ranks[i] = acts[i].back()[0];
        }

    BatchEval ev;
    ev.grads = ParamGrads::zeros_like(m);
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (const auto& p : batch) {
        const double pij = pair_probability(ranks[p.i], ranks[p.j]);
        ev.mean_loss += pair_loss(p.t, pij) * inv;
        const double g = (pij - p.t) * inv;  // d(mean CE)/d(rank_i - rank_j)
        coef[p.i] += g;
        coef[p.j] -= g;
    }
    for (std::size_t i = 0; i < mrows; ++i)
        if (used[i] && coef[i] != 0.0) backward(m, acts[i], coef[i], ev.grads);
    return ev;
}

}  // namespace detail

// Exact analytic gradient of the mean pair loss over the batch.
inline ParamGrads gradients(const RankModel& m, const PairBatch& batch,
                            const relarm::FeatureSet& features) {
    if (features.vectors.cols() != m.input_dim())
        throw Error(ErrorKind::InvalidInput, "feature width does not match input_dim");
    return detail::evaluate_batch(m, batch, features.vectors).grads;
}

struct TrainResult {
    RankModel model;
    std::vector<double> loss_history;  // mean pair loss per epoch, plus the final state
};

// Full-batch iRprop-: step sizes adapt on gradient sign agreement; a sign
// flip shrinks the step and skips that parameter's update for the epoch.
inline TrainResult train(RankModel m, const relarm::FeatureSet& features,
                         const target::TargetMatrix& targets, const NetworkConfig& cfg) {
    cfg.check();
    if (!target::validate(targets).empty())
        throw Error(ErrorKind::InvalidInput, "target matrix fails validation");
    if (features.entity_ids != targets.entity_ids)
        throw Error(ErrorKind::InvalidInput, "feature ids do not align with target ids");
    if (features.vectors.cols() != m.input_dim())
        throw Error(ErrorKind::InvalidInput, "feature width does not match input_dim");

    const PairBatch batch = make_pair_batch(targets);
    ParamGrads step = ParamGrads::filled_like(m, cfg.rprop.delta0);
    ParamGrads prev = ParamGrads::zeros_like(m);

    TrainResult out;
    auto update = [&](double& w, double g, double& pg, double& delta) {
        const double s = pg * g;
        if (s > 0.0) {
            delta = std::min(delta * cfg.rprop.eta_plus, cfg.rprop.delta_max);
            w -= (g > 0.0 ? delta : -delta);
            pg = g;
        } else if (s < 0.0) {
            delta = std::max(delta * cfg.rprop.eta_minus, cfg.rprop.delta_min);
            pg = 0.0;  // iRprop-: revoke the sign, skip this update
        } else {
            if (g != 0.0) w -= (g > 0.0 ? delta : -delta);
            pg = g;
        }
    };

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        detail::BatchEval ev = detail::evaluate_batch(m, batch, features.vectors);
        out.loss_history.push_back(ev.mean_loss);
        if (epoch > 0 &&
            std::abs(out.loss_history[epoch] - out.loss_history[epoch - 1]) < cfg.loss_tolerance)
            break;
        for (std::size_t l = 0; l < m.layer_count(); ++l) {
            auto& w = m.weights[l].data();
            const auto& gw = ev.grads.weights[l].data();
            auto& pw = prev.weights[l].data();
            auto& dw = step.weights[l].data();
            for (std::size_t idx = 0; idx < w.size(); ++idx) update(w[idx], gw[idx], pw[idx], dw[idx]);
            for (std::size_t idx = 0; idx < m.biases[l].size(); ++idx)
                update(m.biases[l][idx], ev.grads.biases[l][idx], prev.biases[l][idx],
                       step.biases[l][idx]);
        }
    }
    // loss of the final parameters
    out.loss_history.push_back(detail::evaluate_batch(m, batch, features.vectors).mean_loss);
    out.model = std::move(m);
    return out;
}

inline std::vector<double> score_all(const RankModel& m, const relarm::FeatureSet& features) {
    std::vector<double> out(features.vectors.rows());
    for (std::size_t i = 0; i < features.vectors.rows(); ++i)
        out[i] = score(m, features.vectors.row(i));
    return out;
}

// Versioned JSON checkpoint; doubles survive the round trip bit-exactly.
inline void save_model(const RankModel& m, const NetworkConfig& cfg, const std::string& path) {
    nlohmann::json j;
    j["version"] = 1;
    j["config"] = {{"input_dim", cfg.input_dim},
                   {"hidden_layers", cfg.hidden_layers},
                   {"seed", cfg.seed},
                   {"epochs", cfg.epochs},
                   {"loss_tolerance", cfg.loss_tolerance}};
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t l = 0; l < m.layer_count(); ++l) {
        nlohmann::json layer;
        layer["rows"] = m.weights[l].rows();
        layer["cols"] = m.weights[l].cols();
        layer["weights"] = m.weights[l].data();
        layer["biases"] = m.biases[l];
        layers.push_back(std::move(layer));
    }
    j["layers"] = std::move(layers);
    std::ofstream os(path);
    if (!os) throw Error(ErrorKind::Io, "cannot open '" + path + "' for writing");
    os << j.dump(2) << "\n";
    if (!os) throw Error(ErrorKind::Io, "write failed for '" + path + "'");
}

inline std::pair<RankModel, NetworkConfig> load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open model file '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ParseError, "model '" + path + "': " + e.what());
    }
    if (j.value("version", 0) != 1)
        throw Error(ErrorKind::ParseError, "model '" + path + "': unsupported version");
    NetworkConfig cfg;
    const auto& jc = j.at("config");
    cfg.input_dim = jc.at("input_dim").get<std::size_t>();
    cfg.hidden_layers = jc.at("hidden_layers").get<std::vector<std::size_t>>();
    cfg.seed = jc.at("seed").get<std::uint64_t>();
    cfg.epochs = jc.at("epochs").get<std::size_t>();
    cfg.loss_tolerance = jc.at("loss_tolerance").get<double>();

    RankModel m;
    for (const auto& layer : j.at("layers")) {
        const std::size_t rows = layer.at("rows").get<std::size_t>();
        const std::size_t cols = layer.at("cols").get<std::size_t>();
        Matrix w(rows, cols);
        w.data() = layer.at("weights").get<std::vector<double>>();
        if (w.data().size() != rows * cols)
            throw Error(ErrorKind::ParseError, "model '" + path + "': weight size mismatch");
        m.weights.push_back(std::move(w));
        m.biases.push_back(layer.at("biases").get<std::vector<double>>());
        if (m.biases.back().size() != rows)
            throw Error(ErrorKind::ParseError, "model '" + path + "': bias size mismatch");
    }
    if (m.weights.empty() || m.weights.back().rows() != 1)
        throw Error(ErrorKind::ParseError, "model '" + path + "': missing ranking layer");
    return {std::move(m), std::move(cfg)};
}

}  // namespace relpcanet::ranknet

#endif  // RELPCANET_RANKNET_HPP
