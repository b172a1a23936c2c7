#include "dualseq/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dualseq/errors.hpp"
#include "dualseq/rng.hpp"

namespace dualseq::baselines {

namespace {

constexpr double kClipLo = 1e-7;
constexpr double kClipHi = 1.0 - 1e-7;

}  // namespace

std::vector<Eigen::VectorXd> stack_features(const data::PatientRecord& record, int k_p,
                                            double age_mean, double age_std) {
    std::vector<Eigen::VectorXd> out;
    out.reserve(record.visits.size());
    for (const auto& visit : record.visits) {
        const auto j = data::most_recent_answer_index(record.answers, visit.t);
        Eigen::VectorXd x_p = Eigen::VectorXd::Zero(k_p);
        if (j) x_p = record.answers[*j].x;
        Eigen::VectorXd v(visit.x.size() + k_p + 2);
        v << visit.x, x_p, static_cast<double>(record.static_info.sex),
            (record.static_info.age - age_mean) / age_std;
        out.push_back(std::move(v));
    }
    return out;
}

double mlp_logistic_loss(const nn::Mlp& net, const std::vector<LabeledVector>& pairs, double l2,
                         std::vector<Eigen::MatrixXd>* dW, std::vector<Eigen::VectorXd>* db) {
    if (pairs.empty()) throw std::invalid_argument("mlp_logistic_loss: empty pairs");
    const double inv_n = 1.0 / static_cast<double>(pairs.size());
    if (dW) {
        dW->resize(net.layers.size());
        db->resize(net.layers.size());
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            (*dW)[l] = Eigen::MatrixXd::Zero(net.layers[l].weights.rows(),
                                             net.layers[l].weights.cols());
            (*db)[l] = Eigen::VectorXd::Zero(net.layers[l].bias.size());
        }
    }
    double value = 0.0;
    for (const auto& pair : pairs) {
        const auto trace = net.forward_trace(pair.x);
        const double raw = trace.back()[0];
        const double p = std::clamp(raw, kClipLo, kClipHi);
        value -= inv_n * (pair.y * std::log(p) + (1.0 - pair.y) * std::log(1.0 - p));
        if (dW) {
            Eigen::VectorXd dy(1);
            dy << (raw > kClipLo && raw < kClipHi
                       ? -inv_n * (pair.y / p - (1.0 - pair.y) / (1.0 - p))
                       : 0.0);
            auto g = nn::mlp_backward(net, trace, dy);
            for (std::size_t l = 0; l < net.layers.size(); ++l) {
                (*dW)[l] += g.dW[l];
                (*db)[l] += g.db[l];
            }
        }
    }
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        value += l2 * net.layers[l].weights.squaredNorm();
        if (dW) (*dW)[l] += 2.0 * l2 * net.layers[l].weights;
    }
    return value;
}

nn::Mlp logreg_train(const std::vector<LabeledVector>& pairs, double l2, double lr, int epochs,
                     std::uint64_t seed) {
    if (pairs.empty()) throw std::invalid_argument("logreg_train: empty pairs");
    const Eigen::Index width = pairs.front().x.size();
    for (int attempt = 0; attempt < 4; ++attempt, lr *= 0.5) {
        nn::Mlp net;
        net.layers = {nn::DenseLayer(1, width, nn::Activation::Sigmoid)};
        auto gen = rng::substream(seed, "logreg_init");
        nn::init_layer(net.layers[0], gen);
        bool diverged = false;
        for (int epoch = 0; epoch < epochs && !diverged; ++epoch) {
            std::vector<Eigen::MatrixXd> dW;
            std::vector<Eigen::VectorXd> db;
            const double value = mlp_logistic_loss(net, pairs, l2, &dW, &db);
            if (!std::isfinite(value)) {
                diverged = true;
                break;
            }
            net.layers[0].weights -= lr * dW[0];
            net.layers[0].bias -= lr * db[0];
        }
        if (!diverged) return net;
    }
    throw numeric_error("logreg_train: diverged after learning-rate retries");
}

double logreg_predict(const nn::Mlp& weights, const Eigen::VectorXd& x) {
    return weights.forward(x)[0];
}

nn::Mlp ffnn_train(const std::vector<LabeledVector>& pairs, const FfnnConfig& cfg) {
    if (pairs.empty()) throw std::invalid_argument("ffnn_train: empty pairs");
    const Eigen::Index width = pairs.front().x.size();
    nn::Mlp net;
    net.layers = {nn::DenseLayer(cfg.hidden1, width, nn::Activation::Tanh),
                  nn::DenseLayer(cfg.hidden2, cfg.hidden1, nn::Activation::Tanh),
                  nn::DenseLayer(1, cfg.hidden2, nn::Activation::Sigmoid)};
    auto gen_init = rng::substream(cfg.seed, "ffnn_init");
    for (auto& layer : net.layers) nn::init_layer(layer, gen_init);

    auto gen_shuffle = rng::substream(cfg.seed, "ffnn_shuffle");
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), gen_shuffle);
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(start + static_cast<std::size_t>(cfg.batch_size), order.size());
            std::vector<LabeledVector> batch;
            batch.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) batch.push_back(pairs[order[i]]);
            std::vector<Eigen::MatrixXd> dW;
            std::vector<Eigen::VectorXd> db;
            const double value = mlp_logistic_loss(net, batch, cfg.l2, &dW, &db);
            if (!std::isfinite(value)) throw numeric_error("ffnn_train: diverged");
            for (std::size_t l = 0; l < net.layers.size(); ++l) {
                net.layers[l].weights -= cfg.lr * dW[l];
                net.layers[l].bias -= cfg.lr * db[l];
            }
        }
    }
    return net;
}

double ffnn_predict(const nn::Mlp& net, const Eigen::VectorXd& x) { return net.forward(x)[0]; }

}  // namespace dualseq::baselines
