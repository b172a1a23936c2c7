#pragma once

#include <Eigen/Dense>
#include <random>
#include <string>
#include <vector>

namespace dualseq::nn {

enum class Activation { Tanh, Sigmoid, Softmax, Relu, Linear };

std::string to_string(Activation kind);
Activation activation_from_string(const std::string& name);

// Elementwise (softmax: vector-wise, max-subtracted). Throws on non-finite input.
Eigen::VectorXd activate(Activation kind, const Eigen::VectorXd& v);

// Reverse-mode through the activation: given y = activate(z) and dL/dy, return dL/dz.
Eigen::VectorXd activate_backward(Activation kind, const Eigen::VectorXd& y,
                                  const Eigen::VectorXd& dy);

struct DenseLayer {
    Eigen::MatrixXd weights;  // out x in
    Eigen::VectorXd bias;     // out
    Activation activation = Activation::Tanh;

    DenseLayer() = default;
    DenseLayer(Eigen::Index out, Eigen::Index in, Activation act)
        : weights(Eigen::MatrixXd::Zero(out, in)),
          bias(Eigen::VectorXd::Zero(out)),
          activation(act) {}

    Eigen::Index in_size() const { return weights.cols(); }
    Eigen::Index out_size() const { return weights.rows(); }
};

Eigen::VectorXd dense_forward(const DenseLayer& layer, const Eigen::VectorXd& x);

struct DenseGrads {
    Eigen::MatrixXd dW;
    Eigen::VectorXd db;
    Eigen::VectorXd dx;
};

DenseGrads dense_backward(const DenseLayer& layer, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& dy);

// Uniform in +-sqrt(6/(fan_in+fan_out)), zero bias.
void init_layer(DenseLayer& layer, std::mt19937_64& rng);

struct DropoutResult {
    Eigen::VectorXd value;
    Eigen::VectorXd mask;  // 1 = kept, 0 = dropped
};

// Inverted dropout: survivors scaled by 1/(1-p_drop). Inference is a passthrough.
DropoutResult dropout_apply(const Eigen::VectorXd& v, double p_drop, std::mt19937_64& rng,
                            bool training);

// Small feed-forward stack; shared by the input-net pretraining and the baselines.
struct Mlp {
    std::vector<DenseLayer> layers;

    Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
    // Activations per layer (inputs first), for backward.
    std::vector<Eigen::VectorXd> forward_trace(const Eigen::VectorXd& x) const;
};

struct MlpGrads {
    std::vector<Eigen::MatrixXd> dW;
    std::vector<Eigen::VectorXd> db;
    Eigen::VectorXd dx;
};

MlpGrads mlp_backward(const Mlp& net, const std::vector<Eigen::VectorXd>& trace,
                      const Eigen::VectorXd& dy);

}  // namespace dualseq::nn
