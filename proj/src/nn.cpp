#include "dualseq/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace dualseq::nn {

std::string to_string(Activation kind) {
    switch (kind) {
        case Activation::Tanh: return "tanh";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Softmax: return "softmax";
        case Activation::Relu: return "relu";
        case Activation::Linear: return "linear";
    }
    throw std::logic_error("unknown activation tag");
}

Activation activation_from_string(const std::string& name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "sigmoid") return Activation::Sigmoid;
    if (name == "softmax") return Activation::Softmax;
    if (name == "relu") return Activation::Relu;
    if (name == "linear") return Activation::Linear;
    throw std::invalid_argument("unknown activation: " + name);
}

Eigen::VectorXd activate(Activation kind, const Eigen::VectorXd& v) {
    if (!v.allFinite()) throw std::invalid_argument("activate: non-finite input");
    switch (kind) {
        case Activation::Tanh:
            return v.array().tanh();
        case Activation::Sigmoid:
            return (1.0 / (1.0 + (-v.array()).exp()));
        case Activation::Softmax: {
            const double m = v.maxCoeff();
            Eigen::VectorXd e = (v.array() - m).exp();
            return e / e.sum();
        }
        case Activation::Relu:
            return v.cwiseMax(0.0);
        case Activation::Linear:
            return v;
    }
    throw std::logic_error("unknown activation tag");
}

Eigen::VectorXd activate_backward(Activation kind, const Eigen::VectorXd& y,
                                  const Eigen::VectorXd& dy) {
    switch (kind) {
        case Activation::Tanh:
            return dy.array() * (1.0 - y.array().square());
        case Activation::Sigmoid:
            return dy.array() * y.array() * (1.0 - y.array());
        case Activation::Softmax: {
            const double dot = y.dot(dy);
            return y.array() * (dy.array() - dot);
        }
        case Activation::Relu:
            return (y.array() > 0.0).select(dy, 0.0);
        case Activation::Linear:
            return dy;
    }
    throw std::logic_error("unknown activation tag");
}

Eigen::VectorXd dense_forward(const DenseLayer& layer, const Eigen::VectorXd& x) {
    if (x.size() != layer.in_size())
        throw std::invalid_argument("dense_forward: input width " + std::to_string(x.size()) +
                                    " != layer width " + std::to_string(layer.in_size()));
    return activate(layer.activation, layer.weights * x + layer.bias);
}

DenseGrads dense_backward(const DenseLayer& layer, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& dy) {
    if (x.size() != layer.in_size())
        throw std::invalid_argument("dense_backward: input width mismatch");
    if (dy.size() != layer.out_size())
        throw std::invalid_argument("dense_backward: upstream width mismatch");
    const Eigen::VectorXd y = dense_forward(layer, x);
    const Eigen::VectorXd dz = activate_backward(layer.activation, y, dy);
    DenseGrads g;
    g.dW = dz * x.transpose();
    g.db = dz;
    g.dx = layer.weights.transpose() * dz;
    return g;
}

void init_layer(DenseLayer& layer, std::mt19937_64& rng) {
    const double bound =
        std::sqrt(6.0 / static_cast<double>(layer.in_size() + layer.out_size()));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index j = 0; j < layer.weights.cols(); ++j)
        for (Eigen::Index i = 0; i < layer.weights.rows(); ++i) layer.weights(i, j) = u(rng);
    layer.bias.setZero();
}

DropoutResult dropout_apply(const Eigen::VectorXd& v, double p_drop, std::mt19937_64& rng,
                            bool training) {
    if (p_drop < 0.0 || p_drop >= 1.0)
        throw std::invalid_argument("dropout_apply: p_drop must be in [0,1)");
    DropoutResult r;
    r.mask = Eigen::VectorXd::Ones(v.size());
    if (!training || p_drop == 0.0) {
        r.value = v;
        return r;
    }
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (u(rng) < p_drop) r.mask[i] = 0.0;
    r.value = (v.array() * r.mask.array()) / (1.0 - p_drop);
    return r;
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
    Eigen::VectorXd h = x;
    for (const auto& layer : layers) h = dense_forward(layer, h);
    return h;
}

std::vector<Eigen::VectorXd> Mlp::forward_trace(const Eigen::VectorXd& x) const {
    std::vector<Eigen::VectorXd> trace;
    trace.reserve(layers.size() + 1);
    trace.push_back(x);
    for (const auto& layer : layers) trace.push_back(dense_forward(layer, trace.back()));
    return trace;
}

MlpGrads mlp_backward(const Mlp& net, const std::vector<Eigen::VectorXd>& trace,
                      const Eigen::VectorXd& dy) {
    if (trace.size() != net.layers.size() + 1)
        throw std::invalid_argument("mlp_backward: trace/layer count mismatch");
    MlpGrads g;
    g.dW.resize(net.layers.size());
    g.db.resize(net.layers.size());
    Eigen::VectorXd d = dy;
    for (int l = static_cast<int>(net.layers.size()) - 1; l >= 0; --l) {
        DenseGrads lg = dense_backward(net.layers[l], trace[l], d);
        g.dW[l] = std::move(lg.dW);
        g.db[l] = std::move(lg.db);
        d = std::move(lg.dx);
    }
    g.dx = std::move(d);
    return g;
}

}  // namespace dualseq::nn
