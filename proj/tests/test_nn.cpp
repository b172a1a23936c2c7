#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "dualseq/nn.hpp"

using namespace dualseq;

namespace {

// independent central-difference gradient of a scalar functional of activate()
Eigen::VectorXd fd_activation_grad(nn::Activation kind, const Eigen::VectorXd& z,
                                   const Eigen::VectorXd& dy, double eps = 1e-6) {
    Eigen::VectorXd g(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        Eigen::VectorXd zp = z, zm = z;
        zp[i] += eps;
        zm[i] -= eps;
        g[i] = (nn::activate(kind, zp).dot(dy) - nn::activate(kind, zm).dot(dy)) / (2.0 * eps);
    }
    return g;
}

}  // namespace

TEST_CASE("activation forward values") {
    Eigen::VectorXd z(3);
    z << -1.0, 0.0, 2.0;
    const auto t = nn::activate(nn::Activation::Tanh, z);
    CHECK(t[0] == doctest::Approx(std::tanh(-1.0)).epsilon(1e-15));
    CHECK(t[1] == 0.0);
    const auto s = nn::activate(nn::Activation::Sigmoid, z);
    CHECK(s[1] == doctest::Approx(0.5).epsilon(1e-15));
    const auto r = nn::activate(nn::Activation::Relu, z);
    CHECK(r[0] == 0.0);
    CHECK(r[2] == 2.0);
    const auto l = nn::activate(nn::Activation::Linear, z);
    CHECK(l == z);
}

TEST_CASE("softmax sums to one and is shift invariant") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> normal(0.0, 3.0);
    for (int n = 0; n < 50; ++n) {
        Eigen::VectorXd z = Eigen::VectorXd::NullaryExpr(5, [&] { return normal(rng); });
        const auto p = nn::activate(nn::Activation::Softmax, z);
        CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(p.minCoeff() > 0.0);
        const auto q = nn::activate(nn::Activation::Softmax,
                                    (z.array() + 123.456).matrix().eval());
        CHECK((p - q).lpNorm<Eigen::Infinity>() < 1e-12);
    }
    Eigen::VectorXd bad(2);
    bad << 1.0, std::nan("");
    CHECK_THROWS_AS(nn::activate(nn::Activation::Tanh, bad), std::invalid_argument);
}

TEST_CASE("activation backward matches finite differences") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (const auto kind : {nn::Activation::Tanh, nn::Activation::Sigmoid,
                            nn::Activation::Softmax, nn::Activation::Linear}) {
        for (int n = 0; n < 20; ++n) {
            Eigen::VectorXd z = Eigen::VectorXd::NullaryExpr(4, [&] { return normal(rng); });
            Eigen::VectorXd dy = Eigen::VectorXd::NullaryExpr(4, [&] { return normal(rng); });
            const auto y = nn::activate(kind, z);
            const auto dz = nn::activate_backward(kind, y, dy);
            const auto fd = fd_activation_grad(kind, z, dy);
            CHECK((dz - fd).lpNorm<Eigen::Infinity>() < 1e-7);
        }
    }
}

TEST_CASE("dense layer forward and backward") {
    std::mt19937_64 rng(3);
    nn::DenseLayer layer(3, 4, nn::Activation::Tanh);
    nn::init_layer(layer, rng);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(4, [&] { return normal(rng); });
    const auto y = nn::dense_forward(layer, x);
    const Eigen::VectorXd oracle = (layer.weights * x + layer.bias).array().tanh();
    CHECK((y - oracle).lpNorm<Eigen::Infinity>() < 1e-14);

    Eigen::VectorXd dy = Eigen::VectorXd::NullaryExpr(3, [&] { return normal(rng); });
    const auto g = nn::dense_backward(layer, x, dy);
    const double eps = 1e-6;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Eigen::VectorXd xp = x, xm = x;
        xp[i] += eps;
        xm[i] -= eps;
        const double fd =
            (nn::dense_forward(layer, xp).dot(dy) - nn::dense_forward(layer, xm).dot(dy)) /
            (2.0 * eps);
        CHECK(g.dx[i] == doctest::Approx(fd).epsilon(1e-6));
    }
    for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
        for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
            nn::DenseLayer lp = layer, lm = layer;
            lp.weights(r, c) += eps;
            lm.weights(r, c) -= eps;
            const double fd =
                (nn::dense_forward(lp, x).dot(dy) - nn::dense_forward(lm, x).dot(dy)) /
                (2.0 * eps);
            CHECK(g.dW(r, c) == doctest::Approx(fd).epsilon(1e-6));
        }
    CHECK_THROWS_AS(nn::dense_forward(layer, Eigen::VectorXd::Zero(5)), std::invalid_argument);
}

TEST_CASE("initialization stays in the fan bound with zero bias") {
    std::mt19937_64 rng(4);
    nn::DenseLayer layer(7, 13, nn::Activation::Tanh);
    nn::init_layer(layer, rng);
    const double bound = std::sqrt(6.0 / (7.0 + 13.0));
    CHECK(layer.weights.maxCoeff() <= bound);
    CHECK(layer.weights.minCoeff() >= -bound);
    CHECK(layer.weights.cwiseAbs().maxCoeff() > 0.0);
    CHECK(layer.bias.isZero(0.0));
}

TEST_CASE("inverted dropout") {
    std::mt19937_64 rng(5);
    const Eigen::VectorXd v = Eigen::VectorXd::Constant(10, 1.0);
    const auto inference = nn::dropout_apply(v, 0.6, rng, false);
    CHECK(inference.value == v);
    CHECK(inference.mask == Eigen::VectorXd::Ones(10));

    const auto none = nn::dropout_apply(v, 0.0, rng, true);
    CHECK(none.value == v);

    // inverted scaling keeps the expectation: mean over many draws ~ 1
    double sum = 0.0;
    const int draws = 20000;
    for (int n = 0; n < draws; ++n) {
        const auto d = nn::dropout_apply(v, 0.6, rng, true);
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            CHECK((d.mask[i] == 0.0 || d.mask[i] == 1.0));
            CHECK((d.value[i] == 0.0 || d.value[i] == doctest::Approx(2.5).epsilon(1e-12)));
        }
        sum += d.value.mean();
    }
    CHECK(sum / draws == doctest::Approx(1.0).epsilon(0.02));
    CHECK_THROWS_AS(nn::dropout_apply(v, 1.0, rng, true), std::invalid_argument);
    CHECK_THROWS_AS(nn::dropout_apply(v, -0.1, rng, true), std::invalid_argument);
}

TEST_CASE("mlp backward matches finite differences") {
    std::mt19937_64 rng(6);
    nn::Mlp net;
    net.layers = {nn::DenseLayer(4, 3, nn::Activation::Tanh),
                  nn::DenseLayer(2, 4, nn::Activation::Sigmoid)};
    for (auto& l : net.layers) nn::init_layer(l, rng);
    std::normal_distribution<double> normal(0.0, 1.0);
    const Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(3, [&] { return normal(rng); });
    const Eigen::VectorXd dy = Eigen::VectorXd::NullaryExpr(2, [&] { return normal(rng); });

    const auto trace = net.forward_trace(x);
    CHECK(trace.front() == x);
    CHECK(trace.back() == net.forward(x));
    const auto g = nn::mlp_backward(net, trace, dy);

    const double eps = 1e-6;
    for (std::size_t l = 0; l < net.layers.size(); ++l)
        for (Eigen::Index r = 0; r < net.layers[l].weights.rows(); ++r)
            for (Eigen::Index c = 0; c < net.layers[l].weights.cols(); ++c) {
                nn::Mlp np = net, nm = net;
                np.layers[l].weights(r, c) += eps;
                nm.layers[l].weights(r, c) -= eps;
                const double fd = (np.forward(x).dot(dy) - nm.forward(x).dot(dy)) / (2.0 * eps);
                CHECK(g.dW[l](r, c) == doctest::Approx(fd).epsilon(1e-5));
            }
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Eigen::VectorXd xp = x, xm = x;
        xp[i] += eps;
        xm[i] -= eps;
        const double fd = (net.forward(xp).dot(dy) - net.forward(xm).dot(dy)) / (2.0 * eps);
        CHECK(g.dx[i] == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("activation names round trip") {
    for (const auto kind : {nn::Activation::Tanh, nn::Activation::Sigmoid,
                            nn::Activation::Softmax, nn::Activation::Relu,
                            nn::Activation::Linear})
        CHECK(nn::activation_from_string(nn::to_string(kind)) == kind);
    CHECK_THROWS_AS(nn::activation_from_string("swish"), std::invalid_argument);
}
