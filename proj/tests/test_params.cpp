#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "dualseq/params.hpp"

using namespace dualseq;

namespace {

struct Toy {
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(2, 3);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(2);
    Eigen::MatrixXd frozen_w = Eigen::MatrixXd::Zero(2, 2);
};

params::ParamRegistry toy_registry(Toy& t) {
    params::ParamRegistry reg;
    reg.add_matrix("w", t.w);
    reg.add_vector("b", t.b);
    reg.add_matrix("frozen_w", t.frozen_w, true, true);
    return reg;
}

}  // namespace

TEST_CASE("flatten and unflatten round trip") {
    Toy t;
    auto reg = toy_registry(t);
    CHECK(reg.size() == 12);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd theta = Eigen::VectorXd::NullaryExpr(12, [&] { return normal(rng); });
    reg.unflatten(theta);
    CHECK(reg.flatten() == theta);
    CHECK(t.w(1, 2) == theta[5]);  // column-major within the tensor span
    CHECK(t.b[0] == theta[6]);
    CHECK_THROWS_AS(reg.unflatten(Eigen::VectorXd::Zero(5)), std::invalid_argument);
}

TEST_CASE("named ranges") {
    Toy t;
    auto reg = toy_registry(t);
    const auto [off_w, len_w] = reg.range("w");
    CHECK(off_w == 0);
    CHECK(len_w == 6);
    const auto [off_b, len_b] = reg.range("b");
    CHECK(off_b == 6);
    CHECK(len_b == 2);
    CHECK_THROWS_AS(reg.range("nope"), std::invalid_argument);
}

TEST_CASE("masks") {
    Toy t;
    auto reg = toy_registry(t);
    const auto wm = reg.weight_mask();
    const auto fm = reg.frozen_mask();
    CHECK(wm.head(6).sum() == 6.0);   // w: active weight
    CHECK(wm.segment(6, 2).sum() == 0.0);  // b: bias
    CHECK(wm.tail(4).sum() == 0.0);   // frozen weight excluded
    CHECK(fm.tail(4).sum() == 4.0);
    CHECK(fm.head(8).sum() == 0.0);
}

TEST_CASE("l2 penalty covers active weights only") {
    Toy t;
    auto reg = toy_registry(t);
    t.w.setConstant(2.0);
    t.b.setConstant(5.0);        // bias: excluded
    t.frozen_w.setConstant(3.0);  // frozen: excluded
    const auto [value, grad] = params::l2_penalty(reg, 0.5);
    CHECK(value == doctest::Approx(0.5 * 6 * 4.0).epsilon(1e-15));
    CHECK(grad.head(6) == Eigen::VectorXd::Constant(6, 2.0 * 0.5 * 2.0));
    CHECK(grad.tail(6).isZero(0.0));
    CHECK_THROWS_AS(params::l2_penalty(reg, -1.0), std::invalid_argument);
}

TEST_CASE("grad_check accepts the true gradient and flags a wrong one") {
    // f(x) = sum x_i^3, grad = 3 x^2
    const auto f = [](const Eigen::VectorXd& x) { return x.array().cube().sum(); };
    std::mt19937_64 rng(7);
    std::normal_distribution<double> normal(0.0, 1.0);
    const Eigen::VectorXd x = Eigen::VectorXd::NullaryExpr(6, [&] { return normal(rng); });
    const Eigen::VectorXd good = 3.0 * x.array().square();
    CHECK(params::grad_check(f, x, good, 1e-5) < 1e-8);
    Eigen::VectorXd bad = good;
    bad[2] += 1.0;
    CHECK(params::grad_check(f, x, bad, 1e-5) > 1e-2);
}

TEST_CASE("grad_check rejects a nondeterministic loss") {
    std::mt19937_64 noisy(3);
    const auto f = [&noisy](const Eigen::VectorXd& x) {
        std::normal_distribution<double> n(0.0, 1.0);
        return x.sum() + n(noisy);
    };
    const Eigen::VectorXd x = Eigen::VectorXd::Zero(2);
    CHECK_THROWS_AS(params::grad_check(f, x, x, 1e-5), std::runtime_error);
}
