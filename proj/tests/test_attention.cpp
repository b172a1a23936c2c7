#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "dualseq/attention.hpp"

using namespace dualseq;

namespace {

attention::AttentionBlock random_block(Eigen::Index k, int L, std::mt19937_64& rng) {
    attention::AttentionBlock block(k, L);
    attention::init_block(block, rng);
    return block;
}

std::vector<Eigen::VectorXd> random_outputs(Eigen::Index k, int len, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Eigen::VectorXd> out;
    for (int i = 0; i < len; ++i)
        out.push_back(Eigen::VectorXd::NullaryExpr(k, [&] { return normal(rng); }));
    return out;
}

// direct Eq-style oracle for the whole transform
Eigen::VectorXd oracle_o_star(const attention::AttentionBlock& b, const Eigen::MatrixXd& Y,
                              const Eigen::VectorXd& o_j) {
    const Eigen::MatrixXd M =
        ((b.W_Y * Y).colwise() + b.W_o * o_j).array().tanh().matrix();
    Eigen::RowVectorXd scores = b.w.transpose() * M;
    const Eigen::ArrayXd e = (scores.transpose().array() - scores.maxCoeff()).exp();
    const Eigen::RowVectorXd alpha = (e / e.sum()).matrix().transpose();
    const Eigen::VectorXd r = Y * alpha.transpose();
    return (b.W_r * r + b.W_x * o_j).array().tanh();
}

}  // namespace

TEST_CASE("window memory layout and zero padding") {
    std::mt19937_64 rng(1);
    const auto outputs = random_outputs(3, 5, rng);
    const auto Y = attention::window_memory(outputs, 3, 2);
    REQUIRE(Y.cols() == 2);
    CHECK(Y.col(0) == outputs[1]);
    CHECK(Y.col(1) == outputs[2]);

    // j = 0: no history at all
    const auto Y0 = attention::window_memory(outputs, 0, 3);
    CHECK(Y0.isZero(0.0));
    // j = 1 with L = 3: two zero columns then o_0
    const auto Y1 = attention::window_memory(outputs, 1, 3);
    CHECK(Y1.col(0).isZero(0.0));
    CHECK(Y1.col(1).isZero(0.0));
    CHECK(Y1.col(2) == outputs[0]);

    CHECK_THROWS_AS(attention::window_memory(outputs, 9, 2), std::invalid_argument);
    CHECK_THROWS_AS(attention::window_memory(outputs, 2, 0), std::invalid_argument);
}

TEST_CASE("scores form a distribution; L = 1 gives alpha = [1] exactly") {
    std::mt19937_64 rng(2);
    for (int n = 0; n < 50; ++n) {
        const auto block = random_block(4, 3, rng);
        const auto outputs = random_outputs(4, 6, rng);
        const auto Y = attention::window_memory(outputs, 4, 3);
        const auto alpha = attention::attention_scores(block, Y, outputs[4]);
        CHECK(alpha.sum() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(alpha.minCoeff() > 0.0);
    }
    const auto block = random_block(4, 1, rng);
    const auto outputs = random_outputs(4, 3, rng);
    const auto Y = attention::window_memory(outputs, 2, 1);
    const auto alpha = attention::attention_scores(block, Y, outputs[2]);
    REQUIRE(alpha.size() == 1);
    CHECK(alpha[0] == 1.0);
}

TEST_CASE("L = 1 collapses to the two-term tanh combination") {
    std::mt19937_64 rng(3);
    for (int n = 0; n < 20; ++n) {
        const auto block = random_block(3, 1, rng);
        const auto outputs = random_outputs(3, 4, rng);
        const std::size_t j = 2;
        const auto Y = attention::window_memory(outputs, j, 1);
        const auto alpha = attention::attention_scores(block, Y, outputs[j]);
        const auto o_star = attention::attention_apply(block, Y, alpha, outputs[j]);
        const Eigen::VectorXd direct =
            (block.W_r * outputs[j - 1] + block.W_x * outputs[j]).array().tanh();
        CHECK((o_star - direct).lpNorm<Eigen::Infinity>() < 1e-12);
    }
}

TEST_CASE("j = 0 zero padding yields r = 0 exactly") {
    std::mt19937_64 rng(4);
    const auto block = random_block(3, 2, rng);
    const auto outputs = random_outputs(3, 3, rng);
    const auto Y = attention::window_memory(outputs, 0, 2);
    const auto alpha = attention::attention_scores(block, Y, outputs[0]);
    const Eigen::VectorXd r = Y * alpha.transpose();
    CHECK(r.isZero(0.0));
    const auto o_star = attention::attention_apply(block, Y, alpha, outputs[0]);
    const Eigen::VectorXd direct = (block.W_x * outputs[0]).array().tanh();
    CHECK((o_star - direct).lpNorm<Eigen::Infinity>() < 1e-14);
}

TEST_CASE("apply matches the direct-formula oracle") {
    std::mt19937_64 rng(5);
    for (int n = 0; n < 100; ++n) {
        const int L = 1 + int(rng() % 4);
        const auto block = random_block(3, L, rng);
        const auto outputs = random_outputs(3, 6, rng);
        const std::size_t j = rng() % 6;
        const auto Y = attention::window_memory(outputs, j, L);
        const auto alpha = attention::attention_scores(block, Y, outputs[j]);
        const auto o_star = attention::attention_apply(block, Y, alpha, outputs[j]);
        CHECK((o_star - oracle_o_star(block, Y, outputs[j])).lpNorm<Eigen::Infinity>() < 1e-12);
    }
}

TEST_CASE("context vector is bilinear in Y and alpha") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> normal(0.0, 1.0);
    const Eigen::MatrixXd Y = Eigen::MatrixXd::NullaryExpr(3, 4, [&] { return normal(rng); });
    const Eigen::MatrixXd Y2 = Eigen::MatrixXd::NullaryExpr(3, 4, [&] { return normal(rng); });
    const Eigen::RowVectorXd a = Eigen::RowVectorXd::NullaryExpr(4, [&] { return normal(rng); });
    const Eigen::RowVectorXd a2 = Eigen::RowVectorXd::NullaryExpr(4, [&] { return normal(rng); });
    const auto r = [](const Eigen::MatrixXd& y, const Eigen::RowVectorXd& al) {
        return (y * al.transpose()).eval();
    };
    CHECK((r(Y + Y2, a) - (r(Y, a) + r(Y2, a))).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((r(Y, a + a2) - (r(Y, a) + r(Y, a2))).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((r(2.5 * Y, a) - 2.5 * r(Y, a)).lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("backward matches finite differences") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (const int L : {2, 3}) {  // L = 1 has constant alpha; covered by the model grad check
        auto block = random_block(3, L, rng);
        const auto outputs = random_outputs(3, 5, rng);
        const std::size_t j = 4;
        Eigen::MatrixXd Y = attention::window_memory(outputs, j, L);
        Eigen::VectorXd o_j = outputs[j];
        const Eigen::VectorXd up = Eigen::VectorXd::NullaryExpr(3, [&] { return normal(rng); });

        const auto objective = [&](const attention::AttentionBlock& b, const Eigen::MatrixXd& y,
                                   const Eigen::VectorXd& o) {
            const auto alpha = attention::attention_scores(b, y, o);
            return attention::attention_apply(b, y, alpha, o).dot(up);
        };

        const auto g = attention::attention_backward(block, Y, o_j, up);
        const double eps = 1e-6;
        const auto fd = [&](double* p) {
            const double keep = *p;
            *p = keep + eps;
            const double hi = objective(block, Y, o_j);
            *p = keep - eps;
            const double lo = objective(block, Y, o_j);
            *p = keep;
            return (hi - lo) / (2.0 * eps);
        };
        for (Eigen::Index i = 0; i < block.W_Y.size(); ++i)
            CHECK(g.block.W_Y.data()[i] == doctest::Approx(fd(block.W_Y.data() + i)).epsilon(1e-5));
        for (Eigen::Index i = 0; i < block.W_o.size(); ++i)
            CHECK(g.block.W_o.data()[i] == doctest::Approx(fd(block.W_o.data() + i)).epsilon(1e-5));
        for (Eigen::Index i = 0; i < block.W_r.size(); ++i)
            CHECK(g.block.W_r.data()[i] == doctest::Approx(fd(block.W_r.data() + i)).epsilon(1e-5));
        for (Eigen::Index i = 0; i < block.W_x.size(); ++i)
            CHECK(g.block.W_x.data()[i] == doctest::Approx(fd(block.W_x.data() + i)).epsilon(1e-5));
        for (Eigen::Index i = 0; i < block.w.size(); ++i)
            CHECK(g.block.w.data()[i] == doctest::Approx(fd(block.w.data() + i)).epsilon(1e-5));
        for (Eigen::Index i = 0; i < Y.size(); ++i)
            CHECK(g.d_Y.data()[i] == doctest::Approx(fd(Y.data() + i)).epsilon(1e-5));
        for (Eigen::Index i = 0; i < o_j.size(); ++i)
            CHECK(g.d_o_j.data()[i] == doctest::Approx(fd(o_j.data() + i)).epsilon(1e-5));
    }
}
