#include "dualseq/attention.hpp"

#include <cmath>
#include <stdexcept>

namespace dualseq::attention {

namespace {

void init_matrix(Eigen::MatrixXd& m, std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = u(rng);
}

void check_shapes(const AttentionBlock& block, const Eigen::MatrixXd& Y,
                  const Eigen::VectorXd& o_j) {
    const Eigen::Index k = block.dim();
    if (Y.rows() != k || Y.cols() != block.window)
        throw std::invalid_argument("attention: memory must be k x L");
    if (o_j.size() != k) throw std::invalid_argument("attention: output width mismatch");
}

Eigen::RowVectorXd softmax_row(const Eigen::RowVectorXd& s) {
    const double m = s.maxCoeff();
    Eigen::RowVectorXd e = (s.array() - m).exp();
    return e / e.sum();
}

}  // namespace

void init_block(AttentionBlock& block, std::mt19937_64& rng) {
    init_matrix(block.W_Y, rng);
    init_matrix(block.W_o, rng);
    init_matrix(block.W_r, rng);
    init_matrix(block.W_x, rng);
    const double bound = std::sqrt(6.0 / static_cast<double>(block.dim() + 1));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index i = 0; i < block.w.size(); ++i) block.w[i] = u(rng);
}

Eigen::MatrixXd window_memory(const std::vector<Eigen::VectorXd>& outputs, std::size_t j, int L) {
    if (L < 1) throw std::invalid_argument("window_memory: L must be >= 1");
    if (j >= outputs.size()) throw std::invalid_argument("window_memory: index out of range");
    const Eigen::Index k = outputs.empty() ? 0 : outputs.front().size();
    Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(k, L);
    for (int col = 0; col < L; ++col) {
        // column `col` holds o_{j-L+col}; absent history stays zero
        const long src = static_cast<long>(j) - L + col;
        if (src >= 0) Y.col(col) = outputs[static_cast<std::size_t>(src)];
    }
    return Y;
}

Eigen::RowVectorXd attention_scores(const AttentionBlock& block, const Eigen::MatrixXd& Y,
                                    const Eigen::VectorXd& o_j) {
    check_shapes(block, Y, o_j);
    const Eigen::MatrixXd M =
        (block.W_Y * Y + (block.W_o * o_j) * Eigen::RowVectorXd::Ones(block.window))
            .array()
            .tanh();
    return softmax_row(block.w.transpose() * M);
}

Eigen::VectorXd attention_apply(const AttentionBlock& block, const Eigen::MatrixXd& Y,
                                const Eigen::RowVectorXd& alpha, const Eigen::VectorXd& o_j) {
    check_shapes(block, Y, o_j);
    if (alpha.size() != block.window)
        throw std::invalid_argument("attention_apply: alpha width mismatch");
    const Eigen::VectorXd r = Y * alpha.transpose();
    return (block.W_r * r + block.W_x * o_j).array().tanh();
}

AttentionGrads attention_backward(const AttentionBlock& block, const Eigen::MatrixXd& Y,
                                  const Eigen::VectorXd& o_j, const Eigen::VectorXd& d_o_star) {
    check_shapes(block, Y, o_j);
    if (d_o_star.size() != block.dim())
        throw std::invalid_argument("attention_backward: upstream width mismatch");

    // re-run the forward pieces
    const Eigen::RowVectorXd ones = Eigen::RowVectorXd::Ones(block.window);
    const Eigen::MatrixXd M = (block.W_Y * Y + (block.W_o * o_j) * ones).array().tanh();
    const Eigen::RowVectorXd alpha = softmax_row(block.w.transpose() * M);
    const Eigen::VectorXd r = Y * alpha.transpose();
    const Eigen::VectorXd o_star = (block.W_r * r + block.W_x * o_j).array().tanh();

    AttentionGrads g;
    g.block = AttentionBlock(block.dim(), block.window);
    // through o* = tanh(W_r r + W_x o_j)
    const Eigen::VectorXd du = d_o_star.array() * (1.0 - o_star.array().square());
    g.block.W_r = du * r.transpose();
    g.block.W_x = du * o_j.transpose();
    g.d_o_j = block.W_x.transpose() * du;
    const Eigen::VectorXd dr = block.W_r.transpose() * du;
    // through r = Y alpha^T
    g.d_Y = dr * alpha;
    const Eigen::RowVectorXd d_alpha = dr.transpose() * Y;
    // through alpha = softmax(s)
    const double dot = alpha.dot(d_alpha);
    const Eigen::RowVectorXd ds = alpha.array() * (d_alpha.array() - dot);
    // through s = w^T M
    g.block.w = M * ds.transpose();
    const Eigen::MatrixXd dM = block.w * ds;
    // through M = tanh(W_Y Y + (W_o o_j) 1^T)
    const Eigen::MatrixXd dA = dM.array() * (1.0 - M.array().square());
    g.block.W_Y = dA * Y.transpose();
    g.d_Y += block.W_Y.transpose() * dA;
    const Eigen::VectorXd dv = dA.rowwise().sum();
    g.block.W_o = dv * o_j.transpose();
    g.d_o_j += block.W_o.transpose() * dv;
    return g;
}

}  // namespace dualseq::attention
