#pragma once

#include <Eigen/Dense>
#include <random>
#include <vector>

namespace dualseq::attention {

// Windowed attention over the last L outputs of a sequence:
//   M = tanh(W_Y Y + (W_o o_j) 1^T),  alpha = softmax(w^T M),
//   r = Y alpha^T,                    o* = tanh(W_r r + W_x o_j).
struct AttentionBlock {
    Eigen::MatrixXd W_Y, W_o, W_r, W_x;  // all k x k
    Eigen::VectorXd w;                   // k
    int window = 1;                      // L >= 1

    AttentionBlock() = default;
    AttentionBlock(Eigen::Index k, int L)
        : W_Y(Eigen::MatrixXd::Zero(k, k)),
          W_o(Eigen::MatrixXd::Zero(k, k)),
          W_r(Eigen::MatrixXd::Zero(k, k)),
          W_x(Eigen::MatrixXd::Zero(k, k)),
          w(Eigen::VectorXd::Zero(k)),
          window(L) {}

    Eigen::Index dim() const { return w.size(); }
};

void init_block(AttentionBlock& block, std::mt19937_64& rng);

// Columns [o_{j-L} ... o_{j-1}], left-padded with zeros when j < L.
Eigen::MatrixXd window_memory(const std::vector<Eigen::VectorXd>& outputs, std::size_t j, int L);

Eigen::RowVectorXd attention_scores(const AttentionBlock& block, const Eigen::MatrixXd& Y,
                                    const Eigen::VectorXd& o_j);

Eigen::VectorXd attention_apply(const AttentionBlock& block, const Eigen::MatrixXd& Y,
                                const Eigen::RowVectorXd& alpha, const Eigen::VectorXd& o_j);

struct AttentionGrads {
    AttentionBlock block;  // parameter gradients, same shapes
    Eigen::MatrixXd d_Y;
    Eigen::VectorXd d_o_j;
};

AttentionGrads attention_backward(const AttentionBlock& block, const Eigen::MatrixXd& Y,
                                  const Eigen::VectorXd& o_j, const Eigen::VectorXd& d_o_star);

}  // namespace dualseq::attention
