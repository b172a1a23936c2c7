#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "dualseq/data.hpp"
#include "dualseq/nn.hpp"

namespace dualseq::baselines {

// Per-visit stacked vector [x_c_i ; most recent x_p or zeros ; sex ; normalized age].
std::vector<Eigen::VectorXd> stack_features(const data::PatientRecord& record, int k_p,
                                            double age_mean, double age_std);

struct LabeledVector {
    Eigen::VectorXd x;
    double y = 0.0;
};

// Logistic regression with L2, full-batch gradient descent. Halves the learning
// rate and restarts on divergence before giving up.
nn::Mlp logreg_train(const std::vector<LabeledVector>& pairs, double l2, double lr, int epochs,
                     std::uint64_t seed);

double logreg_predict(const nn::Mlp& weights, const Eigen::VectorXd& x);

struct FfnnConfig {
    int hidden1 = 10;
    int hidden2 = 20;
    double l2 = 0.01;
    double lr = 0.005;
    int epochs = 100;
    int batch_size = 20;
    std::uint64_t seed = 0;
};

nn::Mlp ffnn_train(const std::vector<LabeledVector>& pairs, const FfnnConfig& cfg);
double ffnn_predict(const nn::Mlp& net, const Eigen::VectorXd& x);

// Shared gradient kernel (exposed for tests): mean cross entropy over the pairs
// plus l2 on the weight matrices; grads laid out per layer.
double mlp_logistic_loss(const nn::Mlp& net, const std::vector<LabeledVector>& pairs, double l2,
                         std::vector<Eigen::MatrixXd>* dW = nullptr,
                         std::vector<Eigen::VectorXd>* db = nullptr);

}  // namespace dualseq::baselines
