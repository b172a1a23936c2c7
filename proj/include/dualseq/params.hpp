#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "dualseq/nn.hpp"

namespace dualseq::params {

// One trainable tensor, viewed as a flat span into its owner's storage.
struct ParamEntry {
    std::string name;
    double* data = nullptr;
    Eigen::Index size = 0;
    bool is_weight = false;  // true for projection matrices, false for biases
    bool frozen = false;     // excluded from updates and reported with zero gradient
};

// Stable name -> range view over a set of parameter tensors. Entries keep the
// registration order, so flatten/unflatten is deterministic across runs.
class ParamRegistry {
public:
    void add_matrix(const std::string& name, Eigen::MatrixXd& m, bool is_weight = true,
                    bool frozen = false);
    void add_vector(const std::string& name, Eigen::VectorXd& v, bool is_weight = false,
                    bool frozen = false);
    void add_layer(const std::string& prefix, nn::DenseLayer& layer, bool frozen = false);

    Eigen::Index size() const;
    Eigen::VectorXd flatten() const;
    void unflatten(const Eigen::VectorXd& theta);

    const std::vector<ParamEntry>& entries() const { return entries_; }

    // offset/length of a named tensor in the flat vector
    std::pair<Eigen::Index, Eigen::Index> range(const std::string& name) const;

    Eigen::VectorXd weight_mask() const;  // 1 where is_weight && !frozen
    Eigen::VectorXd frozen_mask() const;  // 1 where frozen

private:
    std::vector<ParamEntry> entries_;
};

// value = lambda * sum w^2 over non-frozen weight tensors; grad matches the flat layout.
std::pair<double, Eigen::VectorXd> l2_penalty(const ParamRegistry& params, double lambda);

// Central-difference check of an analytic gradient. loss_fn must be deterministic
// (verified by double evaluation). Returns max over coordinates of
// |a-n| / max(|a|,|n|,1e-8).
double grad_check(const std::function<double(const Eigen::VectorXd&)>& loss_fn,
                  const Eigen::VectorXd& theta, const Eigen::VectorXd& analytic_grad,
                  double eps);

}  // namespace dualseq::params
