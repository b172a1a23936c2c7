#include "dualseq/params.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dualseq::params {

void ParamRegistry::add_matrix(const std::string& name, Eigen::MatrixXd& m, bool is_weight,
                               bool frozen) {
    entries_.push_back({name, m.data(), m.size(), is_weight, frozen});
}

void ParamRegistry::add_vector(const std::string& name, Eigen::VectorXd& v, bool is_weight,
                               bool frozen) {
    entries_.push_back({name, v.data(), v.size(), is_weight, frozen});
}

void ParamRegistry::add_layer(const std::string& prefix, nn::DenseLayer& layer, bool frozen) {
    add_matrix(prefix + ".W", layer.weights, true, frozen);
    add_vector(prefix + ".b", layer.bias, false, frozen);
}

Eigen::Index ParamRegistry::size() const {
    Eigen::Index n = 0;
    for (const auto& e : entries_) n += e.size;
    return n;
}

Eigen::VectorXd ParamRegistry::flatten() const {
    Eigen::VectorXd theta(size());
    Eigen::Index off = 0;
    for (const auto& e : entries_) {
        theta.segment(off, e.size) = Eigen::Map<const Eigen::VectorXd>(e.data, e.size);
        off += e.size;
    }
    return theta;
}

void ParamRegistry::unflatten(const Eigen::VectorXd& theta) {
    if (theta.size() != size())
        throw std::invalid_argument("unflatten: size mismatch");
    Eigen::Index off = 0;
    for (auto& e : entries_) {
        Eigen::Map<Eigen::VectorXd>(e.data, e.size) = theta.segment(off, e.size);
        off += e.size;
    }
}

std::pair<Eigen::Index, Eigen::Index> ParamRegistry::range(const std::string& name) const {
    Eigen::Index off = 0;
    for (const auto& e : entries_) {
        if (e.name == name) return {off, e.size};
        off += e.size;
    }
    throw std::invalid_argument("unknown parameter: " + name);
}

Eigen::VectorXd ParamRegistry::weight_mask() const {
    Eigen::VectorXd mask = Eigen::VectorXd::Zero(size());
    Eigen::Index off = 0;
    for (const auto& e : entries_) {
        if (e.is_weight && !e.frozen) mask.segment(off, e.size).setOnes();
        off += e.size;
    }
    return mask;
}

Eigen::VectorXd ParamRegistry::frozen_mask() const {
    Eigen::VectorXd mask = Eigen::VectorXd::Zero(size());
    Eigen::Index off = 0;
    for (const auto& e : entries_) {
        if (e.frozen) mask.segment(off, e.size).setOnes();
        off += e.size;
    }
    return mask;
}

std::pair<double, Eigen::VectorXd> l2_penalty(const ParamRegistry& params, double lambda) {
    if (lambda < 0.0) throw std::invalid_argument("l2_penalty: lambda must be >= 0");
    const Eigen::VectorXd theta = params.flatten();
    const Eigen::VectorXd mask = params.weight_mask();
    const Eigen::VectorXd masked = theta.array() * mask.array();
    const double value = lambda * masked.squaredNorm();
    Eigen::VectorXd grad = 2.0 * lambda * masked;
    return {value, std::move(grad)};
}

double grad_check(const std::function<double(const Eigen::VectorXd&)>& loss_fn,
                  const Eigen::VectorXd& theta, const Eigen::VectorXd& analytic_grad,
                  double eps) {
    if (analytic_grad.size() != theta.size())
        throw std::invalid_argument("grad_check: gradient size mismatch");
    const double f0 = loss_fn(theta);
    const double f0_again = loss_fn(theta);
    if (f0 != f0_again)
        throw std::runtime_error("grad_check: loss_fn is not deterministic");
    double max_rel = 0.0;
    Eigen::VectorXd probe = theta;
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
        probe[k] = theta[k] + eps;
        const double fp = loss_fn(probe);
        probe[k] = theta[k] - eps;
        const double fm = loss_fn(probe);
        probe[k] = theta[k];
        const double numeric = (fp - fm) / (2.0 * eps);
        const double a = analytic_grad[k];
        const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

}  // namespace dualseq::params
