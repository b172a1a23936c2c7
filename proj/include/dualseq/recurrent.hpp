#pragma once

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "dualseq/data.hpp"
#include "dualseq/nn.hpp"

namespace dualseq::recurrent {

// Basic recurrent unit: h_i = tanh(W_hx x_i + W_hh h_{i-1} + b_h),
// o_i = softmax(W_yh h_i + b_y).
struct RnnCell {
    Eigen::MatrixXd W_hx;  // hidden x in
    Eigen::MatrixXd W_hh;  // hidden x hidden
    Eigen::VectorXd b_h;   // hidden
    Eigen::MatrixXd W_yh;  // out x hidden
    Eigen::VectorXd b_y;   // out

    RnnCell() = default;
    RnnCell(Eigen::Index hidden, Eigen::Index in, Eigen::Index out)
        : W_hx(Eigen::MatrixXd::Zero(hidden, in)),
          W_hh(Eigen::MatrixXd::Zero(hidden, hidden)),
          b_h(Eigen::VectorXd::Zero(hidden)),
          W_yh(Eigen::MatrixXd::Zero(out, hidden)),
          b_y(Eigen::VectorXd::Zero(out)) {}

    Eigen::Index in_size() const { return W_hx.cols(); }
    Eigen::Index hidden_size() const { return W_hx.rows(); }
    Eigen::Index out_size() const { return W_yh.rows(); }
};

void init_cell(RnnCell& cell, std::mt19937_64& rng);

Eigen::VectorXd rnn_step(const RnnCell& cell, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& h_prev);
Eigen::VectorXd rnn_output(const RnnCell& cell, const Eigen::VectorXd& h);

struct RnnTrace {
    std::vector<Eigen::VectorXd> states;
    std::vector<Eigen::VectorXd> outputs;
};

RnnTrace rnn_forward(const RnnCell& cell, const std::vector<Eigen::VectorXd>& xs,
                     const Eigen::VectorXd& h0);

struct RnnGrads {
    RnnCell cell;  // same shapes, holds the parameter gradients
    std::vector<Eigen::VectorXd> d_xs;
    Eigen::VectorXd d_h0;
};

// Full BPTT. d_outputs[i] is dL/do_i; d_states_extra (optional, may be empty)
// injects additional dL/dh_i terms.
RnnGrads rnn_backward(const RnnCell& cell, const std::vector<Eigen::VectorXd>& xs,
                      const Eigen::VectorXd& h0, const RnnTrace& trace,
                      const std::vector<Eigen::VectorXd>& d_outputs,
                      const std::vector<Eigen::VectorXd>& d_states_extra = {});

// Two tanh layers mapping [embedded first visit ; sex ; age] -> clinician h0.
struct InitialStateNet {
    nn::DenseLayer l1;
    nn::DenseLayer l2;
};

Eigen::VectorXd initial_state(const InitialStateNet& net,
                              const Eigen::VectorXd& embedded_first_visit,
                              const data::StaticInfo& info, double age_mean, double age_std);

}  // namespace dualseq::recurrent
