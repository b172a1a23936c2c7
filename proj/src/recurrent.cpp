#include "dualseq/recurrent.hpp"

#include <cmath>
#include <stdexcept>

namespace dualseq::recurrent {

namespace {

void init_matrix(Eigen::MatrixXd& m, std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = u(rng);
}

}  // namespace

void init_cell(RnnCell& cell, std::mt19937_64& rng) {
    init_matrix(cell.W_hx, rng);
    init_matrix(cell.W_hh, rng);
    init_matrix(cell.W_yh, rng);
    cell.b_h.setZero();
    cell.b_y.setZero();
}

Eigen::VectorXd rnn_step(const RnnCell& cell, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& h_prev) {
    if (x.size() != cell.in_size())
        throw std::invalid_argument("rnn_step: input width mismatch");
    if (h_prev.size() != cell.hidden_size())
        throw std::invalid_argument("rnn_step: state width mismatch");
    return (cell.W_hx * x + cell.W_hh * h_prev + cell.b_h).array().tanh();
}

Eigen::VectorXd rnn_output(const RnnCell& cell, const Eigen::VectorXd& h) {
    if (h.size() != cell.hidden_size())
        throw std::invalid_argument("rnn_output: state width mismatch");
    return nn::activate(nn::Activation::Softmax, cell.W_yh * h + cell.b_y);
}

RnnTrace rnn_forward(const RnnCell& cell, const std::vector<Eigen::VectorXd>& xs,
                     const Eigen::VectorXd& h0) {
    RnnTrace trace;
    trace.states.reserve(xs.size());
    trace.outputs.reserve(xs.size());
    const Eigen::VectorXd* h_prev = &h0;
    for (const auto& x : xs) {
        trace.states.push_back(rnn_step(cell, x, *h_prev));
        trace.outputs.push_back(rnn_output(cell, trace.states.back()));
        h_prev = &trace.states.back();
    }
    return trace;
}

RnnGrads rnn_backward(const RnnCell& cell, const std::vector<Eigen::VectorXd>& xs,
                      const Eigen::VectorXd& h0, const RnnTrace& trace,
                      const std::vector<Eigen::VectorXd>& d_outputs,
                      const std::vector<Eigen::VectorXd>& d_states_extra) {
    const std::size_t n = xs.size();
    if (trace.states.size() != n || d_outputs.size() != n)
        throw std::invalid_argument("rnn_backward: sequence length mismatch");
    if (!d_states_extra.empty() && d_states_extra.size() != n)
        throw std::invalid_argument("rnn_backward: d_states_extra length mismatch");

    RnnGrads g;
    g.cell = RnnCell(cell.hidden_size(), cell.in_size(), cell.out_size());
    g.d_xs.assign(n, Eigen::VectorXd());
    Eigen::VectorXd carry = Eigen::VectorXd::Zero(cell.hidden_size());
    for (std::size_t idx = n; idx-- > 0;) {
        const Eigen::VectorXd& h = trace.states[idx];
        const Eigen::VectorXd& o = trace.outputs[idx];
        // softmax output head
        const Eigen::VectorXd dz_out =
            nn::activate_backward(nn::Activation::Softmax, o, d_outputs[idx]);
        g.cell.W_yh += dz_out * h.transpose();
        g.cell.b_y += dz_out;
        Eigen::VectorXd dh = cell.W_yh.transpose() * dz_out + carry;
        if (!d_states_extra.empty()) dh += d_states_extra[idx];
        // tanh recursion
        const Eigen::VectorXd da = dh.array() * (1.0 - h.array().square());
        const Eigen::VectorXd& h_prev = idx == 0 ? h0 : trace.states[idx - 1];
        g.cell.W_hx += da * xs[idx].transpose();
        g.cell.W_hh += da * h_prev.transpose();
        g.cell.b_h += da;
        g.d_xs[idx] = cell.W_hx.transpose() * da;
        carry = cell.W_hh.transpose() * da;
    }
    g.d_h0 = carry;
    return g;
}

Eigen::VectorXd initial_state(const InitialStateNet& net,
                              const Eigen::VectorXd& embedded_first_visit,
                              const data::StaticInfo& info, double age_mean, double age_std) {
    Eigen::VectorXd in(embedded_first_visit.size() + 2);
    in << embedded_first_visit, static_cast<double>(info.sex),
        (info.age - age_mean) / age_std;
    return nn::dense_forward(net.l2, nn::dense_forward(net.l1, in));
}

}  // namespace dualseq::recurrent
