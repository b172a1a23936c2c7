#pragma once

#include <Eigen/Dense>
#include <random>
#include <string>
#include <vector>

#include "dualseq/attention.hpp"
#include "dualseq/data.hpp"
#include "dualseq/nn.hpp"
#include "dualseq/params.hpp"
#include "dualseq/recurrent.hpp"

namespace dualseq::model {

// Nonlinear input dimensionality reduction: k -> embed1 -> embed2, tanh.
struct InputNet {
    nn::DenseLayer l1;
    nn::DenseLayer l2;
};

struct Classifier {
    nn::DenseLayer hidden;  // tanh
    nn::DenseLayer out;     // single sigmoid unit
};

struct ModelShapes {
    int k_c = 93;
    int k_p = 24;
    int embed1 = 10;
    int embed2 = 20;
    int hidden_c = 10;
    int hidden_p = 5;
    int out_c = 10;   // RNN output width defaults to hidden width
    int out_p = 5;
    int init_hidden = 10;
    int cls_hidden = 10;
    int attn_window = 1;
};

struct ModelConfig {
    ModelShapes shapes;
    bool use_attention = true;
    bool ablate_clinician = false;
    bool ablate_patient = false;
    double dropout = 0.6;  // drop probability at the classifier input
    double l2 = 0.01;
    double age_mean = 43.32;
    double age_std = 12.6;
};

struct ModelParams {
    ModelConfig cfg;
    InputNet input_c, input_p;
    recurrent::RnnCell cell_c, cell_p;
    recurrent::InitialStateNet init_net;
    attention::AttentionBlock attn;
    Classifier classifier;
};

ModelParams make_model(const ModelConfig& cfg, std::uint64_t seed);
ModelParams zeros_like(const ModelParams& m);

// Deterministic flat view of every trainable tensor. Ablated / unused branches
// are registered frozen.
params::ParamRegistry registry(ModelParams& m);

// Zeroes and freezes one branch; the merged vector keeps the slot as zeros.
ModelParams ablate(ModelParams m, const std::string& branch);

struct RecordCache {
    // patient branch
    std::vector<Eigen::VectorXd> emb_p_h1, emb_p;
    std::vector<Eigen::VectorXd> rnn_in_p;
    recurrent::RnnTrace trace_p;
    std::vector<Eigen::VectorXd> o_star;  // per answer (attention variant only)
    // clinician branch
    std::vector<Eigen::VectorXd> emb_c_h1, emb_c;
    std::vector<Eigen::VectorXd> rnn_in_c;
    Eigen::VectorXd init_in, init_h1, h0_c;
    recurrent::RnnTrace trace_c;
    // per visit
    std::vector<long> answer_idx;  // j* or -1
    std::vector<Eigen::VectorXd> merged, dropped, drop_mask, cls_h;
    std::vector<double> yhat;
};

RecordCache forward_record(const ModelParams& m, const data::PatientRecord& record,
                           bool training, std::mt19937_64& rng);

// Eq-style target-replication loss over a batch (sum over patients of the
// 1/T_c-weighted cross entropy) plus the L2 penalty.
struct BatchLoss {
    double value = 0.0;
    std::vector<RecordCache> caches;
};

BatchLoss loss(ModelParams& m, const std::vector<const data::PatientRecord*>& batch,
               bool training, std::mt19937_64& rng);

// Gradients for the cached forward pass, flat in registry order. Frozen
// entries are identically zero.
Eigen::VectorXd backward(ModelParams& m, const std::vector<const data::PatientRecord*>& batch,
                         const std::vector<RecordCache>& caches);

// Pretraining of the two input nets against per-event labels (clinician events
// against their own label, patient answers against the nearest following
// visit's label). Returns the nets; temporary readouts are discarded.
std::pair<InputNet, InputNet> pretrain_input_nets(const data::Cohort& cohort, int epochs,
                                                  double lr, std::uint64_t seed,
                                                  const ModelShapes& shapes);

// Checkpoints: text header with config + one line per tensor, 17 significant
// digits (bit-exact round trip).
void save_checkpoint(ModelParams& m, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace dualseq::model
