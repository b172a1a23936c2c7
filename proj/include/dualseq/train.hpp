#pragma once

#include <Eigen/Dense>
#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dualseq/data.hpp"
#include "dualseq/model.hpp"
#include "dualseq/params.hpp"

namespace dualseq::train {

struct TrainConfig {
    double lr = 0.005;
    int epochs = 100;
    int batch_size = 20;  // patients
    double l2 = 0.01;
    double dropout = 0.6;
    int k_folds = 4;
    double train_fraction = 0.75;
    int pretrain_epochs = 30;
    double pretrain_lr = 0.05;
    std::uint64_t seed = 0;
};

// theta <- theta - lr * g, skipping frozen entries.
void sgd_step(params::ParamRegistry& params, const Eigen::VectorXd& grads, double lr);

struct FoldSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
};

// Patients stratified by clinician-sequence length bucket; per-bucket counts
// across folds differ by at most one.
std::vector<FoldSplit> kfold_split(const data::Cohort& cohort, int k, std::uint64_t seed);

struct TrainResult {
    std::vector<double> loss_history;  // mean per-patient loss per epoch
};

TrainResult train_model(model::ModelParams& m, const data::Cohort& cohort,
                        const std::vector<std::size_t>& patient_idx, const TrainConfig& cfg,
                        std::uint64_t fold_tag = 0);

struct ScorePair {
    double score = 0.0;
    int label = 0;
};

// F1-maximizing threshold on the grid 0.01..0.99 (step 0.01); ties -> smallest.
double select_threshold(const std::vector<ScorePair>& pairs);

struct ConfusionMetrics {
    double recall = 0.0;
    double precision = 0.0;
    double accuracy = 0.0;
    double f1 = 0.0;
    bool degenerate = false;  // some ratio was 0/0 and reported as 0
};

ConfusionMetrics confusion_metrics(const std::vector<ScorePair>& pairs, double alpha);

// Trapezoidal ROC area with simultaneous steps on tied scores. Empty optional
// when one class is absent.
std::optional<double> auc(const std::vector<ScorePair>& pairs);

enum class Variant { Attention, NoAttention, AblateClinician, AblatePatient, LogReg, Ffnn };

std::string to_string(Variant v);

struct MetricCell {
    double mean = 0.0;
    double stddev = 0.0;
    bool absent = false;
};

struct BucketReport {
    // keyed by "1","2","3","4+","all"; metrics: recall/precision/accuracy/auc/f1
    std::map<std::string, std::map<std::string, MetricCell>> cells;
    std::vector<double> thresholds;  // per fold
};

struct EvalOptions {
    int attn_window = 1;
    bool parallel_folds = false;
};

// Full protocol: per fold pretrain+train on the train split, select the
// threshold on the train split's scores, score every held-out visit, stratify
// by the patient's clinician-sequence length. Mean/std across folds.
BucketReport stratified_report(Variant variant, const data::Cohort& cohort,
                               const TrainConfig& cfg, const EvalOptions& opts = {});

// Table-shaped CSVs: one recall row per variant / one row per metric.
void write_recall_report_csv(const std::vector<std::pair<std::string, BucketReport>>& rows,
                             const std::string& path);
void write_metrics_report_csv(const BucketReport& report, const std::string& path);

}  // namespace dualseq::train
