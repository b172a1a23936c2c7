#include "dualseq/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include "dualseq/baselines.hpp"
#include "dualseq/rng.hpp"

namespace dualseq::train {

namespace {

const std::array<std::string, 5> kBuckets = {"1", "2", "3", "4+", "all"};
const std::array<std::string, 5> kMetrics = {"recall", "precision", "accuracy", "auc", "f1"};

std::string bucket_of(const data::PatientRecord& r) {
    return data::to_string(data::length_bucket(r.visits.size()));
}

struct FoldMetrics {
    std::map<std::string, std::map<std::string, std::optional<double>>> values;
    double threshold = 0.5;
};

double f1_at(const std::vector<ScorePair>& pairs, double alpha) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (const auto& p : pairs) {
        const bool pred = p.score >= alpha;
        if (pred && p.label == 1) ++tp;
        if (pred && p.label == 0) ++fp;
        if (!pred && p.label == 1) ++fn;
    }
    const double denom = static_cast<double>(2 * tp + fp + fn);
    return denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp) / denom;
}

data::Cohort subcohort(const data::Cohort& cohort, const std::vector<std::size_t>& idx) {
    data::Cohort sub = cohort;
    sub.records.clear();
    for (const auto i : idx) sub.records.push_back(cohort.records[i]);
    return sub;
}

}  // namespace

void sgd_step(params::ParamRegistry& params, const Eigen::VectorXd& grads, double lr) {
    if (grads.size() != params.size())
        throw std::invalid_argument("sgd_step: gradient size mismatch");
    Eigen::VectorXd theta = params.flatten();
    const Eigen::VectorXd frozen = params.frozen_mask();
    theta -= lr * (grads.array() * (1.0 - frozen.array())).matrix();
    params.unflatten(theta);
}

std::vector<FoldSplit> kfold_split(const data::Cohort& cohort, int k, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("kfold_split: k must be >= 2");
    std::map<std::string, std::vector<std::size_t>> by_bucket;
    for (std::size_t i = 0; i < cohort.records.size(); ++i)
        by_bucket[bucket_of(cohort.records[i])].push_back(i);

    std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
    auto gen = rng::substream(seed, "kfold");
    for (auto& [bucket, members] : by_bucket) {
        if (members.size() < static_cast<std::size_t>(k))
            std::cerr << "kfold_split: bucket " << bucket << " has only " << members.size()
                      << " patients for " << k << " folds\n";
        std::shuffle(members.begin(), members.end(), gen);
        for (std::size_t pos = 0; pos < members.size(); ++pos)
            folds[pos % static_cast<std::size_t>(k)].push_back(members[pos]);
    }

    std::vector<FoldSplit> splits(static_cast<std::size_t>(k));
    for (int f = 0; f < k; ++f) {
        auto& split = splits[static_cast<std::size_t>(f)];
        split.validation = folds[static_cast<std::size_t>(f)];
        std::sort(split.validation.begin(), split.validation.end());
        for (int g = 0; g < k; ++g)
            if (g != f)
                split.train.insert(split.train.end(), folds[static_cast<std::size_t>(g)].begin(),
                                   folds[static_cast<std::size_t>(g)].end());
        std::sort(split.train.begin(), split.train.end());
    }
    return splits;
}

TrainResult train_model(model::ModelParams& m, const data::Cohort& cohort,
                        const std::vector<std::size_t>& patient_idx, const TrainConfig& cfg,
                        std::uint64_t fold_tag) {
    m.cfg.l2 = cfg.l2;
    m.cfg.dropout = cfg.dropout;
    auto gen_shuffle = rng::substream(cfg.seed, "train_shuffle", fold_tag);
    auto gen_dropout = rng::substream(cfg.seed, "train_dropout", fold_tag);
    std::vector<std::size_t> order = patient_idx;
    TrainResult result;
    result.loss_history.reserve(static_cast<std::size_t>(cfg.epochs));
    auto reg = model::registry(m);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), gen_shuffle);
        double epoch_loss = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(start + static_cast<std::size_t>(cfg.batch_size), order.size());
            std::vector<const data::PatientRecord*> batch;
            batch.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) batch.push_back(&cohort.records[order[i]]);
            auto batch_loss = model::loss(m, batch, true, gen_dropout);
            const Eigen::VectorXd grads = model::backward(m, batch, batch_loss.caches);
            sgd_step(reg, grads, cfg.lr);
            epoch_loss += batch_loss.value / static_cast<double>(batch.size());
            ++n_batches;
        }
        result.loss_history.push_back(epoch_loss / static_cast<double>(n_batches));
    }
    return result;
}

double select_threshold(const std::vector<ScorePair>& pairs) {
    if (pairs.empty()) throw std::invalid_argument("select_threshold: empty pairs");
    const bool has_pos = std::any_of(pairs.begin(), pairs.end(),
                                     [](const ScorePair& p) { return p.label == 1; });
    const bool has_neg = std::any_of(pairs.begin(), pairs.end(),
                                     [](const ScorePair& p) { return p.label == 0; });
    if (!has_pos || !has_neg) {
        std::cerr << "select_threshold: one-class validation labels, falling back to 0.5\n";
        return 0.5;
    }
    double best_alpha = 0.01;
    double best_f1 = -1.0;
    for (int i = 1; i <= 99; ++i) {
        const double alpha = static_cast<double>(i) / 100.0;
        const double f1 = f1_at(pairs, alpha);
        if (f1 > best_f1) {
            best_f1 = f1;
            best_alpha = alpha;
        }
    }
    return best_alpha;
}

ConfusionMetrics confusion_metrics(const std::vector<ScorePair>& pairs, double alpha) {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (const auto& p : pairs) {
        if (p.label != 0 && p.label != 1)
            throw std::invalid_argument("confusion_metrics: labels must be binary");
        const bool pred = p.score >= alpha;
        if (pred && p.label == 1) ++tp;
        else if (pred && p.label == 0) ++fp;
        else if (!pred && p.label == 1) ++fn;
        else ++tn;
    }
    ConfusionMetrics m;
    const auto ratio = [&m](std::size_t num, std::size_t den) {
        if (den == 0) {
            m.degenerate = true;
            return 0.0;
        }
        return static_cast<double>(num) / static_cast<double>(den);
    };
    m.recall = ratio(tp, tp + fn);
    m.precision = ratio(tp, tp + fp);
    m.accuracy = ratio(tp + tn, tp + fp + fn + tn);
    const double pr = m.precision + m.recall;
    m.f1 = pr == 0.0 ? 0.0 : 2.0 * m.precision * m.recall / pr;
    return m;
}

std::optional<double> auc(const std::vector<ScorePair>& pairs) {
    std::size_t n_pos = 0, n_neg = 0;
    for (const auto& p : pairs) (p.label == 1 ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;
    std::vector<ScorePair> sorted = pairs;
    std::sort(sorted.begin(), sorted.end(),
              [](const ScorePair& a, const ScorePair& b) { return a.score > b.score; });
    double area = 0.0;
    double tpr_prev = 0.0, fpr_prev = 0.0;
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        // all tied scores step together
        std::size_t j = i;
        while (j < sorted.size() && sorted[j].score == sorted[i].score) {
            if (sorted[j].label == 1)
                ++tp;
            else
                ++fp;
            ++j;
        }
        const double tpr = static_cast<double>(tp) / static_cast<double>(n_pos);
        const double fpr = static_cast<double>(fp) / static_cast<double>(n_neg);
        area += (fpr - fpr_prev) * (tpr + tpr_prev) / 2.0;
        tpr_prev = tpr;
        fpr_prev = fpr;
        i = j;
    }
    return area;
}

std::string to_string(Variant v) {
    switch (v) {
        case Variant::Attention: return "attention";
        case Variant::NoAttention: return "no-attention";
        case Variant::AblateClinician: return "ablate-clinician";
        case Variant::AblatePatient: return "ablate-patient";
        case Variant::LogReg: return "logreg";
        case Variant::Ffnn: return "nn";
    }
    throw std::logic_error("unknown variant");
}

namespace {

FoldMetrics evaluate_fold(Variant variant, const data::Cohort& cohort, const TrainConfig& cfg,
                          const EvalOptions& opts, const FoldSplit& split, int fold) {
    // per-visit (score, label, bucket) on the held-out patients; the decision
    // threshold is selected on the training split's scores, never on held-out data
    std::vector<ScorePair> all_pairs, threshold_pairs;
    std::vector<std::string> pair_bucket;

    if (variant == Variant::LogReg || variant == Variant::Ffnn) {
        std::vector<baselines::LabeledVector> train_pairs;
        for (const auto idx : split.train) {
            const auto& r = cohort.records[idx];
            const auto xs =
                baselines::stack_features(r, cohort.k_p, cohort.age_mean, cohort.age_std);
            for (std::size_t i = 0; i < xs.size(); ++i)
                train_pairs.push_back({xs[i], static_cast<double>(r.visits[i].y)});
        }
        nn::Mlp net;
        const std::uint64_t seed =
            rng::stream_seed(cfg.seed, "baseline_fold") ^ static_cast<std::uint64_t>(fold);
        if (variant == Variant::LogReg) {
            net = baselines::logreg_train(train_pairs, cfg.l2, cfg.lr, cfg.epochs, seed);
        } else {
            baselines::FfnnConfig fc;
            fc.l2 = cfg.l2;
            fc.lr = cfg.lr;
            fc.epochs = cfg.epochs;
            fc.batch_size = cfg.batch_size;
            fc.seed = seed;
            net = baselines::ffnn_train(train_pairs, fc);
        }
        for (const auto idx : split.train) {
            const auto& r = cohort.records[idx];
            const auto xs =
                baselines::stack_features(r, cohort.k_p, cohort.age_mean, cohort.age_std);
            for (std::size_t i = 0; i < xs.size(); ++i)
                threshold_pairs.push_back({net.forward(xs[i])[0], r.visits[i].y});
        }
        for (const auto idx : split.validation) {
            const auto& r = cohort.records[idx];
            const auto xs =
                baselines::stack_features(r, cohort.k_p, cohort.age_mean, cohort.age_std);
            for (std::size_t i = 0; i < xs.size(); ++i) {
                all_pairs.push_back({net.forward(xs[i])[0], r.visits[i].y});
                pair_bucket.push_back(bucket_of(r));
            }
        }
    } else {
        model::ModelConfig mc;
        mc.shapes.k_c = cohort.k_c;
        mc.shapes.k_p = cohort.k_p;
        mc.shapes.attn_window = opts.attn_window;
        mc.use_attention = variant == Variant::Attention || variant == Variant::AblateClinician;
        mc.ablate_clinician = variant == Variant::AblateClinician;
        mc.ablate_patient = variant == Variant::AblatePatient;
        mc.dropout = cfg.dropout;
        mc.l2 = cfg.l2;
        mc.age_mean = cohort.age_mean;
        mc.age_std = cohort.age_std;
        const std::uint64_t fold_seed =
            rng::stream_seed(cfg.seed, "model_fold") ^ static_cast<std::uint64_t>(fold);
        model::ModelParams m = model::make_model(mc, fold_seed);
        if (cfg.pretrain_epochs > 0) {
            const data::Cohort train_cohort = subcohort(cohort, split.train);
            auto nets = model::pretrain_input_nets(train_cohort, cfg.pretrain_epochs,
                                                   cfg.pretrain_lr, fold_seed, mc.shapes);
            if (!mc.ablate_clinician) m.input_c = std::move(nets.first);
            if (!mc.ablate_patient) m.input_p = std::move(nets.second);
        }
        train_model(m, cohort, split.train, cfg, static_cast<std::uint64_t>(fold));
        auto gen_eval = rng::substream(cfg.seed, "eval", static_cast<std::uint64_t>(fold));
        for (const auto idx : split.train) {
            const auto& r = cohort.records[idx];
            const auto cache = model::forward_record(m, r, false, gen_eval);
            for (std::size_t i = 0; i < cache.yhat.size(); ++i)
                threshold_pairs.push_back({cache.yhat[i], r.visits[i].y});
        }
        for (const auto idx : split.validation) {
            const auto& r = cohort.records[idx];
            const auto cache = model::forward_record(m, r, false, gen_eval);
            for (std::size_t i = 0; i < cache.yhat.size(); ++i) {
                all_pairs.push_back({cache.yhat[i], r.visits[i].y});
                pair_bucket.push_back(bucket_of(r));
            }
        }
    }

    FoldMetrics fm;
    fm.threshold = select_threshold(threshold_pairs);
    for (const auto& bucket : kBuckets) {
        std::vector<ScorePair> pairs;
        for (std::size_t i = 0; i < all_pairs.size(); ++i)
            if (bucket == "all" || pair_bucket[i] == bucket) pairs.push_back(all_pairs[i]);
        auto& cell = fm.values[bucket];
        if (pairs.empty()) {
            for (const auto& metric : kMetrics) cell[metric] = std::nullopt;
            continue;
        }
        const auto cm = confusion_metrics(pairs, fm.threshold);
        cell["recall"] = cm.recall;
        cell["precision"] = cm.precision;
        cell["accuracy"] = cm.accuracy;
        cell["f1"] = cm.f1;
        const auto a = auc(pairs);
        cell["auc"] = a ? std::optional<double>(*a) : std::nullopt;
    }
    return fm;
}

}  // namespace

BucketReport stratified_report(Variant variant, const data::Cohort& cohort,
                               const TrainConfig& cfg, const EvalOptions& opts) {
    const auto splits = kfold_split(cohort, cfg.k_folds, cfg.seed);
    std::vector<FoldMetrics> fold_metrics(splits.size());
    if (opts.parallel_folds) {
        std::vector<std::future<FoldMetrics>> futures;
        for (std::size_t f = 0; f < splits.size(); ++f)
            futures.push_back(std::async(std::launch::async, [&, f] {
                return evaluate_fold(variant, cohort, cfg, opts, splits[f], static_cast<int>(f));
            }));
        for (std::size_t f = 0; f < splits.size(); ++f) fold_metrics[f] = futures[f].get();
    } else {
        for (std::size_t f = 0; f < splits.size(); ++f)
            fold_metrics[f] = evaluate_fold(variant, cohort, cfg, opts, splits[f],
                                            static_cast<int>(f));
    }

    BucketReport report;
    for (const auto& fm : fold_metrics) report.thresholds.push_back(fm.threshold);
    for (const auto& bucket : kBuckets) {
        for (const auto& metric : kMetrics) {
            std::vector<double> values;
            for (const auto& fm : fold_metrics) {
                const auto& v = fm.values.at(bucket).at(metric);
                if (v) values.push_back(*v);
            }
            MetricCell cell;
            if (values.empty()) {
                cell.absent = true;
            } else {
                cell.mean = std::accumulate(values.begin(), values.end(), 0.0) /
                            static_cast<double>(values.size());
                double var = 0.0;
                for (const double v : values) var += (v - cell.mean) * (v - cell.mean);
                cell.stddev = values.size() > 1
                                  ? std::sqrt(var / static_cast<double>(values.size() - 1))
                                  : 0.0;
            }
            report.cells[bucket][metric] = cell;
        }
    }
    return report;
}

namespace {

std::string format_cell(const MetricCell& cell) {
    if (cell.absent) return "-";
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.2f±%.2f", 100.0 * cell.mean, 100.0 * cell.stddev);
    return buf;
}

}  // namespace

void write_recall_report_csv(const std::vector<std::pair<std::string, BucketReport>>& rows,
                             const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_recall_report_csv: cannot open " + path);
    out << "model,1,2,3,4+,all\n";
    for (const auto& [name, report] : rows) {
        out << name;
        for (const auto& bucket : kBuckets) out << "," << format_cell(report.cells.at(bucket).at("recall"));
        out << "\n";
    }
}

void write_metrics_report_csv(const BucketReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_metrics_report_csv: cannot open " + path);
    out << "metric,1,2,3,4+,all\n";
    for (const auto& metric : {"accuracy", "precision", "recall", "auc", "f1"}) {
        out << metric;
        for (const auto& bucket : kBuckets) out << "," << format_cell(report.cells.at(bucket).at(metric));
        out << "\n";
    }
}

}  // namespace dualseq::train
