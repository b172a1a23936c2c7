#include "dualseq/interpret.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "dualseq/rng.hpp"

namespace dualseq::interpret {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::vector<FeatureScore> feature_relevance(const model::ModelParams& m,
                                            const std::string& source,
                                            const std::vector<std::string>& feature_names) {
    const Eigen::MatrixXd* weights = nullptr;
    if (source == "clinician")
        weights = &m.input_c.l1.weights;
    else if (source == "patient")
        weights = &m.input_p.l1.weights;
    else
        throw std::invalid_argument("feature_relevance: unknown source " + source);
    if (static_cast<std::size_t>(weights->cols()) != feature_names.size())
        throw std::invalid_argument("feature_relevance: name count does not match layer width");

    Eigen::VectorXd norms(weights->cols());
    for (Eigen::Index f = 0; f < weights->cols(); ++f) norms[f] = weights->col(f).norm();
    const double max_norm = norms.maxCoeff();
    if (max_norm == 0.0)
        throw std::runtime_error("feature_relevance: first layer is all-zero (untrained?)");

    std::vector<FeatureScore> scores;
    scores.reserve(feature_names.size());
    for (Eigen::Index f = 0; f < norms.size(); ++f)
        scores.push_back({feature_names[static_cast<std::size_t>(f)], norms[f] / max_norm});
    std::stable_sort(scores.begin(), scores.end(),
                     [](const FeatureScore& a, const FeatureScore& b) { return a.score > b.score; });
    return scores;
}

void write_relevance_csv(const std::vector<FeatureScore>& scores, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_relevance_csv: cannot open " + path);
    out << "rank,score,feature\n";
    for (std::size_t i = 0; i < scores.size(); ++i)
        out << (i + 1) << "," << fmt_double(scores[i].score) << "," << scores[i].feature << "\n";
}

std::vector<LatentPoint> latent_points(const model::ModelParams& m, const data::Cohort& cohort) {
    std::vector<LatentPoint> points;
    std::mt19937_64 unused(0);
    for (const auto& record : cohort.records) {
        const auto cache = model::forward_record(m, record, false, unused);
        for (std::size_t i = 0; i < cache.merged.size(); ++i) {
            LatentPoint p;
            p.merged = cache.merged[i];
            p.label = record.visits[i].y;
            p.prob = cache.yhat[i];
            p.patient_id = record.id;
            p.visit = i;
            points.push_back(std::move(p));
        }
    }
    return points;
}

namespace {

// Binary search the kernel bandwidth so the conditional entropy hits
// log(perplexity). Returns the conditional row (without the diagonal term).
double calibrate_row(const Eigen::VectorXd& sq_dist, Eigen::Index self, double log_perp,
                     Eigen::VectorXd& row) {
    double beta = 1.0, beta_lo = -1e300, beta_hi = 1e300;
    double entropy = 0.0;
    for (int iter = 0; iter < 50; ++iter) {
        double sum = 0.0, dot = 0.0;
        for (Eigen::Index j = 0; j < sq_dist.size(); ++j) {
            if (j == self) {
                row[j] = 0.0;
                continue;
            }
            row[j] = std::exp(-beta * sq_dist[j]);
            sum += row[j];
            dot += sq_dist[j] * row[j];
        }
        entropy = std::log(sum) + beta * dot / sum;
        row /= sum;
        const double diff = entropy - log_perp;
        if (std::abs(diff) < 1e-7) break;
        if (diff > 0) {
            beta_lo = beta;
            beta = beta_hi > 1e299 ? beta * 2.0 : 0.5 * (beta_lo + beta_hi);
        } else {
            beta_hi = beta;
            beta = beta_lo < -1e299 ? beta / 2.0 : 0.5 * (beta_lo + beta_hi);
        }
    }
    return entropy;
}

}  // namespace

TsneResult tsne(const Eigen::MatrixXd& points, const TsneOptions& opts) {
    if (!points.allFinite()) throw std::invalid_argument("tsne: non-finite input");
    const Eigen::Index n = points.rows();
    if (n < 4) throw std::invalid_argument("tsne: need at least 4 points");

    double perplexity = opts.perplexity;
    if (static_cast<double>(n) <= 3.0 * perplexity) {
        perplexity = std::max(2.0, static_cast<double>(n - 1) / 3.0);
        std::cerr << "tsne: perplexity lowered to " << perplexity << " for n=" << n << "\n";
    }
    const double log_perp = std::log(perplexity);

    Eigen::MatrixXd X = points;
    // squared pairwise distances; exact duplicates get a tiny jitter
    auto sq_dists = [&X, n]() {
        const Eigen::VectorXd sq = X.rowwise().squaredNorm();
        Eigen::MatrixXd D = sq.replicate(1, n) + sq.transpose().replicate(n, 1) -
                            2.0 * X * X.transpose();
        return D.cwiseMax(0.0).eval();
    };
    Eigen::MatrixXd D = sq_dists();
    bool has_dup = false;
    for (Eigen::Index i = 0; i < n && !has_dup; ++i)
        for (Eigen::Index j = i + 1; j < n && !has_dup; ++j)
            if (D(i, j) == 0.0) has_dup = true;
    if (has_dup) {
        auto gen = rng::substream(opts.seed, "tsne_jitter");
        std::uniform_real_distribution<double> u(-1e-10, 1e-10);
        for (Eigen::Index i = 0; i < X.rows(); ++i)
            for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) += u(gen);
        D = sq_dists();
    }

    // conditional distributions with per-point bandwidth
    Eigen::MatrixXd P_cond(n, n);
    TsneResult result;
    result.entropy_residual.resize(n);
    Eigen::VectorXd row(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double entropy = calibrate_row(D.row(i), i, log_perp, row);
        result.entropy_residual[i] = std::abs(entropy - log_perp);
        P_cond.row(i) = row;
    }
    Eigen::MatrixXd P = (P_cond + P_cond.transpose()) / (2.0 * static_cast<double>(n));
    P = P.cwiseMax(1e-300);
    P.diagonal().setZero();

    // descent state
    auto gen = rng::substream(opts.seed, "tsne_init");
    std::normal_distribution<double> normal(0.0, 1e-2);
    Eigen::MatrixXd Y(n, 2);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < 2; ++k) Y(i, k) = normal(gen);
    Eigen::MatrixXd inc = Eigen::MatrixXd::Zero(n, 2);
    Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(n, 2);

    result.kl_history.reserve(static_cast<std::size_t>(opts.iters));
    Eigen::MatrixXd num(n, n), Q(n, n), grad(n, 2);
    for (int iter = 0; iter < opts.iters; ++iter) {
        const double exag = iter < opts.exaggeration_iters ? opts.exaggeration : 1.0;
        const double momentum =
            iter < opts.momentum_switch ? opts.momentum_initial : opts.momentum_final;

        const Eigen::VectorXd sq = Y.rowwise().squaredNorm();
        num = (1.0 +
               (sq.replicate(1, n) + sq.transpose().replicate(n, 1) - 2.0 * Y * Y.transpose())
                   .cwiseMax(0.0)
                   .array())
                  .inverse()
                  .matrix();
        num.diagonal().setZero();
        const double z = num.sum();
        Q = (num / z).cwiseMax(1e-12);

        const Eigen::MatrixXd W = ((exag * P - Q).array() * num.array()).matrix();
        const Eigen::VectorXd w_row = W.rowwise().sum();
        grad = 4.0 * (w_row.asDiagonal() * Y - W * Y);

        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index k = 0; k < 2; ++k) {
                const bool same_sign = (grad(i, k) > 0.0) == (inc(i, k) > 0.0);
                gains(i, k) = same_sign ? std::max(0.01, gains(i, k) * 0.8)
                                        : gains(i, k) + 0.2;
            }
        inc = momentum * inc - opts.lr * (gains.array() * grad.array()).matrix();
        Y += inc;
        Y.rowwise() -= Y.colwise().mean();

        // KL against the true (non-exaggerated) P for the updated embedding
        double kl = 0.0;
        {
            const Eigen::VectorXd sq2 = Y.rowwise().squaredNorm();
            Eigen::MatrixXd num2 =
                (1.0 + (sq2.replicate(1, n) + sq2.transpose().replicate(n, 1) -
                        2.0 * Y * Y.transpose())
                           .cwiseMax(0.0)
                           .array())
                    .inverse()
                    .matrix();
            num2.diagonal().setZero();
            const Eigen::MatrixXd Q2 = (num2 / num2.sum()).cwiseMax(1e-12);
            for (Eigen::Index i = 0; i < n; ++i)
                for (Eigen::Index j = 0; j < n; ++j)
                    if (i != j && P(i, j) > 1e-299) kl += P(i, j) * std::log(P(i, j) / Q2(i, j));
        }
        result.kl_history.push_back(kl);
    }
    result.coords = Y;
    return result;
}

void export_embedding(const Eigen::MatrixXd& coords, const std::vector<LatentPoint>& meta,
                      const std::string& path) {
    if (static_cast<std::size_t>(coords.rows()) != meta.size())
        throw std::invalid_argument("export_embedding: coordinate/metadata length mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("export_embedding: cannot open " + path);
    out << "id,visit,x,y,label,prob\n";
    for (std::size_t i = 0; i < meta.size(); ++i) {
        const Eigen::Index r = static_cast<Eigen::Index>(i);
        out << meta[i].patient_id << "," << meta[i].visit << "," << fmt_double(coords(r, 0))
            << "," << fmt_double(coords(r, 1)) << "," << meta[i].label << ","
            << fmt_double(meta[i].prob) << "\n";
    }
}

}  // namespace dualseq::interpret
