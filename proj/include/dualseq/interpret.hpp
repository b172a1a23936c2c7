#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "dualseq/data.hpp"
#include "dualseq/model.hpp"

namespace dualseq::interpret {

struct FeatureScore {
    std::string feature;
    double score = 0.0;  // in [0,1], max exactly 1
};

// Per input feature, the L2 norm of its column in the first layer of the
// input dimensionality-reduction net, normalized by the maximum. Sorted
// descending.
std::vector<FeatureScore> feature_relevance(const model::ModelParams& m,
                                            const std::string& source,
                                            const std::vector<std::string>& feature_names);

void write_relevance_csv(const std::vector<FeatureScore>& scores, const std::string& path);

struct LatentPoint {
    Eigen::VectorXd merged;  // [o_c ; o_p* ; x_s]
    int label = 0;
    double prob = 0.0;
    std::string patient_id;
    std::size_t visit = 0;
};

// One point per visit, dropout disabled.
std::vector<LatentPoint> latent_points(const model::ModelParams& m, const data::Cohort& cohort);

struct TsneOptions {
    double perplexity = 100.0;
    double lr = 10.0;
    int iters = 1000;
    std::uint64_t seed = 0;
    double exaggeration = 12.0;
    int exaggeration_iters = 250;
    double momentum_initial = 0.5;
    double momentum_final = 0.8;
    int momentum_switch = 250;
};

struct TsneResult {
    Eigen::MatrixXd coords;          // n x 2
    std::vector<double> kl_history;  // per iteration, against the true P
    Eigen::VectorXd entropy_residual;  // |H_i - log(perplexity)| per point
};

// Exact O(n^2) t-SNE with per-point bandwidth bisection, early exaggeration
// and the classic momentum/gain schedule.
TsneResult tsne(const Eigen::MatrixXd& points, const TsneOptions& opts);

// CSV: id,visit,x,y,label,prob
void export_embedding(const Eigen::MatrixXd& coords, const std::vector<LatentPoint>& meta,
                      const std::string& path);

}  // namespace dualseq::interpret
