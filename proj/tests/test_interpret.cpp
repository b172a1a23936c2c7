#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "dualseq/interpret.hpp"
#include "helpers.hpp"

using namespace dualseq;

namespace {

std::vector<std::string> names(const std::string& prefix, int n) {
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
    return out;
}

Eigen::MatrixXd two_gaussians(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd pts(n, 5);
    for (int i = 0; i < n; ++i) {
        const double center = i < n / 2 ? -6.0 : 6.0;
        for (int d = 0; d < 5; ++d) pts(i, d) = center + normal(rng);
    }
    return pts;
}

// one oracle-initialized assignment step; enough to test cluster separation
double cluster_agreement(const Eigen::MatrixXd& coords, int n) {
    Eigen::RowVector2d m0 = coords.topRows(n / 2).colwise().mean();
    Eigen::RowVector2d m1 = coords.bottomRows(n - n / 2).colwise().mean();
    int hits = 0;
    for (int i = 0; i < n; ++i) {
        const bool near0 = (coords.row(i) - m0).norm() < (coords.row(i) - m1).norm();
        hits += static_cast<int>(near0 == (i < n / 2));
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace

TEST_CASE("feature relevance normalizes, sorts and validates") {
    auto m = model::make_model(testutil::small_config(), 1);
    m.input_c.l1.weights.setZero();
    m.input_c.l1.weights.col(0).setConstant(2.0);  // norm 4 over 4 rows
    m.input_c.l1.weights.col(1).setConstant(1.0);  // norm 2
    m.input_c.l1.weights(0, 2) = 1.0;              // norm 1
    m.input_c.l1.weights(1, 3) = 0.5;              // norm 0.5

    const auto scores = interpret::feature_relevance(m, "clinician", names("f", 4));
    REQUIRE(scores.size() == 4);
    CHECK(scores[0].feature == "f0");
    CHECK(scores[0].score == 1.0);
    CHECK(scores[1].score == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(scores[2].score == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(scores[3].score == doctest::Approx(0.125).epsilon(1e-12));

    // scale invariance of the whole matrix
    m.input_c.l1.weights *= 7.5;
    const auto scaled = interpret::feature_relevance(m, "clinician", names("f", 4));
    for (int i = 0; i < 4; ++i) CHECK(scaled[i].score == doctest::Approx(scores[i].score).epsilon(1e-12));

    CHECK_THROWS_AS(interpret::feature_relevance(m, "nurse", names("f", 4)),
                    std::invalid_argument);
    CHECK_THROWS_AS(interpret::feature_relevance(m, "clinician", names("f", 3)),
                    std::invalid_argument);
    m.input_c.l1.weights.setZero();
    CHECK_THROWS_AS(interpret::feature_relevance(m, "clinician", names("f", 4)),
                    std::runtime_error);
}

TEST_CASE("relevance CSV layout") {
    std::vector<interpret::FeatureScore> scores = {{"alpha", 1.0}, {"beta", 0.25}};
    const std::string path = "relevance.tmp";
    interpret::write_relevance_csv(scores, path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "rank,score,feature");
    std::getline(in, line);
    CHECK(line.rfind("1,", 0) == 0);
    CHECK(line.find("alpha") != std::string::npos);
    std::getline(in, line);
    CHECK(line.rfind("2,", 0) == 0);
    std::remove(path.c_str());
}

TEST_CASE("latent points: one per visit, deterministic") {
    std::mt19937_64 rng(2);
    data::Cohort cohort;
    cohort.k_c = 4;
    cohort.k_p = 3;
    cohort.age_mean = 43.32;
    cohort.age_std = 12.6;
    std::size_t visits = 0;
    for (int i = 0; i < 6; ++i) {
        auto r = testutil::random_record(rng, 4, 3, 1 + int(rng() % 4), 2);
        visits += r.visits.size();
        cohort.records.push_back(std::move(r));
    }
    const auto m = model::make_model(testutil::small_config(), 5);
    const auto pts = interpret::latent_points(m, cohort);
    REQUIRE(pts.size() == visits);
    for (const auto& p : pts) {
        CHECK(p.prob > 0.0);
        CHECK(p.prob < 1.0);
        CHECK(p.merged.size() == 3 + 2 + 2);  // o_c, o_p*, [sex, age]
    }
    CHECK(pts[0].patient_id == cohort.records[0].id);
    CHECK(pts[0].visit == 0);
    const auto again = interpret::latent_points(m, cohort);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        CHECK(pts[i].merged == again[i].merged);
        CHECK(pts[i].prob == again[i].prob);
    }
}

TEST_CASE("tsne calibrates the bandwidths and descends the KL") {
    std::mt19937_64 rng(3);
    const int n = 80;
    const auto pts = two_gaussians(n, rng);
    interpret::TsneOptions opts;
    opts.perplexity = 15.0;
    opts.lr = 10.0;
    opts.iters = 400;
    opts.seed = 4;
    const auto res = interpret::tsne(pts, opts);
    REQUIRE(res.coords.rows() == n);
    REQUIRE(res.coords.cols() == 2);
    REQUIRE(static_cast<int>(res.kl_history.size()) == opts.iters);
    CHECK(res.entropy_residual.maxCoeff() < 1e-5);
    for (const double kl : res.kl_history) {
        CHECK(std::isfinite(kl));
        CHECK(kl >= 0.0);
    }
    // after early exaggeration and the momentum switch, the KL must not climb
    for (std::size_t i = res.kl_history.size() - 100; i < res.kl_history.size(); ++i)
        CHECK(res.kl_history[i] <= res.kl_history[i - 1] + 1e-3);
    CHECK(cluster_agreement(res.coords, n) >= 0.95);

    const auto again = interpret::tsne(pts, opts);
    CHECK(res.coords == again.coords);
}

TEST_CASE("tsne input validation") {
    interpret::TsneOptions opts;
    CHECK_THROWS_AS(interpret::tsne(Eigen::MatrixXd::Zero(3, 2), opts), std::invalid_argument);
    Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(5, 2);
    bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(interpret::tsne(bad, opts), std::invalid_argument);
}

TEST_CASE("embedding CSV round trips the coordinates") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int n = 7;
    Eigen::MatrixXd coords = Eigen::MatrixXd::NullaryExpr(n, 2, [&] { return normal(rng); });
    std::vector<interpret::LatentPoint> meta(n);
    for (int i = 0; i < n; ++i) {
        meta[i].patient_id = "p" + std::to_string(i);
        meta[i].visit = static_cast<std::size_t>(i % 3);
        meta[i].label = i % 2;
        meta[i].prob = 0.1 * (i + 1);
    }
    const std::string path = "embedding.tmp";
    interpret::export_embedding(coords, meta, path);

    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "id,visit,x,y,label,prob");
    int rows = 0;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string id, visit, x, y, label, prob;
        std::getline(ss, id, ',');
        std::getline(ss, visit, ',');
        std::getline(ss, x, ',');
        std::getline(ss, y, ',');
        std::getline(ss, label, ',');
        std::getline(ss, prob, ',');
        CHECK(id == meta[rows].patient_id);
        CHECK(std::stoul(visit) == meta[rows].visit);
        CHECK(std::stod(x) == coords(rows, 0));  // %.17g is lossless
        CHECK(std::stod(y) == coords(rows, 1));
        CHECK(std::stoi(label) == meta[rows].label);
        ++rows;
    }
    CHECK(rows == n);
    std::remove(path.c_str());

    meta.pop_back();
    CHECK_THROWS_AS(interpret::export_embedding(coords, meta, path), std::invalid_argument);
}
