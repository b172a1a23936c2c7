#pragma once

#include <random>

#include "dualseq/data.hpp"
#include "dualseq/model.hpp"

namespace testutil {

inline dualseq::data::PatientRecord random_record(std::mt19937_64& rng, int k_c, int k_p, int t_c,
                                                  int t_p) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> gap(0.5, 10.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    dualseq::data::PatientRecord r;
    r.id = "r" + std::to_string(rng() % 100000);
    r.static_info.sex = unit(rng) < 0.5 ? 1 : 0;
    r.static_info.age = 25.0 + 40.0 * unit(rng);
    double t = 0.0;
    for (int i = 0; i < t_c; ++i) {
        dualseq::data::ClinicianVisit v;
        v.t = t;
        v.x = Eigen::VectorXd::NullaryExpr(k_c, [&] { return normal(rng); });
        v.y = unit(rng) < 0.3 ? 1 : 0;
        r.visits.push_back(std::move(v));
        t += gap(rng);
    }
    t = 0.3;
    for (int j = 0; j < t_p; ++j) {
        dualseq::data::PatientAnswer a;
        a.t = t;
        a.x = Eigen::VectorXd::NullaryExpr(k_p, [&] { return normal(rng); });
        r.answers.push_back(std::move(a));
        t += gap(rng);
    }
    return r;
}

// Small shapes that keep finite-difference sweeps fast.
inline dualseq::model::ModelConfig small_config(int attn_window = 1) {
    dualseq::model::ModelConfig cfg;
    cfg.shapes.k_c = 4;
    cfg.shapes.k_p = 3;
    cfg.shapes.embed1 = 4;
    cfg.shapes.embed2 = 5;
    cfg.shapes.hidden_c = 3;
    cfg.shapes.hidden_p = 2;
    cfg.shapes.out_c = 3;
    cfg.shapes.out_p = 2;
    cfg.shapes.init_hidden = 3;
    cfg.shapes.cls_hidden = 4;
    cfg.shapes.attn_window = attn_window;
    cfg.age_mean = 43.32;
    cfg.age_std = 12.6;
    return cfg;
}

}  // namespace testutil
