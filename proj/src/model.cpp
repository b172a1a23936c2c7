#include "dualseq/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "dualseq/errors.hpp"
#include "dualseq/rng.hpp"

namespace dualseq::model {

namespace {

using nlohmann::json;

constexpr double kClipLo = 1e-7;
constexpr double kClipHi = 1.0 - 1e-7;

double age_norm(const ModelConfig& cfg, const data::StaticInfo& info) {
    return (info.age - cfg.age_mean) / cfg.age_std;
}

// Embedded features plus the elapsed-time channel log(1 + dt).
Eigen::VectorXd with_dt(const Eigen::VectorXd& emb, double dt) {
    Eigen::VectorXd v(emb.size() + 1);
    v << emb, std::log1p(dt);
    return v;
}

}  // namespace

ModelParams make_model(const ModelConfig& cfg, std::uint64_t seed) {
    const ModelShapes& s = cfg.shapes;
    ModelParams m;
    m.cfg = cfg;
    m.input_c.l1 = nn::DenseLayer(s.embed1, s.k_c, nn::Activation::Tanh);
    m.input_c.l2 = nn::DenseLayer(s.embed2, s.embed1, nn::Activation::Tanh);
    m.input_p.l1 = nn::DenseLayer(s.embed1, s.k_p, nn::Activation::Tanh);
    m.input_p.l2 = nn::DenseLayer(s.embed2, s.embed1, nn::Activation::Tanh);
    m.cell_c = recurrent::RnnCell(s.hidden_c, s.embed2 + 1, s.out_c);
    m.cell_p = recurrent::RnnCell(s.hidden_p, s.embed2 + 1, s.out_p);
    m.init_net.l1 = nn::DenseLayer(s.init_hidden, s.embed2 + 2, nn::Activation::Tanh);
    m.init_net.l2 = nn::DenseLayer(s.hidden_c, s.init_hidden, nn::Activation::Tanh);
    m.attn = attention::AttentionBlock(s.out_p, s.attn_window);
    m.classifier.hidden = nn::DenseLayer(s.cls_hidden, s.out_c + s.out_p + 2, nn::Activation::Tanh);
    m.classifier.out = nn::DenseLayer(1, s.cls_hidden, nn::Activation::Sigmoid);

    auto gen = rng::substream(seed, "model_init");
    nn::init_layer(m.input_c.l1, gen);
    nn::init_layer(m.input_c.l2, gen);
    nn::init_layer(m.input_p.l1, gen);
    nn::init_layer(m.input_p.l2, gen);
    recurrent::init_cell(m.cell_c, gen);
    recurrent::init_cell(m.cell_p, gen);
    nn::init_layer(m.init_net.l1, gen);
    nn::init_layer(m.init_net.l2, gen);
    attention::init_block(m.attn, gen);
    nn::init_layer(m.classifier.hidden, gen);
    nn::init_layer(m.classifier.out, gen);

    if (cfg.ablate_clinician) {
        for (auto* layer : {&m.input_c.l1, &m.input_c.l2, &m.init_net.l1, &m.init_net.l2}) {
            layer->weights.setZero();
            layer->bias.setZero();
        }
        m.cell_c = recurrent::RnnCell(s.hidden_c, s.embed2 + 1, s.out_c);
    }
    if (cfg.ablate_patient || !cfg.use_attention)
        m.attn = attention::AttentionBlock(s.out_p, s.attn_window);
    if (cfg.ablate_patient) {
        for (auto* layer : {&m.input_p.l1, &m.input_p.l2}) {
            layer->weights.setZero();
            layer->bias.setZero();
        }
        m.cell_p = recurrent::RnnCell(s.hidden_p, s.embed2 + 1, s.out_p);
    }
    return m;
}

params::ParamRegistry registry(ModelParams& m) {
    const bool fc = m.cfg.ablate_clinician;
    const bool fp = m.cfg.ablate_patient;
    const bool fa = fp || !m.cfg.use_attention;
    params::ParamRegistry reg;
    reg.add_layer("input_c.l1", m.input_c.l1, fc);
    reg.add_layer("input_c.l2", m.input_c.l2, fc);
    reg.add_layer("input_p.l1", m.input_p.l1, fp);
    reg.add_layer("input_p.l2", m.input_p.l2, fp);
    reg.add_matrix("cell_c.W_hx", m.cell_c.W_hx, true, fc);
    reg.add_matrix("cell_c.W_hh", m.cell_c.W_hh, true, fc);
    reg.add_vector("cell_c.b_h", m.cell_c.b_h, false, fc);
    reg.add_matrix("cell_c.W_yh", m.cell_c.W_yh, true, fc);
    reg.add_vector("cell_c.b_y", m.cell_c.b_y, false, fc);
    reg.add_matrix("cell_p.W_hx", m.cell_p.W_hx, true, fp);
    reg.add_matrix("cell_p.W_hh", m.cell_p.W_hh, true, fp);
    reg.add_vector("cell_p.b_h", m.cell_p.b_h, false, fp);
    reg.add_matrix("cell_p.W_yh", m.cell_p.W_yh, true, fp);
    reg.add_vector("cell_p.b_y", m.cell_p.b_y, false, fp);
    reg.add_layer("init_net.l1", m.init_net.l1, fc);
    reg.add_layer("init_net.l2", m.init_net.l2, fc);
    reg.add_matrix("attn.W_Y", m.attn.W_Y, true, fa);
    reg.add_matrix("attn.W_o", m.attn.W_o, true, fa);
    reg.add_vector("attn.w", m.attn.w, true, fa);
    reg.add_matrix("attn.W_r", m.attn.W_r, true, fa);
    reg.add_matrix("attn.W_x", m.attn.W_x, true, fa);
    reg.add_layer("classifier.hidden", m.classifier.hidden, false);
    reg.add_layer("classifier.out", m.classifier.out, false);
    return reg;
}

ModelParams zeros_like(const ModelParams& m) {
    ModelParams z = m;
    auto reg = registry(z);
    reg.unflatten(Eigen::VectorXd::Zero(reg.size()));
    return z;
}

ModelParams ablate(ModelParams m, const std::string& branch) {
    if (branch == "clinician")
        m.cfg.ablate_clinician = true;
    else if (branch == "patient")
        m.cfg.ablate_patient = true;
    else
        throw std::invalid_argument("ablate: unknown branch " + branch);
    // zero and freeze the branch parameters
    ModelParams fresh = make_model(m.cfg, 0);
    if (branch == "clinician") {
        m.input_c = fresh.input_c;
        m.cell_c = fresh.cell_c;
        m.init_net.l1.weights.setZero();
        m.init_net.l1.bias.setZero();
        m.init_net.l2.weights.setZero();
        m.init_net.l2.bias.setZero();
    } else {
        m.input_p = fresh.input_p;
        m.cell_p = fresh.cell_p;
        m.attn = attention::AttentionBlock(m.cfg.shapes.out_p, m.cfg.shapes.attn_window);
    }
    return m;
}

RecordCache forward_record(const ModelParams& m, const data::PatientRecord& record,
                           bool training, std::mt19937_64& rng) {
    const ModelShapes& s = m.cfg.shapes;
    {
        const auto violations = data::validate_record(record, s.k_c, s.k_p);
        if (!violations.empty())
            throw std::invalid_argument("forward_record: invalid record " + record.id + ": " +
                                        violations.front());
    }
    RecordCache c;
    const std::size_t t_p = record.answers.size();
    const std::size_t t_c = record.visits.size();

    // patient branch
    if (!m.cfg.ablate_patient && t_p > 0) {
        c.emb_p_h1.reserve(t_p);
        c.emb_p.reserve(t_p);
        c.rnn_in_p.reserve(t_p);
        for (std::size_t j = 0; j < t_p; ++j) {
            c.emb_p_h1.push_back(nn::dense_forward(m.input_p.l1, record.answers[j].x));
            c.emb_p.push_back(nn::dense_forward(m.input_p.l2, c.emb_p_h1.back()));
            const double dt = j == 0 ? 0.0 : record.answers[j].t - record.answers[j - 1].t;
            c.rnn_in_p.push_back(with_dt(c.emb_p.back(), dt));
        }
        c.trace_p = recurrent::rnn_forward(m.cell_p, c.rnn_in_p,
                                           Eigen::VectorXd::Zero(s.hidden_p));
        if (m.cfg.use_attention) {
            c.o_star.reserve(t_p);
            for (std::size_t j = 0; j < t_p; ++j) {
                const Eigen::MatrixXd Y =
                    attention::window_memory(c.trace_p.outputs, j, s.attn_window);
                const Eigen::RowVectorXd alpha =
                    attention::attention_scores(m.attn, Y, c.trace_p.outputs[j]);
                c.o_star.push_back(
                    attention::attention_apply(m.attn, Y, alpha, c.trace_p.outputs[j]));
            }
        }
    }

    // clinician branch
    if (!m.cfg.ablate_clinician) {
        c.emb_c_h1.reserve(t_c);
        c.emb_c.reserve(t_c);
        c.rnn_in_c.reserve(t_c);
        for (std::size_t i = 0; i < t_c; ++i) {
            c.emb_c_h1.push_back(nn::dense_forward(m.input_c.l1, record.visits[i].x));
            c.emb_c.push_back(nn::dense_forward(m.input_c.l2, c.emb_c_h1.back()));
            const double dt = i == 0 ? 0.0 : record.visits[i].t - record.visits[i - 1].t;
            c.rnn_in_c.push_back(with_dt(c.emb_c.back(), dt));
        }
        c.init_in.resize(s.embed2 + 2);
        c.init_in << c.emb_c.front(), static_cast<double>(record.static_info.sex),
            age_norm(m.cfg, record.static_info);
        c.init_h1 = nn::dense_forward(m.init_net.l1, c.init_in);
        c.h0_c = nn::dense_forward(m.init_net.l2, c.init_h1);
        c.trace_c = recurrent::rnn_forward(m.cell_c, c.rnn_in_c, c.h0_c);
    }

    // merge per visit
    c.answer_idx.reserve(t_c);
    c.merged.reserve(t_c);
    for (std::size_t i = 0; i < t_c; ++i) {
        const auto j_star = data::most_recent_answer_index(record.answers, record.visits[i].t);
        c.answer_idx.push_back(j_star ? static_cast<long>(*j_star) : -1);
        Eigen::VectorXd o_c = Eigen::VectorXd::Zero(s.out_c);
        if (!m.cfg.ablate_clinician) o_c = c.trace_c.outputs[i];
        Eigen::VectorXd o_p = Eigen::VectorXd::Zero(s.out_p);
        if (!m.cfg.ablate_patient && j_star)
            o_p = m.cfg.use_attention ? c.o_star[*j_star] : c.trace_p.outputs[*j_star];
        Eigen::VectorXd merged(s.out_c + s.out_p + 2);
        merged << o_c, o_p, static_cast<double>(record.static_info.sex),
            age_norm(m.cfg, record.static_info);
        c.merged.push_back(std::move(merged));
        auto drop = nn::dropout_apply(c.merged.back(), m.cfg.dropout, rng, training);
        // stored as d(dropped)/d(merged) so backward is a plain product
        if (training && m.cfg.dropout > 0.0)
            c.drop_mask.push_back(drop.mask / (1.0 - m.cfg.dropout));
        else
            c.drop_mask.push_back(drop.mask);
        c.dropped.push_back(std::move(drop.value));
        c.cls_h.push_back(nn::dense_forward(m.classifier.hidden, c.dropped.back()));
        c.yhat.push_back(nn::dense_forward(m.classifier.out, c.cls_h.back())[0]);
    }
    return c;
}

BatchLoss loss(ModelParams& m, const std::vector<const data::PatientRecord*>& batch,
               bool training, std::mt19937_64& rng) {
    if (batch.empty()) throw std::invalid_argument("loss: empty batch");
    BatchLoss out;
    out.caches.reserve(batch.size());
    for (const auto* record : batch) {
        RecordCache c = forward_record(m, *record, training, rng);
        const double inv_t = 1.0 / static_cast<double>(record->visits.size());
        double ce = 0.0;
        for (std::size_t i = 0; i < record->visits.size(); ++i) {
            const double p = std::clamp(c.yhat[i], kClipLo, kClipHi);
            const double y = record->visits[i].y;
            ce += y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
        }
        out.value -= inv_t * ce;
        out.caches.push_back(std::move(c));
    }
    auto reg = registry(m);
    out.value += params::l2_penalty(reg, m.cfg.l2).first;
    if (!std::isfinite(out.value)) throw numeric_error("loss: non-finite value");
    return out;
}

Eigen::VectorXd backward(ModelParams& m, const std::vector<const data::PatientRecord*>& batch,
                         const std::vector<RecordCache>& caches) {
    if (batch.size() != caches.size())
        throw std::invalid_argument("backward: cache/batch size mismatch");
    const ModelShapes& s = m.cfg.shapes;
    ModelParams grads = zeros_like(m);

    for (std::size_t b = 0; b < batch.size(); ++b) {
        const data::PatientRecord& record = *batch[b];
        const RecordCache& c = caches[b];
        const std::size_t t_c = record.visits.size();
        const std::size_t t_p = record.answers.size();
        if (c.yhat.size() != t_c) throw std::runtime_error("backward: stale cache");
        const double inv_t = 1.0 / static_cast<double>(t_c);

        std::vector<Eigen::VectorXd> d_o_c(t_c, Eigen::VectorXd::Zero(s.out_c));
        std::vector<Eigen::VectorXd> d_o_p_sel(t_p, Eigen::VectorXd::Zero(s.out_p));

        for (std::size_t i = 0; i < t_c; ++i) {
            const double p = std::clamp(c.yhat[i], kClipLo, kClipHi);
            const double y = record.visits[i].y;
            double d_p = 0.0;
            if (c.yhat[i] > kClipLo && c.yhat[i] < kClipHi)
                d_p = -inv_t * (y / p - (1.0 - y) / (1.0 - p));
            Eigen::VectorXd dy1(1);
            dy1 << d_p;
            auto g_out = nn::dense_backward(m.classifier.out, c.cls_h[i], dy1);
            grads.classifier.out.weights += g_out.dW;
            grads.classifier.out.bias += g_out.db;
            auto g_hidden = nn::dense_backward(m.classifier.hidden, c.dropped[i], g_out.dx);
            grads.classifier.hidden.weights += g_hidden.dW;
            grads.classifier.hidden.bias += g_hidden.db;
            const Eigen::VectorXd d_merged =
                g_hidden.dx.array() * c.drop_mask[i].array();
            if (!m.cfg.ablate_clinician) d_o_c[i] = d_merged.head(s.out_c);
            if (!m.cfg.ablate_patient && c.answer_idx[i] >= 0)
                d_o_p_sel[static_cast<std::size_t>(c.answer_idx[i])] +=
                    d_merged.segment(s.out_c, s.out_p);
        }

        if (!m.cfg.ablate_clinician) {
            auto g_rnn = recurrent::rnn_backward(m.cell_c, c.rnn_in_c, c.h0_c, c.trace_c, d_o_c);
            grads.cell_c.W_hx += g_rnn.cell.W_hx;
            grads.cell_c.W_hh += g_rnn.cell.W_hh;
            grads.cell_c.b_h += g_rnn.cell.b_h;
            grads.cell_c.W_yh += g_rnn.cell.W_yh;
            grads.cell_c.b_y += g_rnn.cell.b_y;
            // initial-state net, trained through d_h0
            auto g_i2 = nn::dense_backward(m.init_net.l2, c.init_h1, g_rnn.d_h0);
            grads.init_net.l2.weights += g_i2.dW;
            grads.init_net.l2.bias += g_i2.db;
            auto g_i1 = nn::dense_backward(m.init_net.l1, c.init_in, g_i2.dx);
            grads.init_net.l1.weights += g_i1.dW;
            grads.init_net.l1.bias += g_i1.db;
            for (std::size_t i = 0; i < t_c; ++i) {
                Eigen::VectorXd d_emb = g_rnn.d_xs[i].head(s.embed2);
                if (i == 0) d_emb += g_i1.dx.head(s.embed2);
                auto g_l2 = nn::dense_backward(m.input_c.l2, c.emb_c_h1[i], d_emb);
                grads.input_c.l2.weights += g_l2.dW;
                grads.input_c.l2.bias += g_l2.db;
                auto g_l1 = nn::dense_backward(m.input_c.l1, record.visits[i].x, g_l2.dx);
                grads.input_c.l1.weights += g_l1.dW;
                grads.input_c.l1.bias += g_l1.db;
            }
        }

        if (!m.cfg.ablate_patient && t_p > 0) {
            std::vector<Eigen::VectorXd> d_outputs(t_p, Eigen::VectorXd::Zero(s.out_p));
            if (m.cfg.use_attention) {
                for (std::size_t j = 0; j < t_p; ++j) {
                    if (d_o_p_sel[j].isZero(0.0)) continue;
                    const Eigen::MatrixXd Y =
                        attention::window_memory(c.trace_p.outputs, j, s.attn_window);
                    auto g_att = attention::attention_backward(m.attn, Y, c.trace_p.outputs[j],
                                                               d_o_p_sel[j]);
                    grads.attn.W_Y += g_att.block.W_Y;
                    grads.attn.W_o += g_att.block.W_o;
                    grads.attn.w += g_att.block.w;
                    grads.attn.W_r += g_att.block.W_r;
                    grads.attn.W_x += g_att.block.W_x;
                    d_outputs[j] += g_att.d_o_j;
                    for (int col = 0; col < s.attn_window; ++col) {
                        const long src = static_cast<long>(j) - s.attn_window + col;
                        if (src >= 0) d_outputs[static_cast<std::size_t>(src)] += g_att.d_Y.col(col);
                    }
                }
            } else {
                for (std::size_t j = 0; j < t_p; ++j) d_outputs[j] += d_o_p_sel[j];
            }
            auto g_rnn = recurrent::rnn_backward(
                m.cell_p, c.rnn_in_p, Eigen::VectorXd::Zero(s.hidden_p), c.trace_p, d_outputs);
            grads.cell_p.W_hx += g_rnn.cell.W_hx;
            grads.cell_p.W_hh += g_rnn.cell.W_hh;
            grads.cell_p.b_h += g_rnn.cell.b_h;
            grads.cell_p.W_yh += g_rnn.cell.W_yh;
            grads.cell_p.b_y += g_rnn.cell.b_y;
            for (std::size_t j = 0; j < t_p; ++j) {
                const Eigen::VectorXd d_emb = g_rnn.d_xs[j].head(s.embed2);
                auto g_l2 = nn::dense_backward(m.input_p.l2, c.emb_p_h1[j], d_emb);
                grads.input_p.l2.weights += g_l2.dW;
                grads.input_p.l2.bias += g_l2.db;
                auto g_l1 = nn::dense_backward(m.input_p.l1, record.answers[j].x, g_l2.dx);
                grads.input_p.l1.weights += g_l1.dW;
                grads.input_p.l1.bias += g_l1.db;
            }
        }
    }

    auto reg_m = registry(m);
    auto reg_g = registry(grads);
    Eigen::VectorXd flat = reg_g.flatten() + params::l2_penalty(reg_m, m.cfg.l2).second;
    const Eigen::VectorXd frozen = reg_m.frozen_mask();
    flat = flat.array() * (1.0 - frozen.array());
    return flat;
}

namespace {

using EventPairs = std::vector<std::pair<const Eigen::VectorXd*, double>>;

// Minibatch SGD on binary cross entropy with a temporary sigmoid readout.
void train_event_net(nn::Mlp& net, const EventPairs& pairs, int epochs, double lr,
                     std::mt19937_64& rng) {
    constexpr std::size_t kBatch = 20;
    std::vector<std::size_t> order(pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += kBatch) {
            const std::size_t end = std::min(start + kBatch, order.size());
            std::vector<Eigen::MatrixXd> dW(net.layers.size());
            std::vector<Eigen::VectorXd> db(net.layers.size());
            for (std::size_t l = 0; l < net.layers.size(); ++l) {
                dW[l] = Eigen::MatrixXd::Zero(net.layers[l].weights.rows(),
                                              net.layers[l].weights.cols());
                db[l] = Eigen::VectorXd::Zero(net.layers[l].bias.size());
            }
            const double inv_b = 1.0 / static_cast<double>(end - start);
            for (std::size_t idx = start; idx < end; ++idx) {
                const auto& [x, y] = pairs[order[idx]];
                const auto trace = net.forward_trace(*x);
                const double p = std::clamp(trace.back()[0], kClipLo, kClipHi);
                Eigen::VectorXd dy(1);
                dy << -inv_b * (y / p - (1.0 - y) / (1.0 - p));
                auto g = nn::mlp_backward(net, trace, dy);
                for (std::size_t l = 0; l < net.layers.size(); ++l) {
                    dW[l] += g.dW[l];
                    db[l] += g.db[l];
                }
            }
            for (std::size_t l = 0; l < net.layers.size(); ++l) {
                net.layers[l].weights -= lr * dW[l];
                net.layers[l].bias -= lr * db[l];
            }
        }
    }
}

}  // namespace

std::pair<InputNet, InputNet> pretrain_input_nets(const data::Cohort& cohort, int epochs,
                                                  double lr, std::uint64_t seed,
                                                  const ModelShapes& shapes) {
    // Per-event pairs: clinician events against their own label, patient
    // answers against the nearest following visit's label (answers after the
    // last visit are dropped).
    EventPairs pairs_c, pairs_p;
    for (const auto& r : cohort.records) {
        for (const auto& v : r.visits) pairs_c.push_back({&v.x, static_cast<double>(v.y)});
        for (const auto& a : r.answers) {
            auto it = std::lower_bound(r.visits.begin(), r.visits.end(), a.t,
                                       [](const data::ClinicianVisit& v, double t) {
                                           return v.t < t;
                                       });
            if (it == r.visits.end()) continue;
            pairs_p.push_back({&a.x, static_cast<double>(it->y)});
        }
    }
    if (pairs_c.empty())
        throw std::runtime_error("pretrain_input_nets: cohort has no labeled visits");

    auto gen_init = rng::substream(seed, "pretrain_init");
    nn::Mlp net_c, net_p;
    net_c.layers = {nn::DenseLayer(shapes.embed1, shapes.k_c, nn::Activation::Tanh),
                    nn::DenseLayer(shapes.embed2, shapes.embed1, nn::Activation::Tanh),
                    nn::DenseLayer(1, shapes.embed2, nn::Activation::Sigmoid)};
    net_p.layers = {nn::DenseLayer(shapes.embed1, shapes.k_p, nn::Activation::Tanh),
                    nn::DenseLayer(shapes.embed2, shapes.embed1, nn::Activation::Tanh),
                    nn::DenseLayer(1, shapes.embed2, nn::Activation::Sigmoid)};
    for (auto& layer : net_c.layers) nn::init_layer(layer, gen_init);
    for (auto& layer : net_p.layers) nn::init_layer(layer, gen_init);

    auto gen_c = rng::substream(seed, "pretrain_shuffle_c");
    auto gen_p = rng::substream(seed, "pretrain_shuffle_p");
    train_event_net(net_c, pairs_c, epochs, lr, gen_c);
    if (!pairs_p.empty()) train_event_net(net_p, pairs_p, epochs, lr, gen_p);

    InputNet input_c{net_c.layers[0], net_c.layers[1]};
    InputNet input_p{net_p.layers[0], net_p.layers[1]};
    return {std::move(input_c), std::move(input_p)};
}

void save_checkpoint(ModelParams& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    const ModelShapes& s = m.cfg.shapes;
    json header;
    header["format"] = "dualseq-checkpoint-v1";
    header["shapes"] = {{"k_c", s.k_c},           {"k_p", s.k_p},
                        {"embed1", s.embed1},     {"embed2", s.embed2},
                        {"hidden_c", s.hidden_c}, {"hidden_p", s.hidden_p},
                        {"out_c", s.out_c},       {"out_p", s.out_p},
                        {"init_hidden", s.init_hidden}, {"cls_hidden", s.cls_hidden},
                        {"attn_window", s.attn_window}};
    header["use_attention"] = m.cfg.use_attention;
    header["ablate_clinician"] = m.cfg.ablate_clinician;
    header["ablate_patient"] = m.cfg.ablate_patient;
    header["dropout"] = m.cfg.dropout;
    header["l2"] = m.cfg.l2;
    header["age_mean"] = m.cfg.age_mean;
    header["age_std"] = m.cfg.age_std;
    out << header.dump() << "\n";
    auto reg = registry(m);
    char buf[40];
    for (const auto& e : reg.entries()) {
        out << e.name;
        for (Eigen::Index i = 0; i < e.size; ++i) {
            std::snprintf(buf, sizeof(buf), " %.17g", e.data[i]);
            out << buf;
        }
        out << "\n";
    }
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load_checkpoint: empty file");
    const json header = json::parse(line);
    if (header.value("format", "") != "dualseq-checkpoint-v1")
        throw std::runtime_error("load_checkpoint: unknown format");
    ModelConfig cfg;
    const json& s = header.at("shapes");
    cfg.shapes.k_c = s.at("k_c").get<int>();
    cfg.shapes.k_p = s.at("k_p").get<int>();
    cfg.shapes.embed1 = s.at("embed1").get<int>();
    cfg.shapes.embed2 = s.at("embed2").get<int>();
    cfg.shapes.hidden_c = s.at("hidden_c").get<int>();
    cfg.shapes.hidden_p = s.at("hidden_p").get<int>();
    cfg.shapes.out_c = s.at("out_c").get<int>();
    cfg.shapes.out_p = s.at("out_p").get<int>();
    cfg.shapes.init_hidden = s.at("init_hidden").get<int>();
    cfg.shapes.cls_hidden = s.at("cls_hidden").get<int>();
    cfg.shapes.attn_window = s.at("attn_window").get<int>();
    cfg.use_attention = header.at("use_attention").get<bool>();
    cfg.ablate_clinician = header.at("ablate_clinician").get<bool>();
    cfg.ablate_patient = header.at("ablate_patient").get<bool>();
    cfg.dropout = header.at("dropout").get<double>();
    cfg.l2 = header.at("l2").get<double>();
    cfg.age_mean = header.at("age_mean").get<double>();
    cfg.age_std = header.at("age_std").get<double>();
    ModelParams m = make_model(cfg, 0);
    auto reg = registry(m);
    for (const auto& e : reg.entries()) {
        if (!std::getline(in, line))
            throw std::runtime_error("load_checkpoint: truncated file at " + e.name);
        std::istringstream ss(line);
        std::string name;
        ss >> name;
        if (name != e.name)
            throw std::runtime_error("load_checkpoint: expected " + e.name + ", got " + name);
        for (Eigen::Index i = 0; i < e.size; ++i)
            if (!(ss >> e.data[i]))
                throw std::runtime_error("load_checkpoint: short tensor " + e.name);
    }
    return m;
}

}  // namespace dualseq::model
