// dualseq command-line surface: gen / pretrain / train / evaluate / relevance
// / embed. All randomness flows from --seed through named sub-streams, so
// every command is reproducible byte for byte.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dualseq/config.hpp"
#include "dualseq/data.hpp"
#include "dualseq/errors.hpp"
#include "dualseq/interpret.hpp"
#include "dualseq/model.hpp"
#include "dualseq/synth.hpp"
#include "dualseq/train.hpp"

namespace {

using namespace dualseq;

struct Global {
    std::string config_path;
    std::uint64_t seed = 0;
    std::string out = ".";
};

config::Config load_config(const Global& g) {
    if (g.config_path.empty()) return {};
    return config::Config::load(g.config_path);
}

std::string out_path(const Global& g, const std::string& name) {
    std::filesystem::create_directories(g.out);
    return (std::filesystem::path(g.out) / name).string();
}

synth::SynthConfig synth_config(const config::Config& c, std::uint64_t seed) {
    synth::SynthConfig s;
    s.n_patients = c.get_int("synth", "n_patients", s.n_patients);
    s.k_c = c.get_int("synth", "k_c", s.k_c);
    s.k_p = c.get_int("synth", "k_p", s.k_p);
    s.n_signal_c = c.get_int("synth", "n_signal_c", s.n_signal_c);
    s.n_signal_p = c.get_int("synth", "n_signal_p", s.n_signal_p);
    s.t_c_mean = c.get_double("synth", "t_c_mean", s.t_c_mean);
    s.t_c_sigma = c.get_double("synth", "t_c_sigma", s.t_c_sigma);
    s.t_c_min = c.get_int("synth", "t_c_min", s.t_c_min);
    s.t_c_max = c.get_int("synth", "t_c_max", s.t_c_max);
    s.t_p_mean = c.get_double("synth", "t_p_mean", s.t_p_mean);
    s.t_p_sigma = c.get_double("synth", "t_p_sigma", s.t_p_sigma);
    s.t_p_min = c.get_int("synth", "t_p_min", s.t_p_min);
    s.t_p_max = c.get_int("synth", "t_p_max", s.t_p_max);
    s.visit_gap_mean = c.get_double("synth", "visit_gap_mean", s.visit_gap_mean);
    s.answer_gap_mean = c.get_double("synth", "answer_gap_mean", s.answer_gap_mean);
    s.rho = c.get_double("synth", "rho", s.rho);
    s.noise_c = c.get_double("synth", "noise_c", s.noise_c);
    s.noise_p = c.get_double("synth", "noise_p", s.noise_p);
    s.w_level = c.get_double("synth", "w_level", s.w_level);
    s.w_delta = c.get_double("synth", "w_delta", s.w_delta);
    s.positive_rate = c.get_double("synth", "positive_rate", s.positive_rate);
    s.seed = seed;
    return s;
}

model::ModelShapes model_shapes(const config::Config& c, const data::Cohort& cohort) {
    model::ModelShapes s;
    s.k_c = cohort.k_c;
    s.k_p = cohort.k_p;
    s.embed1 = c.get_int("model", "embed1", s.embed1);
    s.embed2 = c.get_int("model", "embed2", s.embed2);
    s.hidden_c = c.get_int("model", "hidden_c", s.hidden_c);
    s.hidden_p = c.get_int("model", "hidden_p", s.hidden_p);
    s.out_c = c.get_int("model", "hidden_c", s.out_c);
    s.out_p = c.get_int("model", "hidden_p", s.out_p);
    s.init_hidden = c.get_int("model", "init_hidden", s.init_hidden);
    s.cls_hidden = c.get_int("model", "cls_hidden", s.cls_hidden);
    s.attn_window = c.get_int("model", "attn_window", s.attn_window);
    return s;
}

model::ModelConfig model_config(const config::Config& c, const data::Cohort& cohort) {
    model::ModelConfig m;
    m.shapes = model_shapes(c, cohort);
    m.dropout = c.get_double("model", "dropout", m.dropout);
    m.l2 = c.get_double("train", "l2", m.l2);
    m.age_mean = cohort.age_mean;
    m.age_std = cohort.age_std;
    return m;
}

train::TrainConfig train_config(const config::Config& c, std::uint64_t seed) {
    train::TrainConfig t;
    t.lr = c.get_double("train", "lr", t.lr);
    t.epochs = c.get_int("train", "epochs", t.epochs);
    t.batch_size = c.get_int("train", "batch_size", t.batch_size);
    t.l2 = c.get_double("train", "l2", t.l2);
    t.dropout = c.get_double("model", "dropout", t.dropout);
    t.k_folds = c.get_int("train", "k_folds", t.k_folds);
    t.train_fraction = c.get_double("train", "train_fraction", t.train_fraction);
    t.pretrain_epochs = c.get_int("train", "pretrain_epochs", t.pretrain_epochs);
    t.pretrain_lr = c.get_double("train", "pretrain_lr", t.pretrain_lr);
    t.seed = seed;
    return t;
}

void write_loss_csv(const std::vector<double>& history, const std::string& path,
                    const std::string& header = "epoch,loss") {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << header << "\n";
    for (std::size_t i = 0; i < history.size(); ++i) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", history[i]);
        out << (i + 1) << "," << buf << "\n";
    }
}

int run(int argc, char** argv) {
    CLI::App app{"Dual-RNN classifier for paired asynchronous event sequences"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    Global g;
    app.add_option("--config", g.config_path, "configuration file (flat key=value sections)");
    app.add_option("--seed", g.seed, "master seed; all randomness derives from it");
    app.add_option("--out", g.out, "output directory (created if absent)");

    // gen
    auto* gen = app.add_subcommand("gen", "generate a synthetic cohort (JSONL + latents)");
    // pretrain
    auto* pretrain =
        app.add_subcommand("pretrain", "pretrain the input nets; writes pretrained.ckpt");
    std::string pre_cohort;
    pretrain->add_option("--cohort", pre_cohort, "cohort JSONL")->required();
    // train
    auto* tr = app.add_subcommand("train", "train on the full cohort; writes model.ckpt");
    std::string tr_cohort, tr_checkpoint;
    tr->add_option("--cohort", tr_cohort, "cohort JSONL")->required();
    tr->add_option("--checkpoint", tr_checkpoint, "warm start from a checkpoint");
    bool tr_no_attention = false;
    tr->add_flag("--no-attention", tr_no_attention, "disable the attention transform");
    // evaluate
    auto* ev = app.add_subcommand("evaluate", "cross-validated report for one model family");
    std::string ev_cohort, ev_ablate, ev_baseline;
    int ev_attention = 1;
    bool ev_no_attention = false, ev_parallel = false;
    ev->add_option("--cohort", ev_cohort, "cohort JSONL")->required();
    auto* opt_attn = ev->add_option("--attention", ev_attention, "attention window L");
    auto* opt_noattn = ev->add_flag("--no-attention", ev_no_attention, "plain dual-RNN model");
    auto* opt_ablate = ev->add_option("--ablate", ev_ablate, "drop one branch")
                           ->check(CLI::IsMember({"clinician", "patient"}));
    auto* opt_baseline = ev->add_option("--baseline", ev_baseline, "non-sequential baseline")
                             ->check(CLI::IsMember({"logreg", "nn"}));
    opt_attn->excludes(opt_noattn)->excludes(opt_ablate)->excludes(opt_baseline);
    opt_noattn->excludes(opt_ablate)->excludes(opt_baseline);
    opt_ablate->excludes(opt_baseline);
    ev->add_flag("--parallel-folds", ev_parallel, "run folds concurrently (same results)");
    // relevance
    auto* rel = app.add_subcommand("relevance", "first-layer feature relevance ranking");
    std::string rel_cohort, rel_checkpoint, rel_source = "clinician";
    rel->add_option("--cohort", rel_cohort, "cohort JSONL (feature names)")->required();
    rel->add_option("--checkpoint", rel_checkpoint, "trained model checkpoint")->required();
    rel->add_option("--source", rel_source, "clinician or patient")
        ->check(CLI::IsMember({"clinician", "patient"}));
    // embed
    auto* emb = app.add_subcommand("embed", "t-SNE embedding of the merged latent vectors");
    std::string emb_cohort, emb_checkpoint;
    emb->add_option("--cohort", emb_cohort, "cohort JSONL")->required();
    emb->add_option("--checkpoint", emb_checkpoint, "trained model checkpoint")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 64;
    }

    const config::Config cfg = load_config(g);

    if (gen->parsed()) {
        const auto generated = synth::generate_cohort(synth_config(cfg, g.seed));
        data::write_cohort(generated.cohort, out_path(g, "cohort.jsonl"));
        synth::write_latents(generated.latents, out_path(g, "latents.jsonl"));
        std::cout << "wrote " << generated.cohort.records.size() << " patients to " << g.out
                  << "\n";
    } else if (pretrain->parsed()) {
        const auto cohort = data::read_cohort(pre_cohort);
        const auto tcfg = train_config(cfg, g.seed);
        auto m = model::make_model(model_config(cfg, cohort), g.seed);
        auto nets = model::pretrain_input_nets(cohort, tcfg.pretrain_epochs, tcfg.pretrain_lr,
                                               g.seed, m.cfg.shapes);
        m.input_c = nets.first;
        m.input_p = nets.second;
        model::save_checkpoint(m, out_path(g, "pretrained.ckpt"));
        std::cout << "wrote pretrained.ckpt\n";
    } else if (tr->parsed()) {
        const auto cohort = data::read_cohort(tr_cohort);
        const auto tcfg = train_config(cfg, g.seed);
        model::ModelParams m = tr_checkpoint.empty()
                                   ? model::make_model(model_config(cfg, cohort), g.seed)
                                   : model::load_checkpoint(tr_checkpoint);
        if (tr_no_attention) {
            m.cfg.use_attention = false;
            m = model::make_model(m.cfg, g.seed);  // re-init so unused attention stays zero
        }
        std::vector<std::size_t> all(cohort.records.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        const auto result = train::train_model(m, cohort, all, tcfg);
        model::save_checkpoint(m, out_path(g, "model.ckpt"));
        write_loss_csv(result.loss_history, out_path(g, "loss_history.csv"));
        std::cout << "final epoch loss " << result.loss_history.back() << "\n";
    } else if (ev->parsed()) {
        const auto cohort = data::read_cohort(ev_cohort);
        auto tcfg = train_config(cfg, g.seed);
        train::Variant variant = train::Variant::Attention;
        if (ev_no_attention)
            variant = train::Variant::NoAttention;
        else if (ev_ablate == "clinician")
            variant = train::Variant::AblateClinician;
        else if (ev_ablate == "patient")
            variant = train::Variant::AblatePatient;
        else if (ev_baseline == "logreg")
            variant = train::Variant::LogReg;
        else if (ev_baseline == "nn")
            variant = train::Variant::Ffnn;
        train::EvalOptions opts;
        opts.attn_window = ev_attention;
        opts.parallel_folds = ev_parallel;
        const auto report = train::stratified_report(variant, cohort, tcfg, opts);
        train::write_recall_report_csv({{train::to_string(variant), report}},
                                       out_path(g, "recall_report.csv"));
        train::write_metrics_report_csv(report, out_path(g, "metrics_report.csv"));
        std::cout << "wrote recall_report.csv and metrics_report.csv\n";
    } else if (rel->parsed()) {
        const auto cohort = data::read_cohort(rel_cohort);
        auto m = model::load_checkpoint(rel_checkpoint);
        const auto& names =
            rel_source == "clinician" ? cohort.feature_names_c : cohort.feature_names_p;
        const auto scores = interpret::feature_relevance(m, rel_source, names);
        interpret::write_relevance_csv(scores, out_path(g, "relevance.csv"));
        std::cout << "wrote relevance.csv (" << scores.size() << " features)\n";
    } else if (emb->parsed()) {
        const auto cohort = data::read_cohort(emb_cohort);
        auto m = model::load_checkpoint(emb_checkpoint);
        const auto points = interpret::latent_points(m, cohort);
        if (points.empty()) throw std::invalid_argument("embed: cohort has no visits");
        Eigen::MatrixXd X(points.size(), points.front().merged.size());
        for (std::size_t i = 0; i < points.size(); ++i)
            X.row(static_cast<Eigen::Index>(i)) = points[i].merged.transpose();
        interpret::TsneOptions opts;
        opts.perplexity = cfg.get_double("tsne", "perplexity", opts.perplexity);
        opts.lr = cfg.get_double("tsne", "lr", opts.lr);
        opts.iters = cfg.get_int("tsne", "iters", opts.iters);
        opts.seed = g.seed;
        const auto result = interpret::tsne(X, opts);
        interpret::export_embedding(result.coords, points, out_path(g, "embedding.csv"));
        write_loss_csv(result.kl_history, out_path(g, "kl_history.csv"), "iter,kl");
        std::cout << "wrote embedding.csv (" << points.size() << " points), final KL "
                  << result.kl_history.back() << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const numeric_error& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
