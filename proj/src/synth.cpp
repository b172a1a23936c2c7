#include "dualseq/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "dualseq/rng.hpp"

namespace dualseq::synth {

namespace {

using nlohmann::json;

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_array(const std::vector<double>& v) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += fmt_double(v[i]);
    }
    return out + "]";
}

int sample_length(std::mt19937_64& rng, double mean, double sigma, int lo, int hi) {
    const double mu = std::log(mean) - 0.5 * sigma * sigma;
    std::normal_distribution<double> n(mu, sigma);
    const int len = static_cast<int>(std::lround(std::exp(n(rng))));
    return std::clamp(len, lo, hi);
}

// delta between the last two answer latents at or before t, zero when history
// is shorter than two answers
double answer_delta(const data::PatientRecord& record, const std::vector<double>& risk_answers,
                    double t) {
    const auto j = data::most_recent_answer_index(record.answers, t);
    if (!j || *j == 0) return 0.0;
    return risk_answers[*j] - risk_answers[*j - 1];
}

}  // namespace

void validate(const SynthConfig& cfg) {
    if (cfg.n_patients < 1) throw std::invalid_argument("synth: n_patients must be >= 1");
    if (cfg.k_c < 2 || cfg.k_p < 2) throw std::invalid_argument("synth: widths must be >= 2");
    if (cfg.rho <= 0.0 || cfg.rho >= 1.0) throw std::invalid_argument("synth: rho must be in (0,1)");
    if (cfg.n_signal_c < 1 || cfg.n_signal_c > cfg.k_c)
        throw std::invalid_argument("synth: n_signal_c out of range");
    if (cfg.n_signal_p < 1 || cfg.n_signal_p > cfg.k_p)
        throw std::invalid_argument("synth: n_signal_p out of range");
    if (cfg.positive_rate <= 0.0 || cfg.positive_rate >= 1.0)
        throw std::invalid_argument("synth: positive_rate must be in (0,1)");
    if (cfg.t_c_min < 1 || cfg.t_p_min < 0)
        throw std::invalid_argument("synth: length minima out of range");
}

double planted_score(const SynthConfig& cfg, const data::PatientRecord& record,
                     const RecordLatents& latents, std::size_t visit) {
    if (latents.eps.size() != record.visits.size())
        throw std::invalid_argument("planted_score: latents do not match record");
    const double level = latents.risk_visits.at(visit);
    const double delta = answer_delta(record, latents.risk_answers, record.visits[visit].t);
    return cfg.w_level * level + cfg.w_delta * delta + latents.eps[visit];
}

std::vector<int> planted_oracle(const data::PatientRecord& record, const SynthConfig& cfg,
                                const RecordLatents& latents, double tau) {
    std::vector<int> labels(record.visits.size());
    for (std::size_t i = 0; i < record.visits.size(); ++i)
        labels[i] = planted_score(cfg, record, latents, i) > tau ? 1 : 0;
    return labels;
}

GeneratedCohort generate_cohort(const SynthConfig& cfg) {
    validate(cfg);
    GeneratedCohort out;
    data::Cohort& cohort = out.cohort;
    cohort.k_c = cfg.k_c;
    cohort.k_p = cfg.k_p;
    for (int f = 0; f < cfg.k_c; ++f)
        cohort.feature_names_c.push_back(
            (f < cfg.n_signal_c ? "c_signal_" : "c_noise_") + std::to_string(f));
    for (int f = 0; f < cfg.k_p; ++f)
        cohort.feature_names_p.push_back(
            (f < cfg.n_signal_p ? "p_signal_" : "p_noise_") + std::to_string(f));

    // cohort-wide affine coefficients for the signal features
    auto coeff_rng = rng::substream(cfg.seed, "synth_coeffs");
    std::uniform_real_distribution<double> coeff_u(0.8, 1.2);
    std::vector<double> a_c(cfg.n_signal_c), a_p(cfg.n_signal_p);
    for (auto& a : a_c) a = coeff_u(coeff_rng);
    for (auto& a : a_p) a = coeff_u(coeff_rng);

    std::vector<std::vector<double>> base_scores(cfg.n_patients);
    std::vector<std::vector<double>> eps_raw(cfg.n_patients);

    for (int n = 0; n < cfg.n_patients; ++n) {
        auto gen = rng::substream(cfg.seed, "synth_patient", static_cast<std::uint64_t>(n));
        std::normal_distribution<double> normal(0.0, 1.0);
        std::uniform_real_distribution<double> unit(0.0, 1.0);

        data::PatientRecord r;
        char idbuf[16];
        std::snprintf(idbuf, sizeof(idbuf), "p%05d", n);
        r.id = idbuf;

        const int t_c = sample_length(gen, cfg.t_c_mean, cfg.t_c_sigma, cfg.t_c_min, cfg.t_c_max);
        const int t_p = sample_length(gen, cfg.t_p_mean, cfg.t_p_sigma, cfg.t_p_min, cfg.t_p_max);

        std::exponential_distribution<double> visit_gap(1.0 / cfg.visit_gap_mean);
        std::exponential_distribution<double> answer_gap(1.0 / cfg.answer_gap_mean);
        double t = 0.0;
        for (int i = 0; i < t_c; ++i) {
            data::ClinicianVisit v;
            v.t = t;
            r.visits.push_back(std::move(v));
            t += visit_gap(gen);
        }
        t = answer_gap(gen);
        for (int j = 0; j < t_p; ++j) {
            data::PatientAnswer a;
            a.t = t;
            r.answers.push_back(std::move(a));
            t += answer_gap(gen);
        }

        r.static_info.sex = unit(gen) < 0.647 ? 1 : 0;
        r.static_info.age = std::max(18.0, 43.32 + 12.6 * normal(gen));

        // latent risk over the merged event timeline: AR(1) with decay rho^dt
        struct Event {
            double t;
            bool is_visit;
            std::size_t idx;
        };
        std::vector<Event> events;
        for (std::size_t i = 0; i < r.visits.size(); ++i)
            events.push_back({r.visits[i].t, true, i});
        for (std::size_t j = 0; j < r.answers.size(); ++j)
            events.push_back({r.answers[j].t, false, j});
        std::stable_sort(events.begin(), events.end(),
                         [](const Event& a, const Event& b) { return a.t < b.t; });

        RecordLatents lat;
        lat.id = r.id;
        lat.risk_visits.resize(r.visits.size());
        lat.risk_answers.resize(r.answers.size());
        double risk = normal(gen);
        double prev_t = events.empty() ? 0.0 : events.front().t;
        for (std::size_t e = 0; e < events.size(); ++e) {
            if (e > 0) {
                const double decay = std::pow(cfg.rho, events[e].t - prev_t);
                risk = decay * risk + std::sqrt(std::max(0.0, 1.0 - decay * decay)) * normal(gen);
                prev_t = events[e].t;
            }
            if (events[e].is_visit)
                lat.risk_visits[events[e].idx] = risk;
            else
                lat.risk_answers[events[e].idx] = risk;
        }

        for (std::size_t i = 0; i < r.visits.size(); ++i) {
            Eigen::VectorXd x(cfg.k_c);
            for (int f = 0; f < cfg.k_c; ++f)
                x[f] = f < cfg.n_signal_c
                           ? a_c[f] * lat.risk_visits[i] + cfg.noise_c * normal(gen)
                           : normal(gen);
            r.visits[i].x = std::move(x);
        }
        for (std::size_t j = 0; j < r.answers.size(); ++j) {
            Eigen::VectorXd x(cfg.k_p);
            for (int f = 0; f < cfg.k_p; ++f)
                x[f] = f < cfg.n_signal_p
                           ? a_p[f] * lat.risk_answers[j] + cfg.noise_p * normal(gen)
                           : normal(gen);
            r.answers[j].x = std::move(x);
        }

        base_scores[n].resize(r.visits.size());
        eps_raw[n].resize(r.visits.size());
        for (std::size_t i = 0; i < r.visits.size(); ++i) {
            base_scores[n][i] = cfg.w_level * lat.risk_visits[i] +
                                cfg.w_delta * answer_delta(r, lat.risk_answers, r.visits[i].t);
            eps_raw[n][i] = normal(gen);
        }

        cohort.records.push_back(std::move(r));
        out.latents.records.push_back(std::move(lat));
    }

    // threshold calibration by bisection on the realized positive rate
    const auto rate_at = [&](double tau, double eps_scale) {
        std::size_t pos = 0, total = 0;
        for (int n = 0; n < cfg.n_patients; ++n)
            for (std::size_t i = 0; i < base_scores[n].size(); ++i) {
                if (base_scores[n][i] + eps_scale * eps_raw[n][i] > tau) ++pos;
                ++total;
            }
        return static_cast<double>(pos) / static_cast<double>(total);
    };
    const auto calibrate = [&](double eps_scale) {
        double lo = 1e300, hi = -1e300;
        for (int n = 0; n < cfg.n_patients; ++n)
            for (std::size_t i = 0; i < base_scores[n].size(); ++i) {
                const double z = base_scores[n][i] + eps_scale * eps_raw[n][i];
                lo = std::min(lo, z);
                hi = std::max(hi, z);
            }
        lo -= 1.0;
        hi += 1.0;
        for (int step = 0; step < 60; ++step) {
            const double mid = 0.5 * (lo + hi);
            if (rate_at(mid, eps_scale) > cfg.positive_rate)
                lo = mid;
            else
                hi = mid;
        }
        return 0.5 * (lo + hi);
    };

    const double tau0 = calibrate(0.0);
    out.latents.eps_scale = 0.1 * std::abs(tau0);
    out.latents.tau = calibrate(out.latents.eps_scale);
    if (std::abs(rate_at(out.latents.tau, out.latents.eps_scale) - cfg.positive_rate) > 0.01)
        throw std::runtime_error("generate_cohort: positive-rate target unreachable");

    for (int n = 0; n < cfg.n_patients; ++n) {
        auto& r = cohort.records[n];
        auto& lat = out.latents.records[n];
        lat.eps.resize(r.visits.size());
        for (std::size_t i = 0; i < r.visits.size(); ++i) {
            lat.eps[i] = out.latents.eps_scale * eps_raw[n][i];
            r.visits[i].y =
                base_scores[n][i] + lat.eps[i] > out.latents.tau ? 1 : 0;
        }
    }

    // realized normalization constants travel with the cohort
    double mean = 0.0;
    for (const auto& r : cohort.records) mean += r.static_info.age;
    mean /= static_cast<double>(cohort.records.size());
    double var = 0.0;
    for (const auto& r : cohort.records) {
        const double d = r.static_info.age - mean;
        var += d * d;
    }
    var /= static_cast<double>(cohort.records.size());
    cohort.age_mean = mean;
    cohort.age_std = std::max(1e-6, std::sqrt(var));
    return out;
}

void write_latents(const CohortLatents& latents, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_latents: cannot open " + path);
    out << "{\"tau\":" << fmt_double(latents.tau)
        << ",\"eps_scale\":" << fmt_double(latents.eps_scale) << "}\n";
    for (const auto& r : latents.records) {
        out << "{\"id\":" << json(r.id).dump() << ",\"risk_visits\":" << fmt_array(r.risk_visits)
            << ",\"risk_answers\":" << fmt_array(r.risk_answers)
            << ",\"eps\":" << fmt_array(r.eps) << "}\n";
    }
}

CohortLatents read_latents(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_latents: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("read_latents: empty file");
    CohortLatents latents;
    const json header = json::parse(line);
    latents.tau = header.at("tau").get<double>();
    latents.eps_scale = header.at("eps_scale").get<double>();
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json obj = json::parse(line);
        RecordLatents r;
        r.id = obj.at("id").get<std::string>();
        r.risk_visits = obj.at("risk_visits").get<std::vector<double>>();
        r.risk_answers = obj.at("risk_answers").get<std::vector<double>>();
        r.eps = obj.at("eps").get<std::vector<double>>();
        latents.records.push_back(std::move(r));
    }
    return latents;
}

}  // namespace dualseq::synth
