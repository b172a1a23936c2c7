#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dualseq/data.hpp"

namespace dualseq::synth {

// Planted-label cohort generator. Labels depend on the clinician-side latent
// level and on the difference between the last two patient answers before the
// visit, so a memoryless reader of the latest answer cannot recover them.
struct SynthConfig {
    int n_patients = 1000;
    int k_c = 93;
    int k_p = 24;
    int n_signal_c = 8;   // clinician features carrying the latent
    int n_signal_p = 6;   // patient features carrying the latent
    // discretized log-normal sequence-length mixtures
    double t_c_mean = 7.87;
    double t_c_sigma = 1.1;
    int t_c_min = 1;
    int t_c_max = 119;
    double t_p_mean = 19.66;
    double t_p_sigma = 1.0;
    int t_p_min = 3;
    int t_p_max = 858;
    // event-time process (days)
    double visit_gap_mean = 60.0;
    double answer_gap_mean = 6.0;
    // latent risk AR(1), per-day decay
    double rho = 0.95;
    double noise_c = 0.2;  // feature noise scales
    double noise_p = 0.2;
    double w_level = 0.5;  // weight of the visit-time latent level
    double w_delta = 3.0;  // weight of the last-two-answers contrast
    double positive_rate = 0.15;
    std::uint64_t seed = 0;
};

void validate(const SynthConfig& cfg);

// Ground truth retained for re-evaluation: the latent risk at every event time,
// the per-visit label noise, and the calibrated threshold.
struct RecordLatents {
    std::string id;
    std::vector<double> risk_visits;
    std::vector<double> risk_answers;
    std::vector<double> eps;  // per visit
};

struct CohortLatents {
    double tau = 0.0;        // calibrated label threshold
    double eps_scale = 0.0;  // label-noise scale actually applied
    std::vector<RecordLatents> records;
};

struct GeneratedCohort {
    data::Cohort cohort;
    CohortLatents latents;
};

GeneratedCohort generate_cohort(const SynthConfig& cfg);

// Planted score for visit i given the latents (level + delta + noise).
double planted_score(const SynthConfig& cfg, const data::PatientRecord& record,
                     const RecordLatents& latents, std::size_t visit);

// Recomputes every label of the record from the stored latents.
std::vector<int> planted_oracle(const data::PatientRecord& record, const SynthConfig& cfg,
                                const RecordLatents& latents, double tau);

// Sidecar serialization (JSONL: header with tau/eps_scale, one line per record).
void write_latents(const CohortLatents& latents, const std::string& path);
CohortLatents read_latents(const std::string& path);

}  // namespace dualseq::synth
