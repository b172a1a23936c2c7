#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace dualseq::data {

struct ClinicianVisit {
    double t = 0.0;       // days since patient intake
    Eigen::VectorXd x;    // k_c features; the label is never part of these
    int y = 0;            // suicidal-ideation flag assessed at this visit
};

struct PatientAnswer {
    double t = 0.0;       // days since patient intake
    Eigen::VectorXd x;    // k_p features
};

struct StaticInfo {
    int sex = 0;          // binary
    double age = 0.0;     // years, > 0
};

struct PatientRecord {
    std::string id;
    StaticInfo static_info;
    std::vector<ClinicianVisit> visits;    // time-ascending, length >= 1
    std::vector<PatientAnswer> answers;    // time-ascending, may be empty
};

struct Cohort {
    std::vector<PatientRecord> records;
    int k_c = 0;
    int k_p = 0;
    std::vector<std::string> feature_names_c;
    std::vector<std::string> feature_names_p;
    // Age normalization constants carried with the cohort (synthetic cohorts
    // write their own; absent fields default to the reference population).
    double age_mean = 43.32;
    double age_std = 12.6;
};

// Largest j with answers[j].t <= t. Ties count as "most recent": a same-day
// questionnaire is available to the clinician.
std::optional<std::size_t> most_recent_answer_index(const std::vector<PatientAnswer>& answers,
                                                    double t);

enum class LengthBucket { One, Two, Three, FourPlus };

LengthBucket length_bucket(std::size_t t_c);
std::string to_string(LengthBucket b);

// Empty result means the record is well-formed.
std::vector<std::string> validate_record(const PatientRecord& r, int k_c, int k_p);

// JSONL container: header line with widths/names, one record object per line.
Cohort read_cohort(const std::string& path);
void write_cohort(const Cohort& cohort, const std::string& path);

}  // namespace dualseq::data
