#include "dualseq/data.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace dualseq::data {

namespace {

using nlohmann::json;

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_vector(const Eigen::VectorXd& v) {
    std::string out = "[";
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += fmt_double(v[i]);
    }
    out += "]";
    return out;
}

Eigen::VectorXd vector_from_json(const json& a) {
    Eigen::VectorXd v(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
    return v;
}

[[noreturn]] void fail_line(std::size_t line_no, const std::string& what) {
    throw std::runtime_error("cohort line " + std::to_string(line_no) + ": " + what);
}

}  // namespace

std::optional<std::size_t> most_recent_answer_index(const std::vector<PatientAnswer>& answers,
                                                    double t) {
    for (std::size_t j = 1; j < answers.size(); ++j)
        if (answers[j].t < answers[j - 1].t)
            throw std::invalid_argument("most_recent_answer_index: answers not time-sorted");
    // binary search for the last index with answers[j].t <= t
    std::size_t lo = 0, hi = answers.size();
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (answers[mid].t <= t)
            lo = mid + 1;
        else
            hi = mid;
    }
    if (lo == 0) return std::nullopt;
    return lo - 1;
}

LengthBucket length_bucket(std::size_t t_c) {
    if (t_c < 1) throw std::invalid_argument("length_bucket: T_c must be >= 1");
    switch (t_c) {
        case 1: return LengthBucket::One;
        case 2: return LengthBucket::Two;
        case 3: return LengthBucket::Three;
        default: return LengthBucket::FourPlus;
    }
}

std::string to_string(LengthBucket b) {
    switch (b) {
        case LengthBucket::One: return "1";
        case LengthBucket::Two: return "2";
        case LengthBucket::Three: return "3";
        case LengthBucket::FourPlus: return "4+";
    }
    throw std::logic_error("unknown bucket");
}

std::vector<std::string> validate_record(const PatientRecord& r, int k_c, int k_p) {
    std::vector<std::string> violations;
    if (r.visits.empty()) violations.push_back("visits: empty (T_c must be >= 1)");
    if (r.static_info.age <= 0.0) violations.push_back("static.age: must be > 0");
    if (r.static_info.sex != 0 && r.static_info.sex != 1)
        violations.push_back("static.sex: must be 0 or 1");
    for (std::size_t i = 0; i < r.visits.size(); ++i) {
        const auto& v = r.visits[i];
        const std::string path = "visits[" + std::to_string(i) + "]";
        if (v.t < 0.0) violations.push_back(path + ".t: negative");
        if (!std::isfinite(v.t) || !v.x.allFinite())
            violations.push_back(path + ": non-finite value");
        if (v.x.size() != k_c)
            violations.push_back(path + ".x: width " + std::to_string(v.x.size()) +
                                 " != k_c " + std::to_string(k_c));
        if (v.y != 0 && v.y != 1) violations.push_back(path + ".y: must be 0 or 1");
        if (i > 0 && !(r.visits[i - 1].t < v.t))
            violations.push_back("visits not time-sorted at index " + std::to_string(i));
    }
    for (std::size_t j = 0; j < r.answers.size(); ++j) {
        const auto& a = r.answers[j];
        const std::string path = "answers[" + std::to_string(j) + "]";
        if (a.t < 0.0) violations.push_back(path + ".t: negative");
        if (!std::isfinite(a.t) || !a.x.allFinite())
            violations.push_back(path + ": non-finite value");
        if (a.x.size() != k_p)
            violations.push_back(path + ".x: width " + std::to_string(a.x.size()) +
                                 " != k_p " + std::to_string(k_p));
        if (j > 0 && !(r.answers[j - 1].t < a.t))
            violations.push_back("answers not time-sorted at index " + std::to_string(j));
    }
    return violations;
}

void write_cohort(const Cohort& cohort, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_cohort: cannot open " + path);
    out << "{\"k_c\":" << cohort.k_c << ",\"k_p\":" << cohort.k_p << ",\"feature_names_c\":"
        << json(cohort.feature_names_c).dump() << ",\"feature_names_p\":"
        << json(cohort.feature_names_p).dump() << ",\"age_mean\":" << fmt_double(cohort.age_mean)
        << ",\"age_std\":" << fmt_double(cohort.age_std) << "}\n";
    for (const auto& r : cohort.records) {
        out << "{\"id\":" << json(r.id).dump() << ",\"sex\":" << r.static_info.sex
            << ",\"age\":" << fmt_double(r.static_info.age) << ",\"visits\":[";
        for (std::size_t i = 0; i < r.visits.size(); ++i) {
            if (i) out << ",";
            out << "{\"t\":" << fmt_double(r.visits[i].t) << ",\"x\":" << fmt_vector(r.visits[i].x)
                << ",\"y\":" << r.visits[i].y << "}";
        }
        out << "],\"answers\":[";
        for (std::size_t j = 0; j < r.answers.size(); ++j) {
            if (j) out << ",";
            out << "{\"t\":" << fmt_double(r.answers[j].t)
                << ",\"x\":" << fmt_vector(r.answers[j].x) << "}";
        }
        out << "]}\n";
    }
}

Cohort read_cohort(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_cohort: cannot open " + path);
    std::string line;
    std::size_t line_no = 0;
    Cohort cohort;
    if (!std::getline(in, line)) throw std::runtime_error("read_cohort: empty file " + path);
    ++line_no;
    try {
        const json header = json::parse(line);
        cohort.k_c = header.at("k_c").get<int>();
        cohort.k_p = header.at("k_p").get<int>();
        cohort.feature_names_c = header.at("feature_names_c").get<std::vector<std::string>>();
        cohort.feature_names_p = header.at("feature_names_p").get<std::vector<std::string>>();
        if (header.contains("age_mean")) cohort.age_mean = header["age_mean"].get<double>();
        if (header.contains("age_std")) cohort.age_std = header["age_std"].get<double>();
    } catch (const json::exception& e) {
        fail_line(line_no, std::string("malformed header: ") + e.what());
    }
    if (cohort.feature_names_c.size() != static_cast<std::size_t>(cohort.k_c))
        fail_line(line_no, "feature_names_c length != k_c");
    if (cohort.feature_names_p.size() != static_cast<std::size_t>(cohort.k_p))
        fail_line(line_no, "feature_names_p length != k_p");
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        PatientRecord r;
        try {
            const json obj = json::parse(line);
            r.id = obj.at("id").get<std::string>();
            r.static_info.sex = obj.at("sex").get<int>();
            r.static_info.age = obj.at("age").get<double>();
            for (const auto& v : obj.at("visits")) {
                ClinicianVisit visit;
                visit.t = v.at("t").get<double>();
                visit.x = vector_from_json(v.at("x"));
                visit.y = v.at("y").get<int>();
                r.visits.push_back(std::move(visit));
            }
            for (const auto& a : obj.at("answers")) {
                PatientAnswer ans;
                ans.t = a.at("t").get<double>();
                ans.x = vector_from_json(a.at("x"));
                r.answers.push_back(std::move(ans));
            }
        } catch (const json::exception& e) {
            fail_line(line_no, std::string("malformed record: ") + e.what());
        }
        const auto violations = validate_record(r, cohort.k_c, cohort.k_p);
        if (!violations.empty()) fail_line(line_no, violations.front());
        cohort.records.push_back(std::move(r));
    }
    return cohort;
}

}  // namespace dualseq::data
