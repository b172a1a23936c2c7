#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <string>

namespace dualseq::config {

// Flat `key = value` text format with one [section] per module. Comments start
// with '#'. Values keep their textual form; typed getters convert on demand.
class Config {
  public:
    static Config load(const std::string& path);
    static Config parse(std::istream& in, const std::string& origin = "<stream>");

    bool has(const std::string& section, const std::string& key) const;

    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    int get_int(const std::string& section, const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& section, const std::string& key,
                          std::uint64_t fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;

    const std::map<std::string, std::map<std::string, std::string>>& sections() const {
        return sections_;
    }

  private:
    std::map<std::string, std::map<std::string, std::string>> sections_;
};

}  // namespace dualseq::config
