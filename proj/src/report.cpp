#include "wmlab/report.hpp"

#include <cstdio>
#include <stdexcept>

#include <json.hpp>

#include "wmlab/model_io.hpp"

namespace wmlab {

std::string csv_escape(const std::string& value) {
    if (value.find_first_of(",\"\n\r") == std::string::npos) return value;
    std::string out = "\"";
    for (char c : value) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

std::string fmt_double(double v, int precision) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
    return buf;
}

std::string fmt_int(int64_t v) { return std::to_string(v); }

CsvWriter::CsvWriter(const std::string& path,
                     const std::vector<std::string>& header)
    : out_(path, std::ios::binary), columns_(header.size()) {
    if (!out_) throw std::runtime_error("cannot write " + path);
    row(header);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_)
        throw std::invalid_argument("csv row width does not match the header");
    for (size_t i = 0; i < cells.size(); ++i) {
        if (i) out_ << ',';
        out_ << csv_escape(cells[i]);
    }
    out_ << "\r\n";
}

namespace {

const std::vector<std::pair<std::string, std::string>> kModuleVersions = {
    {"core", "1.0"},    {"codec", "1.0"},   {"transforms", "1.0"},
    {"training", "1.0"}, {"certify", "1.0"}, {"attacks", "1.0"},
    {"harness", "1.0"},
};

}  // namespace

Manifest::Manifest(uint64_t seed, const std::string& config_text)
    : seed_(seed),
      config_hash_(crc32(config_text.data(), config_text.size())) {}

void Manifest::add_stage(const std::string& name, double wall_seconds) {
    stages_.emplace_back(name, wall_seconds);
}

void Manifest::add_output(const std::string& path) { outputs_.push_back(path); }

void Manifest::set_status(const std::string& status, const std::string& detail) {
    status_ = status;
    detail_ = detail;
}

void Manifest::write(const std::string& path) const {
    nlohmann::json j;
    j["seed"] = seed_;
    char hash[16];
    std::snprintf(hash, sizeof(hash), "%08x", config_hash_);
    j["config_hash"] = hash;
    nlohmann::json versions = nlohmann::json::object();
    for (const auto& [name, version] : kModuleVersions) versions[name] = version;
    j["module_versions"] = versions;
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& [name, secs] : stages_)
        stages.push_back({{"stage", name}, {"wall_seconds", secs}});
    j["stages"] = stages;
    j["outputs"] = outputs_;
    j["status"] = status_;
    if (!detail_.empty()) j["detail"] = detail_;

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << "\n";
}

}  // namespace wmlab
