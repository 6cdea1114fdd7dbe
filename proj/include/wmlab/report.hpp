#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace wmlab {

// RFC-4180-style CSV: UTF-8, '.' decimal separator, header row always written.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header);

    void row(const std::vector<std::string>& cells);

private:
    std::ofstream out_;
    size_t columns_;
};

std::string csv_escape(const std::string& value);
std::string fmt_double(double v, int precision = 6);
std::string fmt_int(int64_t v);

// Experiment manifest: config hash, seed, module versions, wall-clock per
// stage, produced files and final status. Written as JSON.
class Manifest {
public:
    Manifest(uint64_t seed, const std::string& config_text);

    void add_stage(const std::string& name, double wall_seconds);
    void add_output(const std::string& path);
    void set_status(const std::string& status, const std::string& detail = "");
    void write(const std::string& path) const;

private:
    uint64_t seed_;
    uint32_t config_hash_;
    std::vector<std::pair<std::string, double>> stages_;
    std::vector<std::string> outputs_;
    std::string status_ = "ok";
    std::string detail_;
};

}  // namespace wmlab
