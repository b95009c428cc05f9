#pragma once

// Plain-text output plumbing: CSV files (one header line, '#' metadata
// comment lines, '.' decimal point, no locale), a flat key-value run
// manifest, and a whitespace/comma matrix reader for user-supplied joint
// distributions.  Doubles are written in shortest round-trip form, so files
// from identical runs are byte-identical.

#include <Eigen/Dense>
#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace paircorr {

// Shortest decimal string that parses back to exactly the same double.
std::string format_double(double value);

class CsvWriter {
public:
    explicit CsvWriter(const std::string& path);
    ~CsvWriter();

    void comment(const std::string& text);                 // "# text"
    void header(const std::vector<std::string>& columns);  // exactly once
    void row(const std::vector<std::string>& cells);
    void row(const std::vector<double>& values);

private:
    void put_line(const std::string& line);
    std::ofstream out_;
    std::string path_;
    bool header_written_ = false;
};

// Dense matrix as CSV rows (with optional leading comments).
void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& comments = {});

// Reads a numeric matrix: one row per line, cells separated by commas and/or
// whitespace, '#' lines and blank lines ignored.
Eigen::MatrixXd read_matrix_csv(const std::string& path);

// Flat "key = value" file, one entry per line, written in the given order.
void write_manifest(const std::string& path,
                    const std::vector<std::pair<std::string, std::string>>& entries);

// FNV-1a 64-bit digest, used to fingerprint resolved configurations.
std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t value);

}  // namespace paircorr
