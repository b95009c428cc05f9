#include "paircorr/io.hpp"

#include <charconv>
#include <cstdlib>
#include <sstream>

#include "paircorr/errors.hpp"

namespace paircorr {

std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(const std::string& path) : out_(path), path_(path) {
    if (!out_) throw io_error("cannot open for writing: " + path);
}

CsvWriter::~CsvWriter() = default;

void CsvWriter::put_line(const std::string& line) {
    out_ << line << '\n';
    if (!out_) throw io_error("write failed: " + path_);
}

void CsvWriter::comment(const std::string& text) { put_line("# " + text); }

void CsvWriter::header(const std::vector<std::string>& columns) {
    if (header_written_) throw io_error("CSV header written twice: " + path_);
    header_written_ = true;
    row(columns);
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t k = 0; k < cells.size(); ++k) {
        if (k) line += ',';
        line += cells[k];
    }
    put_line(line);
}

void CsvWriter::row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_double(v));
    row(cells);
}

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m,
                      const std::vector<std::string>& comments) {
    CsvWriter csv(path);
    for (const auto& c : comments) csv.comment(c);
    std::vector<double> cells(std::size_t(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) cells[std::size_t(j)] = m(i, j);
        csv.row(cells);
    }
}

Eigen::MatrixXd read_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open: " + path);

    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::string_view sv(line);
        if (const auto hash = sv.find('#'); hash != std::string_view::npos)
            sv = sv.substr(0, hash);
        std::vector<double> cells;
        std::size_t pos = 0;
        while (pos < sv.size()) {
            while (pos < sv.size() && (sv[pos] == ' ' || sv[pos] == '\t' ||
                                       sv[pos] == ',' || sv[pos] == '\r'))
                ++pos;
            if (pos >= sv.size()) break;
            double value = 0.0;
            const auto res = std::from_chars(sv.data() + pos, sv.data() + sv.size(), value);
            if (res.ec != std::errc())
                throw io_error("bad number in " + path + ": '" + std::string(sv.substr(pos)) + "'");
            pos = std::size_t(res.ptr - sv.data());
            cells.push_back(value);
        }
        if (cells.empty()) continue;
        if (!rows.empty() && cells.size() != rows.front().size())
            throw io_error("ragged rows in matrix file: " + path);
        rows.push_back(std::move(cells));
    }
    if (rows.empty()) throw io_error("no numeric rows in matrix file: " + path);

    Eigen::MatrixXd m(Eigen::Index(rows.size()), Eigen::Index(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(Eigen::Index(i), Eigen::Index(j)) = rows[i][j];
    return m;
}

void write_manifest(const std::string& path,
                    const std::vector<std::pair<std::string, std::string>>& entries) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open for writing: " + path);
    for (const auto& [key, value] : entries) out << key << " = " << value << '\n';
    if (!out) throw io_error("write failed: " + path);
}

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hex64(std::uint64_t value) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int k = 15; k >= 0; --k) {
        s[std::size_t(k)] = digits[value & 0xF];
        value >>= 4;
    }
    return s;
}

}  // namespace paircorr
