#include "table_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string_view>

namespace cvcov::cli {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double parse_cell(std::string_view cell, std::size_t row, std::size_t col) {
    const std::string_view s = trim(cell);
    double v = 0.0;
    const char* begin = s.data();
    if (!s.empty() && s.front() == '+') {
        ++begin;
    }
    const auto [ptr, ec] = std::from_chars(begin, s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
        throw InputError("row " + std::to_string(row) + ", column " + std::to_string(col) +
                         ": not a number: '" + std::string(s) + "'");
    }
    return v;
}

}  // namespace

std::string format_number(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::string format_number(std::optional<double> v) {
    return v ? format_number(*v) : std::string();
}

Matrix read_numeric_csv(std::istream& in, bool header) {
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    bool skipped_header = !header;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        if (!skipped_header) {
            skipped_header = true;
            continue;
        }
        std::vector<double> row;
        std::string_view rest(line);
        std::size_t col = 1;
        while (true) {
            const auto comma = rest.find(',');
            row.push_back(parse_cell(rest.substr(0, comma), line_no, col));
            if (comma == std::string_view::npos) {
                break;
            }
            rest.remove_prefix(comma + 1);
            ++col;
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw InputError("row " + std::to_string(line_no) + ": expected " +
                             std::to_string(rows.front().size()) + " columns, found " +
                             std::to_string(row.size()));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) {
        throw InputError("no data rows");
    }
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
        }
    }
    return m;
}

Matrix read_numeric_csv_file(const std::string& path, bool header) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open " + path);
    }
    try {
        return read_numeric_csv(in, header);
    } catch (const InputError& e) {
        throw InputError(path + ": " + e.what());
    }
}

void write_matrix_csv(std::ostream& out, const Matrix& m) {
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j > 0) {
                out << ',';
            }
            out << format_number(m(i, j));
        }
        out << '\n';
    }
}

}  // namespace cvcov::cli
