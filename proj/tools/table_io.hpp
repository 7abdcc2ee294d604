#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cvcov/linalg.hpp"

namespace cvcov::cli {

/// Malformed input data; the message names the offending row and column.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shortest decimal string that parses back to the same double; '.' separator.
std::string format_number(double v);
std::string format_number(std::optional<double> v);

/**
 * Parses a comma-separated numeric table. Blank lines are skipped; with
 * `header` the first non-blank line is skipped. Rows and columns in error
 * messages are 1-based line and field numbers.
 */
Matrix read_numeric_csv(std::istream& in, bool header = false);
Matrix read_numeric_csv_file(const std::string& path, bool header = false);

void write_matrix_csv(std::ostream& out, const Matrix& m);

}  // namespace cvcov::cli
