#pragma once

#include <string>
#include <vector>

#include "fastknock/linalg.hpp"

namespace fastknock {

/// Decimal text with 17 significant digits, enough to round-trip a double.
std::string format_double(double v);

/// Headerless, row-major CSV. Blank lines are ignored; every other line must
/// hold the same number of numeric fields. Errors name the file and line.
Matrix read_matrix_csv(const std::string& path);
void write_matrix_csv(const std::string& path, const Matrix& M);

/// Accepts a single column or a single row.
Vector read_vector_csv(const std::string& path);
/// Writes one value per line.
void write_vector_csv(const std::string& path, const Vector& v);

/// One non-negative integer per line.
std::vector<Index> read_index_csv(const std::string& path);
void write_index_csv(const std::string& path, const std::vector<Index>& idx);

}  // namespace fastknock
