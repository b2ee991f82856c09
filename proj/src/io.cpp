#include "fastknock/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <string_view>

namespace fastknock {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  return out;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_field(std::string_view field, const std::string& path, std::size_t line) {
  field = trim(field);
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError(path, line, "not a number: '" + std::string(field) + "'");
  }
  return v;
}

}  // namespace

Matrix read_matrix_csv(const std::string& path) {
  std::ifstream in = open_in(path);
  std::vector<double> values;
  std::size_t cols = 0;
  std::size_t rows = 0;
  std::string text;
  for (std::size_t line = 1; std::getline(in, text); ++line) {
    const std::string_view row = trim(text);
    if (row.empty()) continue;
    std::size_t count = 0;
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = row.find(',', start);
      values.push_back(parse_field(row.substr(start, comma - start), path, line));
      ++count;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (rows == 0) cols = count;
    else if (count != cols) {
      throw ParseError(path, line, "expected " + std::to_string(cols) + " fields, found " + std::to_string(count));
    }
    ++rows;
  }
  Matrix M(static_cast<Index>(rows), static_cast<Index>(cols));
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) M(static_cast<Index>(i), static_cast<Index>(j)) = values[i * cols + j];
  return M;
}

void write_matrix_csv(const std::string& path, const Matrix& M) {
  std::ofstream out = open_out(path);
  std::string line;
  for (Index i = 0; i < M.rows(); ++i) {
    line.clear();
    for (Index j = 0; j < M.cols(); ++j) {
      if (j > 0) line += ',';
      line += format_double(M(i, j));
    }
    line += '\n';
    out << line;
  }
  if (!out) throw Error("failed writing '" + path + "'");
}

Vector read_vector_csv(const std::string& path) {
  const Matrix M = read_matrix_csv(path);
  if (M.cols() == 1) return M.col(0);
  if (M.rows() == 1) return M.row(0).transpose();
  if (M.size() == 0) return Vector();
  throw ParseError(path, 1, "expected a single row or column, found " + std::to_string(M.rows()) + "x" +
                                std::to_string(M.cols()));
}

void write_vector_csv(const std::string& path, const Vector& v) { write_matrix_csv(path, v); }

std::vector<Index> read_index_csv(const std::string& path) {
  std::ifstream in = open_in(path);
  std::vector<Index> idx;
  std::string text;
  for (std::size_t line = 1; std::getline(in, text); ++line) {
    const std::string_view row = trim(text);
    if (row.empty()) continue;
    Index v = 0;
    const auto [ptr, ec] = std::from_chars(row.data(), row.data() + row.size(), v);
    if (ec != std::errc() || ptr != row.data() + row.size() || v < 0) {
      throw ParseError(path, line, "not a feature index: '" + std::string(row) + "'");
    }
    idx.push_back(v);
  }
  return idx;
}

void write_index_csv(const std::string& path, const std::vector<Index>& idx) {
  std::ofstream out = open_out(path);
  for (Index i : idx) out << i << '\n';
  if (!out) throw Error("failed writing '" + path + "'");
}

}  // namespace fastknock
