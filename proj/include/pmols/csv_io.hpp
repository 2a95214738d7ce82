#pragma once

// Matrix / vector exchange as plain CSV: one row per line, no header,
// values written with 17 significant digits so they round-trip exactly.

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pmols/errors.hpp"
#include "pmols/matrix_core.hpp"

namespace pmols {

inline std::string format_exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline Matrix parse_matrix_csv(const std::string& text, const std::string& source = "input") {
  std::vector<double> flat;
  Index rows = 0, cols = -1;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    Index count = 0;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      std::size_t end = line.find(',', pos);
      if (end == std::string::npos) end = line.size();
      std::size_t a = line.find_first_not_of(" \t", pos);
      std::size_t b = line.find_last_not_of(" \t", end == 0 ? 0 : end - 1);
      if (a == std::string::npos || a >= end || b < a) {
        fail(ErrorKind::Parse, source + " line " + std::to_string(line_no) + ": empty field");
      }
      double v = 0.0;
      const auto res = std::from_chars(line.data() + a, line.data() + b + 1, v);
      if (res.ec != std::errc() || res.ptr != line.data() + b + 1) {
        fail(ErrorKind::Parse, source + " line " + std::to_string(line_no) + ": cannot parse '" +
                                   line.substr(a, b + 1 - a) + "' as a number");
      }
      flat.push_back(v);
      ++count;
      pos = end + 1;
    }
    if (cols < 0) cols = count;
    if (count != cols) {
      fail(ErrorKind::Parse, source + " line " + std::to_string(line_no) + ": expected " +
                                 std::to_string(cols) + " fields, found " + std::to_string(count));
    }
    ++rows;
  }
  if (rows == 0) fail(ErrorKind::Parse, source + " contains no rows");
  return make_matrix(rows, cols, flat);
}

/// Accepts a single row or a single column.
inline Vector parse_vector_csv(const std::string& text, const std::string& source = "input") {
  const Matrix a = parse_matrix_csv(text, source);
  if (a.cols() == 1) return a.col(0);
  if (a.rows() == 1) return a.row(0).transpose();
  fail(ErrorKind::Parse, source + " is a " + shape_string(a) + " matrix, expected a vector");
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write '" + path.string() + "'");
  out << text;
  if (!out) fail(ErrorKind::Io, "write to '" + path.string() + "' failed");
}

inline Matrix load_matrix_csv(const std::filesystem::path& path) {
  return parse_matrix_csv(read_text_file(path), path.string());
}

inline Vector load_vector_csv(const std::filesystem::path& path) {
  return parse_vector_csv(read_text_file(path), path.string());
}

inline std::string matrix_to_csv(const Matrix& a) {
  std::string s;
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      if (j > 0) s += ',';
      s += format_exact(a(i, j));
    }
    s += '\n';
  }
  return s;
}

/// One value per line.
inline std::string vector_to_csv(const Vector& v) {
  std::string s;
  for (Index i = 0; i < v.size(); ++i) s += format_exact(v(i)) + '\n';
  return s;
}

}  // namespace pmols
