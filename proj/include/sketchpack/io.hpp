#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <ios>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sketchpack/cluster.hpp"
#include "sketchpack/errors.hpp"
#include "sketchpack/linop.hpp"
#include "sketchpack/spectrum.hpp"

namespace sketchpack {

namespace detail {

inline std::string lower(std::string s) {
  for (char& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

inline std::ifstream open_in(const std::string& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw std::ios_base::failure("cannot open for reading: " + path);
  return in;
}

inline std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw std::ios_base::failure("cannot open for writing: " + path);
  return out;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Matrix Market reader: array or coordinate format, real or integer field,
/// general, symmetric or skew-symmetric storage.
inline Matrix parse_matrix_market(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError("empty Matrix Market input", 1);
  ++lineno;
  std::istringstream banner(line);
  std::string tag, object, format, field, symmetry;
  banner >> tag >> object >> format >> field >> symmetry;
  if (tag != "%%MatrixMarket") throw ParseError("missing %%MatrixMarket banner", lineno);
  object = detail::lower(object);
  format = detail::lower(format);
  field = detail::lower(field);
  symmetry = detail::lower(symmetry);
  if (object != "matrix") throw ParseError("unsupported object: " + object, lineno);
  if (format != "array" && format != "coordinate") throw ParseError("unsupported format: " + format, lineno);
  if (field != "real" && field != "integer" && field != "double")
    throw ParseError("unsupported field: " + field, lineno);
  if (symmetry != "general" && symmetry != "symmetric" && symmetry != "skew-symmetric")
    throw ParseError("unsupported symmetry: " + symmetry, lineno);

  auto next_data_line = [&](std::string& out) {
    while (std::getline(in, out)) {
      ++lineno;
      if (!out.empty() && out.back() == '\r') out.pop_back();
      const auto first = out.find_first_not_of(" \t");
      if (first == std::string::npos || out[first] == '%') continue;
      return true;
    }
    return false;
  };

  if (!next_data_line(line)) throw ParseError("missing size line", lineno);
  std::istringstream size_line(line);
  long long rows = -1, cols = -1, nnz = -1;
  size_line >> rows >> cols;
  if (format == "coordinate") size_line >> nnz;
  if (!size_line || rows < 0 || cols < 0 || (format == "coordinate" && nnz < 0))
    throw ParseError("malformed size line", lineno);
  const bool sym = symmetry != "general";
  const double mirror = symmetry == "skew-symmetric" ? -1.0 : 1.0;
  if (sym && rows != cols) throw ParseError("symmetric storage requires a square matrix", lineno);

  Matrix m = Matrix::Zero(rows, cols);
  auto read_value = [&](std::istringstream& s) {
    double v = 0.0;
    s >> v;
    if (!s) throw ParseError("malformed value", lineno);
    if (!std::isfinite(v)) throw ParseError("non-finite value", lineno);
    return v;
  };

  if (format == "array") {
    for (long long j = 0; j < cols; ++j) {
      const long long start = sym ? (symmetry == "skew-symmetric" ? j + 1 : j) : 0;
      for (long long i = start; i < rows; ++i) {
        if (!next_data_line(line)) throw ParseError("too few entries", lineno);
        std::istringstream s(line);
        const double v = read_value(s);
        m(i, j) = v;
        if (sym && i != j) m(j, i) = mirror * v;
      }
    }
  } else {
    for (long long e = 0; e < nnz; ++e) {
      if (!next_data_line(line)) throw ParseError("too few entries", lineno);
      std::istringstream s(line);
      long long i = 0, j = 0;
      s >> i >> j;
      if (!s) throw ParseError("malformed index", lineno);
      if (i < 1 || i > rows || j < 1 || j > cols) throw ParseError("index out of range", lineno);
      const double v = read_value(s);
      m(i - 1, j - 1) += v;
      if (sym && i != j) m(j - 1, i - 1) += mirror * v;
    }
  }
  if (next_data_line(line)) throw ParseError("trailing data after last entry", lineno);
  return m;
}

inline Matrix read_matrix_market(const std::string& path) {
  auto in = detail::open_in(path);
  return parse_matrix_market(in);
}

/// Dense array format, general storage, 17 significant digits.
inline void write_matrix_market(const std::string& path, const Matrix& m) {
  auto out = detail::open_out(path);
  out << "%%MatrixMarket matrix array real general\n";
  out << m.rows() << " " << m.cols() << "\n";
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i) out << detail::format_double(m(i, j)) << "\n";
  if (!out) throw std::ios_base::failure("write failed: " + path);
}

inline std::string sidecar_path(const std::string& path) { return path + ".json"; }

/// Raw little-endian float64 in column-major order, with the header
/// {rows, cols, layout: "col-major", dtype: "float64"} in path + ".json".
inline void write_binary_matrix(const std::string& path, const Matrix& m) {
  static_assert(std::endian::native == std::endian::little, "binary matrix I/O assumes little-endian");
  {
    auto out = detail::open_out(path, std::ios::out | std::ios::binary);
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!out) throw std::ios_base::failure("write failed: " + path);
  }
  nlohmann::json header = {{"rows", m.rows()}, {"cols", m.cols()}, {"layout", "col-major"}, {"dtype", "float64"}};
  auto side = detail::open_out(sidecar_path(path));
  side << header.dump(2) << "\n";
}

inline Matrix read_binary_matrix(const std::string& path) {
  nlohmann::json header;
  {
    auto side = detail::open_in(sidecar_path(path));
    try {
      side >> header;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed sidecar header: ") + e.what());
    }
  }
  if (!header.contains("rows") || !header.contains("cols")) throw ParseError("sidecar lacks rows/cols");
  if (header.value("layout", "col-major") != "col-major") throw ParseError("unsupported layout");
  if (header.value("dtype", "float64") != "float64") throw ParseError("unsupported dtype");
  const auto rows = header["rows"].get<Index>();
  const auto cols = header["cols"].get<Index>();
  if (rows < 0 || cols < 0) throw ParseError("negative dimensions in sidecar");
  Matrix m(rows, cols);
  auto in = detail::open_in(path, std::ios::in | std::ios::binary);
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(m.size() * sizeof(double)))
    throw ParseError("binary file shorter than its header states");
  if (in.peek() != std::char_traits<char>::eof()) throw ParseError("binary file longer than its header states");
  return m;
}

/// One value per line; an optional non-numeric first line is a header.
inline Spectrum parse_spectrum_csv(std::istream& in) {
  std::vector<double> values;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto fields = detail::split_csv_line(t);
    if (fields.size() != 1) throw ParseError("spectrum CSV must have one column", lineno);
    auto v = detail::parse_double(fields[0]);
    if (!v) {
      if (values.empty() && lineno == 1) continue;
      throw ParseError("non-numeric spectrum value", lineno);
    }
    values.push_back(*v);
  }
  if (values.empty()) throw ParseError("spectrum file has no values");
  try {
    return Spectrum(values);
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("invalid spectrum: ") + e.what());
  }
}

inline Spectrum read_spectrum_csv(const std::string& path) {
  auto in = detail::open_in(path);
  return parse_spectrum_csv(in);
}

inline void write_spectrum_csv(const std::string& path, const Spectrum& spec) {
  auto out = detail::open_out(path);
  out << "sigma\n";
  for (Index i = 0; i < spec.size(); ++i) out << detail::format_double(spec[i]) << "\n";
  if (!out) throw std::ios_base::failure("write failed: " + path);
}

inline void write_points_csv(const std::string& path, const PointSet& pts) {
  auto out = detail::open_out(path);
  for (Index i = 0; i < pts.n(); ++i) {
    for (Index j = 0; j < pts.d(); ++j) {
      if (j) out << ",";
      out << detail::format_double(pts.coords(i, j));
    }
    out << "\n";
  }
  if (!out) throw std::ios_base::failure("write failed: " + path);
}

inline void write_labels_csv(const std::string& path, const std::vector<int>& labels) {
  auto out = detail::open_out(path);
  out << "label\n";
  for (int l : labels) out << l << "\n";
  if (!out) throw std::ios_base::failure("write failed: " + path);
}

}  // namespace sketchpack
