#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <system_error>
#include <vector>

#include "ovt/common.hpp"
#include "ovt/tensor4.hpp"

namespace ovt {

// Tensor file format "TNSR": magic bytes `TNSR`, u32 version=1, u32 order,
// order x u32 dims, then little-endian f64 entries in lexicographic order,
// last index fastest. All integers little-endian.

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void put_f64(std::ostream& os, double v) {
  const auto u = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint32_t get_u32(std::istream& is, const std::string& what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw IoError("TNSR: truncated file while reading " + what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline double get_f64(std::istream& is, const std::string& what) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8))
    throw IoError("TNSR: truncated file while reading " + what);
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(u);
}

// Shortest decimal representation that round-trips the exact f64 value.
inline std::string f64_to_string(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

struct TnsrData {
  std::vector<std::uint32_t> dims;
  Vector data;
};

inline void write_tnsr(const std::string& path,
                       const std::vector<std::uint32_t>& dims,
                       const Vector& data) {
  std::uint64_t total = 1;
  for (auto dim : dims) total *= dim;
  if (static_cast<std::uint64_t>(data.size()) != total)
    throw IoError("TNSR write: data size does not match dims product");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("TNSR write: cannot open " + path);
  os.write("TNSR", 4);
  detail::put_u32(os, 1u);
  detail::put_u32(os, static_cast<std::uint32_t>(dims.size()));
  for (auto dim : dims) detail::put_u32(os, dim);
  for (Index i = 0; i < data.size(); ++i) detail::put_f64(os, data[i]);
  if (!os) throw IoError("TNSR write: write failed for " + path);
}

inline TnsrData read_tnsr(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("TNSR read: cannot open " + path);
  char magic[4];
  if (!is.read(magic, 4)) throw IoError("TNSR read: truncated magic in " + path);
  if (std::memcmp(magic, "TNSR", 4) != 0)
    throw IoError("TNSR read: bad magic in " + path);
  const auto version = detail::get_u32(is, "version");
  if (version != 1u)
    throw IoError("TNSR read: unsupported version " + std::to_string(version));
  const auto order = detail::get_u32(is, "order");
  if (order == 0 || order > 16)
    throw IoError("TNSR read: implausible order " + std::to_string(order));
  TnsrData out;
  out.dims.resize(order);
  std::uint64_t total = 1;
  for (std::uint32_t a = 0; a < order; ++a) {
    out.dims[a] = detail::get_u32(is, "dims");
    if (out.dims[a] == 0) throw IoError("TNSR read: zero dimension");
    total *= out.dims[a];
    if (total > (1ull << 30))
      throw IoError("TNSR read: tensor too large to load");
  }
  out.data.resize(static_cast<Index>(total));
  for (std::uint64_t i = 0; i < total; ++i)
    out.data[static_cast<Index>(i)] = detail::get_f64(is, "entries");
  char extra;
  if (is.read(&extra, 1))
    throw IoError("TNSR read: trailing bytes after payload in " + path);
  return out;
}

inline void write_tensor4(const std::string& path, const SymTensor4& t) {
  const auto d = static_cast<std::uint32_t>(t.d());
  write_tnsr(path, {d, d, d, d}, t.entries());
}

// Loads an order-4 tensor and validates the full-symmetry invariant,
// reporting the max relative deviation when it is violated.
inline SymTensor4 read_tensor4(const std::string& path,
                               double sym_tol = 1e-9) {
  TnsrData raw = read_tnsr(path);
  if (raw.dims.size() != 4)
    throw IoError("TNSR read: expected order 4, got order " +
                  std::to_string(raw.dims.size()));
  for (auto dim : raw.dims)
    if (dim != raw.dims[0])
      throw IoError("TNSR read: order-4 tensor has unequal dims");
  SymTensor4 t(static_cast<Index>(raw.dims[0]), std::move(raw.data));
  const double dev = t.symmetry_max_deviation();
  if (dev > sym_tol)
    throw IoError("TNSR read: tensor not symmetric, max relative deviation " +
                  detail::f64_to_string(dev));
  return t;
}

// Component sets as CSV: one vector per row, shortest round-trip decimals.
// In memory components are columns of a d x n matrix.
inline void write_components_csv(const std::string& path,
                                 const Matrix& components) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("CSV write: cannot open " + path);
  for (Index j = 0; j < components.cols(); ++j) {
    for (Index i = 0; i < components.rows(); ++i) {
      if (i > 0) os << ',';
      os << detail::f64_to_string(components(i, j));
    }
    os << '\n';
  }
  if (!os) throw IoError("CSV write: write failed for " + path);
}

inline Matrix read_components_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("CSV read: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> row;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (true) {
      double v = 0.0;
      const auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc())
        throw IoError("CSV read: bad number at line " + std::to_string(lineno));
      row.push_back(v);
      p = res.ptr;
      if (p == end) break;
      if (*p != ',')
        throw IoError("CSV read: expected comma at line " +
                      std::to_string(lineno));
      ++p;
    }
    if (!rows.empty() && row.size() != rows.front().size())
      throw IoError("CSV read: ragged row at line " + std::to_string(lineno));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw IoError("CSV read: no data in " + path);
  Matrix out(static_cast<Index>(rows.front().size()),
             static_cast<Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j)
    for (std::size_t i = 0; i < rows[j].size(); ++i)
      out(static_cast<Index>(i), static_cast<Index>(j)) = rows[j][i];
  return out;
}

}  // namespace ovt
