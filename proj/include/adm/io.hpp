#pragma once

// Binary caches for generators and spectra, and a deterministic CSV writer.
//
// All binary records are little-endian.
//
// Generator cache ("ADMLIOU1"):
//   magic[8] | u32 version | u32 sector | u64 params_hash | u64 rows | u64 cols
//   | u64 n_indices | u64 indices[n_indices] | u64 nnz
//   | nnz x (i64 row, i64 col, f64 re, f64 im)
//
// Spectrum cache ("ADMSPEC1"):
//   magic[8] | u32 version | u32 sector | u64 params_hash | u64 n | u32 flags
//   | u64 n_indices | u64 indices[n_indices] | n x (f64 re, f64 im)
//   | [right: n*n x (f64 re, f64 im), column-major] | [left: same]
// flags bit 0 = right vectors present, bit 1 = left vectors present.

#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "adm/common.hpp"
#include "adm/liouvillian.hpp"
#include "adm/spectra.hpp"

namespace adm::io {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCacheVersion = 1;
inline constexpr char kGeneratorMagic[8] = {'A', 'D', 'M', 'L', 'I', 'O', 'U', '1'};
inline constexpr char kSpectrumMagic[8] = {'A', 'D', 'M', 'S', 'P', 'E', 'C', '1'};

namespace detail {

template <class T>
T to_little(T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
  return v;
}

template <class T>
void put(std::ostream& os, T v) {
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw FormatError("cache: truncated record");
  return to_little(v);
}

inline void put_matrix(std::ostream& os, const CMatrix& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      put(os, m(i, j).real());
      put(os, m(i, j).imag());
    }
}

inline CMatrix get_matrix(std::istream& is, Eigen::Index n) {
  CMatrix m(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) {
      const double re = get<double>(is);
      const double im = get<double>(is);
      m(i, j) = cplx(re, im);
    }
  return m;
}

inline void check_magic(std::istream& is, const char (&magic)[8], const std::string& path) {
  char buf[8];
  is.read(buf, 8);
  if (!is || std::memcmp(buf, magic, 8) != 0) throw FormatError("cache: bad magic in " + path);
  if (get<std::uint32_t>(is) != kCacheVersion) throw FormatError("cache: unsupported version in " + path);
}

inline std::uint32_t sector_code(Sector s) { return static_cast<std::uint32_t>(s); }

inline Sector sector_from_code(std::uint32_t c) {
  if (c > 2) throw FormatError("cache: bad sector code");
  return static_cast<Sector>(c);
}

inline void put_indices(std::ostream& os, const std::vector<std::size_t>& idx) {
  put<std::uint64_t>(os, idx.size());
  for (auto i : idx) put<std::uint64_t>(os, i);
}

inline std::vector<std::size_t> get_indices(std::istream& is) {
  const auto n = get<std::uint64_t>(is);
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = get<std::uint64_t>(is);
  return idx;
}

/// Writes through a temporary file and renames, so readers never see a
/// partial cache entry.
template <class F>
void atomic_write(const std::filesystem::path& path, F&& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + tmp + " for writing");
    body(os);
    if (!os) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace detail

inline std::uint64_t params_hash(const ModelParams& p) { return fnv1a64(p.canonical()); }

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::filesystem::path cache_path(const std::filesystem::path& dir, const char* kind,
                                        const ModelParams& p, Sector s) {
  return dir / (std::string(kind) + "_" + hex64(params_hash(p)) + "_" + to_string(s) + ".bin");
}

inline void save_generator(const std::filesystem::path& path, const SuperOperator& l) {
  detail::atomic_write(path, [&](std::ostream& os) {
    os.write(kGeneratorMagic, 8);
    detail::put(os, kCacheVersion);
    detail::put(os, detail::sector_code(l.sector));
    detail::put(os, params_hash(l.params));
    detail::put<std::uint64_t>(os, static_cast<std::uint64_t>(l.matrix.rows()));
    detail::put<std::uint64_t>(os, static_cast<std::uint64_t>(l.matrix.cols()));
    detail::put_indices(os, l.indices);
    detail::put<std::uint64_t>(os, static_cast<std::uint64_t>(l.matrix.nonZeros()));
    for (Eigen::Index c = 0; c < l.matrix.outerSize(); ++c)
      for (SparseC::InnerIterator it(l.matrix, c); it; ++it) {
        detail::put<std::int64_t>(os, it.row());
        detail::put<std::int64_t>(os, it.col());
        detail::put(os, it.value().real());
        detail::put(os, it.value().imag());
      }
  });
}

/// Loads a generator; `params` supplies the metadata and must hash to the
/// stored key.
inline SuperOperator load_generator(const std::filesystem::path& path, const ModelParams& params) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  detail::check_magic(is, kGeneratorMagic, path.string());
  SuperOperator l;
  l.sector = detail::sector_from_code(detail::get<std::uint32_t>(is));
  if (detail::get<std::uint64_t>(is) != params_hash(params))
    throw FormatError("cache: params hash mismatch in " + path.string());
  const auto rows = detail::get<std::uint64_t>(is);
  const auto cols = detail::get<std::uint64_t>(is);
  l.indices = detail::get_indices(is);
  const auto nnz = detail::get<std::uint64_t>(is);
  std::vector<Triplet> t;
  t.reserve(nnz);
  for (std::uint64_t k = 0; k < nnz; ++k) {
    const auto r = detail::get<std::int64_t>(is);
    const auto c = detail::get<std::int64_t>(is);
    const double re = detail::get<double>(is);
    const double im = detail::get<double>(is);
    t.emplace_back(r, c, cplx(re, im));
  }
  l.matrix.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  l.matrix.setFromTriplets(t.begin(), t.end());
  l.matrix.makeCompressed();
  l.params = params;
  return l;
}

inline void save_spectrum(const std::filesystem::path& path, const Spectrum& s) {
  detail::atomic_write(path, [&](std::ostream& os) {
    os.write(kSpectrumMagic, 8);
    detail::put(os, kCacheVersion);
    detail::put(os, detail::sector_code(s.sector));
    detail::put(os, params_hash(s.params));
    detail::put<std::uint64_t>(os, s.eigenvalues.size());
    const std::uint32_t flags = (s.right ? 1u : 0u) | (s.left ? 2u : 0u);
    detail::put(os, flags);
    detail::put_indices(os, s.indices);
    for (const auto& v : s.eigenvalues) {
      detail::put(os, v.real());
      detail::put(os, v.imag());
    }
    if (s.right) detail::put_matrix(os, *s.right);
    if (s.left) detail::put_matrix(os, *s.left);
  });
}

inline Spectrum load_spectrum(const std::filesystem::path& path, const ModelParams& params) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  detail::check_magic(is, kSpectrumMagic, path.string());
  Spectrum s;
  s.sector = detail::sector_from_code(detail::get<std::uint32_t>(is));
  if (detail::get<std::uint64_t>(is) != params_hash(params))
    throw FormatError("cache: params hash mismatch in " + path.string());
  s.params = params;
  const auto n = detail::get<std::uint64_t>(is);
  const auto flags = detail::get<std::uint32_t>(is);
  s.indices = detail::get_indices(is);
  s.eigenvalues.resize(n);
  for (auto& v : s.eigenvalues) {
    const double re = detail::get<double>(is);
    const double im = detail::get<double>(is);
    v = cplx(re, im);
  }
  if (flags & 1u) s.right = detail::get_matrix(is, static_cast<Eigen::Index>(n));
  if (flags & 2u) s.left = detail::get_matrix(is, static_cast<Eigen::Index>(n));
  return s;
}

/// Shortest round-trip representation of a double.
inline std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
      : path_(path), columns_(header.size()) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    os_.open(path, std::ios::binary | std::ios::trunc);
    if (!os_) throw std::runtime_error("cannot open " + path.string());
    write_fields(header);
  }

  template <class... Ts>
  void row(const Ts&... values) {
    std::vector<std::string> fields;
    fields.reserve(sizeof...(Ts));
    (fields.push_back(field(values)), ...);
    write_fields(fields);
  }

  const std::filesystem::path& path() const { return path_; }

 private:
  static std::string field(double v) { return fmt_double(v); }
  static std::string field(const std::string& s) { return s; }
  static std::string field(const char* s) { return s; }
  template <class T>
    requires std::is_integral_v<T>
  static std::string field(T v) {
    return std::to_string(v);
  }

  void write_fields(const std::vector<std::string>& fields) {
    if (fields.size() != columns_)
      throw std::logic_error("CsvWriter: row has " + std::to_string(fields.size()) + " fields, header has " +
                             std::to_string(columns_));
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) os_ << ',';
      os_ << fields[i];
    }
    os_ << '\n';
    if (!os_) throw std::runtime_error("write failed: " + path_.string());
  }

  std::filesystem::path path_;
  std::size_t columns_;
  std::ofstream os_;
};

}  // namespace adm::io
