#pragma once

// Truncated spin-boson Hilbert space of the anisotropic Dicke model.
//
// Basis convention: product states |n, m> ordered boson-major, i.e. the flat
// index of (n, m) is n * (N + 1) + (m + J). All composite operators are built
// as (boson factor) (x) (spin factor) so that Kronecker products line up with
// this ordering.

#include <cmath>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "adm/common.hpp"

namespace adm {

struct ModelParams {
  double omega = 1.0;   // boson mode frequency
  double omega0 = 1.0;  // atomic level splitting
  double g1 = 0.0;      // rotating coupling
  double g2 = 0.0;      // counter-rotating coupling
  double kappa = 0.0;   // cavity decay rate
  int n_atoms = 1;
  int n_max = 1;            // boson cutoff (max occupation)
  double drive_amp = 0.0;   // Omega
  double drive_T = 0.1256637061435917;  // 2*pi/50

  void validate() const {
    if (!(omega >= 0.0) || !(omega0 >= 0.0) || !(kappa >= 0.0))
      throw std::invalid_argument("ModelParams: omega, omega0, kappa must be >= 0");
    if (n_atoms < 1) throw std::invalid_argument("ModelParams: n_atoms must be >= 1");
    if (n_max < 1) throw std::invalid_argument("ModelParams: n_max must be >= 1");
    if (!(drive_amp >= 0.0)) throw std::invalid_argument("ModelParams: drive_amp must be >= 0");
    if (!(drive_T > 0.0)) throw std::invalid_argument("ModelParams: drive_T must be > 0");
    if (!std::isfinite(g1) || !std::isfinite(g2))
      throw std::invalid_argument("ModelParams: couplings must be finite");
  }

  double spin_j() const { return 0.5 * n_atoms; }
  int spin_dim() const { return n_atoms + 1; }
  int boson_dim() const { return n_max + 1; }
  int hilbert_dim() const { return spin_dim() * boson_dim(); }
  std::size_t liouville_dim() const {
    const auto d = static_cast<std::size_t>(hilbert_dim());
    return d * d;
  }

  /// Stable textual form used for hashing and provenance records.
  std::string canonical() const {
    char buf[320];
    std::snprintf(buf, sizeof buf,
                  "omega=%.17g;omega0=%.17g;g1=%.17g;g2=%.17g;kappa=%.17g;"
                  "N=%d;n_max=%d;drive_amp=%.17g;drive_T=%.17g",
                  omega, omega0, g1, g2, kappa, n_atoms, n_max, drive_amp, drive_T);
    return buf;
  }
};

/// 64-bit FNV-1a, used for cache keys and config hashes.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct BasisEntry {
  int n;     // boson occupation
  int k;     // m + J, in 0..N
  double m;  // magnetic quantum number
  int parity;
};

class BasisMap {
 public:
  explicit BasisMap(const ModelParams& params) : n_atoms_(params.n_atoms), n_max_(params.n_max) {
    params.validate();
    const double j = params.spin_j();
    entries_.reserve(static_cast<std::size_t>(params.hilbert_dim()));
    for (int n = 0; n <= n_max_; ++n) {
      for (int k = 0; k <= n_atoms_; ++k) {
        entries_.push_back({n, k, k - j, parity_of(n, k)});
      }
    }
  }

  std::size_t size() const { return entries_.size(); }
  const BasisEntry& operator[](std::size_t i) const { return entries_[i]; }
  const std::vector<BasisEntry>& entries() const { return entries_; }
  int spin_dim() const { return n_atoms_ + 1; }
  int boson_dim() const { return n_max_ + 1; }

  std::size_t index(int n, int k) const {
    if (n < 0 || n > n_max_ || k < 0 || k > n_atoms_)
      throw std::out_of_range("BasisMap::index: (n, m+J) outside the truncated space");
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(n_atoms_ + 1) +
           static_cast<std::size_t>(k);
  }

  /// (-1)^(n + m + J); m + J is the integer k.
  static int parity_of(int n, int k) { return ((n + k) % 2 == 0) ? 1 : -1; }

  int parity(std::size_t i) const { return entries_[i].parity; }

  std::size_t count_parity(int sign) const {
    std::size_t c = 0;
    for (const auto& e : entries_) c += (e.parity == sign);
    return c;
  }

 private:
  int n_atoms_;
  int n_max_;
  std::vector<BasisEntry> entries_;
};

inline BasisMap build_basis(const ModelParams& params) { return BasisMap(params); }

struct SpinOperators {
  SparseC jz, jplus, jminus;
};

struct BosonOperators {
  SparseC a, adag;
};

/// Collective spin operators in the symmetric J = N/2 sector, basis |J, m>
/// ordered by m ascending.
inline SpinOperators spin_operators(int n_atoms) {
  if (n_atoms < 1) throw std::invalid_argument("spin_operators: n_atoms must be >= 1");
  const int d = n_atoms + 1;
  const double j = 0.5 * n_atoms;
  std::vector<Triplet> tz, tp;
  for (int k = 0; k < d; ++k) {
    const double m = k - j;
    if (m != 0.0) tz.emplace_back(k, k, m);
    if (k + 1 < d) tp.emplace_back(k + 1, k, std::sqrt(j * (j + 1) - m * (m + 1)));
  }
  SpinOperators ops;
  ops.jz.resize(d, d);
  ops.jz.setFromTriplets(tz.begin(), tz.end());
  ops.jplus.resize(d, d);
  ops.jplus.setFromTriplets(tp.begin(), tp.end());
  ops.jminus = SparseC(ops.jplus.adjoint());
  return ops;
}

/// Truncated Fock-space ladder operators; a|n> = sqrt(n)|n-1>.
inline BosonOperators boson_operators(int n_max) {
  if (n_max < 1) throw std::invalid_argument("boson_operators: n_max must be >= 1");
  const int d = n_max + 1;
  std::vector<Triplet> t;
  for (int n = 1; n < d; ++n) t.emplace_back(n - 1, n, std::sqrt(static_cast<double>(n)));
  BosonOperators ops;
  ops.a.resize(d, d);
  ops.a.setFromTriplets(t.begin(), t.end());
  ops.adag = SparseC(ops.a.adjoint());
  return ops;
}

/// Sparse Kronecker product A (x) B.
inline SparseC kron(const SparseC& a, const SparseC& b) {
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(a.nonZeros() * b.nonZeros()));
  for (Eigen::Index ca = 0; ca < a.outerSize(); ++ca) {
    for (SparseC::InnerIterator ia(a, ca); ia; ++ia) {
      for (Eigen::Index cb = 0; cb < b.outerSize(); ++cb) {
        for (SparseC::InnerIterator ib(b, cb); ib; ++ib) {
          t.emplace_back(ia.row() * b.rows() + ib.row(), ia.col() * b.cols() + ib.col(),
                         ia.value() * ib.value());
        }
      }
    }
  }
  SparseC out(a.rows() * b.rows(), a.cols() * b.cols());
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

inline SparseC sparse_identity(Eigen::Index d) {
  SparseC id(d, d);
  id.setIdentity();
  return id;
}

/// Product-space operators: a (x) 1, a^dag a (x) 1, 1 (x) J_alpha.
struct ProductOperators {
  SparseC a, adag, number, jz, jplus, jminus;
};

inline ProductOperators product_operators(const ModelParams& params) {
  params.validate();
  const auto s = spin_operators(params.n_atoms);
  const auto b = boson_operators(params.n_max);
  const SparseC is = sparse_identity(params.spin_dim());
  const SparseC ib = sparse_identity(params.boson_dim());
  ProductOperators p;
  p.a = kron(b.a, is);
  p.adag = kron(b.adag, is);
  p.number = kron(SparseC(b.adag * b.a), is);
  p.jz = kron(ib, s.jz);
  p.jplus = kron(ib, s.jplus);
  p.jminus = kron(ib, s.jminus);
  return p;
}

/// H = w a^dag a + w0 Jz + g1/sqrt(N) (a^dag J- + a J+) + g2/sqrt(N) (a^dag J+ + a J-).
inline SparseC hamiltonian(const ModelParams& params, std::optional<double> g1_override = {},
                           std::optional<double> g2_override = {}) {
  const auto p = product_operators(params);
  const double g1 = g1_override.value_or(params.g1);
  const double g2 = g2_override.value_or(params.g2);
  const double norm = 1.0 / std::sqrt(static_cast<double>(params.n_atoms));
  SparseC h = params.omega * p.number + params.omega0 * p.jz;
  if (g1 != 0.0) h += (g1 * norm) * SparseC(p.adag * p.jminus + p.a * p.jplus);
  if (g2 != 0.0) h += (g2 * norm) * SparseC(p.adag * p.jplus + p.a * p.jminus);
  h.prune(cplx(0.0));
  return h;
}

/// Diagonal parity operator exp(i pi (a^dag a + Jz + J)).
inline SparseC parity_operator(const BasisMap& basis) {
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < basis.size(); ++i)
    t.emplace_back(static_cast<std::int64_t>(i), static_cast<std::int64_t>(i),
                   static_cast<double>(basis.parity(i)));
  SparseC p(static_cast<Eigen::Index>(basis.size()), static_cast<Eigen::Index>(basis.size()));
  p.setFromTriplets(t.begin(), t.end());
  return p;
}

}  // namespace adm
