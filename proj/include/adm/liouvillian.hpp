#pragma once

// Vectorized Lindblad generator for the leaky-cavity anisotropic Dicke model.
//
// Doubled basis: |n_l, m_l> (x) |n_r, m_r>, flat index l * N_D + r, so that
// vec(rho)[l * N_D + r] = rho(l, r) (row stacking). In this convention
// vec(A rho B) = (A (x) B^T) vec(rho), and the generator reads
//
//   L = -i (H (x) 1 - 1 (x) H^T) + kappa (2 a (x) a^* - a^dag a (x) 1 - 1 (x) (a^dag a)^T).

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "adm/common.hpp"
#include "adm/hilbert.hpp"

namespace adm {

enum class Sector { Full, Even, Odd };

inline const char* to_string(Sector s) {
  switch (s) {
    case Sector::Full: return "full";
    case Sector::Even: return "even";
    case Sector::Odd: return "odd";
  }
  return "?";
}

inline Sector sector_from_string(const std::string& s) {
  if (s == "full") return Sector::Full;
  if (s == "even") return Sector::Even;
  if (s == "odd") return Sector::Odd;
  throw std::invalid_argument("unknown sector '" + s + "' (expected even, odd or full)");
}

inline constexpr const char* kConvention = "row-stacked;left-major;boson(x)spin";

struct SuperOperator {
  SparseC matrix;
  Sector sector = Sector::Full;
  /// Doubled-basis indices spanned by this block, ascending; empty for Full.
  std::vector<std::size_t> indices;
  ModelParams params;
  std::string convention = kConvention;

  Eigen::Index dim() const { return matrix.rows(); }

  /// Doubled-basis index of block row i.
  std::size_t global_index(std::size_t i) const { return indices.empty() ? i : indices[i]; }

  CMatrix to_dense(const MemoryBudget& budget = {}) const {
    budget.require_dense(static_cast<std::size_t>(dim()),
                         std::string("SuperOperator(") + to_string(sector) + ")");
    return CMatrix(matrix);
  }
};

/// Sparse storage estimate for the full generator (triplets + CSC arrays).
inline std::size_t liouvillian_bytes_estimate(const ModelParams& p) {
  const std::size_t nd = static_cast<std::size_t>(p.hilbert_dim());
  const std::size_t per_row = 10;  // 5 coherent terms x 2 sides
  return nd * nd * per_row * (sizeof(Triplet) + sizeof(cplx) + sizeof(std::int64_t));
}

inline SuperOperator build_liouvillian(const ModelParams& params,
                                       std::optional<double> g1_override = {},
                                       std::optional<double> g2_override = {},
                                       const MemoryBudget& budget = {}) {
  params.validate();
  const std::size_t need = liouvillian_bytes_estimate(params);
  if (need > budget.bytes) {
    throw BudgetError("build_liouvillian: N_L = " + std::to_string(params.liouville_dim()) +
                      " needs about " + std::to_string(need) + " bytes of sparse storage, budget is " +
                      std::to_string(budget.bytes) + " bytes");
  }
  const SparseC h = hamiltonian(params, g1_override, g2_override);
  const auto ops = product_operators(params);
  const SparseC id = sparse_identity(params.hilbert_dim());

  const SparseC ht = SparseC(h.transpose());
  SparseC coherent = kron(h, id) - kron(id, ht);
  SparseC l = cplx(0.0, -1.0) * coherent;
  if (params.kappa != 0.0) {
    const SparseC aconj = SparseC(ops.a.conjugate());
    const SparseC numt = SparseC(ops.number.transpose());
    SparseC diss = 2.0 * kron(ops.a, aconj) - kron(ops.number, id) - kron(id, numt);
    l += params.kappa * diss;
  }
  l.prune(cplx(0.0));
  l.makeCompressed();

  SuperOperator out;
  out.matrix = std::move(l);
  out.sector = Sector::Full;
  out.params = params;
  if (g1_override) out.params.g1 = *g1_override;
  if (g2_override) out.params.g2 = *g2_override;
  return out;
}

/// Super-parity parity(l) * parity(r) of every doubled-basis state.
inline std::vector<int> super_parity(const BasisMap& basis) {
  const std::size_t nd = basis.size();
  std::vector<int> sp(nd * nd);
  for (std::size_t l = 0; l < nd; ++l)
    for (std::size_t r = 0; r < nd; ++r) sp[l * nd + r] = basis.parity(l) * basis.parity(r);
  return sp;
}

inline std::vector<std::size_t> sector_indices(const BasisMap& basis, Sector s) {
  const auto sp = super_parity(basis);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < sp.size(); ++i) {
    if (s == Sector::Full || (s == Sector::Even && sp[i] == 1) || (s == Sector::Odd && sp[i] == -1))
      idx.push_back(i);
  }
  return idx;
}

struct SectorSplit {
  SuperOperator even, odd;
  /// permutation[i] = doubled-basis index placed at position i
  /// (even block first, then odd block).
  std::vector<std::size_t> permutation;
  double max_cross_entry = 0.0;
};

inline constexpr double kCrossBlockTolerance = 1e-12;

inline SectorSplit parity_sectors(const SuperOperator& l, const BasisMap& basis) {
  if (l.sector != Sector::Full)
    throw std::invalid_argument("parity_sectors: expects the full generator");
  const std::size_t nd = basis.size();
  if (static_cast<std::size_t>(l.dim()) != nd * nd)
    throw std::invalid_argument("parity_sectors: basis does not match generator dimension");

  const auto sp = super_parity(basis);
  std::vector<std::int64_t> pos(sp.size());
  SectorSplit out;
  std::vector<std::size_t> even_idx, odd_idx;
  for (std::size_t i = 0; i < sp.size(); ++i) {
    if (sp[i] == 1) {
      pos[i] = static_cast<std::int64_t>(even_idx.size());
      even_idx.push_back(i);
    } else {
      pos[i] = static_cast<std::int64_t>(odd_idx.size());
      odd_idx.push_back(i);
    }
  }

  std::vector<Triplet> te, to;
  te.reserve(static_cast<std::size_t>(l.matrix.nonZeros() / 2 + 1));
  to.reserve(static_cast<std::size_t>(l.matrix.nonZeros() / 2 + 1));
  for (Eigen::Index c = 0; c < l.matrix.outerSize(); ++c) {
    for (SparseC::InnerIterator it(l.matrix, c); it; ++it) {
      const auto r = static_cast<std::size_t>(it.row());
      const auto cc = static_cast<std::size_t>(it.col());
      if (sp[r] != sp[cc]) {
        out.max_cross_entry = std::max(out.max_cross_entry, std::abs(it.value()));
        continue;
      }
      (sp[r] == 1 ? te : to).emplace_back(pos[r], pos[cc], it.value());
    }
  }
  if (out.max_cross_entry > kCrossBlockTolerance) {
    throw NumericalError("parity_sectors: cross-sector entry of magnitude " +
                         std::to_string(out.max_cross_entry) +
                         " (basis convention mismatch)");
  }

  auto make = [&](std::vector<Triplet>& t, std::vector<std::size_t>& idx, Sector s) {
    SuperOperator b;
    const auto d = static_cast<Eigen::Index>(idx.size());
    b.matrix.resize(d, d);
    b.matrix.setFromTriplets(t.begin(), t.end());
    b.matrix.makeCompressed();
    b.sector = s;
    b.indices = idx;
    b.params = l.params;
    b.convention = l.convention;
    return b;
  };
  out.permutation = even_idx;
  out.permutation.insert(out.permutation.end(), odd_idx.begin(), odd_idx.end());
  out.even = make(te, even_idx, Sector::Even);
  out.odd = make(to, odd_idx, Sector::Odd);
  return out;
}

/// One block of the generator (or the generator itself for Sector::Full).
inline SuperOperator select_sector(const SuperOperator& full, const BasisMap& basis, Sector s) {
  if (s == Sector::Full) return full;
  auto split = parity_sectors(full, basis);
  return s == Sector::Even ? std::move(split.even) : std::move(split.odd);
}

// ---------------------------------------------------------------------------
// Critical line of the dissipative model:
//   (g1^2 - g2^2)^2 - 2 (g1^2 + g2^2) w w0 + (w^2 + kappa^2) w0^2 = 0

inline double critical_residual(double omega, double omega0, double kappa, double g1, double g2) {
  const double d = g1 * g1 - g2 * g2;
  return d * d - 2.0 * (g1 * g1 + g2 * g2) * omega * omega0 +
         (omega * omega + kappa * kappa) * omega0 * omega0;
}

/// Isotropic critical coupling g* = (1/2) sqrt(w w0) sqrt(1 + kappa^2 / w^2).
inline double critical_coupling_isotropic(const ModelParams& p) {
  if (!(p.omega > 0.0) || !(p.omega0 > 0.0))
    throw std::invalid_argument("critical_coupling: omega and omega0 must be > 0");
  return 0.5 * std::sqrt(p.omega * p.omega0) * std::sqrt(1.0 + p.kappa * p.kappa / (p.omega * p.omega));
}

struct CriticalRoots {
  std::vector<double> g2;
  std::vector<double> residual;
  std::string note;  // set when no real root exists
};

/// Real nonnegative g2 on the critical line for a given g1, ascending.
/// The quartic is a quadratic in x = g2^2 with roots
///   x = (g1^2 + w w0) +- sqrt(4 g1^2 w w0 - kappa^2 w0^2).
inline CriticalRoots critical_g2_given_g1(const ModelParams& p, double g1) {
  if (!(p.omega > 0.0) || !(p.omega0 > 0.0))
    throw std::invalid_argument("critical_coupling: omega and omega0 must be > 0");
  CriticalRoots out;
  const double ww = p.omega * p.omega0;
  const double disc = 4.0 * g1 * g1 * ww - p.kappa * p.kappa * p.omega0 * p.omega0;
  if (disc < 0.0) {
    out.note = "no real solution: 4 g1^2 w w0 < kappa^2 w0^2";
    return out;
  }
  const double b = g1 * g1 + ww;
  const double sq = std::sqrt(disc);
  // Numerically stable pair: x_hi = b + sq, x_lo = c / x_hi.
  const double c = std::pow(g1, 4) - 2.0 * g1 * g1 * ww + (p.omega * p.omega + p.kappa * p.kappa) * p.omega0 * p.omega0;
  const double x_hi = b + sq;
  const double x_lo = x_hi != 0.0 ? c / x_hi : b - sq;
  for (double x : {x_lo, x_hi}) {
    if (x < 0.0) continue;
    const double g2 = std::sqrt(x);
    if (!out.g2.empty() && g2 == out.g2.back()) continue;
    out.g2.push_back(g2);
    out.residual.push_back(critical_residual(p.omega, p.omega0, p.kappa, g1, g2));
  }
  if (out.g2.empty()) out.note = "no real nonnegative root";
  return out;
}

}  // namespace adm
