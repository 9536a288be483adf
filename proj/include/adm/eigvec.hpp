#pragma once

// Biorthogonal left/right eigenvector bases and participation ratios.

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "adm/common.hpp"
#include "adm/detail/lapack.hpp"
#include "adm/hilbert.hpp"
#include "adm/liouvillian.hpp"
#include "adm/spectra.hpp"

namespace adm {

struct BiorthogonalPair {
  CMatrix left;   // columns L_n, with L^H R = 1
  CMatrix right;  // columns R_n
  double defect = 0.0;  // max |(L^H R - 1)_ij|
  double rcond = 1.0;   // reciprocal 1-norm condition estimate of M = L^H R
  std::size_t row_swaps = 0;
};

inline constexpr double kOverlapConditionLimit = 1e12;

/// LU-based biorthogonalization. With M = L^H R = P M_L M_U (partial
/// pivoting, unit-diagonal M_L), the adjusted bases are
///   R -> R M_U^{-1},   L -> (L P) M_L^{-H},
/// which gives L^H R = 1. Triangular solves are used instead of inverses.
/// Columns are first scaled to unit norm. Inputs are consumed to keep the
/// peak footprint at three n x n matrices.
inline BiorthogonalPair biorthogonalize(CMatrix left, CMatrix right,
                                        std::span<const cplx> eigenvalues = {},
                                        double condition_limit = kOverlapConditionLimit) {
  if (left.rows() != right.rows() || left.cols() != right.cols())
    throw std::invalid_argument("biorthogonalize: left and right shapes differ");
  const auto n = static_cast<lapack_int>(right.cols());
  BiorthogonalPair out;
  if (n == 0) return out;

  left.colwise().normalize();
  right.colwise().normalize();
  CMatrix m = left.adjoint() * right;
  const double anorm = m.cwiseAbs().colwise().sum().maxCoeff();
  std::vector<lapack_int> ipiv(static_cast<std::size_t>(n));
  const lapack_int info = LAPACKE_zgetrf(LAPACK_COL_MAJOR, n, n, m.data(), n, ipiv.data());
  if (info < 0) throw std::logic_error("zgetrf: illegal argument");

  auto cluster = [&](Eigen::Index k) {
    std::string s = "column " + std::to_string(k);
    if (static_cast<std::size_t>(k) < eigenvalues.size()) {
      const cplx v = eigenvalues[static_cast<std::size_t>(k)];
      s += " (eigenvalue " + std::to_string(v.real()) + (v.imag() < 0 ? "" : "+") +
           std::to_string(v.imag()) + "i)";
    }
    return s;
  };
  Eigen::Index worst = 0;
  m.diagonal().cwiseAbs().minCoeff(&worst);
  if (info > 0) {
    throw NumericalError("biorthogonalize: overlap matrix L^H R is singular at " +
                         cluster(info - 1) + "; defective or degenerate eigenvector pair");
  }
  double rcond = 0.0;
  if (LAPACKE_zgecon(LAPACK_COL_MAJOR, '1', n, m.data(), n, anorm, &rcond) != 0)
    throw NumericalError("biorthogonalize: condition estimate failed");
  out.rcond = rcond;
  // With unit columns |M_ij| <= 1, so ||M^-1|| = 1 / (rcond ||M||) is
  // checked as well; it catches uniformly small overlaps.
  const double inv_norm = rcond > 0.0 && anorm > 0.0 ? 1.0 / (rcond * anorm) : INFINITY;
  if (rcond * condition_limit < 1.0 || inv_norm > condition_limit) {
    throw NumericalError("biorthogonalize: overlap matrix condition estimate " +
                         std::to_string(std::max(1.0 / rcond, inv_norm)) + " exceeds limit near " +
                         cluster(worst) + "; defective or near-degenerate eigenvector pair");
  }

  // R M_U = R_old
  m.triangularView<Eigen::Upper>().solveInPlace<Eigen::OnTheRight>(right);
  // L <- L P: replay the row interchanges of M as column swaps of L.
  for (lapack_int i = 0; i < n; ++i) {
    const lapack_int p = ipiv[static_cast<std::size_t>(i)] - 1;
    if (p != i) {
      left.col(i).swap(left.col(p));
      ++out.row_swaps;
    }
  }
  // L M_L^H = L_old
  m.triangularView<Eigen::UnitLower>().adjoint().solveInPlace<Eigen::OnTheRight>(left);

  m.noalias() = left.adjoint() * right;
  m.diagonal().array() -= cplx(1.0);
  out.defect = m.cwiseAbs().maxCoeff();
  out.left = std::move(left);
  out.right = std::move(right);
  return out;
}

/// P = (sum_i psi_i)^2 / sum_i psi_i^2 with psi_i = |<b_i|state>|^2.
inline double participation_ratio(const Eigen::Ref<const CVector>& state) {
  double s1 = 0.0, s2 = 0.0;
  for (Eigen::Index i = 0; i < state.size(); ++i) {
    const double p = std::norm(state[i]);
    s1 += p;
    s2 += p * p;
  }
  if (s2 == 0.0) throw std::invalid_argument("participation_ratio: zero vector");
  return s1 * s1 / s2;
}

struct BiorthogonalPR {
  double value = 0.0;
  /// sum_i |psi~_i| / |sum_i psi~_i|; large values flag cancelling overlaps.
  double condition = 1.0;
};

inline constexpr double kBiorthogonalNormTolerance = 1e-8;

/// P_B = (sum_i |psi~_i|)^2 / sum_i |psi~_i|^2 with psi~_i = <L|b_i>^* <R|b_i>,
/// so |psi~_i| = |l_i| |r_i|. Requires <L|R> = 1.
inline BiorthogonalPR participation_ratio_biorthogonal(const Eigen::Ref<const CVector>& left,
                                                       const Eigen::Ref<const CVector>& right,
                                                       double tol = kBiorthogonalNormTolerance) {
  if (left.size() != right.size())
    throw std::invalid_argument("participation_ratio_biorthogonal: size mismatch");
  const cplx overlap = left.dot(right);
  if (std::abs(overlap - 1.0) > tol) {
    throw std::invalid_argument("participation_ratio_biorthogonal: pair not normalized (<L|R> = " +
                                std::to_string(overlap.real()) + "+" + std::to_string(overlap.imag()) +
                                "i)");
  }
  double s1 = 0.0, s2 = 0.0;
  for (Eigen::Index i = 0; i < left.size(); ++i) {
    const double a = std::abs(std::conj(left[i]) * right[i]);
    s1 += a;
    s2 += a * a;
  }
  if (s2 == 0.0) throw std::invalid_argument("participation_ratio_biorthogonal: vanishing overlap");
  return {s1 * s1 / s2, s1 / std::abs(overlap)};
}

struct PRReport {
  std::vector<double> right, left, biorth;
  double avg_right = 0.0, avg_left = 0.0, avg_biorth = 0.0;
  double max_condition = 1.0;
  std::size_t sector_dim = 0;  // divisor of the averages
  double defect = 0.0;
};

inline PRReport pr_report(const BiorthogonalPair& pair) {
  PRReport rep;
  const Eigen::Index n = pair.right.cols();
  rep.sector_dim = static_cast<std::size_t>(n);
  rep.defect = pair.defect;
  rep.right.resize(static_cast<std::size_t>(n));
  rep.left.resize(static_cast<std::size_t>(n));
  rep.biorth.resize(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    rep.right[ku] = participation_ratio(pair.right.col(k));
    rep.left[ku] = participation_ratio(pair.left.col(k));
    const auto b = participation_ratio_biorthogonal(pair.left.col(k), pair.right.col(k));
    rep.biorth[ku] = b.value;
    rep.max_condition = std::max(rep.max_condition, b.condition);
    rep.avg_right += rep.right[ku];
    rep.avg_left += rep.left[ku];
    rep.avg_biorth += rep.biorth[ku];
  }
  if (n > 0) {
    rep.avg_right /= static_cast<double>(n);
    rep.avg_left /= static_cast<double>(n);
    rep.avg_biorth /= static_cast<double>(n);
  }
  return rep;
}

struct PRPoint {
  double g1 = 0.0, g2 = 0.0;
  double pr_left = 0.0, pr_right = 0.0, pr_biorth = 0.0;
  std::size_t sector_dim = 0;
  double defect_norm = 0.0;
  bool ok = false;
  std::string error;
};

/// Participation-ratio averages at one coupling point.
inline PRPoint pr_point(const ModelParams& base, double g1, double g2, Sector sector,
                        const SpectrumOptions& opt = {}) {
  PRPoint pt;
  pt.g1 = g1;
  pt.g2 = g2;
  try {
    ModelParams p = base;
    p.g1 = g1;
    p.g2 = g2;
    const BasisMap basis(p);
    SuperOperator l = select_sector(build_liouvillian(p, {}, {}, opt.budget), basis, sector);
    Spectrum spec = eigendecompose(l, VectorMode::Both, opt);
    l = SuperOperator{};
    auto pair = biorthogonalize(std::move(*spec.left), std::move(*spec.right), spec.eigenvalues);
    const auto rep = pr_report(pair);
    pt.pr_left = rep.avg_left;
    pt.pr_right = rep.avg_right;
    pt.pr_biorth = rep.avg_biorth;
    pt.sector_dim = rep.sector_dim;
    pt.defect_norm = rep.defect;
    pt.ok = true;
  } catch (const std::exception& e) {
    pt.error = e.what();
  }
  return pt;
}

/// Sequential sweep over (g1, g2) pairs; failures are recorded per point.
inline std::vector<PRPoint> pr_phase_map(const std::vector<std::pair<double, double>>& grid,
                                         const ModelParams& base, Sector sector = Sector::Even,
                                         const SpectrumOptions& opt = {}) {
  std::vector<PRPoint> out;
  out.reserve(grid.size());
  for (const auto& [g1, g2] : grid) out.push_back(pr_point(base, g1, g2, sector, opt));
  return out;
}

}  // namespace adm
