#pragma once

// Dense non-Hermitian eigendecomposition of Liouvillian blocks, the
// Liouvillian gap, the steady state and power-law fits of gap versus size.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "adm/common.hpp"
#include "adm/detail/lapack.hpp"
#include "adm/detail/nearest.hpp"
#include "adm/hilbert.hpp"
#include "adm/liouvillian.hpp"
#include "adm/state.hpp"

namespace adm {

enum class VectorMode { None, Right, Both };

struct SpectrumOptions {
  MemoryBudget budget{};
  double residual_tolerance = 1e-8;
  bool check_residuals = true;
};

struct Spectrum {
  std::vector<cplx> eigenvalues;
  std::optional<CMatrix> right;  // columns aligned with eigenvalues
  std::optional<CMatrix> left;   // u_k with u_k^H L = lambda_k u_k^H
  ModelParams params;
  Sector sector = Sector::Full;
  std::vector<std::size_t> indices;  // doubled-basis embedding of the block
  double max_residual = 0.0;

  std::size_t dim() const { return eigenvalues.size(); }
  std::size_t global_index(std::size_t i) const { return indices.empty() ? i : indices[i]; }
};

/// Real part descending, then imaginary part ascending.
inline bool eigenvalue_order(const cplx& a, const cplx& b) {
  if (a.real() != b.real()) return a.real() > b.real();
  return a.imag() < b.imag();
}

namespace detail {

/// Reorders columns in place so that new column i is old column perm[i].
inline void permute_columns(CMatrix& m, const std::vector<std::size_t>& perm) {
  const std::size_t n = perm.size();
  std::vector<char> done(n, 0);
  CVector tmp(m.rows());
  for (std::size_t s = 0; s < n; ++s) {
    if (done[s] || perm[s] == s) {
      done[s] = 1;
      continue;
    }
    tmp = m.col(static_cast<Eigen::Index>(s));
    std::size_t j = s;
    while (perm[j] != s) {
      m.col(static_cast<Eigen::Index>(j)) = m.col(static_cast<Eigen::Index>(perm[j]));
      done[j] = 1;
      j = perm[j];
    }
    m.col(static_cast<Eigen::Index>(j)) = tmp;
    done[j] = 1;
  }
}

inline double sparse_frobenius(const SparseC& m) {
  double s = 0.0;
  for (Eigen::Index k = 0; k < m.outerSize(); ++k)
    for (SparseC::InnerIterator it(m, k); it; ++it) s += std::norm(it.value());
  return std::sqrt(s);
}

/// max_k || op(A) v_k - mu_k v_k || / ||A||_F, processed in column blocks.
inline double eigen_residual(const SparseC& a, const CMatrix& v, std::span<const cplx> values,
                             bool adjoint) {
  const double na = sparse_frobenius(a);
  if (na == 0.0) return 0.0;
  const Eigen::Index n = v.cols();
  const Eigen::Index block = 256;
  double worst = 0.0;
  SparseC ah;
  if (adjoint) ah = a.adjoint();
  const SparseC& op = adjoint ? ah : a;
  for (Eigen::Index c0 = 0; c0 < n; c0 += block) {
    const Eigen::Index w = std::min(block, n - c0);
    CMatrix y = op * v.middleCols(c0, w);
    for (Eigen::Index j = 0; j < w; ++j) {
      const cplx mu = adjoint ? std::conj(values[c0 + j]) : values[c0 + j];
      y.col(j) -= mu * v.col(c0 + j);
      worst = std::max(worst, y.col(j).norm() / std::max(v.col(c0 + j).norm(), 1e-300));
    }
  }
  return worst / na;
}

}  // namespace detail

inline std::string describe(const ModelParams& p, Sector s) {
  return std::string("sector=") + to_string(s) + " " + p.canonical();
}

/// Full spectrum of a generator block via LAPACK zgeev. When both vector sets
/// are requested they come from the same Schur form, so column k of `left`
/// and `right` belong to the same eigenvalue by construction.
inline Spectrum eigendecompose(const SuperOperator& l, VectorMode mode,
                               const SpectrumOptions& opt = {}) {
  Spectrum spec;
  spec.params = l.params;
  spec.sector = l.sector;
  spec.indices = l.indices;
  const auto n = static_cast<std::size_t>(l.dim());
  if (n == 0) return spec;

  CVector w;
  CMatrix vl, vr;
  {
    CMatrix a = l.to_dense(opt.budget);
    const auto job = mode == VectorMode::None    ? detail::EigJob::None
                     : mode == VectorMode::Right ? detail::EigJob::Right
                                                 : detail::EigJob::Both;
    const int info = detail::zgeev(a, w, &vl, &vr, job);
    if (info < 0) throw std::logic_error("zgeev: illegal argument " + std::to_string(-info));
    if (info > 0) {
      throw NumericalError("eigendecompose: QR iteration failed to converge (info=" +
                           std::to_string(info) + ") for " + describe(l.params, l.sector));
    }
  }

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
    return eigenvalue_order(w[static_cast<Eigen::Index>(a)], w[static_cast<Eigen::Index>(b)]);
  });
  spec.eigenvalues.resize(n);
  for (std::size_t i = 0; i < n; ++i) spec.eigenvalues[i] = w[static_cast<Eigen::Index>(perm[i])];

  if (mode != VectorMode::None) {
    detail::permute_columns(vr, perm);
    if (opt.check_residuals) {
      spec.max_residual = detail::eigen_residual(l.matrix, vr, spec.eigenvalues, false);
    }
    spec.right = std::move(vr);
  }
  if (mode == VectorMode::Both) {
    detail::permute_columns(vl, perm);
    if (opt.check_residuals) {
      spec.max_residual = std::max(spec.max_residual,
                                   detail::eigen_residual(l.matrix, vl, spec.eigenvalues, true));
    }
    spec.left = std::move(vl);
  }
  if (opt.check_residuals && spec.max_residual > opt.residual_tolerance) {
    throw NumericalError("eigendecompose: eigenvector residual " + std::to_string(spec.max_residual) +
                         " exceeds " + std::to_string(opt.residual_tolerance) + " for " +
                         describe(l.params, l.sector));
  }
  return spec;
}

/// Pairs independently computed left eigenvectors (eigenvectors of L^H with
/// eigenvalues `left_values`) to right eigenvalues `right_values` by
/// proximity of conj(left) to right. Returns perm with left column perm[k]
/// matching right column k. Throws if a match is ambiguous.
inline std::vector<std::size_t> pair_by_eigenvalue(std::span<const cplx> right_values,
                                                   std::span<const cplx> left_values,
                                                   double tol = 1e-9) {
  if (right_values.size() != left_values.size())
    throw std::invalid_argument("pair_by_eigenvalue: size mismatch");
  const std::size_t n = right_values.size();
  std::vector<std::size_t> perm(n);
  std::vector<char> used(n, 0);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t best = n;
    double bd = std::numeric_limits<double>::infinity();
    std::size_t close = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = std::abs(std::conj(left_values[j]) - right_values[k]);
      if (d <= tol) ++close;
      if (!used[j] && d < bd) {
        bd = d;
        best = j;
      }
    }
    if (best == n || bd > tol)
      throw NumericalError("pair_by_eigenvalue: no left eigenvalue within tolerance of " +
                           std::to_string(right_values[k].real()) + "+" +
                           std::to_string(right_values[k].imag()) + "i");
    if (close > 1)
      throw NumericalError("pair_by_eigenvalue: ambiguous match near eigenvalue " +
                           std::to_string(right_values[k].real()) + "+" +
                           std::to_string(right_values[k].imag()) + "i");
    used[best] = 1;
    perm[k] = best;
  }
  return perm;
}

/// Eigenvalues of two blocks merged into one sorted list (no vectors).
inline Spectrum merge_spectra(const Spectrum& a, const Spectrum& b) {
  Spectrum out;
  out.params = a.params;
  out.sector = Sector::Full;
  out.eigenvalues = a.eigenvalues;
  out.eigenvalues.insert(out.eigenvalues.end(), b.eigenvalues.begin(), b.eigenvalues.end());
  std::stable_sort(out.eigenvalues.begin(), out.eigenvalues.end(), eigenvalue_order);
  return out;
}

/// Largest distance from conj(lambda) to the nearest eigenvalue.
inline double conjugate_pair_mismatch(std::span<const cplx> values) {
  const detail::PlanarIndex idx(values);
  double worst = 0.0;
  for (const cplx& v : values) worst = std::max(worst, idx.nearest(std::conj(v)).distance);
  return worst;
}

inline constexpr double kZeroTolerance = 1e-9;

inline std::size_t count_zero_modes(std::span<const cplx> values, double tol = kZeroTolerance) {
  return static_cast<std::size_t>(
      std::count_if(values.begin(), values.end(), [&](const cplx& v) { return std::abs(v) <= tol; }));
}

/// Smallest decay rate |Re lambda| among decaying modes. A zero eigenvalue
/// (|lambda| <= tol) must be present; non-decaying modes (|Re lambda| <= tol,
/// including purely oscillating ones) are excluded from the minimum.
inline double liouvillian_gap(std::span<const cplx> values, double tol = kZeroTolerance) {
  if (count_zero_modes(values, tol) == 0)
    throw NumericalError("liouvillian_gap: no zero eigenvalue within " + std::to_string(tol) +
                         " (truncation or solver failure)");
  double gap = std::numeric_limits<double>::infinity();
  for (const cplx& v : values) {
    const double re = std::abs(v.real());
    if (re > tol) gap = std::min(gap, re);
  }
  if (!std::isfinite(gap))
    throw NumericalError("liouvillian_gap: every eigenvalue is in the non-decaying cluster");
  return gap;
}

inline double liouvillian_gap(const Spectrum& spec, double tol = kZeroTolerance) {
  return liouvillian_gap(std::span<const cplx>(spec.eigenvalues), tol);
}

struct SteadyState {
  DensityState rho;
  double hermiticity_defect = 0.0;  // of the normalized mode before symmetrization
  double min_eigenvalue = 0.0;
  std::size_t zero_modes = 0;
};

/// Zero-eigenvalue right vector reshaped to N_D x N_D, Hermitized and
/// normalized to unit trace. With several zero modes the one with the
/// largest trace is used.
inline SteadyState steady_state(const Spectrum& spec, const BasisMap& basis,
                                double tol = kZeroTolerance) {
  if (!spec.right) throw std::invalid_argument("steady_state: right eigenvectors not available");
  const std::size_t nd = basis.size();
  const CMatrix& r = *spec.right;
  std::size_t best = spec.dim();
  double best_trace = -1.0;
  cplx best_tr = 0.0;
  SteadyState out;
  for (std::size_t k = 0; k < spec.dim(); ++k) {
    if (std::abs(spec.eigenvalues[k]) > tol) continue;
    ++out.zero_modes;
    cplx tr = 0.0;
    for (std::size_t i = 0; i < spec.dim(); ++i) {
      const std::size_t g = spec.global_index(i);
      if (g / nd == g % nd) tr += r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
    }
    if (std::abs(tr) > best_trace) {
      best_trace = std::abs(tr);
      best_tr = tr;
      best = k;
    }
  }
  if (best == spec.dim()) throw NumericalError("steady_state: no zero eigenvalue in spectrum");
  if (best_trace < 1e-12) throw NumericalError("steady_state: zero mode is traceless (unnormalizable)");

  CVector full = CVector::Zero(static_cast<Eigen::Index>(nd * nd));
  for (std::size_t i = 0; i < spec.dim(); ++i)
    full[static_cast<Eigen::Index>(spec.global_index(i))] =
        r(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(best)) / best_tr;
  DensityState raw;
  raw.vec = std::move(full);
  raw.n_d = static_cast<int>(nd);
  CMatrix rho = raw.matrix();
  out.hermiticity_defect = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  rho = 0.5 * (rho + rho.adjoint());
  rho /= rho.trace();
  Eigen::SelfAdjointEigenSolver<CMatrix> es(rho, Eigen::EigenvaluesOnly);
  out.min_eigenvalue = es.eigenvalues().minCoeff();
  out.rho = DensityState::from_matrix(rho);
  return out;
}

struct GapScalingFit {
  std::vector<std::pair<double, double>> points;  // (size, gap)
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;

  double predict_log_gap(double size) const { return slope * std::log(size) + intercept; }
};

/// Ordinary least squares of ln(gap) against ln(size).
inline GapScalingFit fit_gap_scaling(std::vector<std::pair<double, double>> points) {
  if (points.size() < 3) throw std::invalid_argument("fit_gap_scaling: need at least 3 points");
  for (const auto& [size, gap] : points) {
    if (!(gap > 0.0)) throw std::invalid_argument("fit_gap_scaling: gaps must be positive");
    if (!(size > 0.0)) throw std::invalid_argument("fit_gap_scaling: sizes must be positive");
  }
  const double n = static_cast<double>(points.size());
  double sx = 0, sy = 0;
  for (const auto& [size, gap] : points) {
    sx += std::log(size);
    sy += std::log(gap);
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& [size, gap] : points) {
    const double dx = std::log(size) - mx, dy = std::log(gap) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw std::invalid_argument("fit_gap_scaling: sizes must not all be equal");
  GapScalingFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (const auto& [size, gap] : points) {
    const double e = std::log(gap) - fit.predict_log_gap(size);
    ss_res += e * e;
  }
  fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  fit.points = std::move(points);
  return fit;
}

}  // namespace adm
