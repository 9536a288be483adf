#pragma once

// Spectral statistics for complex spectra: nearest-neighbour spacings,
// Gaussian-kernel unfolding, reference spacing densities (2D Poisson and
// GinUE), complex spacing ratios and a Ginibre sampler.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "adm/common.hpp"
#include "adm/detail/lapack.hpp"
#include "adm/detail/nearest.hpp"

namespace adm {

enum class NeighborMethod { Brute, Accelerated };

inline constexpr double kDuplicateTolerance = 1e-14;

struct Deduplicated {
  std::vector<cplx> values;
  std::size_t removed = 0;
};

/// Drops eigenvalues within `tol` of an earlier one (original order kept).
inline Deduplicated dedupe(std::span<const cplx> values, double tol = kDuplicateTolerance) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (values[a].real() != values[b].real()) return values[a].real() < values[b].real();
    if (values[a].imag() != values[b].imag()) return values[a].imag() < values[b].imag();
    return a < b;
  });
  std::vector<char> drop(n, 0);
  for (std::size_t p = 0; p < n; ++p) {
    const std::size_t i = order[p];
    for (std::size_t q = p + 1; q < n; ++q) {
      const std::size_t j = order[q];
      if (values[j].real() - values[i].real() > tol) break;
      if (std::abs(values[j] - values[i]) <= tol) drop[std::max(i, j)] = 1;
    }
  }
  Deduplicated out;
  for (std::size_t i = 0; i < n; ++i) {
    if (drop[i])
      ++out.removed;
    else
      out.values.push_back(values[i]);
  }
  return out;
}

/// Removes the steady-state cluster |lambda| <= tol before statistics.
inline std::vector<cplx> exclude_zero_cluster(std::span<const cplx> values, double tol = 1e-9) {
  std::vector<cplx> out;
  out.reserve(values.size());
  for (const cplx& v : values)
    if (std::abs(v) > tol) out.push_back(v);
  return out;
}

struct NNSpacings {
  std::vector<double> s;
  std::size_t duplicates_removed = 0;
};

namespace detail {

/// Two nearest neighbours of every point, ties broken by lower index.
inline std::vector<std::array<Neighbor, 2>> two_nearest(std::span<const cplx> pts, NeighborMethod method) {
  const std::size_t n = pts.size();
  std::vector<std::array<Neighbor, 2>> out(n);
  if (method == NeighborMethod::Accelerated) {
    const PlanarIndex idx(pts);
    for (std::size_t i = 0; i < n; ++i) out[i] = idx.nearest_to_member<2>(i);
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    Neighbor b0, b1;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const Neighbor c{j, std::abs(pts[j] - pts[i])};
      if (neighbor_less(c, b0)) {
        b1 = b0;
        b0 = c;
      } else if (neighbor_less(c, b1)) {
        b1 = c;
      }
    }
    out[i] = {b0, b1};
  }
  return out;
}

}  // namespace detail

/// s_i = min_{j != i} |E_i - E_j| after removing exact duplicates.
inline NNSpacings nn_spacings(std::span<const cplx> eigenvalues,
                              NeighborMethod method = NeighborMethod::Brute) {
  if (eigenvalues.size() < 3) throw std::invalid_argument("nn_spacings: need at least 3 eigenvalues");
  auto d = dedupe(eigenvalues);
  if (d.values.size() < 2) throw std::invalid_argument("nn_spacings: all eigenvalues identical");
  NNSpacings out;
  out.duplicates_removed = d.removed;
  const auto nb = detail::two_nearest(d.values, method);
  out.s.reserve(nb.size());
  for (const auto& pair : nb) out.s.push_back(pair[0].distance);
  return out;
}

struct UnfoldedSpacings {
  std::vector<double> raw;
  std::vector<double> unfolded;
  double sigma = 0.0;
  double mean_raw = 0.0;
  std::size_t duplicates_removed = 0;
};

inline constexpr double kUnfoldingBandwidth = 4.5;  // sigma in units of the mean spacing

/// Gaussian-kernel unfolding: s'_i = s_i sqrt(rho_av(E_i)) / s_bar with
/// sigma = 4.5 s_bar, followed by a rescale to unit mean.
inline UnfoldedSpacings unfold(std::span<const cplx> eigenvalues,
                               NeighborMethod method = NeighborMethod::Brute) {
  if (eigenvalues.size() < 10) throw std::invalid_argument("unfold: need at least 10 eigenvalues");
  auto d = dedupe(eigenvalues);
  const auto& e = d.values;
  const std::size_t n = e.size();
  const auto nb = detail::two_nearest(e, method);

  UnfoldedSpacings out;
  out.duplicates_removed = d.removed;
  out.raw.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.raw[i] = nb[i][0].distance;
  out.mean_raw = std::accumulate(out.raw.begin(), out.raw.end(), 0.0) / static_cast<double>(n);
  if (!(out.mean_raw > 0.0)) throw std::invalid_argument("unfold: mean spacing is zero");
  out.sigma = kUnfoldingBandwidth * out.mean_raw;

  const double inv2s2 = 1.0 / (2.0 * out.sigma * out.sigma);
  const double norm = 1.0 / (2.0 * std::numbers::pi * out.sigma * out.sigma * static_cast<double>(n));
  out.unfolded.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += std::exp(-std::norm(e[i] - e[j]) * inv2s2);
    out.unfolded[i] = out.raw[i] * std::sqrt(norm * acc) / out.mean_raw;
  }
  const double mean = std::accumulate(out.unfolded.begin(), out.unfolded.end(), 0.0) / static_cast<double>(n);
  for (double& s : out.unfolded) s /= mean;
  return out;
}

// --- reference densities ----------------------------------------------------

inline double pdf_poisson2d(double s) {
  if (s < 0.0) throw std::invalid_argument("pdf_poisson2d: s must be >= 0");
  return 0.5 * std::numbers::pi * s * std::exp(-0.25 * std::numbers::pi * s * s);
}

inline double cdf_poisson2d(double s) { return s <= 0.0 ? 0.0 : 1.0 - std::exp(-0.25 * std::numbers::pi * s * s); }

inline constexpr int kGinueTruncation = 100;

namespace detail {

inline double log_add(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a + std::log1p(std::exp(b - a));
}

/// ln Gamma(1 + k, x) - ln k! = ln Q(k + 1, x) = -x + ln sum_{i<=k} x^i / i!,
/// for k = 0..K.
inline std::vector<double> log_regularized_upper_gamma(int kmax, double x) {
  std::vector<double> out(static_cast<std::size_t>(kmax) + 1);
  const double lx = std::log(x);
  double acc = 0.0;  // ln sum, starts with i = 0 term (= 1)
  out[0] = -x;
  for (int i = 1; i <= kmax; ++i) {
    acc = log_add(acc, i * lx - std::lgamma(i + 1.0));
    out[static_cast<std::size_t>(i)] = -x + acc;
  }
  return out;
}

}  // namespace detail

/// Unscaled GinUE spacing density (truncated sum over j and product over k).
inline double pdf_ginue_bar(double s, int truncation = kGinueTruncation) {
  if (s < 0.0) throw std::invalid_argument("pdf_ginue: s must be >= 0");
  if (s == 0.0) return 0.0;
  const double x = s * s;
  const auto lq = detail::log_regularized_upper_gamma(truncation, x);
  double log_prod = 0.0;
  for (int k = 1; k <= truncation; ++k) log_prod += lq[static_cast<std::size_t>(k)];
  double log_sum = -std::numeric_limits<double>::infinity();
  const double ls = std::log(s);
  for (int j = 1; j <= truncation; ++j) {
    // 2 s^{2j+1} e^{-x} / Gamma(1+j, x), Gamma(1+j, x) = j! Q(1+j, x)
    const double lt = std::log(2.0) + (2.0 * j + 1.0) * ls - x - std::lgamma(j + 1.0) -
                      lq[static_cast<std::size_t>(j)];
    log_sum = detail::log_add(log_sum, lt);
  }
  return std::exp(log_sum + log_prod);
}

/// Relative size of the last retained j-term, a proxy for the truncation tail.
inline double ginue_truncation_tail(double s, int truncation = kGinueTruncation) {
  if (s <= 0.0) return 0.0;
  const double x = s * s;
  const auto lq = detail::log_regularized_upper_gamma(truncation, x);
  double log_sum = -std::numeric_limits<double>::infinity(), last = 0.0;
  for (int j = 1; j <= truncation; ++j) {
    last = (2.0 * j + 1.0) * std::log(s) - std::lgamma(j + 1.0) - lq[static_cast<std::size_t>(j)];
    log_sum = detail::log_add(log_sum, last);
  }
  return std::exp(last - log_sum);
}

namespace detail {

struct GinueTables {
  double mean_bar = 0.0;  // integral of s * Pbar
  double step = 0.0;
  std::vector<double> cdf_bar;  // cumulative Pbar on a uniform grid
};

inline const GinueTables& ginue_tables() {
  static const GinueTables tables = [] {
    using boost::math::quadrature::gauss_kronrod;
    GinueTables t;
    const double umax = 8.0;
    const int cells = 1600;
    t.step = umax / cells;
    t.cdf_bar.resize(cells + 1);
    t.cdf_bar[0] = 0.0;
    double mean = 0.0;
    for (int c = 0; c < cells; ++c) {
      const double a = c * t.step, b = a + t.step;
      const double p = gauss_kronrod<double, 15>::integrate([](double s) { return pdf_ginue_bar(s); }, a, b, 0, 0.0);
      const double m = gauss_kronrod<double, 15>::integrate([](double s) { return s * pdf_ginue_bar(s); }, a, b, 0, 0.0);
      t.cdf_bar[static_cast<std::size_t>(c) + 1] = t.cdf_bar[static_cast<std::size_t>(c)] + p;
      mean += m;
    }
    t.mean_bar = mean;
    return t;
  }();
  return tables;
}

}  // namespace detail

/// s_bar = integral of s Pbar(s) ds.
inline double ginue_mean_bar() { return detail::ginue_tables().mean_bar; }

/// Unit-mean GinUE spacing density P(s) = s_bar Pbar(s_bar s).
inline double pdf_ginue(double s) {
  if (s < 0.0) throw std::invalid_argument("pdf_ginue: s must be >= 0");
  const double sb = ginue_mean_bar();
  return sb * pdf_ginue_bar(sb * s);
}

inline double cdf_ginue(double s) {
  if (s <= 0.0) return 0.0;
  const auto& t = detail::ginue_tables();
  const double u = ginue_mean_bar() * s / t.step;
  const auto cells = t.cdf_bar.size() - 1;
  if (u >= static_cast<double>(cells)) return std::min(1.0, t.cdf_bar.back());
  const auto c = static_cast<std::size_t>(u);
  const double f = u - static_cast<double>(c);
  return t.cdf_bar[c] + f * (t.cdf_bar[c + 1] - t.cdf_bar[c]);
}

// --- spacing ratios ------------------------------------------------------------

struct SpacingRatios {
  std::vector<cplx> z;
  double mean_r = 0.0;
  double mean_cos = 0.0;
  std::size_t duplicates_removed = 0;
};

/// z_i = (E_NN - E_i) / (E_NNN - E_i); no unfolding involved.
inline SpacingRatios spacing_ratios(std::span<const cplx> eigenvalues,
                                    NeighborMethod method = NeighborMethod::Brute) {
  if (eigenvalues.size() < 3) throw std::invalid_argument("spacing_ratios: need at least 3 eigenvalues");
  auto d = dedupe(eigenvalues);
  if (d.values.size() < 3) throw std::invalid_argument("spacing_ratios: fewer than 3 distinct eigenvalues");
  const auto& e = d.values;
  const auto nb = detail::two_nearest(e, method);
  SpacingRatios out;
  out.duplicates_removed = d.removed;
  out.z.resize(e.size());
  double sr = 0.0, sc = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    const cplx den = e[nb[i][1].index] - e[i];
    if (std::abs(den) == 0.0) throw NumericalError("spacing_ratios: next-nearest distance is zero");
    const cplx z = (e[nb[i][0].index] - e[i]) / den;
    out.z[i] = z;
    sr += std::abs(z);
    sc += std::cos(std::arg(z));
  }
  out.mean_r = sr / static_cast<double>(e.size());
  out.mean_cos = sc / static_cast<double>(e.size());
  return out;
}

// --- Ginibre sampler -----------------------------------------------------------

/// Eigenvalues of a dim x dim matrix with i.i.d. complex Gaussian entries of
/// variance 1/dim.
inline std::vector<cplx> sample_ginibre(int dim, std::uint64_t seed) {
  if (dim < 2) throw std::invalid_argument("sample_ginibre: dim must be >= 2");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, std::sqrt(0.5 / dim));
  CMatrix a(dim, dim);
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      const double re = g(rng);
      const double im = g(rng);
      a(i, j) = cplx(re, im);
    }
  CVector w;
  if (detail::zgeev(a, w, nullptr, nullptr, detail::EigJob::None) != 0)
    throw NumericalError("sample_ginibre: eigensolver failed");
  return {w.data(), w.data() + w.size()};
}

// --- distribution comparison -----------------------------------------------------

/// One-sample Kolmogorov-Smirnov distance against a reference CDF.
inline double ks_distance(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.empty()) throw std::invalid_argument("ks_distance: no samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

struct HistogramRow {
  double bin_left, bin_right, empirical_density, poisson2d, ginue;
};

inline std::vector<HistogramRow> spacing_histogram(std::span<const double> s, int bins = 40,
                                                   double s_max = 4.0) {
  if (bins < 1 || !(s_max > 0.0)) throw std::invalid_argument("spacing_histogram: bad binning");
  std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
  const double w = s_max / bins;
  for (double v : s) {
    const auto b = static_cast<long>(std::floor(v / w));
    if (b >= 0 && b < bins) counts[static_cast<std::size_t>(b)] += 1.0;
  }
  std::vector<HistogramRow> rows;
  const double n = static_cast<double>(s.size());
  for (int b = 0; b < bins; ++b) {
    const double l = b * w, r = l + w, c = l + 0.5 * w;
    rows.push_back({l, r, counts[static_cast<std::size_t>(b)] / (n * w), pdf_poisson2d(c), pdf_ginue(c)});
  }
  return rows;
}

struct UniformityTest {
  double chi2 = 0.0;
  int dof = 0;
  double p_value = 1.0;
};

/// Chi-squared test of uniformity of arg(z) over (-pi, pi].
inline UniformityTest angle_uniformity(std::span<const cplx> z, int bins = 16) {
  if (z.empty() || bins < 2) throw std::invalid_argument("angle_uniformity: bad input");
  std::vector<double> counts(static_cast<std::size_t>(bins), 0.0);
  for (const cplx& v : z) {
    const double t = (std::arg(v) + std::numbers::pi) / (2.0 * std::numbers::pi);
    auto b = static_cast<long>(std::floor(t * bins));
    b = std::clamp<long>(b, 0, bins - 1);
    counts[static_cast<std::size_t>(b)] += 1.0;
  }
  const double expected = static_cast<double>(z.size()) / bins;
  UniformityTest out;
  for (double c : counts) out.chi2 += (c - expected) * (c - expected) / expected;
  out.dof = bins - 1;
  const boost::math::chi_squared dist(out.dof);
  out.p_value = boost::math::cdf(boost::math::complement(dist, out.chi2));
  return out;
}

}  // namespace adm
