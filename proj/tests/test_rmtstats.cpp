#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "adm/rmtstats.hpp"

using namespace adm;

namespace {

std::vector<cplx> uniform_disc(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<cplx> out;
  while (out.size() < n) {
    const cplx z(u(rng), u(rng));
    if (std::abs(z) <= 1.0) out.push_back(z);
  }
  return out;
}

std::vector<cplx> uniform_square(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<cplx> out(n);
  for (auto& z : out) z = cplx(u(rng), u(rng));
  return out;
}

double variance(const std::vector<double>& v) {
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return s / double(v.size());
}

// Direct evaluation with the regularized incomplete gamma function.
double ginue_bar_oracle(double s, int k) {
  const double x = s * s;
  double prod = 1.0;
  for (int j = 1; j <= k; ++j) prod *= boost::math::gamma_q(1.0 + j, x);
  double sum = 0.0;
  for (int j = 1; j <= k; ++j)
    sum += 2.0 * std::pow(s, 2 * j + 1) * std::exp(-x) / (std::tgamma(1.0 + j) * boost::math::gamma_q(1.0 + j, x));
  return prod * sum;
}

}  // namespace

TEST(Spacings, SmallExamples) {
  const std::vector<cplx> line = {0.0, 1.0, 3.0};
  const auto s = nn_spacings(line).s;
  EXPECT_EQ(s, (std::vector<double>{1.0, 1.0, 2.0}));
  const std::vector<cplx> square = {cplx(0, 0), cplx(1, 0), cplx(0, 1), cplx(1, 1)};
  for (double v : nn_spacings(square).s) EXPECT_DOUBLE_EQ(v, 1.0);
  EXPECT_THROW(nn_spacings(std::vector<cplx>{1.0, 2.0}), std::invalid_argument);
  EXPECT_THROW(nn_spacings(std::vector<cplx>{1.0, 1.0, 1.0}), std::invalid_argument);
}

TEST(Spacings, AcceleratedMatchesAllPairs) {
  const auto pts = uniform_disc(500, 17);
  std::vector<double> oracle(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double best = 1e300;
    for (std::size_t j = 0; j < pts.size(); ++j)
      if (j != i) best = std::min(best, std::abs(pts[i] - pts[j]));
    oracle[i] = best;
  }
  EXPECT_EQ(nn_spacings(pts, NeighborMethod::Brute).s, oracle);
  EXPECT_EQ(nn_spacings(pts, NeighborMethod::Accelerated).s, oracle);
  const auto a = detail::two_nearest(pts, NeighborMethod::Brute);
  const auto b = detail::two_nearest(pts, NeighborMethod::Accelerated);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    EXPECT_EQ(a[i][0].index, b[i][0].index);
    EXPECT_EQ(a[i][1].index, b[i][1].index);
  }
}

TEST(Spacings, DuplicatesRemovedAndCounted) {
  const std::vector<cplx> v = {0.0, 1.0, 1.0, cplx(1.0 + 1e-16, 0), 3.0};
  const auto s = nn_spacings(v);
  EXPECT_EQ(s.duplicates_removed, 2u);
  EXPECT_EQ(s.s.size(), 3u);
}

TEST(Unfold, UnitMeanAndScaleInvariance) {
  const auto pts = uniform_disc(800, 3);
  const auto u = unfold(pts);
  const double mean = std::accumulate(u.unfolded.begin(), u.unfolded.end(), 0.0) / double(u.unfolded.size());
  EXPECT_NEAR(mean, 1.0, 1e-9);
  EXPECT_NEAR(u.sigma, 4.5 * u.mean_raw, 1e-15);
  for (double s : u.unfolded) EXPECT_GE(s, 0.0);
  std::vector<cplx> scaled(pts);
  for (auto& z : scaled) z = 3.3 * z + cplx(-2.0, 5.0);
  const auto v = unfold(scaled);
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_NEAR(u.unfolded[i], v.unfolded[i], 1e-9);
  EXPECT_THROW(unfold(std::vector<cplx>(5, 0.0)), std::invalid_argument);
}

TEST(Unfold, FlattensVaryingDensity) {
  // Conformal image of a square lattice: local cells stay square but their
  // size grows with |z|, so naive spacings vary while unfolded ones should not.
  std::vector<cplx> pts;
  const double a = 0.03;
  for (int i = 0; i < 30; ++i)
    for (int j = 0; j < 30; ++j) pts.push_back(std::exp(a * cplx(i, j)));
  const auto u = unfold(pts);
  std::vector<double> naive(u.raw);
  for (double& s : naive) s /= u.mean_raw;
  EXPECT_LT(variance(u.unfolded), variance(naive));
}

TEST(Unfold, GinibreMatchesGinue) {
  std::vector<double> pooled;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto u = unfold(sample_ginibre(600, seed), NeighborMethod::Accelerated);
    pooled.insert(pooled.end(), u.unfolded.begin(), u.unfolded.end());
  }
  ASSERT_GE(pooled.size(), 2000u);
  EXPECT_LE(ks_distance(pooled, cdf_ginue), 0.05);
  EXPECT_GT(ks_distance(pooled, cdf_poisson2d), ks_distance(pooled, cdf_ginue));
}

TEST(Poisson2D, Density) {
  EXPECT_EQ(pdf_poisson2d(0.0), 0.0);
  boost::math::quadrature::tanh_sinh<double> q;
  const double integral = q.integrate(pdf_poisson2d, 0.0, std::numeric_limits<double>::infinity());
  EXPECT_NEAR(integral, 1.0, 1e-10);
  const double mode = std::sqrt(2.0 / M_PI);
  const double h = 1e-6;
  EXPECT_NEAR((pdf_poisson2d(mode + h) - pdf_poisson2d(mode - h)) / (2 * h), 0.0, 1e-8);
  EXPECT_GT(pdf_poisson2d(mode), pdf_poisson2d(mode + 0.01));
  EXPECT_GT(pdf_poisson2d(mode), pdf_poisson2d(mode - 0.01));
  EXPECT_NEAR(cdf_poisson2d(1.3), q.integrate(pdf_poisson2d, 0.0, 1.3), 1e-12);
}

TEST(Ginue, MatchesDirectGammaEvaluation) {
  for (double s : {0.2, 0.7, 1.0, 1.6, 2.5}) {
    const double ref = ginue_bar_oracle(s, 60);
    EXPECT_NEAR(pdf_ginue_bar(s, 60), ref, 1e-10 * std::max(1.0, ref)) << s;
  }
}

TEST(Ginue, CubicRepulsion) {
  const double r2 = pdf_ginue(1e-2) / 1e-6;
  const double r3 = pdf_ginue(1e-3) / 1e-9;
  EXPECT_GT(r2, 0.0);
  EXPECT_NEAR(r3 / r2, 1.0, 1e-3);
}

TEST(Ginue, NormalizedWithUnitMean) {
  boost::math::quadrature::tanh_sinh<double> q;
  const double norm = q.integrate([](double s) { return pdf_ginue(s); }, 0.0, 12.0);
  const double mean = q.integrate([](double s) { return s * pdf_ginue(s); }, 0.0, 12.0);
  EXPECT_NEAR(norm, 1.0, 1e-6);
  EXPECT_NEAR(mean, 1.0, 1e-6);
  EXPECT_NEAR(cdf_ginue(50.0), 1.0, 1e-6);
  EXPECT_NEAR(cdf_ginue(1.0), q.integrate([](double s) { return pdf_ginue(s); }, 0.0, 1.0), 1e-6);
  EXPECT_LT(ginue_truncation_tail(6.0), 1e-8);
}

TEST(Ratios, TieCaseAndBounds) {
  const std::vector<cplx> line = {0.0, 1.0, 2.0};
  const auto r = spacing_ratios(line);
  EXPECT_DOUBLE_EQ(std::abs(r.z[1]), 1.0);
  // Middle point: both neighbours at distance 1, lower index (0) is nearest.
  EXPECT_DOUBLE_EQ(r.z[1].real(), -1.0);
  const auto pts = uniform_disc(1000, 8);
  for (const auto& z : spacing_ratios(pts).z) EXPECT_LE(std::abs(z), 1.0);
}

TEST(Ratios, ShiftAndScaleInvariance) {
  const auto pts = uniform_disc(600, 21);
  std::vector<cplx> moved(pts);
  for (auto& z : moved) z = 4.0 * z + cplx(0.5, -0.25);
  const auto a = spacing_ratios(pts), b = spacing_ratios(moved);
  for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_LT(std::abs(a.z[i] - b.z[i]), 1e-12);
}

TEST(Ratios, PoissonMean) {
  // Uncorrelated planar points: <r> = 2/3 exactly in the bulk.
  const auto r = spacing_ratios(uniform_square(4000, 99), NeighborMethod::Accelerated);
  EXPECT_NEAR(r.mean_r, 2.0 / 3.0, 0.01);
  EXPECT_NEAR(r.mean_cos, 0.0, 0.03);
  EXPECT_GT(angle_uniformity(r.z).p_value, 0.01);
}

TEST(Ratios, GinibreMean) {
  std::vector<cplx> z;
  double sum = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto r = spacing_ratios(sample_ginibre(64, seed));
    sum += r.mean_r;
    z.insert(z.end(), r.z.begin(), r.z.end());
  }
  EXPECT_NEAR(sum / 50.0, 0.74, 0.015);
  EXPECT_LT(angle_uniformity(z).p_value, 0.01);
}

TEST(Ginibre, CircularLawAndSeeds) {
  const auto e = sample_ginibre(512, 42);
  double radius = 0.0;
  for (const auto& v : e) radius = std::max(radius, std::abs(v));
  EXPECT_GE(radius, 0.9);
  EXPECT_LE(radius, 1.15);
  EXPECT_EQ(sample_ginibre(40, 5), sample_ginibre(40, 5));
  EXPECT_NE(sample_ginibre(40, 5), sample_ginibre(40, 6));
  EXPECT_THROW(sample_ginibre(1, 0), std::invalid_argument);
}

TEST(Histogram, DensityIntegratesToInRangeFraction) {
  const auto u = unfold(uniform_disc(1500, 4));
  const auto rows = spacing_histogram(u.unfolded, 40, 4.0);
  double mass = 0.0;
  for (const auto& r : rows) mass += r.empirical_density * (r.bin_right - r.bin_left);
  const auto inside = std::count_if(u.unfolded.begin(), u.unfolded.end(), [](double s) { return s < 4.0; });
  EXPECT_NEAR(mass, double(inside) / double(u.unfolded.size()), 1e-12);
  EXPECT_NEAR(rows[5].poisson2d, pdf_poisson2d(0.55), 1e-15);
}

TEST(KS, KnownDistance) {
  const std::vector<double> s = {0.1, 0.2, 0.9};
  const auto uniform = [](double x) { return std::clamp(x, 0.0, 1.0); };
  // Empirical steps at 1/3, 2/3, 1 against F(x) = x.
  EXPECT_NEAR(ks_distance(s, uniform), 2.0 / 3.0 - 0.2, 1e-15);
}
