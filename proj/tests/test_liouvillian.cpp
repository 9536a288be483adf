#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include <unsupported/Eigen/Polynomials>

#include "adm/liouvillian.hpp"
#include "adm/state.hpp"

using namespace adm;

namespace {

ModelParams params(int n_atoms, int n_max, double g1, double g2, double kappa) {
  ModelParams p;
  p.n_atoms = n_atoms;
  p.n_max = n_max;
  p.g1 = g1;
  p.g2 = g2;
  p.kappa = kappa;
  return p;
}

std::vector<cplx> dense_eigenvalues(const SparseC& m) {
  Eigen::ComplexEigenSolver<CMatrix> es(CMatrix(m), false);
  const CVector& v = es.eigenvalues();
  return {v.data(), v.data() + v.size()};
}

bool lex(const cplx& a, const cplx& b) {
  if (std::abs(a.real() - b.real()) > 1e-7) return a.real() < b.real();
  return a.imag() < b.imag();
}

CMatrix random_density(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  CMatrix x(d, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = cplx(g(rng), g(rng));
  CMatrix rho = x * x.adjoint();
  return rho / rho.trace();
}

}  // namespace

TEST(Liouvillian, MatchesMasterEquationAction) {
  std::mt19937_64 rng(3);
  const ModelParams p = params(2, 3, 0.9, 0.4, 0.7);
  const auto l = build_liouvillian(p);
  const CMatrix h(hamiltonian(p));
  const auto ops = product_operators(p);
  const CMatrix a(ops.a), ad(ops.adag), num(ops.number);
  const CMatrix rho = random_density(p.hilbert_dim(), rng);
  const CMatrix expected = -kI * (h * rho - rho * h) + p.kappa * (2.0 * a * rho * ad - num * rho - rho * num);
  const DensityState s = DensityState::from_matrix(rho);
  DensityState out = s;
  out.vec = l.matrix * s.vec;
  EXPECT_LT((out.matrix() - expected).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(l.convention, std::string(kConvention));
}

TEST(Liouvillian, TracePreservingRowIdentity) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int t = 0; t < 6; ++t) {
    const ModelParams p = params(1 + t % 3, 2 + t % 3, u(rng), u(rng), u(rng));
    const auto l = build_liouvillian(p);
    const int nd = p.hilbert_dim();
    CVector id = CVector::Zero(l.dim());
    for (int i = 0; i < nd; ++i) id[i * nd + i] = 1.0;
    const CVector row = l.matrix.adjoint() * id;
    EXPECT_LE(row.norm(), 1e-10 * CMatrix(l.matrix).norm());
  }
}

TEST(Liouvillian, UnitarySpectrumIsEnergyDifferences) {
  const ModelParams p = params(1, 2, 0.8, 0.3, 0.0);
  const auto l = build_liouvillian(p);
  Eigen::SelfAdjointEigenSolver<CMatrix> hs{CMatrix(hamiltonian(p))};
  std::vector<cplx> expect;
  for (Eigen::Index j = 0; j < hs.eigenvalues().size(); ++j)
    for (Eigen::Index k = 0; k < hs.eigenvalues().size(); ++k)
      expect.push_back(-kI * (hs.eigenvalues()[j] - hs.eigenvalues()[k]));
  auto got = dense_eigenvalues(l.matrix);
  auto by_imag = [](const cplx& a, const cplx& b) { return a.imag() < b.imag(); };
  std::sort(expect.begin(), expect.end(), by_imag);
  std::sort(got.begin(), got.end(), by_imag);
  ASSERT_EQ(got.size(), expect.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_NEAR(got[i].imag(), expect[i].imag(), 1e-9);
    EXPECT_NEAR(got[i].real(), 0.0, 1e-9);
  }
}

TEST(Liouvillian, DecoupledDampedModes) {
  ModelParams p = params(1, 3, 0.0, 0.0, 1.0);
  p.omega = 1.3;
  p.omega0 = 0.6;
  const auto l = build_liouvillian(p);
  const auto basis = build_basis(p);
  std::vector<cplx> expect;
  for (const auto& bl : basis.entries())
    for (const auto& br : basis.entries())
      expect.push_back(-p.kappa * double(bl.n + br.n) - kI * p.omega * double(bl.n - br.n) -
                       kI * p.omega0 * (bl.m - br.m));
  auto got = dense_eigenvalues(l.matrix);
  std::sort(expect.begin(), expect.end(), lex);
  std::sort(got.begin(), got.end(), lex);
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_LT(std::abs(got[i] - expect[i]), 1e-9) << i;
  double gap = 1e300;
  for (const auto& v : expect)
    if (v.real() < -1e-9) gap = std::min(gap, -v.real());
  EXPECT_NEAR(gap, p.kappa, 1e-12);
}

TEST(Liouvillian, MemoryBudgetGuard) {
  const ModelParams p = params(8, 20, 1, 1, 1);
  MemoryBudget tiny;
  tiny.bytes = 1 << 20;
  try {
    build_liouvillian(p, {}, {}, tiny);
    FAIL() << "expected BudgetError";
  } catch (const BudgetError& e) {
    EXPECT_NE(std::string(e.what()).find("bytes"), std::string::npos);
  }
  const auto l = build_liouvillian(params(1, 2, 1, 1, 1));
  EXPECT_THROW(l.to_dense(tiny = MemoryBudget{16}), BudgetError);
}

TEST(Sectors, BlockDimensionsAndNoCrossTerms) {
  const ModelParams p = params(2, 4, 0.7, 0.5, 1.0);
  const auto basis = build_basis(p);
  const auto l = build_liouvillian(p);
  const auto split = parity_sectors(l, basis);
  EXPECT_EQ(split.even.dim() + split.odd.dim(), l.dim());
  EXPECT_EQ(split.max_cross_entry, 0.0);
  std::vector<std::size_t> sorted = split.permutation;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) EXPECT_EQ(sorted[i], i);
  // Equal parity counts give equal halves.
  const ModelParams q = params(1, 3, 0.7, 0.5, 1.0);
  const auto sq = parity_sectors(build_liouvillian(q), build_basis(q));
  EXPECT_EQ(sq.even.dim(), sq.odd.dim());
}

TEST(Sectors, SteadyStateInEvenSector) {
  const ModelParams p = params(2, 4, 0.7, 0.5, 1.0);
  const auto split = parity_sectors(build_liouvillian(p), build_basis(p));
  const auto ev = dense_eigenvalues(split.even.matrix);
  const auto od = dense_eigenvalues(split.odd.matrix);
  auto min_abs = [](const std::vector<cplx>& v) {
    double m = 1e300;
    for (const auto& x : v) m = std::min(m, std::abs(x));
    return m;
  };
  EXPECT_LT(min_abs(ev), 1e-10);
  EXPECT_GT(min_abs(od), 1e-6);
}

TEST(Sectors, DecoupledUnitaryBlocksDiagonal) {
  const ModelParams p = params(2, 3, 0.0, 0.0, 0.0);
  const auto split = parity_sectors(build_liouvillian(p), build_basis(p));
  for (const auto* b : {&split.even, &split.odd}) {
    const CMatrix d(b->matrix);
    EXPECT_EQ((d - CMatrix(d.diagonal().asDiagonal())).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Sectors, CrossEntryIsFatal) {
  const ModelParams p = params(1, 2, 0.5, 0.5, 1.0);
  auto l = build_liouvillian(p);
  const auto basis = build_basis(p);
  const auto sp = super_parity(basis);
  std::size_t i = 0, j = 0;
  while (sp[j] == sp[i]) ++j;
  l.matrix.coeffRef(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1e-6;
  EXPECT_THROW(parity_sectors(l, basis), NumericalError);
}

TEST(Sectors, SelectSectorIndicesAscending) {
  const ModelParams p = params(1, 2, 0.5, 0.5, 1.0);
  const auto basis = build_basis(p);
  const auto even = select_sector(build_liouvillian(p), basis, Sector::Even);
  EXPECT_EQ(even.indices, sector_indices(basis, Sector::Even));
  EXPECT_TRUE(std::is_sorted(even.indices.begin(), even.indices.end()));
  EXPECT_EQ(sector_from_string("odd"), Sector::Odd);
  EXPECT_THROW(sector_from_string("up"), std::invalid_argument);
}

TEST(Critical, IsotropicValues) {
  ModelParams p;
  p.kappa = 1.0;
  EXPECT_NEAR(critical_coupling_isotropic(p), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(critical_coupling_isotropic(p), 0.70711, 1e-5);
  p.kappa = 0.0;
  p.omega = 2.0;
  p.omega0 = 0.5;
  EXPECT_NEAR(critical_coupling_isotropic(p), 0.5, 1e-15);
  // Isotropic point lies on the general critical line.
  p.kappa = 0.3;
  const double g = critical_coupling_isotropic(p);
  EXPECT_NEAR(critical_residual(p.omega, p.omega0, p.kappa, g, g), 0.0, 1e-12);
}

TEST(Critical, RootsAgreeWithCompanionSolver) {
  ModelParams p;
  p.kappa = 1.0;
  const double g1 = 1.25;
  const auto roots = critical_g2_given_g1(p, g1);
  ASSERT_EQ(roots.g2.size(), 2u);
  for (double r : roots.residual) EXPECT_LE(std::abs(r), 1e-10);
  // Quartic in g2: g2^4 - 2(g1^2 + w w0) g2^2 + (g1^4 - 2 g1^2 w w0 + (w^2 + k^2) w0^2).
  const double c0 = std::pow(g1, 4) - 2 * g1 * g1 + 2.0;
  Eigen::Matrix<double, 5, 1> coeffs;
  coeffs << c0, 0.0, -2.0 * (g1 * g1 + 1.0), 0.0, 1.0;
  Eigen::PolynomialSolver<double, 4> solver(coeffs);
  std::vector<double> real_roots;
  for (Eigen::Index i = 0; i < solver.roots().size(); ++i) {
    const auto r = solver.roots()[i];
    if (std::abs(r.imag()) < 1e-9 && r.real() >= 0) real_roots.push_back(r.real());
  }
  std::sort(real_roots.begin(), real_roots.end());
  ASSERT_EQ(real_roots.size(), 2u);
  EXPECT_NEAR(roots.g2[0], real_roots[0], 1e-9);
  EXPECT_NEAR(roots.g2[1], real_roots[1], 1e-9);
  EXPECT_NEAR(roots.g2[0], 0.5208, 1e-4);
}

TEST(Critical, NoRealRootReported) {
  ModelParams p;
  p.kappa = 1.0;
  const auto roots = critical_g2_given_g1(p, 0.3);
  EXPECT_TRUE(roots.g2.empty());
  EXPECT_FALSE(roots.note.empty());
  p.omega = 0.0;
  EXPECT_THROW(critical_g2_given_g1(p, 1.0), std::invalid_argument);
}
