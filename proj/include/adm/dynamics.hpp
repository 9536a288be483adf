#pragma once

// Thue-Morse driven Lindblad dynamics and spin-boson observables.

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "adm/common.hpp"
#include "adm/hilbert.hpp"
#include "adm/liouvillian.hpp"
#include "adm/state.hpp"

namespace adm {

// --- drive protocol -------------------------------------------------------------

enum class DriveSymbol : char { Plus = '+', Minus = '-' };

inline DriveSymbol flip(DriveSymbol s) {
  return s == DriveSymbol::Plus ? DriveSymbol::Minus : DriveSymbol::Plus;
}

using DriveWord = std::vector<DriveSymbol>;

/// Time-ordered Thue-Morse words (U_n, U~_n) at a given level. With
/// U_{n+1} = U~_n U_n and operators acting right to left, the time-ordered
/// word of U_{n+1} is word(U_n) followed by word(U~_n).
inline std::pair<DriveWord, DriveWord> thue_morse_pair(int level) {
  if (level < 0) throw std::invalid_argument("thue_morse_word: level must be >= 0");
  DriveWord u{DriveSymbol::Plus}, ut{DriveSymbol::Minus};
  for (int n = 0; n < level; ++n) {
    DriveWord next = u;
    next.insert(next.end(), ut.begin(), ut.end());
    DriveWord next_t = ut;
    next_t.insert(next_t.end(), u.begin(), u.end());
    u = std::move(next);
    ut = std::move(next_t);
  }
  return {u, ut};
}

inline DriveWord thue_morse_word(int level) { return thue_morse_pair(level).first; }

inline std::string to_string(const DriveWord& w) {
  std::string s;
  s.reserve(w.size());
  for (auto c : w) s.push_back(static_cast<char>(c));
  return s;
}

struct DriveSchedule {
  int level = 0;
  DriveWord word;
  double period = 0.0;  // base interval T

  double time_of_step(std::size_t k) const { return static_cast<double>(k) * period; }
  double time_of_level(int n) const { return std::ldexp(period, n); }
};

inline DriveSchedule make_schedule(int level, double period) {
  if (!(period > 0.0)) throw std::invalid_argument("make_schedule: period must be > 0");
  return {level, thue_morse_word(level), period};
}

/// Base interval from a drive frequency, T = 2 pi / omega_d.
inline double drive_period(double omega_d) {
  if (!(omega_d > 0.0)) throw std::invalid_argument("drive_period: omega_d must be > 0");
  return 2.0 * std::numbers::pi / omega_d;
}

struct DriveGenerators {
  SuperOperator plus, minus;
};

/// L_+ and L_- built with couplings (g1 +- Omega, g2 +- Omega).
inline DriveGenerators drive_liouvillians(const ModelParams& p, const MemoryBudget& budget = {}) {
  return {build_liouvillian(p, p.g1 + p.drive_amp, p.g2 + p.drive_amp, budget),
          build_liouvillian(p, p.g1 - p.drive_amp, p.g2 - p.drive_amp, budget)};
}

// --- propagation ------------------------------------------------------------------

struct Propagator {
  CMatrix u;
  Sector sector = Sector::Full;
  std::vector<std::size_t> indices;  // doubled-basis indices of the block
  double duration = 0.0;
};

/// Dense exp(L T) of a generator block (scaling and squaring, Pade 13).
inline Propagator propagator(const SuperOperator& l, double duration, const MemoryBudget& budget = {}) {
  const auto d = static_cast<std::size_t>(l.dim());
  if (MemoryBudget::dense_bytes(d) > budget.bytes) {
    throw BudgetError("propagator: dense exp of dimension " + std::to_string(d) + " needs " +
                      std::to_string(MemoryBudget::dense_bytes(d)) + " bytes per matrix (budget " +
                      std::to_string(budget.bytes) + "); use a step integrator or a parity sector");
  }
  Propagator p;
  p.sector = l.sector;
  p.indices = l.indices;
  p.duration = duration;
  if (duration == 0.0) {
    p.u = CMatrix::Identity(l.dim(), l.dim());
    return p;
  }
  const CMatrix lt = CMatrix(l.matrix) * duration;
  p.u = lt.exp();
  return p;
}

enum class EvolveStrategy {
  Stepwise,  // one matrix-vector product per drive symbol
  Doubling   // unit cells U_{n+1} = U~_n U_n built by matrix products
};

struct EvolveOptions {
  EvolveStrategy strategy = EvolveStrategy::Stepwise;
  double trace_tolerance = 1e-6;
};

namespace detail {

/// Column-stacks block restrictions of the states; throws if a state has
/// weight outside the block.
inline CMatrix gather_states(const std::vector<DensityState>& states, const Propagator& p) {
  const Eigen::Index d = p.u.rows();
  CMatrix x(d, static_cast<Eigen::Index>(states.size()));
  for (std::size_t s = 0; s < states.size(); ++s) {
    const auto& v = states[s].vec;
    if (p.indices.empty()) {
      if (v.size() != d) throw std::invalid_argument("evolve: state dimension mismatch");
      x.col(static_cast<Eigen::Index>(s)) = v;
      continue;
    }
    double inside = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      const cplx c = v[static_cast<Eigen::Index>(p.indices[static_cast<std::size_t>(i)])];
      x(i, static_cast<Eigen::Index>(s)) = c;
      inside += std::norm(c);
    }
    const double outside = v.squaredNorm() - inside;
    if (outside > 1e-28 * std::max(1.0, v.squaredNorm()))
      throw std::invalid_argument(std::string("evolve: initial state leaves the ") +
                                  to_string(p.sector) + " parity sector");
  }
  return x;
}

inline DensityState scatter_state(const Eigen::Ref<const CVector>& x, const Propagator& p, int n_d,
                                  double t) {
  DensityState s;
  s.n_d = n_d;
  s.time = t;
  if (p.indices.empty()) {
    s.vec = x;
  } else {
    s.vec = CVector::Zero(static_cast<Eigen::Index>(n_d) * n_d);
    for (Eigen::Index i = 0; i < x.size(); ++i)
      s.vec[static_cast<Eigen::Index>(p.indices[static_cast<std::size_t>(i)])] = x[i];
  }
  return s;
}

inline void check_traces(const CMatrix& x, const Propagator& p, int n_d, double tol, double t) {
  const auto nd = static_cast<std::size_t>(n_d);
  if (!x.allFinite()) throw NumericalError("evolve: non-finite state at t=" + std::to_string(t));
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    cplx tr = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const std::size_t g = p.indices.empty() ? static_cast<std::size_t>(i) : p.indices[static_cast<std::size_t>(i)];
      if (g / nd == g % nd) tr += x(i, c);
    }
    if (std::abs(tr - 1.0) > tol) {
      throw NumericalError("evolve: trace drift " + std::to_string(std::abs(tr - 1.0)) + " at t=" +
                           std::to_string(t) + " (state " + std::to_string(c) + ")");
    }
  }
}

}  // namespace detail

/// Applies the level-`max_level` Thue-Morse word to every initial state and
/// returns states at t = 2^n T for each n in `record_levels`, indexed
/// [state][record]. No trace renormalization is performed.
inline std::vector<std::vector<DensityState>> evolve(const std::vector<DensityState>& initial,
                                                     const Propagator& plus, const Propagator& minus,
                                                     std::vector<int> record_levels,
                                                     const EvolveOptions& opt = {}) {
  if (initial.empty()) return {};
  if (plus.u.rows() != minus.u.rows() || plus.indices != minus.indices)
    throw std::invalid_argument("evolve: propagators act on different spaces");
  if (plus.duration != minus.duration) throw std::invalid_argument("evolve: propagator durations differ");
  std::sort(record_levels.begin(), record_levels.end());
  record_levels.erase(std::unique(record_levels.begin(), record_levels.end()), record_levels.end());
  if (record_levels.empty() || record_levels.front() < 0)
    throw std::invalid_argument("evolve: record levels must be nonempty and >= 0");
  const int n_d = initial.front().n_d;
  const int max_level = record_levels.back();
  const double period = plus.duration;

  CMatrix x = detail::gather_states(initial, plus);
  std::vector<std::vector<DensityState>> out(initial.size());
  auto record = [&](const CMatrix& y, double t) {
    detail::check_traces(y, plus, n_d, opt.trace_tolerance, t);
    for (std::size_t s = 0; s < initial.size(); ++s)
      out[s].push_back(detail::scatter_state(y.col(static_cast<Eigen::Index>(s)), plus, n_d, t));
  };

  if (opt.strategy == EvolveStrategy::Stepwise) {
    const DriveWord word = thue_morse_word(max_level);
    std::size_t next = 0;
    CMatrix tmp(x.rows(), x.cols());
    for (std::size_t k = 0; k < word.size(); ++k) {
      const CMatrix& u = word[k] == DriveSymbol::Plus ? plus.u : minus.u;
      tmp.noalias() = u * x;
      x.swap(tmp);
      const std::size_t steps = k + 1;
      if (next < record_levels.size() && steps == (std::size_t{1} << record_levels[next])) {
        record(x, static_cast<double>(steps) * period);
        ++next;
      }
    }
    return out;
  }

  CMatrix u = plus.u, ut = minus.u, tmp;
  std::size_t next = 0;
  for (int n = 0; n <= max_level; ++n) {
    if (record_levels[next] == n) {
      tmp.noalias() = u * x;
      record(tmp, std::ldexp(period, n));
      ++next;
    }
    if (n == max_level) break;
    CMatrix nu = ut * u;   // U_{n+1} = U~_n U_n
    CMatrix nut = u * ut;  // U~_{n+1} = U_n U~_n
    u.swap(nu);
    ut.swap(nut);
  }
  return out;
}

// --- initial states ---------------------------------------------------------------------

struct InitialEnsemble {
  std::vector<DensityState> states;
  std::vector<std::size_t> basis_index;
  std::vector<double> energies;
  bool boundary_tie = false;  // count-th and (count+1)-th levels degenerate
  double mean_energy = 0.0;
  double mean_energy_per_atom = 0.0;
  double mean_energy_above_ground = 0.0;
  double mean_energy_above_ground_per_atom = 0.0;
};

/// Lowest `count` eigenstates of the decoupled Hamiltonian (g1 = g2 = 0) as
/// pure density matrices. Degenerate levels are ordered by basis index.
inline InitialEnsemble initial_ensemble(const ModelParams& p, int count = 20) {
  const BasisMap basis(p);
  if (count < 1 || static_cast<std::size_t>(count) > basis.size())
    throw std::invalid_argument("initial_ensemble: count must be in 1..N_D");
  const SparseC h0 = hamiltonian(p, 0.0, 0.0);
  const CVector diag = CMatrix(h0).diagonal();
  std::vector<std::size_t> order(basis.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return diag[static_cast<Eigen::Index>(a)].real() < diag[static_cast<Eigen::Index>(b)].real();
  });
  InitialEnsemble ens;
  const auto nd = static_cast<Eigen::Index>(basis.size());
  for (int i = 0; i < count; ++i) {
    const std::size_t b = order[static_cast<std::size_t>(i)];
    CVector psi = CVector::Zero(nd);
    psi[static_cast<Eigen::Index>(b)] = 1.0;
    ens.states.push_back(DensityState::pure(psi));
    ens.basis_index.push_back(b);
    ens.energies.push_back(diag[static_cast<Eigen::Index>(b)].real());
  }
  if (static_cast<std::size_t>(count) < basis.size()) {
    const double e_last = ens.energies.back();
    const double e_next = diag[static_cast<Eigen::Index>(order[static_cast<std::size_t>(count)])].real();
    ens.boundary_tie = std::abs(e_next - e_last) <= 1e-12 * std::max(1.0, std::abs(e_last));
  }
  const double ground = diag[static_cast<Eigen::Index>(order.front())].real();
  ens.mean_energy = std::accumulate(ens.energies.begin(), ens.energies.end(), 0.0) / count;
  ens.mean_energy_per_atom = ens.mean_energy / p.n_atoms;
  ens.mean_energy_above_ground = ens.mean_energy - ground;
  ens.mean_energy_above_ground_per_atom = ens.mean_energy_above_ground / p.n_atoms;
  return ens;
}

// --- observables -------------------------------------------------------------------------

/// Tr[rho a^dag a]; the imaginary residue must stay below 1e-9.
inline double avg_boson_number(const DensityState& rho, const BasisMap& basis) {
  rho.check_shape();
  if (static_cast<std::size_t>(rho.n_d) != basis.size())
    throw std::invalid_argument("avg_boson_number: basis does not match state");
  cplx acc = 0.0;
  for (std::size_t l = 0; l < basis.size(); ++l)
    acc += static_cast<double>(basis[l].n) * rho.vec[static_cast<Eigen::Index>(l * basis.size() + l)];
  if (std::abs(acc.imag()) > 1e-9)
    throw NumericalError("avg_boson_number: imaginary part " + std::to_string(acc.imag()));
  return acc.real();
}

enum class Subsystem { Spin, Boson };

/// Reduced density matrix of the kept factor (boson (x) spin ordering).
inline CMatrix partial_trace(const CMatrix& rho, int boson_dim, int spin_dim, Subsystem keep) {
  if (rho.rows() != static_cast<Eigen::Index>(boson_dim) * spin_dim || rho.cols() != rho.rows())
    throw std::invalid_argument("partial_trace: dimensions do not match");
  if (keep == Subsystem::Spin) {
    CMatrix out = CMatrix::Zero(spin_dim, spin_dim);
    for (int n = 0; n < boson_dim; ++n) out += rho.block(n * spin_dim, n * spin_dim, spin_dim, spin_dim);
    return out;
  }
  CMatrix out(boson_dim, boson_dim);
  for (int n = 0; n < boson_dim; ++n)
    for (int np = 0; np < boson_dim; ++np)
      out(n, np) = rho.block(n * spin_dim, np * spin_dim, spin_dim, spin_dim).trace();
  return out;
}

inline CMatrix partial_trace(const DensityState& rho, const BasisMap& basis, Subsystem keep) {
  return partial_trace(rho.matrix(), basis.boson_dim(), basis.spin_dim(), keep);
}

/// -sum p ln p over the spectrum; eigenvalues below 1e-12 contribute 0.
inline double von_neumann_entropy(const CMatrix& rho) {
  if (rho.rows() != rho.cols()) throw std::invalid_argument("von_neumann_entropy: matrix not square");
  const CMatrix h = 0.5 * (rho + rho.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h, Eigen::EigenvaluesOnly);
  double s = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double p = es.eigenvalues()[i];
    if (p < -1e-6) throw NumericalError("von_neumann_entropy: eigenvalue " + std::to_string(p) + " (invalid state)");
    if (p > 1e-12) s -= p * std::log(p);
  }
  return s;
}

struct EntropyTriple {
  double spin = 0.0, boson = 0.0, total = 0.0, mutual = 0.0;
};

/// I = S_spin + S_boson - S_total.
inline EntropyTriple mutual_information(const CMatrix& rho, int boson_dim, int spin_dim) {
  EntropyTriple e;
  e.spin = von_neumann_entropy(partial_trace(rho, boson_dim, spin_dim, Subsystem::Spin));
  e.boson = von_neumann_entropy(partial_trace(rho, boson_dim, spin_dim, Subsystem::Boson));
  e.total = von_neumann_entropy(rho);
  e.mutual = e.spin + e.boson - e.total;
  if (e.mutual < -1e-9) throw NumericalError("mutual_information: negative value " + std::to_string(e.mutual));
  return e;
}

inline EntropyTriple mutual_information(const DensityState& rho, const BasisMap& basis) {
  return mutual_information(rho.matrix(), basis.boson_dim(), basis.spin_dim());
}

// --- strong-dissipation spin model ----------------------------------------------------------

/// Placeholder effective rate (g1^2 + g2^2) / (2 kappa N); a convention, not a
/// derived value.
inline double default_kappa_eff(const ModelParams& p) {
  if (!(p.kappa > 0.0)) throw std::invalid_argument("default_kappa_eff: kappa must be > 0");
  return (p.g1 * p.g1 + p.g2 * p.g2) / (2.0 * p.kappa * p.n_atoms);
}

/// Collective-decay spin generator
///   rho_s' = -i [w Jz, rho_s] + kappa_eff (2 J- rho_s J+ - {J+ J-, rho_s})
/// on the (N+1)^2 doubled spin space, same vectorization as the full model.
inline SuperOperator adiabatic_spin_liouvillian(const ModelParams& p, double kappa_eff) {
  p.validate();
  if (!(kappa_eff > 0.0)) throw std::invalid_argument("adiabatic_spin_liouvillian: kappa_eff must be > 0");
  const auto s = spin_operators(p.n_atoms);
  const SparseC id = sparse_identity(p.spin_dim());
  const SparseC h = p.omega * s.jz;
  const SparseC jpjm = s.jplus * s.jminus;
  SparseC l = cplx(0.0, -1.0) * SparseC(kron(h, id) - kron(id, SparseC(h.transpose())));
  l += kappa_eff * SparseC(2.0 * kron(s.jminus, SparseC(s.jminus.conjugate())) - kron(jpjm, id) -
                           kron(id, SparseC(jpjm.transpose())));
  l.prune(cplx(0.0));
  l.makeCompressed();
  SuperOperator out;
  out.matrix = std::move(l);
  out.params = p;
  return out;
}

// --- experiment driver -----------------------------------------------------------------------

struct DynamicsPoint {
  double g2 = 0.0;
  double omega_d = 50.0;
  double kappa = 0.0;
};

struct DynamicsConfig {
  ModelParams base;  // g1, drive_amp, N, n_max, omega, omega0
  std::vector<DynamicsPoint> points;
  std::vector<int> record_levels;
  int ensemble_size = 20;
  bool mixed_ensemble = false;
  Sector sector = Sector::Even;  // decoupled eigenstates are super-parity even
  EvolveStrategy strategy = EvolveStrategy::Doubling;
  MemoryBudget budget{};
};

struct ObservableRow {
  std::size_t config_id = 0;
  double g1 = 0, g2 = 0, kappa = 0, omega_d = 0;
  int level = 0;
  double t = 0;
  double n_av = 0, s_spin = 0, s_boson = 0, s_total = 0, mutual = 0;
};

struct DynamicsResult {
  std::vector<ObservableRow> rows;
  std::vector<std::string> errors;  // one entry per config ("" on success)
  InitialEnsemble ensemble_info;
};

/// Observables of every recorded state, averaged over the initial ensemble.
inline std::vector<ObservableRow> observe(const std::vector<std::vector<DensityState>>& traj,
                                          const BasisMap& basis, const std::vector<int>& levels,
                                          bool mixed_ensemble) {
  std::vector<ObservableRow> rows(levels.size());
  const double w = 1.0 / static_cast<double>(traj.size());
  for (std::size_t r = 0; r < levels.size(); ++r) {
    auto& row = rows[r];
    row.level = levels[r];
    row.t = traj.front()[r].time;
    if (mixed_ensemble) {
      DensityState avg = traj.front()[r];
      avg.vec.setZero();
      for (const auto& st : traj) avg.vec += w * st[r].vec;
      row.n_av = avg_boson_number(avg, basis);
      const auto e = mutual_information(avg, basis);
      row.s_spin = e.spin;
      row.s_boson = e.boson;
      row.s_total = e.total;
      row.mutual = e.mutual;
      continue;
    }
    for (const auto& st : traj) {
      row.n_av += w * avg_boson_number(st[r], basis);
      const auto e = mutual_information(st[r], basis);
      row.s_spin += w * e.spin;
      row.s_boson += w * e.boson;
      row.s_total += w * e.total;
      row.mutual += w * e.mutual;
    }
  }
  return rows;
}

inline DynamicsResult run_dynamics_experiment(const DynamicsConfig& cfg) {
  DynamicsResult res;
  std::vector<int> levels = cfg.record_levels;
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  res.ensemble_info = initial_ensemble(cfg.base, cfg.ensemble_size);
  const BasisMap basis(cfg.base);
  for (std::size_t id = 0; id < cfg.points.size(); ++id) {
    const auto& pt = cfg.points[id];
    try {
      ModelParams p = cfg.base;
      p.g2 = pt.g2;
      p.kappa = pt.kappa;
      p.drive_T = drive_period(pt.omega_d);
      auto gens = drive_liouvillians(p, cfg.budget);
      const auto lp = select_sector(gens.plus, basis, cfg.sector);
      const auto lm = select_sector(gens.minus, basis, cfg.sector);
      const auto up = propagator(lp, p.drive_T, cfg.budget);
      const auto um = propagator(lm, p.drive_T, cfg.budget);
      const auto traj = evolve(res.ensemble_info.states, up, um, levels, {cfg.strategy, 1e-6});
      auto rows = observe(traj, basis, levels, cfg.mixed_ensemble);
      for (auto& r : rows) {
        r.config_id = id;
        r.g1 = p.g1;
        r.g2 = p.g2;
        r.kappa = p.kappa;
        r.omega_d = pt.omega_d;
        res.rows.push_back(r);
      }
      res.errors.emplace_back();
    } catch (const std::exception& e) {
      res.errors.emplace_back(e.what());
    }
  }
  return res;
}

}  // namespace adm
