#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace adm {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;
using SparseC = Eigen::SparseMatrix<cplx, Eigen::ColMajor, std::int64_t>;
using Triplet = Eigen::Triplet<cplx, std::int64_t>;

inline constexpr cplx kI{0.0, 1.0};

/// Raised when a numerical routine fails (solver non-convergence, singular
/// overlaps, drifting traces, non-finite values).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a dense object would exceed the configured memory budget.
class BudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Upper bound on a single dense complex matrix allocation.
struct MemoryBudget {
  std::size_t bytes = std::size_t{2} << 30;  // 2 GiB

  static std::size_t dense_bytes(std::size_t dim) {
    return dim * dim * sizeof(cplx);
  }

  void require_dense(std::size_t dim, const std::string& what) const {
    const std::size_t need = dense_bytes(dim);
    if (need > bytes) {
      throw BudgetError(what + ": dense " + std::to_string(dim) + "x" +
                        std::to_string(dim) + " complex matrix needs " +
                        std::to_string(need) + " bytes, budget is " +
                        std::to_string(bytes) + " bytes");
    }
  }
};

}  // namespace adm
