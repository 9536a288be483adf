#pragma once

#include <cmath>
#include <stdexcept>

#include "adm/common.hpp"

namespace adm {

/// Vectorized density matrix in the row-stacked doubled basis,
/// vec[l * N_D + r] = rho(l, r).
struct DensityState {
  CVector vec;
  int n_d = 0;
  double time = 0.0;  // units of 1/omega0

  static DensityState from_matrix(const CMatrix& rho, double t = 0.0) {
    if (rho.rows() != rho.cols()) throw std::invalid_argument("DensityState: matrix not square");
    DensityState s;
    s.n_d = static_cast<int>(rho.rows());
    s.time = t;
    s.vec.resize(rho.size());
    // Column-major storage of rho^T is the row-stacked vector of rho.
    Eigen::Map<CMatrix>(s.vec.data(), rho.rows(), rho.cols()) = rho.transpose();
    return s;
  }

  static DensityState pure(const CVector& psi, double t = 0.0) {
    return from_matrix(psi * psi.adjoint(), t);
  }

  CMatrix matrix() const {
    check_shape();
    return Eigen::Map<const CMatrix>(vec.data(), n_d, n_d).transpose();
  }

  cplx trace() const {
    check_shape();
    cplx t = 0.0;
    for (int i = 0; i < n_d; ++i) t += vec[static_cast<Eigen::Index>(i) * n_d + i];
    return t;
  }

  double hermiticity_defect() const {
    const CMatrix m = matrix();
    return (m - m.adjoint()).cwiseAbs().maxCoeff();
  }

  double purity() const {
    const CMatrix m = matrix();
    return (m * m).trace().real();
  }

  void check_shape() const {
    if (static_cast<Eigen::Index>(n_d) * n_d != vec.size())
      throw std::invalid_argument("DensityState: vector length is not N_D^2");
  }
};

}  // namespace adm
