#pragma once

// Thin LAPACKE bindings over Eigen column-major storage.

#include <complex>

#ifndef lapack_complex_float
#define lapack_complex_float std::complex<float>
#endif
#ifndef lapack_complex_double
#define lapack_complex_double std::complex<double>
#endif
#include <lapacke.h>

#include "adm/common.hpp"

namespace adm::detail {

enum class EigJob { None, Right, Both };

/// Wraps zgeev. `a` is overwritten. Returns LAPACK info.
inline int zgeev(CMatrix& a, CVector& w, CMatrix* vl, CMatrix* vr, EigJob job) {
  const auto n = static_cast<lapack_int>(a.rows());
  w.resize(n);
  const char jobvl = (job == EigJob::Both) ? 'V' : 'N';
  const char jobvr = (job == EigJob::None) ? 'N' : 'V';
  cplx dummy{};
  cplx* pl = &dummy;
  cplx* pr = &dummy;
  lapack_int ldl = 1, ldr = 1;
  if (jobvl == 'V') {
    vl->resize(n, n);
    pl = vl->data();
    ldl = n;
  }
  if (jobvr == 'V') {
    vr->resize(n, n);
    pr = vr->data();
    ldr = n;
  }
  return LAPACKE_zgeev(LAPACK_COL_MAJOR, jobvl, jobvr, n, a.data(), n, w.data(), pl, ldl, pr, ldr);
}

}  // namespace adm::detail
