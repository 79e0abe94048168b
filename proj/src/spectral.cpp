#include "rpflow/spectral.hpp"

#include <lapacke.h>

#include <cmath>
#include <sstream>

namespace rpflow {

namespace {

void check_finite(const Eigen::MatrixXd& H) {
  if (!H.allFinite()) throw NumericalError("eigendecompose: non-finite matrix entry");
}

void syevd(Eigen::MatrixXd& A, Eigen::VectorXd& w, char jobz, double t) {
  const int n = int(A.rows());
  w.resize(n);
  const int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, jobz, 'L', n, A.data(), n, w.data());
  if (info != 0) {
    std::ostringstream os;
    os << "dsyevd failed (info=" << info << ") at t=" << t << ", N=" << n;
    throw NumericalError(os.str());
  }
}

}  // namespace

SpectralData eigendecompose(const HamiltonianSnapshot& H) {
  check_finite(H.matrix);
  SpectralData s;
  s.t = H.t;
  s.eigenvectors = H.matrix;
  syevd(s.eigenvectors, s.eigenvalues, 'V', H.t);
  return s;
}

Eigen::VectorXd eigenvalues_only(const HamiltonianSnapshot& H) {
  check_finite(H.matrix);
  Eigen::MatrixXd work = H.matrix;
  Eigen::VectorXd w;
  syevd(work, w, 'N', H.t);
  return w;
}

Cplx stieltjes_trace(const Eigen::VectorXd& eigenvalues, UpperHalfPoint z) {
  const Cplx zz = z;
  Cplx acc = 0.0;
  const double* lam = eigenvalues.data();
  const int n = int(eigenvalues.size());
  for (int i = 0; i < n; ++i) acc += 1.0 / (lam[i] - zz);
  return acc / double(n);
}

Cplx stieltjes_trace(const SpectralData& spec, UpperHalfPoint z) {
  return stieltjes_trace(spec.eigenvalues, z);
}

ResolventValue local_resolvent(const SpectralData& spec, int x, UpperHalfPoint z) {
  const int n = int(spec.eigenvalues.size());
  if (x < 0 || x >= n) throw ConfigError("local_resolvent: site index out of range");
  const Cplx zz = z;
  Cplx acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double w = spec.eigenvectors(x, i);
    acc += (w * w) / (spec.eigenvalues[i] - zz);
  }
  ResolventValue r;
  r.z = z;
  r.site = x;
  r.value = acc;
  return r;
}

Cplx deformed_semicircle(const Potential& V, double Tval, UpperHalfPoint z) {
  const Cplx zz = z;
  Cplx m = stieltjes_potential(V, z);
  if (Tval == 0.0) return m;
  const double damping = 0.5, tol = 1e-12;
  const int max_iter = 10000;
  const int n = V.N();
  const double* v = V.values.data();
  for (int it = 0; it < max_iter; ++it) {
    Cplx next = 0.0;
    const Cplx shift = zz + Tval * m;
    for (int i = 0; i < n; ++i) next += 1.0 / (v[i] - shift);
    next /= double(n);
    const Cplx mixed = damping * next + (1.0 - damping) * m;
    if (std::abs(mixed - m) < tol) return mixed;
    m = mixed;
  }
  std::ostringstream os;
  os << "deformed_semicircle: no convergence after " << max_iter
     << " damped iterations (damping " << damping << ") at z=(" << z.re << "," << z.im << ")";
  throw NumericalError(os.str());
}

}  // namespace rpflow
