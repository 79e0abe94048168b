#pragma once
// Dense symmetric eigendecomposition (LAPACK dsyevd) plus the resolvent
// observables built from it: local resolvents G(x,z), the trace transform
// S(z), the potential-only transform S_0(z) and the deformed-semicircle
// fixed point used as a macroscopic oracle for S_T.
#include <Eigen/Dense>

#include "rpflow/dyson.hpp"
#include "rpflow/potential.hpp"

namespace rpflow {

struct SpectralData {
  double t = 0.0;
  Eigen::VectorXd eigenvalues;   // ascending
  Eigen::MatrixXd eigenvectors;  // columns psi_i
};

struct ResolventValue {
  UpperHalfPoint z;
  int site = 0;
  Cplx value;
};

// Full decomposition (values + vectors).
SpectralData eigendecompose(const HamiltonianSnapshot& H);
// Values only; about half the cost, for trace-level work.
Eigen::VectorXd eigenvalues_only(const HamiltonianSnapshot& H);

// S(z) = (1/N) sum_i 1/(lambda_i - z).
Cplx stieltjes_trace(const Eigen::VectorXd& eigenvalues, UpperHalfPoint z);
Cplx stieltjes_trace(const SpectralData& spec, UpperHalfPoint z);

// G(x,z) = sum_i psi_i(x)^2 / (lambda_i - z); Herglotz in z.
ResolventValue local_resolvent(const SpectralData& spec, int x, UpperHalfPoint z);

// Unique Herglotz fixed point of m = (1/N) sum_x 1/(V_x - z - T m), by damped
// iteration (damping 0.5, tol 1e-12, max 1e4 iterations) started at S_0(z).
Cplx deformed_semicircle(const Potential& V, double Tval, UpperHalfPoint z);

}  // namespace rpflow
