#pragma once

#include <vector>

namespace qsd {

/// Thomas algorithm for tridiagonal systems.  No pivoting: intended for the
/// M-matrices (-Q_C and transposes) arising here, whose LU factorization
/// exists and is stable without row exchanges.
/// lower[i] multiplies x[i-1] in row i (lower[0] unused), upper[i] multiplies
/// x[i+1] (upper[n-1] unused).  Throws SingularSystem on a vanishing pivot.
std::vector<double> solve_tridiagonal(std::vector<double> lower,
                                      std::vector<double> diag,
                                      std::vector<double> upper,
                                      std::vector<double> rhs);

/// Dense LU with partial pivoting, row-major a of size n*n.
/// Throws SingularSystem on rank deficiency.
std::vector<double> solve_dense(std::vector<double> a, std::vector<double> rhs);

}  // namespace qsd
