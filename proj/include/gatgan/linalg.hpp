#pragma once

#include <cstddef>
#include <vector>

namespace gatgan::linalg {

// Dense row-major n x n helpers for the metric and certification paths.
// These run outside the autodiff graph.

struct SymEig {
    std::vector<double> eigenvalues;  // ascending
    std::vector<double> vectors;      // row-major [n,n], column j pairs with eigenvalue j
};

// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
// Symmetry deviation beyond `sym_tol` (max |a_ij - a_ji|) is a contract
// error; the strictly lower triangle is mirrored before iterating.
SymEig sym_eig(std::vector<double> a, std::size_t n, double sym_tol = 1e-8);

// Symmetric positive-semidefinite square root V sqrt(diag(w)) V^T.
// Slightly negative eigenvalues from roundoff are clamped to zero.
std::vector<double> sqrtm_psd(const std::vector<double>& a, std::size_t n,
                              double sym_tol = 1e-8);

// Largest singular value of an arbitrary rows x cols matrix, computed from
// the exact eigenvalues of the smaller Gram matrix.
double spectral_norm(const std::vector<double>& a, std::size_t rows, std::size_t cols);

// C = A * B for row-major n x n matrices.
std::vector<double> matmul_square(const std::vector<double>& a, const std::vector<double>& b,
                                  std::size_t n);

double trace(const std::vector<double>& a, std::size_t n);

}  // namespace gatgan::linalg
