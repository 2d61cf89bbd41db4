#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "svit/mat.hpp"

namespace svit {

// Full symmetric eigendecomposition.
//   eigenvalues ascending; eigenvectors stored columnwise (column j pairs
//   with eigenvalues[j]); each vector's largest-magnitude component is made
//   positive (first such index on ties) so decompositions are reproducible.
struct EighResult {
    std::vector<double> eigenvalues;
    Mat eigenvectors;
};

// Cyclic Jacobi rotations. Input must be square and symmetric within 1e-10
// (ValidationError otherwise); failure to reach an off-diagonal norm of
// 1e-12 * ||A||_F within 100 sweeps is a NumericError naming the sweep count.
EighResult eigh_symmetric(const Mat& a);

// Partial symmetric eigendecomposition via Lanczos with full
// reorthogonalization: the k largest eigenpairs of the operator y = A x given
// only its matvec. Deterministic (seeded start vector). Residuals
// ||A v - lambda v|| are verified against tol * max|lambda|; if they fail
// even after one restart with a longer Krylov basis, NumericError.
struct PartialEigh {
    std::vector<double> eigenvalues;  // descending, length k
    Mat vectors;                      // m x k, columnwise, sign-fixed
};

PartialEigh lanczos_largest(const std::function<void(const double*, double*)>& matvec,
                            std::size_t m, std::size_t k, std::uint64_t seed,
                            double tol = 1e-8);

// Flips v (a column of mat) so its largest-magnitude entry is positive.
void fix_sign_column(Mat& mat, std::size_t col);

double dot(std::span<const double> a, std::span<const double> b);

}  // namespace svit
