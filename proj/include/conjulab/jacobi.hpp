#ifndef CONJULAB_JACOBI_HPP_
#define CONJULAB_JACOBI_HPP_

#include "conjulab/common.hpp"

namespace conjulab {

// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
// ascending. Iterates sweeps until the off-diagonal infinity norm drops below
// 1e-12 * ||A||_F (sweep cap 100). Throws NotConverged past the cap.
Vec jacobi_eigenvalues(const Mat& a);

}  // namespace conjulab

#endif  // CONJULAB_JACOBI_HPP_
