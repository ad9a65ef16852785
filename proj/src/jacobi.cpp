#include "conjulab/jacobi.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace conjulab {

Vec jacobi_eigenvalues(const Mat& a) {
  if (a.rows() != a.cols()) throw ShapeError("jacobi: matrix not square");
  const Index n = a.rows();
  Mat m = 0.5 * (a + a.transpose());
  if (n == 1) return m.col(0);

  const double frob = m.norm();
  const double tol = 1e-12 * frob;

  auto off_norm = [&m, n]() {
    double worst = 0.0;
    for (Index p = 0; p < n; ++p)
      for (Index q = p + 1; q < n; ++q) worst = std::max(worst, std::abs(m(p, q)));
    return worst;
  };

  if (frob == 0.0) return Vec::Zero(n);

  bool converged = off_norm() <= tol;
  for (int sweep = 0; sweep < 100 && !converged; ++sweep) {
    for (Index p = 0; p < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        double apq = m(p, q);
        if (std::abs(apq) <= tol) continue;
        double theta = (m(q, q) - m(p, p)) / (2.0 * apq);
        // Smaller-angle rotation root (standard Jacobi choice).
        double t = (theta >= 0.0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        // m <- R^T m R with the Givens rotation in the (p, q) plane.
        for (Index i = 0; i < n; ++i) {
          double mip = m(i, p);
          double miq = m(i, q);
          m(i, p) = c * mip - s * miq;
          m(i, q) = s * mip + c * miq;
        }
        for (Index i = 0; i < n; ++i) {
          double mpi = m(p, i);
          double mqi = m(q, i);
          m(p, i) = c * mpi - s * mqi;
          m(q, i) = s * mpi + c * mqi;
        }
      }
    }
    converged = off_norm() <= tol;
  }
  if (!converged) throw NotConverged("jacobi: sweep cap reached");

  Vec ev = m.diagonal();  // materialize: the diagonal view is strided
  std::sort(ev.data(), ev.data() + n);
  return ev;
}

}  // namespace conjulab
