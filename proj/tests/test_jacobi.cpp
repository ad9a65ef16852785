#include <Eigen/Dense>
#include <cmath>

#include "conjulab/jacobi.hpp"
#include "conjulab/rng.hpp"
#include "doctest.h"

using namespace conjulab;

namespace {

// Number of eigenvalues of symmetric A strictly below t, via the inertia of
// A - t I (Sylvester's law, LDL^T with pivoting).
int count_below(const Mat& a, double t) {
  Eigen::LDLT<Mat> ldlt(a - t * Mat::Identity(a.rows(), a.cols()));
  int neg = 0;
  Vec d = ldlt.vectorD();
  for (Index i = 0; i < d.size(); ++i) {
    if (d[i] < 0.0) ++neg;
  }
  return neg;
}

// Independent oracle: k-th smallest eigenvalue by bisection on the inertia
// count inside a Gershgorin bracket.
Vec bisection_eigenvalues(const Mat& a) {
  const Index n = a.rows();
  double radius = 0.0;
  for (Index i = 0; i < n; ++i) {
    radius = std::max(radius, a.row(i).cwiseAbs().sum());
  }
  Vec out(n);
  for (Index k = 0; k < n; ++k) {
    double lo = -radius - 1.0;
    double hi = radius + 1.0;
    for (int it = 0; it < 200; ++it) {
      double mid = 0.5 * (lo + hi);
      if (count_below(a, mid) <= k) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    out[k] = 0.5 * (lo + hi);
  }
  return out;
}

}  // namespace

TEST_CASE("hand 2x2 spectrum") {
  Mat a(2, 2);
  a << 2, 1, 1, 2;
  Vec ev = jacobi_eigenvalues(a);
  CHECK(ev[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ev[1] == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("zero and scalar cases") {
  CHECK(jacobi_eigenvalues(Mat::Zero(3, 3)).cwiseAbs().maxCoeff() == 0.0);
  Mat one(1, 1);
  one << -4.5;
  CHECK(jacobi_eigenvalues(one)[0] == doctest::Approx(-4.5));
  CHECK_THROWS_AS(jacobi_eigenvalues(Mat::Zero(2, 3)), ShapeError);
}

TEST_CASE("random symmetric matrices vs bisection oracle") {
  SplitMix64 rng(23);
  for (int it = 0; it < 50; ++it) {
    Index k = 2 + static_cast<Index>(rng.next_below(15));  // up to 16
    Mat b(k, k);
    for (Index i = 0; i < k; ++i) {
      for (Index j = 0; j < k; ++j) b(i, j) = rng.next_gaussian();
    }
    Mat a = 0.5 * (b + b.transpose());
    Vec jac = jacobi_eigenvalues(a);
    Vec bis = bisection_eigenvalues(a);
    for (Index i = 0; i < k; ++i) {
      CHECK(std::abs(jac[i] - bis[i]) <= 1e-8);
    }
    // Trace consistency.
    CHECK(jac.sum() == doctest::Approx(a.trace()).epsilon(1e-10));
  }
}
