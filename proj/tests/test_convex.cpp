#include <cmath>

#include "conjulab/convex.hpp"
#include "conjulab/rng.hpp"
#include "doctest.h"

using namespace conjulab;
using namespace conjulab::convex;

namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Vec random_simplex(SplitMix64& rng, Index d) {
  Vec q(d);
  for (Index i = 0; i < d; ++i) q[i] = rng.uniform(0.01, 1.0);
  return q / q.sum();
}

}  // namespace

TEST_CASE("eval_phi matches the closed forms") {
  CHECK(eval_phi(GeneratingFunction::half_squared_norm(2), vec2(3, 4)) ==
        doctest::Approx(12.5).epsilon(1e-12));
  GeneratingFunction shannon{OmegaKind::NegativeShannonEntropy, std::nullopt, 2};
  CHECK(eval_phi(shannon, vec2(0.5, 0.5)) ==
        doctest::Approx(-std::log(2.0)).epsilon(1e-12));
  GeneratingFunction unnorm{OmegaKind::UnnormalizedEntropy, std::nullopt, 2};
  // Independent scalar summation: 1*log1 - 1, twice.
  CHECK(eval_phi(unnorm, vec2(1, 1)) == doctest::Approx(-2.0).epsilon(1e-12));
}

TEST_CASE("eval_phi domain handling") {
  auto ent = GeneratingFunction::simplex_entropy(2);
  CHECK_THROWS_AS(eval_phi(ent, vec2(-0.1, 1.1)), DomainError);
  CHECK_THROWS_AS(eval_phi(ent, vec2(0.0, 1.0)), DomainError);  // strict
  CHECK(eval_phi_closed(ent, vec2(0.0, 1.0)) == doctest::Approx(0.0));
  // Constraint violated beyond 1e-9: distinguished +inf marker.
  CHECK(eval_phi(ent, vec2(0.6, 0.6)) == kInf);
}

TEST_CASE("affine constraint requires full row rank") {
  Mat g(2, 2);
  g << 1, 1, 2, 2;
  CHECK_THROWS_AS(AffineConstraint(g, Vec::Ones(2)), RankError);
  Mat g2(1, 3);
  g2 << 1, 1, 1;
  CHECK_NOTHROW(AffineConstraint(g2, Vec::Ones(1)));
}

TEST_CASE("conjugate closed forms and Newton agreement") {
  auto un = GeneratingFunction::unnormalized_entropy_simplex(2);
  auto r = conjugate(un, vec2(0, 0));
  CHECK(r.value == doctest::Approx(1.0 + std::log(2.0)).epsilon(1e-12));
  REQUIRE(r.lambda_star.size() == 1);
  CHECK(r.lambda_star[0] == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
  auto rn = conjugate_newton(un, vec2(0, 0));
  CHECK(std::abs(rn.value - r.value) <= 1e-9);

  CHECK(conjugate(GeneratingFunction::half_squared_norm(2), vec2(3, 4)).value ==
        doctest::Approx(12.5).epsilon(1e-12));

  auto r10 = conjugate(un, vec2(1, 0));
  CHECK(r10.value ==
        doctest::Approx(1.0 + std::log(std::exp(1.0) + 1.0)).epsilon(1e-12));
  CHECK(std::abs(conjugate_newton(un, vec2(1, 0)).value - r10.value) <= 1e-9);
}

TEST_CASE("conjugate Newton vs analytic fast path on random logits") {
  SplitMix64 rng(42);
  for (Index d : {Index(2), Index(10), Index(100)}) {
    auto un = GeneratingFunction::unnormalized_entropy_simplex(d);
    auto sh = GeneratingFunction::simplex_entropy(d);
    for (int it = 0; it < 500; ++it) {
      Vec nu(d);
      for (Index i = 0; i < d; ++i) nu[i] = rng.uniform(-8.0, 8.0);
      double lse = log_sum_exp(nu);
      CHECK(std::abs(conjugate_newton(un, nu).value - (1.0 + lse)) <= 1e-8);
      CHECK(std::abs(conjugate_newton(sh, nu).value - lse) <= 1e-8);
    }
  }
}

TEST_CASE("dual map") {
  auto sh = GeneratingFunction::simplex_entropy(2);
  Vec d1 = dual_map(sh, vec2(0, 0));
  CHECK(d1[0] == doctest::Approx(0.5).epsilon(1e-12));
  Vec d2 = dual_map(GeneratingFunction::half_squared_norm(2), vec2(3, 4));
  CHECK(d2[0] == doctest::Approx(3.0));
  CHECK(d2[1] == doctest::Approx(4.0));
  Vec d3 = dual_map(sh, vec2(std::log(3.0), 0));
  CHECK(d3[0] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(d3[1] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("fy_loss frozen values") {
  auto sh = GeneratingFunction::simplex_entropy(2);
  CHECK(fy_loss(sh, vec2(1, 0), vec2(0, 0)) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  auto sq = GeneratingFunction::half_squared_norm(2);
  CHECK(fy_loss(sq, vec2(1, 2), vec2(1, 2)) == doctest::Approx(0.0));
  CHECK(fy_loss(sq, vec2(0, 0), vec2(3, 4)) == doctest::Approx(12.5));
  CHECK_THROWS_AS(fy_loss(sh, vec2(0.7, 0.7), vec2(0, 0)), DomainError);
}

TEST_CASE("bregman frozen values") {
  auto sq = GeneratingFunction::half_squared_norm(2);
  CHECK(bregman(sq, vec2(1, 1), vec2(0, 0)) == doctest::Approx(1.0));
  auto sh = GeneratingFunction::simplex_entropy(2);
  CHECK(bregman(sh, vec2(0.5, 0.5), vec2(0.5, 0.5)) ==
        doctest::Approx(0.0).epsilon(1e-12));
  double hand = 0.9 * std::log(1.8) + 0.1 * std::log(0.2);
  CHECK(bregman(sh, vec2(0.9, 0.1), vec2(0.5, 0.5)) ==
        doctest::Approx(hand).epsilon(1e-9));
  CHECK(hand == doctest::Approx(0.368074).epsilon(1e-5));
  CHECK_THROWS_AS(bregman(sh, vec2(0.5, 0.5), vec2(1.0, 0.0)), DomainError);
}

TEST_CASE("ce_offset_check identity") {
  auto sh = GeneratingFunction::simplex_entropy(2);
  auto [l0, r0] = ce_offset_check(sh, vec2(0.5, 0.5), vec2(0, 0));
  CHECK(std::abs(l0) <= 1e-12);
  CHECK(std::abs(r0) <= 1e-12);
  auto [l1, r1] = ce_offset_check(sh, vec2(0.5, 0.5), vec2(1, 0));
  double hand = std::log((std::exp(1.0) + 1.0) / (2.0 * std::sqrt(std::exp(1.0))));
  CHECK(l1 == doctest::Approx(hand).epsilon(1e-9));
  CHECK(std::abs(l1 - r1) <= 1e-9);
  CHECK(hand == doctest::Approx(0.120115).epsilon(1e-4));
  auto [l2, r2] = ce_offset_check(sh, vec2(0.9, 0.1), vec2(0, 0));
  CHECK(l2 == doctest::Approx(0.368074).epsilon(1e-5));
  CHECK(std::abs(l2 - r2) <= 1e-9);
  CHECK_THROWS_AS(ce_offset_check(sh, vec2(1.0, 0.0), vec2(0, 0)), DomainError);
}

TEST_CASE("Fenchel-Young inequality with equality exactly on dual pairs") {
  SplitMix64 rng(7);
  auto sq = GeneratingFunction::half_squared_norm(3);
  auto sh = GeneratingFunction::simplex_entropy(3);
  for (int it = 0; it < 1000; ++it) {
    Vec mu(3), nu(3);
    for (Index i = 0; i < 3; ++i) {
      mu[i] = rng.uniform(-3.0, 3.0);
      nu[i] = rng.uniform(-3.0, 3.0);
    }
    CHECK(fy_loss(sq, mu, nu) >= -1e-10);
    CHECK(std::abs(fy_loss(sq, mu, grad_phi(sq, mu))) <= 1e-8);

    Vec p = random_simplex(rng, 3);
    CHECK(fy_loss(sh, p, nu) >= -1e-10);
    // nu = grad Phi(p) (any representative; the simplex direction is gauge).
    CHECK(std::abs(fy_loss(sh, p, grad_phi(sh, p))) <= 1e-8);
  }
}

TEST_CASE("dual-map round trip through the lambda-corrected gradient") {
  SplitMix64 rng(11);
  auto sh = GeneratingFunction::simplex_entropy(4);
  for (int it = 0; it < 200; ++it) {
    Vec nu(4);
    for (Index i = 0; i < 4; ++i) nu[i] = rng.uniform(-5.0, 5.0);
    auto conj = conjugate(sh, nu);
    Vec dual = dual_map(sh, nu);
    Vec corrected = nu + sh.constraint->matrix_G.transpose() * conj.lambda_star;
    CHECK((grad_phi(sh, dual) - corrected).cwiseAbs().maxCoeff() <= 1e-7);
  }
}

TEST_CASE("KL identity, Pinsker, and KL upper bound") {
  SplitMix64 rng(13);
  auto sh = GeneratingFunction::simplex_entropy(5);
  const double ln2 = std::log(2.0);
  for (int it = 0; it < 1000; ++it) {
    Vec nu(5);
    for (Index i = 0; i < 5; ++i) nu[i] = rng.uniform(-4.0, 4.0);
    Vec p = softmax(nu);
    Vec q = random_simplex(rng, 5);
    double kl = 0.0;
    for (Index i = 0; i < 5; ++i) kl += q[i] * std::log(q[i] / p[i]);
    CHECK(std::abs(fy_loss(sh, q, nu) - kl) <= 1e-9);
    // Pinsker with the 1/(2 ln 2) constant is the bits-denominated form.
    double l1 = (p - q).cwiseAbs().sum();
    CHECK(kl / ln2 >= l1 * l1 / (2.0 * ln2) - 1e-12);
    CHECK(kl <= (p - q).squaredNorm() / p.minCoeff() + 1e-12);
  }
}

TEST_CASE("strict convexity spot check") {
  SplitMix64 rng(17);
  for (auto kind : {OmegaKind::HalfSquaredNorm, OmegaKind::NegativeShannonEntropy,
                    OmegaKind::UnnormalizedEntropy}) {
    GeneratingFunction gf{kind, std::nullopt, 3};
    for (int it = 0; it < 100; ++it) {
      Vec a(3), b(3);
      for (Index i = 0; i < 3; ++i) {
        a[i] = rng.uniform(0.1, 2.0);
        b[i] = rng.uniform(0.1, 2.0);
      }
      if ((a - b).norm() < 1e-6) continue;
      double t = rng.uniform(0.1, 0.9);
      CHECK(eval_phi(gf, t * a + (1 - t) * b) <
            t * eval_phi(gf, a) + (1 - t) * eval_phi(gf, b) + 1e-12);
    }
  }
}

TEST_CASE("bregman_closed agrees with bregman on interior points") {
  SplitMix64 rng(19);
  auto sh = GeneratingFunction::simplex_entropy(4);
  for (int it = 0; it < 200; ++it) {
    Vec y = random_simplex(rng, 4);
    Vec mu = random_simplex(rng, 4);
    CHECK(std::abs(bregman_closed(sh, y, mu) - bregman(sh, y, mu)) <= 1e-10);
  }
  // One-hot against a boundary mean with matching support.
  CHECK(bregman_closed(sh, vec2(1, 0), vec2(1, 0)) == doctest::Approx(0.0));
  CHECK(bregman_closed(sh, vec2(1, 0), vec2(0, 1)) == kInf);
}
