#include "conjulab/convex.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace conjulab::convex {

namespace {

constexpr double kConstraintTol = 1e-9;
constexpr double kNewtonTol = 1e-10;
constexpr int kNewtonMaxIter = 100;

void check_entropy_domain(const GeneratingFunction& gf, const Vec& y,
                          bool allow_zero) {
  if (!gf.is_entropy_kind()) return;
  for (Index i = 0; i < y.size(); ++i) {
    if (y[i] < 0.0 || (!allow_zero && y[i] == 0.0)) {
      throw DomainError("entropy generating function requires positive coordinates");
    }
  }
}

double constraint_residual(const GeneratingFunction& gf, const Vec& y) {
  if (!gf.constraint) return 0.0;
  return (gf.constraint->matrix_G * y - gf.constraint->vector_b)
      .cwiseAbs()
      .maxCoeff();
}

double eval_omega(OmegaKind kind, const Vec& y, bool closed) {
  switch (kind) {
    case OmegaKind::HalfSquaredNorm:
      return 0.5 * y.squaredNorm();
    case OmegaKind::NegativeShannonEntropy: {
      double s = 0.0;
      for (Index i = 0; i < y.size(); ++i) s += closed ? xlogx(y[i]) : y[i] * std::log(y[i]);
      return s;
    }
    case OmegaKind::UnnormalizedEntropy: {
      double s = 0.0;
      for (Index i = 0; i < y.size(); ++i)
        s += (closed ? xlogx(y[i]) : y[i] * std::log(y[i])) - y[i];
      return s;
    }
  }
  return 0.0;
}

// Omega*, grad Omega*, and the diagonal of hess Omega* for the three kinds.
double omega_star(OmegaKind kind, const Vec& nu) {
  switch (kind) {
    case OmegaKind::HalfSquaredNorm:
      return 0.5 * nu.squaredNorm();
    case OmegaKind::NegativeShannonEntropy:
      return (nu.array() - 1.0).exp().sum();
    case OmegaKind::UnnormalizedEntropy:
      return nu.array().exp().sum();
  }
  return 0.0;
}

Vec grad_omega_star(OmegaKind kind, const Vec& nu) {
  switch (kind) {
    case OmegaKind::HalfSquaredNorm:
      return nu;
    case OmegaKind::NegativeShannonEntropy:
      return (nu.array() - 1.0).exp();
    case OmegaKind::UnnormalizedEntropy:
      return nu.array().exp();
  }
  return nu;
}

Vec hess_omega_star_diag(OmegaKind kind, const Vec& nu) {
  switch (kind) {
    case OmegaKind::HalfSquaredNorm:
      return Vec::Ones(nu.size());
    case OmegaKind::NegativeShannonEntropy:
      return (nu.array() - 1.0).exp();
    case OmegaKind::UnnormalizedEntropy:
      return nu.array().exp();
  }
  return Vec::Ones(nu.size());
}

}  // namespace

AffineConstraint::AffineConstraint(Mat G, Vec b)
    : matrix_G(std::move(G)), vector_b(std::move(b)) {
  if (matrix_G.rows() != vector_b.size()) {
    throw ShapeError("constraint matrix rows and vector size differ");
  }
  Eigen::ColPivHouseholderQR<Mat> qr(matrix_G);
  if (qr.rank() != matrix_G.rows()) {
    throw RankError("constraint matrix is not full row rank");
  }
}

AffineConstraint AffineConstraint::simplex(Index d) {
  return AffineConstraint(Mat::Ones(1, d), Vec::Ones(1));
}

bool GeneratingFunction::has_simplex_constraint() const {
  if (!constraint) return false;
  const auto& c = *constraint;
  return c.matrix_G.rows() == 1 && (c.matrix_G.array() == 1.0).all() &&
         c.vector_b.size() == 1 && c.vector_b[0] == 1.0;
}

double eval_phi(const GeneratingFunction& gf, const Vec& y) {
  check_entropy_domain(gf, y, /*allow_zero=*/false);
  if (constraint_residual(gf, y) > kConstraintTol) return kInf;
  return eval_omega(gf.kind, y, /*closed=*/false);
}

double eval_phi_closed(const GeneratingFunction& gf, const Vec& y) {
  check_entropy_domain(gf, y, /*allow_zero=*/true);
  if (constraint_residual(gf, y) > kConstraintTol) return kInf;
  return eval_omega(gf.kind, y, /*closed=*/true);
}

Vec grad_phi(const GeneratingFunction& gf, const Vec& y) {
  check_entropy_domain(gf, y, /*allow_zero=*/false);
  switch (gf.kind) {
    case OmegaKind::HalfSquaredNorm:
      return y;
    case OmegaKind::NegativeShannonEntropy:
      return y.array().log() + 1.0;
    case OmegaKind::UnnormalizedEntropy:
      return y.array().log();
  }
  return y;
}

double log_sum_exp(const Vec& nu) {
  double m = nu.maxCoeff();
  return m + std::log((nu.array() - m).exp().sum());
}

Vec softmax(const Vec& nu) {
  double m = nu.maxCoeff();
  Vec e = (nu.array() - m).exp();
  return e / e.sum();
}

ConjugateResult conjugate_newton(const GeneratingFunction& gf, const Vec& nu) {
  if (!gf.constraint) {
    return {omega_star(gf.kind, nu), Vec()};
  }
  const Mat& G = gf.constraint->matrix_G;
  const Vec& b = gf.constraint->vector_b;
  const Index m = G.rows();

  Vec lambda = Vec::Zero(m);
  Vec shifted = nu + G.transpose() * lambda;
  Vec resid = G * grad_omega_star(gf.kind, shifted) - b;
  double rnorm = resid.cwiseAbs().maxCoeff();

  for (int iter = 0; iter < kNewtonMaxIter && rnorm > kNewtonTol; ++iter) {
    Vec h = hess_omega_star_diag(gf.kind, shifted);
    Mat J = G * h.asDiagonal() * G.transpose();
    Vec step = J.ldlt().solve(resid);
    // Halve the step until the residual decreases.
    double t = 1.0;
    Vec lam_new;
    Vec resid_new;
    double rnorm_new = kInf;
    for (int halve = 0; halve < 60; ++halve) {
      lam_new = lambda - t * step;
      Vec sh = nu + G.transpose() * lam_new;
      resid_new = G * grad_omega_star(gf.kind, sh) - b;
      rnorm_new = resid_new.cwiseAbs().maxCoeff();
      if (rnorm_new < rnorm) break;
      t *= 0.5;
    }
    if (!(rnorm_new < rnorm)) {
      throw NewtonDivergence("conjugate KKT solve stalled");
    }
    lambda = lam_new;
    shifted = nu + G.transpose() * lambda;
    resid = resid_new;
    rnorm = rnorm_new;
  }
  if (rnorm > kNewtonTol) {
    throw NewtonDivergence("conjugate KKT solve did not reach tolerance");
  }
  double value = omega_star(gf.kind, shifted) - lambda.dot(b);
  return {value, lambda};
}

ConjugateResult conjugate(const GeneratingFunction& gf, const Vec& nu) {
  if (gf.is_entropy_kind() && gf.has_simplex_constraint()) {
    double lse = log_sum_exp(nu);
    Vec lambda(1);
    if (gf.kind == OmegaKind::NegativeShannonEntropy) {
      lambda[0] = 1.0 - lse;
      return {lse, lambda};
    }
    lambda[0] = -lse;
    return {1.0 + lse, lambda};
  }
  return conjugate_newton(gf, nu);
}

Vec dual_map(const GeneratingFunction& gf, const Vec& nu) {
  if (gf.is_entropy_kind() && gf.has_simplex_constraint()) {
    return softmax(nu);
  }
  if (!gf.constraint) {
    return grad_omega_star(gf.kind, nu);
  }
  ConjugateResult c = conjugate_newton(gf, nu);
  return grad_omega_star(gf.kind,
                         nu + gf.constraint->matrix_G.transpose() * c.lambda_star);
}

double fy_loss(const GeneratingFunction& gf, const Vec& y, const Vec& nu) {
  if (constraint_residual(gf, y) > kConstraintTol) {
    throw DomainError("target violates the affine constraint");
  }
  double phi_y = eval_phi_closed(gf, y);
  return phi_y + conjugate(gf, nu).value - y.dot(nu);
}

double bregman(const GeneratingFunction& gf, const Vec& y, const Vec& mu) {
  double phi_y = eval_phi_closed(gf, y);
  double phi_mu = eval_phi_closed(gf, mu);
  Vec g = grad_phi(gf, mu);  // throws on boundary mu for entropy kinds
  return phi_y - phi_mu - g.dot(y - mu);
}

double bregman_closed(const GeneratingFunction& gf, const Vec& y,
                      const Vec& mu) {
  if (y.size() != mu.size()) throw ShapeError("bregman_closed: size mismatch");
  if (gf.kind == OmegaKind::HalfSquaredNorm) {
    return 0.5 * (y - mu).squaredNorm();
  }
  check_entropy_domain(gf, y, /*allow_zero=*/true);
  check_entropy_domain(gf, mu, /*allow_zero=*/true);
  // Both entropy kinds reduce to the generalized KL form
  // sum_i [ y_i log(y_i/mu_i) - y_i + mu_i ]  (the linear parts of the two
  // generating functions contribute identically after cancellation).
  double s = 0.0;
  for (Index i = 0; i < y.size(); ++i) {
    if (y[i] > 0.0) {
      if (mu[i] == 0.0) return kInf;
      s += y[i] * std::log(y[i] / mu[i]);
    }
    s += mu[i] - y[i];
  }
  return s;
}

std::pair<double, double> ce_offset_check(const GeneratingFunction& gf,
                                          const Vec& q, const Vec& logits) {
  for (Index i = 0; i < q.size(); ++i) {
    if (q[i] <= 0.0) throw DomainError("q must be strictly positive");
  }
  Vec p = softmax(logits);
  double ce_qp = -(q.array() * p.array().log()).sum();
  double ce_qq = -(q.array() * q.array().log()).sum();
  double lhs = ce_qp - ce_qq;
  double rhs = fy_loss(gf, q, logits);
  return {lhs, rhs};
}

}  // namespace conjulab::convex
