#ifndef CONJULAB_CONVEX_HPP_
#define CONJULAB_CONVEX_HPP_

#include <optional>
#include <utility>

#include "conjulab/common.hpp"

namespace conjulab::convex {

enum class OmegaKind {
  HalfSquaredNorm,       // Omega(y) = 0.5 * ||y||^2
  NegativeShannonEntropy,  // Omega(p) = sum p_i log p_i, p > 0
  UnnormalizedEntropy,     // Omega(p) = sum (p_i log p_i - p_i), p > 0
};

// Affine equality constraint set C = { y : G y = b }. G must have full row
// rank; construction fails otherwise.
struct AffineConstraint {
  Mat matrix_G;
  Vec vector_b;

  AffineConstraint(Mat G, Vec b);

  // The simplex constraint 1^T y = 1 in dimension d.
  static AffineConstraint simplex(Index d);
};

// A generating function Phi = Omega + I_C: a strictly convex Omega plus an
// optional affine constraint indicator.
struct GeneratingFunction {
  OmegaKind kind = OmegaKind::HalfSquaredNorm;
  std::optional<AffineConstraint> constraint;
  Index dim = 0;

  static GeneratingFunction half_squared_norm(Index d) {
    return {OmegaKind::HalfSquaredNorm, std::nullopt, d};
  }
  // Negative Shannon entropy restricted to the probability simplex. This is
  // the generating function behind softmax / cross entropy.
  static GeneratingFunction simplex_entropy(Index d) {
    return {OmegaKind::NegativeShannonEntropy, AffineConstraint::simplex(d), d};
  }
  static GeneratingFunction unnormalized_entropy_simplex(Index d) {
    return {OmegaKind::UnnormalizedEntropy, AffineConstraint::simplex(d), d};
  }

  bool is_entropy_kind() const { return kind != OmegaKind::HalfSquaredNorm; }
  bool has_simplex_constraint() const;
};

struct ConjugateResult {
  double value = 0.0;
  Vec lambda_star;  // empty when unconstrained
};

// Phi(y) = Omega(y), or +inf when the attached constraint is violated beyond
// 1e-9 in the infinity norm. Throws DomainError off dom(Omega).
double eval_phi(const GeneratingFunction& gf, const Vec& y);

// Like eval_phi but with the 0 log 0 := 0 closure of the entropy domains, so
// one-hot targets evaluate cleanly. Used by losses and entropies.
double eval_phi_closed(const GeneratingFunction& gf, const Vec& y);

// Gradient of Omega at a strictly interior point.
Vec grad_phi(const GeneratingFunction& gf, const Vec& y);

// Phi*(nu) via KKT reduction: Omega*(nu + G^T lambda*) -
// <lambda*, b> with lambda* from a damped Newton solve of
// G . grad Omega*(nu + G^T lambda) = b. Simplex-constrained entropies take a
// closed-form log-sum-exp path.
ConjugateResult conjugate(const GeneratingFunction& gf, const Vec& nu);

// Same as conjugate() but forcing the Newton path even when an analytic fast
// path exists. Exposed for cross-checking.
ConjugateResult conjugate_newton(const GeneratingFunction& gf, const Vec& nu);

// nu*_{Phi*} = grad Phi*(nu). Softmax for simplex-constrained entropies,
// identity for the unconstrained half squared norm.
Vec dual_map(const GeneratingFunction& gf, const Vec& nu);

// Fenchel-Young loss d_Phi(y, nu) = Phi(y) + Phi*(nu) - <y, nu>.
double fy_loss(const GeneratingFunction& gf, const Vec& y, const Vec& nu);

// Bregman divergence B_Phi(y, mu) = Phi(y) - Phi(mu) - <grad Phi(mu), y-mu>.
// mu must be strictly interior for entropy kinds.
double bregman(const GeneratingFunction& gf, const Vec& y, const Vec& mu);

// Bregman divergence with the 0 log 0 closure on both arguments: zero
// coordinates in mu are allowed where y is also zero; +inf where y puts mass
// that mu lacks. Used by the information-loss measures.
double bregman_closed(const GeneratingFunction& gf, const Vec& y, const Vec& mu);

// Cross-entropy offset identity: returns (lhs, rhs) with
// lhs = CE(q, softmax(logits)) - CE(q, q) and rhs = d_Phi(q, logits).
std::pair<double, double> ce_offset_check(const GeneratingFunction& gf,
                                          const Vec& q, const Vec& logits);

// Numerically stable softmax (max-shifted).
Vec softmax(const Vec& nu);

// Max-shifted log(sum(exp(nu))).
double log_sum_exp(const Vec& nu);

}  // namespace conjulab::convex

#endif  // CONJULAB_CONVEX_HPP_
