#ifndef CONJULAB_BOUNDS_HPP_
#define CONJULAB_BOUNDS_HPP_

#include <functional>
#include <utility>
#include <vector>

#include "conjulab/info.hpp"
#include "conjulab/sgd.hpp"

namespace conjulab::bounds {

// Floor applied to predicted probabilities before 1/p quantities. Loosens
// bounds only; never manufactures a pass.
inline constexpr double kProbClamp = 1e-12;
// Below this, lambda_min_s is treated as zero and sandwich upper bounds are
// reported as unavailable rather than divided through.
inline constexpr double kSpectrumFloor = 1e-12;

struct RiskReport {
  double risk = 0.0;
  double std_risk = 0.0;     // mean ||y - dual(f(x))||^2
  double grad_energy = 0.0;  // mean ||grad_theta d_Phi||^2
  double lambda_min_s = 0.0;
  double lambda_max_s = 0.0;
  double h_min = 0.0;  // extremal curvature of Phi over observed predictions
  double h_max = 0.0;
  double gamma = 0.0;  // worst-case per-sample loss
  double p_min = 0.0;  // min predicted probability (NaN for quadratic Phi)
  bool degenerate = false;  // lambda_min_s below the spectrum floor
};

RiskReport risk_report(const net::NetSpec& spec, const net::ParamVector& params,
                       const convex::GeneratingFunction& gf,
                       const opt::Dataset& data);

// Dataset-level risk sandwiches. Throw DegenerateSpectrum when the report is
// flagged degenerate.
std::pair<double, double> mse_sandwich(const RiskReport& report);
std::pair<double, double> ce_sandwich(const RiskReport& report);

// Per-sample log2 sandwich on standardized risk.
struct UbLbRow {
  double ub = 0.0;
  double lb = 0.0;
  double log2_std_risk = 0.0;
  bool defined = false;  // false on degenerate per-sample spectra
};
UbLbRow ub_lb_row(double grad_norm_sq, double lambda_min_x,
                  double lambda_max_x, double std_risk);

// Achievable-risk bounds: (std bound, risk bound) =
// (4 L (n-1) M / lambda_min_s, same * h_max).
std::pair<double, double> achievable_risk_bound(double l_hat, double m_hat,
                                                Index n, double lambda_min_s,
                                                double h_max);

// Condition-number bound zeta(m, k) + 1 with
// zeta = 2|y| sqrt(6 log k)/sqrt(m-1) * (1 - 2 log k / m)^2.
double condition_bound(long m, long k, double y_norm_bound,
                       double log_base = 2.718281828459045235);

// Hessian-bridge check at a fitted point: cond_mean is E[Y|x], which must
// match dual_map(f(x)) to 1e-6 (else NotConverged). h_top is the top
// eigenvalue of the expected per-sample loss Hessian; [lo, hi] the analytic
// G_x/A_x envelope.
struct BridgeCheck {
  double h_top = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};
BridgeCheck hessian_bridge_check(const net::NetSpec& spec,
                                 const net::ParamVector& params,
                                 const convex::GeneratingFunction& gf,
                                 const Vec& x, const Vec& cond_mean);

// Deterministic generalization bound (two branches).
using ModelEval = std::function<Vec(const info::FeatureKey&)>;
struct DetGenResult {
  double gen = 0.0;          // |R(test) - R(train)|
  double bound_case1 = 0.0;  // train-side terms; applies when test >= train
  double bound_case2 = 0.0;  // test-side terms; applies otherwise
  int which_case = 1;
  double gamma = 0.0;
};
DetGenResult det_gen_bound(const convex::GeneratingFunction& gf,
                           const ModelEval& model,
                           const info::DiscreteJoint& train_joint,
                           const info::DiscreteJoint& test_joint);

// Probabilistic bound ((|X|-L) |Y| gamma^2 (1-||q||^2)) / (4 n eps^2),
// capped at 1.
double prob_gen_bound(long x_card, long y_card, long abs_loss, double gamma,
                      double q_norm_sq, long n, double eps);

// Mean gamma_Phi over parameter spheres of the given radii (simplex-entropy
// classification only; the zero net must output zero on every probe input).
std::vector<std::pair<double, double>> regularization_gamma_curve(
    const net::NetSpec& spec, const convex::GeneratingFunction& gf,
    const std::vector<Vec>& xs, const std::vector<double>& radii, int seeds);

// Group key for a model output: each coordinate rounded to 6 decimal digits.
// Shared by absolute/relative information loss of real-valued networks.
std::string quantize_output(const Vec& out);

}  // namespace conjulab::bounds

#endif  // CONJULAB_BOUNDS_HPP_
