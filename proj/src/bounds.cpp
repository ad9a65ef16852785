#include "conjulab/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "conjulab/jacobi.hpp"
#include "conjulab/rng.hpp"

namespace conjulab::bounds {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_simplex_entropy(const convex::GeneratingFunction& gf) {
  return gf.is_entropy_kind() && gf.has_simplex_constraint();
}

double clamp_prob(double p) { return std::max(p, kProbClamp); }

}  // namespace

std::string quantize_output(const Vec& out) {
  std::string key;
  key.reserve(out.size() * 12);
  for (Index i = 0; i < out.size(); ++i) {
    long long micro = std::llround(out[i] * 1e6);
    if (micro == 0) micro = 0;  // collapse -0
    key += std::to_string(micro);
    key += ',';
  }
  return key;
}

RiskReport risk_report(const net::NetSpec& spec, const net::ParamVector& params,
                       const convex::GeneratingFunction& gf,
                       const opt::Dataset& data) {
  if (data.empty()) throw EmptyDataset("risk_report: empty dataset");
  RiskReport r;
  r.lambda_min_s = kInf;
  r.lambda_max_s = 0.0;
  double p_lo = 1.0;
  double p_hi = 0.0;
  double max_loss = 0.0;
  const bool classification = is_simplex_entropy(gf);
  for (const auto& [x, y] : data) {
    Vec f = net::forward(spec, params, x);
    Vec dual = convex::dual_map(gf, f);
    double loss = convex::fy_loss(gf, y, f);
    r.risk += loss;
    max_loss = std::max(max_loss, loss);
    r.std_risk += (y - dual).squaredNorm();
    r.grad_energy += net::loss_grad(spec, params, gf, x, y).squaredNorm();
    net::StructureSpectrum s = net::structure_spectrum(spec, params, x);
    r.lambda_min_s = std::min(r.lambda_min_s, s.lambda_min);
    r.lambda_max_s = std::max(r.lambda_max_s, s.lambda_max);
    if (classification) {
      p_lo = std::min(p_lo, dual.minCoeff());
      p_hi = std::max(p_hi, dual.maxCoeff());
    }
  }
  const double n = static_cast<double>(data.size());
  r.risk /= n;
  r.std_risk /= n;
  r.grad_energy /= n;
  if (classification) {
    r.p_min = clamp_prob(p_lo);
    r.h_min = 1.0 / p_hi;
    r.h_max = 1.0 / r.p_min;
    r.gamma = std::log(1.0 / r.p_min);
  } else {
    r.p_min = kNaN;
    r.h_min = 1.0;
    r.h_max = 1.0;
    r.gamma = max_loss;
  }
  r.degenerate = r.lambda_min_s <= kSpectrumFloor;
  return r;
}

std::pair<double, double> mse_sandwich(const RiskReport& report) {
  if (report.degenerate) {
    throw DegenerateSpectrum("mse_sandwich: lambda_min_s ~ 0");
  }
  return {report.grad_energy / (2.0 * report.lambda_max_s),
          report.grad_energy / (2.0 * report.lambda_min_s)};
}

std::pair<double, double> ce_sandwich(const RiskReport& report) {
  if (report.degenerate) {
    throw DegenerateSpectrum("ce_sandwich: lambda_min_s ~ 0");
  }
  return {report.grad_energy / (2.0 * std::log(2.0) * report.lambda_max_s),
          report.grad_energy / (report.p_min * report.lambda_min_s)};
}

UbLbRow ub_lb_row(double grad_norm_sq, double lambda_min_x,
                  double lambda_max_x, double std_risk) {
  UbLbRow row;
  if (lambda_min_x <= kSpectrumFloor || lambda_max_x <= 0.0 ||
      grad_norm_sq <= 0.0 || std_risk <= 0.0) {
    return row;
  }
  row.ub = std::log2(grad_norm_sq) - std::log2(lambda_min_x);
  row.lb = std::log2(grad_norm_sq) - std::log2(lambda_max_x);
  row.log2_std_risk = std::log2(std_risk);
  row.defined = true;
  return row;
}

std::pair<double, double> achievable_risk_bound(double l_hat, double m_hat,
                                                Index n, double lambda_min_s,
                                                double h_max) {
  if (lambda_min_s <= kSpectrumFloor) {
    throw DegenerateSpectrum("achievable_risk_bound: lambda_min_s ~ 0");
  }
  double std_bound =
      4.0 * l_hat * static_cast<double>(n - 1) * m_hat / lambda_min_s;
  return {std_bound, std_bound * h_max};
}

double condition_bound(long m, long k, double y_norm_bound, double log_base) {
  if (k < 2 || m < k + 1) {
    throw RangeError("condition_bound: need k >= 2 and m >= k+1");
  }
  if (y_norm_bound < 0.0 || log_base <= 1.0) {
    throw RangeError("condition_bound: bad y bound or log base");
  }
  double logk = std::log(static_cast<double>(k)) / std::log(log_base);
  double md = static_cast<double>(m);
  double zeta = 2.0 * y_norm_bound * std::sqrt(6.0 * logk) / std::sqrt(md - 1.0);
  double shrink = 1.0 - 2.0 * logk / md;
  return 1.0 + zeta * shrink * shrink;
}

BridgeCheck hessian_bridge_check(const net::NetSpec& spec,
                                 const net::ParamVector& params,
                                 const convex::GeneratingFunction& gf,
                                 const Vec& x, const Vec& cond_mean) {
  Vec f = net::forward(spec, params, x);
  Vec dual = convex::dual_map(gf, f);
  if ((dual - cond_mean).cwiseAbs().maxCoeff() > 1e-6) {
    throw NotConverged("hessian_bridge_check: dual output != conditional mean");
  }
  // The loss gradient is linear in y, so the Y|x-expected Hessian is the loss
  // Hessian at y = E[Y|x].
  Mat h = net::loss_hessian(spec, params, gf, x, cond_mean);
  Vec h_ev = jacobi_eigenvalues(h);
  Mat j = net::jacobian(spec, params, x);
  Vec a_ev = jacobi_eigenvalues(Mat(j * j.transpose()));
  double a_max = std::max(0.0, a_ev[a_ev.size() - 1]);

  double g_min = 1.0;
  double g_max = 1.0;
  if (is_simplex_entropy(gf)) {
    // Hessian of the log-sum-exp conjugate: diag(p) - p p^T.
    Mat g = Mat(dual.asDiagonal()) - dual * dual.transpose();
    Vec g_ev = jacobi_eigenvalues(g);
    g_min = std::max(0.0, g_ev[0]);
    g_max = g_ev[g_ev.size() - 1];
  }
  return {h_ev[h_ev.size() - 1], g_min * a_max, g_max * a_max};
}

namespace {

double joint_risk(const convex::GeneratingFunction& gf,
                  const info::DiscreteJoint& joint,
                  const std::map<info::FeatureKey, Vec>& outputs) {
  double r = 0.0;
  for (Index i = 0; i < joint.x_card(); ++i) {
    const Vec& f = outputs.at(joint.x_support[i]);
    for (Index j = 0; j < joint.y_card(); ++j) {
      if (joint.prob(i, j) > 0.0) {
        r += joint.prob(i, j) * convex::fy_loss(gf, joint.y_support[j], f);
      }
    }
  }
  return r;
}

}  // namespace

DetGenResult det_gen_bound(const convex::GeneratingFunction& gf,
                           const ModelEval& model,
                           const info::DiscreteJoint& train_joint,
                           const info::DiscreteJoint& test_joint) {
  if (train_joint.y_dim() != test_joint.y_dim()) {
    throw ShapeError("det_gen_bound: joints disagree on y dimension");
  }
  std::map<info::FeatureKey, Vec> outputs;
  for (const auto& k : train_joint.x_support) outputs.emplace(k, model(k));
  for (const auto& k : test_joint.x_support) {
    if (!outputs.count(k)) outputs.emplace(k, model(k));
  }

  DetGenResult res;
  double r_train = joint_risk(gf, train_joint, outputs);
  double r_test = joint_risk(gf, test_joint, outputs);
  res.gen = std::abs(r_test - r_train);
  res.which_case = r_test >= r_train ? 1 : 2;

  // Worst-case per-sample loss over both supports.
  if (is_simplex_entropy(gf)) {
    double p_lo = 1.0;
    for (const auto& [key, f] : outputs) {
      p_lo = std::min(p_lo, convex::dual_map(gf, f).minCoeff());
    }
    res.gamma = std::log(1.0 / clamp_prob(p_lo));
  } else {
    double worst = 0.0;
    for (const info::DiscreteJoint* joint : {&train_joint, &test_joint}) {
      for (Index i = 0; i < joint->x_card(); ++i) {
        for (Index j = 0; j < joint->y_card(); ++j) {
          if (joint->prob(i, j) > 0.0) {
            worst = std::max(worst,
                             convex::fy_loss(gf, joint->y_support[j],
                                             outputs.at(joint->x_support[i])));
          }
        }
      }
    }
    res.gamma = worst;
  }

  auto branch_bound = [&](const info::DiscreteJoint& joint) {
    std::map<info::FeatureKey, std::string> grouping;
    for (const auto& k : joint.x_support) {
      grouping[k] = quantize_output(outputs.at(k));
    }
    double ent = info::gen_cond_entropy(gf, joint);
    double rel = info::relative_info_loss(gf, joint, grouping);
    return res.gamma - ent - rel;
  };
  // When the test risk dominates, the train risk is the one lower-bounded by
  // its entropy and grouping-loss terms, and vice versa.
  res.bound_case1 = branch_bound(train_joint);
  res.bound_case2 = branch_bound(test_joint);
  return res;
}

double prob_gen_bound(long x_card, long y_card, long abs_loss, double gamma,
                      double q_norm_sq, long n, double eps) {
  if (eps <= 0.0 || n < 1 || x_card < 1 || y_card < 1) {
    throw RangeError("prob_gen_bound: bad cardinalities, n, or eps");
  }
  if (abs_loss < 0 || abs_loss >= x_card) {
    throw RangeError("prob_gen_bound: need 0 <= abs_loss < x_card");
  }
  if (q_norm_sq < 0.0 || q_norm_sq > 1.0) {
    throw RangeError("prob_gen_bound: q_norm_sq outside [0, 1]");
  }
  double bound = static_cast<double>(x_card - abs_loss) *
                 static_cast<double>(y_card) * gamma * gamma *
                 (1.0 - q_norm_sq) /
                 (4.0 * static_cast<double>(n) * eps * eps);
  return std::min(bound, 1.0);
}

std::vector<std::pair<double, double>> regularization_gamma_curve(
    const net::NetSpec& spec, const convex::GeneratingFunction& gf,
    const std::vector<Vec>& xs, const std::vector<double>& radii, int seeds) {
  if (!is_simplex_entropy(gf)) {
    throw ValidationError("regularization_gamma_curve: needs simplex entropy");
  }
  if (xs.empty() || radii.empty() || seeds < 1) {
    throw RangeError("regularization_gamma_curve: empty inputs");
  }
  net::ParamVector zero = net::zeros(spec);
  for (const Vec& x : xs) {
    if (net::forward(spec, zero, x).cwiseAbs().maxCoeff() != 0.0) {
      throw ZeroOutputViolation("regularization_gamma_curve: f_0(x) != 0");
    }
  }
  const Index m = zero.theta.size();
  std::vector<std::pair<double, double>> curve;
  curve.reserve(radii.size());
  for (std::size_t ri = 0; ri < radii.size(); ++ri) {
    double acc = 0.0;
    for (int s = 0; s < seeds; ++s) {
      SplitMix64 rng = substream(static_cast<std::uint64_t>(s), ri);
      Vec dir(m);
      for (Index i = 0; i < m; ++i) dir[i] = rng.next_gaussian();
      dir.normalize();
      net::ParamVector theta = zero;
      theta.theta = radii[ri] * dir;
      double p_lo = 1.0;
      for (const Vec& x : xs) {
        Vec p = convex::dual_map(gf, net::forward(spec, theta, x));
        p_lo = std::min(p_lo, p.minCoeff());
      }
      acc += std::log(1.0 / clamp_prob(p_lo));
    }
    curve.emplace_back(radii[ri], acc / seeds);
  }
  return curve;
}

}  // namespace conjulab::bounds
