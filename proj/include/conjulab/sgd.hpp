#ifndef CONJULAB_SGD_HPP_
#define CONJULAB_SGD_HPP_

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "conjulab/net.hpp"

namespace conjulab::opt {

using Sample = std::pair<Vec, Vec>;  // (x, y)
using Dataset = std::vector<Sample>;

struct SgdConfig {
  double lr0 = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  Index batch_size = 1;
  Index epochs = 1;
  bool cosine_anneal = true;
  std::uint64_t seed = 0;
};

struct StepRecord {
  Index step = 0;
  std::vector<Index> batch_indices;
  double lr = 0.0;
  double batch_grad_norm_sq = 0.0;
  double grad_energy = 0.0;  // NaN when not evaluated this step
  double out_batch_risk_before = 0.0;  // NaN when the batch is the full set
  double out_batch_risk_after = 0.0;
};

// Gradient of the per-sample loss d_Phi(y, f_theta(x)) in theta.
Vec per_sample_grad(const net::NetSpec& spec, const net::ParamVector& params,
                    const convex::GeneratingFunction& gf, const Vec& x,
                    const Vec& y);

// Mean Fenchel-Young loss over the dataset (or a subset of indices).
double risk(const net::NetSpec& spec, const net::ParamVector& params,
            const convex::GeneratingFunction& gf, const Dataset& data);
double risk_subset(const net::NetSpec& spec, const net::ParamVector& params,
                   const convex::GeneratingFunction& gf, const Dataset& data,
                   const std::vector<Index>& indices);

// Mean squared per-sample gradient norm over the dataset.
double gradient_energy(const net::NetSpec& spec, const net::ParamVector& params,
                       const convex::GeneratingFunction& gf,
                       const Dataset& data);

struct SgdResult {
  net::ParamVector theta;
  std::vector<StepRecord> records;
};

// Heavy-ball SGD with coupled weight decay and optional cosine annealing.
// Shuffles epoch-wise (Fisher-Yates from cfg.seed, short last batch kept).
// grad_energy in the records is filled every log_every steps; on_log, when
// set, fires at the same cadence with the post-update parameters.
SgdResult sgd_run(
    const net::NetSpec& spec, const net::ParamVector& theta0,
    const convex::GeneratingFunction& gf, const Dataset& data,
    const SgdConfig& cfg, Index log_every,
    const std::function<void(Index step, const net::ParamVector&)>& on_log = {});

// M = max_k |R(theta_{k+1}, s \ s_k) - R(theta_k, s \ s_k)|.
double estimate_M(const std::vector<StepRecord>& records);

// Smoothness estimate: max over sampled (theta, z) pairs of the top Hessian
// eigenvalue via power iteration on finite-difference Hessian-vector products.
double estimate_L(const net::NetSpec& spec,
                  const std::vector<net::ParamVector>& thetas,
                  const convex::GeneratingFunction& gf, const Dataset& data,
                  int probes, std::uint64_t seed = 0);

}  // namespace conjulab::opt

#endif  // CONJULAB_SGD_HPP_
