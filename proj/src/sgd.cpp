#include "conjulab/sgd.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "conjulab/rng.hpp"

namespace conjulab::opt {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void fisher_yates(std::vector<Index>& v, SplitMix64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = rng.next_below(i);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace

Vec per_sample_grad(const net::NetSpec& spec, const net::ParamVector& params,
                    const convex::GeneratingFunction& gf, const Vec& x,
                    const Vec& y) {
  return net::loss_grad(spec, params, gf, x, y);
}

double risk(const net::NetSpec& spec, const net::ParamVector& params,
            const convex::GeneratingFunction& gf, const Dataset& data) {
  if (data.empty()) throw EmptyDataset("risk: empty dataset");
  double s = 0.0;
  for (const auto& [x, y] : data) {
    s += convex::fy_loss(gf, y, net::forward(spec, params, x));
  }
  return s / static_cast<double>(data.size());
}

double risk_subset(const net::NetSpec& spec, const net::ParamVector& params,
                   const convex::GeneratingFunction& gf, const Dataset& data,
                   const std::vector<Index>& indices) {
  if (indices.empty()) throw EmptyDataset("risk_subset: empty index set");
  double s = 0.0;
  for (Index i : indices) {
    s += convex::fy_loss(gf, data[i].second,
                         net::forward(spec, params, data[i].first));
  }
  return s / static_cast<double>(indices.size());
}

double gradient_energy(const net::NetSpec& spec, const net::ParamVector& params,
                       const convex::GeneratingFunction& gf,
                       const Dataset& data) {
  if (data.empty()) throw EmptyDataset("gradient_energy: empty dataset");
  double s = 0.0;
  for (const auto& [x, y] : data) {
    s += per_sample_grad(spec, params, gf, x, y).squaredNorm();
  }
  return s / static_cast<double>(data.size());
}

SgdResult sgd_run(
    const net::NetSpec& spec, const net::ParamVector& theta0,
    const convex::GeneratingFunction& gf, const Dataset& data,
    const SgdConfig& cfg, Index log_every,
    const std::function<void(Index step, const net::ParamVector&)>& on_log) {
  const Index n = static_cast<Index>(data.size());
  if (n == 0) throw EmptyDataset("sgd_run: empty dataset");
  if (cfg.batch_size < 1 || cfg.batch_size > n) {
    throw RangeError("sgd_run: batch_size must be in [1, n]");
  }
  if (log_every < 1) throw RangeError("sgd_run: log_every must be >= 1");

  const Index steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const Index total_steps = steps_per_epoch * cfg.epochs;

  SgdResult res;
  res.theta = theta0;
  res.records.reserve(total_steps);
  Vec velocity = Vec::Zero(theta0.theta.size());
  SplitMix64 shuffle_rng(cfg.seed);

  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), 0);

  Index step = 0;
  for (Index epoch = 0; epoch < cfg.epochs; ++epoch) {
    fisher_yates(order, shuffle_rng);
    for (Index start = 0; start < n; start += cfg.batch_size, ++step) {
      const Index stop = std::min(start + cfg.batch_size, n);
      StepRecord rec;
      rec.step = step;
      rec.batch_indices.assign(order.begin() + start, order.begin() + stop);
      std::vector<Index> out_batch;
      out_batch.reserve(n - (stop - start));
      std::vector<bool> in_batch(n, false);
      for (Index i : rec.batch_indices) in_batch[i] = true;
      for (Index i = 0; i < n; ++i) {
        if (!in_batch[i]) out_batch.push_back(i);
      }

      double alpha = cfg.cosine_anneal
                         ? cfg.lr0 * 0.5 *
                               (1.0 + std::cos(M_PI * static_cast<double>(step) /
                                               static_cast<double>(total_steps)))
                         : cfg.lr0;
      rec.lr = alpha;

      Vec grad = Vec::Zero(res.theta.theta.size());
      for (Index i : rec.batch_indices) {
        grad += per_sample_grad(spec, res.theta, gf, data[i].first,
                                data[i].second);
      }
      grad /= static_cast<double>(rec.batch_indices.size());
      rec.batch_grad_norm_sq = grad.squaredNorm();
      if (!std::isfinite(rec.batch_grad_norm_sq)) {
        throw NonFiniteLoss("sgd_run: non-finite gradient at step " +
                            std::to_string(step));
      }
      if (cfg.weight_decay != 0.0) grad += cfg.weight_decay * res.theta.theta;

      rec.out_batch_risk_before =
          out_batch.empty() ? kNaN
                            : risk_subset(spec, res.theta, gf, data, out_batch);

      velocity = cfg.momentum * velocity + grad;
      res.theta.theta -= alpha * velocity;

      rec.out_batch_risk_after =
          out_batch.empty() ? kNaN
                            : risk_subset(spec, res.theta, gf, data, out_batch);
      if (!out_batch.empty() && !std::isfinite(rec.out_batch_risk_after)) {
        throw NonFiniteLoss("sgd_run: non-finite loss at step " +
                            std::to_string(step));
      }

      const bool log_now = step % log_every == 0 || step == total_steps - 1;
      rec.grad_energy =
          log_now ? gradient_energy(spec, res.theta, gf, data) : kNaN;
      res.records.push_back(std::move(rec));
      if (log_now && on_log) on_log(step, res.theta);
    }
  }
  return res;
}

double estimate_M(const std::vector<StepRecord>& records) {
  double m = -1.0;
  for (const auto& rec : records) {
    if (std::isnan(rec.out_batch_risk_before)) continue;
    m = std::max(m, std::abs(rec.out_batch_risk_after - rec.out_batch_risk_before));
  }
  if (m < 0.0) throw NoOutBatch("estimate_M: no record with an out-batch");
  return m;
}

double estimate_L(const net::NetSpec& spec,
                  const std::vector<net::ParamVector>& thetas,
                  const convex::GeneratingFunction& gf, const Dataset& data,
                  int probes, std::uint64_t seed) {
  if (thetas.empty() || data.empty()) {
    throw EmptyDataset("estimate_L: needs thetas and data");
  }
  if (probes < 1) throw RangeError("estimate_L: probes >= 1");
  constexpr double kStep = 1e-4;
  SplitMix64 rng = substream(seed, 0xE57);
  double best = 0.0;
  for (int p = 0; p < probes; ++p) {
    const auto& theta = thetas[rng.next_below(thetas.size())];
    const auto& [x, y] = data[rng.next_below(data.size())];
    const Index m = theta.theta.size();
    Vec v(m);
    for (Index i = 0; i < m; ++i) v[i] = rng.next_gaussian();
    v.normalize();
    net::ParamVector probe = theta;
    double lam = 0.0;
    double prev = 0.0;
    for (int it = 0; it < 50; ++it) {
      probe.theta = theta.theta + kStep * v;
      Vec gp = per_sample_grad(spec, probe, gf, x, y);
      probe.theta = theta.theta - kStep * v;
      Vec gm = per_sample_grad(spec, probe, gf, x, y);
      Vec hv = (gp - gm) / (2.0 * kStep);
      lam = v.dot(hv);
      double norm = hv.norm();
      if (norm == 0.0) break;
      v = hv / norm;
      if (it > 0 && std::abs(lam - prev) <= 1e-6 * std::abs(lam)) break;
      prev = lam;
    }
    best = std::max(best, std::abs(lam));
  }
  return best;
}

}  // namespace conjulab::opt
