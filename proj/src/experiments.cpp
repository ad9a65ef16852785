#include "conjulab/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "conjulab/rng.hpp"

namespace conjulab::experiments {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double safe_log2(double v) { return std::log2(std::max(v, 1e-300)); }

}  // namespace

convex::GeneratingFunction loss_gf(LossKind loss, Index classes) {
  return loss == LossKind::SoftmaxCE
             ? convex::GeneratingFunction::simplex_entropy(classes)
             : convex::GeneratingFunction::half_squared_norm(classes);
}

opt::Dataset make_gaussian_clusters(Index classes, Index dim, Index n,
                                    std::uint64_t seed) {
  if (classes < 2 || dim < 1 || n < 1) {
    throw RangeError("make_gaussian_clusters: bad shape");
  }
  SplitMix64 mean_rng = substream(seed, 0);
  std::vector<Vec> means(classes);
  for (Index c = 0; c < classes; ++c) {
    Vec m(dim);
    for (Index i = 0; i < dim; ++i) m[i] = mean_rng.next_gaussian();
    means[c] = 2.0 * m.normalized();
  }
  SplitMix64 noise_rng = substream(seed, 1);
  opt::Dataset data;
  data.reserve(n);
  for (Index i = 0; i < n; ++i) {
    Index c = i % classes;  // balanced classes
    Vec x = means[c];
    for (Index j = 0; j < dim; ++j) x[j] += 0.6 * noise_rng.next_gaussian();
    data.emplace_back(std::move(x), Vec(Vec::Unit(classes, c)));
  }
  return data;
}

std::vector<double> rolling_pearson(const std::vector<double>& a,
                                    const std::vector<double>& b,
                                    Index window) {
  if (a.size() != b.size()) {
    throw LengthMismatch("rolling_pearson: series lengths differ");
  }
  if (window < 2 || static_cast<std::size_t>(window) > a.size()) {
    throw RangeError("rolling_pearson: bad window");
  }
  std::vector<double> out(a.size(), kNaN);
  for (std::size_t t = window - 1; t < a.size(); ++t) {
    double ma = 0.0;
    double mb = 0.0;
    for (Index k = 0; k < window; ++k) {
      ma += a[t - k];
      mb += b[t - k];
    }
    ma /= window;
    mb /= window;
    double saa = 0.0;
    double sbb = 0.0;
    double sab = 0.0;
    bool finite = true;
    for (Index k = 0; k < window; ++k) {
      double da = a[t - k] - ma;
      double db = b[t - k] - mb;
      if (!std::isfinite(da) || !std::isfinite(db)) finite = false;
      saa += da * da;
      sbb += db * db;
      sab += da * db;
    }
    if (finite && saa >= 1e-18 && sbb >= 1e-18) {
      out[t] = sab / std::sqrt(saa * sbb);
    }
  }
  return out;
}

namespace {

opt::Dataset plan_dataset(const ExperimentPlan& plan) {
  if (plan.dataset == "gaussian") {
    return make_gaussian_clusters(plan.classes, plan.data_dim, plan.samples,
                                  plan.data_seed);
  }
  throw ValidationError("unknown dataset kind: " + plan.dataset);
}

}  // namespace

BoundTrackingResult run_bound_tracking(const ExperimentPlan& plan) {
  opt::Dataset data = plan_dataset(plan);
  const Index n = static_cast<Index>(data.size());
  const Index tracked = std::min(plan.tracked, n);
  convex::GeneratingFunction gf =
      loss_gf(plan.loss, data.front().second.size());
  net::NetSpec spec = plan.net;
  spec.input_dim = data.front().first.size();
  spec.output_dim = data.front().second.size();
  net::ParamVector theta0 = net::init(spec, plan.init_seed);

  BoundTrackingResult res;
  // Per tracked sample, series in logged-step order.
  std::vector<std::vector<double>> s_std(tracked), s_log2std(tracked),
      s_ub(tracked), s_lb(tracked), s_ge(tracked);
  std::vector<std::vector<TraceRow>> rows_per_step;

  auto on_log = [&](Index step, const net::ParamVector& theta) {
    res.logged_steps.push_back(step);
    double risk_acc = 0.0;
    double std_acc = 0.0;
    for (const auto& [x, y] : data) {
      Vec f = net::forward(spec, theta, x);
      risk_acc += convex::fy_loss(gf, y, f);
      std_acc += (y - convex::dual_map(gf, f)).squaredNorm();
    }
    res.risk_series.push_back(risk_acc / n);
    res.std_risk_series.push_back(std_acc / n);

    std::vector<TraceRow> step_rows;
    for (Index s = 0; s < tracked; ++s) {
      const auto& [x, y] = data[s];
      Vec f = net::forward(spec, theta, x);
      Vec dual = convex::dual_map(gf, f);
      TraceRow row;
      row.step = step;
      row.sample = s;
      row.loss = convex::fy_loss(gf, y, f);
      row.std_risk = (y - dual).squaredNorm();
      row.grad_norm_sq = net::loss_grad(spec, theta, gf, x, y).squaredNorm();
      net::StructureSpectrum sp = net::structure_spectrum(spec, theta, x);
      row.log2_lambda_min = safe_log2(sp.lambda_min);
      row.log2_lambda_max = safe_log2(sp.lambda_max);
      bounds::UbLbRow sandwich = bounds::ub_lb_row(
          row.grad_norm_sq, sp.lambda_min, sp.lambda_max, row.std_risk);
      row.sandwich_defined = sandwich.defined;
      row.ub = sandwich.defined ? sandwich.ub : kNaN;
      row.lb = sandwich.defined ? sandwich.lb : kNaN;
      row.log2_std_risk = sandwich.defined ? sandwich.log2_std_risk
                                           : safe_log2(row.std_risk);
      s_std[s].push_back(row.std_risk);
      s_log2std[s].push_back(row.log2_std_risk);
      s_ub[s].push_back(row.ub);
      s_lb[s].push_back(row.lb);
      s_ge[s].push_back(row.grad_norm_sq);
      step_rows.push_back(row);
    }
    rows_per_step.push_back(std::move(step_rows));
  };

  opt::SgdResult sgd = opt::sgd_run(spec, theta0, gf, data, plan.sgd,
                                    plan.log_every, on_log);
  res.theta_final = sgd.theta;

  const Index w = plan.pearson_window;
  const std::size_t t_count = res.logged_steps.size();
  res.pearson_risk_std =
      t_count >= static_cast<std::size_t>(w)
          ? rolling_pearson(res.risk_series, res.std_risk_series, w)
          : std::vector<double>(t_count, kNaN);
  std::vector<std::vector<double>> p_ub(tracked), p_lb(tracked), p_ge(tracked);
  for (Index s = 0; s < tracked; ++s) {
    if (t_count >= static_cast<std::size_t>(w)) {
      p_ub[s] = rolling_pearson(s_log2std[s], s_ub[s], w);
      p_lb[s] = rolling_pearson(s_log2std[s], s_lb[s], w);
      p_ge[s] = rolling_pearson(s_std[s], s_ge[s], w);
    } else {
      p_ub[s] = p_lb[s] = p_ge[s] = std::vector<double>(t_count, kNaN);
    }
  }
  for (std::size_t t = 0; t < t_count; ++t) {
    for (Index s = 0; s < tracked; ++s) {
      TraceRow row = rows_per_step[t][s];
      row.pearson_std_ub = p_ub[s][t];
      row.pearson_std_lb = p_lb[s][t];
      row.pearson_std_ge = p_ge[s][t];
      row.pearson_risk_std = res.pearson_risk_std[t];
      res.rows.push_back(row);
    }
  }
  return res;
}

std::vector<SweepRow> run_spectrum_sweep(const ExperimentPlan& plan) {
  if (plan.sweeps.empty()) {
    throw ValidationError("run_spectrum_sweep: plan has no sweeps");
  }
  SweepSpec sw = plan.sweeps;
  if (sw.depths.empty()) sw.depths = {plan.net.depth_blocks};
  if (sw.widths.empty()) sw.widths = {plan.net.width};
  if (sw.skips.empty()) sw.skips = {plan.net.skip ? 1 : 0};
  if (sw.seeds.empty()) sw.seeds = {plan.init_seed};

  // Fixed probe batch, independent of the sweep cell.
  constexpr Index kProbes = 8;
  SplitMix64 probe_rng = substream(plan.data_seed, 0xBEEF);
  std::vector<Vec> probes(kProbes);
  for (Index i = 0; i < kProbes; ++i) {
    Vec x(plan.net.input_dim);
    for (Index j = 0; j < plan.net.input_dim; ++j) {
      x[j] = probe_rng.next_gaussian();
    }
    probes[i] = x;
  }

  std::vector<SweepRow> table;
  for (Index depth : sw.depths) {
    for (Index width : sw.widths) {
      for (int skip : sw.skips) {
        for (std::uint64_t seed : sw.seeds) {
          net::NetSpec spec = plan.net;
          spec.depth_blocks = depth;
          spec.width = width;
          spec.skip = skip != 0;
          net::ParamVector theta = net::init(spec, seed);
          SweepRow row;
          row.depth = depth;
          row.width = width;
          row.skip = skip;
          row.seed = seed;
          double lmin = 0.0, lmax = 0.0, frob = 0.0, diag = 0.0;
          for (const Vec& x : probes) {
            net::StructureSpectrum s = net::structure_spectrum(spec, theta, x);
            lmin += safe_log2(s.lambda_min);
            lmax += safe_log2(s.lambda_max);
            frob += safe_log2(s.frob_norm);
            diag += safe_log2(s.diag_norm);
          }
          row.log2_lambda_min = lmin / kProbes;
          row.log2_lambda_max = lmax / kProbes;
          row.log2_frob = frob / kProbes;
          row.log2_diag_norm = diag / kProbes;
          row.gap = row.log2_lambda_max - row.log2_lambda_min;
          table.push_back(row);
        }
      }
    }
  }
  return table;
}

}  // namespace conjulab::experiments
