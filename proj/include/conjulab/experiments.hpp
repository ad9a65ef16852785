#ifndef CONJULAB_EXPERIMENTS_HPP_
#define CONJULAB_EXPERIMENTS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "conjulab/bounds.hpp"
#include "conjulab/sgd.hpp"

namespace conjulab::experiments {

enum class LossKind { SoftmaxCE, MSE };

struct SweepSpec {
  std::vector<Index> depths;
  std::vector<Index> widths;
  std::vector<int> skips;  // 0 / 1
  std::vector<std::uint64_t> seeds;

  bool empty() const {
    return depths.empty() && widths.empty() && skips.empty() && seeds.empty();
  }
};

struct ExperimentPlan {
  std::string name = "run";
  // Dataset: synthetic Gaussian clusters ("gaussian") or IDX files ("idx").
  std::string dataset = "gaussian";
  Index classes = 2;
  Index data_dim = 2;
  Index samples = 16;
  std::uint64_t data_seed = 1;
  std::string idx_images;
  std::string idx_labels;

  net::NetSpec net;
  std::uint64_t init_seed = 7;
  LossKind loss = LossKind::SoftmaxCE;
  opt::SgdConfig sgd;
  SweepSpec sweeps;
  Index pearson_window = 4;
  Index log_every = 1;
  Index tracked = 4;
};

// Generating function matching the plan's loss on `classes` outputs.
convex::GeneratingFunction loss_gf(LossKind loss, Index classes);

// Balanced k-class Gaussian-cluster dataset with one-hot targets.
opt::Dataset make_gaussian_clusters(Index classes, Index dim, Index n,
                                    std::uint64_t seed);

// Trailing-window Pearson correlation; NaN before the window fills or when
// either window is (numerically) constant.
std::vector<double> rolling_pearson(const std::vector<double>& a,
                                    const std::vector<double>& b,
                                    Index window);

struct TraceRow {
  Index step = 0;
  Index sample = 0;
  double loss = 0.0;
  double std_risk = 0.0;      // per-sample ||y - dual||^2
  double grad_norm_sq = 0.0;  // per-sample gradient energy
  double log2_lambda_min = 0.0;
  double log2_lambda_max = 0.0;
  double ub = 0.0;
  double lb = 0.0;
  double log2_std_risk = 0.0;
  bool sandwich_defined = false;
  // Rolling Pearson columns (NaN sentinels).
  double pearson_std_ub = 0.0;
  double pearson_std_lb = 0.0;
  double pearson_std_ge = 0.0;
  double pearson_risk_std = 0.0;  // dataset-level, repeated per sample
};

struct BoundTrackingResult {
  std::vector<TraceRow> rows;
  std::vector<Index> logged_steps;
  std::vector<double> risk_series;      // dataset risk per logged step
  std::vector<double> std_risk_series;  // dataset standardized risk
  std::vector<double> pearson_risk_std;
  net::ParamVector theta_final;
};

// Mini-dataset bound-tracking run: trains per the plan, logging per-sample
// sandwich rows for the first min(tracked, n) samples at log cadence.
BoundTrackingResult run_bound_tracking(const ExperimentPlan& plan);

struct SweepRow {
  Index depth = 0;
  Index width = 0;
  int skip = 0;
  std::uint64_t seed = 0;
  double log2_lambda_min = 0.0;
  double log2_lambda_max = 0.0;
  double log2_frob = 0.0;
  double log2_diag_norm = 0.0;
  double gap = 0.0;
};

// Initialization-time spectra over the plan's sweep grid on a fixed probe
// batch (no training).
std::vector<SweepRow> run_spectrum_sweep(const ExperimentPlan& plan);

}  // namespace conjulab::experiments

#endif  // CONJULAB_EXPERIMENTS_HPP_
