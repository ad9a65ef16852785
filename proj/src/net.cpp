#include "conjulab/net.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "conjulab/jacobi.hpp"
#include "conjulab/rng.hpp"

namespace conjulab::net {

namespace {

constexpr double kLayerNormEps = 1e-5;
constexpr double kHessStep = 1e-4;
constexpr char kMagic[8] = {'C', 'J', 'L', 'B', 'N', 'E', 'T', '1'};

struct LinearShape {
  Index rows;
  Index cols;
};

// Shapes of the linear layers in order: embed, blocks, head.
std::vector<LinearShape> linear_shapes(const NetSpec& spec) {
  std::vector<LinearShape> shapes;
  if (spec.linear_mode()) {
    if (spec.depth_blocks != 0) {
      throw ShapeError("linear mode (width 0) requires depth_blocks 0");
    }
    shapes.push_back({spec.output_dim, spec.input_dim});
    return shapes;
  }
  shapes.push_back({spec.width, spec.input_dim});
  for (Index i = 0; i < spec.depth_blocks; ++i) {
    shapes.push_back({spec.width, spec.width});
  }
  shapes.push_back({spec.output_dim, spec.width});
  return shapes;
}

std::vector<Segment> make_layout(const NetSpec& spec) {
  std::vector<Segment> layout;
  Index off = 0;
  Index li = 0;
  for (const auto& sh : linear_shapes(spec)) {
    std::string base = spec.linear_mode() ? "linear"
                       : li == 0           ? "embed"
                       : li == spec.num_linear() - 1
                           ? "head"
                           : "block" + std::to_string(li - 1);
    layout.push_back({base + ".W", sh.rows, sh.cols, off});
    off += sh.rows * sh.cols;
    layout.push_back({base + ".b", sh.rows, 1, off});
    off += sh.rows;
    ++li;
  }
  return layout;
}

// Column-major weight matrix view of linear layer `li` inside theta.
Eigen::Map<const Mat> weight_of(const ParamVector& p, Index li) {
  const Segment& s = p.layout[2 * li];
  return {p.theta.data() + s.offset, s.rows, s.cols};
}

Eigen::Map<const Vec> bias_of(const ParamVector& p, Index li) {
  const Segment& s = p.layout[2 * li + 1];
  return {p.theta.data() + s.offset, s.rows};
}

Vec act_forward(Activation act, const Vec& z) {
  switch (act) {
    case Activation::ReLU:
      return z.cwiseMax(0.0);
    case Activation::Tanh:
      return z.array().tanh();
    case Activation::Identity:
      return z;
  }
  return z;
}

// Elementwise derivative at z; ReLU'(0) := 0.
Vec act_deriv(Activation act, const Vec& z) {
  switch (act) {
    case Activation::ReLU:
      return (z.array() > 0.0).cast<double>();
    case Activation::Tanh:
      return 1.0 - z.array().tanh().square();
    case Activation::Identity:
      return Vec::Ones(z.size());
  }
  return Vec::Ones(z.size());
}

struct BlockTape {
  Vec lin_in;   // block input h
  Vec pre;      // W h + b
  Vec post_act;
  Vec post_norm;
};

struct Tape {
  Vec x;
  Vec embed_out;
  std::vector<BlockTape> blocks;
  Vec head_in;
  Vec output;
};

Vec layer_norm_fwd(const Vec& a) {
  const double n = static_cast<double>(a.size());
  double m = a.mean();
  Vec c = a.array() - m;
  double v = c.squaredNorm() / n;
  return c / std::sqrt(v + kLayerNormEps);
}

// Vector-Jacobian product of layer_norm_fwd at input a with upstream g.
Vec layer_norm_vjp(const Vec& a, const Vec& g) {
  const double n = static_cast<double>(a.size());
  double m = a.mean();
  Vec c = a.array() - m;
  double v = c.squaredNorm() / n;
  double s = std::sqrt(v + kLayerNormEps);
  Vec y = c / s;
  return (g.array() - g.mean() - y.array() * (g.dot(y) / n)) / s;
}

Tape forward_tape(const NetSpec& spec, const ParamVector& p, const Vec& x) {
  if (x.size() != spec.input_dim) throw ShapeError("forward: input size mismatch");
  Tape t;
  t.x = x;
  if (spec.linear_mode()) {
    t.head_in = x;
    t.output = weight_of(p, 0) * x + bias_of(p, 0);
    return t;
  }
  Vec h = weight_of(p, 0) * x + bias_of(p, 0);
  t.embed_out = h;
  t.blocks.resize(spec.depth_blocks);
  for (Index i = 0; i < spec.depth_blocks; ++i) {
    BlockTape& bt = t.blocks[i];
    bt.lin_in = h;
    bt.pre = weight_of(p, i + 1) * h + bias_of(p, i + 1);
    bt.post_act = act_forward(spec.activation, bt.pre);
    bt.post_norm = spec.normalization == Normalization::LayerNorm
                       ? layer_norm_fwd(bt.post_act)
                       : bt.post_act;
    h = spec.skip ? Vec(bt.post_norm + h) : bt.post_norm;
  }
  t.head_in = h;
  const Index head = spec.num_linear() - 1;
  t.output = weight_of(p, head) * h + bias_of(p, head);
  return t;
}

// Accumulates d<u, f(x)>/d theta into grad (size m), one backward sweep.
void backward_into(const NetSpec& spec, const ParamVector& p, const Tape& t,
                   const Vec& u, double* grad) {
  auto w_grad = [&](Index li) {
    const Segment& s = p.layout[2 * li];
    return Eigen::Map<Mat>(grad + s.offset, s.rows, s.cols);
  };
  auto b_grad = [&](Index li) {
    const Segment& s = p.layout[2 * li + 1];
    return Eigen::Map<Vec>(grad + s.offset, s.rows);
  };

  const Index head = spec.num_linear() - 1;
  w_grad(head) += u * t.head_in.transpose();
  b_grad(head) += u;
  if (spec.linear_mode()) return;
  Vec gh = weight_of(p, head).transpose() * u;

  for (Index i = spec.depth_blocks - 1; i >= 0; --i) {
    const BlockTape& bt = t.blocks[i];
    Vec g_norm = gh;  // gradient wrt post_norm
    Vec g_act = spec.normalization == Normalization::LayerNorm
                    ? layer_norm_vjp(bt.post_act, g_norm)
                    : g_norm;
    Vec g_pre = act_deriv(spec.activation, bt.pre).cwiseProduct(g_act);
    w_grad(i + 1) += g_pre * bt.lin_in.transpose();
    b_grad(i + 1) += g_pre;
    Vec gh_in = weight_of(p, i + 1).transpose() * g_pre;
    gh = spec.skip ? Vec(gh_in + gh) : gh_in;
  }

  w_grad(0) += gh * t.x.transpose();
  b_grad(0) += gh;
}

}  // namespace

Index param_count(const NetSpec& spec) {
  Index m = 0;
  for (const auto& sh : linear_shapes(spec)) m += sh.rows * (sh.cols + 1);
  return m;
}

ParamVector zeros(const NetSpec& spec) {
  ParamVector p;
  p.layout = make_layout(spec);
  p.theta = Vec::Zero(param_count(spec));
  return p;
}

ParamVector init(const NetSpec& spec, std::uint64_t seed) {
  ParamVector p = zeros(spec);
  SplitMix64 rng(seed);
  Index li = 0;
  for (const auto& sh : linear_shapes(spec)) {
    double bound = 1.0 / std::sqrt(static_cast<double>(sh.cols));
    const Segment& w = p.layout[2 * li];
    for (Index k = 0; k < sh.rows * sh.cols; ++k) {
      p.theta[w.offset + k] = rng.uniform(-bound, bound);
    }
    const Segment& b = p.layout[2 * li + 1];
    for (Index k = 0; k < sh.rows; ++k) {
      p.theta[b.offset + k] = rng.uniform(-bound, bound);
    }
    ++li;
  }
  return p;
}

Vec forward(const NetSpec& spec, const ParamVector& params, const Vec& x) {
  return forward_tape(spec, params, x).output;
}

Mat jacobian(const NetSpec& spec, const ParamVector& params, const Vec& x) {
  Tape t = forward_tape(spec, params, x);
  const Index m = params.theta.size();
  Mat j = Mat::Zero(spec.output_dim, m);
  Vec row(m);
  for (Index k = 0; k < spec.output_dim; ++k) {
    row.setZero();
    backward_into(spec, params, t, Vec::Unit(spec.output_dim, k), row.data());
    j.row(k) = row;
  }
  return j;
}

StructureSpectrum structure_spectrum(const NetSpec& spec,
                                     const ParamVector& params, const Vec& x) {
  Mat j = jacobian(spec, params, x);
  Mat a = j * j.transpose();
  Vec ev = jacobi_eigenvalues(a);
  StructureSpectrum s;
  s.lambda_min = std::max(0.0, ev[0]);
  s.lambda_max = std::max(0.0, ev[ev.size() - 1]);
  s.frob_norm = a.norm();
  s.diag_norm = a.diagonal().norm();
  return s;
}

std::pair<double, double> dataset_spectrum(const NetSpec& spec,
                                           const ParamVector& params,
                                           const std::vector<Vec>& xs) {
  if (xs.empty()) throw EmptyDataset("dataset_spectrum: no inputs");
  double lo = kInf;
  double hi = -kInf;
  for (const Vec& x : xs) {
    StructureSpectrum s = structure_spectrum(spec, params, x);
    lo = std::min(lo, s.lambda_min);
    hi = std::max(hi, s.lambda_max);
  }
  return {lo, hi};
}

Vec loss_grad(const NetSpec& spec, const ParamVector& params,
              const convex::GeneratingFunction& gf, const Vec& x,
              const Vec& y) {
  Tape t = forward_tape(spec, params, x);
  Vec residual = convex::dual_map(gf, t.output) - y;
  Vec grad = Vec::Zero(params.theta.size());
  backward_into(spec, params, t, residual, grad.data());
  return grad;
}

Mat loss_hessian(const NetSpec& spec, const ParamVector& params,
                 const convex::GeneratingFunction& gf, const Vec& x,
                 const Vec& y) {
  const Index m = params.theta.size();
  if (m > 2000) throw TooManyParameters("loss_hessian: m > 2000");
  Mat h(m, m);
  ParamVector probe = params;
  for (Index j = 0; j < m; ++j) {
    probe.theta[j] = params.theta[j] + kHessStep;
    Vec gp = loss_grad(spec, probe, gf, x, y);
    probe.theta[j] = params.theta[j] - kHessStep;
    Vec gm = loss_grad(spec, probe, gf, x, y);
    probe.theta[j] = params.theta[j];
    h.col(j) = (gp - gm) / (2.0 * kHessStep);
  }
  return 0.5 * (h + h.transpose());
}

void save_snapshot(const std::string& path, const NetSpec& spec,
                   std::uint64_t seed, const ParamVector& params) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("save_snapshot: cannot open " + tmp);
    out.write(kMagic, sizeof(kMagic));
    auto put_i64 = [&out](std::int64_t v) {
      out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    };
    put_i64(spec.input_dim);
    put_i64(spec.output_dim);
    put_i64(spec.width);
    put_i64(spec.depth_blocks);
    put_i64(spec.skip ? 1 : 0);
    put_i64(static_cast<std::int64_t>(spec.activation));
    put_i64(static_cast<std::int64_t>(spec.normalization));
    put_i64(static_cast<std::int64_t>(seed));
    put_i64(params.theta.size());
    out.write(reinterpret_cast<const char*>(params.theta.data()),
              params.theta.size() * sizeof(double));
    if (!out) throw IoError("save_snapshot: write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw IoError("save_snapshot: rename failed for " + path);
  }
}

Snapshot load_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_snapshot: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0) {
    throw MagicMismatch("load_snapshot: bad magic in " + path);
  }
  auto get_i64 = [&in, &path]() {
    std::int64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!in) throw TruncatedFile("load_snapshot: truncated " + path);
    return v;
  };
  Snapshot snap;
  snap.spec.input_dim = get_i64();
  snap.spec.output_dim = get_i64();
  snap.spec.width = get_i64();
  snap.spec.depth_blocks = get_i64();
  snap.spec.skip = get_i64() != 0;
  snap.spec.activation = static_cast<Activation>(get_i64());
  snap.spec.normalization = static_cast<Normalization>(get_i64());
  snap.seed = static_cast<std::uint64_t>(get_i64());
  Index n = get_i64();
  if (n != param_count(snap.spec)) {
    throw ParseError("load_snapshot: theta size disagrees with spec");
  }
  snap.params = zeros(snap.spec);
  in.read(reinterpret_cast<char*>(snap.params.theta.data()),
          n * sizeof(double));
  if (!in) throw TruncatedFile("load_snapshot: truncated " + path);
  return snap;
}

}  // namespace conjulab::net
