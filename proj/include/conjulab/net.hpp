#ifndef CONJULAB_NET_HPP_
#define CONJULAB_NET_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "conjulab/convex.hpp"

namespace conjulab::net {

enum class Activation { ReLU, Tanh, Identity };
enum class Normalization { None, LayerNorm };

// Feedforward net: embed Linear(input->width), depth_blocks repeated blocks of
// Linear(width->width) + activation (+ LayerNorm), head Linear(width->out).
// With skip=true each repeated block computes h <- block(h) + h.
// width == 0 selects the degenerate linear model f(x) = W x + b (a single
// linear layer, exactly linear in theta); depth_blocks must then be 0.
struct NetSpec {
  Index input_dim = 1;
  Index output_dim = 1;
  Index width = 1;
  Index depth_blocks = 0;
  bool skip = false;
  Activation activation = Activation::ReLU;
  Normalization normalization = Normalization::None;

  bool linear_mode() const { return width == 0; }
  // Number of linear layers: embed + blocks + head (1 in linear mode).
  Index num_linear() const { return linear_mode() ? 1 : depth_blocks + 2; }
};

// One parameter segment: a weight matrix or bias vector of a linear layer.
struct Segment {
  std::string name;
  Index rows = 0;
  Index cols = 0;  // 1 for biases
  Index offset = 0;
};

struct ParamVector {
  Vec theta;
  std::vector<Segment> layout;
};

// Total parameter count for a spec.
Index param_count(const NetSpec& spec);

// All-zero parameters with the layout filled in.
ParamVector zeros(const NetSpec& spec);

// Uniform [-1/sqrt(fan_in), +1/sqrt(fan_in)] init per linear layer, driven by
// a counter-based generator; identical (spec, seed) gives identical bytes.
ParamVector init(const NetSpec& spec, std::uint64_t seed);

// f_theta(x).
Vec forward(const NetSpec& spec, const ParamVector& params, const Vec& x);

// Exact reverse-mode Jacobian d f / d theta, output_dim x m.
Mat jacobian(const NetSpec& spec, const ParamVector& params, const Vec& x);

struct StructureSpectrum {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double frob_norm = 0.0;
  double diag_norm = 0.0;
};

// Eigen-extremes and norms of A_x = J J^T (k x k).
StructureSpectrum structure_spectrum(const NetSpec& spec,
                                     const ParamVector& params, const Vec& x);

// min of per-sample lambda_min and max of per-sample lambda_max over xs.
std::pair<double, double> dataset_spectrum(const NetSpec& spec,
                                           const ParamVector& params,
                                           const std::vector<Vec>& xs);

// Gradient of the Fenchel-Young loss in parameters:
// J^T (dual_map(f(x)) - y).
Vec loss_grad(const NetSpec& spec, const ParamVector& params,
              const convex::GeneratingFunction& gf, const Vec& x, const Vec& y);

// m x m symmetrized central-difference Hessian of the loss (step 1e-4).
// Throws TooManyParameters when m > 2000.
Mat loss_hessian(const NetSpec& spec, const ParamVector& params,
                 const convex::GeneratingFunction& gf, const Vec& x,
                 const Vec& y);

// Snapshot round trip: versioned header (magic, spec fields, seed) followed by
// the raw little-endian doubles of theta. Bit-exact round trip.
struct Snapshot {
  NetSpec spec;
  std::uint64_t seed = 0;
  ParamVector params;
};
void save_snapshot(const std::string& path, const NetSpec& spec,
                   std::uint64_t seed, const ParamVector& params);
Snapshot load_snapshot(const std::string& path);

}  // namespace conjulab::net

#endif  // CONJULAB_NET_HPP_
