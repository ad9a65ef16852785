#ifndef CONJULAB_INFO_HPP_
#define CONJULAB_INFO_HPP_

#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "conjulab/convex.hpp"

namespace conjulab::info {

using FeatureKey = std::string;

// Finite joint distribution over (X, Y): X keyed by opaque byte strings, Y a
// small set of distinct target vectors. prob(i, j) = q(x_i, y_j).
struct DiscreteJoint {
  std::vector<FeatureKey> x_support;
  std::vector<Vec> y_support;
  Mat prob;

  DiscreteJoint(std::vector<FeatureKey> xs, std::vector<Vec> ys, Mat p);

  Index x_card() const { return static_cast<Index>(x_support.size()); }
  Index y_card() const { return static_cast<Index>(y_support.size()); }
  Index y_dim() const { return y_support.empty() ? 0 : y_support.front().size(); }

  // Marginal q(x_i).
  Vec x_marginal() const;
  // Marginal q(y_j).
  Vec y_marginal() const;
};

struct ConditionalMeanTable {
  std::map<FeatureKey, Vec> mean_given_x;
  Vec marginal_mean;
};

// Empirical joint from raw (feature, target) samples, cell mass count/n.
DiscreteJoint from_samples(
    const std::vector<std::pair<FeatureKey, Vec>>& pairs);

// Conditional means E[Y | X = x] and the marginal mean.
ConditionalMeanTable conditional_means(const DiscreteJoint& joint);

// Generalized entropy Ent_Phi(Y) = E[Phi(Y)] - Phi(E[Y]) over an explicit
// finite distribution of target vectors.
double gen_entropy(const convex::GeneratingFunction& gf,
                   const std::vector<std::pair<Vec, double>>& dist);

// Generalized conditional entropy Ent_Phi(Y|X) = E_{X,Y}[Phi(Y)] -
// E_X[Phi(mean(Y|X))].
double gen_cond_entropy(const convex::GeneratingFunction& gf,
                        const DiscreteJoint& joint);

// Shannon H(Y), H(Y|X), I(Y;X) in nats. Requires one-hot y_support.
struct ShannonQuantities {
  double h_y = 0.0;
  double h_y_given_x = 0.0;
  double mi = 0.0;
};
ShannonQuantities shannon_quantities(const DiscreteJoint& joint);

// Support-size reduction |X| - |W| of a finite map.
long absolute_info_loss(long x_count, long distinct_outputs);

// L_Phi(Y|g(X)) = E_X[B_Phi(mean(Y|X), mean(Y|g(X)))] for a grouping g given
// as feature-key -> group-key.
double relative_info_loss(const convex::GeneratingFunction& gf,
                          const DiscreteJoint& joint,
                          const std::map<FeatureKey, std::string>& grouping);

}  // namespace conjulab::info

#endif  // CONJULAB_INFO_HPP_
