#include "conjulab/info.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace conjulab::info {

namespace {

bool is_one_hot(const Vec& y) {
  int ones = 0;
  for (Index i = 0; i < y.size(); ++i) {
    if (y[i] == 1.0) {
      ++ones;
    } else if (y[i] != 0.0) {
      return false;
    }
  }
  return ones == 1;
}

}  // namespace

DiscreteJoint::DiscreteJoint(std::vector<FeatureKey> xs, std::vector<Vec> ys,
                             Mat p)
    : x_support(std::move(xs)), y_support(std::move(ys)), prob(std::move(p)) {
  if (prob.rows() != x_card() || prob.cols() != y_card()) {
    throw ShapeError("DiscreteJoint: prob matrix shape mismatch");
  }
  if ((prob.array() < 0.0).any()) {
    throw DomainError("DiscreteJoint: negative cell mass");
  }
  if (std::abs(prob.sum() - 1.0) > 1e-12) {
    throw DomainError("DiscreteJoint: cell masses do not sum to 1");
  }
  std::set<FeatureKey> seen(x_support.begin(), x_support.end());
  if (static_cast<Index>(seen.size()) != x_card()) {
    throw DomainError("DiscreteJoint: duplicate feature keys");
  }
  for (Index j = 0; j < y_card(); ++j) {
    if (y_support[j].size() != y_dim()) {
      throw ShapeError("DiscreteJoint: ragged target vectors");
    }
    for (Index jj = j + 1; jj < y_card(); ++jj) {
      if (y_support[j] == y_support[jj]) {
        throw DomainError("DiscreteJoint: duplicate target vectors");
      }
    }
  }
}

Vec DiscreteJoint::x_marginal() const { return prob.rowwise().sum(); }

Vec DiscreteJoint::y_marginal() const { return prob.colwise().sum(); }

DiscreteJoint from_samples(
    const std::vector<std::pair<FeatureKey, Vec>>& pairs) {
  if (pairs.empty()) throw EmptyDataset("from_samples: no samples");
  std::vector<FeatureKey> xs;
  std::vector<Vec> ys;
  auto x_index = [&xs](const FeatureKey& k) -> Index {
    auto it = std::find(xs.begin(), xs.end(), k);
    if (it != xs.end()) return it - xs.begin();
    xs.push_back(k);
    return static_cast<Index>(xs.size()) - 1;
  };
  auto y_index = [&ys](const Vec& y) -> Index {
    for (std::size_t j = 0; j < ys.size(); ++j) {
      if (ys[j] == y) return static_cast<Index>(j);
    }
    ys.push_back(y);
    return static_cast<Index>(ys.size()) - 1;
  };
  std::vector<std::pair<Index, Index>> cells;
  cells.reserve(pairs.size());
  const Index d = pairs.front().second.size();
  for (const auto& [key, y] : pairs) {
    if (y.size() != d) throw ShapeError("from_samples: ragged target vectors");
    cells.emplace_back(x_index(key), y_index(y));
  }
  Mat p = Mat::Zero(static_cast<Index>(xs.size()), static_cast<Index>(ys.size()));
  const double w = 1.0 / static_cast<double>(pairs.size());
  for (auto [i, j] : cells) p(i, j) += w;
  return DiscreteJoint(std::move(xs), std::move(ys), std::move(p));
}

ConditionalMeanTable conditional_means(const DiscreteJoint& joint) {
  ConditionalMeanTable t;
  Vec qx = joint.x_marginal();
  t.marginal_mean = Vec::Zero(joint.y_dim());
  for (Index i = 0; i < joint.x_card(); ++i) {
    if (qx[i] <= 0.0) continue;
    Vec m = Vec::Zero(joint.y_dim());
    for (Index j = 0; j < joint.y_card(); ++j) {
      m += joint.prob(i, j) * joint.y_support[j];
    }
    m /= qx[i];
    t.mean_given_x[joint.x_support[i]] = m;
    t.marginal_mean += qx[i] * m;
  }
  return t;
}

double gen_entropy(const convex::GeneratingFunction& gf,
                   const std::vector<std::pair<Vec, double>>& dist) {
  if (dist.empty()) throw EmptyDataset("gen_entropy: empty distribution");
  double total = 0.0;
  for (const auto& [y, p] : dist) total += p;
  if (std::abs(total - 1.0) > 1e-9) {
    throw DomainError("gen_entropy: probabilities do not sum to 1");
  }
  double e_phi = 0.0;
  Vec mean = Vec::Zero(dist.front().first.size());
  for (const auto& [y, p] : dist) {
    if (p <= 0.0) continue;
    e_phi += p * convex::eval_phi_closed(gf, y);
    mean += p * y;
  }
  return e_phi - convex::eval_phi_closed(gf, mean);
}

double gen_cond_entropy(const convex::GeneratingFunction& gf,
                        const DiscreteJoint& joint) {
  Vec qx = joint.x_marginal();
  double e_phi = 0.0;
  for (Index i = 0; i < joint.x_card(); ++i) {
    for (Index j = 0; j < joint.y_card(); ++j) {
      if (joint.prob(i, j) > 0.0) {
        e_phi += joint.prob(i, j) * convex::eval_phi_closed(gf, joint.y_support[j]);
      }
    }
  }
  double e_phi_mean = 0.0;
  for (Index i = 0; i < joint.x_card(); ++i) {
    if (qx[i] <= 0.0) continue;
    Vec m = Vec::Zero(joint.y_dim());
    for (Index j = 0; j < joint.y_card(); ++j) {
      m += joint.prob(i, j) * joint.y_support[j];
    }
    m /= qx[i];
    e_phi_mean += qx[i] * convex::eval_phi_closed(gf, m);
  }
  return e_phi - e_phi_mean;
}

ShannonQuantities shannon_quantities(const DiscreteJoint& joint) {
  for (const Vec& y : joint.y_support) {
    if (!is_one_hot(y)) {
      throw ShapeError("shannon_quantities: y_support is not one-hot");
    }
  }
  ShannonQuantities out;
  Vec qy = joint.y_marginal();
  for (Index j = 0; j < joint.y_card(); ++j) out.h_y -= xlogx(qy[j]);
  Vec qx = joint.x_marginal();
  for (Index i = 0; i < joint.x_card(); ++i) {
    if (qx[i] <= 0.0) continue;
    for (Index j = 0; j < joint.y_card(); ++j) {
      out.h_y_given_x -= qx[i] * xlogx(joint.prob(i, j) / qx[i]);
    }
  }
  out.mi = out.h_y - out.h_y_given_x;
  return out;
}

long absolute_info_loss(long x_count, long distinct_outputs) {
  if (distinct_outputs < 1 || distinct_outputs > x_count) {
    throw RangeError("absolute_info_loss: need 1 <= distinct_outputs <= x_count");
  }
  return x_count - distinct_outputs;
}

double relative_info_loss(const convex::GeneratingFunction& gf,
                          const DiscreteJoint& joint,
                          const std::map<FeatureKey, std::string>& grouping) {
  Vec qx = joint.x_marginal();
  // Conditional means per x and per group (group mean is the q(x)-weighted
  // average of its members' means).
  std::vector<Vec> mean_x(joint.x_card());
  std::map<std::string, Vec> group_sum;
  std::map<std::string, double> group_mass;
  for (Index i = 0; i < joint.x_card(); ++i) {
    auto it = grouping.find(joint.x_support[i]);
    if (it == grouping.end()) {
      throw MissingKey("relative_info_loss: grouping misses key " +
                       joint.x_support[i]);
    }
    Vec m = Vec::Zero(joint.y_dim());
    for (Index j = 0; j < joint.y_card(); ++j) {
      m += joint.prob(i, j) * joint.y_support[j];
    }
    if (qx[i] > 0.0) m /= qx[i];
    mean_x[i] = m;
    auto [gs, inserted] = group_sum.try_emplace(it->second, Vec::Zero(joint.y_dim()));
    gs->second += qx[i] * m;
    group_mass[it->second] += qx[i];
  }
  double loss = 0.0;
  for (Index i = 0; i < joint.x_card(); ++i) {
    if (qx[i] <= 0.0) continue;
    const std::string& g = grouping.at(joint.x_support[i]);
    Vec gm = group_sum.at(g) / group_mass.at(g);
    loss += qx[i] * convex::bregman_closed(gf, mean_x[i], gm);
  }
  return loss;
}

}  // namespace conjulab::info
