#pragma once

// Learns local metrics, region centres and radii by full-batch gradient
// descent on the hinge objective
//
//   g = 1/N1 sum_{j->i} [D(x_i, x_j) - (1 - C)]_+
//     + 1/N2 sum_{m-/->n} [1 + C - D(x_m, x_n)]_+
//     + alpha (sum_s |M(A_s)|_F + |M(B)|_F)
//
// Target pairs are Euclidean K nearest neighbours computed once up front.

#include "irml/classifier.hpp"
#include "irml/dataset.hpp"
#include "irml/distance.hpp"
#include "irml/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace irml {

struct TrainConfig {
  double alpha = 0.1;
  double margin_c = 0.5;
  int k_neighbors = 10;
  int num_regions = 4;
  double learning_rate = 0.01;
  int max_epochs = 200;
  double tol = 1e-5;
  std::uint64_t seed = 0;
  double radius_floor = 1e-3;

  void validate() const {
    if (!(alpha >= 0.0)) throw UsageError("alpha must be >= 0");
    if (!(margin_c >= 0.0 && margin_c < 1.0)) throw UsageError("margin C must lie in [0, 1)");
    if (k_neighbors < 1) throw UsageError("K must be >= 1");
    if (num_regions < 0) throw UsageError("number of regions must be >= 0");
    if (!(learning_rate >= 0.0)) throw UsageError("learning rate must be >= 0");
    if (max_epochs < 0) throw UsageError("max_epochs must be >= 0");
    if (!(tol >= 0.0)) throw UsageError("tol must be >= 0");
    if (!(radius_floor > 0.0)) throw UsageError("radius floor must be > 0");
  }
};

// Per-instance Euclidean neighbour lists, nearest first, ties by index.
struct NeighborSets {
  std::vector<std::vector<std::ptrdiff_t>> same;
  std::vector<std::vector<std::ptrdiff_t>> other;
};

struct PairSet {
  // (i, j): x_j is one of x_i's K nearest same-class neighbours.
  std::vector<std::pair<std::ptrdiff_t, std::ptrdiff_t>> similar;
  // (m, n): x_m is one of x_n's K nearest different-class neighbours.
  std::vector<std::pair<std::ptrdiff_t, std::ptrdiff_t>> dissimilar;

  [[nodiscard]] std::size_t n1() const { return similar.size(); }
  [[nodiscard]] std::size_t n2() const { return dissimilar.size(); }
};

inline NeighborSets euclidean_neighbors(const LabeledDataset& data, int k) {
  if (k < 1) throw UsageError("euclidean_neighbors: K must be >= 1");
  const auto n = data.size();
  NeighborSets nb;
  nb.same.resize(static_cast<std::size_t>(n));
  nb.other.resize(static_cast<std::size_t>(n));
  std::vector<std::pair<double, std::ptrdiff_t>> same;
  std::vector<std::pair<double, std::ptrdiff_t>> other;
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    same.clear();
    other.clear();
    const int yi = data.y[static_cast<std::size_t>(i)];
    for (std::ptrdiff_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = (data.x.row(i) - data.x.row(j)).squaredNorm();
      (data.y[static_cast<std::size_t>(j)] == yi ? same : other).emplace_back(d, j);
    }
    auto take = [k](std::vector<std::pair<double, std::ptrdiff_t>>& v) {
      const auto used = std::min<std::size_t>(static_cast<std::size_t>(k), v.size());
      std::partial_sort(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(used), v.end());
      std::vector<std::ptrdiff_t> out;
      out.reserve(used);
      for (std::size_t t = 0; t < used; ++t) out.push_back(v[t].second);
      return out;
    };
    nb.same[static_cast<std::size_t>(i)] = take(same);
    nb.other[static_cast<std::size_t>(i)] = take(other);
  }
  return nb;
}

inline PairSet pairs_from_neighbors(const NeighborSets& nb) {
  PairSet ps;
  for (std::size_t i = 0; i < nb.same.size(); ++i) {
    for (auto j : nb.same[i]) ps.similar.emplace_back(static_cast<std::ptrdiff_t>(i), j);
  }
  for (std::size_t n = 0; n < nb.other.size(); ++n) {
    for (auto m : nb.other[n]) ps.dissimilar.emplace_back(m, static_cast<std::ptrdiff_t>(n));
  }
  return ps;
}

inline PairSet build_target_pairs(const LabeledDataset& train, int k) {
  return pairs_from_neighbors(euclidean_neighbors(train, k));
}

// h(x_i)[f] = sum over different-class neighbours |x_k[f] - x_i[f]|
//           - sum over same-class neighbours |x_j[f] - x_i[f]|
inline RowMatrix discriminative_direction(const LabeledDataset& train, const NeighborSets& nb) {
  RowMatrix h = RowMatrix::Zero(train.size(), train.dim());
  for (std::ptrdiff_t i = 0; i < train.size(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    for (auto k : nb.other[ui]) h.row(i) += (train.x.row(k) - train.x.row(i)).cwiseAbs();
    for (auto j : nb.same[ui]) h.row(i) -= (train.x.row(j) - train.x.row(i)).cwiseAbs();
  }
  return h;
}

inline RowMatrix discriminative_direction(const LabeledDataset& train, int k) {
  return discriminative_direction(train, euclidean_neighbors(train, k));
}

namespace detail {

// Linear interpolation between order statistics.
inline double percentile(std::vector<double> v, double p) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline constexpr int kMaxKMeansRestarts = 10;
inline constexpr double kRadiusPercentile = 0.8;
inline constexpr double kInitMetricScale = 0.1;

}  // namespace detail

// Clusters [x, h(x)] into S groups; each group becomes a region whose centre
// is the mean of its members' original features, whose radius is the 80th
// percentile of member distances to that centre, and whose metric is
// I + 0.1 diag(mean h). Clusters that stay empty after all restarts are
// dropped. The background metric starts at the identity.
inline ModelParams initialize_model(const LabeledDataset& train, const TrainConfig& config) {
  config.validate();
  train.validate();
  const auto n = train.size();
  const auto d = train.dim();
  if (config.num_regions > n) {
    throw UsageError("initialize_model: more regions than training instances");
  }
  ModelParams model = ModelParams::identity(d);
  if (config.num_regions == 0) return model;

  const RowMatrix h = discriminative_direction(train, config.k_neighbors);
  RowMatrix augmented(n, 2 * d);
  augmented << train.x, h;

  KMeansResult km;
  for (int attempt = 0; attempt < detail::kMaxKMeansRestarts; ++attempt) {
    auto rng = make_rng(config.seed, static_cast<std::uint64_t>(attempt));
    km = kmeans(augmented, config.num_regions, rng);
    if (!km.has_empty_cluster) break;
  }

  for (int c = 0; c < config.num_regions; ++c) {
    std::vector<std::ptrdiff_t> members;
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      if (km.assignment[static_cast<std::size_t>(i)] == c) members.push_back(i);
    }
    if (members.empty()) continue;
    Vector center = Vector::Zero(d);
    Vector mean_h = Vector::Zero(d);
    for (auto i : members) {
      center += train.row(i);
      mean_h += h.row(i).transpose();
    }
    center /= static_cast<double>(members.size());
    mean_h /= static_cast<double>(members.size());
    std::vector<double> dist;
    dist.reserve(members.size());
    for (auto i : members) dist.push_back((train.row(i) - center).norm());
    const double radius =
        std::max(detail::percentile(std::move(dist), detail::kRadiusPercentile), config.radius_floor);
    Matrix metric = Matrix::Identity(d, d);
    metric.diagonal() += detail::kInitMetricScale * mean_h;
    model.regions.push_back(Region{Ball(std::move(center), radius), project_psd(metric, 0.0)});
  }
  return model;
}

inline double regularizer(const ModelParams& model) {
  double r = frobenius_norm(model.background);
  for (const auto& reg : model.regions) r += frobenius_norm(reg.metric);
  return r;
}

inline double objective(const ModelParams& model, const LabeledDataset& train,
                        const PairSet& pairs, const TrainConfig& config) {
  const double c = config.margin_c;
  double sim = 0.0;
  for (const auto& [i, j] : pairs.similar) {
    sim += std::max(composite_distance(train.row(i), train.row(j), model) - (1.0 - c), 0.0);
  }
  double dis = 0.0;
  for (const auto& [m, n] : pairs.dissimilar) {
    dis += std::max(1.0 + c - composite_distance(train.row(m), train.row(n), model), 0.0);
  }
  double g = config.alpha * regularizer(model);
  if (pairs.n1() > 0) g += sim / static_cast<double>(pairs.n1());
  if (pairs.n2() > 0) g += dis / static_cast<double>(pairs.n2());
  return g;
}

struct ObjectiveWithGradient {
  double value = 0.0;
  ModelGradient grad;
};

inline constexpr double kShrinkageNormFloor = 1e-12;

// Hinge subgradients use strict indicators, so a pair sitting exactly on its
// margin contributes nothing. The Frobenius term contributes alpha M / |M|_F.
inline ObjectiveWithGradient objective_and_gradient(const ModelParams& model,
                                                    const LabeledDataset& train,
                                                    const PairSet& pairs,
                                                    const TrainConfig& config) {
  ObjectiveWithGradient out;
  out.grad = ModelGradient::zeros_like(model);
  const double c = config.margin_c;

  double sim = 0.0;
  if (pairs.n1() > 0) {
    const double w = 1.0 / static_cast<double>(pairs.n1());
    for (const auto& [i, j] : pairs.similar) {
      const double dist = accumulate_distance_gradient(
          train.row(i), train.row(j), model,
          [&](double dd) { return dd - (1.0 - c) > 0.0 ? w : 0.0; }, out.grad);
      sim += std::max(dist - (1.0 - c), 0.0);
    }
    sim *= w;
  }
  double dis = 0.0;
  if (pairs.n2() > 0) {
    const double w = 1.0 / static_cast<double>(pairs.n2());
    for (const auto& [m, n] : pairs.dissimilar) {
      const double dist = accumulate_distance_gradient(
          train.row(m), train.row(n), model,
          [&](double dd) { return 1.0 + c - dd > 0.0 ? -w : 0.0; }, out.grad);
      dis += std::max(1.0 + c - dist, 0.0);
    }
    dis *= w;
  }

  auto shrink = [&](const MetricMatrix& m, Matrix& g) {
    const double norm = frobenius_norm(m);
    if (norm > kShrinkageNormFloor) g += (config.alpha / norm) * m.matrix();
  };
  shrink(model.background, out.grad.d_background);
  for (std::size_t s = 0; s < model.num_regions(); ++s) {
    shrink(model.regions[s].metric, out.grad.d_metric[s]);
  }
  out.value = sim + dis + config.alpha * regularizer(model);
  return out;
}

inline ModelGradient objective_gradient(const ModelParams& model, const LabeledDataset& train,
                                        const PairSet& pairs, const TrainConfig& config) {
  return objective_and_gradient(model, train, pairs, config).grad;
}

// One descent step followed by symmetrisation, PSD projection and radius
// clamping.
inline ModelParams gradient_step(const ModelParams& model, const ModelGradient& grad, double lr,
                                 double radius_floor) {
  ModelParams next;
  next.background = project_psd(model.background.matrix() - lr * grad.d_background, 0.0);
  next.regions.reserve(model.num_regions());
  for (std::size_t s = 0; s < model.num_regions(); ++s) {
    const auto& reg = model.regions[s];
    Region r;
    r.metric = project_psd(reg.metric.matrix() - lr * grad.d_metric[s], 0.0);
    r.ball.center = reg.ball.center - lr * grad.d_center[s];
    r.ball.radius = std::max(reg.ball.radius - lr * grad.d_radius[s], radius_floor);
    next.regions.push_back(std::move(r));
  }
  return next;
}

struct TrainReport {
  std::vector<double> objective_history;
  ModelParams initial_model;
  ModelParams final_model;
  int epochs_run = 0;
};

// Called after every update with (epoch, model, objective).
using EpochObserver = std::function<void(int, const ModelParams&, double)>;

inline constexpr int kStoppingWindow = 10;

inline TrainReport train(const LabeledDataset& trainset, const TrainConfig& config,
                         const EpochObserver& observer = {}) {
  config.validate();
  trainset.validate();
  if (trainset.indices_of(-1).empty() || trainset.indices_of(+1).empty()) {
    throw UsageError("train: training set must contain both classes");
  }
  TrainReport report;
  const PairSet pairs = build_target_pairs(trainset, config.k_neighbors);
  ModelParams model = initialize_model(trainset, config);
  report.initial_model = model;

  auto check_finite = [](double g, int epoch) {
    if (!std::isfinite(g)) {
      std::ostringstream msg;
      msg << "objective became non-finite at epoch " << epoch
          << "; the learning rate is probably too large";
      throw NumericError(msg.str());
    }
  };

  ObjectiveWithGradient cur = objective_and_gradient(model, trainset, pairs, config);
  check_finite(cur.value, 0);
  report.objective_history.push_back(cur.value);

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    model = gradient_step(model, cur.grad, config.learning_rate, config.radius_floor);
    cur = objective_and_gradient(model, trainset, pairs, config);
    check_finite(cur.value, epoch);
    report.objective_history.push_back(cur.value);
    report.epochs_run = epoch;
    if (observer) observer(epoch, model, cur.value);

    const auto& h = report.objective_history;
    if (epoch >= kStoppingWindow) {
      const double then = h[h.size() - 1 - kStoppingWindow];
      const double rel = std::abs(then - h.back()) / std::max(std::abs(then), 1e-12);
      if (rel < config.tol) break;
    }
  }
  report.final_model = std::move(model);
  return report;
}

}  // namespace irml
