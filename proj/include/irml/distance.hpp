#pragma once

// Composite distance over influential regions:
//
//   D(x_i, x_j) = gamma_b * L_B + sum_s gamma_s * L_s
//
// where L_* is the Mahalanobis length of the whole segment under the region's
// metric, gamma_s the fraction of the segment inside ball s and
// gamma_b = max(1 - sum_s gamma_s, 0). gamma_b is exact for disjoint balls and
// an approximation when balls overlap.

#include "irml/core.hpp"
#include "irml/geometry.hpp"
#include "irml/metrics.hpp"

#include <cmath>
#include <vector>

namespace irml {

struct Region {
  Ball ball;
  MetricMatrix metric;
};

struct ModelParams {
  MetricMatrix background;
  std::vector<Region> regions;

  static ModelParams identity(std::ptrdiff_t dim) {
    return ModelParams{MetricMatrix::identity(dim), {}};
  }

  [[nodiscard]] std::ptrdiff_t dim() const { return background.dim(); }
  [[nodiscard]] std::size_t num_regions() const { return regions.size(); }

  void validate() const {
    const auto d = dim();
    for (const auto& reg : regions) {
      require_same_dim(reg.metric.dim(), d, "ModelParams region metric");
      require_same_dim(reg.ball.dim(), d, "ModelParams region center");
      if (!(reg.ball.radius > 0.0)) throw UsageError("ModelParams: radius must be positive");
    }
  }
};

// Gradient of a scalar with respect to every model parameter. Matrix blocks
// are symmetric.
struct ModelGradient {
  Matrix d_background;
  std::vector<Matrix> d_metric;
  std::vector<Vector> d_center;
  std::vector<double> d_radius;

  static ModelGradient zeros_like(const ModelParams& model) {
    const auto d = model.dim();
    const auto s = model.num_regions();
    ModelGradient g;
    g.d_background = Matrix::Zero(d, d);
    g.d_metric.assign(s, Matrix::Zero(d, d));
    g.d_center.assign(s, Vector::Zero(d));
    g.d_radius.assign(s, 0.0);
    return g;
  }
};

using DistanceGradients = ModelGradient;

namespace detail {

// sqrt(q) with the zero-distance convention: forms below the floor count as 0.
inline double guarded_length(double q) { return q < kQuadraticFormFloor ? 0.0 : std::sqrt(q); }

struct DistanceTerms {
  double distance = 0.0;
  double gamma_b = 0.0;
  double len_b = 0.0;
  std::vector<IntersectionResult> hits;
  std::vector<double> len;
};

inline DistanceTerms distance_terms(const VecRef& xi, const VecRef& xj, const ModelParams& model,
                                    const Vector& diff) {
  DistanceTerms t;
  const auto s_count = model.num_regions();
  t.hits.resize(s_count);
  t.len.assign(s_count, 0.0);
  double gamma_sum = 0.0;
  for (std::size_t s = 0; s < s_count; ++s) {
    const auto& reg = model.regions[s];
    t.hits[s] = intersect(xi, xj, reg.ball);
    gamma_sum += t.hits[s].gamma;
    if (t.hits[s].has_chord) t.len[s] = guarded_length(reg.metric.quadratic_form(diff));
  }
  t.gamma_b = std::max(1.0 - gamma_sum, 0.0);
  t.len_b = guarded_length(model.background.quadratic_form(diff));
  t.distance = t.gamma_b * t.len_b;
  for (std::size_t s = 0; s < s_count; ++s) t.distance += t.hits[s].gamma * t.len[s];
  return t;
}

}  // namespace detail

inline double composite_distance(const VecRef& xi, const VecRef& xj, const ModelParams& model) {
  require_same_dim(xi.size(), xj.size(), "composite_distance");
  require_same_dim(xi.size(), model.dim(), "composite_distance");
  const Vector diff = xi - xj;
  return detail::distance_terms(xi, xj, model, diff).distance;
}

// Adds w(D) * dD/dTheta into `grad` and returns D, where w maps the pair's
// distance to a weight (0 skips the pair). The objective gradient uses this to
// switch hinge terms on and off without evaluating each distance twice.
template <typename WeightFn>
double accumulate_distance_gradient(const VecRef& xi, const VecRef& xj, const ModelParams& model,
                                    WeightFn&& weight_of, ModelGradient& grad) {
  require_same_dim(xi.size(), xj.size(), "composite_distance_with_grads");
  require_same_dim(xi.size(), model.dim(), "composite_distance_with_grads");
  const Vector diff = xi - xj;
  const detail::DistanceTerms t = detail::distance_terms(xi, xj, model, diff);
  const double weight = weight_of(t.distance);
  if (weight == 0.0) return t.distance;
  const bool background_active = t.gamma_b > 0.0;

  if (background_active && t.len_b > 0.0) {
    grad.d_background.noalias() += (weight * t.gamma_b / (2.0 * t.len_b)) * diff * diff.transpose();
  }
  for (std::size_t s = 0; s < model.num_regions(); ++s) {
    const auto& hit = t.hits[s];
    if (!hit.has_chord) continue;
    if (hit.gamma > 0.0 && t.len[s] > 0.0) {
      grad.d_metric[s].noalias() += (weight * hit.gamma / (2.0 * t.len[s])) * diff * diff.transpose();
    }
    // gamma_b falls as gamma_s grows, hence the negative background term.
    const double coef = (background_active ? -t.len_b : 0.0) + t.len[s];
    if (coef == 0.0) continue;
    const GammaGradient gg = gamma_gradients(xi, xj, model.regions[s].ball, hit);
    grad.d_center[s] += (weight * coef) * gg.d_center;
    grad.d_radius[s] += weight * coef * gg.d_radius;
  }
  return t.distance;
}

inline double accumulate_distance_gradient(const VecRef& xi, const VecRef& xj,
                                           const ModelParams& model, double weight,
                                           ModelGradient& grad) {
  return accumulate_distance_gradient(xi, xj, model, [weight](double) { return weight; }, grad);
}

struct DistanceWithGradients {
  double distance = 0.0;
  DistanceGradients grad;
};

inline DistanceWithGradients composite_distance_with_grads(const VecRef& xi, const VecRef& xj,
                                                           const ModelParams& model) {
  DistanceWithGradients out;
  out.grad = ModelGradient::zeros_like(model);
  out.distance = accumulate_distance_gradient(xi, xj, model, 1.0, out.grad);
  return out;
}

}  // namespace irml
