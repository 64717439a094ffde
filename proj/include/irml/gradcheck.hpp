#pragma once

// Finite-difference checks of the analytic gradients. Every check perturbs a
// single parameter, re-evaluates only the forward quantity (gamma, distance or
// objective) and compares the central difference with the analytic value.
// Random configurations are redrawn until they sit clear of every kink
// (roots near 0 or 1, tangency, gamma_b near 0, hinge arguments near 0), so
// the forward function is smooth on the whole stencil.

#include "irml/distance.hpp"
#include "irml/geometry.hpp"
#include "irml/trainer.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace irml::gradcheck {

inline constexpr double kStep = 1e-6;
// Coordinate errors are measured relative to the largest magnitude in the
// parameter group, never below this floor.
inline constexpr double kScaleFloor = 1e-3;
inline constexpr double kKinkMargin = 1e-3;

// Running max of coordinate errors within one parameter group.
struct ErrorAccumulator {
  std::vector<double> analytic;
  std::vector<double> numeric;

  void add(double a, double n) {
    analytic.push_back(a);
    numeric.push_back(n);
  }

  [[nodiscard]] double max_relative_error() const {
    double scale = kScaleFloor;
    for (std::size_t k = 0; k < analytic.size(); ++k) {
      scale = std::max({scale, std::abs(analytic[k]), std::abs(numeric[k])});
    }
    double err = 0.0;
    for (std::size_t k = 0; k < analytic.size(); ++k) {
      err = std::max(err, std::abs(analytic[k] - numeric[k]) / scale);
    }
    return err;
  }
};

inline double central_difference(const std::function<double(double)>& f, double x0,
                                 double h = kStep) {
  return (f(x0 + h) - f(x0 - h)) / (2.0 * h);
}

// ---- random configurations -------------------------------------------------

inline Vector random_vector(std::ptrdiff_t d, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(d);
  for (std::ptrdiff_t k = 0; k < d; ++k) v(k) = u(rng);
  return v;
}

inline Vector random_unit(std::ptrdiff_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vector v(d);
  for (std::ptrdiff_t k = 0; k < d; ++k) v(k) = n(rng);
  return v / v.norm();
}

// L L^T + eps I with a random L, scaled to unit-ish spectrum.
inline MetricMatrix random_psd(std::ptrdiff_t d, std::mt19937_64& rng, double eps = 0.1) {
  std::normal_distribution<double> n(0.0, 1.0 / std::sqrt(static_cast<double>(d)));
  Matrix l(d, d);
  for (std::ptrdiff_t i = 0; i < d; ++i) {
    for (std::ptrdiff_t j = 0; j < d; ++j) l(i, j) = n(rng);
  }
  return MetricMatrix(l * l.transpose() + eps * Matrix::Identity(d, d));
}

// A ball whose chord with the segment falls in the requested table case.
inline Ball ball_for_case(const Vector& xi, const Vector& xj, IntersectionCase wanted,
                          std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Vector dir = xj - xi;
  const double len = dir.norm();
  double lu = 0.0;
  double lv = 0.0;
  switch (wanted) {
    case IntersectionCase::kInside: lu = 0.1 + 0.35 * u(rng); lv = 0.55 + 0.35 * u(rng); break;
    case IntersectionCase::kEntersAtStart: lu = -1.0 + 0.9 * u(rng); lv = 0.1 + 0.8 * u(rng); break;
    case IntersectionCase::kExitsAtEnd: lu = 0.1 + 0.8 * u(rng); lv = 1.1 + 0.9 * u(rng); break;
    case IntersectionCase::kCovers: lu = -1.0 + 0.9 * u(rng); lv = 1.1 + 0.9 * u(rng); break;
    case IntersectionCase::kBothBefore: lu = -2.0 + 0.8 * u(rng); lv = lu + 0.1 + 0.8 * u(rng); break;
    case IntersectionCase::kBothAfter: lu = 1.1 + 0.8 * u(rng); lv = lu + 0.1 + 0.8 * u(rng); break;
    default: throw UsageError("ball_for_case: only chord cases are supported");
  }
  // Chord [lu, lv] along the line; offset the centre perpendicular to it.
  const double half = 0.5 * (lv - lu) * len;
  const double offset = half * u(rng);
  Vector perp = random_unit(xi.size(), rng);
  perp -= perp.dot(dir) / (len * len) * dir;
  if (perp.norm() > 1e-9) perp.normalize();
  const Vector center = xi + 0.5 * (lu + lv) * dir + offset * perp;
  return Ball(center, std::sqrt(half * half + offset * offset));
}

inline bool geometry_kink_free(const IntersectionResult& r, double margin = kKinkMargin) {
  if (r.a <= 0.0) return false;
  if (std::abs(r.delta) < margin * std::max(1.0, r.b * r.b)) return false;
  if (!r.has_chord) return true;
  for (double l : {r.lambda_u, r.lambda_v}) {
    if (std::abs(l) < margin || std::abs(l - 1.0) < margin) return false;
  }
  return true;
}

// Every segment/ball pair, gamma_b and every quadratic form clear of kinks.
inline bool distance_kink_free(const VecRef& xi, const VecRef& xj, const ModelParams& model,
                               double margin = kKinkMargin) {
  double gsum = 0.0;
  const Vector diff = xi - xj;
  if (model.background.quadratic_form(diff) < margin) return false;
  for (const auto& reg : model.regions) {
    const auto r = intersect(xi, xj, reg.ball);
    if (!geometry_kink_free(r, margin)) return false;
    if (reg.metric.quadratic_form(diff) < margin) return false;
    gsum += r.gamma;
  }
  return std::abs(1.0 - gsum) >= margin;
}

// Random model with `regions` balls anchored on a random segment so that the
// segment meets most of them.
struct DistanceCase {
  Vector xi;
  Vector xj;
  ModelParams model;
};

inline DistanceCase random_distance_case(std::ptrdiff_t d, int regions, std::mt19937_64& rng) {
  static constexpr IntersectionCase kCases[] = {
      IntersectionCase::kInside, IntersectionCase::kEntersAtStart, IntersectionCase::kExitsAtEnd,
      IntersectionCase::kCovers, IntersectionCase::kBothBefore};
  std::uniform_int_distribution<int> pick(0, 4);
  for (;;) {
    DistanceCase c;
    c.xi = random_vector(d, rng);
    c.xj = random_vector(d, rng);
    c.model.background = random_psd(d, rng);
    for (int s = 0; s < regions; ++s) {
      c.model.regions.push_back(
          Region{ball_for_case(c.xi, c.xj, kCases[pick(rng)], rng), random_psd(d, rng)});
    }
    if (distance_kink_free(c.xi, c.xj, c.model)) return c;
  }
}

struct ObjectiveCase {
  LabeledDataset train;
  PairSet pairs;
  ModelParams model;
  TrainConfig config;
};

inline bool objective_kink_free(const ObjectiveCase& c, double margin = kKinkMargin) {
  auto pair_ok = [&](std::ptrdiff_t i, std::ptrdiff_t j, double hinge_offset, double sign) {
    const auto xi = c.train.row(i);
    const auto xj = c.train.row(j);
    if (!distance_kink_free(xi, xj, c.model, margin)) return false;
    const double arg = sign * composite_distance(xi, xj, c.model) + hinge_offset;
    return std::abs(arg) >= margin;
  };
  const double cm = c.config.margin_c;
  for (const auto& [i, j] : c.pairs.similar) {
    if (!pair_ok(i, j, -(1.0 - cm), 1.0)) return false;
  }
  for (const auto& [m, n] : c.pairs.dissimilar) {
    if (!pair_ok(m, n, 1.0 + cm, -1.0)) return false;
  }
  return true;
}

inline ObjectiveCase random_objective_case(std::ptrdiff_t d, std::mt19937_64& rng, int n = 12,
                                           int regions = 2, int k = 2) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (;;) {
    ObjectiveCase c;
    c.config.k_neighbors = k;
    c.config.num_regions = regions;
    c.config.alpha = 0.1;
    c.config.margin_c = 0.5;
    c.train.x.resize(n, d);
    c.train.y.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      c.train.x.row(i) = random_vector(d, rng).transpose();
      c.train.y[static_cast<std::size_t>(i)] = i % 2 == 0 ? -1 : 1;
    }
    c.pairs = build_target_pairs(c.train, k);
    c.model.background = random_psd(d, rng);
    std::uniform_int_distribution<int> anchor(0, n - 1);
    const double typical = std::sqrt(static_cast<double>(d) * 2.0 / 3.0);
    for (int s = 0; s < regions; ++s) {
      Vector center = c.train.row(anchor(rng)) + 0.2 * random_vector(d, rng);
      c.model.regions.push_back(
          Region{Ball(std::move(center), typical * (0.3 + 0.4 * u(rng))), random_psd(d, rng)});
    }
    if (objective_kink_free(c)) return c;
  }
}

// ---- checks ------------------------------------------------------------------

struct GammaCheck {
  double center_error = 0.0;
  double radius_error = 0.0;
};

inline GammaCheck check_gamma_gradient(const Vector& xi, const Vector& xj, const Ball& ball) {
  const GammaGradient g = gamma_gradients(xi, xj, ball);
  ErrorAccumulator center;
  for (std::ptrdiff_t k = 0; k < ball.dim(); ++k) {
    const double num = central_difference(
        [&](double v) {
          Ball b = ball;
          b.center(k) = v;
          return intersection_ratio(xi, xj, b);
        },
        ball.center(k));
    center.add(g.d_center(k), num);
  }
  ErrorAccumulator radius;
  radius.add(g.d_radius, central_difference(
                             [&](double v) {
                               Ball b = ball;
                               b.radius = v;
                               return intersection_ratio(xi, xj, b);
                             },
                             ball.radius));
  return {center.max_relative_error(), radius.max_relative_error()};
}

// Errors for each parameter group of a ModelGradient against a scalar
// function of the model.
struct ModelCheck {
  double background_error = 0.0;
  double metric_error = 0.0;
  double center_error = 0.0;
  double radius_error = 0.0;

  [[nodiscard]] double max_error() const {
    return std::max({background_error, metric_error, center_error, radius_error});
  }
};

inline ModelCheck check_model_gradient(const ModelParams& model, const ModelGradient& grad,
                                       const std::function<double(const ModelParams&)>& f) {
  const auto d = model.dim();
  ModelCheck out;
  auto matrix_error = [&](const Matrix& g, const std::function<MetricMatrix&(ModelParams&)>& slot) {
    ErrorAccumulator acc;
    ModelParams probe = model;
    const Matrix base = slot(probe).matrix();
    for (std::ptrdiff_t i = 0; i < d; ++i) {
      for (std::ptrdiff_t j = i; j < d; ++j) {
        const double num = central_difference(
            [&](double v) {
              ModelParams m = model;
              Matrix raw = slot(m).matrix();
              raw(i, j) = v;
              raw(j, i) = v;
              slot(m) = MetricMatrix(raw);
              return f(m);
            },
            base(i, j));
        // A symmetric perturbation of an off-diagonal entry moves both
        // (i, j) and (j, i).
        acc.add(i == j ? g(i, j) : g(i, j) + g(j, i), num);
      }
    }
    return acc.max_relative_error();
  };

  out.background_error = matrix_error(grad.d_background, [](ModelParams& m) -> MetricMatrix& {
    return m.background;
  });
  for (std::size_t s = 0; s < model.num_regions(); ++s) {
    out.metric_error = std::max(
        out.metric_error, matrix_error(grad.d_metric[s], [s](ModelParams& m) -> MetricMatrix& {
          return m.regions[s].metric;
        }));
    ErrorAccumulator center;
    for (std::ptrdiff_t k = 0; k < d; ++k) {
      center.add(grad.d_center[s](k), central_difference(
                                          [&](double v) {
                                            ModelParams m = model;
                                            m.regions[s].ball.center(k) = v;
                                            return f(m);
                                          },
                                          model.regions[s].ball.center(k)));
    }
    out.center_error = std::max(out.center_error, center.max_relative_error());
    ErrorAccumulator radius;
    radius.add(grad.d_radius[s], central_difference(
                                     [&](double v) {
                                       ModelParams m = model;
                                       m.regions[s].ball.radius = v;
                                       return f(m);
                                     },
                                     model.regions[s].ball.radius));
    out.radius_error = std::max(out.radius_error, radius.max_relative_error());
  }
  return out;
}

inline ModelCheck check_distance_gradient(const DistanceCase& c) {
  const auto analytic = composite_distance_with_grads(c.xi, c.xj, c.model);
  return check_model_gradient(c.model, analytic.grad, [&](const ModelParams& m) {
    return composite_distance(c.xi, c.xj, m);
  });
}

inline ModelCheck check_objective_gradient(const ObjectiveCase& c) {
  const ModelGradient g = objective_gradient(c.model, c.train, c.pairs, c.config);
  return check_model_gradient(c.model, g, [&](const ModelParams& m) {
    return objective(m, c.train, c.pairs, c.config);
  });
}

// ---- harness -------------------------------------------------------------------

struct GroupResult {
  std::string group;
  std::ptrdiff_t dim = 0;
  int configurations = 0;
  double max_error = 0.0;
};

inline constexpr double kDefaultThreshold = 1e-4;

// Runs `configs` seeded kink-free configurations per dimension and reports
// the worst error per parameter group.
inline std::vector<GroupResult> run(const std::vector<std::ptrdiff_t>& dims, std::uint64_t seed,
                                    int configs) {
  std::vector<GroupResult> out;
  for (auto d : dims) {
    auto rng = make_rng(seed, static_cast<std::uint64_t>(d));
    GroupResult gc{"gamma/center", d, configs, 0.0};
    GroupResult gr{"gamma/radius", d, configs, 0.0};
    static constexpr IntersectionCase kInterior[] = {IntersectionCase::kInside,
                                                     IntersectionCase::kEntersAtStart,
                                                     IntersectionCase::kExitsAtEnd};
    for (int t = 0; t < configs; ++t) {
      Vector xi;
      Vector xj;
      Ball ball;
      do {
        xi = random_vector(d, rng);
        xj = random_vector(d, rng);
        ball = ball_for_case(xi, xj, kInterior[t % 3], rng);
      } while (!geometry_kink_free(line_ball_coefficients(xi, xj, ball)));
      const auto e = check_gamma_gradient(xi, xj, ball);
      gc.max_error = std::max(gc.max_error, e.center_error);
      gr.max_error = std::max(gr.max_error, e.radius_error);
    }
    out.push_back(gc);
    out.push_back(gr);

    GroupResult db{"distance/background_metric", d, configs, 0.0};
    GroupResult dm{"distance/region_metric", d, configs, 0.0};
    GroupResult dc{"distance/center", d, configs, 0.0};
    GroupResult dr{"distance/radius", d, configs, 0.0};
    for (int t = 0; t < configs; ++t) {
      const auto e = check_distance_gradient(random_distance_case(d, 3, rng));
      db.max_error = std::max(db.max_error, e.background_error);
      dm.max_error = std::max(dm.max_error, e.metric_error);
      dc.max_error = std::max(dc.max_error, e.center_error);
      dr.max_error = std::max(dr.max_error, e.radius_error);
    }
    out.insert(out.end(), {db, dm, dc, dr});

    GroupResult ob{"objective/background_metric", d, configs, 0.0};
    GroupResult om{"objective/region_metric", d, configs, 0.0};
    GroupResult oc{"objective/center", d, configs, 0.0};
    GroupResult orr{"objective/radius", d, configs, 0.0};
    for (int t = 0; t < configs; ++t) {
      const auto e = check_objective_gradient(random_objective_case(d, rng));
      ob.max_error = std::max(ob.max_error, e.background_error);
      om.max_error = std::max(om.max_error, e.metric_error);
      oc.max_error = std::max(oc.max_error, e.center_error);
      orr.max_error = std::max(orr.max_error, e.radius_error);
    }
    out.insert(out.end(), {ob, om, oc, orr});
  }
  return out;
}

}  // namespace irml::gradcheck
