#pragma once

// Segment/ball intersection. A segment x_i -> x_j is parameterised as
// x_i + lambda (x_j - x_i); the ball is {x : |x - o|^2 <= r^2}. Substituting
// gives a quadratic a lambda^2 + b lambda + c = 0 whose roots bound the chord
// of the infinite line, and clamping those roots to [0, 1] bounds the part of
// the segment inside the ball. gamma is the clamped length as a fraction of
// the segment.

#include "irml/core.hpp"

#include <algorithm>
#include <cmath>
#include <string_view>

namespace irml {

struct Ball {
  Vector center;
  double radius = 1.0;

  Ball() = default;
  Ball(Vector c, double r) : center(std::move(c)), radius(r) {
    if (!(radius > 0.0)) throw UsageError("Ball: radius must be positive");
  }
  [[nodiscard]] std::ptrdiff_t dim() const { return center.size(); }
};

struct Segment {
  Vector start;
  Vector end;
};

// Rows of the case table, in the order they are usually listed.
enum class IntersectionCase {
  kDisjoint,      // Delta < 0
  kTangent,       // Delta = 0 (within the numerical band)
  kBothBefore,    // lambda_u < 0, lambda_v < 0
  kEntersAtStart, // lambda_u < 0, 0 <= lambda_v <= 1
  kCovers,        // lambda_u < 0, lambda_v > 1
  kInside,        // 0 <= lambda_u <= 1, 0 <= lambda_v <= 1
  kExitsAtEnd,    // 0 <= lambda_u <= 1, lambda_v > 1
  kBothAfter,     // lambda_u > 1, lambda_v > 1
  kDegenerate,    // x_i == x_j, the quadratic has no leading term
};

inline constexpr int kNumTableCases = 8;

inline std::string_view case_label(IntersectionCase c) {
  switch (c) {
    case IntersectionCase::kDisjoint: return "Δ<0";
    case IntersectionCase::kTangent: return "Δ=0";
    case IntersectionCase::kBothBefore: return "λ_u<0, λ_v<0";
    case IntersectionCase::kEntersAtStart: return "λ_u<0, 0≤λ_v≤1";
    case IntersectionCase::kCovers: return "λ_u<0, λ_v>1";
    case IntersectionCase::kInside: return "0≤λ_u≤1, 0≤λ_v≤1";
    case IntersectionCase::kExitsAtEnd: return "0≤λ_u≤1, λ_v>1";
    case IntersectionCase::kBothAfter: return "λ_u>1, λ_v>1";
    case IntersectionCase::kDegenerate: return "degenerate";
  }
  return "unknown";
}

inline std::string_view case_id(IntersectionCase c) {
  switch (c) {
    case IntersectionCase::kDisjoint: return "disjoint";
    case IntersectionCase::kTangent: return "tangent";
    case IntersectionCase::kBothBefore: return "both_before";
    case IntersectionCase::kEntersAtStart: return "enters_at_start";
    case IntersectionCase::kCovers: return "covers";
    case IntersectionCase::kInside: return "inside";
    case IntersectionCase::kExitsAtEnd: return "exits_at_end";
    case IntersectionCase::kBothAfter: return "both_after";
    case IntersectionCase::kDegenerate: return "degenerate";
  }
  return "unknown";
}

struct IntersectionResult {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double delta = 0.0;
  // Only meaningful when has_chord is true.
  double lambda_u = 0.0;
  double lambda_v = 0.0;
  bool has_chord = false;
  // Filled by clamp_to_segment.
  double lambda_p = 0.0;
  double lambda_q = 0.0;
  double gamma = 0.0;

  [[nodiscard]] IntersectionCase classify() const {
    if (a <= 0.0) return IntersectionCase::kDegenerate;
    if (!has_chord) {
      return delta < -delta_band(b) ? IntersectionCase::kDisjoint : IntersectionCase::kTangent;
    }
    if (lambda_u < 0.0) {
      if (lambda_v < 0.0) return IntersectionCase::kBothBefore;
      return lambda_v <= 1.0 ? IntersectionCase::kEntersAtStart : IntersectionCase::kCovers;
    }
    if (lambda_u <= 1.0) {
      return lambda_v <= 1.0 ? IntersectionCase::kInside : IntersectionCase::kExitsAtEnd;
    }
    return IntersectionCase::kBothAfter;
  }

  // Discriminants inside this band count as tangent.
  static double delta_band(double b) { return 1e-12 * std::max(1.0, b * b); }
};

// Quadratic coefficients, discriminant and (when the line cuts the ball) the
// ordered roots. lambda_p/lambda_q/gamma are left at zero.
inline IntersectionResult line_ball_coefficients(const VecRef& xi, const VecRef& xj,
                                                 const Ball& ball) {
  require_same_dim(xi.size(), xj.size(), "line_ball_coefficients");
  require_same_dim(xi.size(), ball.dim(), "line_ball_coefficients");
  IntersectionResult res;
  const auto dir = xj - xi;
  const auto off = xi - ball.center;
  res.a = dir.squaredNorm();
  res.b = 2.0 * dir.dot(off);
  res.c = off.squaredNorm() - ball.radius * ball.radius;
  res.delta = res.b * res.b - 4.0 * res.a * res.c;
  if (!std::isfinite(res.delta)) throw NumericError("line_ball_coefficients: coefficients overflow");
  if (res.a > 0.0 && res.delta > IntersectionResult::delta_band(res.b)) {
    const double root = std::sqrt(res.delta);
    res.lambda_u = (-res.b - root) / (2.0 * res.a);
    res.lambda_v = (-res.b + root) / (2.0 * res.a);
    res.has_chord = true;
  }
  return res;
}

inline IntersectionResult line_ball_coefficients(const Segment& seg, const Ball& ball) {
  return line_ball_coefficients(seg.start, seg.end, ball);
}

inline IntersectionResult clamp_to_segment(IntersectionResult res) {
  if (!res.has_chord) {
    res.lambda_p = res.lambda_q = res.gamma = 0.0;
    return res;
  }
  res.lambda_p = std::clamp(res.lambda_u, 0.0, 1.0);
  res.lambda_q = std::clamp(res.lambda_v, 0.0, 1.0);
  res.gamma = res.lambda_q - res.lambda_p;
  return res;
}

inline IntersectionResult intersect(const VecRef& xi, const VecRef& xj, const Ball& ball) {
  return clamp_to_segment(line_ball_coefficients(xi, xj, ball));
}

inline double intersection_ratio(const VecRef& xi, const VecRef& xj, const Ball& ball) {
  return intersect(xi, xj, ball).gamma;
}

struct GammaGradient {
  Vector d_center;
  double d_radius = 0.0;
};

// d gamma / d center and d gamma / d radius. Nonzero only when at least one
// root lies strictly inside (0, 1); every saturated row and every boundary
// (root exactly at 0 or 1, tangent line) takes the zero subgradient.
//
// With w = x_i - o and dir = x_j - x_i:
//   dDelta/do = -4 b dir + 8 a w,  dDelta/dr = 8 a r
//   d lambda_{u,v}/do = (2 dir -/+ dDelta/do / (2 sqrt Delta)) / (2a)
// which reproduces the closed forms of the three interior rows.
inline GammaGradient gamma_gradients(const VecRef& xi, const VecRef& xj, const Ball& ball,
                                     const IntersectionResult& res) {
  GammaGradient g{Vector::Zero(ball.dim()), 0.0};
  if (!res.has_chord) return g;

  const bool u_in = res.lambda_u > 0.0 && res.lambda_u < 1.0;
  const bool v_in = res.lambda_v > 0.0 && res.lambda_v < 1.0;
  if (!u_in && !v_in) return g;
  // A root sitting exactly on an endpoint is a kink.
  if ((!u_in && (res.lambda_u == 0.0 || res.lambda_u == 1.0)) ||
      (!v_in && (res.lambda_v == 0.0 || res.lambda_v == 1.0))) {
    return g;
  }

  const double a = res.a;
  const double b = res.b;
  const double inv_sqrt_delta = 1.0 / std::sqrt(res.delta);
  const Vector dir = xj - xi;
  const Vector w = xi - ball.center;
  const double r = ball.radius;

  if (u_in && v_in) {
    // gamma = sqrt(Delta) / a
    g.d_center = 4.0 * inv_sqrt_delta * (w - (b / (2.0 * a)) * dir);
    g.d_radius = 4.0 * inv_sqrt_delta * r;
  } else if (v_in) {
    // gamma = lambda_v
    g.d_center = (2.0 * dir + 0.5 * inv_sqrt_delta * (-4.0 * b * dir + 8.0 * a * w)) / (2.0 * a);
    g.d_radius = 2.0 * inv_sqrt_delta * r;
  } else {
    // gamma = 1 - lambda_u
    g.d_center = (-2.0 * dir + 0.5 * inv_sqrt_delta * (-4.0 * b * dir + 8.0 * a * w)) / (2.0 * a);
    g.d_radius = 2.0 * inv_sqrt_delta * r;
  }
  return g;
}

inline GammaGradient gamma_gradients(const VecRef& xi, const VecRef& xj, const Ball& ball) {
  return gamma_gradients(xi, xj, ball, line_ball_coefficients(xi, xj, ball));
}

inline GammaGradient gamma_gradients(const Segment& seg, const Ball& ball) {
  return gamma_gradients(seg.start, seg.end, ball);
}

}  // namespace irml
