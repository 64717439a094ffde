#include "irml/distance.hpp"
#include "irml/gradcheck.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace irml;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<std::ptrdiff_t>(v.size()));
  std::ptrdiff_t k = 0;
  for (double x : v) out(k++) = x;
  return out;
}

// Regions placed on a grid far enough apart that no two balls overlap.
ModelParams disjoint_model(std::ptrdiff_t d, const MetricMatrix& shared, std::mt19937_64& rng) {
  ModelParams m{shared, {}};
  std::uniform_real_distribution<double> u(0.1, 0.45);
  for (int s = 0; s < 3; ++s) {
    Vector c = Vector::Zero(d);
    c(0) = -1.0 + static_cast<double>(s);
    m.regions.push_back(Region{Ball(c, u(rng)), shared});
  }
  return m;
}

}  // namespace

TEST(CompositeDistance, BackgroundOnlyIsEuclidean) {
  std::mt19937_64 rng(1);
  const auto model = ModelParams::identity(4);
  for (int t = 0; t < 100; ++t) {
    const Vector a = gradcheck::random_vector(4, rng);
    const Vector b = gradcheck::random_vector(4, rng);
    EXPECT_NEAR(composite_distance(a, b, model), (a - b).norm(), 1e-14);
  }
}

TEST(CompositeDistance, CoveringBallScalesLength) {
  ModelParams m = ModelParams::identity(2);
  m.regions.push_back(Region{Ball(vec({0.15, 0.2}), 5.0), MetricMatrix::scaled_identity(2, 4.0)});
  EXPECT_DOUBLE_EQ(composite_distance(vec({0, 0}), vec({0.3, 0.4}), m), 1.0);
}

TEST(CompositeDistance, MatchesSampledGammas) {
  std::mt19937_64 rng(2);
  const Vector xi = vec({-2.0, 0.1, 0.0});
  const Vector xj = vec({2.0, -0.1, 0.2});
  ModelParams m{gradcheck::random_psd(3, rng), {}};
  m.regions.push_back(Region{Ball(vec({-1.0, 0.0, 0.0}), 0.6), gradcheck::random_psd(3, rng)});
  m.regions.push_back(Region{Ball(vec({1.0, 0.1, 0.1}), 0.7), gradcheck::random_psd(3, rng)});
  const Vector diff = xi - xj;
  double expected = 0.0;
  double gsum = 0.0;
  for (const auto& reg : m.regions) {
    const double g = oracle::sampled_gamma(xi, xj, reg.ball.center, reg.ball.radius);
    gsum += g;
    expected += g * std::sqrt(diff.dot(reg.metric.matrix() * diff));
  }
  expected += (1.0 - gsum) * std::sqrt(diff.dot(m.background.matrix() * diff));
  EXPECT_NEAR(composite_distance(xi, xj, m), expected, 5e-4);
}

TEST(CompositeDistance, MatchesNaiveImplementation) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 200; ++t) {
    const auto c = gradcheck::random_distance_case(4, 3, rng);
    EXPECT_NEAR(composite_distance(c.xi, c.xj, c.model), oracle::naive_distance(c.xi, c.xj, c.model),
                1e-12);
  }
}

TEST(CompositeDistance, SymmetricAndNonNegative) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 300; ++t) {
    const auto c = gradcheck::random_distance_case(3, 2, rng);
    const double fwd = composite_distance(c.xi, c.xj, c.model);
    EXPECT_NEAR(fwd, composite_distance(c.xj, c.xi, c.model), 1e-10);
    EXPECT_GE(fwd, 0.0);
  }
}

TEST(CompositeDistance, DisjointRegionsWithSharedMetricReduceToMahalanobis) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 300; ++t) {
    const MetricMatrix shared = gradcheck::random_psd(3, rng);
    const auto model = disjoint_model(3, shared, rng);
    const Vector a = gradcheck::random_vector(3, rng, -2.0, 2.0);
    const Vector b = gradcheck::random_vector(3, rng, -2.0, 2.0);
    EXPECT_NEAR(composite_distance(a, b, model), mahalanobis_length(a, b, shared), 1e-9);
  }
}

TEST(CompositeDistance, DimensionMismatchThrows) {
  EXPECT_THROW(composite_distance(vec({0, 0}), vec({0, 0, 0}), ModelParams::identity(2)), UsageError);
  EXPECT_THROW(composite_distance(vec({0, 0, 0}), vec({0, 0, 0}), ModelParams::identity(2)), UsageError);
}

TEST(DistanceGradients, BackgroundOnlyClosedForm) {
  std::mt19937_64 rng(6);
  const auto model = ModelParams::identity(3);
  const Vector a = gradcheck::random_vector(3, rng);
  const Vector b = gradcheck::random_vector(3, rng);
  const auto out = composite_distance_with_grads(a, b, model);
  const Vector diff = a - b;
  const Matrix expected = diff * diff.transpose() / (2.0 * out.distance);
  EXPECT_LT((out.grad.d_background - expected).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_TRUE(out.grad.d_metric.empty());
}

TEST(DistanceGradients, FarBallContributesNothing) {
  ModelParams m = ModelParams::identity(2);
  m.regions.push_back(Region{Ball(vec({10, 10}), 0.5), MetricMatrix::scaled_identity(2, 3.0)});
  const auto out = composite_distance_with_grads(vec({0, 0}), vec({1, 0.5}), m);
  EXPECT_TRUE(out.grad.d_metric[0].isZero());
  EXPECT_TRUE(out.grad.d_center[0].isZero());
  EXPECT_EQ(out.grad.d_radius[0], 0.0);
}

TEST(DistanceGradients, ZeroLengthPairHasZeroGradient) {
  const Vector p = vec({0.2, 0.3});
  ModelParams m = ModelParams::identity(2);
  m.regions.push_back(Region{Ball(vec({0, 0}), 1.0), MetricMatrix::identity(2)});
  const auto out = composite_distance_with_grads(p, p, m);
  EXPECT_EQ(out.distance, 0.0);
  EXPECT_TRUE(out.grad.d_background.isZero());
  EXPECT_TRUE(out.grad.d_metric[0].isZero());
}

TEST(DistanceGradients, MatrixBlocksAreSymmetric) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 50; ++t) {
    const auto c = gradcheck::random_distance_case(4, 2, rng);
    const auto g = composite_distance_with_grads(c.xi, c.xj, c.model).grad;
    EXPECT_LE((g.d_background - g.d_background.transpose()).cwiseAbs().maxCoeff(), 1e-15);
    for (const auto& m : g.d_metric) EXPECT_LE((m - m.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  }
}

// Each parameter is moved by a plain central difference and compared with
// the analytic derivative, normalised by the largest entry of its group.
TEST(DistanceGradients, MatchFiniteDifferences) {
  std::mt19937_64 rng(8);
  for (int d : {2, 5}) {
    for (int t = 0; t < 100; ++t) {
      const auto c = gradcheck::random_distance_case(d, 2, rng);
      const auto g = composite_distance_with_grads(c.xi, c.xj, c.model).grad;
      auto dist = [&](const ModelParams& m) { return oracle::naive_distance(c.xi, c.xj, m); };
      for (std::size_t s = 0; s < c.model.num_regions(); ++s) {
        const double scale = std::max({1e-3, g.d_center[s].cwiseAbs().maxCoeff()});
        for (int k = 0; k < d; ++k) {
          const double fd = oracle::central_diff(
              [&](double v) {
                ModelParams m = c.model;
                m.regions[s].ball.center(k) = v;
                return dist(m);
              },
              c.model.regions[s].ball.center(k));
          EXPECT_LT(std::abs(fd - g.d_center[s](k)) / scale, 1e-4);
        }
        const double fdr = oracle::central_diff(
            [&](double v) {
              ModelParams m = c.model;
              m.regions[s].ball.radius = v;
              return dist(m);
            },
            c.model.regions[s].ball.radius);
        EXPECT_LT(std::abs(fdr - g.d_radius[s]) / std::max(1e-3, std::abs(g.d_radius[s])), 1e-4);
      }
      const double bscale = std::max(1e-3, g.d_background.cwiseAbs().maxCoeff());
      for (int i = 0; i < d; ++i) {
        const double fd = oracle::central_diff(
            [&](double v) {
              ModelParams m = c.model;
              Matrix raw = m.background.matrix();
              raw(i, i) = v;
              m.background = MetricMatrix(raw);
              return dist(m);
            },
            c.model.background(i, i));
        EXPECT_LT(std::abs(fd - g.d_background(i, i)) / bscale, 1e-4);
      }
    }
  }
}

TEST(DistanceGradients, HarnessReportsSmallErrors) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 30; ++t) {
    const auto e = gradcheck::check_distance_gradient(gradcheck::random_distance_case(6, 3, rng));
    EXPECT_LT(e.max_error(), 1e-4);
  }
}
