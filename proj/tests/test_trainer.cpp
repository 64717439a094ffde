#include "irml/gradcheck.hpp"
#include "irml/kmeans.hpp"
#include "irml/model_io.hpp"
#include "irml/trainer.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

using namespace irml;

namespace {

LabeledDataset line_data(std::initializer_list<std::pair<double, int>> pts) {
  LabeledDataset d;
  d.x.resize(static_cast<std::ptrdiff_t>(pts.size()), 1);
  std::ptrdiff_t i = 0;
  for (const auto& [v, y] : pts) {
    d.x(i++, 0) = v;
    d.y.push_back(y);
  }
  return d;
}

LabeledDataset gaussian_data(int n, std::ptrdiff_t d, std::uint64_t seed, double shift = 1.0) {
  auto rng = make_rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  LabeledDataset data;
  data.x.resize(n, d);
  for (int i = 0; i < n; ++i) {
    const int y = (i * 7) % 3 == 0 ? 1 : -1;
    data.y.push_back(y);
    for (std::ptrdiff_t k = 0; k < d; ++k) data.x(i, k) = g(rng) + (k == 0 ? shift * y : 0.0);
  }
  return data;
}

// Two well separated blobs, unit-normalised as after preprocessing.
LabeledDataset toy_clusters(std::uint64_t seed) {
  auto data = gaussian_data(60, 2, seed, 0.0);
  auto rng = make_rng(seed, 1);
  std::normal_distribution<double> g(0.0, 0.15);
  for (std::ptrdiff_t i = 0; i < data.size(); ++i) {
    const double base = data.y[static_cast<std::size_t>(i)] > 0 ? 0.3 : 2.2;
    const double angle = base + g(rng);
    data.x(i, 0) = std::cos(angle);
    data.x(i, 1) = std::sin(angle);
  }
  return data;
}

}  // namespace

TEST(TargetPairs, FourPointsOnALine) {
  const auto data = line_data({{0.0, -1}, {1.0, -1}, {3.0, 1}, {5.0, 1}});
  const auto ps = build_target_pairs(data, 1);
  using P = std::pair<std::ptrdiff_t, std::ptrdiff_t>;
  EXPECT_EQ(ps.similar, (std::vector<P>{{0, 1}, {1, 0}, {2, 3}, {3, 2}}));
  // (m, n): m is n's nearest other-class point.
  EXPECT_EQ(ps.dissimilar, (std::vector<P>{{2, 0}, {2, 1}, {1, 2}, {1, 3}}));
}

TEST(TargetPairs, SaturateWhenKExceedsClassSize) {
  const auto data = gaussian_data(9, 2, 3);
  const auto neg = static_cast<std::size_t>(data.indices_of(-1).size());
  const auto pos = static_cast<std::size_t>(data.indices_of(1).size());
  const auto ps = build_target_pairs(data, 50);
  EXPECT_EQ(ps.n1(), neg * (neg - 1) + pos * (pos - 1));
  EXPECT_EQ(ps.n2(), 2 * neg * pos);
  for (const auto& [i, j] : ps.similar) EXPECT_NE(i, j);
}

TEST(TargetPairs, MatchBruteForceNeighbours) {
  const auto data = gaussian_data(50, 3, 4);
  const int k = 5;
  const auto nb = euclidean_neighbors(data, k);
  for (std::ptrdiff_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(nb.same[static_cast<std::size_t>(i)], oracle::brute_neighbors(data, i, k, true));
    EXPECT_EQ(nb.other[static_cast<std::size_t>(i)], oracle::brute_neighbors(data, i, k, false));
  }
  const auto ps = build_target_pairs(data, k);
  std::size_t expect_n1 = 0;
  for (std::ptrdiff_t i = 0; i < data.size(); ++i) {
    const auto same = data.indices_of(data.y[static_cast<std::size_t>(i)]).size();
    expect_n1 += std::min<std::size_t>(k, same - 1);
  }
  EXPECT_EQ(ps.n1(), expect_n1);
  EXPECT_EQ(ps.similar, build_target_pairs(data, k).similar);
}

TEST(DiscriminativeDirection, HandArithmetic) {
  const auto data = line_data({{0.0, -1}, {0.1, -1}, {0.5, 1}, {2.0, 1}});
  const auto h = discriminative_direction(data, 1);
  EXPECT_NEAR(h(0, 0), 0.4, 1e-15);
}

TEST(DiscriminativeDirection, CancelsForMirroredNeighbours) {
  const auto data = line_data({{0.0, -1}, {-1.0, -1}, {1.0, 1}, {5.0, 1}});
  EXPECT_EQ(discriminative_direction(data, 1)(0, 0), 0.0);
}

TEST(DiscriminativeDirection, MatchesDirectSummation) {
  const auto data = gaussian_data(40, 4, 5);
  const int k = 3;
  const auto h = discriminative_direction(data, k);
  for (std::ptrdiff_t i = 0; i < data.size(); ++i) {
    for (std::ptrdiff_t f = 0; f < data.dim(); ++f) {
      double v = 0.0;
      for (auto o : oracle::brute_neighbors(data, i, k, false)) v += std::abs(data.x(o, f) - data.x(i, f));
      for (auto s : oracle::brute_neighbors(data, i, k, true)) v -= std::abs(data.x(s, f) - data.x(i, f));
      EXPECT_NEAR(h(i, f), v, 1e-12);
    }
  }
}

TEST(KMeans, SeparatedBlobsAreRecovered) {
  RowMatrix pts(40, 2);
  auto rng = make_rng(1);
  std::normal_distribution<double> g(0.0, 0.05);
  for (int i = 0; i < 40; ++i) {
    pts(i, 0) = (i < 20 ? -3.0 : 3.0) + g(rng);
    pts(i, 1) = g(rng);
  }
  auto krng = make_rng(2);
  const auto res = kmeans(pts, 2, krng);
  EXPECT_FALSE(res.has_empty_cluster);
  for (int i = 1; i < 20; ++i) EXPECT_EQ(res.assignment[static_cast<std::size_t>(i)], res.assignment[0]);
  for (int i = 21; i < 40; ++i) EXPECT_EQ(res.assignment[static_cast<std::size_t>(i)], res.assignment[20]);
  EXPECT_NE(res.assignment[0], res.assignment[20]);
  EXPECT_THROW(kmeans(pts, 41, krng), UsageError);
}

TEST(KMeans, SeedsAreDistinctAndDeterministic) {
  RowMatrix pts = RowMatrix::Random(30, 3);
  auto a = make_rng(9);
  auto b = make_rng(9);
  const auto sa = kmeanspp_seeds(pts, 6, a);
  EXPECT_EQ(sa, kmeanspp_seeds(pts, 6, b));
  EXPECT_EQ(std::set<std::ptrdiff_t>(sa.begin(), sa.end()).size(), 6u);
}

TEST(Initialize, SingleRegionCentredOnMean) {
  const auto data = gaussian_data(30, 3, 6);
  TrainConfig cfg;
  cfg.num_regions = 1;
  cfg.k_neighbors = 3;
  const auto model = initialize_model(data, cfg);
  ASSERT_EQ(model.num_regions(), 1u);
  const Vector mean = data.x.colwise().mean().transpose();
  EXPECT_LT((model.regions[0].ball.center - mean).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(model.background, MetricMatrix::identity(3));
}

TEST(Initialize, EquidistantMembersGiveThatRadius) {
  // Four points at distance 0.5 from the origin.
  LabeledDataset data;
  data.x.resize(4, 2);
  data.x << 0.5, 0, -0.5, 0, 0, 0.5, 0, -0.5;
  data.y = {-1, -1, 1, 1};
  TrainConfig cfg;
  cfg.num_regions = 1;
  cfg.k_neighbors = 1;
  EXPECT_NEAR(initialize_model(data, cfg).regions[0].ball.radius, 0.5, 1e-15);
  cfg.radius_floor = 0.7;
  EXPECT_EQ(initialize_model(data, cfg).regions[0].ball.radius, 0.7);
  cfg.num_regions = 5;
  EXPECT_THROW(initialize_model(data, cfg), UsageError);
}

TEST(Initialize, MatchesScriptedReimplementation) {
  const auto data = toy_clusters(7);
  TrainConfig cfg;
  cfg.num_regions = 2;
  cfg.k_neighbors = 4;
  cfg.seed = 3;
  const auto model = initialize_model(data, cfg);
  ASSERT_EQ(model.num_regions(), 2u);

  // Same clustering input and seed, then centres, radii and metrics by hand.
  const auto n = data.size();
  RowMatrix h = RowMatrix::Zero(n, 2);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    for (std::ptrdiff_t f = 0; f < 2; ++f) {
      for (auto o : oracle::brute_neighbors(data, i, 4, false)) h(i, f) += std::abs(data.x(o, f) - data.x(i, f));
      for (auto s : oracle::brute_neighbors(data, i, 4, true)) h(i, f) -= std::abs(data.x(s, f) - data.x(i, f));
    }
  }
  RowMatrix aug(n, 4);
  aug << data.x, h;
  auto rng = make_rng(3, 0);
  const auto km = kmeans(aug, 2, rng);
  ASSERT_FALSE(km.has_empty_cluster);
  for (int c = 0; c < 2; ++c) {
    std::vector<std::ptrdiff_t> mem;
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      if (km.assignment[static_cast<std::size_t>(i)] == c) mem.push_back(i);
    }
    Vector centre = Vector::Zero(2);
    Vector mh = Vector::Zero(2);
    for (auto i : mem) {
      centre += data.x.row(i).transpose();
      mh += h.row(i).transpose();
    }
    centre /= static_cast<double>(mem.size());
    mh /= static_cast<double>(mem.size());
    std::vector<double> dist;
    for (auto i : mem) dist.push_back((data.x.row(i).transpose() - centre).norm());
    std::sort(dist.begin(), dist.end());
    const double pos = 0.8 * static_cast<double>(dist.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const double radius = dist[lo] + (pos - static_cast<double>(lo)) * (dist[std::min(lo + 1, dist.size() - 1)] - dist[lo]);
    const auto& reg = model.regions[static_cast<std::size_t>(c)];
    EXPECT_LT((reg.ball.center - centre).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_NEAR(reg.ball.radius, std::max(radius, 1e-3), 1e-12);
    Matrix metric = Matrix::Identity(2, 2);
    metric.diagonal() += 0.1 * mh;
    EXPECT_LT((reg.metric.matrix() - oracle::psd_clip(metric)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Objective, ZeroWhenMarginsSatisfied) {
  const auto data = line_data({{0.0, -1}, {0.2, -1}, {3.0, 1}, {3.2, 1}});
  TrainConfig cfg;
  cfg.alpha = 0.0;
  cfg.k_neighbors = 1;
  const auto ps = build_target_pairs(data, 1);
  EXPECT_EQ(objective(ModelParams::identity(1), data, ps, cfg), 0.0);
  const auto g = objective_gradient(ModelParams::identity(1), data, ps, cfg);
  EXPECT_TRUE(g.d_background.isZero());
}

TEST(Objective, HandArithmeticAllMarginsViolatedByPointTwo) {
  LabeledDataset data;
  data.x = RowMatrix::Zero(4, 4);
  data.x(1, 0) = 0.7;
  data.x(2, 1) = 1.3;
  data.x(3, 0) = 0.7;
  data.x(3, 1) = 1.3;
  data.y = {-1, -1, 1, 1};
  TrainConfig cfg;
  cfg.k_neighbors = 1;
  const auto ps = build_target_pairs(data, 1);
  EXPECT_NEAR(objective(ModelParams::identity(4), data, ps, cfg), 0.6, 1e-12);
}

TEST(Objective, MatchesNaiveLoop) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 20; ++t) {
    const auto c = gradcheck::random_objective_case(3, rng, 14, 2, 3);
    EXPECT_NEAR(objective(c.model, c.train, c.pairs, c.config),
                oracle::naive_objective(c.model, c.train, c.pairs.similar, c.pairs.dissimilar,
                                        c.config.alpha, c.config.margin_c),
                1e-10);
  }
}

TEST(ObjectiveGradient, SingleActiveSimilarPair) {
  const auto data = line_data({{0.0, -1}, {0.9, -1}, {5.0, 1}, {5.3, 1}});
  TrainConfig cfg;
  cfg.alpha = 0.0;
  cfg.k_neighbors = 1;
  const auto ps = build_target_pairs(data, 1);
  const auto model = ModelParams::identity(1);
  const auto g = objective_gradient(model, data, ps, cfg);
  // Only (0,1) and (1,0) exceed the similar threshold 1 - C; no dissimilar pair is inside 1 + C.
  const auto single = composite_distance_with_grads(data.row(0), data.row(1), model);
  EXPECT_NEAR(g.d_background(0, 0), 2.0 / ps.n1() * single.grad.d_background(0, 0), 1e-15);
}

TEST(ObjectiveGradient, MatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  for (int d : {2, 4}) {
    for (int t = 0; t < 10; ++t) {
      const auto c = gradcheck::random_objective_case(d, rng);
      const auto g = objective_gradient(c.model, c.train, c.pairs, c.config);
      auto f = [&](const ModelParams& m) {
        return oracle::naive_objective(m, c.train, c.pairs.similar, c.pairs.dissimilar,
                                       c.config.alpha, c.config.margin_c);
      };
      const double scale = std::max(1e-3, g.d_background.cwiseAbs().maxCoeff());
      for (int i = 0; i < d; ++i) {
        for (int j = i; j < d; ++j) {
          const double fd = oracle::central_diff(
              [&](double v) {
                ModelParams m = c.model;
                Matrix raw = m.background.matrix();
                raw(i, j) = raw(j, i) = v;
                m.background = MetricMatrix(raw);
                return f(m);
              },
              c.model.background(i, j));
          const double an = i == j ? g.d_background(i, i) : 2.0 * g.d_background(i, j);
          EXPECT_LT(std::abs(fd - an) / scale, 1e-4);
        }
      }
      for (std::size_t s = 0; s < c.model.num_regions(); ++s) {
        const double rs = std::max(1e-3, std::abs(g.d_radius[s]));
        const double fd = oracle::central_diff(
            [&](double v) {
              ModelParams m = c.model;
              m.regions[s].ball.radius = v;
              return f(m);
            },
            c.model.regions[s].ball.radius);
        EXPECT_LT(std::abs(fd - g.d_radius[s]) / rs, 1e-4);
      }
      EXPECT_LT(gradcheck::check_objective_gradient(c).max_error(), 1e-4);
    }
  }
}

TEST(Train, ZeroLearningRateKeepsInitialisation) {
  const auto data = toy_clusters(1);
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.max_epochs = 15;
  cfg.k_neighbors = 3;
  cfg.num_regions = 2;
  const auto rep = train(data, cfg);
  EXPECT_EQ(serialize_model({rep.final_model, 3, {}}), serialize_model({rep.initial_model, 3, {}}));
  for (double v : rep.objective_history) EXPECT_EQ(v, rep.objective_history.front());
  EXPECT_EQ(rep.epochs_run, kStoppingWindow);
}

TEST(Train, DescendsAndKeepsConstraints) {
  const auto data = toy_clusters(2);
  TrainConfig cfg;
  cfg.k_neighbors = 5;
  cfg.num_regions = 2;
  cfg.max_epochs = 60;
  int calls = 0;
  const auto rep = train(data, cfg, [&](int, const ModelParams& m, double g) {
    ++calls;
    EXPECT_TRUE(std::isfinite(g));
    EXPECT_GE(g, 0.0);
    EXPECT_TRUE(is_psd(m.background));
    for (const auto& r : m.regions) {
      EXPECT_TRUE(is_psd(r.metric));
      EXPECT_GE(r.ball.radius, cfg.radius_floor);
    }
  });
  EXPECT_EQ(calls, rep.epochs_run);
  EXPECT_EQ(rep.objective_history.size(), static_cast<std::size_t>(rep.epochs_run) + 1);
  EXPECT_LT(rep.objective_history.back(), rep.objective_history.front());
}

TEST(Train, BitReproducible) {
  const auto data = gaussian_data(50, 3, 10);
  TrainConfig cfg;
  cfg.k_neighbors = 4;
  cfg.max_epochs = 20;
  cfg.seed = 42;
  const auto a = train(data, cfg);
  const auto b = train(data, cfg);
  EXPECT_EQ(a.objective_history, b.objective_history);
  EXPECT_EQ(serialize_model(ModelFile{a.final_model, 4, std::nullopt}), serialize_model(ModelFile{b.final_model, 4, std::nullopt}));
}

TEST(Train, NonFiniteObjectiveRaisesNumericError) {
  auto data = gaussian_data(30, 2, 11);
  // Squared lengths overflow to infinity.
  data.x *= 1e200;
  TrainConfig cfg;
  cfg.k_neighbors = 3;
  cfg.num_regions = 0;
  EXPECT_THROW(train(data, cfg), NumericError);
}

TEST(Train, RejectsInvalidConfig) {
  const auto data = gaussian_data(20, 2, 12);
  TrainConfig cfg;
  cfg.margin_c = 1.0;
  EXPECT_THROW(train(data, cfg), UsageError);
  cfg = TrainConfig{};
  cfg.radius_floor = 0.0;
  EXPECT_THROW(train(data, cfg), UsageError);
}
