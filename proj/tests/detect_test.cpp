#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "tensorad/detect.hpp"
#include "test_util.hpp"

namespace tensorad {
namespace {

double accuracy(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < a.size(); ++i) ok += a[i] == b[i];
  return static_cast<double>(ok) / static_cast<double>(a.size());
}

struct Labelled {
  Matrix x;
  std::vector<std::uint8_t> y;
};

// Label from the sign of x0 + x1; remaining columns are noise.
Labelled separable(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
  Labelled d{testing::gaussian_matrix(n, p, seed), {}};
  for (Eigen::Index i = 0; i < n; ++i) d.y.push_back(d.x(i, 0) + d.x(i, 1) > 0 ? 1 : 0);
  return d;
}

TEST(Forest, SeparableTrainingAccuracy) {
  const auto d = separable(300, 2, 1);
  ForestConfig cfg;
  cfg.n_trees = 25;
  cfg.min_leaf = 1;
  const auto m = train_forest(d.x, d.y, cfg);
  EXPECT_DOUBLE_EQ(accuracy(m.predict(d.x), d.y), 1.0);
  for (const auto& t : m.trees) {
    for (const auto& nd : t.nodes) {
      if (nd.feature >= 0) {
        EXPECT_GE(nd.left, 0);
        EXPECT_GE(nd.right, 0);
      } else {
        EXPECT_GE(nd.p1, 0.0);
        EXPECT_LE(nd.p1, 1.0);
      }
    }
  }
}

TEST(Forest, Xor) {
  Matrix x(4, 2);
  x << 0, 0, 0, 1, 1, 0, 1, 1;
  const std::vector<std::uint8_t> y = {0, 1, 1, 0};
  ForestConfig cfg;
  cfg.n_trees = 5;
  cfg.min_leaf = 1;
  cfg.bootstrap = false;
  const auto m = train_forest(x, y, cfg);
  EXPECT_EQ(m.predict(x), y);
  for (const auto& t : m.trees) EXPECT_EQ(t.depth(), 2u);
}

TEST(Forest, DeterministicAndThreadIndependent) {
  const auto d = separable(200, 5, 2);
  const auto test = separable(100, 5, 3);
  ForestConfig cfg;
  cfg.n_trees = 12;
  cfg.seed = 9;
  cfg.threads = 1;
  const auto a = train_forest(d.x, d.y, cfg);
  cfg.threads = 4;
  const auto b = train_forest(d.x, d.y, cfg);
  EXPECT_EQ(a.predict_proba(test.x), b.predict_proba(test.x));
  EXPECT_EQ(gini_importance(a), gini_importance(b));
  cfg.seed = 10;
  const auto c = train_forest(d.x, d.y, cfg);
  EXPECT_NE(a.predict_proba(test.x), c.predict_proba(test.x));
}

TEST(Forest, ConstantFeatureChangesNothing) {
  const auto d = separable(200, 4, 4);
  const auto test = separable(100, 4, 5);
  auto widen = [](const Matrix& x) {
    Matrix w(x.rows(), x.cols() + 1);
    w << x, Matrix::Constant(x.rows(), 1, 7.0);
    return w;
  };
  ForestConfig cfg;
  cfg.n_trees = 10;
  const auto a = train_forest(d.x, d.y, cfg);
  const auto b = train_forest(widen(d.x), d.y, cfg);
  EXPECT_EQ(a.predict_proba(test.x), b.predict_proba(widen(test.x)));
  EXPECT_EQ(gini_importance(b).back(), 0.0);
}

TEST(Forest, Importance) {
  // A perfect splitter with every feature considered takes all the importance.
  auto d = separable(200, 3, 6);
  for (Eigen::Index i = 0; i < d.x.rows(); ++i) d.x(i, 2) = d.y[static_cast<std::size_t>(i)] ? 1.0 + d.x(i, 2) * 0.01 : d.x(i, 2) * 0.01;
  ForestConfig cfg;
  cfg.n_trees = 10;
  cfg.mtry = 3;
  const auto imp = gini_importance(train_forest(d.x, d.y, cfg));
  EXPECT_NEAR(imp[2], 1.0, 1e-12);

  const auto r = separable(300, 6, 7);
  const auto imp2 = gini_importance(train_forest(r.x, r.y, ForestConfig{}));
  EXPECT_NEAR(std::accumulate(imp2.begin(), imp2.end(), 0.0), 1.0, 1e-12);
  // The two informative columns dominate.
  EXPECT_GT(imp2[0] + imp2[1], 0.5);
}

TEST(Forest, SingleClassIsConstant) {
  const Matrix x = testing::gaussian_matrix(20, 3, 1);
  const auto m = train_forest(x, std::vector<std::uint8_t>(20, 1));
  EXPECT_TRUE(m.constant);
  EXPECT_EQ(m.predict(x), std::vector<std::uint8_t>(20, 1));
}

TEST(Forest, Errors) {
  const Matrix x = testing::gaussian_matrix(4, 2, 1);
  EXPECT_THROW(train_forest(x, {0, 1, 0}), DataError);
  EXPECT_THROW(train_forest(x, {0, 1, 0, 2}), DataError);
  ForestConfig cfg;
  cfg.n_trees = 0;
  EXPECT_THROW(train_forest(x, {0, 1, 0, 1}, cfg), std::invalid_argument);
  const auto m = train_forest(x, {0, 1, 0, 1});
  EXPECT_THROW(m.predict(Matrix::Zero(2, 3)), DataError);
}

TEST(Logistic, SeparatesLinearData) {
  const auto d = separable(400, 3, 11);
  const auto m = train_logistic(d.x, d.y);
  EXPECT_GT(accuracy(m.predict(d.x), d.y), 0.97);
  EXPECT_GT(m.coef(1), 0.0);
  EXPECT_GT(m.coef(2), 0.0);
}

TEST(Evaluate, PerfectAndSilent) {
  const std::vector<std::uint8_t> truth = {0, 1, 1, 0, 1};
  const std::vector<Episode> eps = {{0, {1, 2}}, {1, {4}}};
  const auto r = evaluate(truth, truth, eps);
  EXPECT_DOUBLE_EQ(r.precision, 1.0);
  EXPECT_DOUBLE_EQ(r.detection_accuracy, 1.0);
  EXPECT_EQ(r.delays, (std::vector<int>{1, 1}));

  const auto s = evaluate(std::vector<std::uint8_t>(5, 0), truth, eps);
  EXPECT_FALSE(s.precision_defined);
  EXPECT_DOUBLE_EQ(s.precision, 1.0);
  EXPECT_DOUBLE_EQ(s.detection_accuracy, 0.0);
  EXPECT_THROW(evaluate({0, 1}, truth, eps), DataError);
}

TEST(Evaluate, HandBuiltScenario) {
  // Three attacks over 12 minutes: A at 1-3 (caught on its 2nd minute), B at
  // 6-7 (missed), C at 9 (caught); one false alarm at minute 11.
  std::vector<std::uint8_t> truth(12, 0), pred(12, 0);
  for (std::size_t m : {1, 2, 3, 6, 7, 9}) truth[m] = 1;
  for (std::size_t m : {2, 3, 9, 11}) pred[m] = 1;
  const std::vector<Episode> eps = {{0, {1, 2, 3}}, {1, {6, 7}}, {2, {9}}};
  const auto r = evaluate(pred, truth, eps);
  EXPECT_EQ(r.tp, 3u);
  EXPECT_EQ(r.fp, 1u);
  EXPECT_EQ(r.fn, 3u);
  EXPECT_EQ(r.tn, 5u);
  EXPECT_DOUBLE_EQ(r.precision, 0.75);
  EXPECT_DOUBLE_EQ(r.detection_accuracy, 2.0 / 3.0);
  EXPECT_EQ(r.delays, (std::vector<int>{2, 1}));
  EXPECT_DOUBLE_EQ(r.fraction_within(1), 0.5);

  // Duplicating every sample leaves both rates unchanged.
  std::vector<std::uint8_t> t2 = truth, p2 = pred;
  t2.insert(t2.end(), truth.begin(), truth.end());
  p2.insert(p2.end(), pred.begin(), pred.end());
  std::vector<Episode> e2 = eps;
  for (const auto& e : eps) {
    Episode c{e.id + 3, {}};
    for (auto s : e.samples) c.samples.push_back(s + 12);
    e2.push_back(c);
  }
  const auto r2 = evaluate(p2, t2, e2);
  EXPECT_DOUBLE_EQ(r2.precision, r.precision);
  EXPECT_DOUBLE_EQ(r2.detection_accuracy, r.detection_accuracy);
}

// Binomial pmf by the term-ratio recursion, independent of lgamma.
std::vector<double> binom_pmf(std::size_t n, double p) {
  std::vector<double> f(n + 1);
  f[0] = std::pow(1.0 - p, static_cast<double>(n));
  for (std::size_t m = 0; m < n; ++m) f[m + 1] = f[m] * static_cast<double>(n - m) / static_cast<double>(m + 1) * p / (1.0 - p);
  return f;
}

TEST(MapThreshold, PublishedParameters) {
  const MapAggregatorParams p;
  const auto t = map_threshold(p);
  EXPECT_EQ(t.threshold, 5u);
  EXPECT_NEAR(t.m0, 4.21, 0.01);

  const auto h0 = binom_pmf(p.n_homes, p.p_fp);
  double tail = 0.0;
  for (std::size_t m = 5; m <= p.n_homes; ++m) tail += h0[m];
  EXPECT_NEAR(t.type1 / tail, 1.0, 1e-6);
  EXPECT_GE(t.type1, 3.5e-16);
  EXPECT_LT(t.type1, 4.5e-16);

  // Smallest count with posterior P(H1 | m) > 1/2, by direct enumeration.
  const auto h1 = binom_pmf(p.n_homes, p.q * p.p_rc + (1 - p.q) * p.p_fp);
  std::size_t first = 0;
  while (p.p_d * h1[first] <= (1 - p.p_d) * h0[first]) ++first;
  EXPECT_EQ(first, t.threshold);
  double miss = 0.0;
  for (std::size_t m = 0; m < 5; ++m) miss += h1[m];
  EXPECT_NEAR(t.type2 / miss, 1.0, 1e-6);
}

TEST(MapThreshold, FixedInfectedModel) {
  MapAggregatorParams p;
  p.model = SyncModel::fixed_infected;
  const auto t = map_threshold(p);
  // Bin(41, p_rc) + Bin(771, p_fp), enumerated directly.
  const auto a = binom_pmf(41, p.p_rc), b = binom_pmf(771, p.p_fp), h0 = binom_pmf(812, p.p_fp);
  std::size_t first = 0;
  for (;; ++first) {
    double h1 = 0.0;
    for (std::size_t i = 0; i <= std::min<std::size_t>(first, 41); ++i) h1 += a[i] * b[first - i];
    if (p.p_d * h1 > (1 - p.p_d) * h0[first]) break;
  }
  EXPECT_EQ(t.threshold, first);
  EXPECT_GT(t.m0, static_cast<double>(first) - 1.0);
  EXPECT_LE(t.m0, static_cast<double>(first));
}

TEST(MapThreshold, MonotoneInFalsePositiveRate) {
  for (auto model : {SyncModel::mixture, SyncModel::fixed_infected}) {
    MapAggregatorParams p;
    p.model = model;
    std::size_t prev = 0;
    for (double fp : {1e-7, 1e-6, 2.64e-6, 1e-5, 1e-4}) {
      p.p_fp = fp;
      const auto t = map_threshold(p).threshold;
      EXPECT_GE(t, prev);
      prev = t;
    }
  }
}

TEST(MapThreshold, StrongerAttackSignalRaisesThreshold) {
  // Raising p_rc or q moves H1 mass to larger counts, so the smallest count
  // favouring H1 goes up, not down. Closed form for the mixture model:
  // m0 = (log((1-p_d)/p_d) - n log((1-p1)/(1-p_fp))) / log(p1 (1-p_fp) / (p_fp (1-p1))).
  auto closed = [](const MapAggregatorParams& p) {
    const double p1 = p.q * p.p_rc + (1 - p.q) * p.p_fp, n = static_cast<double>(p.n_homes);
    return (std::log((1 - p.p_d) / p.p_d) - n * std::log((1 - p1) / (1 - p.p_fp))) /
           std::log(p1 * (1 - p.p_fp) / (p.p_fp * (1 - p1)));
  };
  MapAggregatorParams p;
  double prev = 0.0;
  for (double rc : {0.3, 0.5, 0.7, 0.8266, 0.95}) {
    p.p_rc = rc;
    const auto t = map_threshold(p);
    EXPECT_NEAR(t.m0, closed(p), 1e-9);
    EXPECT_GT(t.m0, prev);
    prev = t.m0;
  }
  p = {};
  prev = 0.0;
  for (double q : {0.02, 0.05, 0.1, 0.3}) {
    p.q = q;
    const auto t = map_threshold(p);
    EXPECT_NEAR(t.m0, closed(p), 1e-9);
    EXPECT_GT(t.m0, prev);
    prev = t.m0;
  }
}

TEST(MapThreshold, Errors) {
  MapAggregatorParams p;
  p.p_fp = p.p_rc;
  EXPECT_THROW(map_threshold(p), DataError);
  p = {};
  p.p_d = 0.0;
  EXPECT_THROW(map_threshold(p), DataError);
  p = {};
  p.p_rc = 1.0;
  EXPECT_THROW(map_threshold(p), DataError);
  p = {};
  p.q = 0.001;
  EXPECT_THROW(map_threshold(p), DataError);
}

TEST(AggregateSync, Examples) {
  std::vector<std::vector<std::uint8_t>> flags(6, std::vector<std::uint8_t>(4, 0));
  EXPECT_EQ(aggregate_sync(flags, 5), std::vector<std::uint8_t>(4, 0));
  for (std::size_t h = 0; h < 5; ++h) flags[h][2] = 1;
  for (std::size_t h = 0; h < 4; ++h) flags[h][1] = 1;
  EXPECT_EQ(aggregate_sync(flags, 5), (std::vector<std::uint8_t>{0, 0, 1, 0}));
  flags[5][2] = 1;  // more flags never turn a verdict off
  EXPECT_EQ(aggregate_sync(flags, 5), (std::vector<std::uint8_t>{0, 0, 1, 0}));
  EXPECT_THROW(aggregate_sync(flags, 0), DataError);
  flags[3].pop_back();
  EXPECT_THROW(aggregate_sync(flags, 5), DataError);
}

TEST(AggregateSync, NullHypothesisSimulation) {
  // 10^6 minutes of 812 homes flagging independently at p_fp.
  const MapAggregatorParams p;
  const auto thr = map_threshold(p).threshold;
  std::mt19937_64 rng(2024);
  std::binomial_distribution<std::size_t> count(p.n_homes, p.p_fp);
  std::size_t alarms = 0, max_count = 0;
  for (int t = 0; t < 1000000; ++t) {
    const auto c = count(rng);
    max_count = std::max(max_count, c);
    alarms += c >= thr;
  }
  EXPECT_EQ(alarms, 0u);
  EXPECT_LT(max_count, thr);
}

}  // namespace
}  // namespace tensorad
