#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "tensorad/cluster_qos.hpp"
#include "test_util.hpp"

namespace tensorad {
namespace {

using datagen::QosDay;

QosDay flat_day(std::size_t entity, std::size_t day, double lat = 20.0, double loss = 0.01) {
  QosDay d;
  d.entity = entity;
  d.day = day;
  d.latency.assign(1440, lat);
  d.loss.assign(1440, loss);
  d.cross_traffic.assign(1440, 0.0);
  d.missing.assign(1440, 0);
  d.server_offline.assign(1440, 0);
  return d;
}

TEST(QosPreprocess, CleanDayFullyObserved) {
  const auto q = qos_preprocess({flat_day(0, 0)});
  ASSERT_EQ(q.rows(), 1u);
  EXPECT_EQ(q.x.observed_count(), 2u * 1440u);
  EXPECT_DOUBLE_EQ(q.x.at(0, 0, 5), std::log1p(20.0));
  EXPECT_DOUBLE_EQ(q.x.at(0, 1, 5), std::log1p(0.01));
  EXPECT_TRUE(q.dropped.empty());
}

TEST(QosPreprocess, EtaDropsSparseDays) {
  auto sparse = flat_day(1, 0);
  for (std::size_t m = 500; m < 1440; ++m) sparse.cross_traffic[m] = 3.0;  // 500 samples survive
  const auto q = qos_preprocess({flat_day(0, 0), sparse});
  EXPECT_EQ(q.rows(), 1u);
  EXPECT_EQ(q.dropped, std::vector<std::size_t>{1});
  QosPreprocessConfig loose;
  loose.eta = 500;
  EXPECT_EQ(qos_preprocess({flat_day(0, 0), sparse}, loose).rows(), 2u);
  EXPECT_THROW(qos_preprocess({sparse}), DataError);
  loose.theta = 0.0;
  EXPECT_THROW(qos_preprocess({sparse}, loose), DataError);

  // Missing minutes carry loss = 1 and count; server-offline minutes do not.
  auto outage = flat_day(2, 0);
  for (std::size_t m = 0; m < 700; ++m) outage.missing[m] = 1;
  auto offline = flat_day(3, 0);
  for (std::size_t m = 0; m < 700; ++m) offline.server_offline[m] = 1;
  const auto q2 = qos_preprocess({outage, offline});
  EXPECT_EQ(q2.rows(), 1u);
  EXPECT_EQ(q2.dropped, std::vector<std::size_t>{1});
}

TEST(QosPreprocess, MissingEncodedAsLossOne) {
  auto d = flat_day(0, 0);
  for (std::size_t m = 780; m < 1020; ++m) d.missing[m] = 1;     // outage 13:00-17:00
  for (std::size_t m = 100; m < 110; ++m) d.server_offline[m] = 1;
  d.cross_traffic[50] = 2.6;
  const auto q = qos_preprocess({d});
  const std::size_t n = 1;
  for (std::size_t m = 0; m < 1440; ++m) {
    const bool out = m >= 780 && m < 1020, off = m >= 100 && m < 110, busy = m == 50;
    EXPECT_EQ(q.x.observed(0 + n * (0 + 2 * m)), !(out || off || busy)) << m;
    EXPECT_EQ(q.x.observed(0 + n * (1 + 2 * m)), !(off || busy)) << m;
    EXPECT_EQ(q.is_loss_one(0, m), out) << m;
    if (out) {
      EXPECT_DOUBLE_EQ(q.x.at(0, 1, m), std::log1p(1.0));
    }
  }
}

TEST(QosPreprocess, OutageFromEventPlan) {
  const auto topo = datagen::make_tree(6, 1, 2);
  const std::vector<datagen::QosEvent> ev = {{datagen::QosEventType::outage, "r0a1", 1, 600, 700, 0.0}};
  const auto days = datagen::gen_qos(6, 2, topo, ev, 4);
  const auto q = qos_preprocess(days);
  const int node = topo.node("r0a1");
  for (std::size_t i = 0; i < q.rows(); ++i) {
    const auto& d = days[q.source[i]];
    const bool hit = d.day == 1 && topo.is_ancestor(node, topo.entity_leaf[d.entity]);
    std::size_t ones = 0;
    for (std::size_t m = 0; m < 1440; ++m) ones += q.is_loss_one(i, m);
    EXPECT_EQ(ones, hit ? 100u : 0u);
  }
}

TEST(SeriesStats, Analytic) {
  const auto z = series_stats(std::vector<double>(10, 0.0));
  EXPECT_EQ(z.mean, 0.0);
  EXPECT_EQ(z.std, 0.0);
  EXPECT_EQ(z.p95, 0.0);
  const auto c = series_stats(std::vector<double>(7, 2.5));
  EXPECT_DOUBLE_EQ(c.mean, 2.5);
  EXPECT_DOUBLE_EQ(c.std, 0.0);
  EXPECT_DOUBLE_EQ(c.p95, 2.5);
  EXPECT_FALSE(series_stats({}).present);
}

TEST(SeriesStats, PercentileMatchesSort) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1.0);
  for (std::size_t n : {1u, 2u, 19u, 20u, 21u, 100u, 1440u}) {
    std::vector<double> v(n);
    for (auto& x : v) x = g(rng);
    auto s = v;
    std::sort(s.begin(), s.end());
    // Smallest value with at least 95% of the sample at or below it.
    std::size_t idx = 0;
    while (static_cast<double>(idx + 1) < 0.95 * static_cast<double>(n)) ++idx;
    EXPECT_EQ(series_stats(v).p95, s[idx]) << n;
  }
}

TEST(QosStats, NineFeatures) {
  auto d = flat_day(0, 0);
  for (std::size_t m = 0; m < 100; ++m) d.missing[m] = 1;
  const auto q = qos_preprocess({d});
  const Tensor3 zero(q.x.dims(), std::vector<double>(q.x.size(), 0.0),
                     std::vector<std::uint8_t>(q.x.mask().begin(), q.x.mask().end()));
  const auto f = qos_residual_stats(zero, q);
  ASSERT_EQ(f.f.rows(), 1);
  ASSERT_EQ(f.f.cols(), 9);
  EXPECT_EQ(f.f.cwiseAbs().maxCoeff(), 0.0);

  // Residual = 1 on loss=1 minutes, 0 elsewhere: only the all-samples stats see it.
  std::vector<double> v(q.x.size(), 0.0);
  for (std::size_t m = 0; m < 100; ++m) v[0 + 1 * (1 + 2 * m)] = 1.0;
  const auto g = qos_residual_stats(Tensor3(q.x.dims(), v, std::vector<std::uint8_t>(q.x.mask().begin(), q.x.mask().end())), q);
  EXPECT_EQ(g.f(0, 3), 0.0);
  EXPECT_NEAR(g.f(0, 6), 100.0 / 1440.0, 1e-12);
  EXPECT_EQ(g.ex1_present[0], 1);
}

TEST(QosStats, AllLossOneFlagsExcludedSeries) {
  auto d = flat_day(0, 0);
  std::fill(d.missing.begin(), d.missing.begin() + 1440, 1);
  d.missing[0] = 0;  // one measured minute
  QosPreprocessConfig cfg;
  cfg.eta = 1;
  auto q = qos_preprocess({d}, cfg);
  // Hide the only measured loss sample.
  std::vector<std::uint8_t> mask(q.x.mask().begin(), q.x.mask().end());
  mask[0 + 1 * (1 + 2 * 0)] = 0;
  const Tensor3 r(q.x.dims(), std::vector<double>(q.x.size(), 0.5), mask);
  const auto f = qos_residual_stats(r, q);
  EXPECT_EQ(f.ex1_present[0], 0);
  EXPECT_EQ(f.f(0, 3), 0.0);
  EXPECT_DOUBLE_EQ(f.f(0, 6), 0.5);
}

Matrix blobs(std::size_t per, std::size_t k, double sep, std::uint64_t seed, Eigen::Index dim = 9) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix centers = testing::gaussian_matrix(static_cast<Eigen::Index>(k), dim, seed + 100) * sep;
  Matrix x(static_cast<Eigen::Index>(per * k), dim);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) x(i, j) = centers(i / static_cast<Eigen::Index>(per), j) + g(rng);
  }
  return x;
}

TEST(ZScore, UnitMoments) {
  Matrix x = testing::gaussian_matrix(200, 9, 3) * 5.0;
  x.col(2).array() += 40.0;
  x.col(4).setConstant(3.0);
  const auto z = ZScore::fit(x);
  const Matrix y = z.apply(x);
  for (Eigen::Index c = 0; c < 9; ++c) {
    EXPECT_NEAR(y.col(c).mean(), 0.0, 1e-9);
    const double sd = std::sqrt((y.col(c).array() - y.col(c).mean()).square().mean());
    EXPECT_NEAR(sd, c == 4 ? 0.0 : 1.0, 1e-9);
  }
}

TEST(KMeans, SingleCluster) {
  const Matrix x = testing::gaussian_matrix(50, 3, 1);
  const auto m = kmeans(x, 1, 0);
  EXPECT_LT(m.centroids.cwiseAbs().maxCoeff(), 1e-12);  // mean of z-scored points
  EXPECT_NEAR(m.inertia, 50.0 * 3.0, 1e-9);
}

TEST(KMeans, SeparatesBlobs) {
  const Matrix x = blobs(40, 2, 10.0, 2);
  const auto m = kmeans(x, 2, 5);
  for (std::size_t i = 1; i < 40; ++i) EXPECT_EQ(m.labels[i], m.labels[0]);
  for (std::size_t i = 41; i < 80; ++i) EXPECT_EQ(m.labels[i], m.labels[40]);
  EXPECT_NE(m.labels[0], m.labels[40]);
  EXPECT_EQ(m.predict(x), m.labels);
}

TEST(KMeans, WcssNonIncreasing) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const Matrix x = testing::gaussian_matrix(300, 9, 20 + s);
    KMeansConfig cfg;
    cfg.n_init = 1;
    const auto m = kmeans(x, 5, s, cfg);
    for (std::size_t i = 1; i < m.inertia_history.size(); ++i) {
      EXPECT_LE(m.inertia_history[i], m.inertia_history[i - 1] + 1e-9);
    }
    // Every point sits at its nearest centroid.
    EXPECT_EQ(m.predict(x), m.labels);
  }
}

TEST(KMeans, Errors) {
  Matrix x = Matrix::Ones(6, 2);
  x.row(0) << 2, 2;
  EXPECT_NO_THROW(kmeans(x, 2, 0));
  EXPECT_THROW(kmeans(x, 3, 0), DataError);
  EXPECT_THROW(kmeans(x, 0, 0), DataError);
}

TEST(Elbow, FindsPlantedClusters) {
  const Matrix x = blobs(60, 5, 8.0, 7);
  const auto e = elbow_select(x, 1, 10, 3);
  EXPECT_EQ(e.chosen, 5u);
  EXPECT_FALSE(e.low_confidence);
  ASSERT_EQ(e.inertia.size(), 10u);
}

TEST(Elbow, InertiaDecreasesOnGenericData) {
  const Matrix x = testing::gaussian_matrix(300, 9, 8);
  const auto e = elbow_select(x, 1, 8, 3);
  for (std::size_t i = 1; i < e.inertia.size(); ++i) EXPECT_LT(e.inertia[i], e.inertia[i - 1]);
}

TEST(Elbow, SingleBlobIsLowConfidence) {
  const Matrix x = testing::gaussian_matrix(400, 9, 9);
  EXPECT_TRUE(elbow_select(x, 1, 10, 3).low_confidence);
  EXPECT_THROW(elbow_select(x, 4, 3, 1), DataError);
}

TEST(Summaries, IdenticalDays) {
  auto d = flat_day(0, 0);
  for (std::size_t m = 0; m < 1440; ++m) d.latency[m] = 10.0 + static_cast<double>(m % 7);
  for (std::size_t m = 300; m < 360; ++m) d.missing[m] = 1;
  std::vector<QosDay> days = {d, d, d};
  days[1].entity = 1;
  days[2].entity = 2;
  const auto q = qos_preprocess(days);
  const auto s = summarize_clusters({1, 1, 1}, 2, q, days);
  EXPECT_EQ(s[0].size, 0u);
  EXPECT_EQ(s[1].size, 3u);
  for (std::size_t m = 0; m < 1440; ++m) {
    const bool miss = m >= 300 && m < 360;
    if (miss) {
      EXPECT_TRUE(std::isnan(s[1].latency[m]));
      EXPECT_EQ(s[1].loss[m], 1.0);
      EXPECT_EQ(s[1].missing[m], 1.0);
    } else {
      EXPECT_DOUBLE_EQ(s[1].latency[m], static_cast<double>(m % 7));
      EXPECT_DOUBLE_EQ(s[1].loss[m], 0.01);
      EXPECT_EQ(s[1].missing[m], 0.0);
    }
  }
  EXPECT_EQ(*std::min_element(s[1].latency.begin(), s[1].latency.begin() + 300), 0.0);
  EXPECT_NEAR(s[1].missing_fraction, 60.0 / 1440.0, 1e-12);
}

TEST(Summaries, NamingBySummaryThresholds) {
  std::vector<ClusterSummary> s(6);
  auto set = [&](std::size_t c, double lat, double loss, double miss) {
    s[c].size = 10;
    s[c].mean_latency = lat;
    s[c].mean_loss = loss;
    s[c].missing_fraction = miss;
  };
  set(0, 1.0, 0.001, 0.0);
  set(1, 1.5, 0.05, 0.001);
  set(2, 8.0, 0.01, 0.0);
  set(3, 1.0, 0.002, 0.15);
  set(4, 1.2, 0.08, 0.10);
  name_clusters(s);
  EXPECT_EQ(s[0].name, "C1");
  EXPECT_EQ(s[1].name, "C2");
  EXPECT_EQ(s[2].name, "C3");
  EXPECT_EQ(s[3].name, "C4");
  EXPECT_EQ(s[4].name, "C5");
  EXPECT_EQ(s[5].name, "empty");

  // Two outage clusters at baseline loss are both plain unavailability.
  set(4, 1.2, 0.0015, 0.10);
  name_clusters(s);
  EXPECT_EQ(s[3].name, "C4");
  EXPECT_EQ(s[4].name, "C4");
  EXPECT_EQ(s[2].name, "C3");
}

TEST(Spatial, FractionsPartitionUnity) {
  const auto topo = datagen::make_tree(12, 2, 2);
  const auto days = datagen::gen_qos(12, 3, topo, {}, 2);
  const auto q = qos_preprocess(days);
  std::vector<int> labels(q.rows());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 3);
  const auto regions = spatial_correlate(labels, 3, q, days, topo);
  ASSERT_EQ(regions.size(), topo.size());
  for (const auto& r : regions) {
    for (std::size_t d = 0; d < 3; ++d) {
      ASSERT_GT(r.count[d], 0u);
      double s = 0.0;
      for (double f : r.fraction[d]) s += f;
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
  EXPECT_EQ(regions[0].count[0], 12u);

  // A single-user node whose days all share one cluster.
  std::vector<int> ones(q.rows(), 1);
  const auto leaf = topo.entity_leaf[4];
  const auto r1 = spatial_correlate(ones, 3, q, days, topo)[static_cast<std::size_t>(leaf)];
  for (std::size_t d = 0; d < 3; ++d) EXPECT_EQ(r1.fraction[d][1], 1.0);
  EXPECT_EQ(cluster_fraction_series(r1, 1), std::vector<double>(3, 1.0));

  datagen::Topology small = datagen::make_tree(5, 1, 1);
  EXPECT_THROW(spatial_correlate(labels, 3, q, days, small), DataError);
}

TEST(Spatial, RelabelingPermutesReports) {
  const auto topo = datagen::make_tree(10, 2, 1);
  const auto days = datagen::gen_qos(10, 2, topo, {}, 3);
  const auto q = qos_preprocess(days);
  std::vector<int> a(q.rows()), b(q.rows());
  const int perm[3] = {2, 0, 1};
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = static_cast<int>((i * 7) % 3);
    b[i] = perm[a[i]];
  }
  const auto ra = spatial_correlate(a, 3, q, days, topo), rb = spatial_correlate(b, 3, q, days, topo);
  const auto sa = summarize_clusters(a, 3, q, days), sb = summarize_clusters(b, 3, q, days);
  for (int c = 0; c < 3; ++c) {
    const auto pc = static_cast<std::size_t>(perm[c]);
    for (std::size_t n = 0; n < ra.size(); ++n) {
      for (std::size_t d = 0; d < 2; ++d) EXPECT_EQ(ra[n].fraction[d][static_cast<std::size_t>(c)], rb[n].fraction[d][pc]);
    }
    EXPECT_EQ(sa[static_cast<std::size_t>(c)].size, sb[pc].size);
    EXPECT_EQ(sa[static_cast<std::size_t>(c)].mean_loss, sb[pc].mean_loss);
  }
}

}  // namespace
}  // namespace tensorad
