#include <gtest/gtest.h>

#include <sstream>

#include "tensorad/dataset_io.hpp"
#include "tensorad/json_io.hpp"
#include "test_util.hpp"

namespace tensorad {
namespace {

TEST(DatasetIo, TrafficRoundTripIsExact) {
  auto [days, gt] = datagen::inject_attacks(datagen::gen_traffic(3, 2, 4), datagen::AttackConfig{.q = 0.34}, 5);
  std::stringstream t, a, i;
  io::write_traffic(t, days);
  io::write_attacks(a, gt);
  io::write_infected(i, gt);
  const auto gt2 = io::read_ground_truth(a, i);
  EXPECT_EQ(gt2.infected, gt.infected);
  ASSERT_EQ(gt2.events.size(), gt.events.size());
  const auto back = io::read_traffic(t, gt2);
  ASSERT_EQ(back.size(), days.size());
  for (std::size_t k = 0; k < days.size(); ++k) {
    EXPECT_EQ(back[k].entity, days[k].entity);
    EXPECT_EQ(back[k].day, days[k].day);
    EXPECT_EQ(back[k].series, days[k].series);
    EXPECT_EQ(back[k].attack, days[k].attack);
  }
}

TEST(DatasetIo, TrafficRowCount) {
  const auto days = datagen::gen_traffic(2, 2, 1);
  std::stringstream t;
  io::write_traffic(t, days);
  std::size_t lines = 0;
  for (std::string s; std::getline(t, s);) ++lines;
  EXPECT_EQ(lines, 1u + 2 * 2 * 1440 * 4);
}

TEST(DatasetIo, LabelsCoverInfectedAttackMinutes) {
  auto [days, gt] = datagen::inject_attacks(datagen::gen_traffic(4, 3, 2), datagen::AttackConfig{.q = 0.5}, 3);
  std::stringstream l;
  io::write_labels(l, gt);
  std::size_t rows = 0;
  for (std::string s; std::getline(l, s);) ++rows;
  std::size_t attacked = 0;
  for (const auto& d : days) attacked += static_cast<std::size_t>(std::count(d.attack.begin(), d.attack.end(), 1));
  EXPECT_EQ(rows - 1, attacked);
}

TEST(DatasetIo, BadAttackSpanRejected) {
  std::stringstream a("id,day,start,duration,vector,name\n0,0,1439,5,0,x\n"), i("entity\nu0000\n");
  EXPECT_THROW(io::read_ground_truth(a, i), DataError);
}

TEST(DatasetIo, QosTopologyEventsRoundTrip) {
  const auto topo = datagen::make_tree(6, 2, 2);
  std::vector<datagen::QosEvent> ev = {{datagen::QosEventType::outage, topo.name[3], 1, 100, 200, 0.0}};
  const auto days = datagen::gen_qos(6, 2, topo, ev, 9);
  std::stringstream q, tp, e;
  io::write_qos(q, days);
  io::write_topology(tp, topo);
  io::write_events(e, ev);
  const auto back = io::read_qos(q);
  ASSERT_EQ(back.size(), days.size());
  for (std::size_t k = 0; k < days.size(); ++k) {
    EXPECT_EQ(back[k].missing, days[k].missing);
    EXPECT_EQ(back[k].server_offline, days[k].server_offline);
    EXPECT_EQ(back[k].loss, days[k].loss);
    EXPECT_EQ(back[k].cross_traffic, days[k].cross_traffic);
  }
  const auto t2 = io::read_topology(tp);
  EXPECT_EQ(t2.name, topo.name);
  EXPECT_EQ(t2.parent, topo.parent);
  EXPECT_EQ(t2.entity_leaf, topo.entity_leaf);
  const auto e2 = io::read_events(e);
  ASSERT_EQ(e2.size(), 1u);
  EXPECT_EQ(e2[0].node, ev[0].node);
  EXPECT_EQ(e2[0].start, 100);
  EXPECT_EQ(e2[0].end, 200);
}

TEST(DatasetIo, QosFlagsMustBeBinary) {
  std::stringstream q("entity,metric,minute,value\n");
  for (int m = 0; m < 1440; ++m) {
    for (const auto& n : io::kQosMetricNames) q << "u0000," << n << ',' << m << ',' << (n == "missing" && m == 3 ? 0.5 : 0.0) << '\n';
  }
  EXPECT_THROW(io::read_qos(q), DataError);
}

TEST(JsonIo, CpModelRoundTrip) {
  std::mt19937_64 rng(3);
  auto m = CpModel::from_factors(testing::gaussian_matrix(5, 2, rng), testing::gaussian_matrix(4, 2, rng),
                                 testing::gaussian_matrix(6, 2, rng));
  m.weights << 2.5, 0.5;
  m.info.fit_history = {3.0, 2.0};
  const CpModel back = cp_model_from_json(json::parse(to_json(m).dump()));
  EXPECT_EQ(back.A, m.A);
  EXPECT_EQ(back.B, m.B);
  EXPECT_EQ(back.C, m.C);
  EXPECT_EQ(back.weights, m.weights);
  EXPECT_EQ(back.info.fit_history, m.info.fit_history);
}

TEST(JsonIo, MissingFieldIsNamed) {
  json j = to_json(ScalingParams{});
  j.erase("max");
  try {
    scaling_from_json(j);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("max"), std::string::npos);
  }
}

TEST(JsonIo, ForestRoundTripPredictsIdentically) {
  std::mt19937_64 rng(8);
  Matrix x = testing::gaussian_matrix(200, 3, rng);
  std::vector<std::uint8_t> y(200);
  for (Eigen::Index i = 0; i < 200; ++i) y[static_cast<std::size_t>(i)] = x(i, 0) + 0.5 * x(i, 2) > 0.0;
  const ForestModel f = train_forest(x, y, ForestConfig{.n_trees = 15, .seed = 2, .threads = 1});
  const ForestModel back = forest_from_json(json::parse(to_json(f).dump()));
  EXPECT_EQ(back.predict_proba(x), f.predict_proba(x));
  EXPECT_EQ(gini_importance(back), gini_importance(f));
}

TEST(JsonIo, ForestWithDanglingChildRejected) {
  std::mt19937_64 rng(1);
  Matrix x = testing::gaussian_matrix(50, 2, rng);
  std::vector<std::uint8_t> y(50);
  for (Eigen::Index i = 0; i < 50; ++i) y[static_cast<std::size_t>(i)] = x(i, 1) > 0.0;
  json j = to_json(train_forest(x, y, ForestConfig{.n_trees = 2, .seed = 1, .threads = 1}));
  auto& nodes = j["trees"][0]["nodes"];
  ASSERT_GE(nodes[0][0].get<int>(), 0);  // root splits
  nodes[0][2] = 999;
  EXPECT_THROW(forest_from_json(j), DataError);
}

TEST(JsonIo, GmmRoundTrip) {
  Gmm2 g;
  g.weight = {0.3, 0.7};
  g.mean = {Vector::Constant(2, 1.0), Vector::Constant(2, -1.0)};
  g.var = {Vector::Constant(2, 0.5), Vector::Constant(2, 2.0)};
  const Gmm2 back = gmm_from_json(json::parse(to_json(g).dump()));
  EXPECT_EQ(back.weight, g.weight);
  EXPECT_EQ(back.mean[1], g.mean[1]);
  EXPECT_EQ(back.var[0], g.var[0]);
}

}  // namespace
}  // namespace tensorad
