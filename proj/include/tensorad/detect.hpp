#pragma once

// Supervised minute-level detection: CART trees and bagged forests with Gini
// splits, logistic regression, evaluation (precision, per-episode detection
// accuracy, delay), and the MAP count threshold for synchronized attacks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "tensorad/error.hpp"
#include "tensorad/tensor.hpp"

namespace tensorad {

// ---------------------------------------------------------------- trees

struct TreeNode {
  int feature = -1;  // -1 for a leaf
  double threshold = 0.0;
  int left = -1, right = -1;
  double p1 = 0.0;   // leaf: fraction of class-1 samples
  double n = 0.0;    // samples reaching the node
};

struct Tree {
  std::vector<TreeNode> nodes;
  std::vector<double> importance;  // impurity decrease per feature, normalized to sum 1 (or all 0)

  double predict_proba(const Eigen::Ref<const RowVector>& x) const {
    int cur = 0;
    while (nodes[static_cast<std::size_t>(cur)].feature >= 0) {
      const auto& nd = nodes[static_cast<std::size_t>(cur)];
      cur = x(nd.feature) <= nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<std::size_t>(cur)].p1;
  }

  std::size_t depth() const {
    std::vector<std::size_t> d(nodes.size(), 0);
    std::size_t best = 0;
    for (std::size_t n = 0; n < nodes.size(); ++n) {
      if (nodes[n].feature < 0) continue;
      d[static_cast<std::size_t>(nodes[n].left)] = d[n] + 1;
      d[static_cast<std::size_t>(nodes[n].right)] = d[n] + 1;
      best = std::max(best, d[n] + 1);
    }
    return best;
  }
};

struct ForestConfig {
  std::size_t n_trees = 100;
  std::size_t min_leaf = 5;
  std::size_t max_depth = 0;  // 0: unlimited
  std::size_t mtry = 0;       // 0: floor(sqrt(non-constant features))
  bool bootstrap = true;
  std::uint64_t seed = 0;
  std::size_t threads = 0;    // 0: hardware concurrency
  double threshold = 0.5;     // class 1 when mean tree probability exceeds this

  void validate() const {
    if (n_trees < 1) throw std::invalid_argument("ForestConfig.n_trees must be >= 1");
    if (min_leaf < 1) throw std::invalid_argument("ForestConfig.min_leaf must be >= 1");
  }
};

struct ForestModel {
  std::vector<Tree> trees;
  std::size_t n_features = 0;
  std::size_t mtry = 0;
  ForestConfig config;
  bool constant = false;  // trained on a single class

  double predict_row(const Eigen::Ref<const RowVector>& x) const {
    double s = 0.0;
    for (const auto& t : trees) s += t.predict_proba(x);
    return s / static_cast<double>(trees.size());
  }

  std::vector<double> predict_proba(const Matrix& x) const {
    check(x);
    std::vector<double> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] = predict_row(x.row(i));
    return out;
  }

  std::vector<std::uint8_t> predict(const Matrix& x) const {
    const auto p = predict_proba(x);
    std::vector<std::uint8_t> out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] > config.threshold ? 1 : 0;
    return out;
  }

  void check(const Matrix& x) const {
    if (static_cast<std::size_t>(x.cols()) != n_features) {
      throw DataError("forest: expected " + std::to_string(n_features) + " features, got " +
                      std::to_string(x.cols()));
    }
  }
};

namespace detail {

inline double gini(double n, double n1) {
  if (n <= 0.0) return 0.0;
  const double p = n1 / n;
  return 2.0 * p * (1.0 - p);
}

struct SplitCandidate {
  int feature = -1;
  double threshold = 0.0;
  double decrease = -1.0;
  std::size_t n_left = 0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, const std::vector<std::uint8_t>& y, const std::vector<int>& usable,
              std::size_t mtry, const ForestConfig& cfg, std::mt19937_64& rng)
      : x_(x), y_(y), usable_(usable), mtry_(mtry), cfg_(cfg), rng_(rng) {}

  Tree build(std::vector<std::size_t> samples) {
    tree_.nodes.clear();
    tree_.importance.assign(static_cast<std::size_t>(x_.cols()), 0.0);
    grow(samples, 0, samples.size(), 0);
    const double total = std::accumulate(tree_.importance.begin(), tree_.importance.end(), 0.0);
    if (total > 0.0) {
      for (auto& v : tree_.importance) v /= total;
    }
    return std::move(tree_);
  }

 private:
  int grow(std::vector<std::size_t>& s, std::size_t lo, std::size_t hi, std::size_t depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    double n1 = 0.0;
    for (std::size_t p = lo; p < hi; ++p) n1 += y_[s[p]];
    const double n = static_cast<double>(hi - lo);
    tree_.nodes.back().n = n;
    tree_.nodes.back().p1 = n1 / n;
    const bool pure = n1 == 0.0 || n1 == n;
    if (pure || hi - lo < 2 * cfg_.min_leaf || (cfg_.max_depth > 0 && depth >= cfg_.max_depth)) return id;

    const SplitCandidate best = find_split(s, lo, hi, n, n1);
    if (best.feature < 0) return id;
    tree_.importance[static_cast<std::size_t>(best.feature)] += best.decrease;
    const auto mid = std::partition(s.begin() + static_cast<std::ptrdiff_t>(lo), s.begin() + static_cast<std::ptrdiff_t>(hi),
                                    [&](std::size_t r) { return x_(static_cast<Eigen::Index>(r), best.feature) <= best.threshold; });
    const auto m = static_cast<std::size_t>(mid - s.begin());
    const int l = grow(s, lo, m, depth + 1);
    const int r = grow(s, m, hi, depth + 1);
    auto& nd = tree_.nodes[static_cast<std::size_t>(id)];
    nd.feature = best.feature;
    nd.threshold = best.threshold;
    nd.left = l;
    nd.right = r;
    return id;
  }

  // Candidate features are tried in random order; the first mtry are always
  // evaluated and further ones only while no valid split has been found.
  SplitCandidate find_split(const std::vector<std::size_t>& s, std::size_t lo, std::size_t hi, double n, double n1) {
    std::vector<int> order = usable_;
    std::shuffle(order.begin(), order.end(), rng_);
    SplitCandidate best;
    const double parent = n * gini(n, n1);
    std::vector<std::pair<double, std::uint8_t>> v(hi - lo);
    for (std::size_t t = 0; t < order.size(); ++t) {
      if (t >= mtry_ && best.feature >= 0) break;
      const int f = order[t];
      for (std::size_t p = lo; p < hi; ++p) v[p - lo] = {x_(static_cast<Eigen::Index>(s[p]), f), y_[s[p]]};
      std::sort(v.begin(), v.end());
      double l1 = 0.0;
      for (std::size_t p = 0; p + 1 < v.size(); ++p) {
        l1 += v[p].second;
        const std::size_t nl = p + 1;
        if (v[p].first == v[p + 1].first) continue;
        if (nl < cfg_.min_leaf || v.size() - nl < cfg_.min_leaf) continue;
        const double dl = static_cast<double>(nl), dr = n - dl;
        const double dec = parent - dl * gini(dl, l1) - dr * gini(dr, n1 - l1);
        if (dec > best.decrease) {
          best.feature = f;
          best.threshold = 0.5 * (v[p].first + v[p + 1].first);
          // Midpoint can round onto the upper value for adjacent doubles.
          if (best.threshold >= v[p + 1].first) best.threshold = v[p].first;
          best.decrease = dec;
          best.n_left = nl;
        }
      }
    }
    return best;
  }

  const Matrix& x_;
  const std::vector<std::uint8_t>& y_;
  const std::vector<int>& usable_;
  std::size_t mtry_;
  const ForestConfig& cfg_;
  std::mt19937_64& rng_;
  Tree tree_;
};

inline std::vector<int> non_constant_features(const Matrix& x) {
  std::vector<int> out;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    if ((x.col(c).array() != x(0, c)).any()) out.push_back(static_cast<int>(c));
  }
  return out;
}

}  // namespace detail

/// Bagged CART forest with Gini splits. Per-tree generators are derived from
/// (seed, tree index), so results do not depend on the thread count.
inline ForestModel train_forest(const Matrix& x, const std::vector<std::uint8_t>& y, const ForestConfig& cfg = {}) {
  cfg.validate();
  if (x.rows() < 1 || static_cast<std::size_t>(x.rows()) != y.size()) {
    throw DataError("train_forest: " + std::to_string(x.rows()) + " rows but " + std::to_string(y.size()) + " labels");
  }
  if (!x.allFinite()) throw DataError("train_forest: non-finite features");
  for (auto v : y) {
    if (v > 1) throw DataError("train_forest: labels must be 0 or 1");
  }
  ForestModel f;
  f.n_features = static_cast<std::size_t>(x.cols());
  f.config = cfg;
  const auto n1 = static_cast<std::size_t>(std::count(y.begin(), y.end(), std::uint8_t{1}));
  const std::vector<int> usable = detail::non_constant_features(x);
  f.mtry = cfg.mtry > 0 ? std::min<std::size_t>(cfg.mtry, std::max<std::size_t>(usable.size(), 1))
                        : std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(usable.size())))));
  f.trees.resize(cfg.n_trees);
  if (n1 == 0 || n1 == y.size() || usable.empty()) {
    // Single-class (or featureless) data: every tree is one leaf.
    f.constant = n1 == 0 || n1 == y.size();
    for (auto& t : f.trees) {
      t.nodes.assign(1, TreeNode{});
      t.nodes[0].n = static_cast<double>(y.size());
      t.nodes[0].p1 = static_cast<double>(n1) / static_cast<double>(y.size());
      t.importance.assign(f.n_features, 0.0);
    }
    return f;
  }

  const std::size_t n = y.size();
  auto build = [&](std::size_t t) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(t), 0x5eedu};
    std::mt19937_64 rng(seq);
    std::vector<std::size_t> samples(n);
    if (cfg.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (auto& s : samples) s = pick(rng);
    } else {
      std::iota(samples.begin(), samples.end(), std::size_t{0});
    }
    detail::TreeBuilder b(x, y, usable, f.mtry, cfg, rng);
    f.trees[t] = b.build(std::move(samples));
  };
  std::size_t threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, cfg.n_trees);
  if (threads <= 1) {
    for (std::size_t t = 0; t < cfg.n_trees; ++t) build(t);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t t = w; t < cfg.n_trees; t += threads) build(t);
      });
    }
    for (auto& th : pool) th.join();
  }
  return f;
}

/// Mean over trees of each tree's normalized impurity decrease; sums to 1
/// unless no tree split at all.
inline std::vector<double> gini_importance(const ForestModel& m) {
  std::vector<double> imp(m.n_features, 0.0);
  for (const auto& t : m.trees) {
    for (std::size_t f = 0; f < imp.size(); ++f) imp[f] += t.importance[f];
  }
  const double total = std::accumulate(imp.begin(), imp.end(), 0.0);
  if (total > 0.0) {
    for (auto& v : imp) v /= total;
  }
  return imp;
}

// ---------------------------------------------------------------- logistic regression

struct LogisticModel {
  Vector mean, scale;  // feature standardization
  Vector coef;         // intercept first
  std::size_t iterations = 0;

  std::vector<double> predict_proba(const Matrix& x) const {
    if (x.cols() != mean.size()) throw DataError("logistic: feature count mismatch");
    std::vector<double> out(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      double z = coef(0);
      for (Eigen::Index c = 0; c < x.cols(); ++c) z += coef(c + 1) * (x(i, c) - mean(c)) / scale(c);
      out[static_cast<std::size_t>(i)] = 1.0 / (1.0 + std::exp(-z));
    }
    return out;
  }

  std::vector<std::uint8_t> predict(const Matrix& x, double threshold = 0.5) const {
    const auto p = predict_proba(x);
    std::vector<std::uint8_t> out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] > threshold ? 1 : 0;
    return out;
  }
};

/// L2-regularized logistic regression by iteratively reweighted least
/// squares on standardized features (intercept not penalized).
inline LogisticModel train_logistic(const Matrix& x, const std::vector<std::uint8_t>& y, double l2 = 1e-4,
                                    std::size_t max_iters = 50) {
  if (x.rows() < 1 || static_cast<std::size_t>(x.rows()) != y.size()) throw DataError("train_logistic: label count mismatch");
  const Eigen::Index n = x.rows(), p = x.cols();
  LogisticModel m;
  m.mean = x.colwise().mean().transpose();
  m.scale = ((x.rowwise() - m.mean.transpose()).array().square().colwise().mean()).sqrt().transpose();
  for (Eigen::Index c = 0; c < p; ++c) {
    if (m.scale(c) == 0.0) m.scale(c) = 1.0;
  }
  Matrix z(n, p + 1);
  z.col(0).setOnes();
  z.rightCols(p) = (x.rowwise() - m.mean.transpose()).array().rowwise() / m.scale.transpose().array();
  Vector yy(n);
  for (Eigen::Index i = 0; i < n; ++i) yy(i) = y[static_cast<std::size_t>(i)];
  m.coef = Vector::Zero(p + 1);
  Matrix pen = Matrix::Identity(p + 1, p + 1) * l2 * static_cast<double>(n);
  pen(0, 0) = 0.0;
  for (std::size_t it = 1; it <= max_iters; ++it) {
    const Vector eta = z * m.coef;
    Vector mu(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      mu(i) = 1.0 / (1.0 + std::exp(-eta(i)));
      w(i) = std::max(mu(i) * (1.0 - mu(i)), 1e-10);
    }
    const Matrix h = z.transpose() * w.asDiagonal() * z + pen;
    const Vector g = z.transpose() * (yy - mu) - pen * m.coef;
    const Vector step = h.ldlt().solve(g);
    m.coef += step;
    m.iterations = it;
    if (!m.coef.allFinite()) throw NumericError("train_logistic: diverged");
    if (step.norm() < 1e-8 * (1.0 + m.coef.norm())) break;
  }
  return m;
}

// ---------------------------------------------------------------- evaluation

/// Minutes (sample indices, in time order) of one attack at one entity.
struct Episode {
  std::size_t id = 0;
  std::vector<std::size_t> samples;
};

struct EvalReport {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 1.0;
  bool precision_defined = false;  // false when nothing was flagged
  double detection_accuracy = 0.0;
  std::size_t episodes = 0, detected = 0;
  std::vector<int> delays;  // per detected episode: first flagged minute - start + 1

  double fraction_within(int minutes) const {
    if (delays.empty()) return 0.0;
    const auto c = std::count_if(delays.begin(), delays.end(), [&](int d) { return d <= minutes; });
    return static_cast<double>(c) / static_cast<double>(delays.size());
  }
};

inline EvalReport evaluate(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& truth,
                           const std::vector<Episode>& episodes) {
  if (pred.size() != truth.size()) {
    throw DataError("evaluate: " + std::to_string(pred.size()) + " predictions for " + std::to_string(truth.size()) +
                    " labels");
  }
  EvalReport r;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] && truth[i]) ++r.tp;
    else if (pred[i]) ++r.fp;
    else if (truth[i]) ++r.fn;
    else ++r.tn;
  }
  r.precision_defined = r.tp + r.fp > 0;
  r.precision = r.precision_defined ? static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fp) : 1.0;
  r.episodes = episodes.size();
  for (const auto& e : episodes) {
    for (std::size_t k = 0; k < e.samples.size(); ++k) {
      if (e.samples[k] >= pred.size()) throw DataError("evaluate: episode sample out of range");
      if (pred[e.samples[k]]) {
        ++r.detected;
        r.delays.push_back(static_cast<int>(k) + 1);
        break;
      }
    }
  }
  r.detection_accuracy = r.episodes ? static_cast<double>(r.detected) / static_cast<double>(r.episodes) : 0.0;
  return r;
}

// ---------------------------------------------------------------- MAP aggregation

/// How reporting homes are distributed under a synchronized attack.
enum class SyncModel {
  mixture,        // each home independently infected with prob q: Bin(n, q p_rc + (1-q) p_fp)
  fixed_infected  // exactly ceil(q n) infected: Bin(k, p_rc) + Bin(n-k, p_fp)
};

struct MapAggregatorParams {
  std::size_t n_homes = 812;
  double p_d = 0.0014;
  double p_fp = 2.64e-6;
  double p_rc = 0.8266;
  double q = 0.05;
  SyncModel model = SyncModel::mixture;
};

struct MapThreshold {
  double m0 = 0.0;        // smallest real count where the posterior favours an attack
  std::size_t threshold = 0;
  double type1 = 0.0;     // P(count >= threshold | no attack)
  double type2 = 0.0;     // P(count < threshold | attack)
};

namespace detail {

inline double log_binom_pmf(std::size_t k, std::size_t n, double p) {
  if (k > n) return -std::numeric_limits<double>::infinity();
  const double dk = static_cast<double>(k), dn = static_cast<double>(n);
  return std::lgamma(dn + 1) - std::lgamma(dk + 1) - std::lgamma(dn - dk + 1) + dk * std::log(p) +
         (dn - dk) * std::log1p(-p);
}

// pmf of Bin(k, a) + Bin(n-k, b), all counts 0..n.
inline std::vector<double> convolved_pmf(std::size_t k, double a, std::size_t n, double b) {
  std::vector<double> pa(k + 1), pb(n - k + 1), out(n + 1, 0.0);
  for (std::size_t i = 0; i <= k; ++i) pa[i] = std::exp(log_binom_pmf(i, k, a));
  for (std::size_t i = 0; i <= n - k; ++i) pb[i] = std::exp(log_binom_pmf(i, n - k, b));
  for (std::size_t i = 0; i <= k; ++i) {
    for (std::size_t j = 0; j <= n - k; ++j) out[i + j] += pa[i] * pb[j];
  }
  return out;
}

}  // namespace detail

/// Two-hypothesis MAP rule on the number m of homes reporting an attack in
/// the same minute. H0: Bin(n, p_fp); H1 per `model`; prior P(H1) = p_d.
inline MapThreshold map_threshold(const MapAggregatorParams& p) {
  auto prob = [](double v) { return v > 0.0 && v < 1.0; };
  if (!prob(p.p_d) || !prob(p.p_fp) || !prob(p.p_rc) || !(p.q > 0.0 && p.q <= 1.0)) {
    throw DataError("map_threshold: probabilities must lie strictly between 0 and 1");
  }
  if (p.p_rc <= p.p_fp) throw DataError("map_threshold: p_rc must exceed p_fp for an informative threshold");
  if (p.q * static_cast<double>(p.n_homes) < 1.0 - 1e-9) throw DataError("map_threshold: q * n_homes < 1");
  const std::size_t n = p.n_homes;
  const double prior = std::log(p.p_d) - std::log1p(-p.p_d);

  MapThreshold out;
  std::vector<double> log_h1(n + 1), log_h0(n + 1);
  for (std::size_t m = 0; m <= n; ++m) log_h0[m] = detail::log_binom_pmf(m, n, p.p_fp);
  if (p.model == SyncModel::mixture) {
    const double p1 = p.q * p.p_rc + (1.0 - p.q) * p.p_fp;
    for (std::size_t m = 0; m <= n; ++m) log_h1[m] = detail::log_binom_pmf(m, n, p1);
    // The log posterior odds are linear in m.
    const double slope = std::log(p1 / p.p_fp) - std::log((1.0 - p1) / (1.0 - p.p_fp));
    const double icpt = prior + static_cast<double>(n) * std::log((1.0 - p1) / (1.0 - p.p_fp));
    out.m0 = std::max(0.0, -icpt / slope);
  } else {
    const auto k = static_cast<std::size_t>(std::ceil(p.q * static_cast<double>(n) - 1e-9));
    const auto pmf = detail::convolved_pmf(k, p.p_rc, n, p.p_fp);
    for (std::size_t m = 0; m <= n; ++m) log_h1[m] = pmf[m] > 0.0 ? std::log(pmf[m]) : -std::numeric_limits<double>::infinity();
    // First sign change of the log odds, interpolated linearly between counts.
    out.m0 = static_cast<double>(n);
    double prev = prior + log_h1[0] - log_h0[0];
    if (prev >= 0.0) out.m0 = 0.0;
    for (std::size_t m = 1; m <= n && out.m0 == static_cast<double>(n); ++m) {
      const double cur = prior + log_h1[m] - log_h0[m];
      if (cur >= 0.0) out.m0 = static_cast<double>(m - 1) + (-prev) / (cur - prev);
      prev = cur;
    }
  }
  out.threshold = static_cast<std::size_t>(std::ceil(out.m0));
  for (std::size_t m = 0; m <= n; ++m) {
    if (m >= out.threshold) out.type1 += std::exp(log_h0[m]);
    else out.type2 += std::exp(log_h1[m]);
  }
  return out;
}

/// Per-minute verdict: true when at least `threshold` homes flag the minute.
/// `flags` is homes x minutes.
inline std::vector<std::uint8_t> aggregate_sync(const std::vector<std::vector<std::uint8_t>>& flags,
                                                std::size_t threshold) {
  if (threshold < 1) throw DataError("aggregate_sync: threshold must be >= 1");
  if (flags.empty()) return {};
  const std::size_t T = flags.front().size();
  std::vector<std::size_t> count(T, 0);
  for (const auto& h : flags) {
    if (h.size() != T) throw DataError("aggregate_sync: homes have different minute counts");
    for (std::size_t t = 0; t < T; ++t) count[t] += h[t] ? 1 : 0;
  }
  std::vector<std::uint8_t> out(T);
  for (std::size_t t = 0; t < T; ++t) out[t] = count[t] >= threshold ? 1 : 0;
  return out;
}

}  // namespace tensorad
