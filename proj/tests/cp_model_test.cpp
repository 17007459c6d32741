#include <gtest/gtest.h>

#include <random>

#include "tensorad/cp_model.hpp"
#include "test_util.hpp"

namespace tensorad {
namespace {

using testing::brute_force_reconstruct;
using testing::gaussian_matrix;
using testing::rel_error;

struct Planted {
  Matrix A, B, C;
  Tensor3 x;
};

Planted planted(Dims d, Eigen::Index R, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Planted p;
  p.A = gaussian_matrix(static_cast<Eigen::Index>(d.I), R, rng);
  p.B = gaussian_matrix(static_cast<Eigen::Index>(d.J), R, rng);
  p.C = gaussian_matrix(static_cast<Eigen::Index>(d.K), R, rng);
  p.x = brute_force_reconstruct(p.A, p.B, p.C);
  return p;
}

AlsConfig tight(std::uint64_t seed) {
  AlsConfig cfg;
  cfg.max_iters = 3000;
  cfg.rel_change_tol = 1e-12;
  cfg.seed = seed;
  return cfg;
}

TEST(AlsFit, RankOnePositiveNoiseless) {
  Matrix a(3, 1), b(2, 1), c(4, 1);
  a << 1, 2, 3;
  b << 0.5, 1.5;
  c << 1, 1, 2, 3;
  const Tensor3 x = brute_force_reconstruct(a, b, c);
  const CpModel m = als_fit(x, 1, {});
  EXPECT_LT(rel_error(x, reconstruct(m)), 1e-8);
}

TEST(AlsFit, RecoversRandomRankThree) {
  const Planted p = planted({10, 4, 20}, 3, 101);
  const CpModel m = als_fit(p.x, 3, tight(1));
  EXPECT_LT(rel_error(p.x, reconstruct(m)), 1e-6);
  const CpModel truth = CpModel::from_factors(p.A, p.B, p.C);
  const Alignment al = align_factors(truth, m);
  for (double c : al.column_tcc) EXPECT_GT(c, 0.99);
}

TEST(AlsFit, ExactRecoveryAcrossSeeds) {
  int passes = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Planted p = planted({12, 6, 16}, 3, 500 + seed);
    const CpModel m = als_fit(p.x, 3, tight(seed));
    const Alignment al = align_factors(CpModel::from_factors(p.A, p.B, p.C), m);
    const bool ok = rel_error(p.x, reconstruct(m)) < 1e-6 &&
                    *std::min_element(al.column_tcc.begin(), al.column_tcc.end()) > 0.99;
    passes += ok ? 1 : 0;
  }
  EXPECT_GE(passes, 9);
}

// Oracle: one ALS sweep computed with the explicit pseudo-inverse formulas.
TEST(AlsFit, SweepMatchesExplicitLeastSquares) {
  std::mt19937_64 rng(77);
  const Tensor3 x = testing::random_tensor({5, 3, 7}, rng);
  const Matrix A0 = gaussian_matrix(5, 2, rng), B0 = gaussian_matrix(3, 2, rng),
               C0 = gaussian_matrix(7, 2, rng);
  AlsConfig cfg;
  cfg.max_iters = 1;
  cfg.normalize = false;
  cfg.warm_start = CpModel::from_factors(A0, B0, C0);
  const CpModel m = als_fit(x, 2, cfg);

  const Matrix A1 = lsq_rows(unfold(x, 1), khatri_rao(C0, B0).transpose());
  const Matrix B1 = lsq_rows(unfold(x, 2), khatri_rao(C0, A1).transpose());
  const Matrix C1 = lsq_rows(unfold(x, 3), khatri_rao(B1, A1).transpose());
  EXPECT_LT((m.A - A1).norm() / A1.norm(), 1e-9);
  EXPECT_LT((m.B - B1).norm() / B1.norm(), 1e-9);
  EXPECT_LT((m.C - C1).norm() / C1.norm(), 1e-9);
}

void expect_monotone(const FitInfo& info, double scale) {
  for (std::size_t n = 1; n < info.fit_history.size(); ++n) {
    EXPECT_LE(info.fit_history[n], info.fit_history[n - 1] + 1e-10 * scale) << "sweep " << n;
  }
}

TEST(AlsFit, FitIsMonotoneDenseAndMasked) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    std::mt19937_64 rng(seed);
    Tensor3 x = testing::random_tensor({8, 5, 9}, rng);
    AlsConfig cfg;
    cfg.seed = seed;
    cfg.max_iters = 60;
    cfg.rel_change_tol = 1e-14;
    expect_monotone(als_fit(x, 3, cfg).info, x.norm());

    std::bernoulli_distribution drop(0.1);
    for (std::size_t i = 0; i < 8; ++i)
      for (std::size_t j = 0; j < 5; ++j)
        for (std::size_t k = 0; k < 9; ++k)
          if (drop(rng)) x.set_missing(i, j, k);
    expect_monotone(als_fit(x, 3, cfg).info, x.norm());
  }
}

TEST(AlsFit, MaskedFitIgnoresMissingValues) {
  const Planted p = planted({10, 4, 12}, 2, 33);
  Tensor3 x = p.x;
  std::mt19937_64 rng(4);
  std::bernoulli_distribution drop(0.15);
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t k = 0; k < 12; ++k)
        if (drop(rng)) x.set_missing(i, j, k);
  const CpModel m = als_fit(x, 2, tight(3));
  // Completion: the held-out entries are predicted by the low-rank model.
  EXPECT_LT(rel_error(p.x, reconstruct(m)), 1e-5);
}

TEST(AlsFit, DeterministicPerSeed) {
  std::mt19937_64 rng(10);
  const Tensor3 x = testing::random_tensor({6, 4, 5}, rng);
  AlsConfig cfg;
  cfg.seed = 99;
  const CpModel a = als_fit(x, 2, cfg), b = als_fit(x, 2, cfg);
  EXPECT_EQ(a.A, b.A);
  EXPECT_EQ(a.B, b.B);
  EXPECT_EQ(a.C, b.C);
  EXPECT_EQ(a.weights, b.weights);
}

TEST(AlsFit, NormalizedFactorsHaveUnitColumns) {
  const Planted p = planted({6, 3, 8}, 2, 12);
  const CpModel m = als_fit(p.x, 2, {});
  for (Eigen::Index r = 0; r < 2; ++r) {
    EXPECT_NEAR(m.A.col(r).norm(), 1.0, 1e-12);
    EXPECT_NEAR(m.B.col(r).norm(), 1.0, 1e-12);
    EXPECT_NEAR(m.C.col(r).norm(), 1.0, 1e-12);
    EXPECT_GE(m.weights(r), 0.0);
  }
  EXPECT_GE(m.weights(0), m.weights(1));
}

TEST(AlsFit, Errors) {
  Tensor3 x(Dims{2, 2, 2});
  EXPECT_THROW(als_fit(x, 0, {}), std::invalid_argument);
  AlsConfig bad;
  bad.max_iters = 0;
  EXPECT_THROW(als_fit(x, 1, bad), std::invalid_argument);
  bad = {};
  bad.rel_change_tol = 0.0;
  EXPECT_THROW(als_fit(x, 1, bad), std::invalid_argument);

  Tensor3 hole(Dims{2, 2, 2});
  hole.set(0, 0, 0, 1.0);
  for (std::size_t j = 0; j < 2; ++j)
    for (std::size_t k = 0; k < 2; ++k) hole.set_missing(1, j, k);
  EXPECT_THROW(als_fit(hole, 1, {}), DataError);

  AlsConfig ws;
  ws.warm_start = CpModel::from_factors(Matrix::Ones(3, 1), Matrix::Ones(2, 1), Matrix::Ones(2, 1));
  EXPECT_THROW(als_fit(x, 1, ws), DataError);
}

TEST(Reconstruct, SingleEntry) {
  const CpModel m = CpModel::from_factors(Matrix::Ones(1, 1), Matrix::Ones(1, 1), Matrix::Ones(1, 1));
  EXPECT_EQ(reconstruct(m).at(0, 0, 0), 1.0);
}

TEST(Reconstruct, AllOnesRankTwo) {
  const CpModel m = CpModel::from_factors(Matrix::Ones(2, 2), Matrix::Ones(2, 2), Matrix::Ones(2, 2));
  const Tensor3 t = reconstruct(m);
  for (double v : t.values()) EXPECT_EQ(v, 2.0);
}

TEST(Reconstruct, MatchesBruteForceWithWeights) {
  std::mt19937_64 rng(2);
  CpModel m = CpModel::from_factors(gaussian_matrix(4, 3, rng), gaussian_matrix(3, 3, rng),
                                    gaussian_matrix(5, 3, rng));
  m.weights << 2.0, 0.5, 3.0;
  EXPECT_LT(testing::max_abs_diff(reconstruct(m), brute_force_reconstruct(m.A, m.B, m.C, m.weights)),
            1e-12);
}

TEST(Reconstruct, RoundTripThroughFit) {
  const Planted p = planted({7, 3, 9}, 2, 21);
  EXPECT_LT(rel_error(p.x, reconstruct(als_fit(p.x, 2, tight(0)))), 1e-8);
}

TEST(Residual, ZeroForOwnReconstruction) {
  std::mt19937_64 rng(3);
  const CpModel m = CpModel::from_factors(gaussian_matrix(3, 2, rng), gaussian_matrix(2, 2, rng),
                                          gaussian_matrix(4, 2, rng));
  const Tensor3 e = residual(reconstruct(m), m);
  for (double v : e.values()) EXPECT_NEAR(v, 0.0, 1e-14);
}

TEST(Residual, ZeroModelReturnsInput) {
  std::mt19937_64 rng(4);
  const Tensor3 x = testing::random_tensor({3, 2, 4}, rng);
  const CpModel zero = CpModel::from_factors(Matrix::Zero(3, 1), Matrix::Zero(2, 1), Matrix::Zero(4, 1));
  EXPECT_EQ(residual(x, zero), x);
}

TEST(Residual, NormEqualsFinalFit) {
  std::mt19937_64 rng(5);
  Tensor3 x = testing::random_tensor({6, 4, 7}, rng);
  x.set_missing(0, 0, 0);
  x.set_missing(5, 3, 6);
  const CpModel m = als_fit(x, 2, {});
  const Tensor3 e = residual(x, m);
  EXPECT_FALSE(e.observed(0, 0, 0));
  EXPECT_FALSE(e.observed(5, 3, 6));
  EXPECT_NEAR(e.norm(), m.info.final_fit, 1e-10 * x.norm());
}

TEST(Residual, DimMismatch) {
  const CpModel m = CpModel::from_factors(Matrix::Ones(2, 1), Matrix::Ones(2, 1), Matrix::Ones(2, 1));
  EXPECT_THROW(residual(Tensor3(Dims{3, 2, 2}), m), DataError);
}

TEST(Tcc, Examples) {
  const std::vector<double> u{1, 2, 3}, v{2, 4, 6}, e1{1, 0}, e2{0, 1};
  EXPECT_DOUBLE_EQ(tcc(u, u), 1.0);
  EXPECT_DOUBLE_EQ(tcc(e1, e2), 0.0);
  EXPECT_DOUBLE_EQ(tcc(u, v), 1.0);
  EXPECT_THROW(tcc(std::vector<double>{0, 0}, e1), DataError);
  EXPECT_THROW(tcc(u, e1), DataError);
}

TEST(Tcc, SymmetricAndScaleInvariant) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> s(0.1, 10.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> u(7), v(7), su(7);
    for (auto& x : u) x = n(rng);
    for (auto& x : v) x = n(rng);
    const double alpha = s(rng);
    for (std::size_t q = 0; q < 7; ++q) su[q] = alpha * u[q];
    EXPECT_NEAR(tcc(u, v), tcc(v, u), 1e-15);
    EXPECT_NEAR(tcc(su, v), tcc(u, v), 1e-12);
    EXPECT_LE(std::abs(tcc(u, v)), 1.0);
  }
}

TEST(Tcc, ExactSelfAndPowerOfTwoScaling) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> u(11), v(11), u4(11);
    for (auto& x : u) x = n(rng);
    for (auto& x : v) x = n(rng);
    for (std::size_t q = 0; q < 11; ++q) u4[q] = 4.0 * u[q];
    EXPECT_EQ(tcc(u, u), 1.0);
    EXPECT_EQ(tcc(u4, v), tcc(u, v));
  }
  const std::vector<double> big{1e200, 1e200}, big2{2e200, 2e200};
  EXPECT_EQ(tcc(big, big2), 1.0);
}

TEST(AlignFactors, RecoversColumnSwap) {
  std::mt19937_64 rng(7);
  const CpModel ref = CpModel::from_factors(gaussian_matrix(5, 3, rng), gaussian_matrix(4, 3, rng),
                                            gaussian_matrix(6, 3, rng));
  CpModel other = ref;
  for (Matrix* f : {&other.A, &other.B, &other.C}) f->col(0).swap(f->col(2));
  const Alignment al = align_factors(ref, other);
  EXPECT_EQ(al.permutation, (std::vector<std::size_t>{2, 1, 0}));
  EXPECT_DOUBLE_EQ(al.mean_tcc, 1.0);
}

TEST(AlignFactors, DetectsSignFlip) {
  std::mt19937_64 rng(8);
  const CpModel ref = CpModel::from_factors(gaussian_matrix(5, 2, rng), gaussian_matrix(4, 2, rng),
                                            gaussian_matrix(6, 2, rng));
  CpModel other = ref;
  other.B.col(1) *= -1.0;
  const Alignment al = align_factors(ref, other);
  EXPECT_EQ(al.signs[1], (std::vector<int>{1, -1}));
  EXPECT_EQ(al.signs[0], (std::vector<int>{1, 1}));
  EXPECT_DOUBLE_EQ(al.mean_tcc, 1.0);
}

TEST(AlignFactors, SmallPerturbationKeepsIdentity) {
  std::mt19937_64 rng(9);
  const CpModel ref = CpModel::from_factors(gaussian_matrix(8, 4, rng), gaussian_matrix(5, 4, rng),
                                            gaussian_matrix(9, 4, rng));
  CpModel other = ref;
  other.A += 1e-6 * gaussian_matrix(8, 4, rng);
  other.B += 1e-6 * gaussian_matrix(5, 4, rng);
  other.C += 1e-6 * gaussian_matrix(9, 4, rng);
  const Alignment al = align_factors(ref, other);
  EXPECT_EQ(al.permutation, (std::vector<std::size_t>{0, 1, 2, 3}));
  EXPECT_GT(al.mean_tcc, 0.999);
}

TEST(AlignFactors, Errors) {
  const CpModel r1 = CpModel::from_factors(Matrix::Ones(2, 1), Matrix::Ones(2, 1), Matrix::Ones(2, 1));
  const CpModel r2 = CpModel::from_factors(Matrix::Ones(2, 2), Matrix::Ones(2, 2), Matrix::Ones(2, 2));
  EXPECT_THROW(align_factors(r1, r2), DataError);
  const CpModel taller = CpModel::from_factors(Matrix::Ones(3, 1), Matrix::Ones(2, 1), Matrix::Ones(2, 1));
  EXPECT_THROW(align_factors(r1, taller), DataError);
  EXPECT_NO_THROW(align_factors(r1, taller, {2, 3}));
}

TEST(Degeneracy, FlagsNearlyCollinearComponents) {
  Matrix A(3, 2), B(2, 2), C(2, 2);
  A << 1, -1, 2, -2, 3, -3.0001;
  B << 1, 1, 1, 1;
  C << 1, 1, 2, 2;
  EXPECT_TRUE(detail::has_degenerate_pair(A, B, C));
  EXPECT_FALSE(detail::has_degenerate_pair(Matrix::Identity(3, 2), B, C));
}

TEST(SplitHalf, AcceptsPlantedRank) {
  const Planted p = planted({24, 5, 30}, 2, 404);
  AlsConfig cfg;
  cfg.seed = 1;
  cfg.max_iters = 500;
  cfg.rel_change_tol = 1e-10;
  const RankValidationReport rep = split_half_validate(p.x, {1, 2, 3, 4}, cfg);
  ASSERT_EQ(rep.records.size(), 4u);
  EXPECT_TRUE(rep.records[0].accepted);
  EXPECT_TRUE(rep.records[1].accepted);
  for (const auto& r : rep.records) {
    EXPECT_GE(r.tcc_B, -1.0);
    EXPECT_LE(r.tcc_B, 1.0);
    EXPECT_LE(r.tcc_C, 1.0);
  }
  EXPECT_EQ(rep.chosen_rank, 2u);
  EXPECT_LT(rep.records[2].uniqueness, 0.85);
}

TEST(SplitHalf, SingleStartSkipsUniquenessCheck) {
  const Planted p = planted({24, 5, 30}, 2, 404);
  AlsConfig cfg;
  cfg.seed = 1;
  const RankValidationReport rep = split_half_validate(p.x, {2, 3}, cfg, 0.85, 1, 1);
  for (const auto& r : rep.records) EXPECT_EQ(r.uniqueness, 1.0);
  EXPECT_THROW(split_half_validate(p.x, {2}, cfg, 0.85, 1, 0), std::invalid_argument);
}

TEST(SplitHalf, TooFewSlices) {
  EXPECT_THROW(split_half_validate(Tensor3(Dims{3, 2, 2}), {1}), DataError);
}

}  // namespace
}  // namespace tensorad
