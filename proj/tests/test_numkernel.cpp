#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_support.hpp"

using namespace dsvdae;
using dsvdae::testing::random_matrix;

namespace {

// plain triple loop, ascending inner index
Tensor2 naive_matmul(const Tensor2& a, const Tensor2& b) {
  Tensor2 out(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (Eigen::Index k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  }
  return out;
}

Tensor2 sparse_random(Eigen::Index r, Eigen::Index c, double density, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor2 m = Tensor2::Zero(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (u(rng) < density) m.data()[i] = 2.0 * u(rng) - 1.0;
  }
  return m;
}

}  // namespace

TEST(Spmm, IdentityLeavesInputUnchanged) {
  std::mt19937_64 rng(1);
  const Tensor2 d = random_matrix(6, 3, rng);
  EXPECT_EQ(spmm(SparseMatrix::identity(6), d), d);
}

TEST(Spmm, PermutationSwapsRows) {
  Tensor2 p(2, 2);
  p << 0, 1, 1, 0;
  Tensor2 d(2, 2);
  d << 1, 2, 3, 4;
  Tensor2 expected(2, 2);
  expected << 3, 4, 1, 2;
  EXPECT_EQ(spmm(SparseMatrix::from_dense(p), d), expected);
}

TEST(Spmm, MatchesDenseOracleExactly) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<int> dim(1, 9);
    const Eigen::Index r = dim(rng), k = dim(rng), c = dim(rng);
    const Tensor2 s = sparse_random(r, k, 0.4, rng);
    const Tensor2 d = random_matrix(k, c, rng);
    const SparseMatrix csr = SparseMatrix::from_dense(s);
    csr.validate();
    EXPECT_EQ(spmm(csr, d), naive_matmul(s, d)) << "trial " << trial;
  }
}

TEST(Spmm, FiveByFiveDensityPointFour) {
  std::mt19937_64 rng(5);
  const Tensor2 s = sparse_random(5, 5, 0.4, rng);
  const Tensor2 d = random_matrix(5, 3, rng);
  EXPECT_EQ(spmm(SparseMatrix::from_dense(s), d), naive_matmul(s, d));
}

TEST(SpmmTransposed, MatchesDenseOracleExactly) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<int> dim(1, 9);
    const Eigen::Index r = dim(rng), k = dim(rng), c = dim(rng);
    const Tensor2 s = sparse_random(r, k, 0.4, rng);
    const Tensor2 d = random_matrix(r, c, rng);
    EXPECT_EQ(spmm_transposed(SparseMatrix::from_dense(s), d), naive_matmul(s.transpose(), d)) << "trial " << trial;
  }
  EXPECT_THROW(spmm_transposed(SparseMatrix::identity(3), Tensor2::Zero(4, 2)), InvalidArgument);
}

TEST(Density, CountsNonzeros) {
  Tensor2 x = Tensor2::Zero(4, 5);
  EXPECT_EQ(density(x), 0.0);
  x(1, 2) = 3.0;
  x(3, 0) = -1.0;
  EXPECT_DOUBLE_EQ(density(x), 0.1);
  EXPECT_EQ(density(Tensor2()), 0.0);
}

TEST(Spmm, RejectsShapeMismatch) {
  EXPECT_THROW(spmm(SparseMatrix::identity(3), Tensor2::Zero(4, 2)), InvalidArgument);
}

TEST(SparseMatrix, DenseRoundTrip) {
  std::mt19937_64 rng(3);
  const Tensor2 s = sparse_random(7, 4, 0.3, rng);
  const SparseMatrix csr = SparseMatrix::from_dense(s);
  EXPECT_EQ(csr.to_dense(), s);
  for (Eigen::Index i = 0; i < 7; ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) EXPECT_EQ(csr.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)), s(i, j));
  }
}

TEST(SparseMatrix, ValidateCatchesUnsortedColumns) {
  SparseMatrix s;
  s.rows = 1;
  s.cols = 3;
  s.row_offsets = {0, 2};
  s.col_indices = {2, 1};
  s.values = {1.0, 1.0};
  EXPECT_THROW(s.validate(), InvalidArgument);
}

TEST(DenseAffine, ZeroWeightsReluBias) {
  const Tensor2 x = Tensor2::Constant(3, 2, 5.0);
  RowVector b(2);
  b << 1.0, -1.0;
  const Tensor2 y = dense_affine(x, Tensor2::Zero(2, 2), b, Activation::ReLU);
  for (Eigen::Index i = 0; i < 3; ++i) {
    EXPECT_EQ(y(i, 0), 1.0);
    EXPECT_EQ(y(i, 1), 0.0);
  }
}

TEST(DenseAffine, IdentityWeightNoBias) {
  std::mt19937_64 rng(2);
  const Tensor2 x = random_matrix(4, 3, rng);
  EXPECT_EQ(dense_affine(x, Tensor2::Identity(3, 3), RowVector(), Activation::Identity), x);
}

TEST(DenseAffine, ScalarTanh) {
  Tensor2 x(1, 1), w(1, 1);
  x << 2.0;
  w << 3.0;
  RowVector b(1);
  b << 1.0;
  const double y = dense_affine(x, w, b, Activation::Tanh)(0, 0);
  EXPECT_EQ(y, std::tanh(7.0));
  EXPECT_NEAR(y, 0.999998, 1e-6);
}

TEST(DenseAffine, RejectsShapeMismatch) {
  EXPECT_THROW(dense_affine(Tensor2::Zero(2, 3), Tensor2::Zero(2, 2), RowVector(), Activation::ReLU), InvalidArgument);
  EXPECT_THROW(dense_affine(Tensor2::Zero(2, 2), Tensor2::Zero(2, 2), RowVector::Zero(3), Activation::ReLU),
               InvalidArgument);
}

TEST(Activation, DerivativesMatchFiniteDifferences) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  const double h = 1e-6;
  for (Activation a : {Activation::ReLU, Activation::Tanh, Activation::Sigmoid, Activation::Identity}) {
    for (int i = 0; i < 100; ++i) {
      double x = u(rng);
      if (std::abs(x) < 1e-3) x += 0.01;  // keep away from the ReLU kink
      const double analytic = activation_derivative(a, x, activate(a, x));
      const double numeric = (activate(a, x + h) - activate(a, x - h)) / (2.0 * h);
      const double rel = std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
      EXPECT_LT(rel, 1e-6) << to_string(a) << " at " << x;
    }
  }
}

TEST(Activation, ReluSubgradientAtZeroIsZero) {
  EXPECT_EQ(activation_derivative(Activation::ReLU, 0.0, 0.0), 0.0);
}

TEST(Activation, SigmoidIsStableForLargeInputs) {
  EXPECT_EQ(sigmoid(-1000.0), 0.0);
  EXPECT_EQ(sigmoid(1000.0), 1.0);
  EXPECT_EQ(sigmoid(0.0), 0.5);
}

TEST(Activation, ParseRoundTrip) {
  for (Activation a : {Activation::ReLU, Activation::Tanh, Activation::Sigmoid, Activation::Identity}) {
    EXPECT_EQ(parse_activation(to_string(a)), a);
  }
  EXPECT_THROW(parse_activation("gelu"), InvalidArgument);
}

namespace {

ParameterStore scalar_store(double value, double grad) {
  ParameterStore s;
  Tensor2 v(1, 1);
  v << value;
  s.add("w", v);
  s.at("w").grad(0, 0) = grad;
  return s;
}

}  // namespace

TEST(Adam, FirstStepMovesByLearningRate) {
  ParameterStore s = scalar_store(1.0, 0.5);
  adam_step(s, AdamConfig{});
  // m_hat = g, v_hat = g^2, so the step is lr * 0.5 / (0.5 + 1e-8)
  EXPECT_NEAR(s.at("w").value(0, 0) - 1.0, -0.002, 1e-10);
  EXPECT_EQ(s.step(), 1u);
}

TEST(Adam, ZeroGradientLeavesStateUnchanged) {
  ParameterStore s = scalar_store(1.0, 0.0);
  adam_step(s, AdamConfig{});
  EXPECT_EQ(s.at("w").value(0, 0), 1.0);
  EXPECT_EQ(s.at("w").first_moment(0, 0), 0.0);
  EXPECT_EQ(s.at("w").second_moment(0, 0), 0.0);
}

TEST(Adam, ConstantGradientGivesEqualSteps) {
  ParameterStore s = scalar_store(0.0, 0.5);
  adam_step(s, AdamConfig{});
  const double first = s.at("w").value(0, 0);
  adam_step(s, AdamConfig{});
  const double second = s.at("w").value(0, 0) - first;
  // bias correction makes m_hat = g and v_hat = g^2 exactly for a constant gradient
  EXPECT_NEAR(second, first, 1e-12);
}

TEST(Adam, RejectsNonPositiveLearningRate) {
  ParameterStore s = scalar_store(0.0, 0.5);
  AdamConfig cfg;
  cfg.learning_rate = 0.0;
  EXPECT_THROW(adam_step(s, cfg), InvalidArgument);
  cfg.learning_rate = -1.0;
  EXPECT_THROW(adam_step(s, cfg), InvalidArgument);
}

TEST(Adam, InactiveParametersAreSkipped) {
  ParameterStore s;
  s.add("a", Tensor2::Constant(2, 2, 1.0));
  s.add("b", Tensor2::Constant(2, 2, 1.0), false);
  for (auto& p : s) p.grad.setConstant(0.3);
  adam_step(s, AdamConfig{});
  EXPECT_NE(s.at("a").value(0, 0), 1.0);
  EXPECT_EQ(s.at("b").value, Tensor2::Constant(2, 2, 1.0));
}

TEST(Adam, DeterministicUpdate) {
  std::mt19937_64 rng(4);
  ParameterStore a;
  a.add("w", random_matrix(3, 3, rng));
  a.at("w").grad = random_matrix(3, 3, rng);
  ParameterStore b = a;
  for (int i = 0; i < 5; ++i) {
    adam_step(a, AdamConfig{});
    adam_step(b, AdamConfig{});
  }
  EXPECT_EQ(a.at("w").value, b.at("w").value);
}

TEST(ParameterStore, RejectsDuplicatesAndUnknownNames) {
  ParameterStore s;
  s.add("w", Tensor2::Zero(1, 1));
  EXPECT_THROW(s.add("w", Tensor2::Zero(1, 1)), InvalidArgument);
  EXPECT_THROW(s.at("missing"), InvalidArgument);
  EXPECT_EQ(s.find("missing"), nullptr);
}

TEST(Glorot, RangeAndSeedDeterminism) {
  std::mt19937_64 r1(9), r2(9);
  const Tensor2 a = glorot_uniform(10, 6, r1);
  const Tensor2 b = glorot_uniform(10, 6, r2);
  EXPECT_EQ(a, b);
  EXPECT_LE(a.cwiseAbs().maxCoeff(), std::sqrt(6.0 / 16.0));
}

TEST(GradCheck, Square) {
  ParameterStore s = scalar_store(3.0, 0.0);
  const LossFunction f = [](ParameterStore& p, bool grad) {
    const double w = p.at("w").value(0, 0);
    if (grad) p.at("w").grad(0, 0) = 2.0 * w;
    return w * w;
  };
  const GradCheckReport r = grad_check(f, s, 1e-5);
  EXPECT_NEAR(r.worst_numeric, 6.0, 1e-9);
  EXPECT_LT(r.max_relative_error, 1e-10);
  EXPECT_EQ(s.at("w").grad(0, 0), 6.0);
}

TEST(GradCheck, SineAtZero) {
  ParameterStore s = scalar_store(0.0, 0.0);
  const LossFunction f = [](ParameterStore& p, bool grad) {
    const double w = p.at("w").value(0, 0);
    if (grad) p.at("w").grad(0, 0) = std::cos(w);
    return std::sin(w);
  };
  const GradCheckReport r = grad_check(f, s);
  EXPECT_NEAR(r.worst_numeric, 1.0, 1e-9);
  EXPECT_NEAR(r.worst_analytic, 1.0, 1e-15);
}

TEST(GradCheck, QuadraticNormOfMatrix) {
  ParameterStore s = scalar_store(3.0, 0.0);
  const LossFunction f = [](ParameterStore& p, bool grad) {
    const Tensor2& w = p.at("w").value;
    if (grad) p.at("w").grad = 2.0 * w;
    return w.squaredNorm();
  };
  f(s, true);
  EXPECT_EQ(s.at("w").grad(0, 0), 6.0);
  EXPECT_LT(grad_check(f, s).max_relative_error, 1e-9);
}

TEST(GradCheck, DetectsWrongGradient) {
  ParameterStore s = scalar_store(3.0, 0.0);
  const LossFunction f = [](ParameterStore& p, bool grad) {
    const double w = p.at("w").value(0, 0);
    if (grad) p.at("w").grad(0, 0) = 3.0 * w;
    return w * w;
  };
  EXPECT_GT(grad_check(f, s).max_relative_error, 0.1);
}

TEST(GradCheck, RejectsNonFiniteLoss) {
  ParameterStore s = scalar_store(1.0, 0.0);
  const LossFunction f = [](ParameterStore&, bool) { return std::nan(""); };
  EXPECT_THROW(grad_check(f, s), NumericalError);
}
