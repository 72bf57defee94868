#include <gtest/gtest.h>

#include <random>

#include "acida/svm.hpp"

namespace acida {
namespace {

// Two Gaussian blobs in 2-d, `n` per class.
void blobs(int n, double gap, std::uint64_t seed, MatrixXd& rows, std::vector<bool>& labels) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.5);
  rows.resize(2 * n, 2);
  labels.clear();
  for (int i = 0; i < 2 * n; ++i) {
    const bool pos = i % 2 == 0;
    rows(i, 0) = (pos ? gap : -gap) + noise(rng);
    rows(i, 1) = noise(rng);
    labels.push_back(pos);
  }
}

TEST(Svm, DualSolutionSatisfiesConstraints) {
  MatrixXd rows;
  std::vector<bool> labels;
  blobs(30, 0.6, 4, rows, labels);
  const MatrixXd gram = rbf_gram(rows, 0.5);
  std::vector<Eigen::Index> subset(60);
  std::vector<int> y(60);
  for (int i = 0; i < 60; ++i) {
    subset[static_cast<std::size_t>(i)] = i;
    y[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(i)] ? 1 : -1;
  }
  const double c = 2.0;
  const DualSolution sol = solve_svc_dual(gram, subset, y, c, c, 1e-6, 1'000'000);
  double balance = 0.0;
  for (std::size_t i = 0; i < 60; ++i) {
    EXPECT_GE(sol.alpha[i], -1e-12);
    EXPECT_LE(sol.alpha[i], c + 1e-12);
    balance += sol.alpha[i] * y[i];
  }
  EXPECT_NEAR(balance, 0.0, 1e-9);
  // KKT: free vectors sit on the margin.
  for (std::size_t i = 0; i < 60; ++i) {
    if (sol.alpha[i] > 1e-6 && sol.alpha[i] < c - 1e-6) {
      double f = -sol.rho;
      for (std::size_t j = 0; j < 60; ++j) {
        f += sol.alpha[j] * y[j] * gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      }
      EXPECT_NEAR(y[i] * f, 1.0, 1e-3);
    }
  }
}

TEST(Svm, BinarySeparatesBlobsWithCalibratedProbabilities) {
  MatrixXd rows;
  std::vector<bool> labels;
  blobs(60, 2.0, 1, rows, labels);
  SvmParams p;
  p.gamma = 0.5;
  const BinarySvm svm = train_binary_svm(rows, labels, p);
  EXPECT_GT(svm.probability(Eigen::Vector2d(2.0, 0.0)), 0.9);
  EXPECT_LT(svm.probability(Eigen::Vector2d(-2.0, 0.0)), 0.1);
  EXPECT_GT(svm.decision_value(Eigen::Vector2d(2.0, 0.0)), 0.0);
  const double pr = svm.probability(Eigen::Vector2d(0.1, 0.3));
  EXPECT_GT(pr, 0.0);
  EXPECT_LT(pr, 1.0);
}

TEST(Svm, SingleClassIsAnError) {
  MatrixXd rows = MatrixXd::Random(6, 2);
  EXPECT_THROW(train_binary_svm(rows, std::vector<bool>(6, true), SvmParams{}), DataError);
}

TEST(Svm, TrainingIsDeterministic) {
  MatrixXd rows;
  std::vector<bool> labels;
  blobs(40, 0.8, 2, rows, labels);
  SvmParams p;
  p.gamma = 0.3;
  p.seed = 17;
  const BinarySvm a = train_binary_svm(rows, labels, p);
  const BinarySvm b = train_binary_svm(rows, labels, p);
  const Eigen::Vector2d x(0.2, -0.4);
  EXPECT_EQ(a.probability(x), b.probability(x));
}

TEST(Svm, StandardizationRecoversTinyScaleFeatures) {
  MatrixXd rows;
  std::vector<bool> labels;
  blobs(60, 2.0, 3, rows, labels);
  rows *= 1e-3;
  SvmParams p;
  p.gamma = 0.5;
  p.standardize = true;
  const BinarySvm svm = train_binary_svm(rows, labels, p);
  int correct = 0;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    correct += (svm.probability(rows.row(i).transpose()) > 0.5) == labels[static_cast<std::size_t>(i)];
  }
  EXPECT_GT(correct, 110);
}

TEST(Platt, IncreasingInDecision) {
  std::vector<double> f;
  std::vector<int> y;
  for (int i = -20; i <= 20; ++i) {
    f.push_back(i / 5.0);
    y.push_back(i > 2 || i == -1 ? 1 : 0);
  }
  const PlattSigmoid s = fit_platt(f, y);
  EXPECT_LT(s.a, 0.0);
  EXPECT_LT(s(-3.0), s(0.0));
  EXPECT_LT(s(0.0), s(3.0));
}

TEST(Coupling, RecoversConsistentPosteriors) {
  const Eigen::Vector3d p(0.2, 0.5, 0.3);
  MatrixXd r(3, 3);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r(i, j) = i == j ? 0.0 : p(i) / (p(i) + p(j));
  }
  const VectorXd q = couple_pairwise(r);
  EXPECT_NEAR(q.sum(), 1.0, 1e-12);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(q(i), p(i), 1e-3);
}

TEST(Multiclass, ThreeBlobsProbabilitiesSumToOne) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> noise(0.0, 0.3);
  MatrixXd rows(90, 1);
  std::vector<int> classes;
  for (int i = 0; i < 90; ++i) {
    const int k = i % 3;
    rows(i, 0) = 2.0 * k + noise(rng);
    classes.push_back(k);
  }
  SvmParams p;
  p.gamma = 1.0;
  const MulticlassSvm svm = train_multiclass_svm(rows, classes, 3, p);
  for (int k = 0; k < 3; ++k) {
    const VectorXd pr = svm.probabilities(VectorXd::Constant(1, 2.0 * k));
    EXPECT_NEAR(pr.sum(), 1.0, 1e-12);
    Eigen::Index best = 0;
    pr.maxCoeff(&best);
    EXPECT_EQ(best, k);
  }
  EXPECT_THROW(train_multiclass_svm(rows, std::vector<int>(90, 0), 3, p), DataError);
}

TEST(Scaler, ConstantColumnsStayFinite) {
  MatrixXd rows(4, 2);
  rows << 1, 5, 2, 5, 3, 5, 4, 5;
  const FeatureScaler s = FeatureScaler::fit(rows);
  const MatrixXd z = s.apply_rows(rows);
  EXPECT_TRUE(z.allFinite());
  EXPECT_NEAR(z.col(0).mean(), 0.0, 1e-12);
  EXPECT_EQ(z.col(1), VectorXd::Zero(4));
}

TEST(Archive, SvmRoundTripIsBitExact) {
  MatrixXd rows;
  std::vector<bool> labels;
  blobs(30, 1.0, 6, rows, labels);
  SvmParams p;
  p.gamma = 0.4;
  p.standardize = true;
  const BinarySvm svm = train_binary_svm(rows, labels, p);
  const BinarySvm back = binary_svm_from_archive(TensorArchive::parse(to_archive(svm).serialize()));
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    EXPECT_EQ(svm.probability(rows.row(i).transpose()), back.probability(rows.row(i).transpose()));
  }

  std::vector<int> classes;
  for (int i = 0; i < rows.rows(); ++i) classes.push_back(i % 3);
  const MulticlassSvm multi = train_multiclass_svm(rows, classes, 3, p);
  const MulticlassSvm multi_back =
      multiclass_svm_from_archive(TensorArchive::parse(to_archive(multi).serialize()));
  EXPECT_EQ(multi.probabilities(rows.row(0).transpose()),
            multi_back.probabilities(rows.row(0).transpose()));
}

TEST(Archive, RejectsCorruptBytes) {
  TensorArchive a;
  a.put_scalar("x", 1.0);
  a.put_string("s", "hello");
  std::string bytes = a.serialize();
  EXPECT_EQ(TensorArchive::parse(bytes).get_string("s"), "hello");
  EXPECT_THROW(TensorArchive::parse(bytes.substr(0, bytes.size() - 3)), ModelError);
  bytes[0] = 'X';
  EXPECT_THROW(TensorArchive::parse(bytes), ModelError);
  EXPECT_THROW(a.get("missing"), ModelError);
}

}  // namespace
}  // namespace acida
