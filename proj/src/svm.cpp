#include "acida/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace acida {

namespace {

constexpr double kTau = 1e-12;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMinPairwiseProb = 1e-7;

std::vector<Eigen::Index> iota_indices(Eigen::Index n) {
  std::vector<Eigen::Index> out(static_cast<std::size_t>(n));
  std::iota(out.begin(), out.end(), Eigen::Index{0});
  return out;
}

RbfDecision make_decision(const MatrixXd& rows, const std::vector<Eigen::Index>& subset,
                          const std::vector<int>& labels, const DualSolution& sol, double gamma) {
  std::vector<Eigen::Index> support;
  for (std::size_t k = 0; k < subset.size(); ++k) {
    if (sol.alpha[k] > 0.0) support.push_back(static_cast<Eigen::Index>(k));
  }
  RbfDecision d;
  d.gamma = gamma;
  d.rho = sol.rho;
  d.support.resize(static_cast<Eigen::Index>(support.size()), rows.cols());
  d.coef.resize(static_cast<Eigen::Index>(support.size()));
  for (std::size_t s = 0; s < support.size(); ++s) {
    const Eigen::Index k = support[s];
    const Eigen::Index row = subset[static_cast<std::size_t>(k)];
    d.support.row(static_cast<Eigen::Index>(s)) = rows.row(row);
    d.coef(static_cast<Eigen::Index>(s)) = sol.alpha[static_cast<std::size_t>(k)] * labels[row];
  }
  return d;
}

// Held-out decision values from k-fold training on the shared Gram matrix,
// followed by a sigmoid fit. Mirrors the usual cross-validated Platt scheme.
PlattSigmoid calibrate(const MatrixXd& gram, const std::vector<Eigen::Index>& subset,
                       const std::vector<int>& labels, double c_pos, double c_neg,
                       const SvmParams& params, std::uint64_t seed) {
  const std::size_t n = subset.size();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  const std::size_t folds = static_cast<std::size_t>(std::max(2, params.calibration_folds));
  std::vector<double> decisions(n, 0.0);
  for (std::size_t f = 0; f < folds; ++f) {
    const std::size_t begin = f * n / folds;
    const std::size_t end = (f + 1) * n / folds;
    std::vector<Eigen::Index> train;
    int pos = 0;
    int neg = 0;
    for (std::size_t k = 0; k < n; ++k) {
      if (k >= begin && k < end) continue;
      const Eigen::Index idx = subset[perm[k]];
      train.push_back(idx);
      (labels[idx] > 0 ? pos : neg)++;
    }
    if (pos == 0 || neg == 0) {
      const double constant = pos > 0 ? 1.0 : (neg > 0 ? -1.0 : 0.0);
      for (std::size_t k = begin; k < end; ++k) decisions[perm[k]] = constant;
      continue;
    }
    const DualSolution sol = solve_svc_dual(gram, train, labels, c_pos, c_neg, params.tolerance,
                                            params.max_iterations);
    for (std::size_t k = begin; k < end; ++k) {
      const Eigen::Index target = subset[perm[k]];
      double value = -sol.rho;
      for (std::size_t t = 0; t < train.size(); ++t) {
        if (sol.alpha[t] > 0.0) value += sol.alpha[t] * labels[train[t]] * gram(train[t], target);
      }
      decisions[perm[k]] = value;
    }
  }
  std::vector<int> subset_labels(n);
  for (std::size_t k = 0; k < n; ++k) subset_labels[k] = labels[subset[k]];
  return fit_platt(decisions, subset_labels);
}

}  // namespace

FeatureScaler FeatureScaler::fit(const MatrixXd& rows) {
  FeatureScaler s;
  s.mean = rows.colwise().mean().transpose();
  s.inv_scale.resize(rows.cols());
  for (Eigen::Index j = 0; j < rows.cols(); ++j) {
    const double var = (rows.col(j).array() - s.mean(j)).square().mean();
    s.inv_scale(j) = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
  }
  return s;
}

FeatureScaler FeatureScaler::identity(Eigen::Index dim) {
  return {VectorXd::Zero(dim), VectorXd::Ones(dim)};
}

VectorXd FeatureScaler::apply(const Eigen::Ref<const VectorXd>& x) const {
  if (x.size() != mean.size()) throw DataError("feature dimension mismatch");
  return ((x - mean).array() * inv_scale.array()).matrix();
}

MatrixXd FeatureScaler::apply_rows(const MatrixXd& rows) const {
  return ((rows.rowwise() - mean.transpose()).array().rowwise() * inv_scale.transpose().array())
      .matrix();
}

double RbfDecision::operator()(const Eigen::Ref<const VectorXd>& x) const {
  double value = -rho;
  for (Eigen::Index s = 0; s < support.rows(); ++s) {
    value += coef(s) * std::exp(-gamma * (support.row(s).transpose() - x).squaredNorm());
  }
  return value;
}

double PlattSigmoid::operator()(double decision) const {
  const double f = decision * a + b;
  return f >= 0.0 ? std::exp(-f) / (1.0 + std::exp(-f)) : 1.0 / (1.0 + std::exp(f));
}

PlattSigmoid fit_platt(const std::vector<double>& dec, const std::vector<int>& labels) {
  const std::size_t n = dec.size();
  double prior1 = 0.0;
  double prior0 = 0.0;
  for (int y : labels) (y > 0 ? prior1 : prior0) += 1.0;

  constexpr int kMaxIter = 100;
  constexpr double kMinStep = 1e-10;
  constexpr double kSigma = 1e-12;
  constexpr double kEps = 1e-5;
  const double hi_target = (prior1 + 1.0) / (prior1 + 2.0);
  const double lo_target = 1.0 / (prior0 + 2.0);
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = labels[i] > 0 ? hi_target : lo_target;

  auto objective = [&](double a, double b) {
    double f = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = dec[i] * a + b;
      f += z >= 0.0 ? t[i] * z + std::log1p(std::exp(-z)) : (t[i] - 1.0) * z + std::log1p(std::exp(z));
    }
    return f;
  };

  double a = 0.0;
  double b = std::log((prior0 + 1.0) / (prior1 + 1.0));
  double fval = objective(a, b);
  for (int iter = 0; iter < kMaxIter; ++iter) {
    double h11 = kSigma, h22 = kSigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = dec[i] * a + b;
      double p, q;
      if (z >= 0.0) {
        p = std::exp(-z) / (1.0 + std::exp(-z));
        q = 1.0 / (1.0 + std::exp(-z));
      } else {
        p = 1.0 / (1.0 + std::exp(z));
        q = std::exp(z) / (1.0 + std::exp(z));
      }
      const double d2 = p * q;
      h11 += dec[i] * dec[i] * d2;
      h22 += d2;
      h21 += dec[i] * d2;
      const double d1 = t[i] - p;
      g1 += dec[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < kEps && std::abs(g2) < kEps) break;

    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double step = 1.0;
    while (step >= kMinStep) {
      const double na = a + step * da;
      const double nb = b + step * db;
      const double nf = objective(na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        a = na;
        b = nb;
        fval = nf;
        break;
      }
      step /= 2.0;
    }
    if (step < kMinStep) break;
  }
  return {a, b};
}

MatrixXd rbf_gram(const MatrixXd& rows, double gamma) {
  const VectorXd sq = rows.rowwise().squaredNorm();
  MatrixXd gram = rows * rows.transpose();
  for (Eigen::Index j = 0; j < gram.cols(); ++j) {
    for (Eigen::Index i = 0; i < gram.rows(); ++i) {
      const double dist = std::max(0.0, sq(i) + sq(j) - 2.0 * gram(i, j));
      gram(i, j) = std::exp(-gamma * dist);
    }
  }
  return gram;
}

// SMO with second-order working-set selection.
DualSolution solve_svc_dual(const MatrixXd& gram, const std::vector<Eigen::Index>& subset,
                            const std::vector<int>& labels, double c_positive, double c_negative,
                            double tolerance, long max_iterations) {
  const std::size_t n = subset.size();
  std::vector<double> y(n), cap(n), diag(n);
  for (std::size_t k = 0; k < n; ++k) {
    y[k] = labels[subset[k]] > 0 ? 1.0 : -1.0;
    cap[k] = y[k] > 0 ? c_positive : c_negative;
    diag[k] = gram(subset[k], subset[k]);
  }
  std::vector<double> alpha(n, 0.0);
  std::vector<double> grad(n, -1.0);
  auto q = [&](std::size_t i, std::size_t j) { return y[i] * y[j] * gram(subset[j], subset[i]); };
  auto at_upper = [&](std::size_t k) { return alpha[k] >= cap[k]; };
  auto at_lower = [&](std::size_t k) { return alpha[k] <= 0.0; };

  DualSolution sol;
  long iter = 0;
  for (; iter < max_iterations; ++iter) {
    double gmax = -kInf;
    double gmax2 = -kInf;
    std::ptrdiff_t sel_i = -1;
    std::ptrdiff_t sel_j = -1;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] > 0) {
        if (!at_upper(t) && -grad[t] >= gmax) { gmax = -grad[t]; sel_i = static_cast<std::ptrdiff_t>(t); }
      } else {
        if (!at_lower(t) && grad[t] >= gmax) { gmax = grad[t]; sel_i = static_cast<std::ptrdiff_t>(t); }
      }
    }
    double obj_min = kInf;
    if (sel_i >= 0) {
      const auto i = static_cast<std::size_t>(sel_i);
      const double* ki = &gram(0, subset[i]);
      for (std::size_t j = 0; j < n; ++j) {
        const double kij = ki[subset[j]];
        if (y[j] > 0) {
          if (at_lower(j)) continue;
          const double grad_diff = gmax + grad[j];
          gmax2 = std::max(gmax2, grad[j]);
          if (grad_diff > 0.0) {
            const double quad = diag[i] + diag[j] - 2.0 * y[i] * kij;
            const double obj = -(grad_diff * grad_diff) / (quad > 0.0 ? quad : kTau);
            if (obj <= obj_min) { sel_j = static_cast<std::ptrdiff_t>(j); obj_min = obj; }
          }
        } else {
          if (at_upper(j)) continue;
          const double grad_diff = gmax - grad[j];
          gmax2 = std::max(gmax2, -grad[j]);
          if (grad_diff > 0.0) {
            const double quad = diag[i] + diag[j] + 2.0 * y[i] * kij;
            const double obj = -(grad_diff * grad_diff) / (quad > 0.0 ? quad : kTau);
            if (obj <= obj_min) { sel_j = static_cast<std::ptrdiff_t>(j); obj_min = obj; }
          }
        }
      }
    }
    if (gmax + gmax2 < tolerance || sel_j < 0) break;

    const auto i = static_cast<std::size_t>(sel_i);
    const auto j = static_cast<std::size_t>(sel_j);
    const double qij = q(i, j);
    const double old_i = alpha[i];
    const double old_j = alpha[j];
    if (y[i] != y[j]) {
      double quad = diag[i] + diag[j] + 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) { alpha[j] = 0.0; alpha[i] = diff; }
      } else {
        if (alpha[i] < 0.0) { alpha[i] = 0.0; alpha[j] = -diff; }
      }
      if (diff > cap[i] - cap[j]) {
        if (alpha[i] > cap[i]) { alpha[i] = cap[i]; alpha[j] = cap[i] - diff; }
      } else {
        if (alpha[j] > cap[j]) { alpha[j] = cap[j]; alpha[i] = cap[j] + diff; }
      }
    } else {
      double quad = diag[i] + diag[j] - 2.0 * qij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > cap[i]) {
        if (alpha[i] > cap[i]) { alpha[i] = cap[i]; alpha[j] = sum - cap[i]; }
      } else {
        if (alpha[j] < 0.0) { alpha[j] = 0.0; alpha[i] = sum; }
      }
      if (sum > cap[j]) {
        if (alpha[j] > cap[j]) { alpha[j] = cap[j]; alpha[i] = sum - cap[j]; }
      } else {
        if (alpha[i] < 0.0) { alpha[i] = 0.0; alpha[j] = sum; }
      }
    }
    const double dai = (alpha[i] - old_i) * y[i];
    const double daj = (alpha[j] - old_j) * y[j];
    const double* ki = &gram(0, subset[i]);
    const double* kj = &gram(0, subset[j]);
    for (std::size_t t = 0; t < n; ++t) {
      grad[t] += y[t] * (ki[subset[t]] * dai + kj[subset[t]] * daj);
    }
  }
  sol.iterations = iter;

  // Bias from free variables, or the midpoint of the feasible interval.
  double ub = kInf;
  double lb = -kInf;
  double sum_free = 0.0;
  int free_count = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double yg = y[k] * grad[k];
    if (at_upper(k)) {
      if (y[k] < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (at_lower(k)) {
      if (y[k] > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++free_count;
      sum_free += yg;
    }
  }
  sol.rho = free_count > 0 ? sum_free / free_count : (ub + lb) / 2.0;
  sol.alpha = std::move(alpha);
  return sol;
}

double BinarySvm::decision_value(const Eigen::Ref<const VectorXd>& x) const {
  return decision(scaler.apply(x));
}

double BinarySvm::probability(const Eigen::Ref<const VectorXd>& x) const {
  return sigmoid(decision_value(x));
}

BinarySvm train_binary_svm(const MatrixXd& rows, const std::vector<bool>& labels,
                           const SvmParams& params) {
  if (static_cast<Eigen::Index>(labels.size()) != rows.rows()) {
    throw DataError("train_binary_svm: label count does not match rows");
  }
  if (!rows.allFinite()) throw DataError("train_binary_svm: non-finite features");
  const auto positives = std::count(labels.begin(), labels.end(), true);
  const auto negatives = static_cast<std::ptrdiff_t>(labels.size()) - positives;
  if (positives == 0 || negatives == 0) throw DataError("train_binary_svm: both classes required");

  BinarySvm model;
  model.scaler = params.standardize ? FeatureScaler::fit(rows) : FeatureScaler::identity(rows.cols());
  const MatrixXd scaled = model.scaler.apply_rows(rows);
  const MatrixXd gram = rbf_gram(scaled, params.gamma);

  std::vector<int> y(labels.size());
  for (std::size_t k = 0; k < labels.size(); ++k) y[k] = labels[k] ? 1 : -1;
  double c_pos = params.c;
  double c_neg = params.c;
  if (params.class_weighting) {
    const double n = static_cast<double>(labels.size());
    c_pos = params.c * n / (2.0 * static_cast<double>(positives));
    c_neg = params.c * n / (2.0 * static_cast<double>(negatives));
  }
  const auto all = iota_indices(rows.rows());
  const DualSolution sol =
      solve_svc_dual(gram, all, y, c_pos, c_neg, params.tolerance, params.max_iterations);
  model.decision = make_decision(scaled, all, y, sol, params.gamma);
  model.sigmoid = calibrate(gram, all, y, c_pos, c_neg, params, params.seed);
  return model;
}

VectorXd couple_pairwise(const MatrixXd& r) {
  const Eigen::Index k = r.rows();
  MatrixXd q = MatrixXd::Zero(k, k);
  VectorXd p = VectorXd::Constant(k, 1.0 / static_cast<double>(k));
  VectorXd qp(k);
  for (Eigen::Index t = 0; t < k; ++t) {
    for (Eigen::Index j = 0; j < k; ++j) {
      if (j == t) continue;
      q(t, t) += r(j, t) * r(j, t);
      q(t, j) = -r(j, t) * r(t, j);
    }
  }
  const int max_iter = std::max<int>(100, static_cast<int>(k));
  const double eps = 0.005 / static_cast<double>(k);
  for (int iter = 0; iter < max_iter; ++iter) {
    qp = q * p;
    double pqp = p.dot(qp);
    const double max_error = (qp.array() - pqp).abs().maxCoeff();
    if (max_error < eps) break;
    for (Eigen::Index t = 0; t < k; ++t) {
      const double diff = (-qp(t) + pqp) / q(t, t);
      p(t) += diff;
      pqp = (pqp + diff * (diff * q(t, t) + 2.0 * qp(t))) / (1.0 + diff) / (1.0 + diff);
      for (Eigen::Index j = 0; j < k; ++j) {
        qp(j) = (qp(j) + diff * q(t, j)) / (1.0 + diff);
        p(j) /= (1.0 + diff);
      }
    }
  }
  p = p.cwiseMax(0.0);
  return p / p.sum();
}

VectorXd MulticlassSvm::probabilities(const Eigen::Ref<const VectorXd>& x) const {
  const VectorXd z = scaler.apply(x);
  MatrixXd pairwise = MatrixXd::Zero(num_classes, num_classes);
  std::size_t m = 0;
  for (int i = 0; i < num_classes; ++i) {
    for (int j = i + 1; j < num_classes; ++j, ++m) {
      const double p = std::clamp(sigmoids[m](decisions[m](z)), kMinPairwiseProb,
                                  1.0 - kMinPairwiseProb);
      pairwise(i, j) = p;
      pairwise(j, i) = 1.0 - p;
    }
  }
  return couple_pairwise(pairwise);
}

MulticlassSvm train_multiclass_svm(const MatrixXd& rows, const std::vector<int>& classes,
                                   int num_classes, const SvmParams& params) {
  if (static_cast<Eigen::Index>(classes.size()) != rows.rows()) {
    throw DataError("train_multiclass_svm: label count does not match rows");
  }
  if (!rows.allFinite()) throw DataError("train_multiclass_svm: non-finite features");
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (int c : classes) {
    if (c < 0 || c >= num_classes) throw DataError("train_multiclass_svm: class out of range");
    ++counts[static_cast<std::size_t>(c)];
  }
  for (int c = 0; c < num_classes; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0) {
      throw DataError("train_multiclass_svm: class " + std::to_string(c) + " has no examples");
    }
  }
  std::vector<double> class_c(static_cast<std::size_t>(num_classes), params.c);
  if (params.class_weighting) {
    for (int c = 0; c < num_classes; ++c) {
      class_c[static_cast<std::size_t>(c)] =
          params.c * static_cast<double>(classes.size()) /
          (static_cast<double>(num_classes) * static_cast<double>(counts[static_cast<std::size_t>(c)]));
    }
  }

  MulticlassSvm model;
  model.num_classes = num_classes;
  model.scaler = params.standardize ? FeatureScaler::fit(rows) : FeatureScaler::identity(rows.cols());
  const MatrixXd scaled = model.scaler.apply_rows(rows);
  const MatrixXd gram = rbf_gram(scaled, params.gamma);

  std::uint64_t pair_seed = params.seed;
  for (int i = 0; i < num_classes; ++i) {
    for (int j = i + 1; j < num_classes; ++j) {
      std::vector<Eigen::Index> subset;
      std::vector<int> y(classes.size(), 0);
      for (std::size_t k = 0; k < classes.size(); ++k) {
        if (classes[k] == i || classes[k] == j) {
          subset.push_back(static_cast<Eigen::Index>(k));
          y[k] = classes[k] == i ? 1 : -1;
        }
      }
      const double c_pos = class_c[static_cast<std::size_t>(i)];
      const double c_neg = class_c[static_cast<std::size_t>(j)];
      const DualSolution sol =
          solve_svc_dual(gram, subset, y, c_pos, c_neg, params.tolerance, params.max_iterations);
      model.decisions.push_back(make_decision(scaled, subset, y, sol, params.gamma));
      model.sigmoids.push_back(calibrate(gram, subset, y, c_pos, c_neg, params, pair_seed++));
    }
  }
  return model;
}

}  // namespace acida

namespace acida {

namespace {

void put_decision(TensorArchive& a, const std::string& prefix, const RbfDecision& d) {
  a.put(prefix + "support", d.support);
  a.put_vector(prefix + "coef", d.coef);
  a.put_scalar(prefix + "rho", d.rho);
  a.put_scalar(prefix + "gamma", d.gamma);
}

RbfDecision get_decision(const TensorArchive& a, const std::string& prefix) {
  RbfDecision d;
  d.support = a.get(prefix + "support");
  d.coef = a.get_vector(prefix + "coef");
  d.rho = a.get_scalar(prefix + "rho");
  d.gamma = a.get_scalar(prefix + "gamma");
  if (d.coef.size() != d.support.rows()) throw ModelError("svm: support/coef size mismatch");
  return d;
}

void put_scaler(TensorArchive& a, const FeatureScaler& s) {
  a.put_vector("scaler.mean", s.mean);
  a.put_vector("scaler.inv_scale", s.inv_scale);
}

FeatureScaler get_scaler(const TensorArchive& a) {
  FeatureScaler s{a.get_vector("scaler.mean"), a.get_vector("scaler.inv_scale")};
  if (s.mean.size() != s.inv_scale.size()) throw ModelError("svm: scaler size mismatch");
  return s;
}

}  // namespace

TensorArchive to_archive(const BinarySvm& model) {
  TensorArchive a;
  put_scaler(a, model.scaler);
  put_decision(a, "", model.decision);
  a.put_scalar("platt.a", model.sigmoid.a);
  a.put_scalar("platt.b", model.sigmoid.b);
  return a;
}

BinarySvm binary_svm_from_archive(const TensorArchive& a) {
  BinarySvm model;
  model.scaler = get_scaler(a);
  model.decision = get_decision(a, "");
  model.sigmoid = {a.get_scalar("platt.a"), a.get_scalar("platt.b")};
  if (model.decision.support.rows() > 0 && model.decision.support.cols() != model.scaler.mean.size()) {
    throw ModelError("svm: support vector dimension mismatch");
  }
  return model;
}

TensorArchive to_archive(const MulticlassSvm& model) {
  TensorArchive a;
  a.put_scalar("num_classes", model.num_classes);
  put_scaler(a, model.scaler);
  for (std::size_t m = 0; m < model.decisions.size(); ++m) {
    const std::string prefix = "pair" + std::to_string(m) + ".";
    put_decision(a, prefix, model.decisions[m]);
    a.put_scalar(prefix + "platt.a", model.sigmoids[m].a);
    a.put_scalar(prefix + "platt.b", model.sigmoids[m].b);
  }
  return a;
}

MulticlassSvm multiclass_svm_from_archive(const TensorArchive& a) {
  MulticlassSvm model;
  model.num_classes = static_cast<int>(a.get_scalar("num_classes"));
  if (model.num_classes < 2) throw ModelError("svm: invalid class count");
  model.scaler = get_scaler(a);
  const int pairs = model.num_classes * (model.num_classes - 1) / 2;
  for (int m = 0; m < pairs; ++m) {
    const std::string prefix = "pair" + std::to_string(m) + ".";
    model.decisions.push_back(get_decision(a, prefix));
    model.sigmoids.push_back({a.get_scalar(prefix + "platt.a"), a.get_scalar(prefix + "platt.b")});
  }
  return model;
}

}  // namespace acida
