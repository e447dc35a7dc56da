#pragma once

// Six from-scratch binary classifiers behind one train/score/predict
// contract: logistic regression (IRLS), linear discriminant analysis,
// Gaussian naive Bayes, CART decision tree, linear soft-margin SVM and a
// shallow feed-forward neural network. Trained models are immutable and
// safe to share across threads; serialization round-trips bit-exactly.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "lcbench/common.hpp"
#include "lcbench/linalg.hpp"

namespace lcbench {

// ---------------------------------------------------------------------------
// Dataset
// ---------------------------------------------------------------------------

struct Dataset {
  std::size_t n = 0, p = 0;
  std::vector<double> x;  // row-major n*p
  std::vector<int> y;     // 0/1, 1 = lane change

  double at(std::size_t i, std::size_t j) const { return x[i * p + j]; }
  std::span<const double> row(std::size_t i) const {
    return {x.data() + i * p, p};
  }
  void add_row(std::span<const double> features, int label) {
    if (p == 0) p = features.size();
    if (features.size() != p)
      throw IntegrityError("dataset: inconsistent feature arity");
    x.insert(x.end(), features.begin(), features.end());
    y.push_back(label);
    ++n;
  }
  std::size_t count(int label) const {
    std::size_t c = 0;
    for (int v : y) c += v == label;
    return c;
  }
  void validate(bool require_both_classes = true) const {
    if (n < 2) throw IntegrityError("dataset: need at least 2 rows");
    for (double v : x)
      if (!std::isfinite(v))
        throw IntegrityError("dataset: non-finite feature value");
    if (require_both_classes && (count(1) == 0 || count(0) == 0))
      throw IntegrityError("dataset: both classes must be present");
  }
};

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

/// Per-feature z-scoring with statistics captured at training time.
/// Constant features get unit scale so they pass through as zeros.
struct Standardizer {
  std::vector<double> mean, scale;
  bool identity = false;

  static Standardizer fit(const Dataset& d) {
    Standardizer s;
    s.mean.assign(d.p, 0.0);
    s.scale.assign(d.p, 1.0);
    for (std::size_t j = 0; j < d.p; ++j) {
      double m = 0;
      for (std::size_t i = 0; i < d.n; ++i) m += d.at(i, j);
      m /= static_cast<double>(d.n);
      double v = 0;
      for (std::size_t i = 0; i < d.n; ++i) {
        const double c = d.at(i, j) - m;
        v += c * c;
      }
      v /= static_cast<double>(d.n);
      s.mean[j] = m;
      s.scale[j] = v > 1e-24 ? std::sqrt(v) : 1.0;
    }
    return s;
  }

  static Standardizer none(std::size_t p) {
    Standardizer s;
    s.mean.assign(p, 0.0);
    s.scale.assign(p, 1.0);
    s.identity = true;
    return s;
  }

  std::vector<double> apply(std::span<const double> x) const {
    std::vector<double> z(x.size());
    for (std::size_t j = 0; j < x.size(); ++j)
      z[j] = (x[j] - mean[j]) / scale[j];
    return z;
  }

  Dataset apply(const Dataset& d) const {
    Dataset out;
    out.n = d.n;
    out.p = d.p;
    out.y = d.y;
    out.x.resize(d.x.size());
    for (std::size_t i = 0; i < d.n; ++i)
      for (std::size_t j = 0; j < d.p; ++j)
        out.x[i * d.p + j] = (d.at(i, j) - mean[j]) / scale[j];
    return out;
  }
};

// ---------------------------------------------------------------------------
// Model contract
// ---------------------------------------------------------------------------

enum class ModelKind { logistic, lda, naive_bayes, decision_tree, svm, ann };

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::logistic: return "lr";
    case ModelKind::lda: return "lda";
    case ModelKind::naive_bayes: return "nb";
    case ModelKind::decision_tree: return "dt";
    case ModelKind::svm: return "svm";
    default: return "ann";
  }
}

inline ModelKind parse_model_kind(std::string_view s) {
  const std::string v = lower(trim(s));
  if (v == "lr") return ModelKind::logistic;
  if (v == "lda") return ModelKind::lda;
  if (v == "nb") return ModelKind::naive_bayes;
  if (v == "dt") return ModelKind::decision_tree;
  if (v == "svm") return ModelKind::svm;
  if (v == "ann") return ModelKind::ann;
  throw ParseError("unknown model kind '" + v + "'");
}

namespace detail {

inline double sigmoid_stable(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline std::string join_g17(std::span<const double> v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += fmt_g17(v[i]);
  }
  return out;
}

inline std::vector<double> parse_doubles(const std::string& s, const std::string& what) {
  std::vector<double> out;
  if (trim(s).empty()) return out;
  for (const auto& tok : split(s, ','))
    out.push_back(parse_double(trim(tok), what));
  return out;
}

}  // namespace detail

class Classifier {
 public:
  virtual ~Classifier() = default;

  ModelKind kind() const { return kind_; }
  std::size_t arity() const { return arity_; }
  double threshold() const { return threshold_; }
  bool converged() const { return converged_; }

  /// Score in [0,1] where the model defines one. Throws on arity mismatch.
  double score(std::span<const double> x) const {
    check_arity(x.size());
    return score_impl(x);
  }

  virtual int predict(std::span<const double> x) const {
    return score(x) > threshold_ ? 1 : 0;
  }

  void serialize(std::ostream& out) const {
    out << "lcbench-model v1\n";
    out << "kind = " << to_string(kind_) << "\n";
    out << "arity = " << arity_ << "\n";
    out << "threshold = " << fmt_g17(threshold_) << "\n";
    out << "converged = " << (converged_ ? 1 : 0) << "\n";
    out << "std.identity = " << (std_.identity ? 1 : 0) << "\n";
    out << "std.mean = " << detail::join_g17(std_.mean) << "\n";
    out << "std.scale = " << detail::join_g17(std_.scale) << "\n";
    serialize_impl(out);
  }

  const Standardizer& standardizer() const { return std_; }

 protected:
  void check_arity(std::size_t got) const {
    if (got != arity_)
      throw IntegrityError("model expects " + std::to_string(arity_) +
                           " features, got " + std::to_string(got));
  }
  virtual double score_impl(std::span<const double> x) const = 0;
  virtual void serialize_impl(std::ostream& out) const = 0;

  ModelKind kind_ = ModelKind::logistic;
  std::size_t arity_ = 0;
  double threshold_ = 0.5;
  bool converged_ = true;
  Standardizer std_;

  friend std::shared_ptr<const Classifier> load_classifier(std::istream&);
};

using ClassifierPtr = std::shared_ptr<const Classifier>;

// ---------------------------------------------------------------------------
// Logistic regression (IRLS)
// ---------------------------------------------------------------------------

struct LogisticConfig {
  double ridge = 1e-6;  // keeps separable data finite
  double tol = 1e-8;    // max coefficient change
  int max_iters = 100;
};

class LogisticModel final : public Classifier {
 public:
  std::vector<double> coef;    // intercept + p weights, standardized space
  std::vector<double> stderr_; // Wald standard errors, same space

  /// Coefficients mapped back to the raw feature space.
  std::vector<double> raw_coef() const {
    std::vector<double> out(coef.size());
    out[0] = coef[0];
    for (std::size_t j = 1; j < coef.size(); ++j) {
      out[j] = coef[j] / std_.scale[j - 1];
      out[0] -= coef[j] * std_.mean[j - 1] / std_.scale[j - 1];
    }
    return out;
  }
  std::vector<double> raw_stderr() const {
    std::vector<double> out(stderr_.size());
    if (out.empty()) return out;
    out[0] = stderr_[0];
    for (std::size_t j = 1; j < stderr_.size(); ++j)
      out[j] = stderr_[j] / std_.scale[j - 1];
    return out;
  }

 protected:
  double score_impl(std::span<const double> x) const override {
    const auto z = std_.apply(x);
    double eta = coef[0];
    for (std::size_t j = 0; j < z.size(); ++j) eta += coef[j + 1] * z[j];
    return detail::sigmoid_stable(eta);
  }
  void serialize_impl(std::ostream& out) const override {
    out << "coef = " << detail::join_g17(coef) << "\n";
    out << "stderr = " << detail::join_g17(stderr_) << "\n";
  }
  friend ClassifierPtr load_classifier(std::istream&);
  friend ClassifierPtr train_logistic(const Dataset&, const LogisticConfig&);
};

/// Maximum likelihood by damped Newton (IRLS) with a tiny ridge penalty on
/// the non-intercept coefficients. Non-convergence is reported through the
/// model's warning flag; a singular Hessian falls back to gradient ascent.
inline ClassifierPtr train_logistic(const Dataset& data,
                                    const LogisticConfig& cfg = {}) {
  data.validate();
  auto model = std::make_shared<LogisticModel>();
  model->kind_ = ModelKind::logistic;
  model->arity_ = data.p;
  model->std_ = Standardizer::fit(data);
  const Dataset d = model->std_.apply(data);

  const std::size_t m = d.p + 1;
  std::vector<double> beta(m, 0.0);

  auto linear = [&](std::size_t i, const std::vector<double>& b) {
    double eta = b[0];
    for (std::size_t j = 0; j < d.p; ++j) eta += b[j + 1] * d.at(i, j);
    return eta;
  };
  auto neg_penalized_ll = [&](const std::vector<double>& b) {
    double ll = 0;
    for (std::size_t i = 0; i < d.n; ++i) {
      const double eta = linear(i, b);
      // log sigma(eta) if y=1, log(1-sigma(eta)) if y=0, stably
      ll += d.y[i] ? -std::log1p(std::exp(-std::min(eta, 700.0)))
                   : -std::log1p(std::exp(std::min(eta, 700.0)));
    }
    double pen = 0;
    for (std::size_t j = 1; j < m; ++j) pen += b[j] * b[j];
    return -(ll - 0.5 * cfg.ridge * pen);
  };

  bool converged = false;
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    std::vector<double> pi(d.n);
    for (std::size_t i = 0; i < d.n; ++i)
      pi[i] = detail::sigmoid_stable(linear(i, beta));

    std::vector<double> grad(m, 0.0);
    Matrix hess(m, m);
    for (std::size_t i = 0; i < d.n; ++i) {
      const double r = static_cast<double>(d.y[i]) - pi[i];
      const double w = std::max(pi[i] * (1.0 - pi[i]), 1e-12);
      grad[0] += r;
      hess(0, 0) += w;
      for (std::size_t j = 0; j < d.p; ++j) {
        const double xj = d.at(i, j);
        grad[j + 1] += r * xj;
        hess(0, j + 1) += w * xj;
        for (std::size_t k = 0; k <= j; ++k)
          hess(j + 1, k + 1) += w * xj * d.at(i, k);
      }
    }
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t k = j + 1; k < m; ++k) hess(j, k) = hess(k, j);
    for (std::size_t j = 1; j < m; ++j) {
      grad[j] -= cfg.ridge * beta[j];
      hess(j, j) += cfg.ridge;
    }

    std::vector<double> delta;
    if (!cholesky_solve(hess, grad, delta) && !lu_solve(hess, grad, delta)) {
      delta = grad;  // gradient ascent fallback
      double gn = 0;
      for (double g : grad) gn += g * g;
      const double s = 1.0 / std::max(1.0, std::sqrt(gn));
      for (auto& v : delta) v *= s;
    }

    const double f0 = neg_penalized_ll(beta);
    double step = 1.0;
    std::vector<double> cand(m);
    bool improved = false;
    for (int bt = 0; bt < 40; ++bt) {
      for (std::size_t j = 0; j < m; ++j) cand[j] = beta[j] + step * delta[j];
      if (neg_penalized_ll(cand) <= f0) {
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) {
      converged = true;  // no direction improves: at a (numerical) optimum
      break;
    }
    double max_change = 0;
    for (std::size_t j = 0; j < m; ++j)
      max_change = std::max(max_change, std::fabs(cand[j] - beta[j]));
    beta = cand;
    if (max_change < cfg.tol) {
      converged = true;
      break;
    }
  }

  // Wald standard errors from the observed information (unpenalized)
  {
    Matrix hess(m, m);
    for (std::size_t i = 0; i < d.n; ++i) {
      double eta = beta[0];
      for (std::size_t j = 0; j < d.p; ++j) eta += beta[j + 1] * d.at(i, j);
      const double pi = detail::sigmoid_stable(eta);
      const double w = std::max(pi * (1.0 - pi), 1e-12);
      hess(0, 0) += w;
      for (std::size_t j = 0; j < d.p; ++j) {
        hess(0, j + 1) += w * d.at(i, j);
        for (std::size_t k = 0; k <= j; ++k)
          hess(j + 1, k + 1) += w * d.at(i, j) * d.at(i, k);
      }
    }
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t k = j + 1; k < m; ++k) hess(j, k) = hess(k, j);
    model->stderr_.assign(m, std::numeric_limits<double>::quiet_NaN());
    std::vector<double> e(m, 0.0), col;
    for (std::size_t j = 0; j < m; ++j) {
      e.assign(m, 0.0);
      e[j] = 1.0;
      if (cholesky_solve(hess, e, col) || lu_solve(hess, e, col))
        model->stderr_[j] = col[j] > 0 ? std::sqrt(col[j]) : 0.0;
    }
  }

  model->coef = std::move(beta);
  model->converged_ = converged;
  return model;
}

// ---------------------------------------------------------------------------
// Linear discriminant analysis
// ---------------------------------------------------------------------------

struct LdaConfig {
  double jitter = 1e-8;
};

class LdaModel final : public Classifier {
 public:
  std::vector<double> weights;  // standardized space
  double bias = 0;

  /// Discriminant direction in raw feature space (parallel to
  /// pooled-covariance^-1 (mu1 - mu0)).
  std::vector<double> raw_direction() const {
    std::vector<double> out(weights.size());
    for (std::size_t j = 0; j < weights.size(); ++j)
      out[j] = weights[j] / std_.scale[j];
    return out;
  }
  double discriminant(std::span<const double> x) const {
    check_arity(x.size());
    const auto z = std_.apply(x);
    double d = bias;
    for (std::size_t j = 0; j < z.size(); ++j) d += weights[j] * z[j];
    return d;
  }

 protected:
  double score_impl(std::span<const double> x) const override {
    // posterior of the homoscedastic Gaussian model
    const auto z = std_.apply(x);
    double d = bias;
    for (std::size_t j = 0; j < z.size(); ++j) d += weights[j] * z[j];
    return detail::sigmoid_stable(d);
  }
  void serialize_impl(std::ostream& out) const override {
    out << "weights = " << detail::join_g17(weights) << "\n";
    out << "bias = " << fmt_g17(bias) << "\n";
  }
  friend ClassifierPtr load_classifier(std::istream&);
  friend ClassifierPtr train_lda(const Dataset&, const LdaConfig&);
};

/// Closed-form two-class LDA: pooled within-class covariance (with ridge
/// jitter) against the class-mean difference, threshold from the empirical
/// priors. Predicts 1 iff the discriminant is positive.
inline ClassifierPtr train_lda(const Dataset& data, const LdaConfig& cfg = {}) {
  data.validate();
  auto model = std::make_shared<LdaModel>();
  model->kind_ = ModelKind::lda;
  model->arity_ = data.p;
  model->std_ = Standardizer::fit(data);
  const Dataset d = model->std_.apply(data);

  const std::size_t n1 = d.count(1), n0 = d.n - n1;
  std::vector<double> mu0(d.p, 0.0), mu1(d.p, 0.0);
  for (std::size_t i = 0; i < d.n; ++i) {
    auto& mu = d.y[i] ? mu1 : mu0;
    for (std::size_t j = 0; j < d.p; ++j) mu[j] += d.at(i, j);
  }
  for (std::size_t j = 0; j < d.p; ++j) {
    mu0[j] /= static_cast<double>(n0);
    mu1[j] /= static_cast<double>(n1);
  }

  Matrix cov(d.p, d.p);
  for (std::size_t i = 0; i < d.n; ++i) {
    const auto& mu = d.y[i] ? mu1 : mu0;
    for (std::size_t j = 0; j < d.p; ++j) {
      const double cj = d.at(i, j) - mu[j];
      for (std::size_t k = 0; k <= j; ++k)
        cov(j, k) += cj * (d.at(i, k) - mu[k]);
    }
  }
  for (std::size_t j = 0; j < d.p; ++j)
    for (std::size_t k = 0; k <= j; ++k) {
      cov(j, k) /= static_cast<double>(d.n - 2);
      cov(k, j) = cov(j, k);
    }
  for (std::size_t j = 0; j < d.p; ++j) cov(j, j) += cfg.jitter;

  std::vector<double> diff(d.p);
  for (std::size_t j = 0; j < d.p; ++j) diff[j] = mu1[j] - mu0[j];
  std::vector<double> w;
  if (!cholesky_solve(cov, diff, w) && !lu_solve(cov, diff, w)) {
    std::string degenerate;
    for (std::size_t j = 0; j < d.p; ++j)
      if (cov(j, j) <= 2 * cfg.jitter)
        degenerate += (degenerate.empty() ? "" : ", ") + std::to_string(j);
    throw IntegrityError(
        "lda: singular pooled covariance after jitter; degenerate feature(s): " +
        (degenerate.empty() ? std::string("<none isolated>") : degenerate));
  }

  double mid = 0;
  for (std::size_t j = 0; j < d.p; ++j) mid += w[j] * 0.5 * (mu0[j] + mu1[j]);
  model->weights = std::move(w);
  model->bias = -mid + std::log(static_cast<double>(n1) / static_cast<double>(n0));
  return model;
}

// ---------------------------------------------------------------------------
// Gaussian naive Bayes
// ---------------------------------------------------------------------------

struct NbConfig {
  double var_floor = 1e-9;
};

class NaiveBayesModel final : public Classifier {
 public:
  double log_prior0 = 0, log_prior1 = 0;
  std::vector<double> mean0, var0, mean1, var1;

 protected:
  double score_impl(std::span<const double> x) const override {
    double l0 = log_prior0, l1 = log_prior1;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double d0 = x[j] - mean0[j];
      const double d1 = x[j] - mean1[j];
      l0 += -0.5 * std::log(2.0 * M_PI * var0[j]) - d0 * d0 / (2.0 * var0[j]);
      l1 += -0.5 * std::log(2.0 * M_PI * var1[j]) - d1 * d1 / (2.0 * var1[j]);
    }
    return detail::sigmoid_stable(l1 - l0);
  }
  void serialize_impl(std::ostream& out) const override {
    out << "log_prior0 = " << fmt_g17(log_prior0) << "\n";
    out << "log_prior1 = " << fmt_g17(log_prior1) << "\n";
    out << "mean0 = " << detail::join_g17(mean0) << "\n";
    out << "var0 = " << detail::join_g17(var0) << "\n";
    out << "mean1 = " << detail::join_g17(mean1) << "\n";
    out << "var1 = " << detail::join_g17(var1) << "\n";
  }
  friend ClassifierPtr load_classifier(std::istream&);
  friend ClassifierPtr train_nb(const Dataset&, const NbConfig&);
};

/// Empirical priors and per-class per-feature Gaussians; the score is the
/// posterior probability of a lane change.
inline ClassifierPtr train_nb(const Dataset& data, const NbConfig& cfg = {}) {
  data.validate();
  auto model = std::make_shared<NaiveBayesModel>();
  model->kind_ = ModelKind::naive_bayes;
  model->arity_ = data.p;
  model->std_ = Standardizer::none(data.p);

  const std::size_t n1 = data.count(1), n0 = data.n - n1;
  model->log_prior0 = std::log(static_cast<double>(n0) / static_cast<double>(data.n));
  model->log_prior1 = std::log(static_cast<double>(n1) / static_cast<double>(data.n));
  model->mean0.assign(data.p, 0.0);
  model->mean1.assign(data.p, 0.0);
  model->var0.assign(data.p, 0.0);
  model->var1.assign(data.p, 0.0);
  for (std::size_t i = 0; i < data.n; ++i) {
    auto& mu = data.y[i] ? model->mean1 : model->mean0;
    for (std::size_t j = 0; j < data.p; ++j) mu[j] += data.at(i, j);
  }
  for (std::size_t j = 0; j < data.p; ++j) {
    model->mean0[j] /= static_cast<double>(n0);
    model->mean1[j] /= static_cast<double>(n1);
  }
  for (std::size_t i = 0; i < data.n; ++i) {
    auto& mu = data.y[i] ? model->mean1 : model->mean0;
    auto& var = data.y[i] ? model->var1 : model->var0;
    for (std::size_t j = 0; j < data.p; ++j) {
      const double c = data.at(i, j) - mu[j];
      var[j] += c * c;
    }
  }
  for (std::size_t j = 0; j < data.p; ++j) {
    model->var0[j] = std::max(model->var0[j] / static_cast<double>(n0), cfg.var_floor);
    model->var1[j] = std::max(model->var1[j] / static_cast<double>(n1), cfg.var_floor);
  }
  return model;
}

// ---------------------------------------------------------------------------
// CART decision tree
// ---------------------------------------------------------------------------

struct TreeConfig {
  int max_depth = 8;
  int min_leaf = 5;
  double min_impurity_decrease = 1e-4;
};

class DecisionTreeModel final : public Classifier {
 public:
  struct Node {
    int feature = -1;       // -1 marks a leaf
    double threshold = 0;
    int left = -1, right = -1;
    double score = 0;       // class-1 fraction in the leaf
  };
  std::vector<Node> nodes;  // nodes[0] is the root

  const Node& root() const { return nodes.front(); }

 protected:
  double score_impl(std::span<const double> x) const override {
    int idx = 0;
    for (;;) {
      const Node& nd = nodes[static_cast<std::size_t>(idx)];
      if (nd.feature < 0) return nd.score;
      idx = x[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left
                                                                    : nd.right;
    }
  }
  void serialize_impl(std::ostream& out) const override {
    out << "nodes = ";
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const Node& nd = nodes[i];
      if (i) out << ';';
      out << nd.feature << ':' << fmt_g17(nd.threshold) << ':' << nd.left << ':'
          << nd.right << ':' << fmt_g17(nd.score);
    }
    out << "\n";
  }
  friend ClassifierPtr load_classifier(std::istream&);
  friend ClassifierPtr train_tree(const Dataset&, const TreeConfig&);
};

namespace detail {

// Gini impurity from integer class counts: 1 - (n0^2 + n1^2) / n^2.
inline double gini(long long n0, long long n1) {
  const double n = static_cast<double>(n0 + n1);
  if (n <= 0) return 0.0;
  const double a = static_cast<double>(n0), b = static_cast<double>(n1);
  return 1.0 - (a * a + b * b) / (n * n);
}

struct BestSplit {
  bool found = false;
  int feature = -1;
  double threshold = 0;
  double decrease = 0;
};

/// Best Gini split over all (feature, midpoint threshold) pairs; ties go to
/// the lowest feature index, then the lowest threshold.
inline BestSplit best_gini_split(const Dataset& d,
                                 const std::vector<std::size_t>& rows,
                                 int min_leaf) {
  BestSplit best;
  const long long n = static_cast<long long>(rows.size());
  long long n1 = 0;
  for (auto r : rows) n1 += d.y[r];
  const double parent = gini(n - n1, n1);

  std::vector<std::pair<double, int>> col(rows.size());
  for (std::size_t j = 0; j < d.p; ++j) {
    for (std::size_t i = 0; i < rows.size(); ++i)
      col[i] = {d.at(rows[i], j), d.y[rows[i]]};
    std::sort(col.begin(), col.end());
    long long l0 = 0, l1 = 0;
    for (std::size_t i = 0; i + 1 < col.size(); ++i) {
      if (col[i].second) ++l1; else ++l0;
      if (col[i].first == col[i + 1].first) continue;
      const long long nl = l0 + l1, nr = n - nl;
      if (nl < min_leaf || nr < min_leaf) continue;
      const double child =
          (static_cast<double>(nl) * gini(l0, l1) +
           static_cast<double>(nr) * gini(n - n1 - l0, n1 - l1)) /
          static_cast<double>(n);
      const double dec = parent - child;
      if (dec > best.decrease) {
        best.found = true;
        best.feature = static_cast<int>(j);
        best.threshold = 0.5 * (col[i].first + col[i + 1].first);
        best.decrease = dec;
      }
    }
  }
  return best;
}

}  // namespace detail

/// CART with Gini impurity and axis-aligned midpoint thresholds; growth
/// stops on depth, leaf size, purity, or marginal impurity improvement.
inline ClassifierPtr train_tree(const Dataset& data, const TreeConfig& cfg = {}) {
  data.validate(/*require_both_classes=*/false);
  if (data.n < 2 * static_cast<std::size_t>(cfg.min_leaf))
    throw IntegrityError("tree: need at least 2*min_leaf rows");
  auto model = std::make_shared<DecisionTreeModel>();
  model->kind_ = ModelKind::decision_tree;
  model->arity_ = data.p;
  model->std_ = Standardizer::none(data.p);

  struct Work {
    std::vector<std::size_t> rows;
    int depth = 0;
    int node = 0;
  };
  auto& nodes = model->nodes;

  std::vector<Work> stack;
  {
    Work w;
    w.rows.resize(data.n);
    for (std::size_t i = 0; i < data.n; ++i) w.rows[i] = i;
    nodes.emplace_back();
    stack.push_back(std::move(w));
  }
  while (!stack.empty()) {
    Work w = std::move(stack.back());
    stack.pop_back();
    long long n1 = 0;
    for (auto r : w.rows) n1 += data.y[r];
    const long long n = static_cast<long long>(w.rows.size());
    nodes[static_cast<std::size_t>(w.node)].score =
        static_cast<double>(n1) / static_cast<double>(n);
    if (n1 == 0 || n1 == n || w.depth >= cfg.max_depth ||
        n < 2 * cfg.min_leaf)
      continue;
    const auto split = detail::best_gini_split(data, w.rows, cfg.min_leaf);
    if (!split.found || split.decrease < cfg.min_impurity_decrease) continue;

    Work left, right;
    left.depth = right.depth = w.depth + 1;
    for (auto r : w.rows)
      (data.at(r, static_cast<std::size_t>(split.feature)) <= split.threshold
           ? left.rows
           : right.rows)
          .push_back(r);
    const int left_idx = static_cast<int>(nodes.size());
    nodes.emplace_back();
    const int right_idx = static_cast<int>(nodes.size());
    nodes.emplace_back();
    DecisionTreeModel::Node& nd = nodes[static_cast<std::size_t>(w.node)];
    nd.feature = split.feature;
    nd.threshold = split.threshold;
    nd.left = left_idx;
    nd.right = right_idx;
    left.node = left_idx;
    right.node = right_idx;
    stack.push_back(std::move(right));
    stack.push_back(std::move(left));
  }
  return model;
}

// ---------------------------------------------------------------------------
// Linear soft-margin SVM
// ---------------------------------------------------------------------------

struct SvmConfig {
  double C = 1.0;
  int epochs = 200;
};

class SvmModel final : public Classifier {
 public:
  std::vector<double> weights;  // standardized space
  double bias = 0;
  double platt_a = 1.0, platt_b = 0.0;

  double margin(std::span<const double> x) const {
    check_arity(x.size());
    const auto z = std_.apply(x);
    double m = bias;
    for (std::size_t j = 0; j < z.size(); ++j) m += weights[j] * z[j];
    return m;
  }

  int predict(std::span<const double> x) const override {
    return margin(x) > 0 ? 1 : 0;
  }

 protected:
  double score_impl(std::span<const double> x) const override {
    const auto z = std_.apply(x);
    double m = bias;
    for (std::size_t j = 0; j < z.size(); ++j) m += weights[j] * z[j];
    return detail::sigmoid_stable(platt_a * m + platt_b);
  }
  void serialize_impl(std::ostream& out) const override {
    out << "weights = " << detail::join_g17(weights) << "\n";
    out << "bias = " << fmt_g17(bias) << "\n";
    out << "platt_a = " << fmt_g17(platt_a) << "\n";
    out << "platt_b = " << fmt_g17(platt_b) << "\n";
  }
  friend ClassifierPtr load_classifier(std::istream&);
  friend ClassifierPtr train_svm(const Dataset&, const SvmConfig&);
};

namespace detail {

inline double svm_objective(const Dataset& d, const std::vector<double>& w,
                            double b, double C) {
  double obj = 0;
  for (double v : w) obj += 0.5 * v * v;
  for (std::size_t i = 0; i < d.n; ++i) {
    double m = b;
    for (std::size_t j = 0; j < d.p; ++j) m += w[j] * d.at(i, j);
    const double yy = d.y[i] ? 1.0 : -1.0;
    obj += C * std::max(0.0, 1.0 - yy * m);
  }
  return obj;
}

// 1D logistic fit of sigma(a m + b) against 0/1 labels (Newton, small ridge).
inline void platt_fit(const std::vector<double>& margins,
                      const std::vector<int>& y, double& a, double& b) {
  a = 1.0;
  b = 0.0;
  const double ridge = 1e-6;
  for (int iter = 0; iter < 50; ++iter) {
    double g0 = -ridge * a, g1 = -ridge * b;
    double h00 = ridge, h01 = 0, h11 = ridge;
    for (std::size_t i = 0; i < margins.size(); ++i) {
      const double pi = sigmoid_stable(a * margins[i] + b);
      const double r = static_cast<double>(y[i]) - pi;
      const double w = std::max(pi * (1.0 - pi), 1e-12);
      g0 += r * margins[i];
      g1 += r;
      h00 += w * margins[i] * margins[i];
      h01 += w * margins[i];
      h11 += w;
    }
    const double det = h00 * h11 - h01 * h01;
    if (std::fabs(det) < 1e-30) break;
    const double da = (h11 * g0 - h01 * g1) / det;
    const double db = (h00 * g1 - h01 * g0) / det;
    a += da;
    b += db;
    if (std::max(std::fabs(da), std::fabs(db)) < 1e-10) break;
  }
}

}  // namespace detail

/// Deterministic epoch-ordered subgradient descent on
/// 1/2 ||w||^2 + C sum hinge, Pegasos step 1/(lambda t) with lambda = 1/(nC)
/// and a one-epoch offset on t so early steps stay bounded. The
/// best-objective epoch is kept. Scores are a Platt-style logistic rescaling
/// of the margin; predictions use the raw margin sign.
inline ClassifierPtr train_svm(const Dataset& data, const SvmConfig& cfg = {}) {
  data.validate(/*require_both_classes=*/false);
  auto model = std::make_shared<SvmModel>();
  model->kind_ = ModelKind::svm;
  model->arity_ = data.p;
  model->std_ = Standardizer::fit(data);
  const Dataset d = model->std_.apply(data);

  const std::size_t n1 = d.count(1);
  if (n1 == 0 || n1 == d.n) {  // constant predictor of the single class
    model->weights.assign(d.p, 0.0);
    model->bias = n1 == d.n ? 1.0 : -1.0;
    model->platt_a = 0.0;
    model->platt_b = n1 == d.n ? 700.0 : -700.0;
    return model;
  }

  const double lambda = 1.0 / (static_cast<double>(d.n) * cfg.C);
  const double wmax = 1.0 / std::sqrt(lambda);
  std::vector<double> w(d.p, 0.0);
  double b = 0.0;
  std::vector<double> best_w = w;
  double best_b = b;
  double best_obj = detail::svm_objective(d, w, b, cfg.C);

  double t = static_cast<double>(d.n);  // offset: eta starts at C
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < d.n; ++i) {
      t += 1.0;
      const double eta = 1.0 / (lambda * t);
      const double yy = d.y[i] ? 1.0 : -1.0;
      double m = b;
      for (std::size_t j = 0; j < d.p; ++j) m += w[j] * d.at(i, j);
      const double shrink = 1.0 - eta * lambda;
      for (auto& v : w) v *= shrink;
      if (yy * m < 1.0) {
        for (std::size_t j = 0; j < d.p; ++j) w[j] += eta * yy * d.at(i, j);
        b += eta * yy;
      }
      double norm = 0;
      for (double v : w) norm += v * v;
      norm = std::sqrt(norm);
      if (norm > wmax)
        for (auto& v : w) v *= wmax / norm;
    }
    const double obj = detail::svm_objective(d, w, b, cfg.C);
    if (obj < best_obj) {
      best_obj = obj;
      best_w = w;
      best_b = b;
    }
  }
  model->weights = std::move(best_w);
  model->bias = best_b;

  std::vector<double> margins(d.n);
  for (std::size_t i = 0; i < d.n; ++i) {
    double m = model->bias;
    for (std::size_t j = 0; j < d.p; ++j) m += model->weights[j] * d.at(i, j);
    margins[i] = m;
  }
  detail::platt_fit(margins, d.y, model->platt_a, model->platt_b);
  return model;
}

// ---------------------------------------------------------------------------
// Shallow feed-forward network
// ---------------------------------------------------------------------------

struct AnnConfig {
  int hidden = 2;
  int epochs = 500;
  double lr = 0.05;
  std::uint64_t seed = 1;
  int max_restarts = 3;
};

class AnnModel final : public Classifier {
 public:
  int hidden = 2;
  std::vector<double> theta;  // [W1 (h*p), b1 (h), w2 (h), b2]

 protected:
  double score_impl(std::span<const double> x) const override {
    const auto z = std_.apply(x);
    const std::size_t p = z.size();
    const std::size_t h = static_cast<std::size_t>(hidden);
    double out = theta[h * p + h + h];  // b2
    for (std::size_t k = 0; k < h; ++k) {
      double a = theta[h * p + k];  // b1[k]
      for (std::size_t j = 0; j < p; ++j) a += theta[k * p + j] * z[j];
      out += theta[h * p + h + k] * detail::sigmoid_stable(a);
    }
    return detail::sigmoid_stable(out);
  }
  void serialize_impl(std::ostream& out) const override {
    out << "hidden = " << hidden << "\n";
    out << "theta = " << detail::join_g17(theta) << "\n";
  }
  friend ClassifierPtr load_classifier(std::istream&);
  friend ClassifierPtr train_ann(const Dataset&, const AnnConfig&);
};

namespace detail {

/// Mean cross-entropy and its gradient for the p -> h -> 1 sigmoid network.
/// Exposed for the finite-difference gradient check.
inline double ann_loss_grad(std::span<const double> theta, int hidden,
                            const Dataset& d, std::span<double> grad) {
  const std::size_t p = d.p;
  const std::size_t h = static_cast<std::size_t>(hidden);
  const std::size_t w2_off = h * p + h;
  const std::size_t b2_off = w2_off + h;
  for (auto& g : grad) g = 0.0;
  double loss = 0;
  std::vector<double> act(h);
  const double inv_n = 1.0 / static_cast<double>(d.n);
  for (std::size_t i = 0; i < d.n; ++i) {
    double out_pre = theta[b2_off];
    for (std::size_t k = 0; k < h; ++k) {
      double a = theta[h * p + k];
      for (std::size_t j = 0; j < p; ++j) a += theta[k * p + j] * d.at(i, j);
      act[k] = sigmoid_stable(a);
      out_pre += theta[w2_off + k] * act[k];
    }
    const double o = sigmoid_stable(out_pre);
    const double yy = static_cast<double>(d.y[i]);
    const double oc = std::min(1.0 - 1e-12, std::max(1e-12, o));
    loss += -(yy * std::log(oc) + (1.0 - yy) * std::log(1.0 - oc)) * inv_n;
    const double dout = (o - yy) * inv_n;  // d loss / d out_pre
    grad[b2_off] += dout;
    for (std::size_t k = 0; k < h; ++k) {
      grad[w2_off + k] += dout * act[k];
      const double dk = dout * theta[w2_off + k] * act[k] * (1.0 - act[k]);
      grad[h * p + k] += dk;
      for (std::size_t j = 0; j < p; ++j) grad[k * p + j] += dk * d.at(i, j);
    }
  }
  return loss;
}

}  // namespace detail

/// Full-batch gradient descent on cross-entropy for a p -> hidden -> 1
/// sigmoid network, weights seeded uniform in [-0.5, 0.5]. A non-finite loss
/// halves the learning rate and restarts from the same initialization, at
/// most max_restarts times.
inline ClassifierPtr train_ann(const Dataset& data, const AnnConfig& cfg = {}) {
  data.validate(/*require_both_classes=*/false);
  auto model = std::make_shared<AnnModel>();
  model->kind_ = ModelKind::ann;
  model->arity_ = data.p;
  model->hidden = cfg.hidden;
  model->std_ = Standardizer::fit(data);
  const Dataset d = model->std_.apply(data);

  const std::size_t h = static_cast<std::size_t>(cfg.hidden);
  const std::size_t dim = h * d.p + h + h + 1;
  std::vector<double> init(dim);
  Rng rng(cfg.seed);
  for (auto& v : init) v = rng.uniform(-0.5, 0.5);

  double lr = cfg.lr;
  std::vector<double> theta, grad(dim);
  for (int attempt = 0; attempt <= cfg.max_restarts; ++attempt) {
    theta = init;
    bool ok = true;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      const double loss = detail::ann_loss_grad(theta, cfg.hidden, d, grad);
      if (!std::isfinite(loss)) {
        ok = false;
        break;
      }
      for (std::size_t j = 0; j < dim; ++j) theta[j] -= lr * grad[j];
    }
    if (ok) {
      model->theta = std::move(theta);
      return model;
    }
    lr *= 0.5;
  }
  throw DomainError("ann: loss diverged after " +
                    std::to_string(cfg.max_restarts) + " restarts");
}

// ---------------------------------------------------------------------------
// Dispatch and serialization
// ---------------------------------------------------------------------------

struct TrainConfig {
  LogisticConfig logistic;
  LdaConfig lda;
  NbConfig nb;
  TreeConfig tree;
  SvmConfig svm;
  AnnConfig ann;
};

/// Train any of the six base classifiers. `seed` feeds the stochastic
/// trainers (only the ANN); the others are fully deterministic.
inline ClassifierPtr train_classifier(ModelKind kind, const Dataset& data,
                                      const TrainConfig& cfg = {},
                                      std::uint64_t seed = 1) {
  switch (kind) {
    case ModelKind::logistic: return train_logistic(data, cfg.logistic);
    case ModelKind::lda: return train_lda(data, cfg.lda);
    case ModelKind::naive_bayes: return train_nb(data, cfg.nb);
    case ModelKind::decision_tree: return train_tree(data, cfg.tree);
    case ModelKind::svm: return train_svm(data, cfg.svm);
    case ModelKind::ann: {
      AnnConfig ac = cfg.ann;
      ac.seed = seed;
      return train_ann(data, ac);
    }
  }
  throw ConfigError("train_classifier: unknown kind");
}

inline ClassifierPtr load_classifier(std::istream& in) {
  std::string version;
  std::getline(in, version);
  if (trim(version) != "lcbench-model v1")
    throw ParseError("model file: unsupported version '" + trim(version) + "'");
  const KeyValueMap kv = parse_key_values(in);
  const ModelKind kind = parse_model_kind(require_key(kv, "kind", "model"));

  std::shared_ptr<Classifier> model;
  switch (kind) {
    case ModelKind::logistic: {
      auto m = std::make_shared<LogisticModel>();
      m->coef = detail::parse_doubles(require_key(kv, "coef", "model"), "coef");
      m->stderr_ = detail::parse_doubles(kv.count("stderr") ? kv.at("stderr") : "",
                                         "stderr");
      model = m;
      break;
    }
    case ModelKind::lda: {
      auto m = std::make_shared<LdaModel>();
      m->weights =
          detail::parse_doubles(require_key(kv, "weights", "model"), "weights");
      m->bias = parse_double(require_key(kv, "bias", "model"), "bias");
      model = m;
      break;
    }
    case ModelKind::naive_bayes: {
      auto m = std::make_shared<NaiveBayesModel>();
      m->log_prior0 = parse_double(require_key(kv, "log_prior0", "model"), "log_prior0");
      m->log_prior1 = parse_double(require_key(kv, "log_prior1", "model"), "log_prior1");
      m->mean0 = detail::parse_doubles(require_key(kv, "mean0", "model"), "mean0");
      m->var0 = detail::parse_doubles(require_key(kv, "var0", "model"), "var0");
      m->mean1 = detail::parse_doubles(require_key(kv, "mean1", "model"), "mean1");
      m->var1 = detail::parse_doubles(require_key(kv, "var1", "model"), "var1");
      model = m;
      break;
    }
    case ModelKind::decision_tree: {
      auto m = std::make_shared<DecisionTreeModel>();
      for (const auto& tok : split(require_key(kv, "nodes", "model"), ';')) {
        const auto f = split(tok, ':');
        if (f.size() != 5) throw ParseError("model file: bad tree node '" + tok + "'");
        DecisionTreeModel::Node nd;
        nd.feature = static_cast<int>(parse_int(trim(f[0]), "node.feature"));
        nd.threshold = parse_double(trim(f[1]), "node.threshold");
        nd.left = static_cast<int>(parse_int(trim(f[2]), "node.left"));
        nd.right = static_cast<int>(parse_int(trim(f[3]), "node.right"));
        nd.score = parse_double(trim(f[4]), "node.score");
        m->nodes.push_back(nd);
      }
      model = m;
      break;
    }
    case ModelKind::svm: {
      auto m = std::make_shared<SvmModel>();
      m->weights =
          detail::parse_doubles(require_key(kv, "weights", "model"), "weights");
      m->bias = parse_double(require_key(kv, "bias", "model"), "bias");
      m->platt_a = parse_double(require_key(kv, "platt_a", "model"), "platt_a");
      m->platt_b = parse_double(require_key(kv, "platt_b", "model"), "platt_b");
      model = m;
      break;
    }
    case ModelKind::ann: {
      auto m = std::make_shared<AnnModel>();
      m->hidden = static_cast<int>(parse_int(require_key(kv, "hidden", "model"), "hidden"));
      m->theta = detail::parse_doubles(require_key(kv, "theta", "model"), "theta");
      model = m;
      break;
    }
  }
  model->kind_ = kind;
  model->arity_ =
      static_cast<std::size_t>(parse_int(require_key(kv, "arity", "model"), "arity"));
  model->threshold_ = parse_double(require_key(kv, "threshold", "model"), "threshold");
  model->converged_ = parse_int(require_key(kv, "converged", "model"), "converged") != 0;
  model->std_.identity =
      parse_int(require_key(kv, "std.identity", "model"), "std.identity") != 0;
  model->std_.mean =
      detail::parse_doubles(require_key(kv, "std.mean", "model"), "std.mean");
  model->std_.scale =
      detail::parse_doubles(require_key(kv, "std.scale", "model"), "std.scale");
  return model;
}

inline ClassifierPtr load_classifier_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open model file: " + path);
  return load_classifier(in);
}

}  // namespace lcbench
