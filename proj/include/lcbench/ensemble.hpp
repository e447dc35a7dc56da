#pragma once

// The ten ensemble meta-heuristics: four bagging rules (max, min, mean,
// weighted mean) over the six base classifiers, and six stacking
// meta-learners trained on the explanatory variables augmented with the base
// predictions.

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lcbench/classifiers.hpp"
#include "lcbench/common.hpp"
#include "lcbench/linalg.hpp"

namespace lcbench {

/// Canonical base-model order used everywhere an ensemble stores or reports
/// its six members.
inline const std::array<ModelKind, 6>& base_model_order() {
  static const std::array<ModelKind, 6> order = {
      ModelKind::logistic, ModelKind::lda,  ModelKind::naive_bayes,
      ModelKind::decision_tree, ModelKind::svm, ModelKind::ann};
  return order;
}

enum class EnsembleKind {
  bag_max,
  bag_min,
  bag_mean,
  bag_mean_star,
  stack_lr,
  stack_lda,
  stack_nb,
  stack_dt,
  stack_svm,
  stack_ann,
};

inline const char* to_string(EnsembleKind k) {
  switch (k) {
    case EnsembleKind::bag_max: return "max";
    case EnsembleKind::bag_min: return "min";
    case EnsembleKind::bag_mean: return "mean";
    case EnsembleKind::bag_mean_star: return "mean*";
    case EnsembleKind::stack_lr: return "stack-lr";
    case EnsembleKind::stack_lda: return "stack-lda";
    case EnsembleKind::stack_nb: return "stack-nb";
    case EnsembleKind::stack_dt: return "stack-dt";
    case EnsembleKind::stack_svm: return "stack-svm";
    default: return "stack-ann";
  }
}

inline EnsembleKind parse_ensemble_kind(std::string_view s) {
  const std::string v = lower(trim(s));
  if (v == "max") return EnsembleKind::bag_max;
  if (v == "min") return EnsembleKind::bag_min;
  if (v == "mean") return EnsembleKind::bag_mean;
  if (v == "mean*" || v == "mean-star") return EnsembleKind::bag_mean_star;
  if (v == "stack-lr") return EnsembleKind::stack_lr;
  if (v == "stack-lda") return EnsembleKind::stack_lda;
  if (v == "stack-nb") return EnsembleKind::stack_nb;
  if (v == "stack-dt") return EnsembleKind::stack_dt;
  if (v == "stack-svm") return EnsembleKind::stack_svm;
  if (v == "stack-ann") return EnsembleKind::stack_ann;
  throw ParseError("unknown ensemble kind '" + v + "'");
}

inline bool is_stacking(EnsembleKind k) {
  return k >= EnsembleKind::stack_lr;
}

inline ModelKind stacking_meta_kind(EnsembleKind k) {
  switch (k) {
    case EnsembleKind::stack_lr: return ModelKind::logistic;
    case EnsembleKind::stack_lda: return ModelKind::lda;
    case EnsembleKind::stack_nb: return ModelKind::naive_bayes;
    case EnsembleKind::stack_dt: return ModelKind::decision_tree;
    case EnsembleKind::stack_svm: return ModelKind::svm;
    case EnsembleKind::stack_ann: return ModelKind::ann;
    default: throw ConfigError("not a stacking kind");
  }
}

// ---------------------------------------------------------------------------
// Bagging rules
// ---------------------------------------------------------------------------

/// Combine six 0/1 base predictions. max is OR, min is AND, mean is the
/// majority (ties decided by a Bernoulli(1/2) draw from rng), mean* is a
/// weighted vote (sum w_i b_i > 1/2; a tie at exactly 1/2 resolves to 0).
inline int bag_predict(EnsembleKind kind, const std::array<int, 6>& votes,
                       std::span<const double> weights, Rng& rng) {
  int ones = 0;
  for (int v : votes) ones += v != 0;
  switch (kind) {
    case EnsembleKind::bag_max: return ones > 0 ? 1 : 0;
    case EnsembleKind::bag_min: return ones == 6 ? 1 : 0;
    case EnsembleKind::bag_mean:
      if (ones * 2 == 6) return rng.bernoulli(0.5) ? 1 : 0;
      return ones * 2 > 6 ? 1 : 0;
    case EnsembleKind::bag_mean_star: {
      double sum = 0;
      for (int i = 0; i < 6; ++i)
        if (votes[static_cast<size_t>(i)]) sum += weights[static_cast<size_t>(i)];
      return sum > 0.5 ? 1 : 0;
    }
    default:
      throw ConfigError("bag_predict: not a bagging kind");
  }
}

// ---------------------------------------------------------------------------
// Ensemble model
// ---------------------------------------------------------------------------

class EnsembleModel {
 public:
  EnsembleKind kind = EnsembleKind::bag_mean;
  std::array<ClassifierPtr, 6> bases;  // base_model_order()
  std::array<double, 6> weights{};     // mean*: normalized training accuracies
  ClassifierPtr meta;                  // stacking meta-learner over p+6 inputs
  std::uint64_t tie_seed = 0;

  std::size_t arity() const { return bases[0]->arity(); }

  std::array<int, 6> base_votes(std::span<const double> x) const {
    std::array<int, 6> votes{};
    for (size_t i = 0; i < 6; ++i) votes[i] = bases[i]->predict(x);
    return votes;
  }

  /// Predict one sample. `sample_key` seeds the tie-break stream of the mean
  /// rule, so results do not depend on evaluation order or parallelism.
  int predict(std::span<const double> x, std::uint64_t sample_key = 0) const {
    const auto votes = base_votes(x);
    if (is_stacking(kind)) return meta->predict(augment(x, votes));
    Rng rng(substream_seed(tie_seed, sample_key));
    return bag_predict(kind, votes, weights, rng);
  }

  /// Score where one is defined (mean*: weighted vote share; stacking: meta
  /// score). The max/min/mean consensus rules have no score.
  bool has_score() const {
    return kind == EnsembleKind::bag_mean_star || is_stacking(kind);
  }
  double score(std::span<const double> x) const {
    const auto votes = base_votes(x);
    if (is_stacking(kind)) return meta->score(augment(x, votes));
    if (kind != EnsembleKind::bag_mean_star)
      throw ConfigError("ensemble: no score for consensus rules");
    double sum = 0;
    for (size_t i = 0; i < 6; ++i)
      if (votes[i]) sum += weights[i];
    return sum;
  }

  static std::vector<double> augment(std::span<const double> x,
                                     const std::array<int, 6>& votes) {
    std::vector<double> out(x.begin(), x.end());
    for (int v : votes) out.push_back(static_cast<double>(v));
    return out;
  }
};

/// Train the six base models on `data`. ANN randomness comes from a
/// substream of `seed` keyed by the base index.
inline std::array<ClassifierPtr, 6> train_bases(const Dataset& data,
                                                const TrainConfig& cfg = {},
                                                std::uint64_t seed = 1) {
  std::array<ClassifierPtr, 6> bases;
  for (size_t i = 0; i < 6; ++i)
    bases[i] = train_classifier(base_model_order()[i], data, cfg,
                                substream_seed(seed, i));
  return bases;
}

namespace detail {

inline double training_error(const Classifier& model, const Dataset& data) {
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < data.n; ++i)
    wrong += model.predict(data.row(i)) != data.y[i];
  return static_cast<double>(wrong) / static_cast<double>(data.n);
}

}  // namespace detail

/// Assemble an ensemble from already-trained bases. mean* weights are the
/// normalized training accuracies (1 - total training error). Stacking
/// trains its meta-learner on [X | b1..b6] where the base predictions are
/// produced on the same training rows the bases saw (the reference
/// procedure; the leakage risk is accepted and documented).
inline EnsembleModel make_ensemble(EnsembleKind kind,
                                   std::array<ClassifierPtr, 6> bases,
                                   const Dataset& train_data,
                                   const TrainConfig& cfg = {},
                                   std::uint64_t seed = 1) {
  EnsembleModel em;
  em.kind = kind;
  em.bases = std::move(bases);
  em.tie_seed = substream_seed(seed, 0x7ee5);

  if (kind == EnsembleKind::bag_mean_star) {
    double total = 0;
    for (size_t i = 0; i < 6; ++i) {
      em.weights[i] = 1.0 - detail::training_error(*em.bases[i], train_data);
      total += em.weights[i];
    }
    if (total <= 0) {
      em.weights.fill(1.0 / 6.0);
    } else {
      for (auto& w : em.weights) w /= total;
    }
  } else if (is_stacking(kind)) {
    Dataset aug;
    aug.n = train_data.n;
    aug.p = train_data.p + 6;
    aug.y = train_data.y;
    aug.x.reserve(aug.n * aug.p);
    for (std::size_t i = 0; i < train_data.n; ++i) {
      const auto row = train_data.row(i);
      aug.x.insert(aug.x.end(), row.begin(), row.end());
      for (size_t b = 0; b < 6; ++b)
        aug.x.push_back(static_cast<double>(em.bases[b]->predict(row)));
    }
    em.meta = train_classifier(stacking_meta_kind(kind), aug, cfg,
                               substream_seed(seed, 0x3e7a));
  }
  return em;
}

/// Convenience wrapper: trains bases then assembles.
inline EnsembleModel train_ensemble(EnsembleKind kind, const Dataset& data,
                                    const TrainConfig& cfg = {},
                                    std::uint64_t seed = 1) {
  return make_ensemble(kind, train_bases(data, cfg, seed), data, cfg, seed);
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline void serialize_ensemble(std::ostream& out, const EnsembleModel& em) {
  out << "lcbench-ensemble v1\n";
  out << "kind = " << to_string(em.kind) << "\n";
  out << "tie_seed = " << em.tie_seed << "\n";
  out << "weights = " << detail::join_g17(em.weights) << "\n";
  for (size_t i = 0; i < 6; ++i) {
    out << "--- base " << i << "\n";
    em.bases[i]->serialize(out);
  }
  if (em.meta) {
    out << "--- meta\n";
    em.meta->serialize(out);
  }
  out << "--- end\n";
}

inline EnsembleModel load_ensemble(std::istream& in) {
  std::string line;
  std::getline(in, line);
  if (trim(line) != "lcbench-ensemble v1")
    throw ParseError("ensemble file: unsupported version");
  EnsembleModel em;
  KeyValueMap head;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.rfind("--- base", 0) == 0) break;
    if (t.empty() || t[0] == '#') continue;
    auto pos = t.find('=');
    if (pos == std::string::npos) throw ParseError("ensemble file: bad line '" + t + "'");
    head[trim(t.substr(0, pos))] = trim(t.substr(pos + 1));
  }
  em.kind = parse_ensemble_kind(require_key(head, "kind", "ensemble"));
  em.tie_seed = static_cast<std::uint64_t>(
      parse_int(require_key(head, "tie_seed", "ensemble"), "tie_seed"));
  const auto w = detail::parse_doubles(require_key(head, "weights", "ensemble"), "weights");
  if (w.size() != 6) throw ParseError("ensemble file: expected 6 weights");
  for (size_t i = 0; i < 6; ++i) em.weights[i] = w[i];

  // base blocks: the separator line was already consumed for base 0
  for (size_t i = 0; i < 6; ++i) {
    std::stringstream block;
    while (std::getline(in, line)) {
      const std::string t = trim(line);
      if (t.rfind("---", 0) == 0) break;
      block << line << "\n";
    }
    std::stringstream rd(block.str());
    em.bases[i] = load_classifier(rd);
  }
  if (trim(line).rfind("--- meta", 0) == 0) {
    std::stringstream block;
    while (std::getline(in, line)) {
      const std::string t = trim(line);
      if (t.rfind("---", 0) == 0) break;
      block << line << "\n";
    }
    std::stringstream rd(block.str());
    em.meta = load_classifier(rd);
  }
  return em;
}

// ---------------------------------------------------------------------------
// Prediction-error correlation
// ---------------------------------------------------------------------------

/// Pearson correlation of the per-sample error indicators e_i = [pred != y]
/// across models. The diagonal is 1; entries where an error vector has zero
/// variance are undefined and reported as NaN.
inline Matrix prediction_error_correlation(
    const std::vector<std::vector<int>>& predictions,
    const std::vector<int>& labels) {
  const std::size_t m = predictions.size();
  const std::size_t n = labels.size();
  if (n < 2) throw IntegrityError("error correlation: need >= 2 samples");
  for (const auto& p : predictions)
    if (p.size() != n)
      throw IntegrityError("error correlation: prediction length mismatch");

  std::vector<std::vector<double>> err(m, std::vector<double>(n));
  std::vector<double> mean(m, 0.0), sd(m, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      err[k][i] = predictions[k][i] != labels[i] ? 1.0 : 0.0;
      mean[k] += err[k][i];
    }
    mean[k] /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double c = err[k][i] - mean[k];
      sd[k] += c * c;
    }
    sd[k] = std::sqrt(sd[k]);
  }

  Matrix corr(m, m, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t a = 0; a < m; ++a) {
    corr(a, a) = 1.0;
    for (std::size_t b = a + 1; b < m; ++b) {
      if (sd[a] <= 0 || sd[b] <= 0) continue;
      double cov = 0;
      for (std::size_t i = 0; i < n; ++i)
        cov += (err[a][i] - mean[a]) * (err[b][i] - mean[b]);
      corr(a, b) = corr(b, a) = cov / (sd[a] * sd[b]);
    }
  }
  return corr;
}

}  // namespace lcbench
