#pragma once

// Benchmark methodology: error decomposition into total / lane-changing /
// lane-keeping parts, repeated stratified 80/20 sub-sampling with optional
// balancing, ROC curves via training-balance sweeps, the horizon sweep, and
// the descriptive statistics (frequencies, correlations, PCA, odds ratios).
//
// Replicates are independent work items driven by per-replicate seed
// substreams; results are independent of the worker count.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lcbench/classifiers.hpp"
#include "lcbench/common.hpp"
#include "lcbench/ensemble.hpp"
#include "lcbench/features.hpp"
#include "lcbench/linalg.hpp"
#include "lcbench/mobil.hpp"

namespace lcbench {

// ---------------------------------------------------------------------------
// Error decomposition
// ---------------------------------------------------------------------------

/// Misclassification fractions with the integer counts behind them. The
/// decomposition identity total*N = error_LC*N_LC + error_LK*N_LK holds
/// exactly at the count level: wrong == wrong_lc + wrong_lk.
struct ErrorTriple {
  double total = 0, error_lc = 0, error_lk = 0;
  long long n = 0, n_lc = 0, n_lk = 0;
  long long wrong = 0, wrong_lc = 0, wrong_lk = 0;

  bool decomposition_exact() const {
    return n == n_lc + n_lk && wrong == wrong_lc + wrong_lk;
  }
};

/// Mean squared 0/1 error split by true class; LC errors are false
/// negatives of the lane-change class, LK errors false positives. An empty
/// stratum is reported as absent (NaN fraction).
inline ErrorTriple error_triple(std::span<const int> predictions,
                                std::span<const int> labels) {
  if (predictions.size() != labels.size())
    throw IntegrityError("error_triple: length mismatch");
  if (labels.empty()) throw IntegrityError("error_triple: empty input");
  ErrorTriple t;
  t.n = static_cast<long long>(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool wrong = predictions[i] != labels[i];
    if (labels[i]) {
      ++t.n_lc;
      t.wrong_lc += wrong;
    } else {
      ++t.n_lk;
      t.wrong_lk += wrong;
    }
  }
  t.wrong = t.wrong_lc + t.wrong_lk;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  t.total = static_cast<double>(t.wrong) / static_cast<double>(t.n);
  t.error_lc = t.n_lc ? static_cast<double>(t.wrong_lc) / static_cast<double>(t.n_lc) : nan;
  t.error_lk = t.n_lk ? static_cast<double>(t.wrong_lk) / static_cast<double>(t.n_lk) : nan;
  return t;
}

// ---------------------------------------------------------------------------
// Benchmark data: a per-lane binary view over imputed samples
// ---------------------------------------------------------------------------

struct BenchData {
  std::vector<ManeuverSample> samples;  // imputed
  std::vector<int> labels;              // 1 = lane change
  Lane lane = Lane::right;
  FeatureSubset subset = FeatureSubset::mobil8;
  Dataset features;  // featurized rows, aligned with samples
};

/// Filter one lane's samples (LKR/OV on the right, LKL/FD on the left),
/// impute absent neighbors and featurize.
inline BenchData make_bench_data(const std::vector<ManeuverSample>& all,
                                 Lane lane, FeatureSubset subset,
                                 const FeatureSpec& spec = {}) {
  BenchData d;
  d.lane = lane;
  d.subset = subset;
  for (const auto& s : all) {
    if (maneuver_lane(s.maneuver) != lane) continue;
    ManeuverSample imp = impute_missing(s, spec);
    d.labels.push_back(maneuver_label(imp.maneuver));
    d.features.add_row(featurize(imp, subset), d.labels.back());
    d.samples.push_back(std::move(imp));
  }
  return d;
}

// ---------------------------------------------------------------------------
// Predictors and model suites
// ---------------------------------------------------------------------------

struct NamedPredictor {
  std::string name;
  std::function<int(const BenchData&, std::size_t)> predict;  // row index
};

/// Which models to benchmark. Ensembles share one set of base models per
/// replicate; MOBIL enters with fixed, separately calibrated parameters.
struct ModelSelection {
  std::vector<ModelKind> singles;
  std::vector<EnsembleKind> ensembles;
  std::optional<MobilParams> mobil;
  TrainConfig config;
};

namespace detail {

inline Dataset subset_rows(const Dataset& d, const std::vector<std::size_t>& rows) {
  Dataset out;
  out.p = d.p;
  for (auto r : rows) out.add_row(d.row(r), d.y[r]);
  return out;
}

inline std::size_t base_index(ModelKind kind) {
  const auto& order = base_model_order();
  for (std::size_t i = 0; i < order.size(); ++i)
    if (order[i] == kind) return i;
  throw ConfigError("unknown base model kind");
}

}  // namespace detail

/// Train every selected model on the given training rows. Base models are
/// trained once and shared between the singles and all ensembles.
inline std::vector<NamedPredictor> train_suite(const ModelSelection& sel,
                                               const BenchData& data,
                                               const std::vector<std::size_t>& train_rows,
                                               std::uint64_t seed) {
  std::vector<NamedPredictor> out;
  const Dataset train = detail::subset_rows(data.features, train_rows);

  std::array<ClassifierPtr, 6> bases{};
  auto base_for = [&](ModelKind kind) -> ClassifierPtr {
    auto& slot = bases[detail::base_index(kind)];
    if (!slot)
      slot = train_classifier(kind, train, sel.config,
                              substream_seed(seed, detail::base_index(kind)));
    return slot;
  };

  for (ModelKind kind : sel.singles) {
    ClassifierPtr model = base_for(kind);
    out.push_back({to_string(kind), [model](const BenchData& d, std::size_t i) {
                     return model->predict(d.features.row(i));
                   }});
  }
  if (!sel.ensembles.empty()) {
    for (ModelKind kind : base_model_order()) base_for(kind);
    for (EnsembleKind kind : sel.ensembles) {
      auto em = std::make_shared<EnsembleModel>(
          make_ensemble(kind, bases, train, sel.config, seed));
      out.push_back({to_string(kind), [em](const BenchData& d, std::size_t i) {
                       return em->predict(d.features.row(i), i);
                     }});
    }
  }
  if (sel.mobil) {
    const MobilParams mp = *sel.mobil;
    out.push_back({"mobil", [mp](const BenchData& d, std::size_t i) {
                     const auto m =
                         mobil_margins(mobil_inputs(d.samples[i]), mp, d.lane);
                     return decide_from_margins(m) ? 1 : 0;
                   }});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

enum class BalanceMode { imbalanced, balanced };

inline const char* to_string(BalanceMode b) {
  return b == BalanceMode::imbalanced ? "imbalanced" : "balanced";
}
inline BalanceMode parse_balance(std::string_view s) {
  const std::string v = lower(trim(s));
  if (v == "imbalanced") return BalanceMode::imbalanced;
  if (v == "balanced") return BalanceMode::balanced;
  throw ParseError("unknown balance mode '" + v + "'");
}

namespace detail {

/// Stratified random split preserving the class ratio; at least one row of
/// each class lands on each side. Outputs are sorted for determinism.
inline void stratified_split(const std::vector<int>& labels, double train_frac,
                             Rng& rng, std::vector<std::size_t>& train,
                             std::vector<std::size_t>& test) {
  train.clear();
  test.clear();
  for (int cls = 0; cls <= 1; ++cls) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) idx.push_back(i);
    if (idx.size() < 2)
      throw IntegrityError("stratified split: class " + std::to_string(cls) +
                           " has fewer than 2 rows");
    rng.shuffle(idx);
    auto n_test = static_cast<std::size_t>(
        std::llround(static_cast<double>(idx.size()) * (1.0 - train_frac)));
    n_test = std::min(std::max<std::size_t>(n_test, 1), idx.size() - 1);
    for (std::size_t i = 0; i < idx.size(); ++i)
      (i < n_test ? test : train).push_back(idx[i]);
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
}

/// Undersample the majority class among the given rows so both class counts
/// match exactly.
inline std::vector<std::size_t> balance_rows(const std::vector<std::size_t>& rows,
                                             const std::vector<int>& labels,
                                             Rng& rng) {
  std::vector<std::size_t> c0, c1;
  for (auto r : rows) (labels[r] ? c1 : c0).push_back(r);
  auto& majority = c0.size() >= c1.size() ? c0 : c1;
  const std::size_t target = std::min(c0.size(), c1.size());
  rng.shuffle(majority);
  majority.resize(target);
  std::vector<std::size_t> out;
  out.reserve(2 * target);
  out.insert(out.end(), c0.begin(), c0.end());
  out.insert(out.end(), c1.begin(), c1.end());
  std::sort(out.begin(), out.end());
  return out;
}

/// Undersample lane-keeping rows to the given LK:LC ratio (capped by the
/// available rows).
inline std::vector<std::size_t> ratio_rows(const std::vector<std::size_t>& rows,
                                           const std::vector<int>& labels,
                                           double lk_lc_ratio, Rng& rng) {
  std::vector<std::size_t> lk, lc;
  for (auto r : rows) (labels[r] ? lc : lk).push_back(r);
  const auto target = static_cast<std::size_t>(std::llround(
      lk_lc_ratio * static_cast<double>(lc.size())));
  if (target < lk.size()) {
    rng.shuffle(lk);
    lk.resize(target);
  }
  std::vector<std::size_t> out;
  out.insert(out.end(), lk.begin(), lk.end());
  out.insert(out.end(), lc.begin(), lc.end());
  std::sort(out.begin(), out.end());
  return out;
}

inline ErrorTriple evaluate_rows(const NamedPredictor& model,
                                 const BenchData& data,
                                 const std::vector<std::size_t>& rows) {
  std::vector<int> pred(rows.size()), truth(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    pred[i] = model.predict(data, rows[i]);
    truth[i] = data.labels[rows[i]];
  }
  return error_triple(pred, truth);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Bootstrap evaluation
// ---------------------------------------------------------------------------

struct BootstrapOptions {
  int replicates = 1000;
  double split = 0.8;
  BalanceMode balance = BalanceMode::imbalanced;
  // The reference protocol is repeated random sub-sampling; this switch
  // draws the training set with replacement instead, for sensitivity checks.
  bool resample_with_replacement = false;
  std::uint64_t seed = 1;
  unsigned jobs = 1;
  int max_retries = 10;
};

struct ModelReplicates {
  std::string name;
  std::vector<ErrorTriple> test, train;
};

struct EvaluationReport {
  std::vector<ModelReplicates> models;
  int replicates = 0;
  int failed_replicates = 0;
  double split = 0.8;
  BalanceMode balance = BalanceMode::imbalanced;
  std::uint64_t seed = 0;
  Lane lane = Lane::right;
  FeatureSubset subset = FeatureSubset::mobil8;
  double tau = 0;
};

struct TripleStats {
  double mean = 0, sd = 0, q025 = 0, q50 = 0, q975 = 0;
};

inline TripleStats summarize(std::vector<double> values) {
  TripleStats s;
  if (values.empty()) return s;
  double sum = 0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  double var = 0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.sd = values.size() > 1
             ? std::sqrt(var / static_cast<double>(values.size() - 1))
             : 0.0;
  std::sort(values.begin(), values.end());
  auto q = [&](double f) {
    const double pos = f * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double w = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - w) + values[hi] * w;
  };
  s.q025 = q(0.025);
  s.q50 = q(0.5);
  s.q975 = q(0.975);
  return s;
}

inline TripleStats summarize_total(const std::vector<ErrorTriple>& triples) {
  std::vector<double> v;
  v.reserve(triples.size());
  for (const auto& t : triples) v.push_back(t.total);
  return summarize(std::move(v));
}

inline double mean_total(const std::vector<ErrorTriple>& triples) {
  double s = 0;
  for (const auto& t : triples) s += t.total;
  return triples.empty() ? 0.0 : s / static_cast<double>(triples.size());
}

/// The cross-validation protocol: `replicates` independent stratified
/// train/test splits (optionally balanced by undersampling the majority
/// class of the training half), every selected model trained on the same
/// split, training and testing triples recorded per replicate.
inline EvaluationReport bootstrap_evaluate(const BenchData& data,
                                           const ModelSelection& sel,
                                           const BootstrapOptions& opt = {}) {
  if (opt.replicates < 1) throw ConfigError("bootstrap: replicates must be >= 1");
  if (!(opt.split > 0 && opt.split < 1))
    throw ConfigError("bootstrap: split must be in (0,1)");

  struct ReplicateResult {
    std::vector<ErrorTriple> test, train;
    bool failed = false;
  };
  std::vector<ReplicateResult> results(static_cast<std::size_t>(opt.replicates));
  std::vector<std::string> names;

  // model names are fixed by the selection; derive once from a dry run below
  parallel_for(results.size(), opt.jobs, [&](std::size_t r) {
    ReplicateResult& res = results[r];
    for (int attempt = 0; attempt <= opt.max_retries; ++attempt) {
      const std::uint64_t rep_seed =
          substream_seed(opt.seed, r + static_cast<std::uint64_t>(attempt) * 0x10000001ull);
      Rng rng(substream_seed(rep_seed, 0));
      std::vector<std::size_t> train_rows, test_rows;
      detail::stratified_split(data.labels, opt.split, rng, train_rows, test_rows);
      if (opt.resample_with_replacement) {
        std::vector<std::size_t> drawn(train_rows.size());
        for (auto& d : drawn) d = train_rows[rng.below(train_rows.size())];
        std::sort(drawn.begin(), drawn.end());
        train_rows = std::move(drawn);
      }
      if (opt.balance == BalanceMode::balanced)
        train_rows = detail::balance_rows(train_rows, data.labels, rng);

      std::size_t pos = 0;
      for (auto i : train_rows) pos += data.labels[i] != 0;
      if (pos == 0 || pos == train_rows.size()) continue;  // retry

      const auto models = train_suite(sel, data, train_rows, substream_seed(rep_seed, 1));
      res.test.clear();
      res.train.clear();
      for (const auto& m : models) {
        res.train.push_back(detail::evaluate_rows(m, data, train_rows));
        res.test.push_back(detail::evaluate_rows(m, data, test_rows));
      }
      return;
    }
    res.failed = true;
  });

  // assemble report in replicate order
  {
    Rng rng(substream_seed(opt.seed, 0xd8));
    std::vector<std::size_t> train_rows, test_rows;
    detail::stratified_split(data.labels, opt.split, rng, train_rows, test_rows);
    for (const auto& m : train_suite(sel, data, train_rows, 0))
      names.push_back(m.name);
  }

  EvaluationReport rep;
  rep.replicates = opt.replicates;
  rep.split = opt.split;
  rep.balance = opt.balance;
  rep.seed = opt.seed;
  rep.lane = data.lane;
  rep.subset = data.subset;
  rep.tau = data.samples.empty() ? 0.0 : data.samples.front().tau;
  rep.models.resize(names.size());
  for (std::size_t m = 0; m < names.size(); ++m) rep.models[m].name = names[m];
  for (const auto& res : results) {
    if (res.failed) {
      rep.failed_replicates++;
      continue;
    }
    for (std::size_t m = 0; m < names.size(); ++m) {
      rep.models[m].test.push_back(res.test[m]);
      rep.models[m].train.push_back(res.train[m]);
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// ROC via training-balance sweep
// ---------------------------------------------------------------------------

struct RocPoint {
  double fpr = 0;  // error_LK
  double tpr = 0;  // 1 - error_LC
  double ratio = 0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // sorted by fpr
  std::string phase;             // "train" or "test"
};

struct RocSweepResult {
  std::string model;
  RocCurve train, test;
  std::vector<double> skipped_ratios;
};

inline std::vector<double> default_balance_grid() {
  return {0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0};
}

/// Sweep the LK:LC training balance over `grid`: undersample the
/// lane-keeping training rows to each ratio, retrain, and record
/// (FPR, TPR) = (error_LK, 1 - error_LC) for the training rows and the
/// fixed test split. Ratios leaving fewer than 10 training rows per class
/// are skipped and reported.
inline std::vector<RocSweepResult> roc_sweep(const BenchData& data,
                                             const ModelSelection& sel,
                                             std::vector<double> grid,
                                             std::uint64_t seed,
                                             double split = 0.8,
                                             unsigned jobs = 1) {
  if (grid.empty()) grid = default_balance_grid();
  Rng split_rng(substream_seed(seed, 0xf0c));
  std::vector<std::size_t> train_rows, test_rows;
  detail::stratified_split(data.labels, split, split_rng, train_rows, test_rows);

  struct Point {
    bool skipped = true;
    std::vector<ErrorTriple> train, test;
    std::vector<std::string> names;
  };
  std::vector<Point> per_ratio(grid.size());

  parallel_for(grid.size(), jobs, [&](std::size_t g) {
    Rng rng(substream_seed(seed, 0xa11 + g));
    const auto rows = detail::ratio_rows(train_rows, data.labels, grid[g], rng);
    std::size_t lk = 0, lc = 0;
    for (auto r : rows) (data.labels[r] ? lc : lk)++;
    if (lk < 10 || lc < 10) return;  // point skipped
    Point& pt = per_ratio[g];
    pt.skipped = false;
    const auto models = train_suite(sel, data, rows, substream_seed(seed, 0xb22 + g));
    for (const auto& m : models) {
      pt.names.push_back(m.name);
      pt.train.push_back(detail::evaluate_rows(m, data, rows));
      pt.test.push_back(detail::evaluate_rows(m, data, test_rows));
    }
  });

  std::vector<RocSweepResult> out;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (per_ratio[g].skipped) continue;
    const Point& pt = per_ratio[g];
    if (out.empty()) {
      out.resize(pt.names.size());
      for (std::size_t m = 0; m < pt.names.size(); ++m) {
        out[m].model = pt.names[m];
        out[m].train.phase = "train";
        out[m].test.phase = "test";
      }
    }
    for (std::size_t m = 0; m < pt.names.size(); ++m) {
      out[m].train.points.push_back(
          {pt.train[m].error_lk, 1.0 - pt.train[m].error_lc, grid[g]});
      out[m].test.points.push_back(
          {pt.test[m].error_lk, 1.0 - pt.test[m].error_lc, grid[g]});
    }
  }
  for (auto& r : out) {
    auto by_fpr = [](const RocPoint& a, const RocPoint& b) {
      if (a.fpr != b.fpr) return a.fpr < b.fpr;
      return a.ratio < b.ratio;
    };
    std::sort(r.train.points.begin(), r.train.points.end(), by_fpr);
    std::sort(r.test.points.begin(), r.test.points.end(), by_fpr);
    for (std::size_t g = 0; g < grid.size(); ++g)
      if (per_ratio[g].skipped) r.skipped_ratios.push_back(grid[g]);
  }
  return out;
}

/// TPR of a curve at the given FPR by linear interpolation on its upper
/// envelope, with (0,0) and (1,1) anchors beyond the observed range.
inline double roc_tpr_at(const RocCurve& curve, double fpr) {
  std::vector<RocPoint> pts;
  pts.push_back({0.0, 0.0, 0.0});
  pts.insert(pts.end(), curve.points.begin(), curve.points.end());
  pts.push_back({1.0, 1.0, 0.0});
  // collapse equal-FPR points to their best TPR
  std::vector<RocPoint> env;
  for (const auto& p : pts) {
    if (!env.empty() && env.back().fpr == p.fpr)
      env.back().tpr = std::max(env.back().tpr, p.tpr);
    else
      env.push_back(p);
  }
  for (std::size_t i = 0; i + 1 < env.size(); ++i) {
    if (fpr >= env[i].fpr && fpr <= env[i + 1].fpr) {
      const double w = env[i + 1].fpr > env[i].fpr
                           ? (fpr - env[i].fpr) / (env[i + 1].fpr - env[i].fpr)
                           : 0.0;
      return env[i].tpr * (1.0 - w) + env[i + 1].tpr * w;
    }
  }
  return 1.0;
}

// ---------------------------------------------------------------------------
// Horizon sweep
// ---------------------------------------------------------------------------

struct HorizonEntry {
  double tau = 0;
  Lane lane = Lane::right;
  EvaluationReport report;
};

/// Re-extract samples at each horizon and run the bootstrap per lane.
inline std::vector<HorizonEntry> horizon_sweep(const Recording& rec,
                                               const std::vector<double>& tau_grid,
                                               FeatureSpec spec,
                                               const ModelSelection& sel,
                                               const BootstrapOptions& opt) {
  std::vector<HorizonEntry> out;
  for (double tau : tau_grid) {
    spec.tau = tau;
    const auto samples = extract_samples(rec, spec);
    for (Lane lane : {Lane::right, Lane::left}) {
      HorizonEntry e;
      e.tau = tau;
      e.lane = lane;
      const BenchData data = make_bench_data(samples, lane, spec.subset, spec);
      e.report = bootstrap_evaluate(data, sel, opt);
      e.report.tau = tau;
      out.push_back(std::move(e));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Descriptive statistics
// ---------------------------------------------------------------------------

struct ClassSummary {
  Maneuver maneuver = Maneuver::LKR;
  std::size_t count = 0;
  double pct = 0;
  double mean_vx = 0;
  double mean_dx_p = 0;    // over samples with a present predecessor
  double mean_tgap_p = 0;  // idem
};

struct PcaResult {
  std::vector<std::string> names;       // included features
  Matrix components;                    // orthonormal eigenvectors (columns)
  std::vector<double> explained;        // variance fractions, non-increasing
  Matrix circle;                        // names.size() x 2 variable/PC correlations
};

struct OddsRatio {
  std::string name;
  double estimate = 0, lo = 0, hi = 0;
};

struct LaneDescriptive {
  Lane lane = Lane::right;
  std::size_t n = 0;
  std::vector<std::pair<std::string, double>> indicator_corr;
  std::vector<std::string> corr_names;
  Matrix corr;
  PcaResult pca;
  std::vector<OddsRatio> odds;  // mobil8 variables
  std::vector<std::string> notes;
};

struct DescribeResult {
  std::size_t n = 0;
  std::vector<ClassSummary> frequency;  // LKR, LKL, FD, OV order
  std::vector<LaneDescriptive> lanes;   // right, left
};

namespace detail {

inline double pearson(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double cab = 0, ca = 0, cb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cab += (a[i] - ma) * (b[i] - mb);
    ca += (a[i] - ma) * (a[i] - ma);
    cb += (b[i] - mb) * (b[i] - mb);
  }
  if (ca <= 0 || cb <= 0) return std::numeric_limits<double>::quiet_NaN();
  return cab / std::sqrt(ca * cb);
}

}  // namespace detail

/// The preliminary analysis: class frequency table, per-lane correlations of
/// the maneuver indicator with speed/spacing/speed-difference variables,
/// feature correlation matrix with PCA on it (correlation scaling, since the
/// features mix units), and logistic odds ratios with Wald 95% intervals.
/// Constant features are excluded from correlations/PCA with a note.
inline DescribeResult describe(const std::vector<ManeuverSample>& raw_samples,
                               FeatureSubset subset = FeatureSubset::full24,
                               const FeatureSpec& spec = {}) {
  if (raw_samples.empty()) throw IntegrityError("describe: no samples");
  DescribeResult out;
  out.n = raw_samples.size();

  // frequency table (neighbor means over present predecessors only)
  for (Maneuver m : {Maneuver::LKR, Maneuver::LKL, Maneuver::FD, Maneuver::OV}) {
    ClassSummary cs;
    cs.maneuver = m;
    double vx = 0, dx = 0, tg = 0;
    std::size_t n_p = 0;
    for (const auto& s : raw_samples) {
      if (s.maneuver != m) continue;
      cs.count++;
      vx += s.vx;
      if (s.nb[0].present) {
        n_p++;
        dx += s.nb[0].dx;
        tg += s.nb[0].time_gap;
      }
    }
    if (cs.count) cs.mean_vx = vx / static_cast<double>(cs.count);
    if (n_p) {
      cs.mean_dx_p = dx / static_cast<double>(n_p);
      cs.mean_tgap_p = tg / static_cast<double>(n_p);
    }
    cs.pct = 100.0 * static_cast<double>(cs.count) / static_cast<double>(out.n);
    out.frequency.push_back(cs);
  }

  for (Lane lane : {Lane::right, Lane::left}) {
    LaneDescriptive ld;
    ld.lane = lane;
    const BenchData data = make_bench_data(raw_samples, lane, subset, spec);
    ld.n = data.features.n;
    if (data.features.n < 3) {
      ld.notes.push_back("too few samples on this lane");
      out.lanes.push_back(std::move(ld));
      continue;
    }

    // indicator correlations: maneuver vs v_x and the dx/dv of all slots
    {
      std::vector<double> ind(data.features.n);
      for (std::size_t i = 0; i < data.features.n; ++i)
        ind[i] = static_cast<double>(data.labels[i]);
      auto corr_with = [&](const std::string& name, auto getter) {
        std::vector<double> v(data.samples.size());
        for (std::size_t i = 0; i < data.samples.size(); ++i)
          v[i] = getter(data.samples[i]);
        ld.indicator_corr.emplace_back(name, detail::pearson(ind, v));
      };
      corr_with("v_x", [](const ManeuverSample& s) { return s.vx; });
      for (int sl = 0; sl < 4; ++sl) {
        corr_with(std::string("dx_") + slot_name(sl),
                  [sl](const ManeuverSample& s) { return s.nb[static_cast<size_t>(sl)].dx; });
        corr_with(std::string("dv_") + slot_name(sl),
                  [sl](const ManeuverSample& s) { return s.nb[static_cast<size_t>(sl)].dv; });
      }
    }

    // feature correlation matrix over non-constant features
    const auto all_names = feature_names(subset);
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < data.features.p; ++j) {
      double mn = data.features.at(0, j), mx = mn;
      for (std::size_t i = 1; i < data.features.n; ++i) {
        mn = std::min(mn, data.features.at(i, j));
        mx = std::max(mx, data.features.at(i, j));
      }
      if (mx > mn) {
        keep.push_back(j);
      } else {
        ld.notes.push_back("excluded constant feature " + all_names[j]);
      }
    }
    for (auto j : keep) ld.corr_names.push_back(all_names[j]);
    ld.corr = Matrix(keep.size(), keep.size());
    std::vector<std::vector<double>> cols(keep.size(),
                                          std::vector<double>(data.features.n));
    for (std::size_t a = 0; a < keep.size(); ++a)
      for (std::size_t i = 0; i < data.features.n; ++i)
        cols[a][i] = data.features.at(i, keep[a]);
    for (std::size_t a = 0; a < keep.size(); ++a) {
      ld.corr(a, a) = 1.0;
      for (std::size_t b = a + 1; b < keep.size(); ++b) {
        const double c = detail::pearson(cols[a], cols[b]);
        ld.corr(a, b) = ld.corr(b, a) = c;
      }
    }

    // PCA on the correlation matrix
    {
      const EigenSym eig = jacobi_eigen_sym(ld.corr);
      ld.pca.names = ld.corr_names;
      ld.pca.components = eig.vectors;
      double total = 0;
      for (double v : eig.values) total += std::max(v, 0.0);
      for (double v : eig.values)
        ld.pca.explained.push_back(total > 0 ? std::max(v, 0.0) / total : 0.0);
      ld.pca.circle = Matrix(keep.size(), 2);
      for (std::size_t i = 0; i < keep.size(); ++i)
        for (std::size_t j = 0; j < 2 && j < eig.values.size(); ++j)
          ld.pca.circle(i, j) =
              eig.vectors(i, j) * std::sqrt(std::max(eig.values[j], 0.0));
    }

    // logistic odds ratios on the mobil8 variables
    try {
      const BenchData m8 = make_bench_data(raw_samples, lane, FeatureSubset::mobil8, spec);
      const auto lr = train_logistic(m8.features);
      const auto* model = dynamic_cast<const LogisticModel*>(lr.get());
      const auto coef = model->raw_coef();
      const auto se = model->raw_stderr();
      const auto names = feature_names(FeatureSubset::mobil8);
      for (std::size_t j = 1; j < coef.size(); ++j) {
        OddsRatio orow;
        orow.name = names[j - 1];
        orow.estimate = std::exp(coef[j]);
        const double s = j < se.size() ? se[j] : std::numeric_limits<double>::quiet_NaN();
        orow.lo = std::exp(coef[j] - 1.96 * s);
        orow.hi = std::exp(coef[j] + 1.96 * s);
        ld.odds.push_back(orow);
      }
      if (!model->converged())
        ld.notes.push_back("logistic fit did not fully converge");
    } catch (const std::exception& e) {
      ld.notes.push_back(std::string("odds ratios unavailable: ") + e.what());
    }

    out.lanes.push_back(std::move(ld));
  }
  return out;
}

}  // namespace lcbench
