#pragma once

// IDM car-following acceleration, the asymmetric (European) MOBIL
// lane-change rule, and least-squares calibration of the seven per-lane
// parameters over maneuver samples.

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "lcbench/common.hpp"
#include "lcbench/features.hpp"

namespace lcbench {

struct IdmParams {
  double v0 = 30.0;    // desired speed, m/s
  double T = 1.5;      // desired time gap, s
  double alpha = 1.5;  // maximum acceleration, m/s^2
  double beta = 2.0;   // comfortable deceleration, m/s^2
  double length = 5.0; // vehicle length, m

  void validate() const {
    if (!(v0 > 0 && T >= 0 && alpha > 0 && beta > 0 && length > 0))
      throw DomainError("idm params: v0, alpha, beta, length must be > 0, T >= 0");
  }
};

struct MobilParams {
  IdmParams idm;
  double politeness = 0.5;  // p in [0,1]
  double threshold = 0.5;   // b, m/s^2 (positive overtaking, negative fold-down)
  static constexpr double b_safe = -4.0;  // m/s^2, fixed

  void validate() const {
    idm.validate();
    if (!(politeness >= 0 && politeness <= 1))
      throw DomainError("mobil params: politeness must be in [0,1]");
    if (!std::isfinite(threshold))
      throw DomainError("mobil params: threshold must be finite");
  }
};

// ---------------------------------------------------------------------------
// IDM acceleration
// ---------------------------------------------------------------------------

/// a = alpha [ 1 - (v/v0)^4 - (f/(dx - l))^2 ],  f = l + T v + v (v - v1) / (2 sqrt(alpha beta))
/// with v the ego speed, v1 the leader speed and dx the spacing. A free road
/// is represented by the absent-leader convention (dx = imputation constant,
/// v1 = v).
inline double idm_acceleration(double v, double v_lead, double dx,
                               const IdmParams& p) {
  if (v < 0) throw DomainError("idm_acceleration: v must be >= 0");
  const double gap = dx - p.length;
  if (!(gap > 0))
    throw DomainError("idm_acceleration: spacing " + fmt_g9(dx) +
                      " does not exceed vehicle length " + fmt_g9(p.length));
  const double f = p.length + p.T * v + v * (v - v_lead) / (2.0 * std::sqrt(p.alpha * p.beta));
  const double rv = v / p.v0;
  const double rd = f / gap;
  return p.alpha * (1.0 - rv * rv * rv * rv - rd * rd);
}

namespace detail {

// Total variant used by the decision margin and the calibration surrogate:
// the gap is floored so the expression stays finite and smooth when a
// candidate length exceeds an observed spacing, and speeds are floored at 0.
inline double idm_acceleration_clamped(double v, double v_lead, double dx,
                                       const IdmParams& p,
                                       double gap_floor = 0.1) {
  const double ve = std::max(v, 0.0);
  const double gap = std::max(dx - p.length, gap_floor);
  const double f =
      p.length + p.T * ve + ve * (ve - v_lead) / (2.0 * std::sqrt(p.alpha * p.beta));
  const double rv = ve / p.v0;
  const double rd = f / gap;
  return p.alpha * (1.0 - rv * rv * rv * rv - rd * rd);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Decision rule
// ---------------------------------------------------------------------------

/// Subject speed plus the spacing/speed-difference features to the four
/// surrounding vehicles, imputed where absent.
struct MobilInputs {
  double v = 0;                     // subject speed
  std::array<double, 4> dx{};      // P, F, PA, FA spacing
  std::array<double, 4> dv{};      // P, F, PA, FA speed difference
};

inline MobilInputs mobil_inputs(const ManeuverSample& s,
                                const ImputationConstants& imp = {}) {
  MobilInputs in;
  in.v = s.vx;
  for (int i = 0; i < 4; ++i) {
    const auto& nb = s.nb[static_cast<size_t>(i)];
    in.dx[static_cast<size_t>(i)] = nb.present ? nb.dx : imp.dx;
    in.dv[static_cast<size_t>(i)] = nb.present ? nb.dv : imp.dv;
  }
  return in;
}

struct MobilMargins {
  double safety = 0;     // a~_FA - b_safe
  double incentive = 0;  // gain - threshold
};

/// Accelerations before/after the hypothetical change for the subject and
/// both followers, combined into the two MOBIL criteria margins. Positive
/// margins mean the criterion holds.
inline MobilMargins mobil_margins(const MobilInputs& in, const MobilParams& mp,
                                  Lane lane) {
  constexpr int P = 0, F = 1, PA = 2, FA = 3;
  const IdmParams& idm = mp.idm;
  const double v = std::max(in.v, 0.0);
  const double v_p = std::max(v + in.dv[P], 0.0);
  const double v_f = std::max(v + in.dv[F], 0.0);
  const double v_pa = std::max(v + in.dv[PA], 0.0);
  const double v_fa = std::max(v + in.dv[FA], 0.0);

  const double a_cur = detail::idm_acceleration_clamped(v, v_p, in.dx[P], idm);
  const double a_new = detail::idm_acceleration_clamped(v, v_pa, in.dx[PA], idm);
  // current follower: subject ahead now, old predecessor ahead afterwards
  const double af_cur = detail::idm_acceleration_clamped(v_f, v, in.dx[F], idm);
  const double af_new =
      detail::idm_acceleration_clamped(v_f, v_p, in.dx[F] + in.dx[P], idm);
  // adjacent follower: adjacent predecessor ahead now, subject afterwards
  const double afa_cur =
      detail::idm_acceleration_clamped(v_fa, v_pa, in.dx[FA] + in.dx[PA], idm);
  const double afa_new = detail::idm_acceleration_clamped(v_fa, v, in.dx[FA], idm);

  const double gain = a_new - a_cur;
  const double imposed =
      lane == Lane::right ? (afa_new - afa_cur) : (af_new - af_cur);
  MobilMargins m;
  m.safety = afa_new - MobilParams::b_safe;
  m.incentive = gain + mp.politeness * imposed - mp.threshold;
  return m;
}

inline bool decide_from_margins(const MobilMargins& m) {
  return m.safety >= 0.0 && m.incentive > 0.0;
}

enum class MobilDecision { lane_keep, lane_change };

/// Lane-change decision for a sample measured on `lane`. The safety
/// criterion vetoes regardless of incentive; the incentive criterion uses
/// the adjacent follower on the right lane (overtaking) and the current
/// follower on the left lane (fold-down).
inline MobilDecision mobil_decide(const ManeuverSample& s, const MobilParams& mp,
                                  Lane lane,
                                  const ImputationConstants& imp = {}) {
  mp.validate();
  const MobilInputs in = mobil_inputs(s, imp);
  // surface bumper overlaps through the strict IDM contract
  for (double dx : in.dx)
    if (!(dx - mp.idm.length > 0))
      throw DomainError("mobil_decide: spacing " + fmt_g9(dx) +
                        " does not exceed vehicle length " + fmt_g9(mp.idm.length));
  return decide_from_margins(mobil_margins(in, mp, lane))
             ? MobilDecision::lane_change
             : MobilDecision::lane_keep;
}

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

/// Box bounds over theta = (v0, T, alpha, beta, length, politeness, threshold).
struct ParamBounds {
  std::array<double, 7> lo{};
  std::array<double, 7> hi{};

  /// The tested ranges of the reference study.
  static ParamBounds standard() {
    ParamBounds b;
    b.lo = {20.0, 0.0, 0.0, 0.0, 0.0, 0.0, -4.0};
    b.hi = {80.0, 5.0, 5.0, 5.0, 10.0, 1.0, 4.0};
    return b;
  }
};

inline MobilParams params_from_theta(const std::array<double, 7>& t) {
  MobilParams mp;
  mp.idm.v0 = t[0];
  mp.idm.T = t[1];
  mp.idm.alpha = t[2];
  mp.idm.beta = t[3];
  mp.idm.length = t[4];
  mp.politeness = t[5];
  mp.threshold = t[6];
  return mp;
}

inline std::array<double, 7> theta_from_params(const MobilParams& mp) {
  return {mp.idm.v0, mp.idm.T,         mp.idm.alpha, mp.idm.beta,
          mp.idm.length, mp.politeness, mp.threshold};
}

struct CalibrationStart {
  int index = 0;
  std::array<double, 7> theta{};
  long long hard_objective = 0;  // count of misclassified samples
  double surrogate = 0;          // smoothed objective at the final kappa
};

struct CalibrationResult {
  MobilParams params;
  long long hard_objective = 0;
  double hard_fraction = 0;
  std::array<double, 7> start_stddev{};  // spread of estimates across starts
  std::vector<CalibrationStart> starts;
  Lane lane = Lane::right;
  std::uint64_t seed = 0;
  int n_starts = 0;
};

struct CalibrationOptions {
  int n_starts = 50;
  std::uint64_t seed = 1;
  unsigned jobs = 1;
  std::vector<double> kappa_schedule = {1.0, 0.1, 0.01};
  int max_iters_per_stage = 120;
};

namespace detail {

// Compact L-BFGS (two-loop recursion, Armijo backtracking) on an unbounded
// vector; gradients by central differences.
template <typename F>
inline std::vector<double> lbfgs_minimize(F&& f, std::vector<double> x,
                                          int max_iters, double grad_step = 1e-5,
                                          double grad_tol = 1e-9) {
  const size_t n = x.size();
  const int mem = 6;
  std::vector<std::vector<double>> s_hist, y_hist;
  std::vector<double> rho_hist;

  auto gradient = [&](const std::vector<double>& p) {
    std::vector<double> g(n);
    std::vector<double> q = p;
    for (size_t i = 0; i < n; ++i) {
      const double h = grad_step * std::max(1.0, std::fabs(p[i]));
      q[i] = p[i] + h;
      const double fp = f(q);
      q[i] = p[i] - h;
      const double fm = f(q);
      q[i] = p[i];
      g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
  };

  double fx = f(x);
  std::vector<double> best_x = x;
  double best_f = fx;
  std::vector<double> g = gradient(x);

  for (int iter = 0; iter < max_iters; ++iter) {
    double gnorm = 0;
    for (double v : g) gnorm += v * v;
    if (std::sqrt(gnorm) < grad_tol) break;

    // two-loop recursion
    std::vector<double> d = g;
    std::vector<double> alpha_c(s_hist.size());
    for (size_t k = s_hist.size(); k-- > 0;) {
      double a = 0;
      for (size_t i = 0; i < n; ++i) a += s_hist[k][i] * d[i];
      a *= rho_hist[k];
      alpha_c[k] = a;
      for (size_t i = 0; i < n; ++i) d[i] -= a * y_hist[k][i];
    }
    if (!s_hist.empty()) {
      double sy = 0, yy = 0;
      const auto& sb = s_hist.back();
      const auto& yb = y_hist.back();
      for (size_t i = 0; i < n; ++i) {
        sy += sb[i] * yb[i];
        yy += yb[i] * yb[i];
      }
      const double scale = sy / std::max(yy, 1e-300);
      for (auto& v : d) v *= scale;
    }
    for (size_t k = 0; k < s_hist.size(); ++k) {
      double b = 0;
      for (size_t i = 0; i < n; ++i) b += y_hist[k][i] * d[i];
      b *= rho_hist[k];
      for (size_t i = 0; i < n; ++i) d[i] += s_hist[k][i] * (alpha_c[k] - b);
    }
    for (auto& v : d) v = -v;  // descent direction

    double dg = 0;
    for (size_t i = 0; i < n; ++i) dg += d[i] * g[i];
    if (dg > -1e-300) {  // not a descent direction, reset to steepest
      for (size_t i = 0; i < n; ++i) d[i] = -g[i];
      dg = -gnorm;
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }

    double step = 1.0;
    std::vector<double> xn(n);
    double fn = fx;
    bool accepted = false;
    for (int bt = 0; bt < 30; ++bt) {
      for (size_t i = 0; i < n; ++i) xn[i] = x[i] + step * d[i];
      fn = f(xn);
      if (fn <= fx + 1e-4 * step * dg) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    std::vector<double> gn = gradient(xn);
    std::vector<double> sk(n), yk(n);
    double sy = 0;
    for (size_t i = 0; i < n; ++i) {
      sk[i] = xn[i] - x[i];
      yk[i] = gn[i] - g[i];
      sy += sk[i] * yk[i];
    }
    if (sy > 1e-12) {
      s_hist.push_back(std::move(sk));
      y_hist.push_back(std::move(yk));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > mem) {
        s_hist.erase(s_hist.begin());
        y_hist.erase(y_hist.begin());
        rho_hist.erase(rho_hist.begin());
      }
    }
    x = std::move(xn);
    g = std::move(gn);
    fx = fn;
    if (fx < best_f) {
      best_f = fx;
      best_x = x;
    }
  }
  return best_x;
}

inline double sigmoid(double z) {
  if (z >= 0) {
    const double e = std::exp(-z);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Smooth minimum: min(a,b) - kappa ln(1 + exp(-|a-b|/kappa)).
inline double soft_min(double a, double b, double kappa) {
  const double lo = std::min(a, b);
  const double gap = std::fabs(a - b) / kappa;
  return lo - kappa * std::log1p(std::exp(-gap));
}

struct CalibSample {
  MobilInputs in;
  int label = 0;
};

inline long long hard_objective(const std::vector<CalibSample>& data,
                                const MobilParams& mp, Lane lane) {
  long long wrong = 0;
  for (const auto& cs : data) {
    const int pred = decide_from_margins(mobil_margins(cs.in, mp, lane)) ? 1 : 0;
    wrong += pred != cs.label;
  }
  return wrong;
}

inline double surrogate_objective(const std::vector<CalibSample>& data,
                                  const MobilParams& mp, Lane lane,
                                  double kappa) {
  double total = 0;
  for (const auto& cs : data) {
    const MobilMargins m = mobil_margins(cs.in, mp, lane);
    const double margin = soft_min(m.safety, m.incentive, kappa);
    const double p = sigmoid(margin / kappa);
    const double d = p - static_cast<double>(cs.label);
    total += d * d;
  }
  return total;
}

// Box transform theta_j = lo + (hi - lo) sigmoid(u_j); collapsed bounds map
// to the fixed point.
inline std::array<double, 7> theta_of_u(const std::vector<double>& u,
                                        const ParamBounds& b) {
  std::array<double, 7> t{};
  for (size_t j = 0; j < 7; ++j) {
    const double w = b.hi[j] - b.lo[j];
    t[j] = b.lo[j] + w * sigmoid(u[j]);
  }
  return t;
}

inline std::vector<double> u_of_theta(const std::array<double, 7>& t,
                                      const ParamBounds& b) {
  std::vector<double> u(7, 0.0);
  for (size_t j = 0; j < 7; ++j) {
    const double w = b.hi[j] - b.lo[j];
    if (w <= 0) continue;
    double r = (t[j] - b.lo[j]) / w;
    r = std::min(0.98, std::max(0.02, r));
    u[j] = std::log(r / (1.0 - r));
  }
  return u;
}

}  // namespace detail

/// Least-squares calibration of the seven MOBIL parameters on one lane's
/// samples. The 0/1 objective has zero gradient almost everywhere, so each
/// start runs a bounded quasi-Newton search on a smoothed surrogate (decision
/// margin through a sigmoid at temperature kappa, annealed over the
/// schedule); the winner is the start with the best hard objective, ties by
/// start index. Start estimates' standard deviations are reported alongside.
inline CalibrationResult calibrate_mobil(const std::vector<ManeuverSample>& samples,
                                         Lane lane,
                                         const ParamBounds& bounds = ParamBounds::standard(),
                                         const CalibrationOptions& opt = {}) {
  std::vector<detail::CalibSample> data;
  data.reserve(samples.size());
  ImputationConstants imp;
  long long positives = 0;
  for (const auto& s : samples) {
    detail::CalibSample cs;
    cs.in = mobil_inputs(s, imp);
    cs.label = maneuver_label(s.maneuver);
    positives += cs.label;
    data.push_back(cs);
  }
  if (data.empty() || positives == 0 ||
      positives == static_cast<long long>(data.size()))
    throw ConfigError("calibrate_mobil: degenerate calibration, both maneuver "
                      "classes are required");

  std::vector<CalibrationStart> starts(static_cast<size_t>(opt.n_starts));
  parallel_for(starts.size(), opt.jobs, [&](size_t k) {
    Rng rng(substream_seed(opt.seed, k));
    std::array<double, 7> theta0{};
    for (size_t j = 0; j < 7; ++j)
      theta0[j] = rng.uniform(bounds.lo[j], bounds.hi[j]);
    std::vector<double> u = detail::u_of_theta(theta0, bounds);
    double last_surrogate = 0;
    for (double kappa : opt.kappa_schedule) {
      auto objective = [&](const std::vector<double>& uu) {
        const MobilParams mp = params_from_theta(detail::theta_of_u(uu, bounds));
        return detail::surrogate_objective(data, mp, lane, kappa);
      };
      u = detail::lbfgs_minimize(objective, std::move(u), opt.max_iters_per_stage);
      last_surrogate = objective(u);
    }
    CalibrationStart st;
    st.index = static_cast<int>(k);
    st.theta = detail::theta_of_u(u, bounds);
    st.surrogate = last_surrogate;
    st.hard_objective =
        detail::hard_objective(data, params_from_theta(st.theta), lane);
    starts[k] = st;
  });

  const CalibrationStart* best = &starts.front();
  for (const auto& st : starts)
    if (st.hard_objective < best->hard_objective) best = &st;

  CalibrationResult res;
  res.params = params_from_theta(best->theta);
  res.hard_objective = best->hard_objective;
  res.hard_fraction =
      static_cast<double>(best->hard_objective) / static_cast<double>(data.size());
  res.lane = lane;
  res.seed = opt.seed;
  res.n_starts = opt.n_starts;
  for (size_t j = 0; j < 7; ++j) {
    double mean = 0;
    for (const auto& st : starts) mean += st.theta[j];
    mean /= static_cast<double>(starts.size());
    double var = 0;
    for (const auto& st : starts) {
      const double d = st.theta[j] - mean;
      var += d * d;
    }
    res.start_stddev[j] =
        starts.size() > 1 ? std::sqrt(var / static_cast<double>(starts.size() - 1))
                          : 0.0;
  }
  res.starts = std::move(starts);
  return res;
}

// ---------------------------------------------------------------------------
// Parameter file IO
// ---------------------------------------------------------------------------

inline const std::array<const char*, 7>& param_names() {
  static const std::array<const char*, 7> names = {
      "v0", "T", "alpha", "beta", "length", "politeness", "threshold"};
  return names;
}

inline void write_mobil_params(std::ostream& out, const CalibrationResult& r,
                               const std::string& config_echo = "") {
  if (!config_echo.empty()) out << "# config: " << config_echo << "\n";
  out << "lane = " << to_string(r.lane) << "\n";
  out << "seed = " << r.seed << "\n";
  out << "n_starts = " << r.n_starts << "\n";
  out << "objective = " << r.hard_objective << "\n";
  out << "objective_fraction = " << fmt_g17(r.hard_fraction) << "\n";
  const auto theta = theta_from_params(r.params);
  for (size_t j = 0; j < 7; ++j) {
    out << param_names()[j] << " = " << fmt_g17(theta[j]) << "\n";
    out << param_names()[j] << "_stddev = " << fmt_g17(r.start_stddev[j]) << "\n";
  }
}

inline MobilParams load_mobil_params(const std::string& path, Lane* lane = nullptr) {
  const KeyValueMap kv = load_key_values(path);
  std::array<double, 7> theta{};
  for (size_t j = 0; j < 7; ++j)
    theta[j] = parse_double(require_key(kv, param_names()[j], path), param_names()[j]);
  if (lane) *lane = parse_lane(require_key(kv, "lane", path));
  MobilParams mp = params_from_theta(theta);
  mp.validate();
  return mp;
}

}  // namespace lcbench
