#pragma once

// Standalone descriptive reports: writes the frequency table, correlation
// tables, PCA loadings/circle coordinates and logistic odds ratios produced
// by describe() as plot-ready delimited files plus a human-readable summary.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>

#include "lcbench/common.hpp"
#include "lcbench/evaluation.hpp"

namespace lcbench {

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw ParseError("cannot write file: " + p.string());
  return out;
}

inline std::string csv_num(double v) {
  if (std::isnan(v)) return "nan";
  return fmt_g9(v);
}

}  // namespace detail

inline void print_frequency_table(std::ostream& out, const DescribeResult& r) {
  out << "maneuver   count      %   mean v_x  mean dx_P   mean T_P\n";
  char buf[160];
  for (const auto& c : r.frequency) {
    std::snprintf(buf, sizeof(buf), "%-8s %7zu %6.2f %10.2f %10.2f %10.2f\n",
                  to_string(c.maneuver), c.count, c.pct, c.mean_vx, c.mean_dx_p,
                  c.mean_tgap_p);
    out << buf;
  }
}

inline void print_describe(std::ostream& out, const DescribeResult& r) {
  out << "samples: " << r.n << "\n\n";
  print_frequency_table(out, r);
  for (const auto& ld : r.lanes) {
    out << "\n-- " << to_string(ld.lane) << " lane (" << ld.n << " samples)\n";
    out << "maneuver correlations:";
    for (const auto& [name, c] : ld.indicator_corr) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), " %s=%.3f", name.c_str(), c);
      out << buf;
    }
    out << "\n";
    if (!ld.pca.explained.empty()) {
      const double two = ld.pca.explained[0] +
                         (ld.pca.explained.size() > 1 ? ld.pca.explained[1] : 0.0);
      char buf[96];
      std::snprintf(buf, sizeof(buf),
                    "pca: first two components explain %.1f%% of the variability\n",
                    100.0 * two);
      out << buf;
    }
    if (!ld.odds.empty()) {
      out << "logistic odds ratios (95% CI):\n";
      for (const auto& o : ld.odds) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "  %-6s %8.4f  [%.4f, %.4f]\n",
                      o.name.c_str(), o.estimate, o.lo, o.hi);
        out << buf;
      }
    }
    for (const auto& note : ld.notes) out << "note: " << note << "\n";
  }
}

/// Write the full report into `dir` (created if missing): frequency.csv,
/// indicator_correlations.csv, per-lane correlation matrices, PCA loadings
/// and circle coordinates, odds_ratios.csv and summary.txt.
inline void write_descriptive_report(const DescribeResult& r,
                                     const std::string& dir,
                                     const std::string& config_echo = "") {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const std::string echo =
      config_echo.empty() ? "" : "# config: " + config_echo + "\n";

  {
    auto out = detail::open_out(fs::path(dir) / "frequency.csv");
    out << echo << "maneuver,count,pct,mean_v_x,mean_dx_P,mean_T_P\n";
    for (const auto& c : r.frequency)
      out << to_string(c.maneuver) << ',' << c.count << ','
          << detail::csv_num(c.pct) << ',' << detail::csv_num(c.mean_vx) << ','
          << detail::csv_num(c.mean_dx_p) << ',' << detail::csv_num(c.mean_tgap_p)
          << "\n";
  }
  {
    auto out = detail::open_out(fs::path(dir) / "indicator_correlations.csv");
    out << echo << "lane,variable,correlation\n";
    for (const auto& ld : r.lanes)
      for (const auto& [name, c] : ld.indicator_corr)
        out << to_string(ld.lane) << ',' << name << ',' << detail::csv_num(c) << "\n";
  }
  {
    auto out = detail::open_out(fs::path(dir) / "odds_ratios.csv");
    out << echo << "lane,variable,odds_ratio,ci_low,ci_high\n";
    for (const auto& ld : r.lanes)
      for (const auto& o : ld.odds)
        out << to_string(ld.lane) << ',' << o.name << ','
            << detail::csv_num(o.estimate) << ',' << detail::csv_num(o.lo) << ','
            << detail::csv_num(o.hi) << "\n";
  }
  for (const auto& ld : r.lanes) {
    const std::string lane = to_string(ld.lane);
    {
      auto out = detail::open_out(fs::path(dir) / ("correlation_matrix_" + lane + ".csv"));
      out << echo << "variable";
      for (const auto& n : ld.corr_names) out << ',' << n;
      out << "\n";
      for (std::size_t i = 0; i < ld.corr.rows; ++i) {
        out << ld.corr_names[i];
        for (std::size_t j = 0; j < ld.corr.cols; ++j)
          out << ',' << detail::csv_num(ld.corr(i, j));
        out << "\n";
      }
    }
    {
      auto out = detail::open_out(fs::path(dir) / ("pca_" + lane + ".csv"));
      out << echo << "variable,component1,component2,circle1,circle2\n";
      for (std::size_t i = 0; i < ld.pca.names.size(); ++i) {
        out << ld.pca.names[i];
        for (std::size_t j = 0; j < 2; ++j)
          out << ',' << (j < ld.pca.components.cols
                             ? detail::csv_num(ld.pca.components(i, j))
                             : "nan");
        for (std::size_t j = 0; j < 2; ++j)
          out << ',' << (j < ld.pca.circle.cols ? detail::csv_num(ld.pca.circle(i, j))
                                                : "nan");
        out << "\n";
      }
    }
    {
      auto out = detail::open_out(fs::path(dir) / ("pca_variance_" + lane + ".csv"));
      out << echo << "component,explained_fraction\n";
      for (std::size_t j = 0; j < ld.pca.explained.size(); ++j)
        out << (j + 1) << ',' << detail::csv_num(ld.pca.explained[j]) << "\n";
    }
  }
  {
    auto out = detail::open_out(fs::path(dir) / "summary.txt");
    out << echo;
    print_describe(out, r);
  }
}

}  // namespace lcbench
