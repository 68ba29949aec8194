#pragma once

#include <string>
#include <vector>

#include "offrl/evaluation.hpp"

namespace offrl {

struct CellStat {
  bool present = false;
  bool failed = false;
  double best_mean = 0.0;
  double std_at_best = 0.0;
  int epoch_at_best = 0;
  int seeds = 0;
};

struct SummaryTable {
  std::vector<std::string> datasets;  // rows
  std::vector<std::string> methods;   // columns
  std::vector<std::vector<CellStat>> cells;  // [dataset][method]
};

// Plain-text table; the best cell per row is starred, and cells tied with
// it at the displayed precision are starred too. Single-seed cells are
// marked. ANSI bold is applied on top when `color` is set.
std::string render_summary_text(const SummaryTable& t, int precision = 2,
                                bool color = false);
std::string render_summary_csv(const SummaryTable& t);

struct CurvePoint {
  int epoch = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double best = 0.0;
  int seeds = 0;
};

std::string render_curve_csv(const std::vector<CurvePoint>& pts);

struct CurveSeries {
  std::string label;
  std::vector<CurvePoint> points;
};

// Self-contained SVG line chart with a +-stddev band per series.
std::string render_curves_svg(const std::string& title,
                              const std::vector<CurveSeries>& series);

// Aggregate matched eval points across seeds: mean of per-seed means,
// sample stddev across seeds, best-so-far = running max of the means.
std::vector<CurvePoint> aggregate_curves(const std::vector<std::vector<EvalPoint>>& per_seed);

// Summary cell for an aggregated curve: the point with the highest mean
// (earliest such epoch on ties). Empty curve -> failed cell.
CellStat cell_from_curve(const std::vector<CurvePoint>& curve);

// Inverse of TrainLog::evals_csv; `origin` names the file in errors.
std::vector<EvalPoint> parse_eval_log_csv(const std::string& text, const std::string& origin);

}  // namespace offrl
