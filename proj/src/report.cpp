#include "offrl/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "offrl/errors.hpp"
#include "offrl/util.hpp"

namespace offrl {

namespace {

std::string fixed(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, v);
  return buf;
}

std::string svg_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

std::string render_summary_text(const SummaryTable& t, int precision, bool color) {
  if (t.cells.size() != t.datasets.size())
    throw std::invalid_argument("summary table: " + std::to_string(t.cells.size()) +
                                " cell rows for " + std::to_string(t.datasets.size()) +
                                " datasets");
  const size_t rows = t.datasets.size();
  const size_t cols = t.methods.size();
  // cell texts first, then widths
  std::vector<std::vector<std::string>> text(rows, std::vector<std::string>(cols));
  std::vector<std::vector<bool>> star(rows, std::vector<bool>(cols, false));
  for (size_t r = 0; r < rows; ++r) {
    if (t.cells[r].size() != cols)
      throw std::invalid_argument("summary table: row " + std::to_string(r + 1) +
                                  " has " + std::to_string(t.cells[r].size()) + " cells for " +
                                  std::to_string(cols) + " methods");
    // the starred set: cells matching the row maximum at displayed precision
    std::string best_disp;
    bool have_best = false;
    double best = 0.0;
    for (size_t c = 0; c < cols; ++c) {
      const CellStat& s = t.cells[r][c];
      if (!s.present || s.failed) continue;
      if (!have_best || s.best_mean > best) {
        have_best = true;
        best = s.best_mean;
      }
    }
    if (have_best) best_disp = fixed(best, precision);
    for (size_t c = 0; c < cols; ++c) {
      const CellStat& s = t.cells[r][c];
      if (!s.present) {
        text[r][c] = "-";
        continue;
      }
      if (s.failed) {
        text[r][c] = "failed";
        continue;
      }
      const std::string mean_disp = fixed(s.best_mean, precision);
      star[r][c] = have_best && mean_disp == best_disp;
      std::string cell = mean_disp + " +-" + fixed(s.std_at_best, precision);
      if (s.seeds == 1) cell += " (1 seed)";
      if (star[r][c]) cell = "*" + cell;
      text[r][c] = cell;
    }
  }
  std::vector<size_t> width(cols + 1, 0);
  width[0] = std::string("dataset").size();
  for (const std::string& d : t.datasets) width[0] = std::max(width[0], d.size());
  for (size_t c = 0; c < cols; ++c) {
    width[c + 1] = t.methods[c].size();
    for (size_t r = 0; r < rows; ++r) width[c + 1] = std::max(width[c + 1], text[r][c].size());
  }
  auto pad = [](const std::string& s, size_t w) {
    return s + std::string(w > s.size() ? w - s.size() : 0, ' ');
  };
  std::string out = pad("dataset", width[0]);
  for (size_t c = 0; c < cols; ++c) out += "  " + pad(t.methods[c], width[c + 1]);
  out += "\n";
  for (size_t c = 0; c <= cols; ++c) {
    if (c) out += "  ";
    out += std::string(width[c], '-');
  }
  out += "\n";
  for (size_t r = 0; r < rows; ++r) {
    out += pad(t.datasets[r], width[0]);
    for (size_t c = 0; c < cols; ++c) {
      std::string cell = pad(text[r][c], width[c + 1]);
      if (color && star[r][c]) cell = "\033[1m" + cell + "\033[0m";
      out += "  " + cell;
    }
    out += "\n";
  }
  return out;
}

std::string render_summary_csv(const SummaryTable& t) {
  std::string out = "dataset,method,best_mean,std_at_best,epoch_at_best,seeds,status\n";
  for (size_t r = 0; r < t.datasets.size(); ++r) {
    for (size_t c = 0; c < t.methods.size(); ++c) {
      const CellStat& s = t.cells[r][c];
      out += t.datasets[r] + "," + t.methods[c] + ",";
      if (!s.present) {
        out += ",,,0,missing\n";
      } else if (s.failed) {
        out += ",,,0,failed\n";
      } else {
        out += fmt_double(s.best_mean) + "," + fmt_double(s.std_at_best) + "," +
               std::to_string(s.epoch_at_best) + "," + std::to_string(s.seeds) + ",ok\n";
      }
    }
  }
  return out;
}

std::string render_curve_csv(const std::vector<CurvePoint>& pts) {
  std::string out = "epoch,mean,stddev,best,seeds\n";
  for (const CurvePoint& p : pts) {
    out += std::to_string(p.epoch) + "," + fmt_double(p.mean) + "," + fmt_double(p.stddev) +
           "," + fmt_double(p.best) + "," + std::to_string(p.seeds) + "\n";
  }
  return out;
}

std::vector<CurvePoint> aggregate_curves(const std::vector<std::vector<EvalPoint>>& per_seed) {
  std::vector<CurvePoint> out;
  if (per_seed.empty()) return out;
  const size_t npts = per_seed.front().size();
  for (const std::vector<EvalPoint>& s : per_seed)
    if (s.size() != npts)
      throw std::invalid_argument("aggregate_curves: seed curves have different lengths (" +
                                  std::to_string(s.size()) + " vs " + std::to_string(npts) + ")");
  double best = 0.0;
  for (size_t i = 0; i < npts; ++i) {
    const int epoch = per_seed.front()[i].epoch;
    std::vector<double> means;
    means.reserve(per_seed.size());
    for (const std::vector<EvalPoint>& s : per_seed) {
      if (s[i].epoch != epoch)
        throw std::invalid_argument("aggregate_curves: epoch mismatch at point " +
                                    std::to_string(i + 1));
      means.push_back(s[i].mean);
    }
    CurvePoint p;
    p.epoch = epoch;
    double sum = 0.0;
    for (double v : means) sum += v;
    p.mean = sum / static_cast<double>(means.size());
    p.stddev = sample_stddev(means);
    p.seeds = static_cast<int>(means.size());
    best = out.empty() ? p.mean : std::max(best, p.mean);
    p.best = best;
    out.push_back(p);
  }
  return out;
}

std::string render_curves_svg(const std::string& title,
                              const std::vector<CurveSeries>& series) {
  static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b"};
  constexpr int kNColors = 6;
  const double w = 860, h = 440, left = 60, right = 680, top = 40, bottom = 390;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool any = false;
  for (const CurveSeries& s : series) {
    for (const CurvePoint& p : s.points) {
      const double lo = p.mean - p.stddev, hi = p.mean + p.stddev;
      if (!any) {
        xmin = xmax = p.epoch;
        ymin = lo;
        ymax = hi;
        any = true;
      } else {
        xmin = std::min(xmin, static_cast<double>(p.epoch));
        xmax = std::max(xmax, static_cast<double>(p.epoch));
        ymin = std::min(ymin, lo);
        ymax = std::max(ymax, hi);
      }
    }
  }
  if (!any) {
    xmin = 0;
    xmax = 1;
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) {
    ymin -= 1;
    ymax += 1;
  }
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;
  auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * (right - left); };
  auto sy = [&](double y) { return bottom - (y - ymin) / (ymax - ymin) * (bottom - top); };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + svg_num(w) + "\" height=\"" +
         svg_num(h) + "\" viewBox=\"0 0 " + svg_num(w) + " " + svg_num(h) + "\">\n";
  svg += "<rect width=\"" + svg_num(w) + "\" height=\"" + svg_num(h) + "\" fill=\"white\"/>\n";
  svg += "<text x=\"" + svg_num((left + right) / 2) +
         "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">" +
         title + "</text>\n";
  // grid and ticks
  for (int i = 0; i <= 4; ++i) {
    const double fx = xmin + (xmax - xmin) * i / 4.0;
    const double fy = ymin + (ymax - ymin) * i / 4.0;
    svg += "<line x1=\"" + svg_num(sx(fx)) + "\" y1=\"" + svg_num(top) + "\" x2=\"" +
           svg_num(sx(fx)) + "\" y2=\"" + svg_num(bottom) +
           "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    svg += "<line x1=\"" + svg_num(left) + "\" y1=\"" + svg_num(sy(fy)) + "\" x2=\"" +
           svg_num(right) + "\" y2=\"" + svg_num(sy(fy)) +
           "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    svg += "<text x=\"" + svg_num(sx(fx)) + "\" y=\"" + svg_num(bottom + 18) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" +
           svg_num(fx) + "</text>\n";
    svg += "<text x=\"" + svg_num(left - 8) + "\" y=\"" + svg_num(sy(fy) + 4) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + svg_num(fy) +
           "</text>\n";
  }
  svg += "<line x1=\"" + svg_num(left) + "\" y1=\"" + svg_num(bottom) + "\" x2=\"" +
         svg_num(right) + "\" y2=\"" + svg_num(bottom) + "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + svg_num(left) + "\" y1=\"" + svg_num(top) + "\" x2=\"" + svg_num(left) +
         "\" y2=\"" + svg_num(bottom) + "\" stroke=\"black\"/>\n";
  svg += "<text x=\"" + svg_num((left + right) / 2) + "\" y=\"" + svg_num(h - 8) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">epoch</text>\n";

  for (size_t si = 0; si < series.size(); ++si) {
    const CurveSeries& s = series[si];
    const char* color = kPalette[si % kNColors];
    if (s.points.size() > 1) {
      std::string band = "<path d=\"M";
      for (const CurvePoint& p : s.points)
        band += " " + svg_num(sx(p.epoch)) + " " + svg_num(sy(p.mean + p.stddev));
      for (size_t i = s.points.size(); i-- > 0;) {
        const CurvePoint& p = s.points[i];
        band += " L " + svg_num(sx(p.epoch)) + " " + svg_num(sy(p.mean - p.stddev));
      }
      band += " Z\" fill=\"" + std::string(color) + "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
      svg += band;
    }
    std::string line = "<polyline fill=\"none\" stroke=\"" + std::string(color) +
                       "\" stroke-width=\"2\" points=\"";
    for (const CurvePoint& p : s.points)
      line += svg_num(sx(p.epoch)) + "," + svg_num(sy(p.mean)) + " ";
    line += "\"/>\n";
    svg += line;
    for (const CurvePoint& p : s.points)
      svg += "<circle cx=\"" + svg_num(sx(p.epoch)) + "\" cy=\"" + svg_num(sy(p.mean)) +
             "\" r=\"2.5\" fill=\"" + std::string(color) + "\"/>\n";
    const double ly = top + 20.0 * static_cast<double>(si);
    svg += "<line x1=\"" + svg_num(right + 16) + "\" y1=\"" + svg_num(ly) + "\" x2=\"" +
           svg_num(right + 40) + "\" y2=\"" + svg_num(ly) + "\" stroke=\"" +
           std::string(color) + "\" stroke-width=\"2\"/>\n";
    svg += "<text x=\"" + svg_num(right + 46) + "\" y=\"" + svg_num(ly + 4) +
           "\" font-family=\"sans-serif\" font-size=\"12\">" + s.label + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

CellStat cell_from_curve(const std::vector<CurvePoint>& curve) {
  CellStat cell;
  cell.present = true;
  if (curve.empty()) {
    cell.failed = true;
    return cell;
  }
  size_t best_i = 0;
  for (size_t i = 1; i < curve.size(); ++i)
    if (curve[i].mean > curve[best_i].mean) best_i = i;
  cell.best_mean = curve[best_i].mean;
  cell.std_at_best = curve[best_i].stddev;
  cell.epoch_at_best = curve[best_i].epoch;
  cell.seeds = curve[best_i].seeds;
  return cell;
}

std::vector<EvalPoint> parse_eval_log_csv(const std::string& text, const std::string& origin) {
  const std::vector<std::string> lines = split(text, '\n');
  if (lines.empty() || trim(lines[0]) != "epoch,mean,stddev,best_so_far,n")
    throw DataError("eval log " + origin + ": missing or wrong header line");
  std::vector<EvalPoint> out;
  for (size_t li = 1; li < lines.size(); ++li) {
    const std::string line = trim(lines[li]);
    if (line.empty()) continue;
    const std::vector<std::string> f = split(line, ',');
    if (f.size() != 5)
      throw DataError("eval log " + origin + " line " + std::to_string(li + 1) + ": expected 5 fields, got " +
                      std::to_string(f.size()));
    EvalPoint p;
    try {
      p.epoch = static_cast<int>(std::stol(f[0]));
      p.mean = std::stod(f[1]);
      p.stddev = std::stod(f[2]);
      p.best_so_far = std::stod(f[3]);
      p.n = static_cast<int>(std::stol(f[4]));
    } catch (const std::exception&) {
      throw DataError("eval log " + origin + " line " + std::to_string(li + 1) + ": unparsable number");
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace offrl
