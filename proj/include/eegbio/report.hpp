#pragma once

// Figure data as CSV plus a plain SVG rendering. Output is a pure function of
// the inputs (fixed number formatting, no timestamps).

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "eegbio/evaluate.hpp"
#include "eegbio/format.hpp"
#include "eegbio/psm.hpp"

namespace eegbio::report {

namespace svg_detail {

constexpr double kW = 640, kH = 400, kLeft = 70, kRight = 20, kTop = 40, kBottom = 60;

inline std::string num(double v) { return fmt::fixed(v, 2); }

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

inline std::string open(const std::string& title, double w = kW, double h = kH) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w) + "\" height=\"" + num(h) +
         "\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
         "<text x=\"" + num(w / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" + escape(title) + "</text>\n";
}

inline std::string text(double x, double y, const std::string& s, const std::string& anchor = "middle",
                        const std::string& extra = "") {
  return "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" text-anchor=\"" + anchor + "\"" + extra + ">" + escape(s) +
         "</text>\n";
}

inline std::string line(double x1, double y1, double x2, double y2, const std::string& stroke = "black",
                        const std::string& extra = "") {
  return "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" + num(y2) +
         "\" stroke=\"" + stroke + "\"" + extra + "/>\n";
}

inline std::string rect(double x, double y, double w, double h, const std::string& fill,
                        const std::string& extra = "") {
  return "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(std::max(0.0, w)) + "\" height=\"" +
         num(std::max(0.0, h)) + "\" fill=\"" + fill + "\"" + extra + "/>\n";
}

/// Linear map of [lo, hi] onto the plot's vertical pixel range.
struct YAxis {
  double lo, hi;
  double px(double v) const { return kH - kBottom - (v - lo) / (hi - lo) * (kH - kTop - kBottom); }
};

inline std::string y_axis(const YAxis& y, const std::string& label) {
  std::string out = line(kLeft, kTop, kLeft, kH - kBottom);
  for (int k = 0; k <= 4; ++k) {
    const double v = y.lo + (y.hi - y.lo) * k / 4.0;
    out += line(kLeft - 4, y.px(v), kLeft, y.px(v));
    out += text(kLeft - 6, y.px(v) + 4, fmt::fixed(v, 2), "end");
  }
  out += text(16, kH / 2, label, "middle", " transform=\"rotate(-90 16 " + num(kH / 2) + ")\"");
  return out;
}

inline YAxis padded(double lo, double hi) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  return {lo, hi};
}

const char* const kPalette[] = {"#4477aa", "#ee6677", "#228833", "#ccbb44", "#66ccee", "#aa3377"};

}  // namespace svg_detail

// ---------------------------------------------------------------------------
// Bar chart (effect sizes, SMD)

inline std::string bar_csv(const std::vector<std::string>& labels, const std::vector<double>& values,
                           const std::string& label_col, const std::string& value_col) {
  std::string out = label_col + "," + value_col + "\n";
  for (std::size_t i = 0; i < labels.size(); ++i) out += labels[i] + "," + fmt::shortest(values[i]) + "\n";
  return out;
}

inline std::string bar_svg(const std::string& title, const std::vector<std::string>& labels,
                           const std::vector<double>& values, const std::string& y_label) {
  using namespace svg_detail;
  double lo = 0.0, hi = 0.0;
  for (double v : values) lo = std::min(lo, v), hi = std::max(hi, v);
  const YAxis y = padded(lo, hi);
  std::string out = open(title) + y_axis(y, y_label);
  out += line(kLeft, y.px(0.0), kW - kRight, y.px(0.0));
  const double slot = (kW - kLeft - kRight) / static_cast<double>(std::max<std::size_t>(1, values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double x = kLeft + slot * static_cast<double>(i);
    const double top = y.px(std::max(0.0, values[i]));
    const double bottom = y.px(std::min(0.0, values[i]));
    out += rect(x + slot * 0.15, top, slot * 0.7, bottom - top, values[i] >= 0 ? kPalette[0] : kPalette[1]);
    const double lx = x + slot / 2, ly = kH - kBottom + 12;
    out += text(lx, ly, labels[i], "end", " transform=\"rotate(-40 " + num(lx) + " " + num(ly) + ")\" font-size=\"8\"");
  }
  return out + "</svg>\n";
}

// ---------------------------------------------------------------------------
// Line chart (learning curve)

struct LineSeries {
  std::string name;
  std::vector<double> y;
};

inline std::string line_svg(const std::string& title, const std::vector<double>& x, const std::vector<LineSeries>& series,
                            const std::string& x_label, const std::string& y_label) {
  using namespace svg_detail;
  double lo = 1e300, hi = -1e300;
  for (const auto& s : series)
    for (double v : s.y) lo = std::min(lo, v), hi = std::max(hi, v);
  if (lo > hi) lo = 0, hi = 1;
  const YAxis y = padded(std::min(lo, 0.5), std::max(hi, 1.0));
  double xlo = x.empty() ? 0 : x.front(), xhi = x.empty() ? 1 : x.back();
  if (!(xhi > xlo)) xlo -= 1, xhi += 1;
  auto px = [&](double v) { return kLeft + (v - xlo) / (xhi - xlo) * (kW - kLeft - kRight); };
  std::string out = open(title) + y_axis(y, y_label);
  out += line(kLeft, kH - kBottom, kW - kRight, kH - kBottom);
  for (double v : x) out += text(px(v), kH - kBottom + 16, fmt::shortest(v));
  out += text((kLeft + kW - kRight) / 2, kH - 16, x_label);
  for (std::size_t s = 0; s < series.size(); ++s) {
    std::string pts;
    for (std::size_t i = 0; i < x.size() && i < series[s].y.size(); ++i)
      pts += (i ? " " : "") + num(px(x[i])) + "," + num(y.px(series[s].y[i]));
    const char* color = kPalette[s % 6];
    out += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
    out += rect(kW - kRight - 150, kTop + 16.0 * static_cast<double>(s), 10, 10, color);
    out += text(kW - kRight - 135, kTop + 9 + 16.0 * static_cast<double>(s), series[s].name, "start");
  }
  return out + "</svg>\n";
}

inline std::string learning_curve_csv(const std::vector<CurvePoint>& pts) {
  std::string out = "fraction,n,train_score,validation_score\n";
  for (const auto& p : pts)
    out += fmt::shortest(p.fraction) + "," + std::to_string(p.n) + "," + fmt::shortest(p.train_score) + "," +
           fmt::shortest(p.validation_score) + "\n";
  return out;
}

inline std::string learning_curve_svg(const std::vector<CurvePoint>& pts, const std::string& title) {
  std::vector<double> x;
  LineSeries tr{"training score", {}}, va{"cross-validation score", {}};
  for (const auto& p : pts) {
    x.push_back(static_cast<double>(p.n));
    tr.y.push_back(p.train_score);
    va.y.push_back(p.validation_score);
  }
  return line_svg(title, x, {tr, va}, "training examples", "accuracy");
}

// ---------------------------------------------------------------------------
// Propensity-score histograms

inline std::string histogram_csv(const BalanceReport& b) {
  std::string out = "bin_lo,bin_hi,treated_before,control_before,treated_after,control_after\n";
  for (int k = 0; k < ScoreHistogram::kBins; ++k) {
    const auto i = static_cast<std::size_t>(k);
    out += fmt::fixed(k / double(ScoreHistogram::kBins), 2) + "," + fmt::fixed((k + 1) / double(ScoreHistogram::kBins), 2) +
           "," + std::to_string(b.before.treated[i]) + "," + std::to_string(b.before.control[i]) + "," +
           std::to_string(b.after.treated[i]) + "," + std::to_string(b.after.control[i]) + "\n";
  }
  return out;
}

/// Mirrored histogram: treated above the axis, controls below; before in
/// outline, after filled.
inline std::string histogram_svg(const BalanceReport& b, const std::string& title) {
  using namespace svg_detail;
  std::size_t peak = 1;
  for (int k = 0; k < ScoreHistogram::kBins; ++k) {
    const auto i = static_cast<std::size_t>(k);
    peak = std::max({peak, b.before.treated[i], b.before.control[i]});
  }
  const double mid = (kTop + kH - kBottom) / 2;
  const double scale = (mid - kTop) / static_cast<double>(peak);
  const double bw = (kW - kLeft - kRight) / ScoreHistogram::kBins;
  std::string out = open(title);
  out += line(kLeft, mid, kW - kRight, mid);
  for (int k = 0; k < ScoreHistogram::kBins; ++k) {
    const auto i = static_cast<std::size_t>(k);
    const double x = kLeft + bw * k;
    out += rect(x + 1, mid - scale * b.before.treated[i], bw - 2, scale * b.before.treated[i], "none",
                " stroke=\"" + std::string(kPalette[1]) + "\"");
    out += rect(x + 1, mid - scale * b.after.treated[i], bw - 2, scale * b.after.treated[i], kPalette[1],
                " fill-opacity=\"0.6\"");
    out += rect(x + 1, mid, bw - 2, scale * b.before.control[i], "none", " stroke=\"" + std::string(kPalette[0]) + "\"");
    out += rect(x + 1, mid, bw - 2, scale * b.after.control[i], kPalette[0], " fill-opacity=\"0.6\"");
    if (k % 4 == 0) out += text(x, kH - kBottom + 16, fmt::fixed(k / double(ScoreHistogram::kBins), 1));
  }
  out += text(kW - kRight, kH - kBottom + 16, "1.0");
  out += text(kLeft + 4, kTop + 12, "ACr (treated)", "start");
  out += text(kLeft + 4, kH - kBottom - 4, "HC (control)", "start");
  out += text((kLeft + kW - kRight) / 2, kH - 16, "propensity score");
  return out + "</svg>\n";
}

inline std::string balance_csv(const BalanceReport& b) {
  std::string out = "covariate,smd_before,smd_after,degenerate\n";
  for (const auto& r : b.rows)
    out += r.covariate + "," + fmt::shortest(r.before.value) + "," + fmt::shortest(r.after.value) + "," +
           (r.before.degenerate || r.after.degenerate ? "true" : "false") + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Confusion matrix

inline std::string confusion_csv(const ConfusionMatrix& c, const std::string& positive) {
  return "positive_class,tp,fp,fn,tn,n\n" + positive + "," + std::to_string(c.tp) + "," + std::to_string(c.fp) + "," +
         std::to_string(c.fn) + "," + std::to_string(c.tn) + "," + std::to_string(c.n()) + "\n";
}

/// Rows: actual (positive, negative); columns: predicted (positive, negative).
inline std::string confusion_svg(const ConfusionMatrix& c, const std::string& positive, const std::string& negative,
                                 const std::string& title) {
  using namespace svg_detail;
  const double cell = 110, x0 = 200, y0 = 90;
  const std::size_t v[2][2] = {{c.tp, c.fn}, {c.fp, c.tn}};
  const double peak = static_cast<double>(std::max<std::size_t>(1, std::max({c.tp, c.fn, c.fp, c.tn})));
  std::string out = open(title, 520, 380);
  const std::string names[2] = {positive, negative};
  for (int r = 0; r < 2; ++r)
    for (int k = 0; k < 2; ++k) {
      const double shade = static_cast<double>(v[r][k]) / peak;
      const int level = static_cast<int>(std::lround(235 - 175 * shade));
      const std::string fill = "rgb(" + std::to_string(level) + "," + std::to_string(level) + ",255)";
      out += rect(x0 + cell * k, y0 + cell * r, cell, cell, fill, " stroke=\"black\"");
      out += text(x0 + cell * k + cell / 2, y0 + cell * r + cell / 2 + 6, std::to_string(v[r][k]), "middle",
                  " font-size=\"20\"");
    }
  for (int k = 0; k < 2; ++k) {
    out += text(x0 + cell * k + cell / 2, y0 - 8, names[k]);
    out += text(x0 - 8, y0 + cell * k + cell / 2 + 4, names[k], "end");
  }
  out += text(x0 + cell, y0 - 28, "predicted");
  out += text(60, y0 + cell, "actual", "middle");
  return out + "</svg>\n";
}

// ---------------------------------------------------------------------------
// Box plots (per-band feature distributions by group)

struct BoxStats {
  double q1 = 0, median = 0, q3 = 0, lo = 0, hi = 0;  // whiskers at 1.5 IQR
};

inline double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  if (v.empty()) return 0.0;
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(i);
  return i + 1 < v.size() ? v[i] * (1 - frac) + v[i + 1] * frac : v[i];
}

inline BoxStats box_stats(const std::vector<double>& v) {
  BoxStats b;
  b.q1 = quantile(v, 0.25);
  b.median = quantile(v, 0.5);
  b.q3 = quantile(v, 0.75);
  const double iqr = b.q3 - b.q1;
  b.lo = b.q1;
  b.hi = b.q3;
  for (double x : v) {
    if (x >= b.q1 - 1.5 * iqr) b.lo = std::min(b.lo, x);
    if (x <= b.q3 + 1.5 * iqr) b.hi = std::max(b.hi, x);
  }
  return b;
}

struct BoxGroup {
  std::string label;
  std::vector<double> values;
};

inline std::string boxplot_csv(const std::vector<BoxGroup>& groups) {
  std::string out = "label,n,whisker_lo,q1,median,q3,whisker_hi\n";
  for (const auto& g : groups) {
    const auto b = box_stats(g.values);
    out += g.label + "," + std::to_string(g.values.size()) + "," + fmt::shortest(b.lo) + "," + fmt::shortest(b.q1) +
           "," + fmt::shortest(b.median) + "," + fmt::shortest(b.q3) + "," + fmt::shortest(b.hi) + "\n";
  }
  return out;
}

inline std::string boxplot_svg(const std::vector<BoxGroup>& groups, const std::string& title, const std::string& y_label) {
  using namespace svg_detail;
  double lo = 1e300, hi = -1e300;
  std::vector<BoxStats> stats;
  for (const auto& g : groups) {
    stats.push_back(box_stats(g.values));
    lo = std::min(lo, stats.back().lo);
    hi = std::max(hi, stats.back().hi);
  }
  if (lo > hi) lo = 0, hi = 1;
  const YAxis y = padded(lo, hi);
  std::string out = open(title) + y_axis(y, y_label);
  const double slot = (kW - kLeft - kRight) / static_cast<double>(std::max<std::size_t>(1, groups.size()));
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto& b = stats[i];
    const double cx = kLeft + slot * (static_cast<double>(i) + 0.5), half = slot * 0.3;
    const char* color = kPalette[i % 2];
    out += line(cx, y.px(b.lo), cx, y.px(b.q1), color);
    out += line(cx, y.px(b.q3), cx, y.px(b.hi), color);
    out += rect(cx - half, y.px(b.q3), 2 * half, y.px(b.q1) - y.px(b.q3), "none", " stroke=\"" + std::string(color) + "\"");
    out += line(cx - half, y.px(b.median), cx + half, y.px(b.median), color, " stroke-width=\"2\"");
    const double ly = kH - kBottom + 12;
    out += text(cx, ly, groups[i].label, "end", " transform=\"rotate(-40 " + num(cx) + " " + num(ly) + ")\" font-size=\"9\"");
  }
  return out + "</svg>\n";
}

}  // namespace eegbio::report
