#pragma once

// Metrics plotting. Renders the run's curves as one self-contained SVG string
// with no external references: success rates (train pass rate plus periodic
// validation averages) on top, tier fractions and the routing threshold below.
// Output is a pure function of the parsed rows, so re-rendering the same CSV
// reproduces the file byte for byte. Every step row contributes a marker
// carrying its step id in a data-step attribute.

#include <algorithm>
#include <sstream>
#include <string>
#include <vector>

#include "skillworld/metrics.hpp"

namespace skillworld {

namespace plotdetail {

struct Series {
  std::vector<std::pair<double, double>> pts;  // (step, value in [0,1])
  const char* color = "#000000";
  const char* label = "";
  bool markers = false;
};

struct Frame {
  double x0 = 70, y0 = 0, w = 760, h = 230;  // plot area; y0 set per chart
  double step_lo = 0, step_hi = 1;

  double sx(double step) const {
    double t = (step - step_lo) / (step_hi - step_lo);
    return x0 + t * w;
  }
  double sy(double v) const { return y0 + h - v * h; }
};

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline void draw_axes(std::ostringstream& ss, const Frame& f, const char* title) {
  ss << "<text x=\"" << num(f.x0) << "\" y=\"" << num(f.y0 - 10)
     << "\" font-size=\"15\" font-family=\"sans-serif\" fill=\"#222\">" << title << "</text>\n";
  for (int i = 0; i <= 4; ++i) {
    double v = 0.25 * i;
    double y = f.sy(v);
    ss << "<line x1=\"" << num(f.x0) << "\" y1=\"" << num(y) << "\" x2=\"" << num(f.x0 + f.w)
       << "\" y2=\"" << num(y) << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    ss << "<text x=\"" << num(f.x0 - 8) << "\" y=\"" << num(y + 4)
       << "\" font-size=\"11\" font-family=\"sans-serif\" fill=\"#555\" text-anchor=\"end\">" << num(v)
       << "</text>\n";
  }
  int n_ticks = 5;
  for (int i = 0; i <= n_ticks; ++i) {
    double step = f.step_lo + (f.step_hi - f.step_lo) * i / n_ticks;
    double x = f.sx(step);
    ss << "<line x1=\"" << num(x) << "\" y1=\"" << num(f.y0 + f.h) << "\" x2=\"" << num(x)
       << "\" y2=\"" << num(f.y0 + f.h + 4) << "\" stroke=\"#555\" stroke-width=\"1\"/>\n";
    ss << "<text x=\"" << num(x) << "\" y=\"" << num(f.y0 + f.h + 18)
       << "\" font-size=\"11\" font-family=\"sans-serif\" fill=\"#555\" text-anchor=\"middle\">"
       << num(std::round(step)) << "</text>\n";
  }
  ss << "<rect x=\"" << num(f.x0) << "\" y=\"" << num(f.y0) << "\" width=\"" << num(f.w)
     << "\" height=\"" << num(f.h) << "\" fill=\"none\" stroke=\"#555\" stroke-width=\"1\"/>\n";
}

inline void draw_series(std::ostringstream& ss, const Frame& f, const Series& s) {
  if (s.pts.empty()) return;
  if (s.pts.size() > 1) {
    ss << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.pts.size(); ++i) {
      if (i) ss << ' ';
      ss << num(f.sx(s.pts[i].first)) << ',' << num(f.sy(s.pts[i].second));
    }
    ss << "\"/>\n";
  }
  if (s.markers || s.pts.size() == 1) {
    for (const auto& [step, v] : s.pts)
      ss << "<circle cx=\"" << num(f.sx(step)) << "\" cy=\"" << num(f.sy(v))
         << "\" r=\"2\" fill=\"" << s.color << "\" data-step=\"" << num(step) << "\"/>\n";
  }
}

inline void draw_legend(std::ostringstream& ss, const Frame& f, const std::vector<Series>& series) {
  double x = f.x0 + 10;
  for (const Series& s : series) {
    if (s.pts.empty()) continue;
    double y = f.y0 + 16;
    ss << "<line x1=\"" << num(x) << "\" y1=\"" << num(y - 4) << "\" x2=\"" << num(x + 18)
       << "\" y2=\"" << num(y - 4) << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
    ss << "<text x=\"" << num(x + 22) << "\" y=\"" << num(y)
       << "\" font-size=\"12\" font-family=\"sans-serif\" fill=\"#222\">" << s.label << "</text>\n";
    x += 26 + 8.0 * static_cast<double>(std::string(s.label).size());
  }
}

}  // namespace plotdetail

inline std::string render_metrics_svg(const std::vector<MetricsRow>& rows) {
  if (rows.empty()) throw IoError("plot: metrics file has no data rows");
  using namespace plotdetail;

  // Step rows (first row per step carries the step fields) and eval samples.
  Series train{{}, "#4477aa", "train pass", true};
  Series val_id{{}, "#ee7733", "val_id avg", false};
  Series val_ood{{}, "#cc3311", "val_ood avg", false};
  Series hard{{}, "#cc3311", "hard", false};
  Series medium{{}, "#ee7733", "medium", false};
  Series easy{{}, "#228833", "easy", false};
  Series eta{{}, "#888888", "eta", false};

  int last_step = -1;
  for (const MetricsRow& r : rows) {
    if (r.step != last_step) {
      last_step = r.step;
      double s = static_cast<double>(r.step);
      train.pts.emplace_back(s, r.train_pass);
      int batch = r.n_hard + r.n_medium + r.n_easy;
      if (batch > 0) {
        hard.pts.emplace_back(s, static_cast<double>(r.n_hard) / batch);
        medium.pts.emplace_back(s, static_cast<double>(r.n_medium) / batch);
        easy.pts.emplace_back(s, static_cast<double>(r.n_easy) / batch);
      }
      eta.pts.emplace_back(s, r.eta);
    }
    if (r.has_eval) {
      if (r.eval_split == "val_id") val_id.pts.emplace_back(r.step, r.eval_avg);
      else if (r.eval_split == "val_ood") val_ood.pts.emplace_back(r.step, r.eval_avg);
    }
  }

  Frame f;
  f.step_lo = train.pts.front().first;
  f.step_hi = train.pts.back().first;
  if (f.step_hi <= f.step_lo) f.step_hi = f.step_lo + 1;

  std::ostringstream ss;
  ss << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"900\" height=\"640\" "
        "viewBox=\"0 0 900 640\">\n";
  ss << "<rect x=\"0\" y=\"0\" width=\"900\" height=\"640\" fill=\"#ffffff\"/>\n";

  f.y0 = 40;
  draw_axes(ss, f, "success rate vs step");
  draw_series(ss, f, train);
  draw_series(ss, f, val_id);
  draw_series(ss, f, val_ood);
  draw_legend(ss, f, {train, val_id, val_ood});

  f.y0 = 360;
  draw_axes(ss, f, "tier fractions and routing threshold vs step");
  draw_series(ss, f, hard);
  draw_series(ss, f, medium);
  draw_series(ss, f, easy);
  draw_series(ss, f, eta);
  draw_legend(ss, f, {hard, medium, easy, eta});

  ss << "</svg>\n";
  return ss.str();
}

}  // namespace skillworld
