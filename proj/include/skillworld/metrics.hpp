#pragma once

// Metrics CSV. One schema for both row kinds:
//  - step rows: loss fields filled, eval fields empty
//  - eval rows: one per evaluated split, duplicating the step fields, loss
//    fields empty, eval fields filled
// All floats print with %.9g so identical runs produce byte-identical files.
// Per-task routing decisions go to a sidecar CSV (step,task_id,pass,eta,tier)
// because the main schema is fixed.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "skillworld/errors.hpp"

namespace skillworld {

inline constexpr const char* kMetricsHeader =
    "step,n_hard,n_medium,n_easy,eta,u_anchor,train_pass,loss_hard,loss_medium,loss_easy,"
    "loss_kl,loss_entropy,loss_total,grad_norm,eval_split,eval_mode,eval_avg,eval_per_domain";

inline constexpr const char* kRouterHeader = "step,task_id,pass,eta,tier";

inline std::string fmt_g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

struct MetricsRow {
  int step = 0;
  int n_hard = 0, n_medium = 0, n_easy = 0;
  double eta = 0.0, u_anchor = 0.0, train_pass = 0.0;
  bool has_loss = false;
  double loss_hard = 0.0, loss_medium = 0.0, loss_easy = 0.0;
  double loss_kl = 0.0, loss_entropy = 0.0, loss_total = 0.0, grad_norm = 0.0;
  bool has_eval = false;
  std::string eval_split, eval_mode;
  double eval_avg = 0.0;
  std::vector<std::pair<std::string, double>> eval_per_domain;
};

inline std::string format_metrics_row(const MetricsRow& r) {
  std::ostringstream ss;
  ss << r.step << ',' << r.n_hard << ',' << r.n_medium << ',' << r.n_easy << ','
     << fmt_g9(r.eta) << ',' << fmt_g9(r.u_anchor) << ',' << fmt_g9(r.train_pass) << ',';
  if (r.has_loss) {
    ss << fmt_g9(r.loss_hard) << ',' << fmt_g9(r.loss_medium) << ',' << fmt_g9(r.loss_easy) << ','
       << fmt_g9(r.loss_kl) << ',' << fmt_g9(r.loss_entropy) << ',' << fmt_g9(r.loss_total) << ','
       << fmt_g9(r.grad_norm) << ',';
  } else {
    ss << ",,,,,,,";
  }
  if (r.has_eval) {
    ss << r.eval_split << ',' << r.eval_mode << ',' << fmt_g9(r.eval_avg) << ',';
    for (std::size_t i = 0; i < r.eval_per_domain.size(); ++i) {
      if (i) ss << ';';
      ss << r.eval_per_domain[i].first << ':' << fmt_g9(r.eval_per_domain[i].second);
    }
  } else {
    ss << ",,,";
  }
  return ss.str();
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == delim) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace detail

inline MetricsRow parse_metrics_row(const std::string& line) {
  std::vector<std::string> f = detail::split_csv(line, ',');
  if (f.size() != 18) throw IoError("metrics: row does not have 18 columns");
  MetricsRow r;
  r.step = std::stoi(f[0]);
  r.n_hard = std::stoi(f[1]);
  r.n_medium = std::stoi(f[2]);
  r.n_easy = std::stoi(f[3]);
  r.eta = std::stod(f[4]);
  r.u_anchor = std::stod(f[5]);
  r.train_pass = std::stod(f[6]);
  r.has_loss = !f[7].empty();
  if (r.has_loss) {
    r.loss_hard = std::stod(f[7]);
    r.loss_medium = std::stod(f[8]);
    r.loss_easy = std::stod(f[9]);
    r.loss_kl = std::stod(f[10]);
    r.loss_entropy = std::stod(f[11]);
    r.loss_total = std::stod(f[12]);
    r.grad_norm = std::stod(f[13]);
  }
  r.has_eval = !f[14].empty();
  if (r.has_eval) {
    r.eval_split = f[14];
    r.eval_mode = f[15];
    r.eval_avg = std::stod(f[16]);
    if (!f[17].empty()) {
      for (const std::string& kv : detail::split_csv(f[17], ';')) {
        std::size_t pos = kv.rfind(':');
        if (pos == std::string::npos) throw IoError("metrics: bad per-domain entry " + kv);
        r.eval_per_domain.emplace_back(kv.substr(0, pos), std::stod(kv.substr(pos + 1)));
      }
    }
  }
  return r;
}

inline std::vector<MetricsRow> parse_metrics(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("metrics: empty file");
  if (line != kMetricsHeader) throw IoError("metrics: unexpected header");
  std::vector<MetricsRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    rows.push_back(parse_metrics_row(line));
  }
  return rows;
}

inline std::vector<MetricsRow> parse_metrics_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("metrics: cannot open " + path);
  return parse_metrics(is);
}

// Append-mode writer that tracks byte offsets so a resumed run can truncate
// back to the last durable row.
class MetricsWriter {
 public:
  MetricsWriter() = default;

  void open_fresh(const std::string& path, const char* header) {
    path_ = path;
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("metrics: cannot open " + path + " for writing");
    os << header << "\n";
    if (!os) throw IoError("metrics: write failed for " + path);
    offset_ = static_cast<long long>(os.tellp());
  }

  // Re-opens an existing file truncated to `offset` bytes.
  void open_resume(const std::string& path, long long offset) {
    path_ = path;
    std::filesystem::resize_file(path, static_cast<std::uintmax_t>(offset));
    offset_ = offset;
  }

  void append_line(const std::string& line) {
    std::ofstream os(path_, std::ios::binary | std::ios::app);
    if (!os) throw IoError("metrics: cannot reopen " + path_);
    os << line << "\n";
    if (!os) throw IoError("metrics: write failed for " + path_);
    offset_ = static_cast<long long>(os.tellp());
  }

  long long offset() const { return offset_; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  long long offset_ = 0;
};

}  // namespace skillworld
