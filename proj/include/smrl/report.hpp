#pragma once

// Run persistence and reporting: the sweep CSV, the per-budget regression
// CSV, a self-contained SVG scatter figure, and a manifest with content
// digests. Regression tables are always derived from the CSV text, never
// from in-memory doubles, so `sweep` and a later `report` emit identical
// bytes.

#include <sys/utsname.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "smrl/binio.hpp"
#include "smrl/config.hpp"
#include "smrl/harness.hpp"
#include "smrl/version.hpp"

namespace smrl {

// %.9g under the "C" locale: '.' decimal separator, round-trips the values
// the report consumes.
inline std::string format_g9(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline constexpr const char* kSweepCsvHeader =
    "preset,dof,budget,seed,task,score_random,score_mfrl,score_selfmodel,"
    "pct_improvement,raw_ratio,model_val_loss,wall_time_s";

inline constexpr const char* kRegressionCsvHeader =
    "budget,slope,intercept,r_squared,n_points";

struct SweepRow {
  std::string preset;
  int dof = 0;
  long long budget = 0;
  int seed = 0;
  std::string task;
  double score_random = 0.0;
  double score_mfrl = 0.0;
  double score_selfmodel = 0.0;
  double pct_improvement = 0.0;
  double raw_ratio = 0.0;
  double model_val_loss = 0.0;
  double wall_time_s = 0.0;
};

// Failed cells carry no scores, so only successful cells become rows; their
// errors live in the manifest.
inline std::vector<SweepRow> rows_from_result(const SweepResult& sr) {
  std::vector<SweepRow> rows;
  for (const CellResult& r : sr.results) {
    if (!r.ok) continue;
    SweepRow row;
    row.preset = r.preset_name;
    row.dof = r.dof;
    row.budget = r.budget;
    row.seed = r.seed_index;
    row.task = task_name(r.task);
    row.score_random = r.score_random;
    row.score_mfrl = r.score_mfrl;
    row.score_selfmodel = r.score_selfmodel;
    row.pct_improvement = r.pct_improvement;
    row.raw_ratio = r.raw_ratio;
    row.model_val_loss = r.model_val_loss;
    row.wall_time_s = r.wall_time_s;
    rows.push_back(std::move(row));
  }
  return rows;
}

// wall_time_s is written as 0 unless timings are requested: real timings
// vary run to run and would break byte-identical reruns.
inline std::string sweep_csv_string(const std::vector<SweepRow>& rows,
                                    bool timings_in_csv) {
  std::string out = kSweepCsvHeader;
  out += '\n';
  for (const SweepRow& r : rows) {
    out += r.preset;
    out += ',';
    out += std::to_string(r.dof);
    out += ',';
    out += std::to_string(r.budget);
    out += ',';
    out += std::to_string(r.seed);
    out += ',';
    out += r.task;
    out += ',';
    out += format_g9(r.score_random);
    out += ',';
    out += format_g9(r.score_mfrl);
    out += ',';
    out += format_g9(r.score_selfmodel);
    out += ',';
    out += format_g9(r.pct_improvement);
    out += ',';
    out += format_g9(r.raw_ratio);
    out += ',';
    out += format_g9(r.model_val_loss);
    out += ',';
    out += timings_in_csv ? format_g9(r.wall_time_s) : std::string("0");
    out += '\n';
  }
  return out;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

inline double parse_double(const std::string& s, const char* what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(std::string("sweep csv: bad ") + what + " \"" +
                             s + "\"");
  }
}

inline long long parse_int(const std::string& s, const char* what) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error(std::string("sweep csv: bad ") + what + " \"" +
                             s + "\"");
  }
}

}  // namespace detail

inline std::vector<SweepRow> parse_sweep_csv(const std::string& text) {
  std::vector<std::string> lines;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      lines.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) lines.push_back(cur);
  if (lines.empty() || lines[0] != kSweepCsvHeader)
    throw std::runtime_error("sweep csv: missing or mismatched header");

  std::vector<SweepRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = detail::split_csv_line(lines[i]);
    if (f.size() != 12)
      throw std::runtime_error("sweep csv: wrong column count on line " +
                               std::to_string(i + 1));
    SweepRow r;
    r.preset = f[0];
    r.dof = static_cast<int>(detail::parse_int(f[1], "dof"));
    r.budget = detail::parse_int(f[2], "budget");
    r.seed = static_cast<int>(detail::parse_int(f[3], "seed"));
    r.task = f[4];
    parse_task(r.task);  // validates the name
    r.score_random = detail::parse_double(f[5], "score_random");
    r.score_mfrl = detail::parse_double(f[6], "score_mfrl");
    r.score_selfmodel = detail::parse_double(f[7], "score_selfmodel");
    r.pct_improvement = detail::parse_double(f[8], "pct_improvement");
    r.raw_ratio = detail::parse_double(f[9], "raw_ratio");
    r.model_val_loss = detail::parse_double(f[10], "model_val_loss");
    r.wall_time_s = detail::parse_double(f[11], "wall_time_s");
    rows.push_back(std::move(r));
  }
  return rows;
}

struct TaskTables {
  std::string task;
  std::vector<Aggregate> aggregates;     // budget first-seen order, dof ascending
  std::vector<RegressionRow> regressions;
};

// Groups rows into per-task median tables and per-budget regressions.
// Budgets keep their first-seen order; a budget with fewer than two dof
// groups simply contributes no regression row.
inline std::vector<TaskTables> derive_tables(
    const std::vector<SweepRow>& rows) {
  std::vector<std::string> task_order;
  for (const SweepRow& r : rows)
    if (std::find(task_order.begin(), task_order.end(), r.task) ==
        task_order.end())
      task_order.push_back(r.task);

  std::vector<TaskTables> tables;
  for (const std::string& task : task_order) {
    TaskTables tt;
    tt.task = task;
    const TaskKind kind = parse_task(task);

    std::vector<long long> budget_order;
    for (const SweepRow& r : rows)
      if (r.task == task && std::find(budget_order.begin(), budget_order.end(),
                                      r.budget) == budget_order.end())
        budget_order.push_back(r.budget);

    std::vector<int> all_dofs;
    for (const SweepRow& r : rows)
      if (r.task == task) all_dofs.push_back(r.dof);
    std::sort(all_dofs.begin(), all_dofs.end());
    all_dofs.erase(std::unique(all_dofs.begin(), all_dofs.end()),
                   all_dofs.end());
    if (all_dofs.size() < 2)
      throw std::runtime_error("report: task \"" + task +
                               "\" has fewer than 2 dof groups");

    for (long long budget : budget_order) {
      std::vector<std::pair<double, double>> points;
      for (int dof : all_dofs) {
        std::vector<double> pcts;
        for (const SweepRow& r : rows)
          if (r.task == task && r.budget == budget && r.dof == dof)
            pcts.push_back(r.pct_improvement);
        if (pcts.empty()) continue;
        Aggregate agg;
        agg.task = kind;
        agg.budget = budget;
        agg.dof = dof;
        agg.n = static_cast<int>(pcts.size());
        agg.median_pct = median_of(pcts);
        double mean = 0.0;
        for (double p : pcts) mean += p;
        agg.mean_pct = mean / double(pcts.size());
        tt.aggregates.push_back(agg);
        points.emplace_back(double(dof), agg.median_pct);
      }
      if (points.size() >= 2) {
        RegressionRow row;
        row.task = kind;
        row.budget = budget;
        row.reg = fit_r_squared(points);
        tt.regressions.push_back(row);
      }
    }
    if (tt.regressions.empty())
      throw std::runtime_error("report: task \"" + task +
                               "\" has no budget with 2 dof groups");
    tables.push_back(std::move(tt));
  }
  return tables;
}

inline std::string regression_csv_string(
    const std::vector<RegressionRow>& rows) {
  std::string out = kRegressionCsvHeader;
  out += '\n';
  for (const RegressionRow& r : rows) {
    out += std::to_string(r.budget);
    out += ',';
    out += format_g9(r.reg.slope);
    out += ',';
    out += format_g9(r.reg.intercept);
    out += ',';
    out += format_g9(r.reg.r_squared);
    out += ',';
    out += std::to_string(r.reg.n_points);
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Figure: one SVG per task, one panel per budget. Rect/line/text primitives
// only; nothing time-dependent, so bytes are stable across reruns.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt_px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string fmt_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

inline void svg_line(std::string& s, double x1, double y1, double x2,
                     double y2, const char* stroke, double width) {
  s += "<line x1=\"" + fmt_px(x1) + "\" y1=\"" + fmt_px(y1) + "\" x2=\"" +
       fmt_px(x2) + "\" y2=\"" + fmt_px(y2) + "\" stroke=\"" + stroke +
       "\" stroke-width=\"" + fmt_px(width) + "\"/>\n";
}

inline void svg_rect(std::string& s, double x, double y, double w, double h,
                     const char* fill) {
  s += "<rect x=\"" + fmt_px(x) + "\" y=\"" + fmt_px(y) + "\" width=\"" +
       fmt_px(w) + "\" height=\"" + fmt_px(h) + "\" fill=\"" + fill +
       "\"/>\n";
}

inline void svg_text(std::string& s, double x, double y,
                     const std::string& text, const char* anchor,
                     int size = 13) {
  s += "<text x=\"" + fmt_px(x) + "\" y=\"" + fmt_px(y) +
       "\" font-family=\"sans-serif\" font-size=\"" + std::to_string(size) +
       "\" fill=\"#222222\" text-anchor=\"" + anchor + "\">" + text +
       "</text>\n";
}

}  // namespace detail

inline std::string figure_svg(const TaskTables& tt) {
  const int width = 640;
  const int panel_h = 400;
  const double ml = 70, mr = 30, mt = 50, mb = 55;
  const int panels = static_cast<int>(tt.regressions.size());
  const int height = panel_h * panels;

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
       std::to_string(width) + "\" height=\"" + std::to_string(height) +
       "\" viewBox=\"0 0 " + std::to_string(width) + " " +
       std::to_string(height) + "\">\n";
  detail::svg_rect(s, 0, 0, width, height, "#ffffff");

  for (int p = 0; p < panels; ++p) {
    const RegressionRow& rr = tt.regressions[p];
    std::vector<const Aggregate*> aggs;
    for (const Aggregate& a : tt.aggregates)
      if (a.budget == rr.budget) aggs.push_back(&a);

    const double top = p * panel_h;
    const double px0 = ml, px1 = width - mr;
    const double py0 = top + mt, py1 = top + panel_h - mb;

    double x_min = aggs.front()->dof, x_max = aggs.front()->dof;
    double y_min = aggs.front()->median_pct, y_max = aggs.front()->median_pct;
    for (const Aggregate* a : aggs) {
      x_min = std::min(x_min, double(a->dof));
      x_max = std::max(x_max, double(a->dof));
      y_min = std::min(y_min, a->median_pct);
      y_max = std::max(y_max, a->median_pct);
    }
    x_min -= 1.0;
    x_max += 1.0;
    double pad = 0.1 * (y_max - y_min);
    if (pad == 0.0) pad = 1.0;
    y_min -= pad;
    y_max += pad;

    auto to_px = [&](double x) {
      return px0 + (x - x_min) / (x_max - x_min) * (px1 - px0);
    };
    auto to_py = [&](double y) {
      return py1 - (y - y_min) / (y_max - y_min) * (py1 - py0);
    };

    detail::svg_text(s, px0,
                     top + 24,
                     "task=" + tt.task + " budget=" +
                         std::to_string(rr.budget) +
                         " median improvement vs dof",
                     "start", 15);

    // Axes.
    detail::svg_line(s, px0, py1, px1, py1, "#444444", 1.2);
    detail::svg_line(s, px0, py0, px0, py1, "#444444", 1.2);
    for (const Aggregate* a : aggs) {
      const double x = to_px(a->dof);
      detail::svg_line(s, x, py1, x, py1 + 5, "#444444", 1.0);
      detail::svg_text(s, x, py1 + 20, std::to_string(a->dof), "middle");
    }
    detail::svg_text(s, (px0 + px1) / 2, py1 + 40, "degrees of freedom",
                     "middle");
    for (int k = 0; k < 5; ++k) {
      const double y = y_min + (y_max - y_min) * k / 4.0;
      const double py = to_py(y);
      detail::svg_line(s, px0 - 5, py, px0, py, "#444444", 1.0);
      detail::svg_text(s, px0 - 9, py + 4, detail::fmt_tick(y), "end", 11);
    }

    // Fitted line, clipped to the panel's y range.
    {
      const double ya = rr.reg.intercept + rr.reg.slope * x_min;
      const double yb = rr.reg.intercept + rr.reg.slope * x_max;
      double t0 = 0.0, t1 = 1.0;
      if (ya != yb) {
        double ta = (y_min - ya) / (yb - ya);
        double tb = (y_max - ya) / (yb - ya);
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(0.0, ta);
        t1 = std::min(1.0, tb);
      } else if (ya < y_min || ya > y_max) {
        t0 = 1.0;
        t1 = 0.0;
      }
      if (t0 < t1) {
        const double xa = x_min + t0 * (x_max - x_min);
        const double xb = x_min + t1 * (x_max - x_min);
        detail::svg_line(s, to_px(xa), to_py(ya + t0 * (yb - ya)), to_px(xb),
                         to_py(ya + t1 * (yb - ya)), "#cc6677", 2.0);
      }
    }

    // Data points as centered squares.
    for (const Aggregate* a : aggs)
      detail::svg_rect(s, to_px(a->dof) - 3.5, to_py(a->median_pct) - 3.5,
                       7.0, 7.0, "#4477aa");

    char note[96];
    std::snprintf(note, sizeof note, "R2=%.3f slope=%.4g n=%d",
                  rr.reg.r_squared, rr.reg.slope, rr.reg.n_points);
    detail::svg_text(s, px1, py0 - 8, note, "end");
  }
  s += "</svg>\n";
  return s;
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

inline std::string platform_string() {
  utsname u{};
  if (uname(&u) == 0) return std::string(u.sysname) + " " + u.machine;
  return "unknown";
}

inline std::string utc_timestamp() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[40];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string hex_digest(std::span<const std::uint8_t> bytes) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

inline Json manifest_file_entry(std::span<const std::uint8_t> bytes) {
  Json e;
  e["bytes"] = bytes.size();
  e["fnv1a64"] = hex_digest(bytes);
  return e;
}

inline Json build_manifest(const SweepResult& sr, std::uint64_t master_seed,
                           const std::map<std::string, std::string>& files,
                           const std::string& started,
                           const std::string& finished) {
  Json m;
  m["tool"] = std::string(kToolName) + " " + kToolVersion;
  m["platform"] = platform_string();
  m["master_seed"] = master_seed;
  m["started_utc"] = started;
  m["finished_utc"] = finished;

  Json files_j = Json::object();
  for (const auto& [name, content] : files)
    files_j[name] = manifest_file_entry(
        std::span(reinterpret_cast<const std::uint8_t*>(content.data()),
                  content.size()));
  m["files"] = files_j;

  double total = 0.0;
  Json cells = Json::array();
  for (const CellResult& r : sr.results) {
    Json c;
    c["preset"] = r.preset_name;
    c["dof"] = r.dof;
    c["budget"] = r.budget;
    c["seed"] = r.seed_index;
    c["task"] = task_name(r.task);
    c["ok"] = r.ok;
    if (!r.ok) c["error"] = r.error;
    c["wall_time_s"] = r.wall_time_s;
    c["divergent_episodes"] = r.divergent_episodes;
    if (r.ok) c["model_val_loss"] = r.model_val_loss;
    cells.push_back(std::move(c));
    total += r.wall_time_s;
  }
  m["cells"] = cells;
  m["total_cell_time_s"] = total;
  return m;
}

// ---------------------------------------------------------------------------
// Report generation
// ---------------------------------------------------------------------------

// Output naming: a single task claims the requested paths; several tasks
// get a _task suffix each so the pinned CSV columns never need a task field.
inline std::string suffixed_path(const std::string& path,
                                 const std::string& task, bool multi) {
  if (!multi) return path;
  const auto dot = path.find_last_of('.');
  const auto slash = path.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return path + "_" + task;
  return path.substr(0, dot) + "_" + task + path.substr(dot);
}

struct ReportOutputs {
  std::vector<std::pair<std::string, std::string>> files;  // path -> content
};

inline ReportOutputs make_report_outputs(const std::vector<SweepRow>& rows,
                                         const std::string& csv_path,
                                         const std::string& svg_path) {
  const std::vector<TaskTables> tables = derive_tables(rows);
  const bool multi = tables.size() > 1;
  ReportOutputs out;
  for (const TaskTables& tt : tables) {
    out.files.emplace_back(suffixed_path(csv_path, tt.task, multi),
                           regression_csv_string(tt.regressions));
    out.files.emplace_back(suffixed_path(svg_path, tt.task, multi),
                           figure_svg(tt));
  }
  return out;
}

// Rebuilds regression CSV + figure from a run directory's sweep.csv. The
// manifest, when present, must agree with the CSV bytes on disk. Nothing is
// written until every output is computed.
inline std::vector<std::string> emit_report(const std::string& run_dir,
                                            const std::string& csv_path,
                                            const std::string& svg_path) {
  namespace fs = std::filesystem;
  const fs::path sweep_path = fs::path(run_dir) / "sweep.csv";
  if (!fs::exists(sweep_path))
    throw std::runtime_error("report: no sweep.csv under " + run_dir);
  const std::vector<std::uint8_t> raw = read_file(sweep_path.string());

  const fs::path manifest_path = fs::path(run_dir) / "manifest.json";
  if (fs::exists(manifest_path)) {
    const std::vector<std::uint8_t> mraw = read_file(manifest_path.string());
    Json m;
    try {
      m = Json::parse(mraw.begin(), mraw.end());
    } catch (const Json::exception& e) {
      throw std::runtime_error(std::string("report: bad manifest: ") +
                               e.what());
    }
    if (m.contains("files") && m["files"].contains("sweep.csv")) {
      const Json& entry = m["files"]["sweep.csv"];
      if (entry["bytes"].get<std::size_t>() != raw.size() ||
          entry["fnv1a64"].get<std::string>() != hex_digest(raw))
        throw std::runtime_error(
            "report: sweep.csv does not match its manifest digest");
    }
  }

  const std::string text(raw.begin(), raw.end());
  ReportOutputs outputs =
      make_report_outputs(parse_sweep_csv(text), csv_path, svg_path);
  std::vector<std::string> written;
  for (const auto& [path, content] : outputs.files) {
    write_file_atomic(path, content);
    written.push_back(path);
  }
  return written;
}

}  // namespace smrl
