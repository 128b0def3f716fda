#include "glg/report.hpp"

#include "glg/error.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace glg::cli {

using nlohmann::json;

namespace {

// Shortest text that reads back to the same double.
std::string num_text(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + "\"";
}

std::vector<std::string> metric_columns(const std::vector<ReportRow>& rows) {
  std::set<std::string> present;
  for (const auto& r : rows)
    for (const auto& [k, v] : r.metrics) present.insert(k);
  std::vector<std::string> out;
  for (const auto& m : metric_names())
    if (present.erase(m)) out.push_back(m);
  // Thresholded MAE columns follow in name order.
  out.insert(out.end(), present.begin(), present.end());
  return out;
}

void write_file(const std::string& path, const std::string& text) {
  const auto parent = std::filesystem::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty()) std::filesystem::create_directories(parent, ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot write " + path);
  out << text;
  out.close();
  if (!out) fail(ErrorCode::io, "failed writing " + path);
}

json summary_json(const MetricSummary& s) {
  return {{"count", s.count}, {"mean", s.mean}, {"std", s.std}, {"min", s.min}, {"max", s.max}};
}

}  // namespace

std::vector<std::string> csv_columns(const std::vector<ReportRow>& rows) {
  std::vector<std::string> cols = {"scenario", "framework", "dataset", "param",
                                   "value",    "repeats",   "failures"};
  for (const auto& m : metric_columns(rows))
    for (const char* stat : {"_mean", "_std", "_min"}) cols.push_back(m + stat);
  for (const auto& h : hyper_names()) cols.push_back(h);
  bool timed = false;
  for (const auto& r : rows) timed |= r.wall_seconds.has_value();
  if (timed) cols.push_back("wall_seconds");
  return cols;
}

std::string format_csv(const std::vector<ReportRow>& rows) {
  const auto cols = csv_columns(rows);
  const auto metrics = metric_columns(rows);
  std::ostringstream out;
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& r : rows) {
    std::vector<std::string> f = {r.scenario, r.framework, r.dataset, r.param, r.value,
                                  std::to_string(r.repeats), std::to_string(r.failures)};
    for (const auto& m : metrics) {
      auto it = r.metrics.find(m);
      if (it == r.metrics.end() || it->second.count == 0) {
        f.insert(f.end(), 3, "");
      } else {
        f.push_back(num_text(it->second.mean));
        f.push_back(num_text(it->second.std));
        f.push_back(num_text(it->second.min));
      }
    }
    for (const auto& h : hyper_names()) {
      auto it = r.hyper.find(h);
      f.push_back(it == r.hyper.end() ? "" : it->second);
    }
    if (cols.back() == "wall_seconds") f.push_back(r.wall_seconds ? num_text(*r.wall_seconds) : "");
    for (std::size_t i = 0; i < f.size(); ++i) out << (i ? "," : "") << csv_field(f[i]);
    out << '\n';
  }
  return out.str();
}

json report_json(const ExperimentConfig& config, const std::vector<ReportRow>& rows) {
  json jr = json::array();
  for (const auto& r : rows) {
    json m = json::object();
    for (const auto& [k, v] : r.metrics) m[k] = summary_json(v);
    json runs = json::array();
    for (const auto& rec : r.runs) {
      json jrec = {{"repetition", rec.repetition}, {"seed", rec.seed}, {"ok", rec.ok},
                   {"error", rec.error},           {"metrics", rec.metrics}};
      if (r.wall_seconds) jrec["wall_seconds"] = rec.wall_seconds;
      runs.push_back(jrec);
    }
    json row = {{"scenario", r.scenario}, {"framework", r.framework}, {"dataset", r.dataset},
                {"param", r.param},       {"value", r.value},         {"repeats", r.repeats},
                {"failures", r.failures}, {"metrics", m},             {"hyper", r.hyper},
                {"runs", runs}};
    if (r.wall_seconds) row["wall_seconds"] = *r.wall_seconds;
    jr.push_back(row);
  }
  return {{"config", config.to_json()}, {"rows", jr}};
}

std::vector<ReportRow> rows_from_json(const json& doc) {
  std::vector<ReportRow> rows;
  try {
    for (const auto& j : doc.at("rows")) {
      ReportRow r;
      r.scenario = j.at("scenario").get<std::string>();
      r.framework = j.at("framework").get<std::string>();
      r.dataset = j.at("dataset").get<std::string>();
      r.param = j.at("param").get<std::string>();
      r.value = j.at("value").get<std::string>();
      r.repeats = j.at("repeats").get<int>();
      r.failures = j.at("failures").get<int>();
      for (const auto& [k, v] : j.at("metrics").items())
        r.metrics[k] = {v.at("count").get<int>(), v.at("mean").get<double>(), v.at("std").get<double>(),
                        v.at("min").get<double>(), v.at("max").get<double>()};
      r.hyper = j.at("hyper").get<std::map<std::string, std::string>>();
      if (j.contains("wall_seconds")) r.wall_seconds = j.at("wall_seconds").get<double>();
      for (const auto& jrec : j.at("runs")) {
        RunRecord rec;
        rec.repetition = jrec.at("repetition").get<int>();
        rec.seed = jrec.at("seed").get<std::uint64_t>();
        rec.ok = jrec.at("ok").get<bool>();
        rec.error = jrec.at("error").get<std::string>();
        rec.metrics = jrec.at("metrics").get<std::map<std::string, double>>();
        if (jrec.contains("wall_seconds")) rec.wall_seconds = jrec.at("wall_seconds").get<double>();
        r.runs.push_back(std::move(rec));
      }
      rows.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::validation, std::string("report: ") + e.what());
  }
  return rows;
}

std::string emit_report(const ExperimentConfig& config, const std::vector<ReportRow>& rows,
                        const std::string& format, const std::string& dir) {
  require(format == "csv" || format == "json", "report format must be csv or json, got '" + format + "'");
  const std::string path = (std::filesystem::path(dir) / ("report." + format)).string();
  if (format == "csv")
    write_file(path, format_csv(rows));
  else
    write_file(path, report_json(config, rows).dump(2) + "\n");
  return path;
}

std::vector<ReportRow> load_report_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::validation, path + ": " + e.what());
  }
  return rows_from_json(doc);
}

void write_matrix_csv(const num::Matrix& m, const std::string& path) {
  std::string text;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) text += ',';
      text += num_text(m(i, j));
    }
    text += '\n';
  }
  write_file(path, text);
}

num::Matrix read_matrix_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        fail(ErrorCode::validation, path + ":" + std::to_string(rows.size() + 1) + ": bad number '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows[0].size())
      fail(ErrorCode::validation, path + ":" + std::to_string(rows.size() + 1) + ": ragged row");
    rows.push_back(std::move(row));
  }
  num::Matrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

}  // namespace glg::cli
