#include "glg/error.hpp"
#include "glg/graph.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

namespace glg::graph {

namespace {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

bool blank(const std::string& s) { return s.find_first_not_of(" \t") == std::string::npos; }

[[noreturn]] void malformed(const std::string& path, std::size_t line, const std::string& why) {
  fail(ErrorCode::validation, path + ":" + std::to_string(line) + ": " + why);
}

std::vector<std::string> split_fields(const std::string& s, bool allow_whitespace) {
  std::vector<std::string> out;
  std::string cur;
  bool have = false;
  auto flush = [&] {
    if (have) out.push_back(cur);
    cur.clear();
    have = false;
  };
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
      have = false;
    } else if (c == ' ' || c == '\t') {
      if (allow_whitespace) flush();
    } else {
      cur.push_back(c);
      have = true;
    }
  }
  if (have || (!s.empty() && s.back() == ',')) out.push_back(cur);
  return out;
}

template <class T>
bool parse_number(const std::string& text, T& value) {
  const char* first = text.data();
  const char* last = first + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  return ec == std::errc() && ptr == last;
}

}  // namespace

Graph load_graph(const GraphFiles& files) {
  Graph g;

  std::vector<std::vector<double>> rows;
  const auto feature_lines = read_lines(files.features);
  for (std::size_t ln = 0; ln < feature_lines.size(); ++ln) {
    if (blank(feature_lines[ln])) continue;
    std::vector<double> row;
    for (const auto& field : split_fields(feature_lines[ln], false)) {
      const auto b = field.find_first_not_of(" \t");
      const auto e = field.find_last_not_of(" \t");
      double v = 0.0;
      if (b == std::string::npos || !parse_number(field.substr(b, e - b + 1), v))
        malformed(files.features, ln + 1, "expected a number, got '" + field + "'");
      row.push_back(v);
    }
    if (!rows.empty() && row.size() != rows.front().size())
      malformed(files.features, ln + 1, "inconsistent column count");
    rows.push_back(std::move(row));
  }
  const int n = static_cast<int>(rows.size());
  const int dim = n > 0 ? static_cast<int>(rows.front().size()) : 0;
  g.features = Matrix(n, dim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j) g.features(i, j) = rows[i][j];

  g.adjacency = Matrix::Zero(n, n);
  const auto edge_lines = read_lines(files.edges);
  for (std::size_t ln = 0; ln < edge_lines.size(); ++ln) {
    if (blank(edge_lines[ln])) continue;
    const auto fields = split_fields(edge_lines[ln], true);
    long u = -1, v = -1;
    if (fields.size() != 2 || !parse_number(fields[0], u) || !parse_number(fields[1], v))
      malformed(files.edges, ln + 1, "expected a pair of node indices");
    if (u < 0 || v < 0 || u >= n || v >= n)
      malformed(files.edges, ln + 1, "node index out of range [0, " + std::to_string(n) + ")");
    if (u == v) malformed(files.edges, ln + 1, "self-loops are not allowed");
    g.adjacency(u, v) = g.adjacency(v, u) = 1.0;
  }

  if (!files.labels.empty()) {
    std::vector<int> labels;
    const auto label_lines = read_lines(files.labels);
    for (std::size_t ln = 0; ln < label_lines.size(); ++ln) {
      if (blank(label_lines[ln])) continue;
      const auto fields = split_fields(label_lines[ln], true);
      int y = -1;
      if (fields.size() != 1 || !parse_number(fields[0], y) || y < 0)
        malformed(files.labels, ln + 1, "expected one non-negative integer label");
      labels.push_back(y);
    }
    if (static_cast<int>(labels.size()) != n) {
      fail(ErrorCode::validation, files.labels + ": " + std::to_string(labels.size()) +
                                      " labels for " + std::to_string(n) + " feature rows");
    }
    g.labels = std::move(labels);
  }
  g.validate();
  return g;
}

void write_graph(const Graph& g, const GraphFiles& files) {
  auto open = [](const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) fail(ErrorCode::io, "cannot write " + path);
    return f;
  };
  std::FILE* f = open(files.features);
  for (int i = 0; i < g.num_nodes(); ++i) {
    for (int j = 0; j < g.feature_dim(); ++j)
      std::fprintf(f, j == 0 ? "%.17g" : ",%.17g", g.features(i, j));
    std::fputc('\n', f);
  }
  std::fclose(f);

  f = open(files.edges);
  for (int i = 0; i < g.num_nodes(); ++i)
    for (int j = i + 1; j < g.num_nodes(); ++j)
      if (g.adjacency(i, j) != 0.0) std::fprintf(f, "%d %d\n", i, j);
  std::fclose(f);

  if (!files.labels.empty() && g.labels) {
    f = open(files.labels);
    for (int y : *g.labels) std::fprintf(f, "%d\n", y);
    std::fclose(f);
  }
}

}  // namespace glg::graph
