#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mot/common.hpp"
#include "mot/inference.hpp"
#include "mot/measure.hpp"
#include "mot/support.hpp"

namespace mot {

using Json = nlohmann::ordered_json;

// Parsed input: measures in file order plus, for the samples format, the
// raw observations resolved to support indices (needed by the
// permutation test).
struct IngestResult {
  std::shared_ptr<const SupportSpace> support;
  std::vector<std::string> group_names;
  std::vector<Measure> measures;
  std::optional<PermutationData> raw;

  MeasureCollection collection() const { return MeasureCollection(measures); }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  for (auto& s : out) {
    const auto b = s.find_first_not_of(" \t");
    const auto e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
  }
  return out;
}

// Canonical decimal parsing: the full token must be a finite decimal.
inline double parse_number(const std::string& tok, const std::string& where) {
  if (tok.empty()) fail(Errc::parse_error, where + ": empty numeric field");
  std::size_t pos = 0;
  double v;
  try {
    v = std::stod(tok, &pos);
  } catch (const std::exception&) {
    fail(Errc::parse_error, where + ": '" + tok + "' is not a number");
  }
  if (pos != tok.size())
    fail(Errc::parse_error, where + ": trailing characters in '" + tok + "'");
  if (!std::isfinite(v)) fail(Errc::parse_error, where + ": non-finite value");
  return v;
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::parse_error, "cannot open '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

inline bool blank(const std::string& s) {
  return s.find_first_not_of(" \t\r") == std::string::npos;
}

}  // namespace detail

// Support file: header x1,...,xd then one point per row.
inline std::shared_ptr<const SupportSpace> read_support_file(const std::string& path) {
  const auto lines = detail::read_lines(path);
  if (lines.empty()) fail(Errc::parse_error, path + ": empty support file");
  const auto header = detail::split_csv_line(lines[0]);
  const std::size_t d = header.size();
  std::vector<Point> pts;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (detail::blank(lines[ln])) continue;
    const auto fields = detail::split_csv_line(lines[ln]);
    const std::string where = path + ":" + std::to_string(ln + 1);
    if (fields.size() != d)
      fail(Errc::parse_error, where + ": expected " + std::to_string(d) + " fields");
    Point p(d);
    for (std::size_t c = 0; c < d; ++c) p[c] = detail::parse_number(fields[c], where);
    pts.push_back(std::move(p));
  }
  if (pts.empty()) fail(Errc::parse_error, path + ": support file has no points");
  return std::make_shared<SupportSpace>(std::move(pts));
}

// Samples file: header group,x1,...,xd, one observation per row. When no
// support is declared, the support is the set of distinct observed rows
// in ascending lexicographic order.
inline IngestResult read_samples_file(const std::string& path,
                                      std::shared_ptr<const SupportSpace> declared = {}) {
  const auto lines = detail::read_lines(path);
  if (lines.empty()) fail(Errc::parse_error, path + ": empty samples file");
  const auto header = detail::split_csv_line(lines[0]);
  if (header.size() < 2 || header[0] != "group")
    fail(Errc::parse_error, path + ":1: header must be group,x1,...,xd");
  const std::size_t d = header.size() - 1;

  std::vector<std::string> group_names;
  std::vector<std::vector<Point>> group_rows;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (detail::blank(lines[ln])) continue;
    const auto fields = detail::split_csv_line(lines[ln]);
    const std::string where = path + ":" + std::to_string(ln + 1);
    if (fields.size() != d + 1)
      fail(Errc::parse_error, where + ": expected " + std::to_string(d + 1) + " fields");
    Point p(d);
    for (std::size_t c = 0; c < d; ++c) p[c] = detail::parse_number(fields[c + 1], where);
    auto it = std::find(group_names.begin(), group_names.end(), fields[0]);
    std::size_t gi;
    if (it == group_names.end()) {
      gi = group_names.size();
      group_names.push_back(fields[0]);
      group_rows.emplace_back();
    } else {
      gi = static_cast<std::size_t>(it - group_names.begin());
    }
    group_rows[gi].push_back(std::move(p));
  }
  if (group_names.empty()) fail(Errc::parse_error, path + ": no observations");

  std::shared_ptr<const SupportSpace> support = declared;
  if (!support) {
    std::vector<Point> uniq;
    for (const auto& rows : group_rows) uniq.insert(uniq.end(), rows.begin(), rows.end());
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    support = std::make_shared<SupportSpace>(std::move(uniq));
  }
  if (support->dim() != d)
    fail(Errc::support_mismatch, path + ": support dimension " +
                                     std::to_string(support->dim()) +
                                     " != sample dimension " + std::to_string(d));

  IngestResult out;
  out.support = support;
  out.group_names = group_names;
  PermutationData raw;
  raw.support = support;
  for (const auto& rows : group_rows) {
    out.measures.push_back(empirical_measure(rows, support));
    std::vector<std::size_t> idx;
    idx.reserve(rows.size());
    for (const auto& p : rows) idx.push_back(support->find(p));
    raw.groups.push_back(std::move(idx));
  }
  out.raw = std::move(raw);
  return out;
}

// Measures file (JSON): {"support": [[...],...],
//                        "groups": [{"name":..., "weights":[...], "n":...}, ...]}.
inline IngestResult read_measures_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::parse_error, "cannot open '" + path + "'");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const std::exception& e) {
    fail(Errc::parse_error, path + ": " + e.what());
  }
  if (!doc.contains("support") || !doc.contains("groups"))
    fail(Errc::parse_error, path + ": needs 'support' and 'groups' fields");

  std::vector<Point> pts;
  for (const auto& p : doc["support"]) {
    Point q;
    for (const auto& c : p) {
      if (!c.is_number()) fail(Errc::parse_error, path + ": support coordinates must be numbers");
      q.push_back(c.get<double>());
    }
    pts.push_back(std::move(q));
  }
  auto support = std::make_shared<SupportSpace>(std::move(pts));

  IngestResult out;
  out.support = support;
  for (const auto& g : doc["groups"]) {
    if (!g.contains("weights")) fail(Errc::parse_error, path + ": group without weights");
    std::vector<double> w = g["weights"].get<std::vector<double>>();
    if (w.size() != support->size())
      fail(Errc::parse_error, path + ": weight vector length != support size");
    double s = 0.0;
    for (double v : w) s += v;
    if (std::abs(s - 1.0) > 1e-9)
      fail(Errc::parse_error,
           path + ": group weights sum to " + std::to_string(s) + ", not 1");
    for (double& v : w) v /= s;  // renormalize the residual 1e-9 round-off
    double r = 0.0;
    for (double v : w) r += v;
    w.back() += 1.0 - r;
    std::optional<std::uint64_t> n;
    if (g.contains("n")) n = g["n"].get<std::uint64_t>();
    out.group_names.push_back(g.value("name", "group" + std::to_string(out.measures.size() + 1)));
    out.measures.emplace_back(support, std::move(w), n);
  }
  if (out.measures.empty()) fail(Errc::parse_error, path + ": no groups");
  return out;
}

// Replicate summary block for result documents: count, moments, and a
// fixed quantile grid.
inline Json replicate_summary(const std::vector<double>& values, std::uint64_t failures) {
  Json j;
  j["count"] = values.size();
  j["failures"] = failures;
  if (!values.empty()) {
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var = values.size() > 1 ? var / static_cast<double>(values.size() - 1) : 0.0;
    j["mean"] = mean;
    j["sd"] = std::sqrt(var);
    Json q;
    for (double p : {0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99})
      q[std::to_string(p)] = empirical_quantile(values, p);
    j["quantiles"] = q;
  }
  return j;
}

}  // namespace mot
