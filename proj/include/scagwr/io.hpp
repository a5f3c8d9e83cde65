#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_map>
#include <vector>

#include "scagwr/dataset.hpp"
#include "scagwr/error.hpp"
#include "scagwr/geometry.hpp"

namespace scagwr {

/// Shortest-roundtrip is not enough for stable diffs across toolchains, so
/// every double is written with 17 significant digits.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline bool parse_double(std::string_view s, double& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

namespace detail {

inline std::string trim_field(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline bool blank(std::string_view line) {
  return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

}  // namespace detail

struct ColumnMapping {
  std::string coord_x = "coord_x";
  std::string coord_y = "coord_y";
  std::string response = "y";
  /// Empty: every remaining column except `id_column`.
  std::vector<std::string> covariates;
  std::string id_column = "site_id";
};

struct IngestResult {
  Dataset data;
  std::vector<std::string> covariate_names;
  /// Site identifiers as written in the id column, or 1-based row numbers.
  std::vector<std::string> site_ids;
  std::string mapping_summary;
};

/// Reads a comma-separated file with a header row into a Dataset with an
/// intercept prepended. Rows with missing or nonfinite fields are rejected,
/// reporting their line numbers.
inline IngestResult read_dataset_csv(std::istream& in, const ColumnMapping& map = {}) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (!detail::blank(line)) break;
  }
  if (detail::blank(line)) throw ValidationError("input has no header row");

  std::vector<std::string> header;
  std::unordered_map<std::string, std::size_t> index;
  for (auto f : detail::split_commas(line)) {
    std::string name = detail::trim_field(f);
    if (index.count(name)) throw ValidationError("duplicate column name '" + name + "'");
    index.emplace(name, header.size());
    header.push_back(std::move(name));
  }
  auto require = [&](const std::string& name, const char* role) {
    auto it = index.find(name);
    if (it == index.end()) {
      throw ValidationError(std::string("missing required ") + role + " column '" + name + "'");
    }
    return it->second;
  };
  const std::size_t cx = require(map.coord_x, "coordinate");
  const std::size_t cy = require(map.coord_y, "coordinate");
  const std::size_t cr = require(map.response, "response");
  const auto id_it = index.find(map.id_column);
  const bool has_id = !map.id_column.empty() && id_it != index.end();

  std::vector<std::size_t> cov_cols;
  std::vector<std::string> cov_names;
  if (map.covariates.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == cx || c == cy || c == cr || (has_id && c == id_it->second)) continue;
      cov_cols.push_back(c);
      cov_names.push_back(header[c]);
    }
  } else {
    for (const auto& name : map.covariates) {
      cov_cols.push_back(require(name, "covariate"));
      cov_names.push_back(name);
    }
  }
  if (cov_cols.empty()) throw ValidationError("missing required covariate column: at least one is needed");

  std::vector<double> xs, ys, resp, cov;
  std::vector<std::string> ids;
  std::vector<std::size_t> bad_lines;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::blank(line)) continue;
    auto fields = detail::split_commas(line);
    if (fields.size() != header.size()) {
      bad_lines.push_back(line_no);
      continue;
    }
    double vx, vy, vr;
    bool ok = parse_double(fields[cx], vx) && parse_double(fields[cy], vy) && parse_double(fields[cr], vr) &&
              std::isfinite(vx) && std::isfinite(vy) && std::isfinite(vr);
    std::vector<double> row(cov_cols.size());
    for (std::size_t c = 0; ok && c < cov_cols.size(); ++c) {
      ok = parse_double(fields[cov_cols[c]], row[c]) && std::isfinite(row[c]);
    }
    if (!ok) {
      bad_lines.push_back(line_no);
      continue;
    }
    xs.push_back(vx);
    ys.push_back(vy);
    resp.push_back(vr);
    cov.insert(cov.end(), row.begin(), row.end());
    ids.push_back(has_id ? detail::trim_field(fields[id_it->second]) : std::to_string(resp.size()));
  }
  if (!bad_lines.empty()) {
    std::ostringstream msg;
    msg << "rejected " << bad_lines.size() << " row(s) with missing or nonfinite fields at line(s) ";
    for (std::size_t k = 0; k < bad_lines.size() && k < 20; ++k) msg << (k ? ", " : "") << bad_lines[k];
    if (bad_lines.size() > 20) msg << ", ...";
    throw ValidationError(msg.str());
  }
  if (resp.empty()) throw ValidationError("input has zero usable rows");

  const auto n = static_cast<Eigen::Index>(resp.size());
  const auto k = static_cast<Eigen::Index>(cov_cols.size());
  Coords coords(n, 2);
  Eigen::VectorXd y(n);
  Eigen::MatrixXd covariates(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    coords(i, 0) = xs[static_cast<std::size_t>(i)];
    coords(i, 1) = ys[static_cast<std::size_t>(i)];
    y(i) = resp[static_cast<std::size_t>(i)];
    for (Eigen::Index c = 0; c < k; ++c) covariates(i, c) = cov[static_cast<std::size_t>(i * k + c)];
  }

  std::ostringstream summary;
  summary << n << " rows; coordinates (" << map.coord_x << ", " << map.coord_y << "); response " << map.response
          << "; covariates intercept";
  for (const auto& c : cov_names) summary << ", " << c;

  IngestResult out{Dataset::with_intercept(std::move(y), covariates, SiteSet(std::move(coords))),
                   std::move(cov_names), std::move(ids), summary.str()};
  return out;
}

inline IngestResult read_dataset_csv(const std::string& path, const ColumnMapping& map = {}) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read input file '" + path + "'");
  return read_dataset_csv(in, map);
}

/// Writes site_id, coord_x, coord_y, y and the non-intercept covariates.
inline void write_dataset_csv(std::ostream& out, const Dataset& data, const std::vector<std::string>& names = {}) {
  const auto k = static_cast<Eigen::Index>(data.covariates()) - 1;
  out << "site_id,coord_x,coord_y,y";
  for (Eigen::Index c = 0; c < k; ++c) {
    out << ',' << (static_cast<std::size_t>(c) < names.size() ? names[static_cast<std::size_t>(c)]
                                                             : "x" + std::to_string(c + 1));
  }
  out << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    out << (i + 1) << ',' << format_double(data.sites().x(i)) << ',' << format_double(data.sites().y(i)) << ','
        << format_double(data.y()(ii));
    for (Eigen::Index c = 1; c <= k; ++c) out << ',' << format_double(data.x()(ii, c));
    out << '\n';
  }
}

inline void write_dataset_csv(const std::string& path, const Dataset& data,
                              const std::vector<std::string>& names = {}) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  write_dataset_csv(out, data, names);
}

}  // namespace scagwr
