#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rfo/analysis.hpp"
#include "rfo/experiments.hpp"

namespace rfo {

// ============================================================================
// Serialization: canonical JSON, config hashing, CSV tables
// ============================================================================

// Insertion-ordered documents so a parse -> dump cycle preserves layout.
using Json = nlohmann::ordered_json;

// Every float is written with 17 significant digits: enough for strtod to
// return the exact same bits, so replayed artifacts compare byte-for-byte.
[[nodiscard]] inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0.0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

namespace detail {

inline void escape_json_string(std::string_view s, std::string& out) {
  out += '"';
  for (const char ch : s) {
    switch (ch) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\b': out += "\\b"; break;
      case '\f': out += "\\f"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(ch) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", ch);
          out += buf;
        } else {
          out += ch;
        }
    }
  }
  out += '"';
}

// indent < 0 emits the compact canonical form (the hash input); indent > 0
// pretty-prints with that many spaces per level. Both spell numbers the same
// way, so a pretty file re-parses to the same document as its compact hash.
inline void dump_json(const Json& j, std::string& out, int indent, int depth) {
  const auto newline = [&](int d) {
    if (indent < 0) return;
    out += '\n';
    out.append(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (j.type()) {
    case Json::value_t::null: out += "null"; break;
    case Json::value_t::boolean: out += j.get<bool>() ? "true" : "false"; break;
    case Json::value_t::number_integer: out += std::to_string(j.get<std::int64_t>()); break;
    case Json::value_t::number_unsigned: out += std::to_string(j.get<std::uint64_t>()); break;
    case Json::value_t::number_float: {
      const double x = j.get<double>();
      // Bare inf/nan are not JSON; non-finite values travel as strings.
      if (std::isfinite(x)) {
        out += format_double(x);
      } else {
        escape_json_string(format_double(x), out);
      }
      break;
    }
    case Json::value_t::string: escape_json_string(j.get_ref<const std::string&>(), out); break;
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        break;
      }
      out += '[';
      bool first = true;
      for (const Json& item : j) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        dump_json(item, out, indent, depth + 1);
      }
      newline(depth);
      out += ']';
      break;
    }
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        break;
      }
      out += '{';
      bool first = true;
      for (const auto& [key, value] : j.items()) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        escape_json_string(key, out);
        out += indent < 0 ? ":" : ": ";
        dump_json(value, out, indent, depth + 1);
      }
      newline(depth);
      out += '}';
      break;
    }
    default:
      throw InvalidArgument("dump_json: unsupported value type");
  }
}

}  // namespace detail

// Compact canonical form; identical documents dump to identical bytes.
[[nodiscard]] inline std::string canonical_dump(const Json& j) {
  std::string out;
  detail::dump_json(j, out, -1, 0);
  return out;
}

// Human-facing form for files on disk; same number spelling as the canonical
// dump, so re-parsing recovers the exact document.
[[nodiscard]] inline std::string pretty_dump(const Json& j) {
  std::string out;
  detail::dump_json(j, out, 2, 0);
  out += '\n';
  return out;
}

[[nodiscard]] inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (const char ch : bytes) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ull;
  }
  return h;
}

[[nodiscard]] inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Identity of a config document: hash of its canonical dump. Any emitted copy
// of the document reconstructs this value when re-parsed and re-hashed.
[[nodiscard]] inline std::string json_hash(const Json& j) { return hash_hex(fnv1a64(canonical_dump(j))); }

// ----------------------------------------------------------------------------
// JSON helpers for vectors and matrices (row-major nested arrays)
// ----------------------------------------------------------------------------

[[nodiscard]] inline Json json_vector(const Vector& v) {
  Json arr = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

[[nodiscard]] inline Json json_matrix(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

// ----------------------------------------------------------------------------
// CSV tables. Every writer returns the full file content so byte-identity is
// testable without touching the filesystem; numbers use format_double.
// ----------------------------------------------------------------------------

namespace detail {

inline void csv_cell(std::string& out, double x) { out += format_double(x); }

}  // namespace detail

// One row per logged step: k, the inputs, the measurements, then the tracking
// metrics. Requires tracking_metrics to have run on the log.
[[nodiscard]] inline std::string trajectory_csv(const TrajectoryLog& log, std::string_view scenario_hash) {
  detail::require(log.has_metrics, "trajectory_csv: call tracking_metrics first");
  const Eigen::Index m = log.steps > 0 ? log.u.front().size() : 0;
  const Eigen::Index p = log.steps > 0 ? log.y.front().size() : 0;

  std::string out = "# scenario=";
  out += scenario_hash;
  out += '\n';
  out += 'k';
  for (Eigen::Index i = 0; i < m; ++i) out += ",u" + std::to_string(i);
  for (Eigen::Index i = 0; i < p; ++i) out += ",y" + std::to_string(i);
  out += ",gap,err_u,err_x_P\n";

  for (long k = 0; k < log.steps; ++k) {
    const auto idx = static_cast<std::size_t>(k);
    out += std::to_string(k);
    for (Eigen::Index i = 0; i < m; ++i) {
      out += ',';
      detail::csv_cell(out, log.u[idx](i));
    }
    for (Eigen::Index i = 0; i < p; ++i) {
      out += ',';
      detail::csv_cell(out, log.y[idx](i));
    }
    out += ',';
    detail::csv_cell(out, log.gap[idx]);
    out += ',';
    detail::csv_cell(out, log.err_u[idx]);
    out += ',';
    detail::csv_cell(out, log.err_x_p[idx]);
    out += '\n';
  }
  return out;
}

[[nodiscard]] inline std::string sigma_csv(const std::vector<SigmaCell>& table, std::string_view config_hash) {
  std::string out = "# config=";
  out += config_hash;
  out += "\nsigma,seed,final_gap,mean_gap,diverged\n";
  for (const SigmaCell& cell : table) {
    detail::csv_cell(out, cell.sigma);
    out += ',';
    out += std::to_string(cell.seed);
    out += ',';
    detail::csv_cell(out, cell.final_gap);
    out += ',';
    detail::csv_cell(out, cell.mean_gap);
    out += ',';
    out += cell.diverged ? '1' : '0';
    out += '\n';
  }
  return out;
}

[[nodiscard]] inline std::string dim_csv(const std::vector<DimCell>& table, std::string_view config_hash) {
  std::string out = "# config=";
  out += config_hash;
  out += "\nm,seed,final_gap,diverged\n";
  for (const DimCell& cell : table) {
    out += std::to_string(cell.dim);
    out += ',';
    out += std::to_string(cell.seed);
    out += ',';
    detail::csv_cell(out, cell.final_gap);
    out += ',';
    out += cell.diverged ? '1' : '0';
    out += '\n';
  }
  return out;
}

[[nodiscard]] inline std::string bound_csv(const BoundReport& report, std::string_view config_hash) {
  std::string out = "# config=";
  out += config_hash;
  out += "\nk,lhs,rhs,margin\n";
  for (std::size_t k = 0; k < report.lhs.size(); ++k) {
    out += std::to_string(k);
    out += ',';
    detail::csv_cell(out, report.lhs[k]);
    out += ',';
    detail::csv_cell(out, report.rhs[k]);
    out += ',';
    detail::csv_cell(out, report.margin[k]);
    out += '\n';
  }
  return out;
}

// Long-format per-step wire state for the three grid runs: instantaneous
// voltage extremes (true sensitivity times the input, plus the wire offset)
// and the input aggregates the summaries integrate.
[[nodiscard]] inline std::string grid_csv(const GridCaseResult& result, std::string_view config_hash) {
  const long n_pv = result.h_post.rows();
  std::string out = "# config=";
  out += config_hash;
  out += "\ncontroller,k,v_min,v_max,curtailment,reactive,zero_q\n";
  for (std::size_t c = 0; c < result.logs.size(); ++c) {
    const TrajectoryLog& log = result.logs[c];
    for (long k = 0; k < log.steps; ++k) {
      const auto idx = static_cast<std::size_t>(k);
      const Vector v = result.h_post * log.u[idx] + log.d[idx];
      const Vector& u = log.u[idx];
      long zero_q = 0;
      double reactive = 0.0;
      for (long i = 0; i < n_pv; ++i) {
        const double q = u(n_pv + i);
        reactive += std::abs(q);
        if (std::abs(q) < 1e-10) ++zero_q;
      }
      out += result.summaries[c].name;
      out += ',';
      out += std::to_string(k);
      out += ',';
      detail::csv_cell(out, v.minCoeff());
      out += ',';
      detail::csv_cell(out, v.maxCoeff());
      out += ',';
      detail::csv_cell(out, -u.head(n_pv).sum());
      out += ',';
      detail::csv_cell(out, reactive);
      out += ',';
      out += std::to_string(zero_q);
      out += '\n';
    }
  }
  return out;
}

// ----------------------------------------------------------------------------
// File round-trips
// ----------------------------------------------------------------------------

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("write_file: cannot open " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw InvalidArgument("write_file: short write to " + path);
}

[[nodiscard]] inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("read_file: cannot open " + path);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return content;
}

// Minimal reader for the tables above: `# key=value` comment lines, one
// header row, then numeric rows (strtod accepts the inf/nan spellings).
struct CsvTable {
  std::vector<std::string> comments;
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

[[nodiscard]] inline CsvTable parse_csv(std::string_view content) {
  CsvTable table;
  std::size_t pos = 0;
  const auto next_line = [&](std::string_view& line) {
    if (pos >= content.size()) return false;
    const std::size_t end = content.find('\n', pos);
    line = content.substr(pos, end == std::string_view::npos ? end : end - pos);
    pos = end == std::string_view::npos ? content.size() : end + 1;
    return true;
  };
  std::string_view line;
  while (next_line(line)) {
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::size_t start = 1;
      while (start < line.size() && line[start] == ' ') ++start;
      table.comments.emplace_back(line.substr(start));
      continue;
    }
    std::vector<std::string> cells;
    std::size_t cell_start = 0;
    while (true) {
      const std::size_t comma = line.find(',', cell_start);
      cells.emplace_back(line.substr(cell_start, comma == std::string_view::npos ? comma : comma - cell_start));
      if (comma == std::string_view::npos) break;
      cell_start = comma + 1;
    }
    if (table.header.empty()) {
      table.header = std::move(cells);
      continue;
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const std::string& cell : cells) {
      char* end = nullptr;
      const double value = std::strtod(cell.c_str(), &end);
      detail::require(end != cell.c_str() && *end == '\0', "parse_csv: non-numeric cell '" + cell + "'");
      row.push_back(value);
    }
    detail::require(row.size() == table.header.size(), "parse_csv: row width does not match the header");
    table.rows.push_back(std::move(row));
  }
  detail::require(!table.header.empty(), "parse_csv: missing header row");
  return table;
}

}  // namespace rfo
