// Copyright 2026 The GCE Authors
// SPDX-License-Identifier: Apache-2.0

// Profiler metric import: a three-column CSV (kernel, counter, value) is read
// into rows and folded into a KernelProfile by counter name.

#pragma once

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "gce/error.hpp"
#include "gce/gpu_model.hpp"

namespace gce {

struct MetricRow {
  std::string kernel_name;
  std::string metric_name;
  double metric_value = 0.0;

  friend bool operator==(const MetricRow&, const MetricRow&) = default;
};

inline constexpr std::string_view kMetricsCsvHeader = "kernel_name,metric_name,metric_value";

namespace metrics {
inline constexpr std::string_view kIpc = "sm__inst_issued.avg.per_cycle_active";
inline constexpr std::string_view kPipePrefix = "sm__inst_executed_pipe_";
inline constexpr std::string_view kPipeSuffix = ".avg.pct_of_peak_sustained_active";
inline constexpr std::string_view kL1Hit = "l1tex__t_sector_hit_rate.pct";
inline constexpr std::string_view kL2Hit = "lts__t_sector_hit_rate.pct";
inline constexpr std::string_view kOccupancy = "sm__warps_active.avg.pct_of_peak_sustained_active";
inline constexpr std::string_view kCyclesAvg = "sm__cycles_active.avg";
inline constexpr std::string_view kCyclesMin = "sm__cycles_active.min";
inline constexpr std::string_view kCyclesMax = "sm__cycles_active.max";
// Relative to the theoretical peak; see the warning emitted on import.
inline constexpr std::string_view kDramThroughput = "dram__throughput.avg.pct_of_peak_sustained_elapsed";
}  // namespace metrics

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw ValidationError("unterminated quote at row " + std::to_string(line_no));
  fields.push_back(std::move(cur));
  return fields;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_decimal(std::string_view s) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::string quote_csv(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace detail

/// Reads `kernel_name,metric_name,metric_value` rows in file order. Decimals
/// use '.' regardless of locale. Row numbers in errors count data rows from 1.
inline std::vector<MetricRow> parse_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty metrics file");
  std::string_view header = detail::trim(line);
  if (header.substr(0, 3) == "\xEF\xBB\xBF") header.remove_prefix(3);
  if (header != kMetricsCsvHeader) {
    throw ValidationError("malformed header: expected '" + std::string(kMetricsCsvHeader) + "'");
  }
  std::vector<MetricRow> rows;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    ++row_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto fields = detail::split_csv_line(line, row_no);
    if (fields.size() != 3) {
      throw ValidationError("row " + std::to_string(row_no) + ": expected 3 fields, got " +
                            std::to_string(fields.size()));
    }
    if (fields[1].empty()) throw ValidationError("row " + std::to_string(row_no) + ": empty metric_name");
    auto value = detail::parse_decimal(fields[2]);
    if (!value) {
      throw ValidationError("row " + std::to_string(row_no) + ": non-numeric metric_value '" + fields[2] + "'");
    }
    rows.push_back({std::move(fields[0]), std::move(fields[1]), *value});
  }
  return rows;
}

/// Writes rows with shortest round-trip decimal formatting.
inline void write_metrics_csv(std::ostream& out, const std::vector<MetricRow>& rows) {
  out << kMetricsCsvHeader << '\n';
  for (const auto& r : rows) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, r.metric_value);
    out << detail::quote_csv(r.kernel_name) << ',' << detail::quote_csv(r.metric_name) << ','
        << std::string_view(buf, static_cast<std::size_t>(ptr - buf)) << '\n';
  }
}

/// Launch-time facts that profiler counters do not carry.
struct LaunchConfig {
  std::int64_t grid_blocks = 1;
  std::int64_t threads_per_block = kWarpSize;
  std::int64_t registers_per_thread = 0;
  std::int64_t shared_mem_per_block = 0;
  double duration = 1.0;
  std::int64_t working_set = 0;
  RooflineBound roofline_bound = RooflineBound::kUnknown;
};

struct ProfileImport {
  KernelProfile profile;
  std::vector<std::string> warnings;
};

/// Folds one kernel's metric rows into a profile. Only the IPC counter is
/// mandatory; other known counters default to 0 with a warning, unknown
/// counters are ignored with a warning.
inline ProfileImport build_profile(const std::vector<MetricRow>& rows, const LaunchConfig& launch) {
  ProfileImport out;
  KernelProfile& p = out.profile;
  p.grid_blocks = launch.grid_blocks;
  p.threads_per_block = launch.threads_per_block;
  p.registers_per_thread = launch.registers_per_thread;
  p.shared_mem_per_block = launch.shared_mem_per_block;
  p.duration_alone = launch.duration;
  p.working_set = launch.working_set;
  p.roofline_bound = launch.roofline_bound;

  std::map<std::string, double> seen;
  for (const auto& r : rows) {
    if (p.name.empty()) p.name = r.kernel_name;
    if (r.kernel_name != p.name) {
      throw ValidationError("rows mix kernels '" + p.name + "' and '" + r.kernel_name + "'");
    }
    auto [it, inserted] = seen.emplace(r.metric_name, r.metric_value);
    if (!inserted && it->second != r.metric_value) {
      throw ValidationError("conflicting values for metric '" + r.metric_name + "'");
    }
  }

  auto take = [&](std::string_view metric, double& field, bool mandatory = false) {
    auto it = seen.find(std::string(metric));
    if (it == seen.end()) {
      if (mandatory) throw ValidationError("missing mandatory metric '" + std::string(metric) + "'");
      out.warnings.push_back("missing metric '" + std::string(metric) + "', defaulting to 0");
      field = 0.0;
      return;
    }
    field = it->second;
    seen.erase(it);
  };
  take(metrics::kIpc, p.ipc, true);
  take(metrics::kL1Hit, p.l1_hit_rate);
  take(metrics::kL2Hit, p.l2_hit_rate);
  take(metrics::kOccupancy, p.achieved_occupancy);
  take(metrics::kCyclesAvg, p.cycles_active_avg);
  take(metrics::kCyclesMin, p.cycles_active_min);
  take(metrics::kCyclesMax, p.cycles_active_max);
  if (seen.count(std::string(metrics::kDramThroughput)) != 0) {
    take(metrics::kDramThroughput, p.membw_util);
    out.warnings.push_back(
        "membw_util taken from a theoretical-peak DRAM counter; it may underestimate use relative to achieved peak");
  } else {
    out.warnings.push_back("missing metric '" + std::string(metrics::kDramThroughput) + "', defaulting to 0");
  }

  for (auto it = seen.begin(); it != seen.end();) {
    std::string_view m = it->first;
    if (m.starts_with(metrics::kPipePrefix) && m.ends_with(metrics::kPipeSuffix) &&
        m.size() > metrics::kPipePrefix.size() + metrics::kPipeSuffix.size()) {
      std::string pipe(m.substr(metrics::kPipePrefix.size(),
                                m.size() - metrics::kPipePrefix.size() - metrics::kPipeSuffix.size()));
      for (auto& c : pipe) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      p.pipe_util[pipe] = it->second;
      it = seen.erase(it);
    } else {
      ++it;
    }
  }
  for (const auto& [metric, value] : seen) out.warnings.push_back("ignored unrecognized metric '" + metric + "'");
  return out;
}

}  // namespace gce
