// Copyright 2026 The GCE Authors
// SPDX-License-Identifier: Apache-2.0

// Capacity model of one GPU and the per-kernel descriptors every other part
// of the estimator consumes. All types are plain immutable values.

#pragma once

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gce/error.hpp"

namespace gce {

inline constexpr std::int64_t kWarpSize = 32;
inline constexpr std::int64_t kMaxThreadsPerBlock = 1024;
inline constexpr std::int64_t KiB = 1024;
inline constexpr std::int64_t MiB = 1024 * KiB;
inline constexpr std::int64_t GiB = 1024 * MiB;

struct Pipeline {
  std::string name;
  double peak_util = 100.0;

  friend bool operator==(const Pipeline&, const Pipeline&) = default;
};

/// Capacities of one GPU model. Per-SM limits drive the block scheduler,
/// `max_ipc_per_sm` is the warp-issue ceiling (one issue per subpartition
/// scheduler per cycle).
struct GpuSpec {
  std::string name;
  std::int64_t num_sms = 0;
  std::int64_t subpartitions_per_sm = 0;
  std::int64_t max_threads_per_sm = 0;
  std::int64_t max_blocks_per_sm = 0;
  std::int64_t registers_per_sm = 0;
  std::int64_t shared_mem_per_sm = 0;
  double max_ipc_per_sm = 0.0;
  std::vector<Pipeline> pipelines;
  std::int64_t l1_size = 0;
  std::int64_t l2_size = 0;
  double peak_mem_bandwidth_util = 100.0;
  double mem_to_l2_latency_ratio = 1.0;
  // SM partitions are rounded down to a multiple of this (MPS hands out SMs
  // in pairs on the parts we model).
  std::int64_t partition_granularity = 2;

  [[nodiscard]] const Pipeline* find_pipeline(std::string_view pipe) const {
    for (const auto& p : pipelines) {
      if (p.name == pipe) return &p;
    }
    return nullptr;
  }

  friend bool operator==(const GpuSpec&, const GpuSpec&) = default;
};

/// Roofline classification carried for the complementary-profile baseline.
enum class RooflineBound { kUnknown, kCompute, kMemory };

inline std::string_view to_string(RooflineBound b) {
  switch (b) {
    case RooflineBound::kCompute: return "compute";
    case RooflineBound::kMemory: return "memory";
    case RooflineBound::kUnknown: break;
  }
  return "unknown";
}

/// One kernel's launch shape plus its profiler metrics measured in isolation.
/// Percent fields are in [0, 100]; durations are unitless relative times.
struct KernelProfile {
  std::string name;
  std::int64_t grid_blocks = 1;
  std::int64_t threads_per_block = kWarpSize;
  std::int64_t registers_per_thread = 0;
  std::int64_t shared_mem_per_block = 0;
  double duration_alone = 1.0;
  double ipc = 0.0;
  std::map<std::string, double> pipe_util;
  double l1_hit_rate = 0.0;
  double l2_hit_rate = 0.0;
  double membw_util = 0.0;
  std::int64_t working_set = 0;
  double cycles_active_avg = 0.0;
  double cycles_active_min = 0.0;
  double cycles_active_max = 0.0;
  double achieved_occupancy = 0.0;
  RooflineBound roofline_bound = RooflineBound::kUnknown;

  [[nodiscard]] std::int64_t warps_per_block() const {
    return (threads_per_block + kWarpSize - 1) / kWarpSize;
  }
  /// Threads the block scheduler reserves: block size rounded up to whole warps.
  [[nodiscard]] std::int64_t allocated_threads_per_block() const {
    return warps_per_block() * kWarpSize;
  }

  friend bool operator==(const KernelProfile&, const KernelProfile&) = default;
};

enum class PlacementMode { kSharedSms, kPartitionedSms };

/// How two kernels are colocated: on the same SMs (CUDA streams) or on
/// disjoint SM partitions (MPS-style). `sm_share` holds one percentage per
/// kernel and is only meaningful for partitioned placement.
struct Placement {
  PlacementMode mode = PlacementMode::kSharedSms;
  std::vector<double> sm_share;

  static Placement shared() { return {}; }
  static Placement partitioned(double share_each) {
    return {PlacementMode::kPartitionedSms, {share_each, share_each}};
  }

  friend bool operator==(const Placement&, const Placement&) = default;
};

inline std::string describe(const Placement& p) {
  if (p.mode == PlacementMode::kSharedSms) return "shared";
  std::string out = "partitioned";
  for (double s : p.sm_share) {
    char buf[32];
    std::snprintf(buf, sizeof buf, ":%g", s);
    out += buf;
  }
  return out;
}

inline void validate_placement(const Placement& p) {
  if (p.mode == PlacementMode::kSharedSms) return;
  if (p.sm_share.empty()) throw ValidationError("partitioned placement needs SM shares");
  double sum = 0.0;
  for (double s : p.sm_share) {
    if (!(s > 0.0 && s <= 100.0)) throw ValidationError("placement share out of range (0, 100]");
    sum += s;
  }
  if (sum > 100.0 + 1e-9) throw ValidationError("placement shares sum above 100%");
}

/// Rate-based demand a kernel places on each contended resource.
struct ResourceDemand {
  double issue_slots = 0.0;                 // fraction of max_ipc_per_sm
  std::map<std::string, double> pipelines;  // fraction of each pipeline's peak
  double l1_footprint = 0.0;                // bytes per SM
  double l2_footprint = 0.0;                // bytes
  double membw = 0.0;                       // fraction of achieved peak
  std::int64_t threads_per_block = 0;
  std::int64_t blocks = 0;
  std::int64_t registers_per_block = 0;
  std::int64_t shared_mem_per_block = 0;

  friend bool operator==(const ResourceDemand&, const ResourceDemand&) = default;
};

/// Returns `spec` unchanged when every capacity invariant holds; otherwise
/// throws naming the first violated one.
inline GpuSpec validate_spec(const GpuSpec& spec) {
  if (spec.name.empty()) throw ValidationError("empty gpu name");
  const std::pair<const char*, std::int64_t> counts[] = {
      {"num_sms", spec.num_sms},
      {"subpartitions_per_sm", spec.subpartitions_per_sm},
      {"max_threads_per_sm", spec.max_threads_per_sm},
      {"max_blocks_per_sm", spec.max_blocks_per_sm},
      {"registers_per_sm", spec.registers_per_sm},
      {"shared_mem_per_sm", spec.shared_mem_per_sm},
      {"l1_size", spec.l1_size},
      {"l2_size", spec.l2_size},
      {"partition_granularity", spec.partition_granularity},
  };
  for (const auto& [field, value] : counts) {
    if (value <= 0) throw ValidationError(std::string("nonpositive capacity: ") + field);
  }
  if (!(spec.max_ipc_per_sm > 0.0) || !(spec.peak_mem_bandwidth_util > 0.0)) {
    throw ValidationError("nonpositive capacity: max_ipc_per_sm/peak_mem_bandwidth_util");
  }
  if (spec.max_ipc_per_sm != static_cast<double>(spec.subpartitions_per_sm)) {
    throw ValidationError("ipc/subpartition mismatch");
  }
  if (!(spec.mem_to_l2_latency_ratio >= 1.0)) {
    throw ValidationError("mem_to_l2_latency_ratio below 1");
  }
  for (std::size_t i = 0; i < spec.pipelines.size(); ++i) {
    const auto& p = spec.pipelines[i];
    if (p.name.empty()) throw ValidationError("pipeline with empty name");
    if (!(p.peak_util > 0.0)) throw ValidationError("nonpositive capacity: pipeline " + p.name);
    for (std::size_t j = 0; j < i; ++j) {
      if (spec.pipelines[j].name == p.name) throw ValidationError("duplicate pipeline " + p.name);
    }
  }
  return spec;
}

namespace detail {
inline void check_percent(const char* field, double v) {
  if (!(v >= 0.0 && v <= 100.0)) {
    throw ValidationError(std::string("percent out of range: ") + field);
  }
}
}  // namespace detail

/// Checks a profile's own invariants and its consistency with `spec`.
inline void validate_profile(const KernelProfile& p, const GpuSpec& spec) {
  if (p.grid_blocks < 1) throw ValidationError("grid_blocks must be >= 1 (" + p.name + ")");
  if (p.threads_per_block < kWarpSize || p.threads_per_block > kMaxThreadsPerBlock) {
    throw ValidationError("threads_per_block outside [32, 1024] (" + p.name + ")");
  }
  if (p.registers_per_thread < 0 || p.shared_mem_per_block < 0 || p.working_set < 0) {
    throw ValidationError("negative launch resource (" + p.name + ")");
  }
  if (!(p.duration_alone > 0.0) || !std::isfinite(p.duration_alone)) {
    throw ValidationError("duration_alone must be positive (" + p.name + ")");
  }
  if (!(p.ipc >= 0.0 && p.ipc <= spec.max_ipc_per_sm)) {
    throw ValidationError("ipc outside [0, max_ipc_per_sm] (" + p.name + ")");
  }
  detail::check_percent("l1_hit_rate", p.l1_hit_rate);
  detail::check_percent("l2_hit_rate", p.l2_hit_rate);
  detail::check_percent("membw_util", p.membw_util);
  detail::check_percent("achieved_occupancy", p.achieved_occupancy);
  for (const auto& [pipe, util] : p.pipe_util) {
    detail::check_percent(pipe.c_str(), util);
  }
  if (p.cycles_active_min < 0.0 || p.cycles_active_min > p.cycles_active_avg ||
      p.cycles_active_avg > p.cycles_active_max) {
    throw ValidationError("cycles_active must satisfy 0 <= min <= avg <= max (" + p.name + ")");
  }
}

/// Per-SM share of a kernel's working set: the footprint is spread over the
/// SMs its grid touches.
inline double per_sm_footprint(const KernelProfile& p, const GpuSpec& spec) {
  const auto sms = std::min<std::int64_t>(spec.num_sms, std::max<std::int64_t>(1, p.grid_blocks));
  return static_cast<double>(p.working_set) / static_cast<double>(sms);
}

/// Normalizes a profile's metrics into a demand vector. The placement does
/// not change rate-based demand; it is accepted so callers pass the context
/// the demand is evaluated under.
inline ResourceDemand demand_of(const KernelProfile& p, const GpuSpec& spec,
                                const Placement& placement = Placement::shared()) {
  validate_placement(placement);
  ResourceDemand d;
  d.issue_slots = p.ipc / spec.max_ipc_per_sm;
  for (const auto& [pipe, util] : p.pipe_util) {
    const Pipeline* cap = spec.find_pipeline(pipe);
    if (cap == nullptr) {
      throw ValidationError("profile '" + p.name + "' uses pipeline '" + pipe + "' absent from " + spec.name);
    }
    d.pipelines[pipe] = util / cap->peak_util;
  }
  d.l1_footprint = per_sm_footprint(p, spec);
  d.l2_footprint = static_cast<double>(p.working_set);
  d.membw = p.membw_util / spec.peak_mem_bandwidth_util;
  d.threads_per_block = p.allocated_threads_per_block();
  d.blocks = p.grid_blocks;
  d.registers_per_block = p.registers_per_thread * p.allocated_threads_per_block();
  d.shared_mem_per_block = p.shared_mem_per_block;
  return d;
}

namespace detail {
inline std::vector<Pipeline> default_pipelines() {
  std::vector<Pipeline> out;
  for (const char* n : {"ALU", "FMA", "FP16", "FP64", "LSU", "TENSOR", "XU"}) {
    out.push_back({n, 100.0});
  }
  return out;
}
}  // namespace detail

/// H100 NVL. Register file, block limit and cache sizes follow the vendor's
/// Hopper tuning guide.
inline GpuSpec h100_nvl() {
  GpuSpec s;
  s.name = "H100 NVL";
  s.num_sms = 132;
  s.subpartitions_per_sm = 4;
  s.max_threads_per_sm = 2048;
  s.max_blocks_per_sm = 32;
  s.registers_per_sm = 65536;
  s.shared_mem_per_sm = 228 * KiB;
  s.max_ipc_per_sm = 4.0;
  s.pipelines = detail::default_pipelines();
  s.l1_size = 256 * KiB;
  s.l2_size = 50 * MiB;
  s.peak_mem_bandwidth_util = 100.0;
  s.mem_to_l2_latency_ratio = 2.6;
  return s;
}

inline GpuSpec rtx3090() {
  GpuSpec s;
  s.name = "RTX3090";
  s.num_sms = 82;
  s.subpartitions_per_sm = 4;
  s.max_threads_per_sm = 2048;
  s.max_blocks_per_sm = 16;
  s.registers_per_sm = 65536;
  s.shared_mem_per_sm = 100 * KiB;
  s.max_ipc_per_sm = 4.0;
  s.pipelines = detail::default_pipelines();
  s.l1_size = 128 * KiB;
  s.l2_size = 6 * MiB;
  s.peak_mem_bandwidth_util = 100.0;
  s.mem_to_l2_latency_ratio = 2.6;
  return s;
}

inline std::vector<GpuSpec> builtin_specs() { return {h100_nvl(), rtx3090()}; }

/// Looks up a built-in spec by name or alias, case-insensitively and ignoring
/// spaces, dashes and underscores ("h100", "H100-NVL", "rtx3090", "3090").
inline std::optional<GpuSpec> find_builtin(std::string_view name) {
  std::string key;
  for (char c : name) {
    if (c == ' ' || c == '-' || c == '_') continue;
    key += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  if (key == "h100" || key == "h100nvl") return h100_nvl();
  if (key == "rtx3090" || key == "3090" || key == "geforcertx3090") return rtx3090();
  return std::nullopt;
}

}  // namespace gce
