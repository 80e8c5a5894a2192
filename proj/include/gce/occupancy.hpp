// Copyright 2026 The GCE Authors
// SPDX-License-Identifier: Apache-2.0

// Block-scheduler arithmetic: per-SM residency limits, wave counts,
// co-residency of two kernels and SM partition sizing.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>

#include "gce/error.hpp"
#include "gce/gpu_model.hpp"

namespace gce {

/// Sentinel for a constraint that does not bind (no registers / no shared
/// memory requested).
inline constexpr std::int64_t kUnlimited = std::numeric_limits<std::int64_t>::max();

enum class OccupancyConstraint { kBlocks, kThreads, kRegisters, kSharedMem };

inline std::string_view to_string(OccupancyConstraint c) {
  switch (c) {
    case OccupancyConstraint::kBlocks: return "blocks";
    case OccupancyConstraint::kThreads: return "threads";
    case OccupancyConstraint::kRegisters: return "registers";
    case OccupancyConstraint::kSharedMem: return "shared_mem";
  }
  return "?";
}

struct OccupancyLimits {
  std::int64_t limit_blocks = 0;
  std::int64_t limit_threads = 0;
  std::int64_t limit_registers = kUnlimited;
  std::int64_t limit_shared_mem = kUnlimited;
  std::int64_t effective = 0;
  OccupancyConstraint binding_constraint = OccupancyConstraint::kBlocks;
};

/// Free per-SM resources.
struct SmResources {
  std::int64_t threads = 0;
  std::int64_t blocks = 0;
  std::int64_t registers = 0;
  std::int64_t shared_mem = 0;
};

inline SmResources sm_capacity(const GpuSpec& spec) {
  return {spec.max_threads_per_sm, spec.max_blocks_per_sm, spec.registers_per_sm,
          spec.shared_mem_per_sm};
}

namespace detail {
inline std::int64_t fit(std::int64_t available, std::int64_t per_block) {
  if (per_block <= 0) return kUnlimited;
  return std::max<std::int64_t>(0, available) / per_block;
}
}  // namespace detail

/// Blocks of `p` that fit into `free` under each limit.
inline OccupancyLimits limits_in(const SmResources& free, const KernelProfile& p) {
  OccupancyLimits l;
  l.limit_blocks = std::max<std::int64_t>(0, free.blocks);
  l.limit_threads = detail::fit(free.threads, p.allocated_threads_per_block());
  l.limit_registers = detail::fit(free.registers, p.registers_per_thread * p.allocated_threads_per_block());
  l.limit_shared_mem = detail::fit(free.shared_mem, p.shared_mem_per_block);
  // Ties resolve in declaration order so the report is stable.
  l.effective = l.limit_blocks;
  l.binding_constraint = OccupancyConstraint::kBlocks;
  const std::pair<OccupancyConstraint, std::int64_t> rest[] = {
      {OccupancyConstraint::kThreads, l.limit_threads},
      {OccupancyConstraint::kRegisters, l.limit_registers},
      {OccupancyConstraint::kSharedMem, l.limit_shared_mem},
  };
  for (const auto& [c, v] : rest) {
    if (v < l.effective) {
      l.effective = v;
      l.binding_constraint = c;
    }
  }
  return l;
}

/// Maximum co-resident blocks of `p` per empty SM, and which limit binds.
inline OccupancyLimits blocks_per_sm(const KernelProfile& p, const GpuSpec& spec) {
  if (p.threads_per_block > kMaxThreadsPerBlock || p.threads_per_block > spec.max_threads_per_sm) {
    throw ValidationError("threads_per_block exceeds hardware maximum (" + p.name + ")");
  }
  if (p.threads_per_block < 1) throw ValidationError("threads_per_block must be positive");
  return limits_in(sm_capacity(spec), p);
}

/// Resources left on an SM after `n` blocks of `p` are resident.
inline SmResources residual_after(const GpuSpec& spec, const KernelProfile& p, std::int64_t n) {
  SmResources r = sm_capacity(spec);
  r.threads -= n * p.allocated_threads_per_block();
  r.blocks -= n;
  r.registers -= n * p.registers_per_thread * p.allocated_threads_per_block();
  r.shared_mem -= n * p.shared_mem_per_block;
  return r;
}

/// Blocks per SM a kernel holds once its grid is spread over `available_sms`.
inline std::int64_t steady_state_residency(const KernelProfile& p, const GpuSpec& spec,
                                           std::int64_t available_sms) {
  if (available_sms < 1) throw ValidationError("available_sms must be >= 1");
  const std::int64_t eff = blocks_per_sm(p, spec).effective;
  const std::int64_t spread = (p.grid_blocks + available_sms - 1) / available_sms;
  return std::min(eff, spread);
}

inline std::int64_t steady_state_residency(const KernelProfile& p, const GpuSpec& spec) {
  return steady_state_residency(p, spec, spec.num_sms);
}

/// Waves needed on `available_sms` SMs; the last wave may be fractional.
inline double waves(const KernelProfile& p, const GpuSpec& spec, std::int64_t available_sms) {
  if (available_sms < 1) throw ValidationError("available_sms must be >= 1");
  const std::int64_t eff = blocks_per_sm(p, spec).effective;
  if (eff == 0) throw ValidationError("kernel '" + p.name + "' cannot host a single block per SM");
  return static_cast<double>(p.grid_blocks) /
         (static_cast<double>(eff) * static_cast<double>(available_sms));
}

/// Execution time in wave units at a given per-SM residency. A grid that
/// fills less than one wave still takes one wave.
inline double wave_time(std::int64_t grid_blocks, std::int64_t blocks_per_sm_resident,
                        std::int64_t sms) {
  if (blocks_per_sm_resident < 1 || sms < 1) {
    throw ValidationError("wave_time needs positive residency and SM count");
  }
  const double w = static_cast<double>(grid_blocks) /
                   (static_cast<double>(blocks_per_sm_resident) * static_cast<double>(sms));
  return std::max(1.0, w);
}

enum class CoResidency { kConcurrent, kSerialized, kPartial };

inline std::string_view to_string(CoResidency c) {
  switch (c) {
    case CoResidency::kConcurrent: return "CONCURRENT";
    case CoResidency::kSerialized: return "SERIALIZED";
    case CoResidency::kPartial: return "PARTIAL";
  }
  return "?";
}

/// Blocks of `guest` that fit beside `host`'s steady-state residency on one
/// of the SMs `host` occupies.
inline std::int64_t blocks_fitting_beside(const KernelProfile& host, const KernelProfile& guest,
                                          const GpuSpec& spec) {
  const std::int64_t n_host = steady_state_residency(host, spec);
  return limits_in(residual_after(spec, host, n_host), guest).effective;
}

/// Whether two kernels launched on shared SMs can execute concurrently.
inline CoResidency co_residency(const KernelProfile& a, const KernelProfile& b, const GpuSpec& spec) {
  const std::int64_t b_beside_a = blocks_fitting_beside(a, b, spec);
  const std::int64_t a_beside_b = blocks_fitting_beside(b, a, spec);
  if (b_beside_a >= 1 && a_beside_b >= 1) return CoResidency::kConcurrent;

  // `host` blocks `guest` outright when it fills every SM and the guest has
  // enough blocks queued to want all of them.
  auto blocks_out = [&](const KernelProfile& host, const KernelProfile& guest, std::int64_t fits) {
    if (fits != 0) return false;
    const std::int64_t n_host = steady_state_residency(host, spec);
    const std::int64_t busy = (host.grid_blocks + n_host - 1) / std::max<std::int64_t>(1, n_host);
    return busy >= spec.num_sms && guest.grid_blocks >= spec.num_sms;
  };
  if (blocks_out(a, b, b_beside_a) || blocks_out(b, a, a_beside_b)) return CoResidency::kSerialized;
  return CoResidency::kPartial;
}

struct PartitionSize {
  std::int64_t sms = 0;
  bool clamped = false;  // the share rounded below one granule and was raised
};

/// SMs granted by an MPS-style share: floor(share% of num_sms), rounded down
/// to the spec's partition granularity, never below one granule.
inline PartitionSize partition_sms(const GpuSpec& spec, double share) {
  if (!(share > 0.0 && share <= 100.0)) throw ValidationError("SM share out of range (0, 100]");
  const auto raw = static_cast<std::int64_t>(std::floor(share * static_cast<double>(spec.num_sms) / 100.0 + 1e-9));
  const std::int64_t g = spec.partition_granularity;
  const std::int64_t rounded = (raw / g) * g;
  if (rounded < g) return {std::min(g, spec.num_sms), true};
  return {rounded, false};
}

inline std::int64_t partition_sm_count(const GpuSpec& spec, double share) {
  return partition_sms(spec, share).sms;
}

}  // namespace gce
