// Copyright 2026 The GCE Authors
// SPDX-License-Identifier: Apache-2.0

// Per-resource slowdown functions and the calibration of the bandwidth
// saturation curve. Every function maps the demand of a kernel ("self") and
// its colocation partner ("other") to the factor by which self's execution
// rate drops while both run.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gce/error.hpp"
#include "gce/gpu_model.hpp"

namespace gce {

inline constexpr double kSerializedSlowdown = std::numeric_limits<double>::infinity();

/// Slowdown of one kernel at one resource. A serialized kernel makes no
/// progress while its partner runs; its factor is the infinite sentinel.
struct ResourceSlowdown {
  std::string resource;
  double slowdown = 1.0;
  bool serialized = false;
  std::string detail;  // e.g. the pipeline that binds

  static ResourceSlowdown none(std::string resource) { return {std::move(resource), 1.0, false, {}}; }
  static ResourceSlowdown stalled(std::string resource, std::string detail = {}) {
    return {std::move(resource), kSerializedSlowdown, true, std::move(detail)};
  }
};

/// Piecewise-linear saturation curve: slowdown = 1 + slope * max(0, U - knee)
/// over aggregate utilization U in percent.
struct BandwidthCurve {
  double knee = 100.0;
  double slope = 0.01;
  std::vector<double> residuals;  // |predicted - observed| per fitted point

  [[nodiscard]] double at(double aggregate_util) const {
    return 1.0 + slope * std::max(0.0, aggregate_util - knee);
  }
};

/// Curve used when a GPU has no calibration on record.
inline BandwidthCurve fallback_bandwidth_curve() { return {100.0, 0.01, {}}; }

struct GpuCalibration {
  std::optional<BandwidthCurve> membw;
  std::optional<double> mem_to_l2_latency_ratio;
  std::optional<double> l1_latency_ratio;
};

/// Fitted contention parameters keyed by GpuSpec::name.
struct CalibrationParams {
  std::map<std::string, GpuCalibration> gpus;

  [[nodiscard]] const GpuCalibration* find(const std::string& gpu) const {
    auto it = gpus.find(gpu);
    return it == gpus.end() ? nullptr : &it->second;
  }
};

inline void validate_params(const CalibrationParams& params) {
  for (const auto& [gpu, cal] : params.gpus) {
    if (cal.membw) {
      if (!(cal.membw->knee >= 0.0 && cal.membw->knee <= 200.0)) {
        throw ValidationError("calibration knee outside [0, 200] for " + gpu);
      }
      if (!(cal.membw->slope >= 0.0) || !std::isfinite(cal.membw->slope)) {
        throw ValidationError("calibration slope must be >= 0 for " + gpu);
      }
    }
    for (const auto& r : {cal.mem_to_l2_latency_ratio, cal.l1_latency_ratio}) {
      if (r && !(*r >= 1.0)) throw ValidationError("latency ratio below 1 for " + gpu);
    }
  }
}

/// Resolved per-GPU model constants, with a note when something fell back
/// to defaults.
struct ContentionConstants {
  BandwidthCurve membw;
  double l2_latency_ratio = 1.0;
  double l1_latency_ratio = 1.0;
  bool membw_calibrated = false;
};

inline ContentionConstants resolve_constants(const GpuSpec& spec, const CalibrationParams& params) {
  ContentionConstants c;
  const GpuCalibration* cal = params.find(spec.name);
  c.membw = (cal && cal->membw) ? *cal->membw : fallback_bandwidth_curve();
  c.membw_calibrated = cal && cal->membw;
  c.l2_latency_ratio = (cal && cal->mem_to_l2_latency_ratio) ? *cal->mem_to_l2_latency_ratio
                                                               : spec.mem_to_l2_latency_ratio;
  c.l1_latency_ratio = (cal && cal->l1_latency_ratio) ? *cal->l1_latency_ratio : c.l2_latency_ratio;
  return c;
}

// ---------------------------------------------------------------------------
// Issue slots and pipelines: proportional share below saturation.

/// `self` and `other` are per-SM issue demands in the same unit as
/// `capacity` (fractions of max IPC with capacity 1, or raw IPC with
/// capacity 4). A partner that saturates the schedulers on its own starves
/// self entirely.
inline ResourceSlowdown issue_slot_slowdown(double self, double other, double capacity = 1.0) {
  if (self > 0.0 && other >= capacity) return ResourceSlowdown::stalled("issue_slots");
  const double total = self + other;
  if (total <= capacity) return ResourceSlowdown::none("issue_slots");
  return {"issue_slots", total / capacity, false, {}};
}

/// Per-pipeline utilizations in percent of each pipeline's own peak. The
/// result is the worst pipeline.
inline ResourceSlowdown pipeline_slowdown(const std::map<std::string, double>& self,
                                          const std::map<std::string, double>& other,
                                          const GpuSpec& spec) {
  for (const auto* side : {&self, &other}) {
    for (const auto& [pipe, util] : *side) {
      if (spec.find_pipeline(pipe) == nullptr) throw ValidationError("unknown pipeline '" + pipe + "'");
    }
  }
  ResourceSlowdown worst = ResourceSlowdown::none("pipelines");
  for (const auto& [pipe, u_self] : self) {
    if (u_self <= 0.0) continue;
    const double peak = spec.find_pipeline(pipe)->peak_util;
    auto it = other.find(pipe);
    const double u_other = it == other.end() ? 0.0 : it->second;
    if (u_other >= peak) return ResourceSlowdown::stalled("pipelines", pipe);
    const double s = std::max(1.0, (u_self + u_other) / peak);
    if (s > worst.slowdown) worst = {"pipelines", s, false, pipe};
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Memory bandwidth.

/// Aggregate utilization that drives bandwidth interference. For identical
/// partners it is the plain sum; it vanishes when either side moves no data,
/// so a kernel that never touches DRAM is not charged for its partner's
/// traffic (twice the harmonic mean of the two utilizations).
inline double effective_aggregate_bandwidth(double u_self, double u_other) {
  if (u_self <= 0.0 || u_other <= 0.0) return 0.0;
  return 4.0 * u_self * u_other / (u_self + u_other);
}

/// Utilizations in percent of achieved peak; both kernels receive the same
/// factor.
inline ResourceSlowdown membw_slowdown(double u_self, double u_other, const BandwidthCurve& curve) {
  const double s = curve.at(effective_aggregate_bandwidth(u_self, u_other));
  return {"membw", std::max(1.0, s), false, {}};
}

struct CalibrationPoint {
  double aggregate_util = 0.0;  // percent
  double slowdown = 1.0;
};

/// Least-squares fit of the piecewise-linear curve. The knee is searched
/// exhaustively over [0, 200] in 0.01 steps with the slope solved in closed
/// form for each knee; the smallest knee wins ties.
inline BandwidthCurve calibrate_piecewise(const std::vector<CalibrationPoint>& points) {
  if (points.size() < 3) throw ValidationError("calibration needs at least 3 points");
  for (const auto& p : points) {
    if (!std::isfinite(p.aggregate_util) || !std::isfinite(p.slowdown)) {
      throw ValidationError("calibration point is not finite");
    }
  }
  const bool degenerate = std::all_of(points.begin(), points.end(), [&](const CalibrationPoint& p) {
    return p.aggregate_util == points.front().aggregate_util;
  });
  if (degenerate) throw ValidationError("degenerate calibration: all points share one utilization");

  double best_sse = std::numeric_limits<double>::infinity();
  BandwidthCurve best;
  for (int step = 0; step <= 20000; ++step) {
    const double knee = step / 100.0;
    double sxy = 0.0;
    double sxx = 0.0;
    for (const auto& p : points) {
      const double x = std::max(0.0, p.aggregate_util - knee);
      sxy += x * (p.slowdown - 1.0);
      sxx += x * x;
    }
    const double slope = sxx > 0.0 ? std::max(0.0, sxy / sxx) : 0.0;
    double sse = 0.0;
    for (const auto& p : points) {
      const double r = 1.0 + slope * std::max(0.0, p.aggregate_util - knee) - p.slowdown;
      sse += r * r;
    }
    if (sse < best_sse - 1e-12) {
      best_sse = sse;
      best.knee = knee;
      best.slope = slope;
    }
  }
  for (const auto& p : points) best.residuals.push_back(std::abs(best.at(p.aggregate_util) - p.slowdown));
  return best;
}

// ---------------------------------------------------------------------------
// Caches.

/// Hit rate of a footprint under a reciprocal-capacity model.
inline double capacity_hit_rate(double footprint, double capacity) {
  if (footprint <= 0.0) return 1.0;
  return std::min(1.0, capacity / footprint);
}

/// Latency-weighted cache slowdown of self when colocated with other.
/// Access cost is 1 on a hit and `latency_ratio` on a miss. The partner
/// displaces at most a cache's worth of lines unless self streams too, in
/// which case both compete in proportion to their footprints. With
/// `shared_fill_path`, the partner's misses queue on the same fill path as
/// self's (L1 inside one SM); a fair arbiter caps that at doubling.
inline double cache_slowdown(double self_bytes, double other_bytes, double capacity,
                             double latency_ratio, bool shared_fill_path) {
  if (self_bytes <= 0.0 || other_bytes <= 0.0) return 1.0;
  const double other_eff = std::min(other_bytes, std::max(capacity, self_bytes));
  const double hit_alone = capacity_hit_rate(self_bytes, capacity);
  const double hit_coloc = capacity_hit_rate(self_bytes + other_eff, capacity);
  const double fill_share = shared_fill_path ? 1.0 + std::min(1.0, other_eff / self_bytes) : 1.0;
  const double t_alone = hit_alone + (1.0 - hit_alone) * latency_ratio;
  const double t_coloc = hit_coloc + (1.0 - hit_coloc) * latency_ratio * fill_share;
  return std::max(1.0, t_coloc / t_alone);
}

/// L2 slowdown of `self` from a partner's working set (L2 is shared by all
/// SMs, so this applies under every placement).
inline ResourceSlowdown l2_slowdown(const KernelProfile& self, const KernelProfile& other,
                                    const GpuSpec& spec, const CalibrationParams& params) {
  const auto c = resolve_constants(spec, params);
  const double s = cache_slowdown(static_cast<double>(self.working_set), static_cast<double>(other.working_set),
                                  static_cast<double>(spec.l2_size), c.l2_latency_ratio, false);
  return {"l2", s, false, {}};
}

/// L1 slowdown of `self` when both kernels share SMs: per-SM footprints
/// against one SM's L1.
inline ResourceSlowdown l1_slowdown(const KernelProfile& self, const KernelProfile& other,
                                    const GpuSpec& spec, const CalibrationParams& params) {
  const auto c = resolve_constants(spec, params);
  const double s = cache_slowdown(per_sm_footprint(self, spec), per_sm_footprint(other, spec),
                                  static_cast<double>(spec.l1_size), c.l1_latency_ratio, true);
  return {"l1", s, false, {}};
}

/// Latency ratio that makes the model's peak L2 slowdown for two identical
/// kernels equal `peak_slowdown`. The peak sits where each kernel's
/// footprint equals the cache, and is (1 + r) / 2 there.
inline double latency_ratio_from_l2_peak(double peak_slowdown) {
  if (!(peak_slowdown >= 1.0)) throw ValidationError("peak slowdown must be >= 1");
  return 2.0 * peak_slowdown - 1.0;
}

// ---------------------------------------------------------------------------
// Residency scaling.

/// Issue and pipeline demand grow linearly with co-resident warps per
/// subpartition. Saturation is applied where demand is consumed.
inline double scale_demand_with_residency(double base, double measured_warps, double target_warps) {
  if (!(measured_warps > 0.0)) throw ValidationError("measured warps per SMSP must be positive");
  if (target_warps < 0.0) throw ValidationError("target warps per SMSP must be non-negative");
  return base * (target_warps / measured_warps);
}

inline ResourceDemand scale_demand_with_residency(ResourceDemand base, double measured_warps,
                                                  double target_warps) {
  base.issue_slots = scale_demand_with_residency(base.issue_slots, measured_warps, target_warps);
  for (auto& [pipe, f] : base.pipelines) f = scale_demand_with_residency(f, measured_warps, target_warps);
  return base;
}

}  // namespace gce
