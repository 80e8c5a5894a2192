// Copyright 2026 The GCE Authors
// SPDX-License-Identifier: Apache-2.0

// Pairwise interference estimates: combines block-scheduler residency with
// the per-resource contention functions, composes per-kernel slowdowns by
// bottleneck (max over resources) and turns them into a colocated makespan.

#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gce/contention.hpp"
#include "gce/error.hpp"
#include "gce/gpu_model.hpp"
#include "gce/occupancy.hpp"

namespace gce {

namespace resource {
inline constexpr std::string_view kBlockScheduler = "block_scheduler";
inline constexpr std::string_view kIssueSlots = "issue_slots";
inline constexpr std::string_view kPipelines = "pipelines";
inline constexpr std::string_view kL1 = "l1";
inline constexpr std::string_view kL2 = "l2";
inline constexpr std::string_view kMembw = "membw";
}  // namespace resource

// ---------------------------------------------------------------------------
// Makespan

struct Makespan {
  double makespan = 0.0;
  double completion_a = 0.0;
  double completion_b = 0.0;
  bool capped = false;  // two-phase result exceeded sequential execution
};

/// Both kernels progress at rate 1/s until the first one finishes; the
/// survivor then completes its remaining work at full rate. A serialized
/// kernel (infinite s) makes no progress during the overlap. Colocation is
/// never modeled as slower than running back to back.
inline Makespan makespan_two_phase(double t_a, double t_b, double s_a, double s_b) {
  if (t_a < 0.0 || t_b < 0.0) throw ValidationError("durations must be non-negative");
  if (!(s_a >= 1.0) || !(s_b >= 1.0)) throw ValidationError("slowdowns must be >= 1");
  const double sequential = t_a + t_b;
  Makespan m;
  const bool a_stalled = std::isinf(s_a);
  const bool b_stalled = std::isinf(s_b);
  if (a_stalled && b_stalled) {
    // Neither can run beside the other: the shorter goes first.
    if (t_a <= t_b) {
      m.completion_a = t_a;
      m.completion_b = sequential;
    } else {
      m.completion_b = t_b;
      m.completion_a = sequential;
    }
  } else if (a_stalled) {
    m.completion_b = s_b * t_b;
    m.completion_a = m.completion_b + t_a;
  } else if (b_stalled) {
    m.completion_a = s_a * t_a;
    m.completion_b = m.completion_a + t_b;
  } else {
    const double end_a = s_a * t_a;
    const double end_b = s_b * t_b;
    if (end_a <= end_b) {
      m.completion_a = end_a;
      m.completion_b = end_a + (t_b - end_a / s_b);
    } else {
      m.completion_b = end_b;
      m.completion_a = end_b + (t_a - end_b / s_a);
    }
  }
  m.makespan = std::max(m.completion_a, m.completion_b);
  if (m.makespan > sequential) {
    m.capped = true;
    m.makespan = sequential;
    m.completion_a = std::min(m.completion_a, sequential);
    m.completion_b = std::min(m.completion_b, sequential);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Pair estimate

enum class Verdict { kBenign, kDegrading };

inline std::string_view to_string(Verdict v) { return v == Verdict::kBenign ? "benign" : "degrading"; }

struct EstimatorOptions {
  // A kernel whose colocated latency grows beyond this factor is "degrading".
  double degrading_threshold = 1.25;
  // Aggregate issue demand within this factor above capacity is flagged as a
  // point where the proportional-share model is coarse.
  double coarse_band = 1.25;
};

struct KernelEstimate {
  std::string name;
  std::vector<ResourceSlowdown> resources;
  std::string bottleneck = "none";
  double overall_slowdown = 1.0;  // max over resources; infinite when serialized
  bool serialized = false;
  double duration_alone = 0.0;
  double completion_time = 0.0;
  double latency_slowdown = 1.0;  // completion_time / duration_alone

  [[nodiscard]] const ResourceSlowdown* find(std::string_view r) const {
    for (const auto& x : resources) {
      if (x.resource == r) return &x;
    }
    return nullptr;
  }
};

struct InterferenceEstimate {
  KernelEstimate a;
  KernelEstimate b;
  Placement placement;
  CoResidency residency = CoResidency::kConcurrent;
  double colocated_makespan = 0.0;
  double sequential_makespan = 0.0;
  double speedup = 1.0;
  Verdict verdict = Verdict::kBenign;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::string lowercase(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline void compose(KernelEstimate& k) {
  k.overall_slowdown = 1.0;
  k.bottleneck = "none";
  k.serialized = false;
  for (const auto& r : k.resources) {
    if (r.serialized) k.serialized = true;
    if (r.slowdown > k.overall_slowdown) {
      k.overall_slowdown = r.slowdown;
      k.bottleneck = r.resource;
    }
  }
}

inline std::vector<std::string> above_knee(const KernelEstimate& k) {
  std::vector<std::string> out;
  for (const auto& r : k.resources) {
    if (r.slowdown > 1.0) out.push_back(r.resource);
  }
  return out;
}

inline ResourceSlowdown named(ResourceSlowdown r, std::string_view name) {
  r.resource = std::string(name);
  return r;
}

}  // namespace detail

/// Predicts how two kernels slow each other down when colocated under
/// `placement`. Shared SMs contend on every dimension; disjoint partitions
/// only on L2 and memory bandwidth.
inline InterferenceEstimate estimate_pair(const KernelProfile& a, const KernelProfile& b, const GpuSpec& spec,
                                          const Placement& placement, const CalibrationParams& params,
                                          const EstimatorOptions& options = {}) {
  validate_placement(placement);
  validate_profile(a, spec);
  validate_profile(b, spec);

  InterferenceEstimate est;
  est.placement = placement;
  est.a.name = a.name;
  est.b.name = b.name;
  est.a.duration_alone = a.duration_alone;
  est.b.duration_alone = b.duration_alone;

  const ContentionConstants constants = resolve_constants(spec, params);
  if (!constants.membw_calibrated) {
    est.warnings.push_back("no bandwidth calibration for " + spec.name + "; using knee 100%, slope 0.01");
  }

  ResourceDemand da = demand_of(a, spec, placement);
  ResourceDemand db = demand_of(b, spec, placement);
  const bool shared = placement.mode == PlacementMode::kSharedSms;

  if (shared) {
    est.residency = co_residency(a, b, spec);
    if (est.residency == CoResidency::kSerialized) {
      est.a.resources.push_back(ResourceSlowdown::stalled(std::string(resource::kBlockScheduler), "no co-resident block fits"));
      est.b.resources.push_back(ResourceSlowdown::stalled(std::string(resource::kBlockScheduler), "no co-resident block fits"));
      est.warnings.push_back("block scheduler serializes the pair: one kernel's residency saturates an SM limit");
    } else {
      if (est.residency == CoResidency::kPartial) {
        est.warnings.push_back("partial co-residency: treated as concurrent");
        est.a.resources.push_back(ResourceSlowdown::none(std::string(resource::kBlockScheduler)));
        est.b.resources.push_back(ResourceSlowdown::none(std::string(resource::kBlockScheduler)));
      } else {
        // Each kernel keeps at most the blocks that fit beside the partner's
        // steady-state residency; fewer resident warps lower its issue rate
        // and stretch its waves.
        auto residency_effect = [&](const KernelProfile& self, const KernelProfile& other, ResourceDemand& d) {
          const std::int64_t alone = steady_state_residency(self, spec);
          const std::int64_t beside = std::min(alone, blocks_fitting_beside(other, self, spec));
          double s = 1.0;
          if (beside < alone) {
            d = scale_demand_with_residency(d, static_cast<double>(alone), static_cast<double>(beside));
            s = wave_time(self.grid_blocks, beside, spec.num_sms) / wave_time(self.grid_blocks, alone, spec.num_sms);
          }
          return ResourceSlowdown{std::string(resource::kBlockScheduler), s, false, {}};
        };
        est.a.resources.push_back(residency_effect(a, b, da));
        est.b.resources.push_back(residency_effect(b, a, db));
      }
      est.a.resources.push_back(detail::named(issue_slot_slowdown(da.issue_slots, db.issue_slots), resource::kIssueSlots));
      est.b.resources.push_back(detail::named(issue_slot_slowdown(db.issue_slots, da.issue_slots), resource::kIssueSlots));

      std::map<std::string, double> pa;
      std::map<std::string, double> pb;
      for (const auto& [pipe, f] : da.pipelines) pa[pipe] = f * spec.find_pipeline(pipe)->peak_util;
      for (const auto& [pipe, f] : db.pipelines) pb[pipe] = f * spec.find_pipeline(pipe)->peak_util;
      est.a.resources.push_back(detail::named(pipeline_slowdown(pa, pb, spec), resource::kPipelines));
      est.b.resources.push_back(detail::named(pipeline_slowdown(pb, pa, spec), resource::kPipelines));

      est.a.resources.push_back(l1_slowdown(a, b, spec, params));
      est.b.resources.push_back(l1_slowdown(b, a, spec, params));

      const double aggregate_issue = da.issue_slots + db.issue_slots;
      if (aggregate_issue > 1.0 && aggregate_issue <= options.coarse_band && db.issue_slots < 1.0 &&
          da.issue_slots < 1.0) {
        est.warnings.push_back("aggregate issue demand " + detail::fmt2(aggregate_issue * spec.max_ipc_per_sm) +
                               " is just above the " + detail::fmt2(spec.max_ipc_per_sm) +
                               " IPC ceiling; the proportional-share prediction is coarse here");
      }
    }
  }

  est.a.resources.push_back(l2_slowdown(a, b, spec, params));
  est.b.resources.push_back(l2_slowdown(b, a, spec, params));
  est.a.resources.push_back(membw_slowdown(a.membw_util, b.membw_util, constants.membw));
  est.b.resources.push_back(membw_slowdown(b.membw_util, a.membw_util, constants.membw));

  detail::compose(est.a);
  detail::compose(est.b);

  // A kernel that cannot progress leaves the GPU to its partner, which then
  // runs as if alone until it finishes.
  auto starve = [&](KernelEstimate& stalled, KernelEstimate& runner) {
    for (auto& r : runner.resources) r = ResourceSlowdown::none(r.resource);
    detail::compose(runner);
    const auto* issue = stalled.find(resource::kIssueSlots);
    if (issue != nullptr && issue->serialized) {
      est.warnings.push_back("'" + runner.name + "' saturates the warp schedulers; '" + stalled.name +
                             "' cannot issue while they overlap");
    }
    const auto* pipe = stalled.find(resource::kPipelines);
    if (pipe != nullptr && pipe->serialized) {
      est.warnings.push_back("'" + runner.name + "' saturates the " + pipe->detail + " pipeline; '" + stalled.name +
                             "' cannot use it while they overlap");
    }
  };
  if (est.a.serialized && !est.b.serialized) starve(est.a, est.b);
  if (est.b.serialized && !est.a.serialized) starve(est.b, est.a);

  for (const auto* k : {&est.a, &est.b}) {
    auto hot = detail::above_knee(*k);
    if (hot.size() >= 2 && !k->serialized) {
      std::string list;
      for (const auto& h : hot) list += (list.empty() ? "" : ", ") + h;
      est.warnings.push_back("'" + k->name + "' contends on several resources at once (" + list +
                             "); composed as the maximum");
    }
  }

  const Makespan m = makespan_two_phase(a.duration_alone, b.duration_alone, est.a.overall_slowdown,
                                        est.b.overall_slowdown);
  est.a.completion_time = m.completion_a;
  est.b.completion_time = m.completion_b;
  est.a.latency_slowdown = m.completion_a / a.duration_alone;
  est.b.latency_slowdown = m.completion_b / b.duration_alone;
  est.colocated_makespan = m.makespan;
  est.sequential_makespan = a.duration_alone + b.duration_alone;
  est.speedup = est.sequential_makespan / est.colocated_makespan;
  if (m.capped) est.warnings.push_back("predicted overlap is slower than sequential execution; capped at sequential");
  est.verdict = std::max(est.a.latency_slowdown, est.b.latency_slowdown) > options.degrading_threshold
                    ? Verdict::kDegrading
                    : Verdict::kBenign;
  std::vector<std::string> unique;
  for (auto& w : est.warnings) {
    if (std::find(unique.begin(), unique.end(), w) == unique.end()) unique.push_back(std::move(w));
  }
  est.warnings = std::move(unique);
  return est;
}

// ---------------------------------------------------------------------------
// Susceptibility

enum class Level { kLow, kHigh };

inline std::string_view to_string(Level l) { return l == Level::kLow ? "LOW" : "HIGH"; }

struct SusceptibilityThresholds {
  double issue_fraction = 0.5;   // of max IPC
  double pipe_util = 50.0;
  double membw_util = 50.0;
  double l2_hit_rate = 50.0;
  double l2_working_set_fraction = 0.25;  // of l2_size
  double l1_hit_rate = 50.0;
  double imbalance = 0.25;  // (max - avg) / avg of active cycles
};

struct SusceptibilityFlag {
  std::string dimension;
  Level level = Level::kLow;
  std::string metric;
  double value = 0.0;
  double threshold = 0.0;
};

struct SusceptibilityReport {
  std::string kernel;
  std::vector<SusceptibilityFlag> flags;  // block_scheduler, l2, membw, l1, issue_slots, pipelines
  bool imbalanced = false;
  double imbalance = 0.0;
  double imbalance_threshold = 0.0;

  [[nodiscard]] Level level(std::string_view dimension) const {
    for (const auto& f : flags) {
      if (f.dimension == dimension) return f.level;
    }
    return Level::kLow;
  }
};

/// Flags the resources a kernel is likely to suffer (or cause) interference
/// on, judged by whether a copy of itself would oversubscribe them.
inline SusceptibilityReport classify_susceptibility(const KernelProfile& p, const GpuSpec& spec,
                                                    const SusceptibilityThresholds& t = {}) {
  SusceptibilityReport r;
  r.kernel = p.name;
  auto flag = [&](std::string dim, bool high, std::string metric, double value, double threshold) {
    r.flags.push_back({std::move(dim), high ? Level::kHigh : Level::kLow, std::move(metric), value, threshold});
  };

  const OccupancyLimits lim = blocks_per_sm(p, spec);
  const std::int64_t beside_self = blocks_fitting_beside(p, p, spec);
  flag(std::string(resource::kBlockScheduler), co_residency(p, p, spec) == CoResidency::kSerialized,
       "launch__occupancy_limit_" + std::string(to_string(lim.binding_constraint)) + " (blocks fitting beside own residency)",
       static_cast<double>(beside_self), 1.0);

  flag(std::string(resource::kL2), p.l2_hit_rate >= t.l2_hit_rate &&
           static_cast<double>(p.working_set) >= t.l2_working_set_fraction * static_cast<double>(spec.l2_size),
       "lts__t_sector_hit_rate.pct", p.l2_hit_rate, t.l2_hit_rate);
  flag(std::string(resource::kMembw), p.membw_util >= t.membw_util, "membw_util", p.membw_util, t.membw_util);
  flag(std::string(resource::kL1), p.l1_hit_rate >= t.l1_hit_rate, "l1tex__t_sector_hit_rate.pct", p.l1_hit_rate,
       t.l1_hit_rate);
  flag(std::string(resource::kIssueSlots), p.ipc >= t.issue_fraction * spec.max_ipc_per_sm,
       "sm__inst_issued.avg.per_cycle_active", p.ipc, t.issue_fraction * spec.max_ipc_per_sm);

  std::string worst_pipe = "none";
  double worst_util = 0.0;
  for (const auto& [pipe, util] : p.pipe_util) {
    if (util > worst_util) {
      worst_util = util;
      worst_pipe = pipe;
    }
  }
  flag(std::string(resource::kPipelines), worst_util >= t.pipe_util,
       "sm__inst_executed_pipe_" + detail::lowercase(worst_pipe) + ".avg.pct_of_peak_sustained_active", worst_util, t.pipe_util);

  r.imbalance_threshold = t.imbalance;
  if (p.cycles_active_avg > 0.0) {
    r.imbalance = (p.cycles_active_max - p.cycles_active_avg) / p.cycles_active_avg;
    r.imbalanced = r.imbalance > t.imbalance;
  }
  return r;
}

// ---------------------------------------------------------------------------
// SM-restricted execution

struct RestrictedEstimate {
  std::int64_t sms = 0;
  bool partition_clamped = false;
  std::int64_t residency_full = 0;        // blocks per SM on the whole GPU
  std::int64_t residency_restricted = 0;  // blocks per SM inside the partition
  double warps_per_smsp_full = 0.0;
  double warps_per_smsp_restricted = 0.0;
  double self_contention = 1.0;  // issue/pipeline oversubscription from concentrated warps
  double wave_ratio = 1.0;
  double partner_slowdown = 1.0;  // identical instance on the disjoint remainder
  bool partner_modeled = false;
  double slowdown = 1.0;  // vs. the kernel alone on the whole GPU
  std::vector<std::string> warnings;
};

/// Slowdown of a kernel confined to `share` percent of the SMs, next to an
/// identical instance on a disjoint partition when two such partitions fit.
inline RestrictedEstimate estimate_restricted(const KernelProfile& p, const GpuSpec& spec, double share,
                                              const CalibrationParams& params) {
  validate_profile(p, spec);
  RestrictedEstimate r;
  const PartitionSize part = partition_sms(spec, share);
  r.sms = part.sms;
  r.partition_clamped = part.clamped;
  if (part.clamped) r.warnings.push_back("share rounds below one partition granule; clamped to " + std::to_string(part.sms) + " SMs");

  if (blocks_per_sm(p, spec).effective == 0) {
    throw ValidationError("share too small to host one block of '" + p.name + "'");
  }
  r.residency_full = steady_state_residency(p, spec, spec.num_sms);
  r.residency_restricted = steady_state_residency(p, spec, r.sms);
  const double warps_per_block = static_cast<double>(p.warps_per_block());
  const double smsp = static_cast<double>(spec.subpartitions_per_sm);
  r.warps_per_smsp_full = static_cast<double>(r.residency_full) * warps_per_block / smsp;
  r.warps_per_smsp_restricted = static_cast<double>(r.residency_restricted) * warps_per_block / smsp;

  const ResourceDemand scaled = scale_demand_with_residency(demand_of(p, spec), r.warps_per_smsp_full,
                                                            r.warps_per_smsp_restricted);
  r.self_contention = std::max(1.0, scaled.issue_slots);
  for (const auto& [pipe, f] : scaled.pipelines) r.self_contention = std::max(r.self_contention, f);

  r.wave_ratio = wave_time(p.grid_blocks, r.residency_restricted, r.sms) /
                 wave_time(p.grid_blocks, r.residency_full, spec.num_sms);

  if (2.0 * share <= 100.0 + 1e-9) {
    r.partner_modeled = true;
    const auto pair = estimate_pair(p, p, spec, Placement::partitioned(share), params);
    r.partner_slowdown = pair.a.overall_slowdown;
    r.warnings.insert(r.warnings.end(), pair.warnings.begin(), pair.warnings.end());
  }
  r.slowdown = r.self_contention * r.wave_ratio * r.partner_slowdown;
  return r;
}

// ---------------------------------------------------------------------------
// Workloads

struct WeightedKernel {
  KernelProfile profile;
  double weight = 1.0;  // share of the workload's time
};

struct WorkloadEstimate {
  double slowdown_a = 1.0;
  double slowdown_b = 1.0;
  std::size_t pairs = 0;
  std::vector<std::string> warnings;
};

/// Each kernel of one workload meets the time-weighted mixture of the other
/// workload's kernels (no phase alignment is assumed). Per-kernel latency
/// slowdowns are averaged with weights w_i * v_j.
inline WorkloadEstimate estimate_workload(const std::vector<WeightedKernel>& a, const std::vector<WeightedKernel>& b,
                                          const GpuSpec& spec, const Placement& placement,
                                          const CalibrationParams& params) {
  if (a.empty() || b.empty()) throw ValidationError("workload kernel list is empty");
  for (const auto* side : {&a, &b}) {
    for (const auto& k : *side) {
      if (!(k.weight > 0.0)) throw ValidationError("workload weights must be positive ('" + k.profile.name + "')");
    }
  }
  WorkloadEstimate out;
  double total = 0.0;
  double sum_a = 0.0;
  double sum_b = 0.0;
  for (const auto& ka : a) {
    for (const auto& kb : b) {
      const auto est = estimate_pair(ka.profile, kb.profile, spec, placement, params);
      const double w = ka.weight * kb.weight;
      total += w;
      sum_a += w * est.a.latency_slowdown;
      sum_b += w * est.b.latency_slowdown;
      ++out.pairs;
      for (const auto& msg : est.warnings) {
        if (std::find(out.warnings.begin(), out.warnings.end(), msg) == out.warnings.end()) out.warnings.push_back(msg);
      }
    }
  }
  out.slowdown_a = sum_a / total;
  out.slowdown_b = sum_b / total;
  return out;
}

}  // namespace gce
