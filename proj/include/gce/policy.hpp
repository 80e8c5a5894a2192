// Copyright 2026 The GCE Authors
// SPDX-License-Identifier: Apache-2.0

// Colocation planning under per-workload slowdown budgets, and the two
// single-metric baseline policies the estimator is audited against.

#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "gce/contention.hpp"
#include "gce/error.hpp"
#include "gce/estimator.hpp"
#include "gce/gpu_model.hpp"

namespace gce {

struct Workload {
  std::string id;
  double slack = 1.0;  // tolerated latency slowdown, applied to every kernel
  std::vector<WeightedKernel> kernels;
};

struct PlanEntry {
  std::vector<std::string> ids;            // one id (alone) or two (colocated)
  std::vector<double> predicted_slowdown;  // per id
  std::vector<double> slack;               // per id
};

struct ColocationPlan {
  std::vector<PlanEntry> entries;
  int gpus_saved = 0;
};

/// Greedy pairing: every feasible pair is ranked by the smaller of its two
/// residual slacks (slack - predicted slowdown), largest first, ties by id;
/// pairs are accepted while both members are still unpaired.
inline ColocationPlan plan(const std::vector<Workload>& workloads, const GpuSpec& spec, const Placement& placement,
                           const CalibrationParams& params) {
  std::set<std::string> ids;
  for (const auto& w : workloads) {
    if (!ids.insert(w.id).second) throw ValidationError("duplicate workload id '" + w.id + "'");
    if (!(w.slack >= 1.0)) throw ValidationError("slack of '" + w.id + "' must be >= 1");
  }

  struct Candidate {
    double margin;
    std::size_t i;
    std::size_t j;
    double s_i;
    double s_j;
  };
  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < workloads.size(); ++i) {
    for (std::size_t j = i + 1; j < workloads.size(); ++j) {
      const auto est = estimate_workload(workloads[i].kernels, workloads[j].kernels, spec, placement, params);
      const double margin = std::min(workloads[i].slack - est.slowdown_a, workloads[j].slack - est.slowdown_b);
      if (margin >= 0.0) candidates.push_back({margin, i, j, est.slowdown_a, est.slowdown_b});
    }
  }
  auto key = [&](const Candidate& c) {
    const auto& x = workloads[c.i].id;
    const auto& y = workloads[c.j].id;
    return std::make_pair(std::min(x, y), std::max(x, y));
  };
  std::sort(candidates.begin(), candidates.end(), [&](const Candidate& l, const Candidate& r) {
    if (l.margin != r.margin) return l.margin > r.margin;
    return key(l) < key(r);
  });

  ColocationPlan out;
  std::vector<bool> used(workloads.size(), false);
  for (const auto& c : candidates) {
    if (used[c.i] || used[c.j]) continue;
    used[c.i] = used[c.j] = true;
    out.entries.push_back({{workloads[c.i].id, workloads[c.j].id},
                           {c.s_i, c.s_j},
                           {workloads[c.i].slack, workloads[c.j].slack}});
    ++out.gpus_saved;
  }
  std::vector<std::size_t> alone;
  for (std::size_t i = 0; i < workloads.size(); ++i) {
    if (!used[i]) alone.push_back(i);
  }
  std::sort(alone.begin(), alone.end(), [&](std::size_t l, std::size_t r) { return workloads[l].id < workloads[r].id; });
  for (std::size_t i : alone) out.entries.push_back({{workloads[i].id}, {1.0}, {workloads[i].slack}});
  return out;
}

// ---------------------------------------------------------------------------
// Baselines

/// Colocate kernels with complementary roofline classes.
inline bool baseline_roofline(const KernelProfile& a, const KernelProfile& b) {
  if (a.roofline_bound == RooflineBound::kUnknown || b.roofline_bound == RooflineBound::kUnknown) {
    throw ValidationError("roofline baseline needs a compute/memory tag on both kernels");
  }
  return a.roofline_bound != b.roofline_bound;
}

/// Colocate when achieved occupancies sum below 100%.
inline bool baseline_occupancy_sum(const KernelProfile& a, const KernelProfile& b) {
  return a.achieved_occupancy + b.achieved_occupancy < 100.0;
}

// ---------------------------------------------------------------------------
// Audit

struct Disagreement {
  std::string baseline;  // "roofline" or "occupancy_sum"
  double predicted_slowdown = 1.0;
  double threshold = 1.25;
  std::string reason;
};

struct AuditReport {
  std::optional<bool> roofline_colocates;  // empty when a tag is missing
  bool occupancy_sum_colocates = false;
  InterferenceEstimate shared;
  std::optional<RestrictedEstimate> restricted_a;  // each kernel confined to its occupancy share
  std::optional<RestrictedEstimate> restricted_b;
  std::vector<Disagreement> disagreements;
  std::vector<std::string> notes;
};

struct AuditOptions {
  double threshold = 1.25;
};

/// Runs both baselines and the estimator, and records a disagreement
/// wherever a baseline would colocate a pair the estimator predicts to slow
/// down beyond the threshold.
inline AuditReport audit(const KernelProfile& a, const KernelProfile& b, const GpuSpec& spec,
                         const CalibrationParams& params, const AuditOptions& options = {}) {
  AuditReport r;
  r.shared = estimate_pair(a, b, spec, Placement::shared(), params);
  const double shared_worst = std::max(r.shared.a.latency_slowdown, r.shared.b.latency_slowdown);

  try {
    r.roofline_colocates = baseline_roofline(a, b);
  } catch (const ValidationError& e) {
    r.notes.push_back(std::string("roofline baseline skipped: ") + e.what());
  }
  if (r.roofline_colocates.value_or(false) && shared_worst > options.threshold) {
    const auto& victim = r.shared.a.latency_slowdown >= r.shared.b.latency_slowdown ? r.shared.a : r.shared.b;
    std::string cause = victim.bottleneck;
    for (const auto& res : victim.resources) {
      if (res.serialized) cause = "serialization on " + res.resource;
    }
    r.disagreements.push_back({"roofline", shared_worst, options.threshold,
                               "complementary roofline classes, but '" + victim.name + "' is bound by " + cause});
  }

  r.occupancy_sum_colocates = baseline_occupancy_sum(a, b);
  if (r.occupancy_sum_colocates) {
    double worst = shared_worst;
    std::string where = "shared SMs";
    if (a.achieved_occupancy > 0.0 && b.achieved_occupancy > 0.0) {
      r.restricted_a = estimate_restricted(a, spec, a.achieved_occupancy, params);
      r.restricted_b = estimate_restricted(b, spec, b.achieved_occupancy, params);
      const double restricted_worst = std::max(r.restricted_a->slowdown, r.restricted_b->slowdown);
      if (restricted_worst > worst) {
        worst = restricted_worst;
        where = "SMs restricted to the occupancy share";
      }
    } else {
      r.notes.push_back("restricted estimate skipped: zero achieved occupancy");
    }
    if (worst > options.threshold) {
      r.disagreements.push_back({"occupancy_sum", worst, options.threshold,
                                 "occupancies sum below 100%, but the pair slows down on " + where});
    }
  }
  return r;
}

}  // namespace gce
