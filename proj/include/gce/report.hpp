// Copyright 2026 The GCE Authors
// SPDX-License-Identifier: Apache-2.0

// Text and JSON rendering of estimator results. Numbers are printed with
// four decimals so that repeated runs produce identical bytes.

#pragma once

#include <cmath>
#include <sstream>
#include <string>

#include "gce/contention.hpp"
#include "gce/estimator.hpp"
#include "gce/json_io.hpp"
#include "gce/policy.hpp"
#include "gce/scenarios.hpp"

namespace gce::report {

/// Number rounded to four decimals; infinities become the string "inf".
inline json number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return nullptr;
  const double r = std::round(v * 1e4) / 1e4;
  return r == 0.0 ? 0.0 : r;
}

// ---------------------------------------------------------------------------
// Estimate

inline json to_json(const KernelEstimate& k) {
  json j;
  j["name"] = k.name;
  j["bottleneck"] = k.bottleneck;
  j["overall_slowdown"] = number(k.overall_slowdown);
  j["serialized"] = k.serialized;
  j["duration_alone"] = number(k.duration_alone);
  j["completion_time"] = number(k.completion_time);
  j["latency_slowdown"] = number(k.latency_slowdown);
  json res = json::array();
  for (const auto& r : k.resources) {
    res.push_back({{"resource", r.resource}, {"slowdown", number(r.slowdown)}, {"serialized", r.serialized},
                   {"detail", r.detail}});
  }
  j["resources"] = std::move(res);
  return j;
}

inline json to_json(const InterferenceEstimate& e) {
  json j;
  j["placement"] = describe(e.placement);
  j["co_residency"] = std::string(to_string(e.residency));
  j["kernels"] = json::array({to_json(e.a), to_json(e.b)});
  j["colocated_makespan"] = number(e.colocated_makespan);
  j["sequential_makespan"] = number(e.sequential_makespan);
  j["speedup"] = number(e.speedup);
  j["verdict"] = std::string(to_string(e.verdict));
  j["warnings"] = e.warnings;
  return j;
}

inline std::string text(const InterferenceEstimate& e) {
  std::ostringstream os;
  os << "placement: " << describe(e.placement) << "\n";
  os << "co-residency: " << to_string(e.residency) << "\n";
  for (const auto* k : {&e.a, &e.b}) {
    os << "kernel " << k->name << ": slowdown " << fixed4(k->latency_slowdown) << ", bottleneck " << k->bottleneck
       << (k->serialized ? " (serialized during overlap)" : "") << "\n";
    for (const auto& r : k->resources) {
      os << "  " << r.resource << " " << fixed4(r.slowdown);
      if (!r.detail.empty()) os << "  " << r.detail;
      os << "\n";
    }
  }
  os << "makespan: colocated " << fixed4(e.colocated_makespan) << ", sequential " << fixed4(e.sequential_makespan)
     << "\n";
  os << "speedup: " << fixed4(e.speedup) << "\n";
  os << "verdict: " << to_string(e.verdict) << "\n";
  for (const auto& w : e.warnings) os << "warning: " << w << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Susceptibility

inline json to_json(const SusceptibilityReport& r) {
  json j;
  j["kernel"] = r.kernel;
  json flags = json::array();
  for (const auto& f : r.flags) {
    flags.push_back({{"dimension", f.dimension},
                     {"level", std::string(to_string(f.level))},
                     {"metric", f.metric},
                     {"value", number(f.value)},
                     {"threshold", number(f.threshold)}});
  }
  j["flags"] = std::move(flags);
  j["imbalanced"] = r.imbalanced;
  j["imbalance"] = number(r.imbalance);
  return j;
}

inline std::string text(const SusceptibilityReport& r) {
  std::ostringstream os;
  os << "kernel: " << r.kernel << "\n";
  for (const auto& f : r.flags) {
    os << "  " << f.dimension << " " << to_string(f.level) << "  " << f.metric << " = " << fixed4(f.value)
       << " (threshold " << fixed4(f.threshold) << ")\n";
  }
  if (r.imbalanced) {
    os << "warning: active cycles imbalanced across SMs (" << fixed4(r.imbalance) << " > " << fixed4(r.imbalance_threshold)
       << ")\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Calibration

inline std::string text(const std::string& gpu, const BandwidthCurve& c, const std::vector<CalibrationPoint>& points) {
  std::ostringstream os;
  os << "gpu: " << gpu << "\n";
  os << "knee: " << fixed4(c.knee) << "\nslope: " << fixed4(c.slope) << "\n";
  os << "aggregate_util  observed  fitted  residual\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    os << fixed4(points[i].aggregate_util) << "  " << fixed4(points[i].slowdown) << "  "
       << fixed4(c.at(points[i].aggregate_util)) << "  " << fixed4(i < c.residuals.size() ? c.residuals[i] : 0.0)
       << "\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Reproduction

inline std::string text(const ReproReport& r) {
  std::ostringstream os;
  os << "target: " << r.target << "\n";
  for (const auto& row : r.rows) {
    os << (row.pass ? "PASS" : "FAIL") << "  " << row.label << ": predicted " << fixed4(row.predicted);
    if (!std::isnan(row.observed)) os << ", observed " << fixed4(row.observed);
    if (row.lo != row.hi) os << ", band [" << fixed4(row.lo) << ", " << fixed4(row.hi) << "]";
    if (!row.note.empty()) os << "  (" << row.note << ")";
    os << "\n";
  }
  os << "result: " << (r.pass() ? "PASS" : "FAIL") << "\n";
  return os.str();
}

inline json to_json(const ReproReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"label", row.label},
                    {"predicted", number(row.predicted)},
                    {"observed", number(row.observed)},
                    {"lo", number(row.lo)},
                    {"hi", number(row.hi)},
                    {"pass", row.pass},
                    {"note", row.note}});
  }
  return {{"target", r.target}, {"pass", r.pass()}, {"rows", std::move(rows)}};
}

// ---------------------------------------------------------------------------
// Plan

inline json to_json(const ColocationPlan& p) {
  json entries = json::array();
  for (const auto& e : p.entries) {
    json slow = json::array();
    json slack = json::array();
    for (double v : e.predicted_slowdown) slow.push_back(number(v));
    for (double v : e.slack) slack.push_back(number(v));
    entries.push_back({{"ids", e.ids}, {"predicted_slowdown", std::move(slow)}, {"slack", std::move(slack)}});
  }
  return {{"entries", std::move(entries)}, {"gpus_saved", p.gpus_saved}};
}

inline std::string text(const ColocationPlan& p) {
  std::ostringstream os;
  for (const auto& e : p.entries) {
    if (e.ids.size() == 2) {
      os << "colocate " << e.ids[0] << " + " << e.ids[1] << ": slowdown " << fixed4(e.predicted_slowdown[0]) << " / "
         << fixed4(e.predicted_slowdown[1]) << " (slack " << fixed4(e.slack[0]) << " / " << fixed4(e.slack[1]) << ")\n";
    } else {
      os << "alone " << e.ids[0] << "\n";
    }
  }
  os << "gpus saved: " << p.gpus_saved << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Audit

inline json to_json(const RestrictedEstimate& r) {
  return {{"sms", r.sms},
          {"partition_clamped", r.partition_clamped},
          {"residency_full", r.residency_full},
          {"residency_restricted", r.residency_restricted},
          {"warps_per_smsp_full", number(r.warps_per_smsp_full)},
          {"warps_per_smsp_restricted", number(r.warps_per_smsp_restricted)},
          {"self_contention", number(r.self_contention)},
          {"wave_ratio", number(r.wave_ratio)},
          {"partner_slowdown", number(r.partner_slowdown)},
          {"slowdown", number(r.slowdown)},
          {"warnings", r.warnings}};
}

inline json to_json(const AuditReport& r) {
  json j;
  j["roofline_colocates"] = r.roofline_colocates ? json(*r.roofline_colocates) : json(nullptr);
  j["occupancy_sum_colocates"] = r.occupancy_sum_colocates;
  j["shared"] = to_json(r.shared);
  j["restricted_a"] = r.restricted_a ? to_json(*r.restricted_a) : json(nullptr);
  j["restricted_b"] = r.restricted_b ? to_json(*r.restricted_b) : json(nullptr);
  json dis = json::array();
  for (const auto& d : r.disagreements) {
    dis.push_back({{"baseline", d.baseline},
                   {"predicted_slowdown", number(d.predicted_slowdown)},
                   {"threshold", number(d.threshold)},
                   {"reason", d.reason}});
  }
  j["disagreements"] = std::move(dis);
  j["notes"] = r.notes;
  return j;
}

inline std::string text(const AuditReport& r) {
  std::ostringstream os;
  os << "roofline baseline: "
     << (r.roofline_colocates ? (*r.roofline_colocates ? "colocate" : "keep apart") : "n/a") << "\n";
  os << "occupancy-sum baseline: " << (r.occupancy_sum_colocates ? "colocate" : "keep apart") << "\n";
  os << "estimator (shared SMs): slowdown " << fixed4(r.shared.a.latency_slowdown) << " / "
     << fixed4(r.shared.b.latency_slowdown) << ", verdict " << to_string(r.shared.verdict) << "\n";
  if (r.restricted_a) {
    os << "estimator (restricted): slowdown " << fixed4(r.restricted_a->slowdown) << " / "
       << fixed4(r.restricted_b->slowdown) << " on " << r.restricted_a->sms << " / " << r.restricted_b->sms
       << " SMs\n";
  }
  for (const auto& d : r.disagreements) {
    os << "DISAGREEMENT " << d.baseline << ": predicted " << fixed4(d.predicted_slowdown) << " > " << fixed4(d.threshold)
       << "; " << d.reason << "\n";
  }
  for (const auto& n : r.notes) os << "note: " << n << "\n";
  return os.str();
}

}  // namespace gce::report
