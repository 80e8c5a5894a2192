// Copyright 2026 The GCE Authors
// SPDX-License-Identifier: Apache-2.0

// JSON documents for specs, profiles, calibration parameters and the
// reference dataset. Field names are snake_case; unknown fields are rejected.

#pragma once

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "json.hpp"

#include "gce/contention.hpp"
#include "gce/error.hpp"
#include "gce/gpu_model.hpp"
#include "gce/reference_data.hpp"

namespace gce {

using json = nlohmann::ordered_json;

namespace detail {

/// Reads fields out of one JSON object and fails on anything left over.
class StrictObject {
 public:
  StrictObject(const json& j, std::string what) : j_(j), what_(std::move(what)) {
    if (!j_.is_object()) throw ValidationError(what_ + ": expected a JSON object");
  }

  [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key); }

  const json& raw(const std::string& key) {
    if (!j_.contains(key)) throw ValidationError(what_ + ": missing field '" + key + "'");
    used_.insert(key);
    return j_.at(key);
  }

  std::string text(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_string()) throw ValidationError(what_ + ": field '" + key + "' must be a string");
    return v.get<std::string>();
  }

  std::int64_t count(const std::string& key) {
    const json& v = raw(key);
    if (v.is_number_integer()) return v.get<std::int64_t>();
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (std::floor(d) == d && std::abs(d) < 9e15) return static_cast<std::int64_t>(d);
    }
    throw ValidationError(what_ + ": field '" + key + "' must be an integer");
  }

  double number(const std::string& key) {
    const json& v = raw(key);
    if (!v.is_number()) throw ValidationError(what_ + ": field '" + key + "' must be a number");
    return v.get<double>();
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (used_.count(key) == 0) throw ValidationError(what_ + ": unknown field '" + key + "'");
    }
  }

 private:
  const json& j_;
  std::string what_;
  std::set<std::string> used_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// GpuSpec

inline json to_json(const GpuSpec& s) {
  json pipes = json::array();
  for (const auto& p : s.pipelines) pipes.push_back({{"name", p.name}, {"peak_util", p.peak_util}});
  return {
      {"name", s.name},
      {"num_sms", s.num_sms},
      {"subpartitions_per_sm", s.subpartitions_per_sm},
      {"max_threads_per_sm", s.max_threads_per_sm},
      {"max_blocks_per_sm", s.max_blocks_per_sm},
      {"registers_per_sm", s.registers_per_sm},
      {"shared_mem_per_sm", s.shared_mem_per_sm},
      {"max_ipc_per_sm", s.max_ipc_per_sm},
      {"pipelines", pipes},
      {"l1_size", s.l1_size},
      {"l2_size", s.l2_size},
      {"peak_mem_bandwidth_util", s.peak_mem_bandwidth_util},
      {"mem_to_l2_latency_ratio", s.mem_to_l2_latency_ratio},
      {"partition_granularity", s.partition_granularity},
  };
}

/// Parses and validates a spec document. `partition_granularity` is optional
/// (default 2).
inline GpuSpec gpu_spec_from_json(const json& j) {
  detail::StrictObject o(j, "gpu spec");
  GpuSpec s;
  s.name = o.text("name");
  s.num_sms = o.count("num_sms");
  s.subpartitions_per_sm = o.count("subpartitions_per_sm");
  s.max_threads_per_sm = o.count("max_threads_per_sm");
  s.max_blocks_per_sm = o.count("max_blocks_per_sm");
  s.registers_per_sm = o.count("registers_per_sm");
  s.shared_mem_per_sm = o.count("shared_mem_per_sm");
  s.max_ipc_per_sm = o.number("max_ipc_per_sm");
  const json& pipes = o.raw("pipelines");
  if (!pipes.is_array()) throw ValidationError("gpu spec: 'pipelines' must be an array");
  for (const auto& pj : pipes) {
    if (pj.is_string()) {
      s.pipelines.push_back({pj.get<std::string>(), 100.0});
      continue;
    }
    detail::StrictObject po(pj, "pipeline");
    Pipeline p;
    p.name = po.text("name");
    if (po.has("peak_util")) p.peak_util = po.number("peak_util");
    po.finish();
    s.pipelines.push_back(std::move(p));
  }
  s.l1_size = o.count("l1_size");
  s.l2_size = o.count("l2_size");
  s.peak_mem_bandwidth_util = o.number("peak_mem_bandwidth_util");
  s.mem_to_l2_latency_ratio = o.number("mem_to_l2_latency_ratio");
  if (o.has("partition_granularity")) s.partition_granularity = o.count("partition_granularity");
  o.finish();
  return validate_spec(s);
}

// ---------------------------------------------------------------------------
// KernelProfile

inline json to_json(const KernelProfile& p) {
  json pipes = json::object();
  for (const auto& [name, util] : p.pipe_util) pipes[name] = util;
  json j = {
      {"name", p.name},
      {"grid_blocks", p.grid_blocks},
      {"threads_per_block", p.threads_per_block},
      {"registers_per_thread", p.registers_per_thread},
      {"shared_mem_per_block", p.shared_mem_per_block},
      {"duration_alone", p.duration_alone},
      {"ipc", p.ipc},
      {"pipe_util", pipes},
      {"l1_hit_rate", p.l1_hit_rate},
      {"l2_hit_rate", p.l2_hit_rate},
      {"membw_util", p.membw_util},
      {"working_set", p.working_set},
      {"cycles_active_avg", p.cycles_active_avg},
      {"cycles_active_min", p.cycles_active_min},
      {"cycles_active_max", p.cycles_active_max},
      {"achieved_occupancy", p.achieved_occupancy},
  };
  if (p.roofline_bound != RooflineBound::kUnknown) j["roofline_bound"] = std::string(to_string(p.roofline_bound));
  return j;
}

inline RooflineBound parse_roofline_bound(const std::string& s) {
  if (s == "compute") return RooflineBound::kCompute;
  if (s == "memory") return RooflineBound::kMemory;
  if (s == "unknown") return RooflineBound::kUnknown;
  throw ValidationError("roofline_bound must be 'compute', 'memory' or 'unknown'");
}

/// Parses a profile document. Shape checks only; validation against a GPU
/// happens in validate_profile. `roofline_bound` is optional.
inline KernelProfile kernel_profile_from_json(const json& j) {
  detail::StrictObject o(j, "kernel profile");
  KernelProfile p;
  p.name = o.text("name");
  p.grid_blocks = o.count("grid_blocks");
  p.threads_per_block = o.count("threads_per_block");
  p.registers_per_thread = o.count("registers_per_thread");
  p.shared_mem_per_block = o.count("shared_mem_per_block");
  p.duration_alone = o.number("duration_alone");
  p.ipc = o.number("ipc");
  const json& pipes = o.raw("pipe_util");
  if (!pipes.is_object()) throw ValidationError("kernel profile: 'pipe_util' must be an object");
  for (const auto& [name, util] : pipes.items()) {
    if (!util.is_number()) throw ValidationError("kernel profile: pipe_util values must be numbers");
    p.pipe_util[name] = util.get<double>();
  }
  p.l1_hit_rate = o.number("l1_hit_rate");
  p.l2_hit_rate = o.number("l2_hit_rate");
  p.membw_util = o.number("membw_util");
  p.working_set = o.count("working_set");
  p.cycles_active_avg = o.number("cycles_active_avg");
  p.cycles_active_min = o.number("cycles_active_min");
  p.cycles_active_max = o.number("cycles_active_max");
  p.achieved_occupancy = o.number("achieved_occupancy");
  if (o.has("roofline_bound")) p.roofline_bound = parse_roofline_bound(o.text("roofline_bound"));
  o.finish();
  return p;
}

// ---------------------------------------------------------------------------
// CalibrationParams

inline json to_json(const CalibrationParams& params) {
  json gpus = json::object();
  for (const auto& [gpu, cal] : params.gpus) {
    json g = json::object();
    if (cal.membw) {
      g["membw"] = {{"knee", cal.membw->knee}, {"slope", cal.membw->slope}, {"residuals", cal.membw->residuals}};
    }
    if (cal.mem_to_l2_latency_ratio) g["mem_to_l2_latency_ratio"] = *cal.mem_to_l2_latency_ratio;
    if (cal.l1_latency_ratio) g["l1_latency_ratio"] = *cal.l1_latency_ratio;
    gpus[gpu] = g;
  }
  return {{"gpus", gpus}};
}

inline CalibrationParams calibration_params_from_json(const json& j) {
  detail::StrictObject o(j, "calibration params");
  CalibrationParams params;
  const json& gpus = o.raw("gpus");
  if (!gpus.is_object()) throw ValidationError("calibration params: 'gpus' must be an object");
  for (const auto& [gpu, gj] : gpus.items()) {
    detail::StrictObject go(gj, "calibration for " + gpu);
    GpuCalibration cal;
    if (go.has("membw")) {
      detail::StrictObject mo(go.raw("membw"), "membw curve for " + gpu);
      BandwidthCurve c;
      c.knee = mo.number("knee");
      c.slope = mo.number("slope");
      if (mo.has("residuals")) {
        const json& r = mo.raw("residuals");
        if (!r.is_array()) throw ValidationError("residuals must be an array");
        for (const auto& v : r) c.residuals.push_back(v.get<double>());
      }
      mo.finish();
      cal.membw = c;
    }
    if (go.has("mem_to_l2_latency_ratio")) cal.mem_to_l2_latency_ratio = go.number("mem_to_l2_latency_ratio");
    if (go.has("l1_latency_ratio")) cal.l1_latency_ratio = go.number("l1_latency_ratio");
    go.finish();
    params.gpus[gpu] = cal;
  }
  o.finish();
  validate_params(params);
  return params;
}

// ---------------------------------------------------------------------------
// ReferenceDataset

inline json to_json(const ReferenceDataset& d) {
  json t2 = json::array();
  for (const auto& r : d.table2) {
    t2.push_back({{"gpu", r.gpu}, {"thread_blocks", r.thread_blocks}, {"membw_util", r.membw_util}, {"slowdown", r.slowdown}});
  }
  json t3 = json::array();
  for (const auto& r : d.table3) t3.push_back({{"scenario", r.scenario}, {"compute_ipc", r.compute_ipc}, {"speedup", r.speedup}});
  json t4 = json::array();
  for (const auto& r : d.table4) {
    t4.push_back({{"scenario", r.scenario}, {"compute_ipc", r.compute_ipc}, {"fp64_util", r.fp64_util}, {"speedup", r.speedup}});
  }
  return {
      {"table2", t2},
      {"table3", t3},
      {"table3_copy_ipc", d.table3_copy_ipc},
      {"table4", t4},
      {"fig2_peak", {{"array_size_bytes", d.fig2_peak.array_size_bytes}, {"slowdown", d.fig2_peak.slowdown}}},
      {"fig3_inflections",
       {{"sequential_bytes", d.fig3_inflections.sequential_bytes}, {"colocated_bytes", d.fig3_inflections.colocated_bytes}}},
      {"pitfalls",
       {{"roofline_copy_slowdown", d.pitfalls.roofline_copy_slowdown},
        {"occupancy_mps_slowdown", d.pitfalls.occupancy_mps_slowdown},
        {"occupancy_shared_slowdown", d.pitfalls.occupancy_shared_slowdown},
        {"achieved_occupancy", d.pitfalls.achieved_occupancy}}},
      {"mm_example", {{"ipc", d.mm_example.ipc}, {"fma_util", d.mm_example.fma_util}, {"slowdown", d.mm_example.slowdown}}},
  };
}

inline ReferenceDataset reference_dataset_from_json(const json& j) {
  detail::StrictObject o(j, "reference dataset");
  ReferenceDataset d;
  for (const auto& rj : o.raw("table2")) {
    detail::StrictObject r(rj, "table2 row");
    d.table2.push_back({r.text("gpu"), static_cast<int>(r.count("thread_blocks")), r.number("membw_util"), r.number("slowdown")});
    r.finish();
  }
  for (const auto& rj : o.raw("table3")) {
    detail::StrictObject r(rj, "table3 row");
    d.table3.push_back({r.text("scenario"), r.number("compute_ipc"), r.number("speedup")});
    r.finish();
  }
  d.table3_copy_ipc = o.number("table3_copy_ipc");
  for (const auto& rj : o.raw("table4")) {
    detail::StrictObject r(rj, "table4 row");
    d.table4.push_back({r.text("scenario"), r.number("compute_ipc"), r.number("fp64_util"), r.number("speedup")});
    r.finish();
  }
  {
    detail::StrictObject r(o.raw("fig2_peak"), "fig2_peak");
    d.fig2_peak = {r.number("array_size_bytes"), r.number("slowdown")};
    r.finish();
  }
  {
    detail::StrictObject r(o.raw("fig3_inflections"), "fig3_inflections");
    d.fig3_inflections = {r.number("sequential_bytes"), r.number("colocated_bytes")};
    r.finish();
  }
  {
    detail::StrictObject r(o.raw("pitfalls"), "pitfalls");
    d.pitfalls = {r.number("roofline_copy_slowdown"), r.number("occupancy_mps_slowdown"),
                  r.number("occupancy_shared_slowdown"), r.number("achieved_occupancy")};
    r.finish();
  }
  {
    detail::StrictObject r(o.raw("mm_example"), "mm_example");
    d.mm_example = {r.number("ipc"), r.number("fma_util"), r.number("slowdown")};
    r.finish();
  }
  o.finish();
  return d;
}

// ---------------------------------------------------------------------------
// Files

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace gce
