// Copyright 2026 The GCE Authors
// SPDX-License-Identifier: Apache-2.0

// Profiles of the microbenchmark kernels behind the reference measurements,
// calibration against the reference dataset, and the reproduction checks
// the `reproduce` command runs.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "gce/contention.hpp"
#include "gce/error.hpp"
#include "gce/estimator.hpp"
#include "gce/gpu_model.hpp"
#include "gce/occupancy.hpp"
#include "gce/policy.hpp"
#include "gce/reference_data.hpp"

namespace gce {

namespace scenarios {

/// Achieved occupancy of a kernel that spreads its grid over the GPU.
inline double occupancy_of(const GpuSpec& spec, std::int64_t grid, std::int64_t threads) {
  KernelProfile p;
  p.grid_blocks = grid;
  p.threads_per_block = threads;
  const double warps = static_cast<double>(steady_state_residency(p, spec) * p.warps_per_block());
  return 100.0 * warps / static_cast<double>(spec.max_threads_per_sm / kWarpSize);
}

/// Streaming copy: `bytes` of input copied to an equal output.
inline KernelProfile copy_kernel(const GpuSpec& spec, std::int64_t grid, std::int64_t threads, double bytes,
                                 double membw_util, double ipc = 0.61) {
  KernelProfile p;
  p.name = "copy";
  p.grid_blocks = grid;
  p.threads_per_block = threads;
  p.registers_per_thread = 16;
  p.ipc = ipc;
  p.pipe_util = {{"LSU", 100.0 * ipc / spec.max_ipc_per_sm}};
  p.membw_util = membw_util;
  p.working_set = static_cast<std::int64_t>(2.0 * bytes);
  p.cycles_active_avg = p.cycles_active_min = p.cycles_active_max = 1e6;
  p.achieved_occupancy = occupancy_of(spec, grid, threads);
  p.roofline_bound = RooflineBound::kMemory;
  return p;
}

/// Independent fp32 multiplications on a 4 KiB array.
inline KernelProfile compute_kernel(const GpuSpec& spec, std::int64_t grid, std::int64_t threads, double ipc) {
  KernelProfile p;
  p.name = "compute";
  p.grid_blocks = grid;
  p.threads_per_block = threads;
  p.registers_per_thread = 32;
  p.ipc = ipc;
  p.pipe_util = {{"FMA", 100.0 * ipc / spec.max_ipc_per_sm}};
  p.l1_hit_rate = 99.0;
  p.l2_hit_rate = 99.0;
  p.working_set = 4096;
  p.cycles_active_avg = p.cycles_active_min = p.cycles_active_max = 1e6;
  p.achieved_occupancy = occupancy_of(spec, grid, threads);
  p.roofline_bound = RooflineBound::kCompute;
  return p;
}

/// fp64 variant of the compute kernel.
inline KernelProfile fp64_kernel(const GpuSpec& spec, double ipc, double fp64_util) {
  KernelProfile p = compute_kernel(spec, 132, 128, ipc);
  p.name = "compute_fp64";
  p.pipe_util = {{"FP64", fp64_util}};
  return p;
}

inline KernelProfile nanosleep_kernel(const GpuSpec& spec, std::int64_t grid) {
  KernelProfile p;
  p.name = "nanosleep";
  p.grid_blocks = grid;
  p.threads_per_block = 1024;
  p.registers_per_thread = 8;
  p.ipc = 0.15;
  p.pipe_util = {{"ALU", 2.0}};
  p.cycles_active_avg = p.cycles_active_min = p.cycles_active_max = 1e6;
  p.achieved_occupancy = occupancy_of(spec, grid, 1024);
  p.roofline_bound = RooflineBound::kCompute;
  return p;
}

/// cuBLAS GEMM behind a matrix multiply of two 4 MiB tensors.
inline KernelProfile matmul_kernel(const GpuSpec& spec) {
  const auto& mm = load_reference_tables().mm_example;
  KernelProfile p;
  p.name = "gemm";
  p.grid_blocks = 128;
  p.threads_per_block = 128;
  p.registers_per_thread = 128;
  p.shared_mem_per_block = 32 * KiB;
  p.ipc = mm.ipc;
  p.pipe_util = {{"FMA", mm.fma_util}, {"LSU", 20.0}};
  p.l1_hit_rate = 40.0;
  p.l2_hit_rate = 70.0;
  p.membw_util = 25.0;
  p.working_set = 12 * MiB;
  p.cycles_active_avg = 1e6;
  p.cycles_active_min = 0.97e6;
  p.cycles_active_max = 1.02e6;
  p.achieved_occupancy = occupancy_of(spec, p.grid_blocks, p.threads_per_block);
  p.roofline_bound = RooflineBound::kCompute;
  return p;
}

}  // namespace scenarios

// ---------------------------------------------------------------------------
// Calibration against the reference dataset

/// Bandwidth curve from the dataset's copy-vs-copy rows for `spec` (aggregate
/// utilization is twice the per-kernel value), plus the L2 latency ratio from
/// the measured L2 peak when the peak was measured on this GPU.
inline GpuCalibration calibrate_from_reference(const GpuSpec& spec) {
  const auto& ref = load_reference_tables();
  GpuCalibration cal;
  std::vector<CalibrationPoint> points;
  for (const auto& row : ref.table2_for(spec.name)) points.push_back({2.0 * row.membw_util, row.slowdown});
  cal.membw = calibrate_piecewise(points);
  if (spec.name == h100_nvl().name) cal.mem_to_l2_latency_ratio = latency_ratio_from_l2_peak(ref.fig2_peak.slowdown);
  return cal;
}

/// Calibration for every built-in GPU.
inline const CalibrationParams& default_calibration() {
  static const CalibrationParams params = [] {
    CalibrationParams p;
    for (const auto& spec : builtin_specs()) p.gpus[spec.name] = calibrate_from_reference(spec);
    return p;
  }();
  return params;
}

// ---------------------------------------------------------------------------
// Reproduction

inline std::string fixed4(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

struct ReproRow {
  std::string label;
  double predicted = 0.0;
  double observed = 0.0;  // NaN when the check has no measured counterpart
  double lo = 0.0;
  double hi = 0.0;
  bool pass = false;
  std::string note;
};

struct ReproReport {
  std::string target;
  std::vector<ReproRow> rows;
  std::string csv;  // plot data
  [[nodiscard]] bool pass() const {
    return std::all_of(rows.begin(), rows.end(), [](const ReproRow& r) { return r.pass; });
  }
};

inline const std::vector<std::string>& reproduce_targets() {
  static const std::vector<std::string> targets = {"table2", "table3", "table4", "fig2", "fig3", "pitfalls", "mm", "blocks"};
  return targets;
}

namespace detail {

inline ReproRow band(std::string label, double predicted, double observed, double lo, double hi, std::string note = {}) {
  return {std::move(label), predicted, observed, lo, hi, predicted >= lo && predicted <= hi, std::move(note)};
}

inline ReproRow within(std::string label, double predicted, double observed, double tol, std::string note = {}) {
  return band(std::move(label), predicted, observed, observed - tol, observed + tol, std::move(note));
}

inline ReproRow check(std::string label, bool ok, std::string note = {}) {
  return {std::move(label), ok ? 1.0 : 0.0, std::nan(""), 1.0, 1.0, ok, std::move(note)};
}

inline bool has_warning(const InterferenceEstimate& e, std::string_view needle) {
  return std::any_of(e.warnings.begin(), e.warnings.end(),
                     [&](const std::string& w) { return w.find(needle) != std::string::npos; });
}

inline ReproReport reproduce_table2(const CalibrationParams& params) {
  ReproReport r{"table2", {}, "gpu,thread_blocks,membw_util,observed_slowdown,predicted_slowdown,residual\n"};
  for (const auto& spec : builtin_specs()) {
    for (const auto& row : load_reference_tables().table2_for(spec.name)) {
      const auto copy = scenarios::copy_kernel(spec, row.thread_blocks, 1024, 4.0 * GiB, row.membw_util);
      const auto est = estimate_pair(copy, copy, spec, Placement::partitioned(50.0), params);
      const double pred = est.a.latency_slowdown;
      r.rows.push_back(within(spec.name + " " + std::to_string(row.thread_blocks) + " blocks", pred, row.slowdown, 0.08));
      r.csv += spec.name + "," + std::to_string(row.thread_blocks) + "," + fixed4(row.membw_util) + "," +
               fixed4(row.slowdown) + "," + fixed4(pred) + "," + fixed4(std::abs(pred - row.slowdown)) + "\n";
    }
  }
  return r;
}

inline ReproReport reproduce_table3(const CalibrationParams& params) {
  const GpuSpec spec = h100_nvl();
  const auto& ref = load_reference_tables();
  ReproReport r{"table3", {}, "scenario,compute_ipc,observed_speedup,predicted_speedup,note\n"};
  const auto copy = scenarios::copy_kernel(spec, 132, 1024, 4.0 * GiB, 69.18, ref.table3_copy_ipc);
  for (const auto& row : ref.table3) {
    const std::int64_t threads = row.scenario == "S5" ? 256 : 128;
    const auto compute = scenarios::compute_kernel(spec, 132, threads, row.compute_ipc);
    const auto est = estimate_pair(copy, compute, spec, Placement::shared(), params);
    std::string note;
    ReproRow out;
    if (row.compute_ipc >= spec.max_ipc_per_sm) {
      note = "copy serialized";
      out = within(row.scenario, est.speedup, row.speedup, 0.05, note);
    } else if (has_warning(est, "coarse")) {
      note = "known-coarse";
      out = band(row.scenario, est.speedup, row.speedup, 1.60, 2.00, note);
    } else {
      out = band(row.scenario, est.speedup, row.speedup, 1.85, 2.00, note);
    }
    r.rows.push_back(out);
    r.csv += row.scenario + "," + fixed4(row.compute_ipc) + "," + fixed4(row.speedup) + "," + fixed4(est.speedup) +
             "," + note + "\n";
  }
  return r;
}

inline ReproReport reproduce_table4(const CalibrationParams& params) {
  const GpuSpec spec = h100_nvl();
  ReproReport r{"table4", {}, "scenario,compute_ipc,fp64_util,observed_speedup,predicted_speedup\n"};
  for (const auto& row : load_reference_tables().table4) {
    const auto k = scenarios::fp64_kernel(spec, row.compute_ipc, row.fp64_util);
    const auto est = estimate_pair(k, k, spec, Placement::shared(), params);
    r.rows.push_back(within(row.scenario, est.speedup, row.speedup, 0.05));
    r.csv += row.scenario + "," + fixed4(row.compute_ipc) + "," + fixed4(row.fp64_util) + "," + fixed4(row.speedup) +
             "," + fixed4(est.speedup) + "\n";
  }
  return r;
}

}  // namespace detail

/// L2 slowdown of two identical copy kernels on disjoint SMs, per array size.
struct CurvePoint {
  double array_size_bytes = 0.0;
  double slowdown = 1.0;
};

inline std::vector<CurvePoint> l2_sweep(const GpuSpec& spec, const CalibrationParams& params, double from_bytes,
                                        double to_bytes, double step_bytes) {
  std::vector<CurvePoint> out;
  const auto n = static_cast<int>(std::floor((to_bytes - from_bytes) / step_bytes + 1e-9));
  for (int i = 0; i <= n; ++i) {
    const double size = from_bytes + i * step_bytes;
    const auto copy = scenarios::copy_kernel(spec, 66, 1024, size, 0.0);
    out.push_back({size, l2_slowdown(copy, copy, spec, params).slowdown});
  }
  return out;
}

struct L1Point {
  double array_size_bytes = 0.0;
  double sequential_latency = 0.0;
  double colocated_latency = 0.0;
  [[nodiscard]] double speedup() const { return sequential_latency / colocated_latency; }
};

/// Two copy kernels with one block per SM sharing SMs; each block streams an
/// input and an output array of the given size. Latencies are in units of
/// one all-hit pass over the data.
inline std::vector<L1Point> l1_sweep(const GpuSpec& spec, const CalibrationParams& params, double from_bytes,
                                     double to_bytes, double step_bytes) {
  const double ratio = resolve_constants(spec, params).l1_latency_ratio;
  std::vector<L1Point> out;
  const auto n = static_cast<int>(std::floor((to_bytes - from_bytes) / step_bytes + 1e-9));
  for (int i = 0; i <= n; ++i) {
    const double size = from_bytes + i * step_bytes;
    auto copy = scenarios::copy_kernel(spec, spec.num_sms, 64, size * static_cast<double>(spec.num_sms), 0.0, 0.1);
    const double hit = capacity_hit_rate(2.0 * size, static_cast<double>(spec.l1_size));
    copy.duration_alone = size * (hit + (1.0 - hit) * ratio) / static_cast<double>(KiB);
    const auto est = estimate_pair(copy, copy, spec, Placement::shared(), params);
    out.push_back({size, est.sequential_makespan, est.colocated_makespan});
  }
  return out;
}

namespace detail {

inline ReproReport reproduce_fig2(const CalibrationParams& params) {
  const GpuSpec spec = h100_nvl();
  const auto& ref = load_reference_tables();
  ReproReport r{"fig2", {}, "array_size_bytes,slowdown\n"};
  const auto curve = l2_sweep(spec, params, 1.0 * MiB, 200.0 * MiB, 0.25 * MiB);
  for (const auto& p : curve) r.csv += fixed4(p.array_size_bytes) + "," + fixed4(p.slowdown) + "\n";

  const auto peak = std::max_element(curve.begin(), curve.end(),
                                     [](const CurvePoint& x, const CurvePoint& y) { return x.slowdown < y.slowdown; });
  const auto peak_idx = static_cast<std::size_t>(peak - curve.begin());
  bool unimodal = true;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    if (i <= peak_idx && curve[i].slowdown < curve[i - 1].slowdown - 1e-12) unimodal = false;
    if (i > peak_idx && curve[i].slowdown > curve[i - 1].slowdown + 1e-12) unimodal = false;
  }
  r.rows.push_back(check("curve is unimodal", unimodal));
  const double half_l2 = static_cast<double>(spec.l2_size) / 2.0;
  r.rows.push_back(band("peak array size (MiB) vs l2_size/2", peak->array_size_bytes / MiB, half_l2 / MiB,
                        0.75 * half_l2 / MiB, 1.25 * half_l2 / MiB,
                        "measured peak at " + fixed4(ref.fig2_peak.array_size_bytes / MiB) + " MiB"));
  r.rows.push_back(within("peak slowdown", peak->slowdown, ref.fig2_peak.slowdown, 0.05));
  double tail = 1.0;
  for (const auto& p : curve) {
    if (p.array_size_bytes >= 4.0 * peak->array_size_bytes) tail = std::max(tail, p.slowdown);
  }
  r.rows.push_back(band("max slowdown at >= 4x peak size", tail, std::nan(""), 1.0, 1.1));
  return r;
}

inline ReproReport reproduce_fig3(const CalibrationParams& params) {
  const GpuSpec spec = h100_nvl();
  const auto& ref = load_reference_tables();
  ReproReport r{"fig3", {}, "array_size_bytes,sequential_latency,colocated_latency\n"};
  const auto sweep = l1_sweep(spec, params, 4.0 * KiB, 512.0 * KiB, 1.0 * KiB);
  for (const auto& p : sweep) {
    r.csv += fixed4(p.array_size_bytes) + "," + fixed4(p.sequential_latency) + "," + fixed4(p.colocated_latency) + "\n";
  }
  // Inflection: the last size at which latency per byte is still flat.
  double seq_inflection = 0.0;
  double col_inflection = 0.0;
  double crossover = 0.0;
  const double seq_base = sweep.front().sequential_latency / sweep.front().array_size_bytes;
  const double col_base = sweep.front().colocated_latency / sweep.front().array_size_bytes;
  for (const auto& p : sweep) {
    if (p.sequential_latency / p.array_size_bytes <= seq_base * (1.0 + 1e-9)) seq_inflection = p.array_size_bytes;
    if (p.colocated_latency / p.array_size_bytes <= col_base * (1.0 + 1e-9)) col_inflection = p.array_size_bytes;
    if (crossover == 0.0 && p.speedup() <= 1.0) crossover = p.array_size_bytes;
  }
  r.rows.push_back(within("sequential inflection (KiB)", seq_inflection / KiB, ref.fig3_inflections.sequential_bytes / KiB,
                          0.25 * ref.fig3_inflections.sequential_bytes / KiB));
  r.rows.push_back(within("colocated inflection (KiB)", col_inflection / KiB, ref.fig3_inflections.colocated_bytes / KiB,
                          0.25 * ref.fig3_inflections.colocated_bytes / KiB));
  r.rows.push_back(within("colocated / sequential inflection", col_inflection / seq_inflection, 0.5, 0.125));
  bool below_ok = true;
  bool above_ok = true;
  for (const auto& p : sweep) {
    if (p.array_size_bytes <= col_inflection && !(p.speedup() > 1.0)) below_ok = false;
    if (p.array_size_bytes >= seq_inflection && p.speedup() > 1.0) above_ok = false;
  }
  r.rows.push_back(check("beneficial up to the colocated inflection", below_ok));
  r.rows.push_back(check("non-beneficial from the sequential inflection on", above_ok,
                         "speedup first drops to <= 1 at " + fixed4(crossover / KiB) + " KiB"));
  r.rows.push_back(check("crossover between the inflections", crossover > col_inflection && crossover <= seq_inflection));
  return r;
}

inline ReproReport reproduce_pitfalls(const CalibrationParams& params) {
  const GpuSpec spec = h100_nvl();
  const auto& ref = load_reference_tables();
  ReproReport r{"pitfalls", {}, "case,observed,predicted\n"};

  const auto compute = scenarios::compute_kernel(spec, 132, 1024, 4.0);
  const auto copy = scenarios::copy_kernel(spec, 132, 1024, 4.0 * GiB, 69.18);
  const auto roof = audit(compute, copy, spec, params);
  const bool roof_flagged = std::any_of(roof.disagreements.begin(), roof.disagreements.end(),
                                        [](const Disagreement& d) { return d.baseline == "roofline"; });
  const auto& copy_est = roof.shared.b;
  r.rows.push_back(check("roofline baseline colocates", roof.roofline_colocates.value_or(false)));
  r.rows.push_back(check("copy serialized during overlap", copy_est.serialized));
  r.rows.push_back(within("copy latency slowdown", copy_est.latency_slowdown, ref.pitfalls.roofline_copy_slowdown, 0.05));
  r.rows.push_back(check("audit flags roofline disagreement", roof_flagged));
  r.csv += "roofline_copy," + fixed4(ref.pitfalls.roofline_copy_slowdown) + "," + fixed4(copy_est.latency_slowdown) + "\n";

  const auto small = scenarios::compute_kernel(spec, 132, 128, 3.45);
  const auto occ = audit(small, small, spec, params);
  const bool occ_flagged = std::any_of(occ.disagreements.begin(), occ.disagreements.end(),
                                       [](const Disagreement& d) { return d.baseline == "occupancy_sum"; });
  r.rows.push_back(within("achieved occupancy (%)", small.achieved_occupancy, ref.pitfalls.achieved_occupancy, 1e-9));
  r.rows.push_back(check("occupancy-sum baseline colocates", occ.occupancy_sum_colocates));
  const double shared = occ.shared.a.latency_slowdown;
  r.rows.push_back(band("shared-SM slowdown", shared, ref.pitfalls.occupancy_shared_slowdown,
                        std::max(1.5, ref.pitfalls.occupancy_shared_slowdown - 0.2),
                        ref.pitfalls.occupancy_shared_slowdown + 0.2));
  const double restricted = occ.restricted_a ? occ.restricted_a->slowdown : 0.0;
  r.rows.push_back(band("MPS-restricted slowdown", restricted, ref.pitfalls.occupancy_mps_slowdown, 12.0, 19.0));
  r.rows.push_back(check("audit flags occupancy-sum disagreement", occ_flagged));
  r.csv += "occupancy_shared," + fixed4(ref.pitfalls.occupancy_shared_slowdown) + "," + fixed4(shared) + "\n";
  r.csv += "occupancy_restricted," + fixed4(ref.pitfalls.occupancy_mps_slowdown) + "," + fixed4(restricted) + "\n";
  return r;
}

inline ReproReport reproduce_mm(const CalibrationParams& params) {
  const GpuSpec spec = h100_nvl();
  const auto& ref = load_reference_tables();
  ReproReport r{"mm", {}, "kernel,observed_slowdown,predicted_slowdown,bottleneck,verdict\n"};
  const auto mm = scenarios::matmul_kernel(spec);
  const auto est = estimate_pair(mm, mm, spec, Placement::shared(), params);
  r.rows.push_back(check("blocks co-reside", est.residency == CoResidency::kConcurrent));
  r.rows.push_back(within("per-kernel slowdown", est.a.latency_slowdown, ref.mm_example.slowdown, 0.3));
  r.rows.push_back(check("bottleneck is issue_slots", est.a.bottleneck == resource::kIssueSlots, est.a.bottleneck));
  r.rows.push_back(check("classified degrading", est.verdict == Verdict::kDegrading));
  r.csv += mm.name + "," + fixed4(ref.mm_example.slowdown) + "," + fixed4(est.a.latency_slowdown) + "," +
           est.a.bottleneck + "," + std::string(to_string(est.verdict)) + "\n";
  return r;
}

inline ReproReport reproduce_blocks(const CalibrationParams& params) {
  const GpuSpec spec = h100_nvl();
  ReproReport r{"blocks", {}, "blocks_per_kernel,residency,speedup,colocated_makespan,sequential_makespan\n"};
  for (std::int64_t grid : {132, 264}) {
    const auto k = scenarios::nanosleep_kernel(spec, grid);
    const auto est = estimate_pair(k, k, spec, Placement::shared(), params);
    const std::string label = std::to_string(grid) + " blocks";
    if (grid == 132) {
      r.rows.push_back(check(label + " concurrent", est.residency == CoResidency::kConcurrent));
      r.rows.push_back(band(label + " speedup", est.speedup, 2.0, 1.95, 2.0 + 1e-9));
    } else {
      r.rows.push_back(check(label + " serialized", est.residency == CoResidency::kSerialized));
      r.rows.push_back(within(label + " colocated / sequential makespan", est.colocated_makespan / est.sequential_makespan,
                              1.0, 0.01));
    }
    r.csv += std::to_string(grid) + "," + std::string(to_string(est.residency)) + "," + fixed4(est.speedup) + "," +
             fixed4(est.colocated_makespan) + "," + fixed4(est.sequential_makespan) + "\n";
  }
  return r;
}

}  // namespace detail

/// Runs one reproduction target against the measured reference values.
inline ReproReport reproduce(const std::string& target, const CalibrationParams& params = default_calibration()) {
  if (target == "table2") return detail::reproduce_table2(params);
  if (target == "table3") return detail::reproduce_table3(params);
  if (target == "table4") return detail::reproduce_table4(params);
  if (target == "fig2") return detail::reproduce_fig2(params);
  if (target == "fig3") return detail::reproduce_fig3(params);
  if (target == "pitfalls") return detail::reproduce_pitfalls(params);
  if (target == "mm") return detail::reproduce_mm(params);
  if (target == "blocks") return detail::reproduce_blocks(params);
  throw ValidationError("unknown reproduce target '" + target + "'");
}

}  // namespace gce
