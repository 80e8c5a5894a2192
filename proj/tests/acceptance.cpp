// Copyright 2026 The GCE Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Tolerances are fixed here and not configurable.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "gce/gce.hpp"
#include "properties.hpp"

using namespace gce;

namespace {

constexpr double kTable4Tol = 0.05;
constexpr double kTable3Lo = 1.85, kTable3Hi = 2.00;
constexpr double kTable3S5Tol = 0.05;
constexpr double kTable3S4Lo = 1.60, kTable3S4Hi = 2.00;
constexpr double kTable2Tol = 0.08;
constexpr double kFig2PeakPosTol = 0.25;  // relative to l2_size / 2
constexpr double kFig2PeakTol = 0.05;
constexpr double kFig2TailMax = 1.1;
constexpr double kFig3Tol = 0.25;  // relative to the measured inflections
constexpr double kPitfall1Tol = 0.05;
constexpr double kPitfall2SharedMin = 1.5, kPitfall2SharedTol = 0.2;
constexpr double kPitfall2MpsLo = 12.0, kPitfall2MpsHi = 19.0;
constexpr double kMatmulTol = 0.3;
constexpr double kBlocksSpeedupMin = 1.95;
constexpr double kBlocksMakespanTol = 0.01;  // relative
constexpr double kDisagreementThreshold = 1.25;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += (ok ? "" : "FAILED ") + what;
  }
};

std::string f4(double v) { return fixed4(v); }

const GpuSpec& h100() {
  static const GpuSpec s = h100_nvl();
  return s;
}

const CalibrationParams& params() { return default_calibration(); }

Outcome table4() {
  Outcome o;
  for (const auto& row : load_reference_tables().table4) {
    const auto k = scenarios::fp64_kernel(h100(), row.compute_ipc, row.fp64_util);
    const double s = estimate_pair(k, k, h100(), Placement::shared(), params()).speedup;
    o.require(std::abs(s - row.speedup) <= kTable4Tol, row.scenario + " " + f4(s) + " vs " + f4(row.speedup));
  }
  return o;
}

Outcome table3() {
  Outcome o;
  const auto& ref = load_reference_tables();
  const auto copy = scenarios::copy_kernel(h100(), 132, 1024, 4.0 * GiB, 69.18, ref.table3_copy_ipc);
  for (const auto& row : ref.table3) {
    const auto compute = scenarios::compute_kernel(h100(), 132, row.scenario == "S5" ? 256 : 128, row.compute_ipc);
    const auto e = estimate_pair(copy, compute, h100(), Placement::shared(), params());
    const std::string label = row.scenario + " " + f4(e.speedup);
    if (row.scenario == "S5") {
      o.require(std::abs(e.speedup - 1.0) <= kTable3S5Tol && e.a.serialized, label + " (serialized)");
    } else if (row.scenario == "S4") {
      const bool flagged = std::any_of(e.warnings.begin(), e.warnings.end(),
                                       [](const std::string& w) { return w.find("coarse") != std::string::npos; });
      o.require(e.speedup >= kTable3S4Lo && e.speedup <= kTable3S4Hi && flagged, label + " (flagged coarse)");
    } else {
      o.require(e.speedup >= kTable3Lo && e.speedup <= kTable3Hi, label);
    }
  }
  return o;
}

Outcome table2() {
  Outcome o;
  for (const auto& spec : builtin_specs()) {
    const auto& curve = *params().find(spec.name)->membw;
    std::string residuals;
    for (double r : curve.residuals) residuals += (residuals.empty() ? "" : "/") + f4(r);
    o.require(curve.residuals.size() == 4, spec.name + " fit residuals " + residuals);
    for (const auto& row : load_reference_tables().table2_for(spec.name)) {
      const auto copy = scenarios::copy_kernel(spec, row.thread_blocks, 1024, 4.0 * GiB, row.membw_util);
      const double s = estimate_pair(copy, copy, spec, Placement::partitioned(50.0), params()).a.latency_slowdown;
      o.require(std::abs(s - row.slowdown) <= kTable2Tol,
                spec.name + "/" + std::to_string(row.thread_blocks) + " " + f4(s) + " vs " + f4(row.slowdown));
    }
  }
  return o;
}

Outcome fig2() {
  Outcome o;
  const auto curve = l2_sweep(h100(), params(), 1.0 * MiB, 200.0 * MiB, 0.25 * MiB);
  std::size_t peak = 0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    if (curve[i].slowdown > curve[peak].slowdown) peak = i;
  }
  bool unimodal = true;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    const double step = curve[i].slowdown - curve[i - 1].slowdown;
    if ((i <= peak && step < -1e-12) || (i > peak && step > 1e-12)) unimodal = false;
  }
  o.require(unimodal, "unimodal over " + std::to_string(curve.size()) + " sizes");
  const double half_l2 = static_cast<double>(h100().l2_size) / 2.0;
  const double at = curve[peak].array_size_bytes;
  o.require(std::abs(at - half_l2) <= kFig2PeakPosTol * half_l2, "peak at " + f4(at / MiB) + " MiB");
  o.require(std::abs(curve[peak].slowdown - 1.79) <= kFig2PeakTol, "peak " + f4(curve[peak].slowdown));
  double tail = 1.0;
  for (const auto& p : curve) {
    if (p.array_size_bytes >= 4.0 * at) tail = std::max(tail, p.slowdown);
  }
  o.require(tail <= kFig2TailMax, "max beyond 4x peak " + f4(tail));
  return o;
}

Outcome fig3() {
  Outcome o;
  const auto& ref = load_reference_tables().fig3_inflections;
  const auto sweep = l1_sweep(h100(), params(), 4.0 * KiB, 512.0 * KiB, 1.0 * KiB);
  const double seq0 = sweep.front().sequential_latency / sweep.front().array_size_bytes;
  const double col0 = sweep.front().colocated_latency / sweep.front().array_size_bytes;
  double seq = 0.0, col = 0.0;
  for (const auto& p : sweep) {
    if (p.sequential_latency / p.array_size_bytes <= seq0 * (1 + 1e-9)) seq = p.array_size_bytes;
    if (p.colocated_latency / p.array_size_bytes <= col0 * (1 + 1e-9)) col = p.array_size_bytes;
  }
  bool below = true, above = true;
  for (const auto& p : sweep) {
    if (p.array_size_bytes <= col && !(p.speedup() > 1.0)) below = false;
    if (p.array_size_bytes >= seq && p.speedup() > 1.0) above = false;
  }
  o.require(below, "beneficial up to " + f4(col / KiB) + " KiB");
  o.require(above, "non-beneficial from " + f4(seq / KiB) + " KiB");
  o.require(std::abs(seq - ref.sequential_bytes) <= kFig3Tol * ref.sequential_bytes,
            "sequential inflection " + f4(seq / KiB) + " KiB");
  o.require(std::abs(col - ref.colocated_bytes) <= kFig3Tol * ref.colocated_bytes,
            "colocated inflection " + f4(col / KiB) + " KiB");
  o.require(std::abs(col / seq - 0.5) <= kFig3Tol * 0.5, "ratio " + f4(col / seq));
  return o;
}

Outcome pitfall1() {
  Outcome o;
  const auto compute = scenarios::compute_kernel(h100(), 132, 1024, 4.0);
  const auto copy = scenarios::copy_kernel(h100(), 132, 1024, 4.0 * GiB, 69.18);
  const auto r = audit(compute, copy, h100(), params(), {kDisagreementThreshold});
  o.require(r.roofline_colocates.value_or(false), "roofline colocates");
  o.require(r.shared.b.serialized, "copy serialized in overlap");
  o.require(std::abs(r.shared.b.latency_slowdown - load_reference_tables().pitfalls.roofline_copy_slowdown) <=
                kPitfall1Tol,
            "copy slowdown " + f4(r.shared.b.latency_slowdown));
  o.require(std::any_of(r.disagreements.begin(), r.disagreements.end(),
                        [](const Disagreement& d) { return d.baseline == "roofline"; }),
            "DISAGREEMENT emitted");
  return o;
}

Outcome pitfall2() {
  Outcome o;
  const auto& ref = load_reference_tables().pitfalls;
  const auto k = scenarios::compute_kernel(h100(), 132, 128, 3.45);
  o.require(std::abs(k.achieved_occupancy - ref.achieved_occupancy) < 1e-9, "occupancy " + f4(k.achieved_occupancy));
  const auto r = audit(k, k, h100(), params(), {kDisagreementThreshold});
  o.require(r.occupancy_sum_colocates, "occupancy-sum colocates");
  const double shared = r.shared.a.latency_slowdown;
  o.require(shared >= kPitfall2SharedMin && std::abs(shared - ref.occupancy_shared_slowdown) <= kPitfall2SharedTol,
            "shared " + f4(shared));
  const double mps = r.restricted_a ? r.restricted_a->slowdown : 0.0;
  o.require(mps >= kPitfall2MpsLo && mps <= kPitfall2MpsHi, "restricted " + f4(mps));
  o.require(std::any_of(r.disagreements.begin(), r.disagreements.end(),
                        [](const Disagreement& d) { return d.baseline == "occupancy_sum"; }),
            "DISAGREEMENT emitted");
  return o;
}

Outcome matmul() {
  Outcome o;
  const auto mm = scenarios::matmul_kernel(h100());
  const auto e = estimate_pair(mm, mm, h100(), Placement::shared(), params());
  o.require(std::abs(e.a.latency_slowdown - load_reference_tables().mm_example.slowdown) <= kMatmulTol,
            "slowdown " + f4(e.a.latency_slowdown));
  o.require(e.a.bottleneck == resource::kIssueSlots, "bottleneck " + e.a.bottleneck);
  o.require(e.verdict == Verdict::kDegrading, std::string("verdict ") + std::string(to_string(e.verdict)));
  return o;
}

Outcome blocks() {
  Outcome o;
  const auto k132 = scenarios::nanosleep_kernel(h100(), 132);
  const auto e132 = estimate_pair(k132, k132, h100(), Placement::shared(), params());
  o.require(e132.residency == CoResidency::kConcurrent && e132.speedup >= kBlocksSpeedupMin,
            "132 blocks " + std::string(to_string(e132.residency)) + " speedup " + f4(e132.speedup));
  const auto k264 = scenarios::nanosleep_kernel(h100(), 264);
  const auto e264 = estimate_pair(k264, k264, h100(), Placement::shared(), params());
  const double rel = std::abs(e264.colocated_makespan - e264.sequential_makespan) / e264.sequential_makespan;
  o.require(e264.residency == CoResidency::kSerialized && rel <= kBlocksMakespanTol,
            "264 blocks " + std::string(to_string(e264.residency)) + " makespan/sequential " +
                f4(e264.colocated_makespan / e264.sequential_makespan));
  return o;
}

Outcome properties() {
  Outcome o;
  const std::pair<const char*, props::Result> suites[] = {
      {"(a) monotone", props::slowdowns_monotone(101, 2000)},
      {"(b) symmetric", props::estimate_symmetric(102, 1000)},
      {"(c) makespan bounds", props::makespan_bounded(103, 2000)},
      {"(d) partitioned invariance", props::partitioned_ignores_sm_metrics(104, 1000)},
      {"(e) occupancy enumeration", props::occupancy_matches_enumeration(105, 5000)},
  };
  for (const auto& [name, r] : suites) {
    o.require(r.ok(), std::string(name) + " " + std::to_string(r.cases) + " cases" +
                          (r.ok() ? "" : " counterexample " + r.counterexample));
  }
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"FP64 pipeline speedups", table4},
      {"issue-slot speedups", table3},
      {"bandwidth slowdowns after calibration", table2},
      {"L2 slowdown curve", fig2},
      {"L1 colocation benefit", fig3},
      {"roofline counterexample audit", pitfall1},
      {"occupancy-sum counterexample audit", pitfall2},
      {"matrix multiply pair", matmul},
      {"block scheduler co-residency", blocks},
      {"property suites", properties},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    if (!o.pass) ++failed;
    std::printf("criterion %zu: %s  %s  [%s]\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                o.detail.c_str());
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
