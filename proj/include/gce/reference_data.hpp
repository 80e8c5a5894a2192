// Copyright 2026 The GCE Authors
// SPDX-License-Identifier: Apache-2.0

// Measured colocation results used for calibration and reproduction checks.
// Values are stored exactly as measured; the dataset is read-only.

#pragma once

#include <string>
#include <vector>

#include "gce/gpu_model.hpp"

namespace gce {

/// Copy kernel vs. copy kernel on disjoint 50% SM partitions.
struct BandwidthRow {
  std::string gpu;
  int thread_blocks = 0;
  double membw_util = 0.0;  // percent of highest achieved bandwidth, per kernel
  double slowdown = 1.0;    // colocated / alone

  friend bool operator==(const BandwidthRow&, const BandwidthRow&) = default;
};

/// Copy (IPC 0.61) colocated with a compute kernel of rising IPC.
struct IpcRow {
  std::string scenario;
  double compute_ipc = 0.0;
  double speedup = 1.0;  // sequential / colocated

  friend bool operator==(const IpcRow&, const IpcRow&) = default;
};

/// Two identical FP64 compute kernels.
struct PipelineRow {
  std::string scenario;
  double compute_ipc = 0.0;
  double fp64_util = 0.0;
  double speedup = 1.0;

  friend bool operator==(const PipelineRow&, const PipelineRow&) = default;
};

struct L2Peak {
  double array_size_bytes = 0.0;
  double slowdown = 1.0;

  friend bool operator==(const L2Peak&, const L2Peak&) = default;
};

struct L1Inflections {
  double sequential_bytes = 0.0;
  double colocated_bytes = 0.0;

  friend bool operator==(const L1Inflections&, const L1Inflections&) = default;
};

struct PitfallFactors {
  double roofline_copy_slowdown = 0.0;   // copy beside an IPC-4 compute kernel
  double occupancy_mps_slowdown = 0.0;   // compute restricted to its occupancy share of SMs
  double occupancy_shared_slowdown = 0.0;
  double achieved_occupancy = 0.0;       // percent, per compute kernel

  friend bool operator==(const PitfallFactors&, const PitfallFactors&) = default;
};

struct MatmulExample {
  double ipc = 0.0;
  double fma_util = 0.0;
  double slowdown = 1.0;

  friend bool operator==(const MatmulExample&, const MatmulExample&) = default;
};

struct ReferenceDataset {
  std::vector<BandwidthRow> table2;
  std::vector<IpcRow> table3;
  double table3_copy_ipc = 0.0;
  std::vector<PipelineRow> table4;
  L2Peak fig2_peak;
  L1Inflections fig3_inflections;
  PitfallFactors pitfalls;
  MatmulExample mm_example;

  [[nodiscard]] std::vector<BandwidthRow> table2_for(const std::string& gpu) const {
    std::vector<BandwidthRow> out;
    for (const auto& r : table2) {
      if (r.gpu == gpu) out.push_back(r);
    }
    return out;
  }

  friend bool operator==(const ReferenceDataset&, const ReferenceDataset&) = default;
};

inline const ReferenceDataset& load_reference_tables() {
  static const ReferenceDataset data = [] {
    ReferenceDataset d;
    d.table2 = {
        {"H100 NVL", 33, 21.33, 1.06}, {"H100 NVL", 66, 40.12, 1.14},
        {"H100 NVL", 99, 55.06, 1.23}, {"H100 NVL", 132, 69.18, 1.36},
        {"RTX3090", 10, 24.48, 1.06},  {"RTX3090", 20, 45.34, 1.27},
        {"RTX3090", 40, 71.96, 1.61},  {"RTX3090", 80, 90.69, 1.91},
    };
    d.table3 = {
        {"S1", 1.08, 1.915}, {"S2", 2.06, 1.896}, {"S3", 2.9, 1.893}, {"S4", 3.45, 1.65}, {"S5", 4.0, 1.001},
    };
    d.table3_copy_ipc = 0.61;
    d.table4 = {
        {"S1", 0.51, 24.96, 1.988},
        {"S2", 1.02, 49.32, 1.977},
        {"S3", 1.53, 72.99, 1.356},
        {"S4", 2.01, 96.59, 1.018},
    };
    d.fig2_peak = {22.5 * static_cast<double>(MiB), 1.79};
    d.fig3_inflections = {108.0 * static_cast<double>(KiB), 54.0 * static_cast<double>(KiB)};
    d.pitfalls = {2.0, 15.8, 1.85, 6.25};
    d.mm_example = {3.0, 60.0, 1.7};
    return d;
  }();
  return data;
}

}  // namespace gce
