// Copyright 2026 The GCE Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "gce/policy.hpp"
#include "gce/scenarios.hpp"

using namespace gce;

namespace {

const GpuSpec& h100() {
  static const GpuSpec s = h100_nvl();
  return s;
}

Workload single(std::string id, double slack, KernelProfile k) {
  k.name = id;
  return {std::move(id), slack, {{std::move(k), 1.0}}};
}

KernelProfile light(double ipc) { return scenarios::compute_kernel(h100(), 132, 128, ipc); }

}  // namespace

TEST(Plan, PairsCompatibleWorkloads) {
  const std::vector<Workload> ws = {single("a", 1.1, light(0.5)), single("b", 1.1, light(0.5))};
  const auto p = plan(ws, h100(), Placement::shared(), default_calibration());
  ASSERT_EQ(p.entries.size(), 1u);
  EXPECT_EQ(p.gpus_saved, 1);
  EXPECT_DOUBLE_EQ(p.entries[0].predicted_slowdown[0], 1.0);
}

TEST(Plan, RespectsSlack) {
  const std::vector<Workload> ws = {single("a", 1.2, light(3.0)), single("b", 1.2, light(3.0))};
  const auto p = plan(ws, h100(), Placement::shared(), default_calibration());
  EXPECT_EQ(p.gpus_saved, 0);
  ASSERT_EQ(p.entries.size(), 2u);
  EXPECT_EQ(p.entries[0].ids, std::vector<std::string>{"a"});
}

TEST(Plan, PrefersLargestResidualSlack) {
  // a+b keeps 0.75 of residual slack; any pair involving c or d keeps 0.5.
  const std::vector<Workload> ws = {single("a", 2.0, light(2.5)), single("b", 2.0, light(2.5)),
                                    single("c", 1.5, light(0.2)), single("d", 1.5, light(0.2))};
  const auto p = plan(ws, h100(), Placement::shared(), default_calibration());
  ASSERT_EQ(p.entries.size(), 2u);
  EXPECT_EQ(p.entries[0].ids, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(p.gpus_saved, 2);
}

TEST(Plan, EveryWorkloadPlacedOnceAndWithinSlack) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ipc(0.05, 3.5), slack(1.0, 2.0);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Workload> ws;
    for (int i = 0; i < 7; ++i) ws.push_back(single("w" + std::to_string(i), slack(rng), light(ipc(rng))));
    const auto p = plan(ws, h100(), Placement::shared(), default_calibration());
    std::multiset<std::string> seen;
    for (const auto& e : p.entries) {
      for (std::size_t k = 0; k < e.ids.size(); ++k) {
        seen.insert(e.ids[k]);
        EXPECT_LE(e.predicted_slowdown[k], e.slack[k] + 1e-12);
      }
    }
    EXPECT_EQ(seen.size(), ws.size());
    for (const auto& w : ws) EXPECT_EQ(seen.count(w.id), 1u);
  }
}

TEST(Plan, DeterministicUnderInputOrder) {
  std::vector<Workload> ws = {single("a", 1.5, light(1.0)), single("b", 1.5, light(1.0)), single("c", 1.5, light(1.0)),
                              single("d", 1.5, light(1.0))};
  const auto first = plan(ws, h100(), Placement::shared(), default_calibration());
  std::reverse(ws.begin(), ws.end());
  const auto second = plan(ws, h100(), Placement::shared(), default_calibration());
  ASSERT_EQ(first.entries.size(), second.entries.size());
  for (std::size_t i = 0; i < first.entries.size(); ++i) {
    auto x = first.entries[i].ids;
    auto y = second.entries[i].ids;
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    EXPECT_EQ(x, y);
  }
}

TEST(Plan, Validation) {
  EXPECT_THROW(plan({single("a", 1.5, light(1.0)), single("a", 1.5, light(1.0))}, h100(), Placement::shared(),
                    default_calibration()),
               ValidationError);
  EXPECT_THROW(plan({single("a", 0.9, light(1.0))}, h100(), Placement::shared(), default_calibration()),
               ValidationError);
}

TEST(Baselines, Roofline) {
  auto c = light(1.0);
  auto m = scenarios::copy_kernel(h100(), 132, 1024, 1e9, 60);
  EXPECT_TRUE(baseline_roofline(c, m));
  EXPECT_FALSE(baseline_roofline(c, c));
  c.roofline_bound = RooflineBound::kUnknown;
  EXPECT_THROW(baseline_roofline(c, m), ValidationError);
}

TEST(Baselines, OccupancySum) {
  auto a = light(1.0);
  auto b = light(1.0);
  EXPECT_TRUE(baseline_occupancy_sum(a, b));
  a.achieved_occupancy = 60.0;
  b.achieved_occupancy = 40.0;
  EXPECT_FALSE(baseline_occupancy_sum(a, b));
}

TEST(Audit, RooflineCounterexample) {
  const auto r = audit(scenarios::compute_kernel(h100(), 132, 1024, 4.0),
                       scenarios::copy_kernel(h100(), 132, 1024, 4.0 * GiB, 69.18), h100(), default_calibration());
  ASSERT_TRUE(r.roofline_colocates.has_value());
  EXPECT_TRUE(*r.roofline_colocates);
  ASSERT_FALSE(r.disagreements.empty());
  EXPECT_EQ(r.disagreements[0].baseline, "roofline");
  EXPECT_NE(r.disagreements[0].reason.find("serialization"), std::string::npos);
}

TEST(Audit, OccupancySumCounterexample) {
  const auto k = light(3.45);
  const auto r = audit(k, k, h100(), default_calibration());
  EXPECT_TRUE(r.occupancy_sum_colocates);
  ASSERT_TRUE(r.restricted_a.has_value());
  const bool flagged = std::any_of(r.disagreements.begin(), r.disagreements.end(),
                                   [](const Disagreement& d) { return d.baseline == "occupancy_sum"; });
  EXPECT_TRUE(flagged);
}

TEST(Audit, MissingRooflineTagIsNoted) {
  auto k = light(0.2);
  k.roofline_bound = RooflineBound::kUnknown;
  const auto r = audit(k, k, h100(), default_calibration());
  EXPECT_FALSE(r.roofline_colocates.has_value());
  ASSERT_FALSE(r.notes.empty());
}

TEST(Audit, AgreesOnBenignPair) {
  auto k = light(0.5);
  k.achieved_occupancy = 60.0;
  const auto r = audit(k, k, h100(), default_calibration());
  EXPECT_TRUE(r.disagreements.empty());
}
