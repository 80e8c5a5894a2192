// Copyright 2026 The GCE Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "gce/json_io.hpp"
#include "gce/scenarios.hpp"

using namespace gce;

TEST(JsonIo, GpuSpecRoundTrip) {
  for (const auto& s : builtin_specs()) {
    const auto back = gpu_spec_from_json(to_json(s));
    EXPECT_EQ(to_json(back), to_json(s));
  }
}

TEST(JsonIo, GpuSpecAcceptsPlainPipelineNames) {
  auto j = to_json(h100_nvl());
  j["pipelines"] = json::array({"FMA", "FP64"});
  j.erase("partition_granularity");
  const auto s = gpu_spec_from_json(j);
  ASSERT_EQ(s.pipelines.size(), 2u);
  EXPECT_DOUBLE_EQ(s.pipelines[1].peak_util, 100.0);
  EXPECT_EQ(s.partition_granularity, 2);
}

TEST(JsonIo, GpuSpecRejectsUnknownAndInvalid) {
  auto j = to_json(h100_nvl());
  j["colour"] = "green";
  EXPECT_THROW(gpu_spec_from_json(j), ValidationError);
  j = to_json(h100_nvl());
  j["num_sms"] = 0;
  EXPECT_THROW(gpu_spec_from_json(j), ValidationError);
  j = to_json(h100_nvl());
  j["num_sms"] = 1.5;
  EXPECT_THROW(gpu_spec_from_json(j), ValidationError);
  j = to_json(h100_nvl());
  j.erase("l2_size");
  EXPECT_THROW(gpu_spec_from_json(j), ValidationError);
}

TEST(JsonIo, ProfileRoundTrip) {
  const auto p = scenarios::matmul_kernel(h100_nvl());
  const auto back = kernel_profile_from_json(to_json(p));
  EXPECT_EQ(to_json(back), to_json(p));
  EXPECT_EQ(back.roofline_bound, RooflineBound::kCompute);
}

TEST(JsonIo, ProfileRooflineOptional) {
  auto j = to_json(scenarios::copy_kernel(h100_nvl(), 132, 1024, 1e6, 50));
  j.erase("roofline_bound");
  EXPECT_EQ(kernel_profile_from_json(j).roofline_bound, RooflineBound::kUnknown);
  j["roofline_bound"] = "latency";
  EXPECT_THROW(kernel_profile_from_json(j), ValidationError);
}

TEST(JsonIo, CalibrationRoundTrip) {
  const auto& params = default_calibration();
  const auto back = calibration_params_from_json(to_json(params));
  EXPECT_EQ(to_json(back), to_json(params));
  ASSERT_NE(back.find("H100 NVL"), nullptr);
  EXPECT_TRUE(back.find("H100 NVL")->membw.has_value());
}

TEST(JsonIo, CalibrationRejectsBadValues) {
  json j = {{"gpus", {{"H100 NVL", {{"membw", {{"knee", 300.0}, {"slope", 0.01}}}}}}}};
  EXPECT_THROW(calibration_params_from_json(j), ValidationError);
  j = {{"gpus", {{"H100 NVL", {{"bogus", 1}}}}}};
  EXPECT_THROW(calibration_params_from_json(j), ValidationError);
}

TEST(JsonIo, ReferenceDatasetRoundTrip) {
  const auto& d = load_reference_tables();
  EXPECT_EQ(reference_dataset_from_json(to_json(d)), d);
}

TEST(JsonIo, ReadMissingFile) {
  EXPECT_THROW(read_json_file("/nonexistent/x.json"), ValidationError);
}
