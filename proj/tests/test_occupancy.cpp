// Copyright 2026 The GCE Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "gce/occupancy.hpp"

using namespace gce;

namespace {

KernelProfile launch(std::int64_t grid, std::int64_t threads, std::int64_t regs = 0, std::int64_t smem = 0) {
  KernelProfile p;
  p.name = "k";
  p.grid_blocks = grid;
  p.threads_per_block = threads;
  p.registers_per_thread = regs;
  p.shared_mem_per_block = smem;
  return p;
}

// Does a mix of blocks fit on one SM? Counted block by block.
bool fits(const GpuSpec& s, const std::vector<std::pair<const KernelProfile*, std::int64_t>>& mix) {
  std::int64_t threads = 0, blocks = 0, regs = 0, smem = 0;
  for (const auto& [p, n] : mix) {
    const std::int64_t warps = (p->threads_per_block + 31) / 32;
    for (std::int64_t i = 0; i < n; ++i) {
      threads += warps * 32;
      blocks += 1;
      regs += warps * 32 * p->registers_per_thread;
      smem += p->shared_mem_per_block;
    }
  }
  return threads <= s.max_threads_per_sm && blocks <= s.max_blocks_per_sm && regs <= s.registers_per_sm &&
         smem <= s.shared_mem_per_sm;
}

std::int64_t brute_force_max(const GpuSpec& s, const KernelProfile& p) {
  std::int64_t n = 0;
  while (fits(s, {{&p, n + 1}})) ++n;
  return n;
}

GpuSpec small_spec(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::int64_t> warps(2, 64), blocks(1, 32), regs_k(4, 64), smem_k(0, 96);
  GpuSpec s = h100_nvl();
  s.name = "random";
  s.num_sms = std::uniform_int_distribution<std::int64_t>(1, 16)(rng);
  s.max_threads_per_sm = 32 * warps(rng);
  s.max_blocks_per_sm = blocks(rng);
  s.registers_per_sm = 1024 * regs_k(rng);
  s.shared_mem_per_sm = 1024 * smem_k(rng) + 1;
  return s;
}

KernelProfile random_kernel(std::mt19937_64& rng, const GpuSpec& s) {
  const std::int64_t max_t = std::min<std::int64_t>(1024, s.max_threads_per_sm);
  return launch(std::uniform_int_distribution<std::int64_t>(1, 200)(rng),
                std::uniform_int_distribution<std::int64_t>(1, max_t)(rng),
                std::uniform_int_distribution<std::int64_t>(0, 128)(rng),
                std::uniform_int_distribution<std::int64_t>(0, 48 * 1024)(rng));
}

}  // namespace

TEST(BlocksPerSm, ThreadBound) {
  const auto l = blocks_per_sm(launch(264, 1024, 16), h100_nvl());
  EXPECT_EQ(l.effective, 2);
  EXPECT_EQ(l.binding_constraint, OccupancyConstraint::kThreads);
}

TEST(BlocksPerSm, RegisterBound) {
  const auto l = blocks_per_sm(launch(128, 128, 128), h100_nvl());
  EXPECT_EQ(l.limit_registers, 4);
  EXPECT_EQ(l.effective, 4);
  EXPECT_EQ(l.binding_constraint, OccupancyConstraint::kRegisters);
}

TEST(BlocksPerSm, SharedMemoryBound) {
  const auto l = blocks_per_sm(launch(128, 64, 0, 100 * KiB), h100_nvl());
  EXPECT_EQ(l.effective, 2);
  EXPECT_EQ(l.binding_constraint, OccupancyConstraint::kSharedMem);
}

TEST(BlocksPerSm, BlockLimitBindsSmallBlocks) {
  const auto l = blocks_per_sm(launch(1000, 32), h100_nvl());
  EXPECT_EQ(l.effective, 32);
  EXPECT_EQ(l.binding_constraint, OccupancyConstraint::kBlocks);
}

TEST(BlocksPerSm, OversizedBlockRejected) {
  EXPECT_THROW(blocks_per_sm(launch(1, 2048), h100_nvl()), ValidationError);
}

TEST(BlocksPerSm, ZeroWhenOneBlockDoesNotFit) {
  const auto l = blocks_per_sm(launch(1, 256, 0, 300 * KiB), h100_nvl());
  EXPECT_EQ(l.effective, 0);
  EXPECT_THROW(waves(launch(1, 256, 0, 300 * KiB), h100_nvl(), 132), ValidationError);
}

TEST(BlocksPerSm, MatchesBruteForceOnRandomSpecs) {
  std::mt19937_64 rng(1234);
  for (int i = 0; i < 2000; ++i) {
    const auto s = small_spec(rng);
    const auto p = random_kernel(rng, s);
    ASSERT_EQ(blocks_per_sm(p, s).effective, brute_force_max(s, p))
        << "threads " << p.threads_per_block << " regs " << p.registers_per_thread << " smem "
        << p.shared_mem_per_block;
  }
}

TEST(Residency, SpreadsGridAcrossSms) {
  const auto s = h100_nvl();
  EXPECT_EQ(steady_state_residency(launch(132, 1024), s), 1);
  EXPECT_EQ(steady_state_residency(launch(264, 1024), s), 2);
  EXPECT_EQ(steady_state_residency(launch(1000, 1024), s), 2);
  EXPECT_EQ(steady_state_residency(launch(10, 128), s, 2), 5);
}

TEST(Waves, CountsRounds) {
  const auto s = h100_nvl();
  EXPECT_DOUBLE_EQ(waves(launch(264, 1024), s, 132), 1.0);
  EXPECT_DOUBLE_EQ(waves(launch(528, 1024), s, 132), 2.0);
  EXPECT_DOUBLE_EQ(waves(launch(529, 1024), s, 132), 529.0 / 264.0);
  EXPECT_DOUBLE_EQ(waves(launch(132, 128), s, 132), 0.0625);
  EXPECT_DOUBLE_EQ(waves(launch(132, 128), s, 8), 1.03125);
  EXPECT_THROW(waves(launch(1, 1024), s, 0), ValidationError);
}

TEST(WaveTime, AtLeastOne) {
  EXPECT_DOUBLE_EQ(wave_time(10, 1, 132), 1.0);
  EXPECT_DOUBLE_EQ(wave_time(264, 1, 132), 2.0);
  EXPECT_THROW(wave_time(10, 0, 132), ValidationError);
}

TEST(CoResidency, NanosleepOneBlockPerSmConcurrent) {
  const auto k = launch(132, 1024, 8);
  EXPECT_EQ(co_residency(k, k, h100_nvl()), CoResidency::kConcurrent);
}

TEST(CoResidency, NanosleepTwoBlocksPerSmSerialized) {
  const auto k = launch(264, 1024, 8);
  EXPECT_EQ(co_residency(k, k, h100_nvl()), CoResidency::kSerialized);
}

TEST(CoResidency, SmallHostLeavesRoomPartially) {
  // 66 full-SM blocks fill half the GPU; the guest finds free SMs.
  const auto host = launch(66, 1024, 8);
  const auto guest = launch(264, 1024, 8);
  EXPECT_EQ(co_residency(guest, host, h100_nvl()), CoResidency::kPartial);
}

TEST(CoResidency, BesideMatchesBruteForce) {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 1000; ++i) {
    const auto s = small_spec(rng);
    const auto host = random_kernel(rng, s);
    const auto guest = random_kernel(rng, s);
    if (blocks_per_sm(host, s).effective == 0) continue;
    const std::int64_t n = steady_state_residency(host, s);
    std::int64_t m = 0;
    while (fits(s, {{&host, n}, {&guest, m + 1}})) ++m;
    ASSERT_EQ(blocks_fitting_beside(host, guest, s), m);
  }
}

TEST(Partition, FloorsToGranularity) {
  const auto s = h100_nvl();
  EXPECT_EQ(partition_sms(s, 50.0).sms, 66);
  EXPECT_EQ(partition_sms(s, 6.25).sms, 8);  // 8.25 -> 8
  EXPECT_EQ(partition_sms(s, 10.0).sms, 12);  // 13.2 -> 13 -> 12
  EXPECT_FALSE(partition_sms(s, 6.25).clamped);
}

TEST(Partition, ClampsToOneGranule) {
  const auto p = partition_sms(h100_nvl(), 0.5);
  EXPECT_EQ(p.sms, 2);
  EXPECT_TRUE(p.clamped);
  EXPECT_THROW(partition_sms(h100_nvl(), 0.0), ValidationError);
  EXPECT_THROW(partition_sms(h100_nvl(), 100.5), ValidationError);
}
