// SPDX-License-Identifier: Apache-2.0
//
// Implementations behind the CLI subcommands. Each returns a process exit
// code (0 success, 1 internal failure, 2 usage/validation error) and writes
// machine-readable output to the given stream, so tests can drive them
// without spawning processes.

#pragma once

#include "semd/core.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace semd {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUsage = 2;

struct EmdArgs {
  std::filesystem::path map_a, map_b, vec_a, vec_b;
  double lambda = 25.0;
  int iterations = 10;
  std::optional<std::vector<Index>> grids;
  bool exact = false;
};
int run_emd(const EmdArgs& args, std::ostream& out, std::ostream& err);

struct HeatmapArgs {
  std::filesystem::path map_a, map_b, vec_a, vec_b, out_csv;
  Index node_index = 0;
  double lambda = 25.0;
  // Converged plans make the exported rows honest marginals, so the default
  // iteration budget is generous and paired with an early exit.
  int iterations = 10000;
  bool exact = false;
};
int run_heatmap(const HeatmapArgs& args, std::ostream& out, std::ostream& err);

struct SinkhornBenchArgs {
  Index size = 5;
  std::vector<double> lambdas{1.0, 5.0, 25.0, 100.0, 200.0};
  std::vector<int> iteration_counts{1, 2, 5, 10, 50, 1000};
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> out_csv;
};
int run_sinkhorn_bench(const SinkhornBenchArgs& args, std::ostream& out, std::ostream& err);

struct OracleCheckArgs {
  int count = 100;
  Index max_n = 5;
  std::uint64_t seed = 0;
  double lambda = 200.0;
  int iterations = 1000;
};
int run_oracle_check(const OracleCheckArgs& args, std::ostream& out, std::ostream& err);

struct TrainArgs {
  std::filesystem::path config;
  std::filesystem::path out_dir = ".";
};
int run_train(const TrainArgs& args, std::ostream& out, std::ostream& err);

struct GenSyntheticArgs {
  Index count = 8;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
};
int run_gen_synthetic(const GenSyntheticArgs& args, std::ostream& out, std::ostream& err);

}  // namespace semd
