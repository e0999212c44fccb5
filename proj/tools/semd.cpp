// SPDX-License-Identifier: Apache-2.0
//
// semd - feature-map similarity via entropic optimal transport, plus the toy
// self-supervised training harness. See README.md for examples.

#include "semd/commands.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <vector>

int main(int argc, char** argv) {
  CLI::App app{"Earth Mover's Distance between feature maps, Sinkhorn solver "
               "benchmarks, and a toy self-supervised trainer"};
  app.require_subcommand(1);

  semd::EmdArgs emd_args;
  std::vector<long long> emd_grids;
  auto* emd = app.add_subcommand("emd", "similarity and loss between two feature maps");
  emd->add_option("map_a", emd_args.map_a, "first feature map (.fmap)")->required();
  emd->add_option("map_b", emd_args.map_b, "second feature map (.fmap)")->required();
  emd->add_option("vec_a", emd_args.vec_a, "first embedding vector (1x1xC .fmap)")->required();
  emd->add_option("vec_b", emd_args.vec_b, "second embedding vector (1x1xC .fmap)")->required();
  emd->add_option("--lambda", emd_args.lambda, "regularization intensity");
  emd->add_option("--iters", emd_args.iterations, "Sinkhorn iterations");
  emd->add_option("--grids", emd_grids, "pyramid grid sizes, e.g. --grids 7 5 3")
      ->delimiter(',');
  emd->add_flag("--exact", emd_args.exact, "use the exact transportation-simplex solver");

  semd::HeatmapArgs heat_args;
  auto* heatmap = app.add_subcommand("heatmap", "export one node's matching weights as CSV");
  heatmap->add_option("map_a", heat_args.map_a, "crop-1 feature map")->required();
  heatmap->add_option("map_b", heat_args.map_b, "crop-2 feature map")->required();
  heatmap->add_option("vec_a", heat_args.vec_a, "crop-1 embedding vector")->required();
  heatmap->add_option("vec_b", heat_args.vec_b, "crop-2 embedding vector")->required();
  heatmap->add_option("--node", heat_args.node_index, "crop-1 node index")->required();
  heatmap->add_option("--out", heat_args.out_csv, "output CSV path")->required();
  heatmap->add_option("--lambda", heat_args.lambda, "regularization intensity");
  heatmap->add_option("--iters", heat_args.iterations, "Sinkhorn iteration cap");
  heatmap->add_flag("--exact", heat_args.exact, "use the exact solver");

  semd::SinkhornBenchArgs bench_args;
  std::filesystem::path bench_out;
  auto* bench = app.add_subcommand("sinkhorn-bench",
                                   "entropic gap and marginal violation vs iterations");
  bench->add_option("--size", bench_args.size, "problem size n");
  bench->add_option("--lambda", bench_args.lambdas, "lambda values")->delimiter(',');
  bench->add_option("--iters", bench_args.iteration_counts, "iteration counts")->delimiter(',');
  bench->add_option("--seed", bench_args.seed, "instance seed");
  auto* bench_out_opt = bench->add_option("--out", bench_out, "CSV output path");

  semd::OracleCheckArgs oracle_args;
  auto* oracle = app.add_subcommand("oracle-check",
                                    "compare Sinkhorn against the exact solver and brute force");
  oracle->add_option("--count", oracle_args.count, "number of random instances");
  oracle->add_option("--max-n", oracle_args.max_n, "largest problem size");
  oracle->add_option("--seed", oracle_args.seed, "rng seed");
  oracle->add_option("--lambda", oracle_args.lambda, "regularization intensity");
  oracle->add_option("--iters", oracle_args.iterations, "Sinkhorn iterations");

  semd::TrainArgs train_args;
  auto* train = app.add_subcommand("train", "run the toy self-supervised training loop");
  train->add_option("config", train_args.config, "run config (key=value lines)")->required();
  train->add_option("--out-dir", train_args.out_dir, "output directory");

  semd::GenSyntheticArgs gen_args;
  auto* gen = app.add_subcommand("gen-synthetic", "write synthetic training images");
  gen->add_option("--n", gen_args.count, "number of images")->required();
  gen->add_option("--seed", gen_args.seed, "rng seed");
  gen->add_option("--out", gen_args.out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? semd::kExitOk : semd::kExitUsage;
  }

  if (*emd) {
    if (!emd_grids.empty())
      emd_args.grids = std::vector<semd::Index>(emd_grids.begin(), emd_grids.end());
    return semd::run_emd(emd_args, std::cout, std::cerr);
  }
  if (*heatmap) return semd::run_heatmap(heat_args, std::cout, std::cerr);
  if (*bench) {
    if (*bench_out_opt) bench_args.out_csv = bench_out;
    return semd::run_sinkhorn_bench(bench_args, std::cout, std::cerr);
  }
  if (*oracle) return semd::run_oracle_check(oracle_args, std::cout, std::cerr);
  if (*train) return semd::run_train(train_args, std::cout, std::cerr);
  if (*gen) return semd::run_gen_synthetic(gen_args, std::cout, std::cerr);
  return semd::kExitUsage;
}
