// SPDX-License-Identifier: Apache-2.0

#include "semd/commands.hpp"

#include "semd/emd_loss.hpp"
#include "semd/exact_ot.hpp"
#include "semd/io.hpp"
#include "semd/sinkhorn.hpp"
#include "semd/synthetic.hpp"
#include "semd/train.hpp"

#include <algorithm>
#include <chrono>
#include <exception>

namespace semd {
namespace {

constexpr Index kTrainDatasetSize = 32;

int usage_error(std::ostream& err, const std::string& what) {
  err << "error: " << what << "\n";
  return kExitUsage;
}

// Embedding vectors travel as 1x1xC feature-map files.
EmbeddingVector load_vector(const std::filesystem::path& path) {
  const FeatureMap map = read_fmap(path);
  detail::require(map.height() == 1 && map.width() == 1,
                  path.string() + ": expected a 1x1xC vector file");
  return map.nodes().row(0).transpose();
}

struct LoadedPair {
  FeatureMap map_a;
  FeatureMap map_b;
  EmbeddingVector vec_a;
  EmbeddingVector vec_b;
};

LoadedPair load_pair(const std::filesystem::path& a, const std::filesystem::path& b,
                     const std::filesystem::path& va, const std::filesystem::path& vb) {
  LoadedPair pair{read_fmap(a), read_fmap(b), load_vector(va), load_vector(vb)};
  detail::require(pair.map_a.channels() == pair.map_b.channels() &&
                      pair.map_a.channels() == pair.vec_a.size() &&
                      pair.map_a.channels() == pair.vec_b.size(),
                  "channel dimensions of the two maps and vectors must match");
  return pair;
}

Vector random_normalized_marginals(Index n, Rng& rng) {
  Vector w(n);
  for (Index i = 0; i < n; ++i) w(i) = rng.uniform(0.05, 1.0);
  return w / w.sum();
}

CostMatrix random_cost(Index rows, Index cols, Rng& rng) {
  CostMatrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(0.0, 2.0);
  return m;
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const std::invalid_argument& e) {
    return usage_error(err, e.what());
  } catch (const ConfigError& e) {
    return usage_error(err, e.what());
  } catch (const IoError& e) {
    return usage_error(err, e.what());
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace

int run_emd(const EmdArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() {
    const LoadedPair pair = load_pair(args.map_a, args.map_b, args.vec_a, args.vec_b);

    LossConfig cfg;
    cfg.sinkhorn.lambda = args.lambda;
    cfg.sinkhorn.iterations = args.iterations;
    if (args.grids) cfg.pyramid = PyramidSpec{*args.grids};
    cfg.solver = args.exact ? PlanSolver::kExact : PlanSolver::kSinkhorn;

    const LossBreakdown lb =
        emd_loss(pair.map_a, pair.map_b, pair.vec_a, pair.vec_b, cfg);
    const double similarity = similarity_score(lb.plan, lb.cost);

    out << "nodes_x=" << lb.plan.rows() << "\n";
    out << "nodes_y=" << lb.plan.cols() << "\n";
    out << "solver=" << (args.exact ? "exact" : "sinkhorn") << "\n";
    out << "S=" << format_double(similarity) << "\n";
    out << "L_EMD=" << format_double(lb.emd_loss) << "\n";
    out << "plan_mass=" << format_double(lb.plan.pi.sum()) << "\n";
    out << "max_row_violation=" << format_double(max_row_violation(lb.plan, lb.weights_r))
        << "\n";
    out << "max_col_violation=" << format_double(max_col_violation(lb.plan, lb.weights_c))
        << "\n";
    return kExitOk;
  });
}

int run_heatmap(const HeatmapArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() {
    const LoadedPair pair = load_pair(args.map_a, args.map_b, args.vec_a, args.vec_b);

    // Matching weights on the raw grids (no pyramid): each exported row is
    // one crop-1 node's mass over crop 2.
    const NodeMatrix& nodes_x = flatten(pair.map_a);
    const NodeMatrix& nodes_y = flatten(pair.map_b);
    detail::require(args.node_index >= 0 && args.node_index < nodes_x.rows(),
                    "node index out of range");

    const CostMatrix cost = cost_matrix(nodes_x, nodes_y);
    const MarginalWeights r = marginal_weights(nodes_x, pair.vec_b);
    const MarginalWeights c = marginal_weights(nodes_y, pair.vec_a);

    Vector row;
    if (args.exact) {
      row = exact_ot(cost, r, c).plan.row(args.node_index).transpose();
    } else {
      SinkhornConfig scfg;
      scfg.lambda = args.lambda;
      scfg.iterations = args.iterations;
      scfg.early_exit_tol = 1e-9;
      row = sinkhorn(cost, r, c, scfg).pi.row(args.node_index).transpose();
    }

    Matrix grid(pair.map_b.height(), pair.map_b.width());
    for (Index i = 0; i < pair.map_b.height(); ++i)
      for (Index j = 0; j < pair.map_b.width(); ++j) grid(i, j) = row(i * pair.map_b.width() + j);
    write_grid_csv(grid, args.out_csv);

    out << "node_index=" << args.node_index << "\n";
    out << "row_sum=" << format_double(row.sum()) << "\n";
    out << "marginal_weight=" << format_double(r[args.node_index]) << "\n";
    out << "out=" << args.out_csv.string() << "\n";
    return kExitOk;
  });
}

int run_sinkhorn_bench(const SinkhornBenchArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() {
    detail::require(args.size >= 1, "size must be >= 1");
    detail::require(!args.lambdas.empty() && !args.iteration_counts.empty(),
                    "lambda and iteration lists must not be empty");
    const bool with_oracle = args.size <= kExactOtMaxSize;

    Rng rng(args.seed);
    const CostMatrix cost = random_cost(args.size, args.size, rng);
    const MarginalWeights r{random_normalized_marginals(args.size, rng)};
    const MarginalWeights c{random_normalized_marginals(args.size, rng)};
    const double exact_cost = with_oracle ? exact_ot(cost, r, c).cost : 0.0;

    std::string csv = "lambda,iterations,cost,exact_cost,gap,max_row_violation,"
                      "max_col_violation,seconds\n";
    std::vector<double> gaps_at_max_t;
    bool monotone_in_t = true;

    std::vector<int> iteration_counts = args.iteration_counts;
    std::sort(iteration_counts.begin(), iteration_counts.end());
    for (double lambda : args.lambdas) {
      double previous_violation = 0.0;
      bool first = true;
      for (int iterations : iteration_counts) {
        SinkhornConfig scfg;
        scfg.lambda = lambda;
        scfg.iterations = iterations;
        const auto start = std::chrono::steady_clock::now();
        const TransportPlan plan = sinkhorn(cost, r, c, scfg);
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;

        const double plan_cost = transport_cost(plan, cost);
        const double gap = with_oracle ? plan_cost - exact_cost : 0.0;
        const double row_violation = max_row_violation(plan, r);
        const double col_violation = max_col_violation(plan, c);
        csv += format_double(lambda) + "," + std::to_string(iterations) + "," +
               format_double(plan_cost) + "," + format_double(exact_cost) + "," +
               format_double(gap) + "," + format_double(row_violation) + "," +
               format_double(col_violation) + "," + format_double(elapsed.count()) + "\n";

        if (!first && row_violation > previous_violation + 1e-12) monotone_in_t = false;
        previous_violation = row_violation;
        first = false;
        if (iterations == iteration_counts.back() && with_oracle) gaps_at_max_t.push_back(gap);
      }
    }

    if (args.out_csv)
      write_text_atomic(csv, *args.out_csv);
    else
      out << csv;

    bool monotone_in_lambda = true;
    for (std::size_t i = 1; i < gaps_at_max_t.size(); ++i)
      if (gaps_at_max_t[i] > gaps_at_max_t[i - 1] + 1e-9) monotone_in_lambda = false;

    out << "row_violation_monotone_in_iterations=" << (monotone_in_t ? "true" : "false") << "\n";
    if (with_oracle)
      out << "gap_monotone_in_lambda=" << (monotone_in_lambda ? "true" : "false") << "\n";
    if (!monotone_in_t || !monotone_in_lambda) {
      err << "internal error: convergence monotonicity check failed\n";
      return kExitInternal;
    }
    return kExitOk;
  });
}

int run_oracle_check(const OracleCheckArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() {
    detail::require(args.count >= 1, "count must be >= 1");
    detail::require(args.max_n >= 2 && args.max_n <= kExactOtMaxSize,
                    "max-n must be in [2, 12]");

    Rng rng(args.seed);
    SinkhornConfig scfg;
    scfg.lambda = args.lambda;
    scfg.iterations = args.iterations;

    double worst_gap = 0.0;
    double worst_lower_bound_slack = 0.0;
    double worst_brute_error = 0.0;
    for (int i = 0; i < args.count; ++i) {
      const Index n = rng.uniform_int(2, args.max_n);
      const CostMatrix cost = random_cost(n, n, rng);
      const MarginalWeights r{random_normalized_marginals(n, rng)};
      const MarginalWeights c{random_normalized_marginals(n, rng)};

      const ExactSolution exact = exact_ot(cost, r, c);
      const TransportPlan plan = sinkhorn(cost, r, c, scfg);
      const double entropic_cost = transport_cost(plan, cost);
      worst_gap = std::max(worst_gap, std::abs(entropic_cost - exact.cost));
      // Certified lower bound: repairing the row marginals moves at most
      // their absolute violation in mass, at cost swing <= 2 per unit.
      const double repair = (plan.pi.rowwise().sum() - r.vector()).cwiseAbs().sum();
      worst_lower_bound_slack =
          std::max(worst_lower_bound_slack, exact.cost - entropic_cost - repair);

      if (n <= 4) {
        const MarginalWeights uniform = MarginalWeights::uniform(n);
        const double exact_uniform = exact_ot(cost, uniform, uniform).cost;
        const double brute = permutation_ot_cost(cost);
        worst_brute_error = std::max(worst_brute_error, std::abs(exact_uniform - brute));
      }
    }

    out << "instances=" << args.count << "\n";
    out << "max_entropic_gap=" << format_double(worst_gap) << "\n";
    out << "max_lower_bound_slack=" << format_double(worst_lower_bound_slack) << "\n";
    out << "max_brute_force_error=" << format_double(worst_brute_error) << "\n";

    const bool ok =
        worst_gap <= 0.02 && worst_lower_bound_slack <= 1e-9 && worst_brute_error <= 1e-12;
    out << "status=" << (ok ? "pass" : "fail") << "\n";
    if (!ok) {
      err << "internal error: oracle agreement out of tolerance\n";
      return kExitInternal;
    }
    return kExitOk;
  });
}

int run_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() {
    const TrainConfig cfg = read_run_config(args.config);
    cfg.validate();

    // The dataset stream is decoupled from the training stream so dataset
    // size changes cannot silently reshuffle initialization draws.
    Rng data_rng(cfg.seed ^ 0xD1B54A32D192ED03ULL);
    const std::vector<FeatureMap> dataset = synthetic_dataset(kTrainDatasetSize, data_rng);

    const auto start = std::chrono::steady_clock::now();
    const TrainResult result = train(cfg, dataset);
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;

    std::filesystem::create_directories(args.out_dir);
    const auto checkpoint_path = args.out_dir / "checkpoint.semd";
    const auto history_path = args.out_dir / "history.csv";
    write_checkpoint(result.theta, checkpoint_path);
    write_history_csv(result.history, history_path);

    out << "steps=" << cfg.steps << "\n";
    out << "seconds=" << format_double(elapsed.count()) << "\n";
    out << "checkpoint=" << checkpoint_path.string() << "\n";
    out << "history=" << history_path.string() << "\n";
    if (!result.history.empty()) {
      out << "first_total=" << format_double(result.history.front().total) << "\n";
      out << "last_total=" << format_double(result.history.back().total) << "\n";
    }
    return kExitOk;
  });
}

int run_gen_synthetic(const GenSyntheticArgs& args, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() {
    detail::require(args.count >= 0, "n must be >= 0");
    std::filesystem::create_directories(args.out_dir);
    Rng rng(args.seed);
    for (Index i = 0; i < args.count; ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "img_%04lld.fmap", static_cast<long long>(i));
      write_fmap(synthetic_image(rng), args.out_dir / name);
    }
    out << "written=" << args.count << "\n";
    out << "dir=" << args.out_dir.string() << "\n";
    return kExitOk;
  });
}

}  // namespace semd
