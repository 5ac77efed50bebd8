#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lwopt/dataset.hpp"
#include "lwopt/errors.hpp"
#include "lwopt/run.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  long long seed = -1;
  int threads = 0;
};

void add_common(CLI::App* cmd, CommonFlags* flags) {
  cmd->add_option("--config", flags->config_path, "JSON config file (see README)");
  cmd->add_option("--out", flags->out_dir, "output directory (overrides config)");
  cmd->add_option("--seed", flags->seed, "run seed (overrides config)");
  cmd->add_option("--threads", flags->threads, "worker threads (overrides config)");
}

lwopt::RunConfig load_config(const CommonFlags& flags) {
  lwopt::RunConfig cfg;
  if (!flags.config_path.empty()) {
    cfg = lwopt::run_config_from_json_file(flags.config_path);
  }
  if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
  if (flags.seed >= 0) cfg.seed = static_cast<std::uint64_t>(flags.seed);
  if (flags.threads > 0) cfg.threads = flags.threads;
  return cfg;
}

int run_train(const CommonFlags& flags) {
  lwopt::RunConfig cfg = load_config(flags);
  if (cfg.out_dir.empty()) cfg.out_dir = "out/train";
  const lwopt::RunResult result = lwopt::run_training(cfg);
  std::printf("status: %s\n",
              result.status == lwopt::RunStatus::completed ? "completed" : "diverged");
  std::printf("iters: %lld  initial loss: %.6g  final loss: %.6g\n",
              static_cast<long long>(result.iters_run), result.initial_full_loss,
              result.final_full_loss);
  std::printf("wrote %s and %s\n", result.csv_path.c_str(), result.manifest_path.c_str());
  std::printf("wall time: %.2f s\n", result.wall_seconds);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Layer-wise stochastic-optimization laboratory: mGD/mNAG/LARS/CLARS "
      "training, constant estimators and convergence-bound validation"};
  app.require_subcommand(1);

  CommonFlags train_flags;
  CLI::App* train = app.add_subcommand("train", "run one training experiment");
  add_common(train, &train_flags);

  CommonFlags sweep_flags;
  int sweep_layer = 1;
  std::vector<double> sweep_grid{1e-2, 1e-1, 1.0, 10.0, 1e2, 1e3, 1e4, 1e5};
  double sweep_target = 0.03;
  int sweep_budget = 1000;
  CLI::App* sweep = app.add_subcommand(
      "sweep-lr", "per-layer learning-rate sweep (epochs to reach a target loss)");
  add_common(sweep, &sweep_flags);
  sweep->add_option("--layer", sweep_layer, "1-based layer to sweep")->required();
  sweep->add_option("--grid", sweep_grid, "learning-rate grid");
  sweep->add_option("--target-loss", sweep_target, "training-loss target");
  sweep->add_option("--max-epochs", sweep_budget, "epoch budget per grid point");

  CommonFlags track_flags;
  int track_epochs = 10;
  CLI::App* track = app.add_subcommand(
      "track-mk", "train an FCN at a constant rate and log per-epoch M_k ratios");
  add_common(track, &track_flags);
  track->add_option("--epochs", track_epochs, "epochs to track");

  CommonFlags warmup_flags;
  std::vector<int> warmup_list{5, 10, 20};
  int warmup_total = 20;
  CLI::App* warmup = app.add_subcommand(
      "compare-warmup", "LARS with gradual warmup vs CLARS at constant scale");
  add_common(warmup, &warmup_flags);
  warmup->add_option("--warmup-epochs", warmup_list, "warmup lengths, one LARS arm each");
  warmup->add_option("--total-epochs", warmup_total, "epochs per arm");

  CommonFlags bounds_flags;
  lwopt::VerifyBoundsOptions bounds_options;
  CLI::App* bounds = app.add_subcommand(
      "verify-bounds", "validate the mGD/mNAG convergence bounds on the quadratic oracle");
  add_common(bounds, &bounds_flags);
  bounds->add_option("--betas", bounds_options.betas, "momentum grid");
  bounds->add_option("--batches", bounds_options.batches, "batch-size grid");
  bounds->add_option("--cap-fractions", bounds_options.cap_fractions,
                     "fractions of the admissible-rate cap");
  bounds->add_option("--seeds", bounds_options.seeds, "seeds per grid point");
  bounds->add_option("--iters", bounds_options.iters, "iterations per run");
  bounds->add_option("--rhs-scale", bounds_options.rhs_scale,
                     "test hook: scale the bound before comparing");

  std::string mnist_images, mnist_labels;
  CLI::App* mnist_check = app.add_subcommand(
      "fetch-mnist-check", "validate local MNIST IDX files (reads them, no network)");
  mnist_check->add_option("--images", mnist_images, "IDX image file")->required();
  mnist_check->add_option("--labels", mnist_labels, "IDX label file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return run_train(train_flags);

    if (sweep->parsed()) {
      lwopt::RunConfig cfg = load_config(sweep_flags);
      if (cfg.out_dir.empty()) cfg.out_dir = "out/sweep";
      const auto result = lwopt::sweep_layer_lr(cfg, sweep_layer - 1, sweep_grid,
                                                sweep_target, sweep_budget);
      for (const auto& entry : result.entries) {
        const char* outcome =
            entry.outcome == lwopt::SweepEntry::Outcome::converged ? "converged"
            : entry.outcome == lwopt::SweepEntry::Outcome::diverged ? "diverged"
                                                                    : "exceeded-budget";
        std::printf("layer %d  gamma %.3g  %s", entry.layer + 1, entry.gamma, outcome);
        if (entry.outcome == lwopt::SweepEntry::Outcome::converged) {
          std::printf(" after %d epochs", entry.epochs);
        }
        std::printf("\n");
      }
      std::printf("wrote %s\n", result.csv_path.c_str());
      return 0;
    }

    if (track->parsed()) {
      lwopt::RunConfig cfg = load_config(track_flags);
      if (cfg.out_dir.empty()) cfg.out_dir = "out/track-mk";
      if (cfg.problem != lwopt::ProblemKind::fcn) cfg.problem = lwopt::ProblemKind::fcn;
      if (cfg.beta == 0.0) cfg.beta = 0.9;  // the tracking protocol uses mNAG
      const auto result = lwopt::track_mk(cfg, track_epochs);
      std::printf("tracked %zu epochs (%s)\n", result.per_epoch.size(),
                  result.status == lwopt::RunStatus::completed ? "completed" : "diverged");
      std::printf("wrote %s\n", result.csv_path.c_str());
      return 0;
    }

    if (warmup->parsed()) {
      lwopt::RunConfig cfg = load_config(warmup_flags);
      if (cfg.out_dir.empty()) cfg.out_dir = "out/compare-warmup";
      if (cfg.problem != lwopt::ProblemKind::fcn) cfg.problem = lwopt::ProblemKind::fcn;
      const auto result = lwopt::compare_warmup(cfg, warmup_list, warmup_total);
      for (const auto& arm : result.arms) {
        std::printf("%-10s %s  initial %.6g  final %.6g\n", arm.name.c_str(),
                    arm.status == lwopt::RunStatus::completed ? "completed" : "diverged ",
                    arm.epoch_loss.front(), arm.final_loss);
      }
      std::printf("wrote %zu arm files under %s\n", result.csv_paths.size(),
                  cfg.out_dir.c_str());
      return 0;
    }

    if (bounds->parsed()) {
      lwopt::RunConfig cfg = load_config(bounds_flags);
      if (cfg.out_dir.empty()) cfg.out_dir = "out/verify-bounds";
      const auto result = lwopt::verify_bounds(cfg, bounds_options);
      for (std::size_t i = 0; i < result.reports.size(); ++i) {
        const auto& r = result.reports[i];
        std::printf("beta %.2f  B %4d  gamma %.4g  lhs %.4g  rhs %.4g  %s\n", r.beta,
                    r.batch, r.gamma, r.lhs, r.rhs,
                    result.satisfied_scaled[i] ? "satisfied" : "VIOLATED");
      }
      std::printf("%s\n", result.all_satisfied ? "all bounds satisfied"
                                               : "bound violation detected");
      return result.all_satisfied ? 0 : 1;
    }

    if (mnist_check->parsed()) {
      const lwopt::Dataset data = lwopt::load_mnist_idx(mnist_images, mnist_labels);
      std::printf("ok: %d samples, %d features each, %d classes\n", data.size(),
                  data.feature_dim, data.num_classes);
      return 0;
    }
  } catch (const lwopt::parse_error& e) {
    std::fprintf(stderr, "parse error: %s\n", e.what());
    return 1;
  } catch (const lwopt::config_error& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
