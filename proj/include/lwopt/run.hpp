#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lwopt/dataset.hpp"
#include "lwopt/estimators.hpp"
#include "lwopt/fcn.hpp"
#include "lwopt/quadratic.hpp"
#include "lwopt/rates.hpp"
#include "lwopt/theory.hpp"

namespace lwopt {

enum class ProblemKind { quadratic, fcn };
enum class DataKind { blobs, mnist };
enum class Method { mgd, mnag, lars, clars, lipschitz_scaled };
enum class RunStatus { completed, diverged };

struct BlobsSpec {
  int n = 4096;
  int dim = 32;
  int classes = 10;
  double spread = 1.0;
  std::uint64_t seed = 1;
};

/// One experiment. The run seed controls only the batch order; the problem
/// seeds pin the data and the initial point, so bound-validation runs share
/// w0 across seeds.
struct RunConfig {
  ProblemKind problem = ProblemKind::quadratic;
  QuadraticSpec quadratic{{4, 4}, {1.0, 4.0}, 2048, {0.5, 0.5}, 7};
  FcnSpec fcn;  // layer_dims empty = derive from the dataset
  DataKind data = DataKind::blobs;
  BlobsSpec blobs;
  std::string mnist_images;
  std::string mnist_labels;

  Method method = Method::mgd;
  RateConfig rates;    // schedule + eta for lars/clars/mgd/mnag
  double beta = 0.0;
  double gamma = 0.0;  // mgd/mnag: constant uniform rate when > 0 (otherwise
                       // the schedule applies); lipschitz_scaled: the scalar
                       // of gamma_k = gamma / L_k
  int batch = 128;
  int epochs = 0;      // exactly one of epochs/iters must be > 0
  std::int64_t iters = 0;
  std::uint64_t seed = 1;
  std::string out_dir;  // empty = keep results in memory only
  MkMethod mk_method = MkMethod::sampled;
  int subsample = 512;  // |J_t| for the sampled estimator (clamped to B)
  int log_every = 0;    // 0 = 1 for quadratic, 50 for fcn
  int threads = 0;      // 0 = leave the pool unchanged; execution knob, not
                        // echoed into output files
  double w0_offset = 1.0;  // quadratic: w0 = mu + offset * seeded normals
};

RunConfig run_config_from_json(const std::string& text);
RunConfig run_config_from_json_file(const std::string& path);
std::string run_config_to_json(const RunConfig& cfg);

struct RunRow {
  std::int64_t iter = 0;
  std::int64_t epoch = 0;
  std::optional<double> loss;  // absent = diverged marker
  std::vector<std::optional<double>> gamma;  // absent = undefined (layer skipped)
  std::vector<double> weight_norm;
  std::vector<double> grad_norm;
  std::vector<std::optional<double>> mk;  // absent = undefined
  double metric_partial = 0.0;
};

struct RunResult {
  RunStatus status = RunStatus::completed;
  std::int64_t iters_run = 0;
  std::int64_t epochs_run = 0;
  double initial_full_loss = 0.0;
  double final_full_loss = 0.0;  // NaN after divergence
  double metric_final = 0.0;
  std::int64_t undefined_rate_events = 0;
  std::int64_t zero_weight_rate_events = 0;
  std::vector<RunRow> rows;
  std::string csv_path;       // written files, empty when out_dir was empty
  std::string manifest_path;
  double wall_seconds = 0.0;  // reported to the console only
};

/// Shuffle -> batch -> stats -> rate rule -> momentum step, with CSV row per
/// logged iteration. A non-finite loss or gradient ends the run with status
/// diverged instead of aborting the process.
RunResult run_training(const RunConfig& cfg);

/// Per-layer learning-rate sweep: every layer holds the base rate cfg.gamma
/// while the swept layer tries each grid value; reports epochs to reach
/// target_loss on the full training set.
struct SweepEntry {
  int layer = 0;
  double gamma = 0.0;
  enum class Outcome { converged, diverged, exceeded_budget } outcome =
      Outcome::converged;
  int epochs = 0;  // meaningful for converged entries
};

struct SweepResult {
  std::vector<SweepEntry> entries;
  std::string csv_path;
};

SweepResult sweep_layer_lr(const RunConfig& cfg, int layer,
                           std::span<const double> grid, double target_loss,
                           int max_epochs);

/// Trains with a constant uniform rate and logs the ratio-form M_k estimate
/// over the full training set after every epoch.
struct TrackMkResult {
  std::vector<std::vector<std::optional<double>>> per_epoch;  // epochs x K
  RunStatus status = RunStatus::completed;
  std::string csv_path;
};

TrackMkResult track_mk(const RunConfig& cfg, int epochs);

/// LARS with gradual warmup (one arm per W) against CLARS at constant
/// gamma_scale, identical seeds and batch sequences across arms.
struct WarmupArm {
  std::string name;
  RunStatus status = RunStatus::completed;
  std::vector<double> epoch_loss;   // [0] = initial, [e] = after epoch e
  std::vector<double> epoch_scale;  // gamma_scale during epoch e (1-based)
  std::vector<std::uint64_t> epoch_checksum;  // batch-sequence checksum
  double final_loss = 0.0;
};

struct CompareWarmupResult {
  std::vector<WarmupArm> arms;
  std::vector<std::string> csv_paths;
  std::string manifest_path;
};

CompareWarmupResult compare_warmup(const RunConfig& base,
                                   std::span<const int> warmup_epochs,
                                   int total_epochs);

/// Grid of validate_bound runs over (beta, batch, fraction-of-cap).
struct VerifyBoundsOptions {
  std::vector<double> betas{0.0, 0.5, 0.9};
  std::vector<int> batches{8, 64, 512};
  std::vector<double> cap_fractions{1.0, 0.1};
  int seeds = 20;
  std::int64_t iters = 2000;
  double rhs_scale = 1.0;  // test hook: scales rhs before the comparison
};

struct VerifyBoundsResult {
  std::vector<BoundReport> reports;      // honest theorem quantities
  std::vector<bool> satisfied_scaled;    // decision after the rhs_scale hook
  bool all_satisfied = true;
  std::string csv_path;
  std::string manifest_path;
};

VerifyBoundsResult verify_bounds(const RunConfig& cfg,
                                 const VerifyBoundsOptions& options);

std::string to_string(Method m);
Method method_from_string(const std::string& s);

}  // namespace lwopt
