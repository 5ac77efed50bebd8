#include "lwopt/run.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "lwopt/errors.hpp"
#include "lwopt/optimizer.hpp"
#include "lwopt/parallel.hpp"
#include "lwopt/rng.hpp"

namespace lwopt {
namespace {

using nlohmann::json;

constexpr std::uint64_t kW0Stream = 0x7730;    // quadratic initial-point draws
constexpr std::uint64_t kSeedStream = 0xb0d5;  // verify-bounds seed streams

std::string fmt_double(double v) {
  if (!std::isfinite(v)) return "diverged";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_cell(const std::optional<double>& v) {
  return v.has_value() ? fmt_double(*v) : "undefined";
}

std::uint64_t fnv1a_update(std::uint64_t hash, const MiniBatch& batch) {
  for (std::int32_t index : batch.indices) {
    for (int byte = 0; byte < 4; ++byte) {
      hash ^= static_cast<std::uint64_t>((index >> (8 * byte)) & 0xff);
      hash *= 0x100000001b3ULL;
    }
  }
  return hash;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("cannot open output file: " + path);
  out << text;
  if (!out) throw config_error("failed writing output file: " + path);
}

std::string ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw config_error("cannot create output directory " + dir + ": " + ec.message());
  return dir;
}

double json_finite_or_nan(double v) { return v; }  // nlohmann dumps NaN as null

// ----- config <-> json -------------------------------------------------

void require_keys(const json& j, std::initializer_list<const char*> allowed,
                  const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) {
      if (it.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) throw config_error("unknown config key \"" + it.key() + "\" in " + where);
  }
}

QuadraticSpec quadratic_from_json(const json& j) {
  require_keys(j, {"dims", "lipschitz", "num_samples", "center_spread", "seed"},
               "quadratic");
  QuadraticSpec spec;
  if (j.contains("dims")) spec.dims = j.at("dims").get<std::vector<int>>();
  if (j.contains("lipschitz")) spec.lipschitz = j.at("lipschitz").get<std::vector<double>>();
  if (j.contains("num_samples")) spec.num_samples = j.at("num_samples").get<int>();
  if (j.contains("center_spread")) {
    spec.center_spread = j.at("center_spread").get<std::vector<double>>();
  }
  if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
  return spec;
}

json quadratic_to_json(const QuadraticSpec& spec) {
  return {{"dims", spec.dims},
          {"lipschitz", spec.lipschitz},
          {"num_samples", spec.num_samples},
          {"center_spread", spec.center_spread},
          {"seed", spec.seed}};
}

FcnSpec fcn_from_json(const json& j) {
  require_keys(j, {"layer_dims", "activation", "init_seed"}, "fcn");
  FcnSpec spec;
  if (j.contains("layer_dims")) spec.layer_dims = j.at("layer_dims").get<std::vector<int>>();
  if (j.contains("activation")) {
    const std::string a = j.at("activation").get<std::string>();
    if (a == "sigmoid") {
      spec.activation = FcnSpec::Activation::sigmoid;
    } else if (a == "relu") {
      spec.activation = FcnSpec::Activation::relu;
    } else {
      throw config_error("unknown activation: " + a);
    }
  }
  if (j.contains("init_seed")) spec.init_seed = j.at("init_seed").get<std::uint64_t>();
  return spec;
}

json fcn_to_json(const FcnSpec& spec) {
  return {{"layer_dims", spec.layer_dims},
          {"activation",
           spec.activation == FcnSpec::Activation::sigmoid ? "sigmoid" : "relu"},
          {"init_seed", spec.init_seed}};
}

RateConfig rates_from_json(const json& j) {
  require_keys(j,
               {"gamma_base", "batch_base", "eta", "schedule", "warmup_epochs",
                "poly_power", "total_iters"},
               "rates");
  RateConfig rates;
  if (j.contains("gamma_base")) rates.gamma_base = j.at("gamma_base").get<double>();
  if (j.contains("batch_base")) rates.batch_base = j.at("batch_base").get<int>();
  if (j.contains("eta")) rates.eta = j.at("eta").get<double>();
  if (j.contains("schedule")) {
    rates.schedule = schedule_from_string(j.at("schedule").get<std::string>());
  }
  if (j.contains("warmup_epochs")) rates.warmup_epochs = j.at("warmup_epochs").get<int>();
  if (j.contains("poly_power")) rates.poly_power = j.at("poly_power").get<double>();
  if (j.contains("total_iters")) rates.total_iters = j.at("total_iters").get<std::int64_t>();
  return rates;
}

json rates_to_json(const RateConfig& rates) {
  return {{"gamma_base", rates.gamma_base}, {"batch_base", rates.batch_base},
          {"eta", rates.eta},               {"schedule", to_string(rates.schedule)},
          {"warmup_epochs", rates.warmup_epochs}, {"poly_power", rates.poly_power},
          {"total_iters", rates.total_iters}};
}

json config_echo(const RunConfig& cfg) {
  // Execution knobs (out dir, threads) stay out of the echo so reruns of one
  // experiment produce identical files.
  json j{{"problem", cfg.problem == ProblemKind::quadratic ? "quadratic" : "fcn"},
         {"method", to_string(cfg.method)},
         {"rates", rates_to_json(cfg.rates)},
         {"beta", cfg.beta},
         {"gamma", cfg.gamma},
         {"batch", cfg.batch},
         {"epochs", cfg.epochs},
         {"iters", cfg.iters},
         {"seed", cfg.seed},
         {"mk_estimator", cfg.mk_method == MkMethod::ratio_full ? "ratio_full" : "sampled"},
         {"subsample", cfg.subsample},
         {"log_every", cfg.log_every},
         {"w0_offset", cfg.w0_offset}};
  if (cfg.problem == ProblemKind::quadratic) {
    j["quadratic"] = quadratic_to_json(cfg.quadratic);
  } else {
    j["fcn"] = fcn_to_json(cfg.fcn);
    j["data"] = cfg.data == DataKind::blobs ? "blobs" : "mnist";
    if (cfg.data == DataKind::blobs) {
      j["blobs"] = {{"n", cfg.blobs.n},
                    {"dim", cfg.blobs.dim},
                    {"classes", cfg.blobs.classes},
                    {"spread", cfg.blobs.spread},
                    {"seed", cfg.blobs.seed}};
    } else {
      j["mnist"] = {{"images", cfg.mnist_images}, {"labels", cfg.mnist_labels}};
    }
  }
  return j;
}

// ----- problem construction --------------------------------------------

struct Built {
  std::shared_ptr<Problem> problem;
  std::shared_ptr<BlockQuadratic> quadratic;  // set for quadratic problems
  std::optional<TheoryConstants> consts;
  BlockVector w0;
  std::vector<double> metric_q;
  int log_every = 1;

  Built() : w0(make_layout({1})) {}
};

BlockVector quadratic_w0(const BlockQuadratic& quad, const QuadraticSpec& spec,
                         double offset) {
  BlockVector w0 = quad.center_mean();
  Rng rng(derive_seed(spec.seed, kW0Stream));
  for (double& x : w0.data()) x += offset * rng.normal();
  return w0;
}

Built build_problem(const RunConfig& cfg) {
  Built built;
  if (cfg.problem == ProblemKind::quadratic) {
    built.quadratic = make_block_quadratic(cfg.quadratic);
    built.problem = built.quadratic;
    built.consts = quad_theory_constants(*built.quadratic);
    built.w0 = quadratic_w0(*built.quadratic, cfg.quadratic, cfg.w0_offset);
    built.metric_q = built.consts->q;
    built.log_every = cfg.log_every > 0 ? cfg.log_every : 1;
  } else {
    auto data = std::make_shared<Dataset>(
        cfg.data == DataKind::blobs
            ? make_synthetic_blobs(cfg.blobs.n, cfg.blobs.dim, cfg.blobs.classes,
                                   cfg.blobs.spread, cfg.blobs.seed)
            : load_mnist_idx(cfg.mnist_images, cfg.mnist_labels));
    FcnSpec spec = cfg.fcn;
    if (spec.layer_dims.empty()) {
      spec.layer_dims = {data->feature_dim, 512, 256, 128, 64, data->num_classes};
    }
    auto fcn = make_fcn(std::move(spec), data);
    built.w0 = fcn->initial_point();
    built.problem = std::move(fcn);
    const int k_count = built.problem->layout().blocks();
    built.metric_q.assign(static_cast<std::size_t>(k_count), 1.0 / k_count);
    built.log_every = cfg.log_every > 0 ? cfg.log_every : 50;
  }
  if (cfg.batch < 1 || cfg.batch > built.problem->num_samples()) {
    throw config_error("batch size must be in [1, dataset size]");
  }
  if ((cfg.epochs > 0) == (cfg.iters > 0)) {
    throw config_error("exactly one of epochs/iters must be > 0");
  }
  return built;
}

std::vector<double> layer_sq_grad_norms(const Problem& p, const BlockVector& w) {
  const BlockVector grad = full_gradient(p, w);
  std::vector<double> sq(static_cast<std::size_t>(p.layout().blocks()));
  for (int k = 0; k < p.layout().blocks(); ++k) {
    sq[static_cast<std::size_t>(k)] = sq_norm(grad.block(k));
  }
  return sq;
}

MiniBatch subsample_of(const MiniBatch& batch, int count) {
  MiniBatch j;
  const int take = std::min<int>(count, batch.size());
  j.indices.assign(batch.indices.begin(), batch.indices.begin() + take);
  return j;
}

std::string run_csv(const std::vector<RunRow>& rows, int layers) {
  std::ostringstream out;
  out << "iter,epoch,loss";
  for (int k = 1; k <= layers; ++k) out << ",gamma_" << k;
  for (int k = 1; k <= layers; ++k) out << ",wnorm_" << k;
  for (int k = 1; k <= layers; ++k) out << ",gnorm_" << k;
  for (int k = 1; k <= layers; ++k) out << ",mk_" << k;
  out << ",metric\n";
  for (const RunRow& row : rows) {
    out << row.iter << ',' << row.epoch << ',' << fmt_cell(row.loss);
    for (const auto& g : row.gamma) out << ',' << fmt_cell(g);
    for (double w : row.weight_norm) out << ',' << fmt_double(w);
    for (double g : row.grad_norm) out << ',' << fmt_double(g);
    for (const auto& m : row.mk) out << ',' << fmt_cell(m);
    out << ',' << fmt_double(row.metric_partial) << '\n';
  }
  return out.str();
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::mgd: return "mgd";
    case Method::mnag: return "mnag";
    case Method::lars: return "lars";
    case Method::clars: return "clars";
    case Method::lipschitz_scaled: return "lipschitz-scaled";
  }
  return "mgd";
}

Method method_from_string(const std::string& s) {
  if (s == "mgd") return Method::mgd;
  if (s == "mnag") return Method::mnag;
  if (s == "lars") return Method::lars;
  if (s == "clars") return Method::clars;
  if (s == "lipschitz-scaled") return Method::lipschitz_scaled;
  throw config_error("unknown method: " + s);
}

RunConfig run_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw config_error(std::string("config is not valid JSON: ") + e.what());
  }
  require_keys(j,
               {"problem", "quadratic", "fcn", "data", "blobs", "mnist", "method",
                "rates", "beta", "gamma", "batch", "epochs", "iters", "seed", "out",
                "mk_estimator", "subsample", "log_every", "threads", "w0_offset"},
               "config");
  RunConfig cfg;
  if (j.contains("problem")) {
    const std::string p = j.at("problem").get<std::string>();
    if (p == "quadratic") {
      cfg.problem = ProblemKind::quadratic;
    } else if (p == "fcn") {
      cfg.problem = ProblemKind::fcn;
    } else {
      throw config_error("unknown problem kind: " + p);
    }
  }
  if (j.contains("quadratic")) cfg.quadratic = quadratic_from_json(j.at("quadratic"));
  if (j.contains("fcn")) cfg.fcn = fcn_from_json(j.at("fcn"));
  if (j.contains("data")) {
    const std::string d = j.at("data").get<std::string>();
    if (d == "blobs") {
      cfg.data = DataKind::blobs;
    } else if (d == "mnist") {
      cfg.data = DataKind::mnist;
    } else {
      throw config_error("unknown data kind: " + d);
    }
  }
  if (j.contains("blobs")) {
    const json& b = j.at("blobs");
    require_keys(b, {"n", "dim", "classes", "spread", "seed"}, "blobs");
    if (b.contains("n")) cfg.blobs.n = b.at("n").get<int>();
    if (b.contains("dim")) cfg.blobs.dim = b.at("dim").get<int>();
    if (b.contains("classes")) cfg.blobs.classes = b.at("classes").get<int>();
    if (b.contains("spread")) cfg.blobs.spread = b.at("spread").get<double>();
    if (b.contains("seed")) cfg.blobs.seed = b.at("seed").get<std::uint64_t>();
  }
  if (j.contains("mnist")) {
    const json& m = j.at("mnist");
    require_keys(m, {"images", "labels"}, "mnist");
    if (m.contains("images")) cfg.mnist_images = m.at("images").get<std::string>();
    if (m.contains("labels")) cfg.mnist_labels = m.at("labels").get<std::string>();
  }
  if (j.contains("method")) cfg.method = method_from_string(j.at("method").get<std::string>());
  if (j.contains("rates")) cfg.rates = rates_from_json(j.at("rates"));
  if (j.contains("beta")) cfg.beta = j.at("beta").get<double>();
  if (j.contains("gamma")) cfg.gamma = j.at("gamma").get<double>();
  if (j.contains("batch")) cfg.batch = j.at("batch").get<int>();
  if (j.contains("epochs")) cfg.epochs = j.at("epochs").get<int>();
  if (j.contains("iters")) cfg.iters = j.at("iters").get<std::int64_t>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("out")) cfg.out_dir = j.at("out").get<std::string>();
  if (j.contains("mk_estimator")) {
    const std::string m = j.at("mk_estimator").get<std::string>();
    if (m == "ratio_full") {
      cfg.mk_method = MkMethod::ratio_full;
    } else if (m == "sampled") {
      cfg.mk_method = MkMethod::sampled;
    } else {
      throw config_error("unknown mk_estimator: " + m);
    }
  }
  if (j.contains("subsample")) cfg.subsample = j.at("subsample").get<int>();
  if (j.contains("log_every")) cfg.log_every = j.at("log_every").get<int>();
  if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
  if (j.contains("w0_offset")) cfg.w0_offset = j.at("w0_offset").get<double>();
  return cfg;
}

RunConfig run_config_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return run_config_from_json(buffer.str());
}

std::string run_config_to_json(const RunConfig& cfg) {
  json j = config_echo(cfg);
  j["out"] = cfg.out_dir;
  j["threads"] = cfg.threads;
  return j.dump(2) + "\n";
}

RunResult run_training(const RunConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  if (cfg.threads > 0) par::set_threads(cfg.threads);

  Built built = build_problem(cfg);
  const Problem& problem = *built.problem;
  const int layers = problem.layout().blocks();
  const int n = problem.num_samples();

  EpochSampler sampler(n, cfg.batch, cfg.seed);
  const std::int64_t iters_per_epoch = sampler.iters_per_epoch();
  const std::int64_t total_iters =
      cfg.iters > 0 ? cfg.iters : static_cast<std::int64_t>(cfg.epochs) * iters_per_epoch;

  RateConfig rates_cfg = cfg.rates;
  rates_cfg.batch = cfg.batch;
  rates_cfg.iters_per_epoch = static_cast<int>(iters_per_epoch);
  rates_cfg.validate();

  std::vector<double> fixed_rates;
  if (cfg.method == Method::lipschitz_scaled) {
    if (!built.consts) {
      throw config_error("lipschitz-scaled rates need the quadratic problem");
    }
    fixed_rates = fixed_rates_from_lipschitz(*built.consts, cfg.gamma);
  }

  OptimizerState state(built.w0, cfg.method == Method::mgd ? 0.0 : cfg.beta);
  MetricAccumulator metric(built.metric_q);

  RunResult result;
  result.initial_full_loss = eval_loss(problem, state.w, MiniBatch::all(n));

  std::vector<double> rate_values(static_cast<std::size_t>(layers), 0.0);
  std::vector<std::uint8_t> skip(static_cast<std::size_t>(layers), 0);

  RunStatus status = RunStatus::completed;
  std::int64_t t = 0;
  for (; t < total_iters; ++t) {
    const std::int64_t epoch = t / iters_per_epoch;
    const MiniBatch batch = sampler.next();
    const BatchEval ev = eval_batch(problem, state.w, batch);

    if (!std::isfinite(ev.loss) || !ev.grad.all_finite()) {
      RunRow row;
      row.iter = t;
      row.epoch = epoch;
      row.loss = std::nullopt;
      row.gamma.assign(static_cast<std::size_t>(layers), std::nullopt);
      row.weight_norm = ev.stats.weight_norm;
      row.grad_norm = ev.stats.batch_grad_norm;
      row.mk.assign(static_cast<std::size_t>(layers), std::nullopt);
      row.metric_partial = metric.value();
      result.rows.push_back(std::move(row));
      status = RunStatus::diverged;
      break;
    }

    std::fill(skip.begin(), skip.end(), 0);
    std::vector<std::optional<double>> logged_rates(static_cast<std::size_t>(layers));
    switch (cfg.method) {
      case Method::mgd:
      case Method::mnag: {
        const double rate =
            cfg.gamma > 0.0 ? cfg.gamma : schedule_rate(rates_cfg, t);
        std::fill(rate_values.begin(), rate_values.end(), rate);
        for (auto& lr : logged_rates) lr = rate;
        break;
      }
      case Method::lars:
      case Method::clars: {
        const auto layer_rates = cfg.method == Method::lars
                                     ? lars_rates(ev.stats, rates_cfg, t)
                                     : clars_rates(ev.stats, rates_cfg, t);
        for (int k = 0; k < layers; ++k) {
          const auto ks = static_cast<std::size_t>(k);
          if (!layer_rates[ks].defined) {
            skip[ks] = 1;
            rate_values[ks] = 0.0;
            logged_rates[ks] = std::nullopt;
            ++result.undefined_rate_events;
          } else {
            rate_values[ks] = layer_rates[ks].value;
            logged_rates[ks] = layer_rates[ks].value;
            if (layer_rates[ks].zero_weight) ++result.zero_weight_rate_events;
          }
        }
        break;
      }
      case Method::lipschitz_scaled: {
        rate_values = fixed_rates;
        for (int k = 0; k < layers; ++k) {
          logged_rates[static_cast<std::size_t>(k)] = fixed_rates[static_cast<std::size_t>(k)];
        }
        break;
      }
    }

    const bool logged = (t % built.log_every == 0) || (t + 1 == total_iters);
    if (logged) {
      metric.add(layer_sq_grad_norms(problem, state.w));
      RunRow row;
      row.iter = t;
      row.epoch = epoch;
      row.loss = ev.loss;
      row.gamma = logged_rates;
      row.weight_norm = ev.stats.weight_norm;
      row.grad_norm = ev.stats.batch_grad_norm;
      const MkEstimate mk =
          cfg.mk_method == MkMethod::ratio_full
              ? estimate_mk_ratio(problem, state.w, MiniBatch::all(n))
              : estimate_mk_sampled(
                    ev.stats,
                    eval_layer_stats(problem, state.w,
                                     subsample_of(batch, cfg.subsample)));
      row.mk = mk.value;
      row.metric_partial = metric.value();
      result.rows.push_back(std::move(row));
    }

    mnag_step(state, ev.grad, rate_values, &skip);
  }

  result.status = status;
  result.iters_run = status == RunStatus::diverged ? t : total_iters;
  result.epochs_run = result.iters_run / iters_per_epoch;
  result.final_full_loss = eval_loss(problem, state.w, MiniBatch::all(n));
  result.metric_final = metric.value();

  if (!cfg.out_dir.empty()) {
    ensure_out_dir(cfg.out_dir);
    result.csv_path = cfg.out_dir + "/run.csv";
    write_text_file(result.csv_path, run_csv(result.rows, layers));
    json manifest{{"config", config_echo(cfg)},
                  {"status", status == RunStatus::completed ? "completed" : "diverged"},
                  {"iters_run", result.iters_run},
                  {"epochs_run", result.epochs_run},
                  {"layers", layers},
                  {"initial_full_loss", json_finite_or_nan(result.initial_full_loss)},
                  {"final_full_loss", json_finite_or_nan(result.final_full_loss)},
                  {"metric_final", result.metric_final},
                  {"events",
                   {{"undefined_rate", result.undefined_rate_events},
                    {"zero_weight_rate", result.zero_weight_rate_events}}}};
    result.manifest_path = cfg.out_dir + "/manifest.json";
    write_text_file(result.manifest_path, manifest.dump(2) + "\n");
  }

  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

SweepResult sweep_layer_lr(const RunConfig& cfg, int layer,
                           std::span<const double> grid, double target_loss,
                           int max_epochs) {
  if (grid.empty()) throw config_error("sweep: grid must be non-empty");
  if (max_epochs < 1) throw config_error("sweep: max_epochs must be >= 1");
  if (cfg.threads > 0) par::set_threads(cfg.threads);
  RunConfig base = cfg;
  base.epochs = 1;  // satisfy the epochs/iters rule; the sweep drives its own loop
  base.iters = 0;
  Built built = build_problem(base);
  const Problem& problem = *built.problem;
  const int layers = problem.layout().blocks();
  if (layer < 0 || layer >= layers) throw config_error("sweep: layer out of range");
  const int n = problem.num_samples();

  SweepResult result;
  for (double gamma : grid) {
    std::vector<double> rates(static_cast<std::size_t>(layers), cfg.gamma);
    rates[static_cast<std::size_t>(layer)] = gamma;

    SweepEntry entry;
    entry.layer = layer;
    entry.gamma = gamma;

    OptimizerState state(built.w0, cfg.beta);
    EpochSampler sampler(n, cfg.batch, cfg.seed);
    const MiniBatch full = MiniBatch::all(n);

    if (eval_loss(problem, state.w, full) <= target_loss) {
      entry.outcome = SweepEntry::Outcome::converged;
      entry.epochs = 0;
      result.entries.push_back(entry);
      continue;
    }

    entry.outcome = SweepEntry::Outcome::exceeded_budget;
    entry.epochs = max_epochs;
    for (int e = 0; e < max_epochs; ++e) {
      bool diverged = false;
      for (int i = 0; i < sampler.iters_per_epoch(); ++i) {
        const LossGrad ev = eval_loss_grad_batch(problem, state.w, sampler.next());
        if (!std::isfinite(ev.loss) || !ev.grad.all_finite()) {
          diverged = true;
          break;
        }
        mnag_step(state, ev.grad, rates);
      }
      if (diverged) {
        entry.outcome = SweepEntry::Outcome::diverged;
        entry.epochs = e;
        break;
      }
      if (eval_loss(problem, state.w, full) <= target_loss) {
        entry.outcome = SweepEntry::Outcome::converged;
        entry.epochs = e + 1;
        break;
      }
    }
    result.entries.push_back(entry);
  }

  if (!cfg.out_dir.empty()) {
    ensure_out_dir(cfg.out_dir);
    std::ostringstream out;
    out << "layer,gamma,result\n";
    for (const SweepEntry& entry : result.entries) {
      out << (entry.layer + 1) << ',' << fmt_double(entry.gamma) << ',';
      switch (entry.outcome) {
        case SweepEntry::Outcome::converged: out << entry.epochs; break;
        case SweepEntry::Outcome::diverged: out << "diverged"; break;
        case SweepEntry::Outcome::exceeded_budget: out << "exceeded-budget"; break;
      }
      out << '\n';
    }
    result.csv_path = cfg.out_dir + "/sweep.csv";
    write_text_file(result.csv_path, out.str());
  }
  return result;
}

TrackMkResult track_mk(const RunConfig& cfg, int epochs) {
  if (epochs < 1) throw config_error("track-mk: epochs must be >= 1");
  if (cfg.problem != ProblemKind::fcn) {
    throw config_error("track-mk follows the FCN protocol; set problem=fcn");
  }
  if (cfg.threads > 0) par::set_threads(cfg.threads);
  RunConfig base = cfg;
  base.epochs = epochs;
  base.iters = 0;
  Built built = build_problem(base);
  const Problem& problem = *built.problem;
  const int layers = problem.layout().blocks();
  const int n = problem.num_samples();

  const double rate = cfg.gamma > 0.0 ? cfg.gamma : 0.001;
  std::vector<double> rates(static_cast<std::size_t>(layers), rate);

  OptimizerState state(built.w0, cfg.beta);
  EpochSampler sampler(n, cfg.batch, cfg.seed);
  const MiniBatch full = MiniBatch::all(n);

  TrackMkResult result;
  for (int e = 0; e < epochs; ++e) {
    bool diverged = false;
    for (int i = 0; i < sampler.iters_per_epoch(); ++i) {
      const LossGrad ev = eval_loss_grad_batch(problem, state.w, sampler.next());
      if (!std::isfinite(ev.loss) || !ev.grad.all_finite()) {
        diverged = true;
        break;
      }
      mnag_step(state, ev.grad, rates);
    }
    if (diverged) {
      result.status = RunStatus::diverged;
      break;
    }
    result.per_epoch.push_back(estimate_mk_ratio(problem, state.w, full).value);
  }

  if (!cfg.out_dir.empty()) {
    ensure_out_dir(cfg.out_dir);
    std::ostringstream out;
    out << "epoch";
    for (int k = 1; k <= layers; ++k) out << ",mk_" << k;
    out << '\n';
    for (std::size_t e = 0; e < result.per_epoch.size(); ++e) {
      out << (e + 1);
      for (const auto& v : result.per_epoch[e]) out << ',' << fmt_cell(v);
      out << '\n';
    }
    result.csv_path = cfg.out_dir + "/mk.csv";
    write_text_file(result.csv_path, out.str());
  }
  return result;
}

namespace {

WarmupArm run_warmup_arm(const RunConfig& arm_cfg, const Built& built,
                         const std::string& name, int total_epochs) {
  const Problem& problem = *built.problem;
  const int layers = problem.layout().blocks();
  const int n = problem.num_samples();

  WarmupArm arm;
  arm.name = name;

  EpochSampler batches(n, arm_cfg.batch, arm_cfg.seed);
  RateConfig rates_cfg = arm_cfg.rates;
  rates_cfg.batch = arm_cfg.batch;
  rates_cfg.iters_per_epoch = batches.iters_per_epoch();
  rates_cfg.validate();

  OptimizerState state(built.w0, arm_cfg.beta);
  const MiniBatch full = MiniBatch::all(n);
  arm.epoch_loss.push_back(eval_loss(problem, state.w, full));

  std::vector<double> rate_values(static_cast<std::size_t>(layers), 0.0);
  std::vector<std::uint8_t> skip(static_cast<std::size_t>(layers), 0);

  std::int64_t t = 0;
  for (int e = 0; e < total_epochs; ++e) {
    std::uint64_t checksum = 0xcbf29ce484222325ULL;  // FNV-1a offset basis
    arm.epoch_scale.push_back(schedule_rate(rates_cfg, t));
    bool diverged = false;
    for (int i = 0; i < batches.iters_per_epoch(); ++i, ++t) {
      const MiniBatch batch = batches.next();
      checksum = fnv1a_update(checksum, batch);
      const BatchEval ev = eval_batch(problem, state.w, batch);
      if (!std::isfinite(ev.loss) || !ev.grad.all_finite()) {
        diverged = true;
        break;
      }
      const auto layer_rates = arm_cfg.method == Method::lars
                                   ? lars_rates(ev.stats, rates_cfg, t)
                                   : clars_rates(ev.stats, rates_cfg, t);
      std::fill(skip.begin(), skip.end(), 0);
      for (int k = 0; k < layers; ++k) {
        const auto ks = static_cast<std::size_t>(k);
        if (!layer_rates[ks].defined) {
          skip[ks] = 1;
          rate_values[ks] = 0.0;
        } else {
          rate_values[ks] = layer_rates[ks].value;
        }
      }
      mnag_step(state, ev.grad, rate_values, &skip);
    }
    arm.epoch_checksum.push_back(checksum);
    if (diverged) {
      arm.status = RunStatus::diverged;
      break;
    }
    arm.epoch_loss.push_back(eval_loss(problem, state.w, full));
  }
  arm.final_loss = arm.status == RunStatus::completed
                       ? arm.epoch_loss.back()
                       : std::numeric_limits<double>::quiet_NaN();
  return arm;
}

}  // namespace

CompareWarmupResult compare_warmup(const RunConfig& base,
                                   std::span<const int> warmup_epochs,
                                   int total_epochs) {
  if (total_epochs < 1) throw config_error("compare-warmup: total_epochs must be >= 1");
  if (base.threads > 0) par::set_threads(base.threads);
  RunConfig probe = base;
  probe.epochs = total_epochs;
  probe.iters = 0;
  Built built = build_problem(probe);

  CompareWarmupResult result;
  for (int w : warmup_epochs) {
    if (w < 1) throw config_error("compare-warmup: warmup epochs must be >= 1");
    RunConfig arm_cfg = probe;
    arm_cfg.method = Method::lars;
    arm_cfg.rates.schedule = Schedule::warmup;
    arm_cfg.rates.warmup_epochs = w;
    result.arms.push_back(run_warmup_arm(arm_cfg, built, "lars_w" + std::to_string(w),
                                         total_epochs));
  }
  {
    RunConfig arm_cfg = probe;
    arm_cfg.method = Method::clars;
    arm_cfg.rates.schedule = Schedule::constant;
    result.arms.push_back(run_warmup_arm(arm_cfg, built, "clars", total_epochs));
  }

  if (!base.out_dir.empty()) {
    ensure_out_dir(base.out_dir);
    for (const WarmupArm& arm : result.arms) {
      std::ostringstream out;
      out << "epoch,loss,gscale,checksum\n";
      out << "0," << fmt_double(arm.epoch_loss[0]) << ",undefined,undefined\n";
      for (std::size_t e = 0; e < arm.epoch_scale.size(); ++e) {
        out << (e + 1) << ',';
        out << (e + 1 < arm.epoch_loss.size() ? fmt_double(arm.epoch_loss[e + 1])
                                              : std::string("diverged"));
        out << ',' << fmt_double(arm.epoch_scale[e]) << ',' << arm.epoch_checksum[e]
            << '\n';
      }
      const std::string path = base.out_dir + "/warmup_" + arm.name + ".csv";
      write_text_file(path, out.str());
      result.csv_paths.push_back(path);
    }
    json manifest{{"config", config_echo(base)},
                  {"total_epochs", total_epochs},
                  {"arms", json::array()}};
    for (const WarmupArm& arm : result.arms) {
      manifest["arms"].push_back(
          {{"name", arm.name},
           {"status", arm.status == RunStatus::completed ? "completed" : "diverged"},
           {"initial_loss", arm.epoch_loss[0]},
           {"final_loss", arm.final_loss}});
    }
    result.manifest_path = base.out_dir + "/warmup_manifest.json";
    write_text_file(result.manifest_path, manifest.dump(2) + "\n");
  }
  return result;
}

VerifyBoundsResult verify_bounds(const RunConfig& cfg,
                                 const VerifyBoundsOptions& options) {
  if (cfg.problem != ProblemKind::quadratic) {
    throw config_error("verify-bounds needs the quadratic oracle problem");
  }
  if (options.seeds < 1) throw config_error("verify-bounds: seeds must be >= 1");
  if (cfg.threads > 0) par::set_threads(cfg.threads);

  auto quad = make_block_quadratic(cfg.quadratic);
  const TheoryConstants consts = quad_theory_constants(*quad);
  const BlockVector w0 = quadratic_w0(*quad, cfg.quadratic, cfg.w0_offset);

  std::vector<std::uint64_t> seeds(static_cast<std::size_t>(options.seeds));
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    seeds[i] = derive_seed(cfg.seed, kSeedStream + i);
  }

  VerifyBoundsResult result;
  for (double beta : options.betas) {
    const Regime regime = beta == 0.0 ? Regime::mgd : Regime::mnag;
    for (int batch : options.batches) {
      const double cap = max_scalar_gamma(consts, batch, beta, regime);
      for (double fraction : options.cap_fractions) {
        const double gamma = cap * fraction;
        BoundReport report =
            validate_bound(*quad, w0, gamma, beta, batch, seeds, options.iters);
        const bool ok = report.lhs <= report.rhs * options.rhs_scale;
        result.all_satisfied = result.all_satisfied && ok;
        result.satisfied_scaled.push_back(ok);
        result.reports.push_back(std::move(report));
      }
    }
  }

  if (!cfg.out_dir.empty()) {
    ensure_out_dir(cfg.out_dir);
    std::ostringstream out;
    out << "beta,batch,gamma,lhs,rhs,optimization_term,noise_term,satisfied\n";
    for (std::size_t i = 0; i < result.reports.size(); ++i) {
      const BoundReport& r = result.reports[i];
      out << fmt_double(r.beta) << ',' << r.batch << ',' << fmt_double(r.gamma)
          << ',' << fmt_double(r.lhs) << ',' << fmt_double(r.rhs) << ','
          << fmt_double(r.terms.optimization) << ',' << fmt_double(r.terms.noise)
          << ',' << (result.satisfied_scaled[i] ? "true" : "false") << '\n';
    }
    result.csv_path = cfg.out_dir + "/bounds.csv";
    write_text_file(result.csv_path, out.str());

    json manifest{{"config", config_echo(cfg)},
                  {"constants",
                   {{"lipschitz", consts.lipschitz},
                    {"lipschitz_max", consts.lipschitz_max},
                    {"grad_var_factor", consts.grad_var_factor},
                    {"grad_var_factor_max", consts.grad_var_factor_max},
                    {"grad_var_bound", consts.grad_var_bound},
                    {"kappa", consts.kappa},
                    {"kappa_max", consts.kappa_max},
                    {"q", consts.q},
                    {"f_inf", consts.f_inf}}},
                  {"options",
                   {{"betas", options.betas},
                    {"batches", options.batches},
                    {"cap_fractions", options.cap_fractions},
                    {"seeds", options.seeds},
                    {"iters", options.iters},
                    {"rhs_scale", options.rhs_scale}}},
                  {"all_satisfied", result.all_satisfied}};
    result.manifest_path = cfg.out_dir + "/bounds_manifest.json";
    write_text_file(result.manifest_path, manifest.dump(2) + "\n");
  }
  return result;
}

}  // namespace lwopt
