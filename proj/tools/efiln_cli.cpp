// efiln: dataset generation, training and evaluation of the field-inversion
// localization network.
//
//   efiln generate --config exp.txt --out data/dataset.csv
//   efiln train    --config exp.txt --data data/dataset.csv --out runs/exp
//   efiln eval     --config exp.txt --model runs/exp/model.bin --trajectory spiral
//   efiln sweep    --config exp.txt --out runs/tables
//
// Exit codes: 0 ok, 2 configuration error, 3 I/O error, 4 numeric failure.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "efiln/config.hpp"
#include "efiln/errors.hpp"
#include "efiln/experiment.hpp"
#include "efiln/parallel.hpp"

namespace fs = std::filesystem;
using namespace efiln;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

ExperimentConfig resolve_config(const std::string& path, std::optional<unsigned> threads) {
  ExperimentConfig c = path.empty() ? ExperimentConfig{} : load_config(path);
  if (path.empty()) c.validate();
  if (threads) c.threads = *threads;
  set_max_threads(c.threads);
  return c;
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

void log_line(const std::string& msg) { std::cout << msg << std::endl; }

void print_axis_summary(const std::string& what, const EvalMetrics& m) {
  std::cout << what << ": mae_x=" << m.mae[0] << " m, mae_y=" << m.mae[1] << " m, mae_z=" << m.mae[2]
            << " m, rmse=(" << m.rmse[0] << ", " << m.rmse[1] << ", " << m.rmse[2]
            << ") m, mean_euclidean=" << m.mean_euclidean << " m, location_error=" << m.percent_error
            << "%\n";
}

int cmd_generate(const ExperimentConfig& config, const std::string& out_arg, bool dry_run, bool normalized) {
  const std::size_t m = config.grid.size();
  std::cout << "grid: " << config.grid.points_on_axis(0) << " x " << config.grid.points_on_axis(1) << " x "
            << config.grid.points_on_axis(2) << '\n';
  if (!config.grid.endpoints_exact())
    std::cerr << "warning: grid extent is not a whole number of steps; the overhanging endpoint is dropped\n";
  std::cout << "M = " << m << '\n';
  if (dry_run) return 0;

  const Dataset d = make_dataset(config);
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  double sum = 0.0;
  for (const auto& s : d.samples) {
    const double mag = s.field.norm();
    lo = std::min(lo, mag);
    hi = std::max(hi, mag);
    sum += mag;
  }
  std::cout << "|E| min=" << lo << " V/m, max=" << hi << " V/m, mean=" << sum / static_cast<double>(m)
            << " V/m (noise intensity " << config.noise_intensity << ")\n";

  const fs::path out = out_arg.empty() ? fs::path(config.output_dir) / "dataset.csv" : fs::path(out_arg);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  const auto [train_part, val_part] = split(d, config.train.holdout_fraction, config.train.split_seed);
  const NormStats stats = fit_norm_stats(train_part);
  fs::path stats_path = out;
  stats_path.replace_extension(".stats");
  save_csv(normalized ? normalize(d, stats) : d, out);
  save_stats(stats, stats_path);
  std::cout << "wrote " << out.string() << " and " << stats_path.string() << '\n';
  return 0;
}

int cmd_train(ExperimentConfig config, const std::string& data, const std::string& out_arg,
              const std::string& model_arg, std::optional<std::size_t> max_epochs) {
  if (max_epochs) config.train.max_epochs = *max_epochs;
  const fs::path dir = out_arg.empty() ? fs::path(config.output_dir) : fs::path(out_arg);
  Dataset d;
  std::string hash;
  if (data.empty()) {
    d = make_dataset(config);
    hash = "generated:" + fnv1a_hex(format_config(config));
  } else {
    d = load_csv(data);
    hash = hash_file(data);
  }
  std::cout << "dataset: " << d.size() << " samples (hash " << hash << ")\n";
  config.train.log = log_line;
  const auto result = train(config.train, d);
  config.train.log = nullptr;
  write_training_outputs(dir, config, hash, result);
  if (!model_arg.empty()) save_checkpoint(result.model, model_arg);
  const auto& f = result.report.final_loss;
  std::cout << "final loss: x=" << f.x << " y=" << f.y << " z=" << f.z << " total=" << f.total << '\n';
  std::cout << "adam epochs: " << result.report.adam_epochs << ", lbfgs iterations: "
            << result.report.lbfgs_iterations << " (" << to_string(result.report.termination) << ")\n";
  std::cout << "wrote " << (dir / "model.bin").string() << '\n';
  return 0;
}

int cmd_eval(ExperimentConfig config, const std::string& model_path, const std::string& trajectory,
             double noise, std::optional<std::size_t> points, const std::string& out_arg,
             const std::string& sweep_noise, const std::string& step_list) {
  if (points) config.eval_points = *points;
  const fs::path dir = out_arg.empty() ? fs::path(config.output_dir) / "eval" : fs::path(out_arg);
  fs::create_directories(dir);

  if (!step_list.empty()) {
    config.train.log = log_line;
    const auto rows = sweep_step(config, parse_level_list(step_list));
    write_file(dir / "step_sweep.csv", format_sweep_csv("step", rows));
    for (const auto& r : rows) print_axis_summary("step " + format_double(r.level) + " m", r.metrics);
    std::cout << "wrote " << (dir / "step_sweep.csv").string() << '\n';
    if (model_path.empty()) return 0;
  }
  if (model_path.empty()) throw ConfigError("--model is required unless --sweep-step is given");
  const Checkpoint model = load_checkpoint(model_path);

  if (!sweep_noise.empty()) {
    const auto rows = sweep_eval_noise(model, config, parse_level_list(sweep_noise));
    write_file(dir / "noise_sweep.csv", format_sweep_csv("noise", rows));
    for (const auto& r : rows) print_axis_summary("noise " + format_double(r.level), r.metrics);
    std::cout << "wrote " << (dir / "noise_sweep.csv").string() << '\n';
    return 0;
  }

  EvalResult result;
  if (trajectory.rfind("file:", 0) == 0) {
    const auto pts = load_points_csv(trajectory.substr(5));
    EvalOptions opts;
    opts.noise_intensity = noise;
    opts.noise_seed = config.eval_noise_seed;
    opts.grid = config.grid;
    opts.name = fs::path(trajectory.substr(5)).stem().string();
    result = evaluate(model, pts, config.electrodes, config.constants, opts);
  } else {
    result = evaluate_kind(model, config, parse_trajectory_kind(trajectory), noise);
  }
  const auto& name = result.trajectory.name;
  write_trajectory_csv(result.trajectory, dir / ("trajectory_" + name + ".csv"));
  write_file(dir / ("metrics_" + name + ".txt"), format_metrics(result.metrics));
  write_file(dir / ("metrics_" + name + ".csv"), metrics_csv_header() + "\n" + metrics_csv_row(result.metrics) + "\n");
  print_axis_summary(name, result.metrics);
  std::cout << "wrote " << (dir / ("trajectory_" + name + ".csv")).string() << '\n';
  return 0;
}

int cmd_sweep(ExperimentConfig config, const std::string& noise_levels, const std::string& steps,
              const std::string& out_arg) {
  const fs::path dir = out_arg.empty() ? fs::path(config.output_dir) / "sweep" : fs::path(out_arg);
  fs::create_directories(dir);
  write_file(dir / "config.txt", format_config(config));
  config.train.log = log_line;
  if (!noise_levels.empty()) {
    const auto rows = sweep_train_noise(config, parse_level_list(noise_levels));
    write_file(dir / "noise_sweep.csv", format_sweep_csv("noise", rows));
    for (const auto& r : rows) print_axis_summary("training noise " + format_double(r.level), r.metrics);
  }
  if (!steps.empty()) {
    const auto rows = sweep_step(config, parse_level_list(steps));
    write_file(dir / "step_sweep.csv", format_sweep_csv("step", rows));
    for (const auto& r : rows) print_axis_summary("step " + format_double(r.level) + " m", r.metrics);
  }
  std::cout << "wrote sweep tables to " << dir.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Electric-field inversion localization: simulate, train, evaluate"};
  app.require_subcommand(1);
  app.footer("\n" + config_help());

  std::string config_path;
  std::optional<unsigned> threads;
  app.add_option("--threads", threads, "worker cap; results do not depend on it");

  auto* gen = app.add_subcommand("generate", "synthesize the position/field dataset");
  std::string gen_out;
  bool dry_run = false;
  bool normalized = false;
  gen->add_option("-c,--config", config_path, "experiment config file");
  gen->add_option("-o,--out", gen_out, "dataset CSV path (stats sidecar written next to it)");
  gen->add_flag("--dry-run", dry_run, "report the sample count without generating");
  gen->add_flag("--normalized", normalized, "write normalized values");

  auto* tr = app.add_subcommand("train", "train a model (Adam then L-BFGS)");
  std::string data_path, train_out, model_out;
  std::optional<std::size_t> max_epochs;
  tr->add_option("-c,--config", config_path, "experiment config file");
  tr->add_option("-d,--data", data_path, "dataset CSV (generated from the config when omitted)");
  tr->add_option("-o,--out", train_out, "experiment output directory (default output.dir)");
  tr->add_option("-m,--model", model_out, "extra checkpoint path");
  tr->add_option("--max-epochs", max_epochs, "override adam.max_epochs");

  auto* ev = app.add_subcommand("eval", "evaluate a model on a test trajectory");
  std::string model_path, trajectory = "random", eval_out, sweep_noise, sweep_step_list;
  double noise = 0.0;
  std::optional<std::size_t> points;
  ev->add_option("-c,--config", config_path, "experiment config file");
  ev->add_option("-m,--model", model_path, "checkpoint");
  ev->add_option("-t,--trajectory", trajectory, "spiral | circle | random | file:<x,y,z csv>");
  ev->add_option("--noise", noise, "evaluation-time noise intensity");
  ev->add_option("--points", points, "override eval.points");
  ev->add_option("-o,--out", eval_out, "output directory");
  ev->add_option("--sweep-noise", sweep_noise, "comma list of evaluation noise levels");
  ev->add_option("--sweep-step", sweep_step_list, "comma list of grid steps (retrains per step)");

  auto* sw = app.add_subcommand("sweep", "retrain per noise level and per grid step");
  std::string noise_levels = "0,0.05,0.1", steps = "0.5,0.75,1", sweep_out;
  sw->add_option("-c,--config", config_path, "experiment config file");
  sw->add_option("--noise-levels", noise_levels, "training noise levels (empty to skip)");
  sw->add_option("--steps", steps, "grid steps (empty to skip)");
  sw->add_option("-o,--out", sweep_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    const ExperimentConfig config = resolve_config(config_path, threads);
    if (*gen) return cmd_generate(config, gen_out, dry_run, normalized);
    if (*tr) return cmd_train(config, data_path, train_out, model_out, max_epochs);
    if (*ev) return cmd_eval(config, model_path, trajectory, noise, points, eval_out, sweep_noise, sweep_step_list);
    if (*sw) return cmd_sweep(config, noise_levels, steps, sweep_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const Error& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  }
  return 0;
}
