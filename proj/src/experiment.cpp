#include "efiln/experiment.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "efiln/errors.hpp"

namespace efiln {

Dataset make_dataset(const ExperimentConfig& config) {
  const Dataset clean = generate_grid(config.grid, config.electrodes, config.constants);
  return add_noise(clean, config.noise_intensity, config.noise_seed);
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
  return out;
}

std::string hash_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return fnv1a_hex(buf.str());
}

EvalResult evaluate_kind(const Checkpoint& model, const ExperimentConfig& config, TrajectoryKind kind,
                         double eval_noise) {
  const auto points = make_trajectory(kind, config.eval_points, config.eval_seed, config.grid);
  EvalOptions opts;
  opts.noise_intensity = eval_noise;
  opts.noise_seed = config.eval_noise_seed;
  opts.grid = config.grid;
  opts.name = to_string(kind);
  return evaluate(model, points, config.electrodes, config.constants, opts);
}

std::vector<TrajectoryEval> evaluate_trajectories(const Checkpoint& model, const ExperimentConfig& config,
                                                  double eval_noise) {
  std::vector<TrajectoryEval> out;
  for (auto kind : {TrajectoryKind::Spiral, TrajectoryKind::Circle, TrajectoryKind::Random})
    out.push_back({kind, evaluate_kind(model, config, kind, eval_noise)});
  return out;
}

std::string format_sweep_csv(std::string_view label, const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << label << ",mae_x,mae_y,mae_z\n";
  for (const auto& r : rows)
    out << format_double(r.level) << ',' << format_double(r.metrics.mae[0]) << ','
        << format_double(r.metrics.mae[1]) << ',' << format_double(r.metrics.mae[2]) << '\n';
  return out.str();
}

std::vector<SweepRow> sweep_eval_noise(const Checkpoint& model, const ExperimentConfig& config,
                                       const std::vector<double>& levels) {
  std::vector<SweepRow> rows;
  for (double level : levels)
    rows.push_back({level, evaluate_kind(model, config, TrajectoryKind::Random, level).metrics});
  return rows;
}

std::vector<SweepRow> sweep_train_noise(const ExperimentConfig& config, const std::vector<double>& levels) {
  std::vector<SweepRow> rows;
  for (double level : levels) {
    ExperimentConfig c = config;
    c.noise_intensity = level;
    const auto result = train(c.train, make_dataset(c));
    rows.push_back({level, evaluate_kind(result.model, c, TrajectoryKind::Random, 0.0).metrics});
  }
  return rows;
}

std::vector<SweepRow> sweep_step(const ExperimentConfig& config, const std::vector<double>& steps) {
  std::vector<SweepRow> rows;
  for (double step : steps) {
    ExperimentConfig c = config;
    c.grid.step.fill(step);
    c.validate();
    const auto result = train(c.train, make_dataset(c));
    rows.push_back({step, evaluate_kind(result.model, c, TrajectoryKind::Random, 0.0).metrics});
  }
  return rows;
}

void write_training_outputs(const std::filesystem::path& dir, const ExperimentConfig& config,
                            const std::string& dataset_hash, const TrainResult& result) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  auto write_text = [&](const std::string& name, const std::string& text) {
    std::ofstream out(dir / name);
    if (!out) throw IoError("cannot open " + (dir / name).string() + " for writing");
    out << text;
    if (!out) throw IoError("failed writing " + (dir / name).string());
  };
  write_text("config.txt", format_config(config));
  write_text("dataset.hash", dataset_hash + "\n");
  save_checkpoint(result.model, dir / "model.bin");
  save_stats(result.model.stats, dir / "model.stats");
  write_report_csv(result.report, dir / "train_report.csv");
  const auto& r = result.report;
  std::ostringstream s;
  s << "adam_epochs=" << r.adam_epochs << '\n'
    << "adam_early_stopped=" << (r.adam_early_stopped ? "true" : "false") << '\n'
    << "handoff_loss=" << format_double(r.handoff_loss.total) << '\n'
    << "lbfgs_iterations=" << r.lbfgs_iterations << '\n'
    << "termination=" << to_string(r.termination) << '\n'
    << "final_loss_x=" << format_double(r.final_loss.x) << '\n'
    << "final_loss_y=" << format_double(r.final_loss.y) << '\n'
    << "final_loss_z=" << format_double(r.final_loss.z) << '\n'
    << "final_loss_total=" << format_double(r.final_loss.total) << '\n'
    << "final_validation_total=" << format_double(r.final_validation.total) << '\n';
  write_text("train_summary.txt", s.str());
}

std::vector<double> parse_level_list(const std::string& text) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto v = parse_double(item);
    if (!v || !std::isfinite(*v)) throw ConfigError("bad list value '" + item + "'");
    out.push_back(*v);
  }
  if (out.empty()) throw ConfigError("empty value list");
  return out;
}

}  // namespace efiln
