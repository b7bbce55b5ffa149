#include "efiln/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "efiln/errors.hpp"

namespace efiln {

namespace {

std::string trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(v);
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  return out;
}

struct Entry {
  std::string value;
  std::size_t line = 0;
};

class Parser {
 public:
  Parser(const std::string& key, const Entry& e) : key_(key), e_(e) {}

  [[noreturn]] void fail(const std::string& why) const {
    throw ConfigError("config line " + std::to_string(e_.line) + ": " + key_ + ": " + why);
  }

  double real(const std::string& text) const {
    const auto v = parse_double(text);
    if (!v || !std::isfinite(*v)) fail("expected a finite number, got '" + text + "'");
    return *v;
  }
  double real() const { return real(e_.value); }

  std::uint64_t u64() const {
    std::uint64_t v = 0;
    const auto& s = e_.value;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty())
      fail("expected a non-negative integer, got '" + s + "'");
    return v;
  }

  bool boolean() const {
    if (e_.value == "true" || e_.value == "1") return true;
    if (e_.value == "false" || e_.value == "0") return false;
    fail("expected true or false, got '" + e_.value + "'");
  }

  std::array<double, 3> triplet() const {
    const auto parts = split_list(e_.value);
    if (parts.size() == 1) {
      const double v = real(parts[0]);
      return {v, v, v};
    }
    if (parts.size() != 3) fail("expected one value or three comma-separated values");
    return {real(parts[0]), real(parts[1]), real(parts[2])};
  }

  ElectrodeSystem electrode() const {
    const auto parts = split_list(e_.value);
    if (parts.size() != 4) fail("expected x,y,z,charge");
    return {{real(parts[0]), real(parts[1]), real(parts[2])}, real(parts[3])};
  }

 private:
  const std::string& key_;
  const Entry& e_;
};

std::string fmt_triplet(const std::array<double, 3>& v) {
  if (v[0] == v[1] && v[1] == v[2]) return format_double(v[0]);
  return format_double(v[0]) + "," + format_double(v[1]) + "," + format_double(v[2]);
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

}  // namespace

const std::vector<ConfigKeyDoc>& config_keys() {
  static const std::vector<ConfigKeyDoc> keys = {
      {"profile", "desk", "grid preset applied before grid.* keys: desk ([10,60] m, step 1) or reference ([10,110] m, step 0.5)"},
      {"grid.min", "10", "lower grid bound in m (one value or x,y,z)"},
      {"grid.max", "60", "upper grid bound in m; reference profile: 110"},
      {"grid.step", "1", "sampling interval in m; reference profile: 0.5"},
      {"electrode", "0,0,0,1 and 0,0,100,-1", "x,y,z,charge of one point source in m and C (repeatable)"},
      {"constants.epsilon0", "8.854e-12", "vacuum permittivity in F/m"},
      {"constants.exclusion_radius", "1e-06", "minimum distance to a source in m"},
      {"noise.intensity", "0", "Gaussian noise std as a fraction of each field component's std"},
      {"noise.seed", "11", "seed of the dataset noise"},
      {"network.hidden_layers", "8", "number of tanh hidden layers"},
      {"network.hidden_units", "16", "units per hidden layer"},
      {"network.seed", "1", "seed of the Glorot-uniform initialization"},
      {"adam.learning_rate", "0.0001", "Adam learning rate"},
      {"adam.beta1", "0.9", "first-moment decay rate"},
      {"adam.beta2", "0.999", "second-moment decay rate"},
      {"adam.epsilon", "1e-08", "denominator offset"},
      {"adam.max_epochs", "50000", "Adam epoch budget"},
      {"adam.batch_size", "4096", "minibatch size"},
      {"adam.patience", "500", "epochs without validation improvement before Adam stops"},
      {"adam.min_delta", "1e-09", "smallest validation improvement that resets patience"},
      {"adam.shuffle", "true", "reshuffle the training split every epoch"},
      {"adam.shuffle_seed", "2", "seed of the epoch shuffles"},
      {"lbfgs.history_size", "50", "stored (s, y) pairs"},
      {"lbfgs.step_scale", "10", "line-search trial step"},
      {"lbfgs.grad_tol", "1e-12", "stop when max |gradient| falls to this value"},
      {"lbfgs.change_tol", "1e-12", "stop when |loss change| falls to this value"},
      {"lbfgs.max_iterations", "2000", "iteration budget (0 disables the stage)"},
      {"lbfgs.max_backtracks", "40", "line-search backtracks before giving up"},
      {"lbfgs.armijo_c1", "0.0001", "sufficient-decrease constant"},
      {"loss.alpha", "1", "weight of the x loss"},
      {"loss.beta", "1", "weight of the y loss"},
      {"loss.gamma", "1", "weight of the z loss"},
      {"split.holdout", "0.1", "validation fraction"},
      {"split.seed", "3", "seed of the train/validation split"},
      {"eval.points", "200", "points per generated test trajectory"},
      {"eval.seed", "5", "seed of the random trajectory"},
      {"eval.noise_seed", "13", "seed of evaluation-time noise"},
      {"output.dir", "runs/default", "experiment output directory"},
      {"threads", "0", "worker cap (0 = all cores); never changes results"},
  };
  return keys;
}

std::string config_help() {
  std::ostringstream out;
  out << "Configuration keys (key = value, '#' comments):\n";
  for (const auto& k : config_keys())
    out << "  " << k.key << " [default " << k.default_value << "]\n      " << k.description << '\n';
  return out.str();
}

void ExperimentConfig::validate() const {
  grid.validate();
  validate_electrodes(electrodes);
  if (!(constants.epsilon0 > 0.0)) throw ConfigError("epsilon0 must be positive");
  if (!(constants.exclusion_radius >= 0.0)) throw ConfigError("exclusion radius must be non-negative");
  if (!(noise_intensity >= 0.0)) throw ConfigError("noise intensity must be non-negative");
  if (eval_points < 2) throw ConfigError("eval.points must be at least 2");
  train.validate();
}

ExperimentConfig parse_config(const std::string& text) {
  std::map<std::string, Entry> entries;
  std::vector<Entry> electrode_entries;
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(std::string_view(raw).substr(0, raw.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (key == "electrode") {
      electrode_entries.push_back({value, line_no});
      continue;
    }
    bool known = false;
    for (const auto& k : config_keys()) known = known || k.key == key;
    if (!known) throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (!entries.emplace(key, Entry{value, line_no}).second)
      throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
  }

  ExperimentConfig c;
  if (const auto it = entries.find("profile"); it != entries.end()) {
    if (it->second.value == "desk") {
      c.grid = GridSpec::desk();
    } else if (it->second.value == "reference") {
      c.grid = GridSpec::reference();
    } else {
      Parser("profile", it->second).fail("expected desk or reference");
    }
    c.profile = it->second.value;
    entries.erase(it);
  }
  if (!electrode_entries.empty()) {
    c.electrodes.clear();
    for (const auto& e : electrode_entries) c.electrodes.push_back(Parser("electrode", e).electrode());
  }

  auto& t = c.train;
  std::size_t hidden_layers = 8;
  std::size_t hidden_units = 16;
  for (const auto& [key, entry] : entries) {
    const Parser p(key, entry);
    auto size = [&] { return static_cast<std::size_t>(p.u64()); };
    if (key == "grid.min") c.grid.min = p.triplet();
    else if (key == "grid.max") c.grid.max = p.triplet();
    else if (key == "grid.step") c.grid.step = p.triplet();
    else if (key == "constants.epsilon0") c.constants.epsilon0 = p.real();
    else if (key == "constants.exclusion_radius") c.constants.exclusion_radius = p.real();
    else if (key == "noise.intensity") c.noise_intensity = p.real();
    else if (key == "noise.seed") c.noise_seed = p.u64();
    else if (key == "network.hidden_layers") hidden_layers = size();
    else if (key == "network.hidden_units") hidden_units = size();
    else if (key == "network.seed") t.init_seed = p.u64();
    else if (key == "adam.learning_rate") t.adam.learning_rate = p.real();
    else if (key == "adam.beta1") t.adam.beta1 = p.real();
    else if (key == "adam.beta2") t.adam.beta2 = p.real();
    else if (key == "adam.epsilon") t.adam.epsilon = p.real();
    else if (key == "adam.max_epochs") t.max_epochs = size();
    else if (key == "adam.batch_size") t.batch_size = size();
    else if (key == "adam.patience") t.patience = size();
    else if (key == "adam.min_delta") t.min_delta = p.real();
    else if (key == "adam.shuffle") t.shuffle = p.boolean();
    else if (key == "adam.shuffle_seed") t.shuffle_seed = p.u64();
    else if (key == "lbfgs.history_size") t.lbfgs.history_size = size();
    else if (key == "lbfgs.step_scale") t.lbfgs.step_scale = p.real();
    else if (key == "lbfgs.grad_tol") t.lbfgs.grad_tol = p.real();
    else if (key == "lbfgs.change_tol") t.lbfgs.change_tol = p.real();
    else if (key == "lbfgs.max_iterations") t.lbfgs.max_iterations = size();
    else if (key == "lbfgs.max_backtracks") t.lbfgs.max_backtracks = size();
    else if (key == "lbfgs.armijo_c1") t.lbfgs.armijo_c1 = p.real();
    else if (key == "loss.alpha") t.weights.alpha = p.real();
    else if (key == "loss.beta") t.weights.beta = p.real();
    else if (key == "loss.gamma") t.weights.gamma = p.real();
    else if (key == "split.holdout") t.holdout_fraction = p.real();
    else if (key == "split.seed") t.split_seed = p.u64();
    else if (key == "eval.points") c.eval_points = size();
    else if (key == "eval.seed") c.eval_seed = p.u64();
    else if (key == "eval.noise_seed") c.eval_noise_seed = p.u64();
    else if (key == "output.dir") c.output_dir = entry.value;
    else if (key == "threads") c.threads = static_cast<unsigned>(p.u64());
  }
  if (hidden_layers > 1024 || hidden_units == 0 || hidden_units > 4096)
    throw ConfigError("network.hidden_layers / network.hidden_units out of range");
  t.architecture = Architecture::mlp(hidden_layers, hidden_units);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string format_config(const ExperimentConfig& c) {
  const auto& t = c.train;
  std::ostringstream out;
  out << "profile = " << c.profile << '\n';
  out << "grid.min = " << fmt_triplet(c.grid.min) << '\n';
  out << "grid.max = " << fmt_triplet(c.grid.max) << '\n';
  out << "grid.step = " << fmt_triplet(c.grid.step) << '\n';
  for (const auto& e : c.electrodes)
    out << "electrode = " << format_double(e.source.x) << ',' << format_double(e.source.y) << ','
        << format_double(e.source.z) << ',' << format_double(e.charge) << '\n';
  out << "constants.epsilon0 = " << format_double(c.constants.epsilon0) << '\n';
  out << "constants.exclusion_radius = " << format_double(c.constants.exclusion_radius) << '\n';
  out << "noise.intensity = " << format_double(c.noise_intensity) << '\n';
  out << "noise.seed = " << c.noise_seed << '\n';
  out << "network.hidden_layers = " << t.architecture.layer_count() - 1 << '\n';
  out << "network.hidden_units = " << (t.architecture.layer_count() > 1 ? t.architecture.widths[1] : 16) << '\n';
  out << "network.seed = " << t.init_seed << '\n';
  out << "adam.learning_rate = " << format_double(t.adam.learning_rate) << '\n';
  out << "adam.beta1 = " << format_double(t.adam.beta1) << '\n';
  out << "adam.beta2 = " << format_double(t.adam.beta2) << '\n';
  out << "adam.epsilon = " << format_double(t.adam.epsilon) << '\n';
  out << "adam.max_epochs = " << t.max_epochs << '\n';
  out << "adam.batch_size = " << t.batch_size << '\n';
  out << "adam.patience = " << t.patience << '\n';
  out << "adam.min_delta = " << format_double(t.min_delta) << '\n';
  out << "adam.shuffle = " << fmt_bool(t.shuffle) << '\n';
  out << "adam.shuffle_seed = " << t.shuffle_seed << '\n';
  out << "lbfgs.history_size = " << t.lbfgs.history_size << '\n';
  out << "lbfgs.step_scale = " << format_double(t.lbfgs.step_scale) << '\n';
  out << "lbfgs.grad_tol = " << format_double(t.lbfgs.grad_tol) << '\n';
  out << "lbfgs.change_tol = " << format_double(t.lbfgs.change_tol) << '\n';
  out << "lbfgs.max_iterations = " << t.lbfgs.max_iterations << '\n';
  out << "lbfgs.max_backtracks = " << t.lbfgs.max_backtracks << '\n';
  out << "lbfgs.armijo_c1 = " << format_double(t.lbfgs.armijo_c1) << '\n';
  out << "loss.alpha = " << format_double(t.weights.alpha) << '\n';
  out << "loss.beta = " << format_double(t.weights.beta) << '\n';
  out << "loss.gamma = " << format_double(t.weights.gamma) << '\n';
  out << "split.holdout = " << format_double(t.holdout_fraction) << '\n';
  out << "split.seed = " << t.split_seed << '\n';
  out << "eval.points = " << c.eval_points << '\n';
  out << "eval.seed = " << c.eval_seed << '\n';
  out << "eval.noise_seed = " << c.eval_noise_seed << '\n';
  out << "output.dir = " << c.output_dir << '\n';
  out << "threads = " << c.threads << '\n';
  return out.str();
}

}  // namespace efiln
