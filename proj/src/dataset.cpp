#include "efiln/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "efiln/errors.hpp"
#include "efiln/parallel.hpp"
#include "efiln/rng.hpp"

namespace efiln {

namespace {

constexpr double kStepSlack = 1e-9;
constexpr const char* kCsvHeader = "x,y,z,ex,ey,ez";
constexpr std::array<const char*, 3> kPosNames{"x", "y", "z"};
constexpr std::array<const char*, 3> kFieldNames{"ex", "ey", "ez"};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::optional<double> parse_double(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || text.empty())
    return std::nullopt;
  return v;
}

// ---------------------------------------------------------------- GridSpec

GridSpec GridSpec::reference() { return uniform(10.0, 110.0, 0.5); }

GridSpec GridSpec::desk() { return uniform(10.0, 60.0, 1.0); }

GridSpec GridSpec::uniform(double lo, double hi, double step) {
  GridSpec g;
  g.min.fill(lo);
  g.max.fill(hi);
  g.step.fill(step);
  return g;
}

void GridSpec::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (!std::isfinite(min[a]) || !std::isfinite(max[a]) || !std::isfinite(step[a]))
      throw ConfigError("grid bounds and step must be finite");
    if (!(min[a] < max[a])) throw ConfigError("grid min must be below grid max on every axis");
    if (!(step[a] > 0.0)) throw ConfigError("grid step must be positive");
  }
}

std::size_t GridSpec::points_on_axis(int axis) const {
  const double ratio = (max[axis] - min[axis]) / step[axis];
  return static_cast<std::size_t>(std::floor(ratio + kStepSlack)) + 1;
}

std::size_t GridSpec::size() const {
  return points_on_axis(0) * points_on_axis(1) * points_on_axis(2);
}

bool GridSpec::endpoints_exact() const {
  for (int a = 0; a < 3; ++a) {
    const double ratio = (max[a] - min[a]) / step[a];
    if (std::abs(ratio - std::round(ratio)) > kStepSlack) return false;
  }
  return true;
}

bool GridSpec::contains(const Position& p) const {
  for (int a = 0; a < 3; ++a)
    if (p[a] < min[a] || p[a] > max[a]) return false;
  return true;
}

bool GridSpec::is_node(const Position& p) const {
  for (int a = 0; a < 3; ++a) {
    const double k = std::round((p[a] - min[a]) / step[a]);
    if (k < 0.0 || k >= static_cast<double>(points_on_axis(a))) return false;
    if (node(a, static_cast<std::size_t>(k)) != p[a]) return false;
  }
  return true;
}

// ---------------------------------------------------------------- NormStats

Position NormStats::normalize(const Position& p) const {
  Position out;
  for (int a = 0; a < 3; ++a) out[a] = (p[a] - pos_min[a]) / (pos_max[a] - pos_min[a]);
  return out;
}

FieldVector NormStats::normalize(const FieldVector& f) const {
  FieldVector out;
  for (int a = 0; a < 3; ++a) out[a] = (f[a] - field_min[a]) / (field_max[a] - field_min[a]);
  return out;
}

Position NormStats::denormalize(const Position& p_norm) const {
  Position out;
  for (int a = 0; a < 3; ++a) out[a] = pos_min[a] + p_norm[a] * (pos_max[a] - pos_min[a]);
  return out;
}

// ---------------------------------------------------------------- generation

Dataset generate_grid(const GridSpec& spec, std::span<const ElectrodeSystem> electrodes,
                      const PhysicalConstants& constants) {
  spec.validate();
  validate_electrodes(electrodes);
  const std::size_t nx = spec.points_on_axis(0);
  const std::size_t ny = spec.points_on_axis(1);
  const std::size_t nz = spec.points_on_axis(2);
  Dataset d;
  d.samples.resize(nx * ny * nz);
  parallel_for(nx, [&](std::size_t ix) {
    std::size_t k = ix * ny * nz;
    for (std::size_t iy = 0; iy < ny; ++iy) {
      for (std::size_t iz = 0; iz < nz; ++iz, ++k) {
        const Position p{spec.node(0, ix), spec.node(1, iy), spec.node(2, iz)};
        d.samples[k] = {p, field_at(p, electrodes, constants)};
      }
    }
  });
  return d;
}

std::array<double, 3> field_std(const Dataset& d) {
  std::array<double, 3> mean{};
  std::array<double, 3> var{};
  if (d.samples.empty()) return var;
  const double m = static_cast<double>(d.samples.size());
  for (const auto& s : d.samples)
    for (int a = 0; a < 3; ++a) mean[a] += s.field[a];
  for (auto& v : mean) v /= m;
  for (const auto& s : d.samples)
    for (int a = 0; a < 3; ++a) {
      const double dv = s.field[a] - mean[a];
      var[a] += dv * dv;
    }
  for (auto& v : var) v = std::sqrt(v / m);
  return var;
}

Dataset add_noise(const Dataset& d, double intensity, std::uint64_t seed) {
  if (!(intensity >= 0.0) || !std::isfinite(intensity))
    throw ConfigError("noise intensity must be a finite non-negative fraction");
  Dataset out = d;
  out.noise_intensity = intensity;
  out.seed = seed;
  if (intensity == 0.0) return out;
  const auto sigma = field_std(d);
  std::array<double, 3> scale{};
  for (int a = 0; a < 3; ++a) scale[a] = intensity * sigma[a];
  constexpr std::size_t kChunk = 1 << 14;
  const std::size_t n = out.samples.size();
  parallel_for((n + kChunk - 1) / kChunk, [&](std::size_t chunk) {
    const std::size_t end = std::min(n, (chunk + 1) * kChunk);
    for (std::size_t i = chunk * kChunk; i < end; ++i) {
      Rng rng = Rng::stream(seed, i);
      for (int a = 0; a < 3; ++a) out.samples[i].field[a] += scale[a] * rng.normal();
    }
  });
  return out;
}

// ---------------------------------------------------------------- normalization

NormStats fit_norm_stats(const Dataset& d) {
  if (d.samples.size() < 2)
    throw DegenerateComponent("normalization needs at least two samples");
  NormStats s;
  const auto& first = d.samples.front();
  for (int a = 0; a < 3; ++a) {
    s.pos_min[a] = s.pos_max[a] = first.position[a];
    s.field_min[a] = s.field_max[a] = first.field[a];
  }
  for (const auto& smp : d.samples) {
    for (int a = 0; a < 3; ++a) {
      s.pos_min[a] = std::min(s.pos_min[a], smp.position[a]);
      s.pos_max[a] = std::max(s.pos_max[a], smp.position[a]);
      s.field_min[a] = std::min(s.field_min[a], smp.field[a]);
      s.field_max[a] = std::max(s.field_max[a], smp.field[a]);
    }
  }
  for (int a = 0; a < 3; ++a) {
    if (!(s.pos_max[a] > s.pos_min[a]))
      throw DegenerateComponent(std::string("position component ") + kPosNames[a] +
                                " has zero range");
    if (!(s.field_max[a] > s.field_min[a]))
      throw DegenerateComponent(std::string("field component ") + kFieldNames[a] +
                                " has zero range");
  }
  return s;
}

Dataset normalize(const Dataset& d, const NormStats& s) {
  Dataset out;
  out.samples.reserve(d.samples.size());
  for (const auto& smp : d.samples) out.samples.push_back({s.normalize(smp.position), s.normalize(smp.field)});
  out.stats = s;
  out.noise_intensity = d.noise_intensity;
  out.seed = d.seed;
  return out;
}

Position denormalize_position(const Position& p_norm, const NormStats& s) {
  return s.denormalize(p_norm);
}

// ---------------------------------------------------------------- splitting

SplitIndices split_indices(std::size_t m, double holdout_fraction, std::uint64_t seed) {
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0))
    throw ConfigError("holdout fraction must lie in [0, 1)");
  const auto order = shuffled_indices(m, seed);
  const auto n_val = static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(m)));
  SplitIndices out;
  out.validation.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  out.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(out.validation.begin(), out.validation.end());
  std::sort(out.train.begin(), out.train.end());
  return out;
}

Dataset subset(const Dataset& d, std::span<const std::size_t> indices) {
  Dataset out;
  out.stats = d.stats;
  out.noise_intensity = d.noise_intensity;
  out.seed = d.seed;
  out.samples.reserve(indices.size());
  for (std::size_t i : indices) out.samples.push_back(d.samples.at(i));
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& d, double holdout_fraction, std::uint64_t seed) {
  const auto idx = split_indices(d.samples.size(), holdout_fraction, seed);
  return {subset(d, idx.train), subset(d, idx.validation)};
}

// ---------------------------------------------------------------- persistence

void save_csv(const Dataset& d, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  std::string buf;
  buf.reserve(1 << 20);
  buf += kCsvHeader;
  buf += '\n';
  char num[64];
  auto put = [&](double v, char sep) {
    const auto res = std::to_chars(num, num + sizeof(num), v);
    buf.append(num, res.ptr);
    buf += sep;
  };
  for (const auto& s : d.samples) {
    put(s.position.x, ',');
    put(s.position.y, ',');
    put(s.position.z, ',');
    put(s.field.ex, ',');
    put(s.field.ey, ',');
    put(s.field.ez, '\n');
    if (buf.size() > (1 << 20) - 256) {
      out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
      buf.clear();
    }
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw SchemaError("missing CSV header in " + path.string(), 1);
  if (trim(line) != kCsvHeader)
    throw SchemaError("expected header '" + std::string(kCsvHeader) + "' in " + path.string(), 1);
  Dataset d;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    std::string_view rest = trim(line);
    if (rest.empty()) continue;
    std::array<double, 6> v{};
    for (int c = 0; c < 6; ++c) {
      const auto comma = rest.find(',');
      const bool last = (c == 5);
      if (last != (comma == std::string_view::npos))
        throw SchemaError("expected 6 comma-separated values in " + path.string(), row);
      const auto token = last ? rest : rest.substr(0, comma);
      const auto parsed = parse_double(token);
      if (!parsed || !std::isfinite(*parsed))
        throw SchemaError("bad number '" + std::string(token) + "' in " + path.string(), row);
      v[c] = *parsed;
      if (!last) rest.remove_prefix(comma + 1);
    }
    d.samples.push_back({{v[0], v[1], v[2]}, {v[3], v[4], v[5]}});
  }
  return d;
}

std::string format_stats(const NormStats& s) {
  std::ostringstream out;
  for (int a = 0; a < 3; ++a) {
    out << kPosNames[a] << "_min=" << format_double(s.pos_min[a]) << '\n';
    out << kPosNames[a] << "_max=" << format_double(s.pos_max[a]) << '\n';
  }
  for (int a = 0; a < 3; ++a) {
    out << kFieldNames[a] << "_min=" << format_double(s.field_min[a]) << '\n';
    out << kFieldNames[a] << "_max=" << format_double(s.field_max[a]) << '\n';
  }
  return out.str();
}

NormStats parse_stats(const std::string& text) {
  std::map<std::string, double, std::less<>> kv;
  std::istringstream in(text);
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw SchemaError("stats line without '='", row);
    const std::string key(trim(t.substr(0, eq)));
    const auto v = parse_double(t.substr(eq + 1));
    if (!v || !std::isfinite(*v)) throw SchemaError("bad value for stats key " + key, row);
    if (!kv.emplace(key, *v).second) throw SchemaError("duplicate stats key " + key, row);
  }
  auto take = [&](const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw SchemaError("missing stats key " + key, row);
    const double v = it->second;
    kv.erase(it);
    return v;
  };
  NormStats s;
  for (int a = 0; a < 3; ++a) {
    s.pos_min[a] = take(std::string(kPosNames[a]) + "_min");
    s.pos_max[a] = take(std::string(kPosNames[a]) + "_max");
    s.field_min[a] = take(std::string(kFieldNames[a]) + "_min");
    s.field_max[a] = take(std::string(kFieldNames[a]) + "_max");
  }
  if (!kv.empty()) throw SchemaError("unknown stats key " + kv.begin()->first, row);
  return s;
}

void save_stats(const NormStats& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << format_stats(s);
  if (!out) throw IoError("failed writing " + path.string());
}

NormStats load_stats(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_stats(buf.str());
}

}  // namespace efiln
