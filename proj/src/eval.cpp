#include "efiln/eval.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "efiln/errors.hpp"
#include "efiln/rng.hpp"

namespace efiln {

namespace {

constexpr std::array<const char*, 3> kAxes{"x", "y", "z"};

// Moves p half a step along z when it sits exactly on a lattice node, toward
// the interior.
Position off_node(Position p, const GridSpec& g) {
  if (!g.is_node(p)) return p;
  const double half = 0.5 * g.step[2];
  p.z += (p.z + half < g.max[2]) ? half : -half;
  return p;
}

}  // namespace

TrajectoryKind parse_trajectory_kind(std::string_view name) {
  if (name == "spiral") return TrajectoryKind::Spiral;
  if (name == "circle") return TrajectoryKind::Circle;
  if (name == "random") return TrajectoryKind::Random;
  throw ConfigError("unknown trajectory kind '" + std::string(name) + "' (spiral|circle|random)");
}

std::string to_string(TrajectoryKind kind) {
  switch (kind) {
    case TrajectoryKind::Spiral: return "spiral";
    case TrajectoryKind::Circle: return "circle";
    case TrajectoryKind::Random: return "random";
  }
  return "unknown";
}

Position predict(const Checkpoint& model, const FieldVector& field) {
  return model.stats.denormalize(forward(model.params, model.stats.normalize(field)));
}

std::vector<Position> predict(const Checkpoint& model, std::span<const FieldVector> fields) {
  const std::size_t n = fields.size();
  std::vector<Position> out(n);
  if (n == 0) return out;
  std::vector<double> in(3 * n);
  for (std::size_t s = 0; s < n; ++s) {
    const auto f = model.stats.normalize(fields[s]);
    for (int a = 0; a < 3; ++a) in[static_cast<std::size_t>(a) * n + s] = f[a];
  }
  const auto trace = forward(model.params, in, n);
  const auto y = trace.output();
  for (std::size_t s = 0; s < n; ++s)
    out[s] = model.stats.denormalize({y[s], y[n + s], y[2 * n + s]});
  return out;
}

std::vector<Position> make_trajectory(TrajectoryKind kind, std::size_t n, std::uint64_t seed,
                                      const GridSpec& domain) {
  domain.validate();
  if (n < 2) throw ConfigError("a trajectory needs at least two points");
  for (int a = 0; a < 3; ++a)
    if (domain.extent(a) < 4.0 * domain.step[a])
      throw DomainTooSmall("trajectory domain must span at least four steps on every axis");

  Position center;
  std::array<double, 3> ext{};
  for (int a = 0; a < 3; ++a) {
    center[a] = 0.5 * (domain.min[a] + domain.max[a]);
    ext[a] = domain.extent(a);
  }
  std::vector<Position> pts;
  pts.reserve(n);
  const double two_pi = 2.0 * std::numbers::pi;
  switch (kind) {
    case TrajectoryKind::Spiral: {
      constexpr double kTurns = 3.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double u = static_cast<double>(i) / static_cast<double>(n - 1);
        const double phi = two_pi * kTurns * u;
        pts.push_back(off_node({center.x + 0.3 * ext[0] * std::cos(phi),
                                center.y + 0.3 * ext[1] * std::sin(phi),
                                domain.min[2] + 0.1 * ext[2] + 0.8 * ext[2] * u},
                               domain));
      }
      break;
    }
    case TrajectoryKind::Circle: {
      double z = center.z;
      const double k = std::round((z - domain.min[2]) / domain.step[2]);
      if (domain.node(2, static_cast<std::size_t>(k)) == z) z += 0.5 * domain.step[2];
      for (std::size_t i = 0; i < n; ++i) {
        const double phi = two_pi * static_cast<double>(i) / static_cast<double>(n);
        pts.push_back({center.x + 0.3 * ext[0] * std::cos(phi), center.y + 0.3 * ext[1] * std::sin(phi), z});
      }
      break;
    }
    case TrajectoryKind::Random: {
      Rng rng(seed);
      auto interior = [&](int a) {
        double u = 0.0;
        while (u == 0.0) u = rng.uniform();
        return domain.min[a] + ext[a] * u;
      };
      for (std::size_t i = 0; i < n; ++i) {
        Position p;
        p.x = interior(0);
        p.y = interior(1);
        p.z = interior(2);
        pts.push_back(off_node(p, domain));
      }
      break;
    }
  }
  return pts;
}

EvalMetrics compute_metrics(std::span<const Position> truth, std::span<const Position> predicted,
                            double extent) {
  if (truth.size() != predicted.size()) throw ShapeMismatch("truth and prediction counts differ");
  EvalMetrics m;
  m.points = truth.size();
  if (truth.empty()) return m;
  std::array<double, 3> abs_sum{};
  std::array<double, 3> sq_sum{};
  double euclid = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    double d2 = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double e = predicted[i][a] - truth[i][a];
      abs_sum[a] += std::abs(e);
      sq_sum[a] += e * e;
      d2 += e * e;
    }
    euclid += std::sqrt(d2);
  }
  const double n = static_cast<double>(truth.size());
  for (int a = 0; a < 3; ++a) {
    m.mae[a] = abs_sum[a] / n;
    m.rmse[a] = std::sqrt(sq_sum[a] / n);
  }
  m.mean_euclidean = euclid / n;
  m.percent_error = (m.mae[0] + m.mae[1] + m.mae[2]) / 3.0 / extent * 100.0;
  return m;
}

EvalResult evaluate(const Checkpoint& model, std::span<const Position> points,
                    std::span<const ElectrodeSystem> electrodes, const PhysicalConstants& constants,
                    const EvalOptions& options) {
  const auto& st = model.stats;
  for (const auto& p : points) {
    for (int a = 0; a < 3; ++a)
      if (!(p[a] >= st.pos_min[a] && p[a] <= st.pos_max[a]))
        throw ConfigError("evaluation point lies outside the training bounding box");
    if (options.grid && options.grid->is_node(p))
      throw ConfigError("evaluation point coincides with a dataset grid node");
  }
  Dataset synth;
  synth.samples.reserve(points.size());
  for (const auto& p : points) synth.samples.push_back({p, field_at(p, electrodes, constants)});
  if (options.noise_intensity > 0.0) synth = add_noise(synth, options.noise_intensity, options.noise_seed);

  std::vector<FieldVector> fields;
  fields.reserve(points.size());
  for (const auto& s : synth.samples) fields.push_back(s.field);

  EvalResult r;
  r.trajectory.name = options.name;
  r.trajectory.truth.assign(points.begin(), points.end());
  r.trajectory.predicted = predict(model, fields);
  const double extent =
      ((st.pos_max[0] - st.pos_min[0]) + (st.pos_max[1] - st.pos_min[1]) + (st.pos_max[2] - st.pos_min[2])) / 3.0;
  r.metrics = compute_metrics(r.trajectory.truth, r.trajectory.predicted, extent);
  return r;
}

void write_trajectory_csv(const Trajectory& t, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "idx,true_x,true_y,true_z,pred_x,pred_y,pred_z\n";
  for (std::size_t i = 0; i < t.truth.size(); ++i) {
    const auto& p = t.truth[i];
    const auto& q = t.predicted.at(i);
    out << i << ',' << format_double(p.x) << ',' << format_double(p.y) << ',' << format_double(p.z)
        << ',' << format_double(q.x) << ',' << format_double(q.y) << ',' << format_double(q.z) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<Position> load_points_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || (line != "x,y,z" && line != "x,y,z\r"))
    throw SchemaError("expected header 'x,y,z' in " + path.string(), 1);
  std::vector<Position> pts;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::array<double, 3> v{};
    std::string_view rest = line;
    for (int c = 0; c < 3; ++c) {
      const auto comma = rest.find(',');
      if ((c == 2) != (comma == std::string_view::npos))
        throw SchemaError("expected 3 comma-separated values in " + path.string(), row);
      const auto parsed = parse_double(c == 2 ? rest : rest.substr(0, comma));
      if (!parsed || !std::isfinite(*parsed)) throw SchemaError("bad number in " + path.string(), row);
      v[c] = *parsed;
      if (c < 2) rest.remove_prefix(comma + 1);
    }
    pts.push_back({v[0], v[1], v[2]});
  }
  return pts;
}

std::string format_metrics(const EvalMetrics& m) {
  std::ostringstream out;
  for (int a = 0; a < 3; ++a) out << "mae_" << kAxes[a] << '=' << format_double(m.mae[a]) << '\n';
  for (int a = 0; a < 3; ++a) out << "rmse_" << kAxes[a] << '=' << format_double(m.rmse[a]) << '\n';
  out << "mean_euclidean=" << format_double(m.mean_euclidean) << '\n';
  out << "percent_error=" << format_double(m.percent_error) << '\n';
  out << "points=" << m.points << '\n';
  return out.str();
}

EvalMetrics parse_metrics(const std::string& text) {
  std::map<std::string, double> kv;
  std::istringstream in(text);
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw SchemaError("metrics line without '='", row);
    const auto v = parse_double(std::string_view(line).substr(eq + 1));
    if (!v) throw SchemaError("bad metrics value", row);
    kv[line.substr(0, eq)] = *v;
  }
  auto get = [&](const std::string& k) {
    const auto it = kv.find(k);
    if (it == kv.end()) throw SchemaError("missing metrics key " + k, row);
    return it->second;
  };
  EvalMetrics m;
  for (int a = 0; a < 3; ++a) {
    m.mae[a] = get(std::string("mae_") + kAxes[a]);
    m.rmse[a] = get(std::string("rmse_") + kAxes[a]);
  }
  m.mean_euclidean = get("mean_euclidean");
  m.percent_error = get("percent_error");
  m.points = static_cast<std::size_t>(get("points"));
  return m;
}

std::string metrics_csv_header() {
  return "mae_x,mae_y,mae_z,rmse_x,rmse_y,rmse_z,mean_euclidean,percent_error,points";
}

std::string metrics_csv_row(const EvalMetrics& m) {
  std::ostringstream out;
  for (int a = 0; a < 3; ++a) out << format_double(m.mae[a]) << ',';
  for (int a = 0; a < 3; ++a) out << format_double(m.rmse[a]) << ',';
  out << format_double(m.mean_euclidean) << ',' << format_double(m.percent_error) << ',' << m.points;
  return out.str();
}

}  // namespace efiln
