#include "efiln/network.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "efiln/activation.hpp"
#include "efiln/errors.hpp"
#include "efiln/rng.hpp"
#include "kernel_attrs.hpp"

namespace efiln {

namespace {

constexpr char kMagic[8] = {'E', 'F', 'I', 'L', 'N', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kActivationTanhLinear = 1;

constexpr std::size_t kLanes = 8;

// Fixed-order dot product over kLanes independent partial sums.
EFILN_INLINE double dot(const double* a, const double* b, std::size_t n) {
  double acc[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (std::size_t j = 0; j < kLanes; ++j) acc[j] += a[i + j] * b[i + j];
  for (; i < n; ++i) acc[0] += a[i] * b[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

EFILN_INLINE double sum(const double* a, std::size_t n) {
  double acc[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes)
    for (std::size_t j = 0; j < kLanes; ++j) acc[j] += a[i + j];
  for (; i < n; ++i) acc[0] += a[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

// out (o x B) = W (o x i) * in (i x B) + b, accumulated per element in the
// order b, w0*in0, w1*in1, ... independent of B.
EFILN_KERNEL void affine(const LayerParams& layer, const double* in, std::size_t batch, double* out) {
  for (std::size_t o = 0; o < layer.out; ++o) {
    double* row = out + o * batch;
    const double b = layer.biases[o];
    for (std::size_t s = 0; s < batch; ++s) row[s] = b;
    for (std::size_t i = 0; i < layer.in; ++i) {
      const double w = layer.w(o, i);
      const double* src = in + i * batch;
      for (std::size_t s = 0; s < batch; ++s) row[s] += w * src[s];
    }
  }
}

// One layer of reverse mode. delta holds dL/d(post) on entry; when post is
// given (hidden layers) it is first turned into dL/d(pre) via tanh' = 1 - post^2.
// upstream, if given, receives W^T delta and must be zeroed by the caller.
EFILN_KERNEL void backprop_layer(const LayerParams& layer, std::size_t batch, const double* post,
                                 const double* in, double* delta, double* gw, double* gb,
                                 double* upstream) {
  const std::size_t n = layer.out * batch;
  if (post)
    for (std::size_t j = 0; j < n; ++j) delta[j] *= 1.0 - post[j] * post[j];
  for (std::size_t o = 0; o < layer.out; ++o) {
    const double* d = delta + o * batch;
    for (std::size_t i = 0; i < layer.in; ++i) gw[o * layer.in + i] = dot(d, in + i * batch, batch);
    gb[o] = sum(d, batch);
  }
  if (!upstream) return;
  for (std::size_t o = 0; o < layer.out; ++o) {
    const double* d = delta + o * batch;
    for (std::size_t i = 0; i < layer.in; ++i) {
      const double w = layer.w(o, i);
      double* u = upstream + i * batch;
      for (std::size_t s = 0; s < batch; ++s) u[s] += w * d[s];
    }
  }
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint64_t uint(int width) {
    if (pos_ + static_cast<std::size_t>(width) > bytes_.size())
      throw IoError("checkpoint truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(uint(4)); }
  std::uint64_t u64() { return uint(8); }
  double f64() { return std::bit_cast<double>(uint(8)); }
  std::string_view take(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw IoError("checkpoint truncated");
    auto v = bytes_.substr(pos_, n);
    pos_ += n;
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

// ---------------------------------------------------------------- Architecture

Architecture Architecture::mlp(std::size_t hidden_layers, std::size_t hidden_units) {
  Architecture a;
  a.widths.push_back(3);
  for (std::size_t i = 0; i < hidden_layers; ++i) a.widths.push_back(hidden_units);
  a.widths.push_back(3);
  return a;
}

std::size_t Architecture::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) n += widths[l] * widths[l + 1] + widths[l + 1];
  return n;
}

void Architecture::validate() const {
  if (widths.size() < 2) throw ConfigError("architecture needs at least an input and output layer");
  if (widths.front() != 3 || widths.back() != 3)
    throw ConfigError("architecture must map 3 inputs to 3 outputs");
  for (auto w : widths)
    if (w == 0) throw ConfigError("layer widths must be positive");
}

// ---------------------------------------------------------------- NetworkParams

NetworkParams::NetworkParams(Architecture arch) : arch_(std::move(arch)) {
  arch_.validate();
  for (std::size_t l = 0; l < arch_.layer_count(); ++l) {
    LayerParams layer;
    layer.in = arch_.widths[l];
    layer.out = arch_.widths[l + 1];
    layer.weights.assign(layer.in * layer.out, 0.0);
    layer.biases.assign(layer.out, 0.0);
    layers_.push_back(std::move(layer));
  }
}

std::vector<double> NetworkParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto& layer : layers_) {
    flat.insert(flat.end(), layer.weights.begin(), layer.weights.end());
    flat.insert(flat.end(), layer.biases.begin(), layer.biases.end());
  }
  return flat;
}

void NetworkParams::assign(std::span<const double> flat) {
  if (flat.size() != parameter_count())
    throw ShapeMismatch("flat parameter vector has " + std::to_string(flat.size()) +
                        " entries, architecture needs " + std::to_string(parameter_count()));
  std::size_t k = 0;
  for (auto& layer : layers_) {
    std::memcpy(layer.weights.data(), flat.data() + k, layer.weights.size() * sizeof(double));
    k += layer.weights.size();
    std::memcpy(layer.biases.data(), flat.data() + k, layer.biases.size() * sizeof(double));
    k += layer.biases.size();
  }
}

NetworkParams NetworkParams::unflatten(const Architecture& arch, std::span<const double> flat) {
  NetworkParams p(arch);
  p.assign(flat);
  return p;
}

NetworkParams init_network(const Architecture& arch, std::uint64_t seed) {
  NetworkParams p(arch);
  Rng rng(seed);
  for (auto& layer : p.layers()) {
    const double a = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
    for (auto& w : layer.weights) w = rng.uniform(-a, a);
  }
  return p;
}

// ---------------------------------------------------------------- forward / backward

void forward(const NetworkParams& params, std::span<const double> input, std::size_t batch,
             ForwardTrace& trace) {
  const auto& layers = params.layers();
  if (input.size() != layers.front().in * batch)
    throw ShapeMismatch("forward input has " + std::to_string(input.size()) + " values, expected " +
                        std::to_string(layers.front().in * batch));
  trace.batch = batch;
  trace.input.assign(input.begin(), input.end());
  trace.layers.resize(layers.size());
  const double* in = trace.input.data();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto& cache = trace.layers[l];
    const std::size_t n = layers[l].out * batch;
    cache.pre.resize(n);
    cache.post.resize(n);
    affine(layers[l], in, batch, cache.pre.data());
    if (l + 1 < layers.size()) {
      tanh_inplace(cache.pre, cache.post);
    } else {
      cache.post = cache.pre;
    }
    in = cache.post.data();
  }
}

ForwardTrace forward(const NetworkParams& params, std::span<const double> input, std::size_t batch) {
  ForwardTrace trace;
  forward(params, input, batch, trace);
  return trace;
}

Position forward(const NetworkParams& params, const FieldVector& input) {
  const double in[3] = {input.ex, input.ey, input.ez};
  const auto trace = forward(params, in, 1);
  const auto out = trace.output();
  return {out[0], out[1], out[2]};
}

void backward(const NetworkParams& params, const ForwardTrace& trace,
              std::span<const double> output_gradient, std::span<double> grad) {
  const auto& layers = params.layers();
  const std::size_t batch = trace.batch;
  if (trace.layers.size() != layers.size()) throw ShapeMismatch("trace does not match network depth");
  if (output_gradient.size() != layers.back().out * batch)
    throw ShapeMismatch("output gradient has " + std::to_string(output_gradient.size()) +
                        " values, expected " + std::to_string(layers.back().out * batch));
  if (grad.size() != params.parameter_count())
    throw ShapeMismatch("gradient buffer has wrong size");
  for (std::size_t l = 0; l < layers.size(); ++l)
    if (trace.layers[l].post.size() != layers[l].out * batch)
      throw ShapeMismatch("trace layer " + std::to_string(l) + " does not match network");

  // Offsets of each layer's block inside the flat gradient.
  std::vector<std::size_t> offset(layers.size());
  std::size_t k = 0;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    offset[l] = k;
    k += layers[l].weights.size() + layers[l].biases.size();
  }

  std::vector<double> delta(output_gradient.begin(), output_gradient.end());
  std::vector<double> upstream;
  for (std::size_t l = layers.size(); l-- > 0;) {
    const auto& layer = layers[l];
    const double* post = (l + 1 < layers.size()) ? trace.layers[l].post.data() : nullptr;
    const double* in = (l == 0) ? trace.input.data() : trace.layers[l - 1].post.data();
    double* gw = grad.data() + offset[l];
    if (l > 0) upstream.assign(layer.in * batch, 0.0);
    backprop_layer(layer, batch, post, in, delta.data(), gw, gw + layer.weights.size(),
                   l > 0 ? upstream.data() : nullptr);
    if (l == 0) break;
    delta.swap(upstream);
  }
}

std::vector<double> backward(const NetworkParams& params, const ForwardTrace& trace,
                             std::span<const double> output_gradient) {
  std::vector<double> grad(params.parameter_count());
  backward(params, trace, output_gradient, grad);
  return grad;
}

// ---------------------------------------------------------------- checkpoints

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  const auto& arch = ckpt.params.architecture();
  std::string out(kMagic, sizeof(kMagic));
  put_u32(out, kVersion);
  put_u32(out, kActivationTanhLinear);
  put_u32(out, static_cast<std::uint32_t>(arch.widths.size()));
  for (auto w : arch.widths) put_u32(out, static_cast<std::uint32_t>(w));
  const auto flat = ckpt.params.flatten();
  put_u64(out, flat.size());
  for (double v : flat) put_f64(out, v);
  for (double v : ckpt.stats.pos_min) put_f64(out, v);
  for (double v : ckpt.stats.pos_max) put_f64(out, v);
  for (double v : ckpt.stats.field_min) put_f64(out, v);
  for (double v : ckpt.stats.field_max) put_f64(out, v);
  return out;
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(sizeof(kMagic)) != std::string_view(kMagic, sizeof(kMagic)))
    throw IoError("not a checkpoint file (bad magic)");
  if (const auto v = r.u32(); v != kVersion)
    throw IoError("unsupported checkpoint version " + std::to_string(v));
  if (r.u32() != kActivationTanhLinear) throw IoError("unsupported activation code in checkpoint");
  Architecture arch;
  const auto n_widths = r.u32();
  if (n_widths < 2 || n_widths > 4096) throw IoError("implausible layer count in checkpoint");
  for (std::uint32_t i = 0; i < n_widths; ++i) arch.widths.push_back(r.u32());
  try {
    arch.validate();
  } catch (const ConfigError& e) {
    throw IoError(std::string("checkpoint architecture invalid: ") + e.what());
  }
  const auto n_params = r.u64();
  if (n_params != arch.parameter_count()) throw IoError("checkpoint parameter count mismatch");
  std::vector<double> flat(n_params);
  for (auto& v : flat) v = r.f64();
  Checkpoint ckpt{NetworkParams::unflatten(arch, flat), {}};
  for (auto& v : ckpt.stats.pos_min) v = r.f64();
  for (auto& v : ckpt.stats.pos_max) v = r.f64();
  for (auto& v : ckpt.stats.field_min) v = r.f64();
  for (auto& v : ckpt.stats.field_max) v = r.f64();
  if (!r.done()) throw IoError("trailing bytes after checkpoint");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace efiln
