#pragma once

// Fully connected tanh network mapping a normalized field triplet to a
// normalized position triplet, with hand-written reverse-mode gradients.
//
// Batches are stored feature-major: element (feature f, sample s) of a batch
// of size B lives at f * B + s. Every output element is accumulated in the
// same order regardless of B, so a sample evaluated alone or inside a batch
// produces bitwise-identical outputs.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "efiln/dataset.hpp"
#include "efiln/field_model.hpp"

namespace efiln {

struct Architecture {
  /// Layer widths from input to output, e.g. {3, 16, ..., 16, 3}.
  std::vector<std::size_t> widths;

  /// 3 -> hidden_layers x hidden_units -> 3.
  static Architecture mlp(std::size_t hidden_layers, std::size_t hidden_units);
  /// Eight hidden layers of sixteen units.
  static Architecture reference() { return mlp(8, 16); }

  std::size_t layer_count() const { return widths.size() - 1; }
  std::size_t parameter_count() const;
  void validate() const;
  friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct LayerParams {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;  // out x in, row-major
  std::vector<double> biases;   // out

  double& w(std::size_t o, std::size_t i) { return weights[o * in + i]; }
  double w(std::size_t o, std::size_t i) const { return weights[o * in + i]; }
  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

/// Network parameters. The flat layout is, per layer in order, the row-major
/// weights followed by the biases.
class NetworkParams {
 public:
  NetworkParams() = default;
  /// All-zero parameters.
  explicit NetworkParams(Architecture arch);

  const Architecture& architecture() const { return arch_; }
  const std::vector<LayerParams>& layers() const { return layers_; }
  std::vector<LayerParams>& layers() { return layers_; }
  std::size_t parameter_count() const { return arch_.parameter_count(); }

  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
  static NetworkParams unflatten(const Architecture& arch, std::span<const double> flat);

  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;

 private:
  Architecture arch_;
  std::vector<LayerParams> layers_;
};

/// Glorot-uniform weights, zero biases; deterministic in seed.
NetworkParams init_network(const Architecture& arch, std::uint64_t seed);

/// Cached per-layer values from a batched forward pass. layers[l].pre is the
/// affine output of layer l and layers[l].post its activation (tanh for
/// hidden layers, identity for the output layer).
struct ForwardTrace {
  struct Layer {
    std::vector<double> pre;
    std::vector<double> post;
  };
  std::size_t batch = 0;
  std::vector<double> input;
  std::vector<Layer> layers;

  std::span<const double> output() const { return layers.back().post; }
};

/// Batched forward pass over a feature-major input block of 3 x batch values.
ForwardTrace forward(const NetworkParams& params, std::span<const double> input, std::size_t batch);
/// Reuses trace storage between calls.
void forward(const NetworkParams& params, std::span<const double> input, std::size_t batch,
             ForwardTrace& trace);
/// Single-sample convenience wrapper.
Position forward(const NetworkParams& params, const FieldVector& input);

/// Reverse-mode gradient of sum_s <output_gradient[:, s], output[:, s]> with
/// respect to every parameter, written into grad (flat layout). Throws
/// ShapeMismatch when sizes disagree with params or trace.
void backward(const NetworkParams& params, const ForwardTrace& trace,
              std::span<const double> output_gradient, std::span<double> grad);
std::vector<double> backward(const NetworkParams& params, const ForwardTrace& trace,
                             std::span<const double> output_gradient);

/// Trained model: parameters plus the normalization they were trained under.
struct Checkpoint {
  NetworkParams params;
  NormStats stats;
  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

/// Binary layout, all integers and doubles little-endian:
///   "EFILNCKP" | u32 version | u32 activation (1 = tanh hidden, linear out)
///   | u32 n_widths | u32 widths[n_widths] | u64 n_params | f64 params[n_params]
///   | f64 stats[12] (pos_min xyz, pos_max xyz, field_min xyz, field_max xyz)
std::string serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint deserialize_checkpoint(std::string_view bytes);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace efiln
