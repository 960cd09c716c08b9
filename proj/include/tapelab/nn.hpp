#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "tapelab/error.hpp"

namespace tapelab::nn {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Activations are stored one sample per column, channel-major within the column:
// entry (c * length + t, b) is channel c at position t of sample b.

struct Shape {
  Index channels = 1;
  Index length = 1;

  Index size() const { return channels * length; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

enum class Activation { kNone, kRelu, kSigmoid };

struct Conv1d {
  Index out_channels = 1;
  Index kernel = 1;
  Index stride = 1;
  Index padding = 0;
};

/// Adjoint of Conv1d: L_out = (L - 1) * stride - 2 * padding + kernel.
struct ConvTranspose1d {
  Index out_channels = 1;
  Index kernel = 1;
  Index stride = 1;
  Index padding = 0;
};

/// Fully connected over the flattened input. Output shape is {1, units}.
struct Dense {
  Index units = 1;
  bool bias = true;
};

/// Non-overlapping max-pool (stride = window); a trailing remainder is dropped.
struct MaxPool1d {
  Index window = 2;
};

/// Non-overlapping mean-pool (stride = window); a trailing remainder is dropped.
struct AvgPool1d {
  Index window = 2;
};

struct Act {
  Activation fn = Activation::kNone;
};

/// Inverted dropout, active only in training mode.
struct Dropout {
  double rate = 0.0;
};

/// Reinterprets the flattened activation as `channels` maps.
struct Reshape {
  Index channels = 1;
};

using LayerSpec = std::variant<Conv1d, ConvTranspose1d, Dense, MaxPool1d, AvgPool1d, Act,
                               Dropout, Reshape>;

struct NetworkSpec {
  Shape input;
  std::vector<LayerSpec> layers;
};

std::string describe(const LayerSpec& layer);

struct RunMode {
  bool training = false;
  std::uint64_t dropout_seed = 0;
};

/// Intermediate values kept by forward() for backward().
struct LayerCache {
  Matrix input;
  Matrix output;
  Matrix scratch;               // im2col buffer / reordered input / dropout mask
  std::vector<Index> argmax;    // max-pool winners
};

struct Tape {
  std::vector<LayerCache> layers;
};

/// Feed-forward stack with all parameters in one flat vector.
class Network {
 public:
  Network() = default;
  explicit Network(NetworkSpec spec);

  const NetworkSpec& spec() const { return spec_; }
  Shape input_shape() const { return shapes_.front(); }
  Shape output_shape() const { return shapes_.back(); }
  /// shapes()[i] is the input of layer i; the last entry is the network output.
  const std::vector<Shape>& shapes() const { return shapes_; }

  Index parameter_count() const { return parameters_.size(); }
  Vector& parameters() { return parameters_; }
  const Vector& parameters() const { return parameters_; }
  Index parameter_offset(std::size_t layer) const { return offsets_[layer]; }

  /// He/LeCun-uniform weights scaled by fan-in, zero biases.
  void initialize(std::uint64_t seed);
  /// Seed of the last initialize() call (or the one recorded with restored parameters).
  std::uint64_t init_seed() const { return init_seed_; }
  /// Replaces all parameters; the size must match the spec.
  void restore(Vector parameters, std::uint64_t init_seed);

  Matrix forward(const Eigen::Ref<const Matrix>& input, Tape* tape = nullptr,
                 RunMode mode = {}) const;

  /// Adds d(loss)/d(parameters) into `gradient` and returns d(loss)/d(input), or an
  /// empty matrix when `input_gradient` is false.
  Matrix backward(const Eigen::Ref<const Matrix>& grad_output, const Tape& tape,
                  Eigen::Ref<Vector> gradient, bool input_gradient = true) const;

 private:
  NetworkSpec spec_;
  std::vector<Shape> shapes_;
  std::vector<Index> offsets_;  // first parameter of each layer
  Vector parameters_;
  std::uint64_t init_seed_ = 0;
};

/// FNV-1a over the parameter bytes, for reproducibility checks.
std::uint64_t checksum(const Vector& parameters);

}  // namespace tapelab::nn
