#pragma once

// Dense feed-forward network u(t, x, c; theta) with a fixed (non-trained)
// affine input normalization. Parameters live in one flat vector so the
// optimizers can work on it directly.

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "cdpinn/binary_io.hpp"
#include "cdpinn/errors.hpp"
#include "cdpinn/random.hpp"

namespace cdpinn {

enum class Activation : std::uint8_t { kTanh = 0, kSin = 1 };

inline Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "sin") return Activation::kSin;
  throw ConfigError("unknown activation '" + name + "' (expected tanh or sin)");
}

inline std::string activation_name(Activation a) { return a == Activation::kTanh ? "tanh" : "sin"; }

struct ArchitectureConfig {
  std::vector<int> widths{128, 128, 128, 128, 128};
  Activation activation = Activation::kTanh;
  std::uint64_t seed = 0;
};

class NetworkWeights {
 public:
  using Vector = Eigen::VectorXd;
  using MatMap = Eigen::Map<const Eigen::MatrixXd>;
  using VecMap = Eigen::Map<const Eigen::VectorXd>;

  NetworkWeights() = default;

  /// Layer sizes d_0 (input), d_1, ..., d_L (output).
  NetworkWeights(std::vector<int> sizes, std::vector<Activation> acts, std::uint64_t seed = 0)
      : sizes_(std::move(sizes)), acts_(std::move(acts)), seed_(seed) {
    if (sizes_.size() < 2) throw ConfigError("network needs at least an input and output layer");
    for (int s : sizes_) {
      if (s < 1) throw ConfigError("layer sizes must be positive");
    }
    if (acts_.size() != sizes_.size() - 2) throw ConfigError("one activation per hidden layer required");
    offsets_.push_back(0);
    for (size_t l = 0; l + 1 < sizes_.size(); ++l) {
      offsets_.push_back(offsets_.back() + sizes_[l + 1] * sizes_[l] + sizes_[l + 1]);
    }
    params_ = Vector::Zero(offsets_.back());
    shift_ = Vector::Zero(sizes_[0]);
    scale_ = Vector::Ones(sizes_[0]);
  }

  int in_dim() const { return sizes_.front(); }
  int out_dim() const { return sizes_.back(); }
  int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }
  int layer_in(int l) const { return sizes_[l]; }
  int layer_out(int l) const { return sizes_[l + 1]; }
  const std::vector<int>& sizes() const { return sizes_; }
  Activation activation(int hidden) const { return acts_[hidden]; }
  const std::vector<Activation>& activations() const { return acts_; }
  std::uint64_t seed() const { return seed_; }
  Eigen::Index param_count() const { return params_.size(); }

  MatMap W(int l) const { return MatMap(params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]); }
  VecMap b(int l) const {
    return VecMap(params_.data() + offsets_[l] + sizes_[l + 1] * sizes_[l], sizes_[l + 1]);
  }
  Eigen::Map<Eigen::MatrixXd> W_mut(int l) {
    return {params_.data() + offsets_[l], sizes_[l + 1], sizes_[l]};
  }
  Eigen::Map<Eigen::VectorXd> b_mut(int l) {
    return {params_.data() + offsets_[l] + sizes_[l + 1] * sizes_[l], sizes_[l + 1]};
  }
  /// Offsets of layer l's weight block and bias block in the flat vector.
  Eigen::Index weight_offset(int l) const { return offsets_[l]; }
  Eigen::Index bias_offset(int l) const { return offsets_[l] + sizes_[l + 1] * sizes_[l]; }

  const Vector& params() const { return params_; }
  Vector& params() { return params_; }
  void set_params(const Vector& p) {
    if (p.size() != params_.size()) throw ShapeError("parameter vector length mismatch");
    params_ = p;
  }

  /// Network input is ((z - shift) .* scale); not trained.
  const Vector& input_shift() const { return shift_; }
  const Vector& input_scale() const { return scale_; }
  void set_input_normalization(const Vector& shift, const Vector& scale) {
    if (shift.size() != in_dim() || scale.size() != in_dim()) throw ShapeError("normalization size mismatch");
    shift_ = shift;
    scale_ = scale;
  }
  /// Maps per-axis bounds [lo, hi] onto [-1, 1].
  void normalize_to_box(const Vector& lo, const Vector& hi) {
    Vector shift = 0.5 * (lo + hi);
    Vector scale(in_dim());
    for (int i = 0; i < in_dim(); ++i) scale[i] = hi[i] > lo[i] ? 2.0 / (hi[i] - lo[i]) : 1.0;
    set_input_normalization(shift, scale);
  }

  friend bool operator==(const NetworkWeights& a, const NetworkWeights& b) {
    return a.sizes_ == b.sizes_ && a.acts_ == b.acts_ && a.seed_ == b.seed_ && a.params_ == b.params_ &&
           a.shift_ == b.shift_ && a.scale_ == b.scale_;
  }

 private:
  std::vector<int> sizes_;
  std::vector<Activation> acts_;
  std::vector<Eigen::Index> offsets_;
  std::uint64_t seed_ = 0;
  Vector params_;
  Vector shift_;
  Vector scale_;
};

/// Glorot-uniform weights, zero biases; deterministic under cfg.seed.
inline NetworkWeights init_network(const ArchitectureConfig& cfg, int in_dim, int out_dim) {
  if (cfg.widths.empty()) throw ConfigError("architecture needs at least one hidden layer");
  if (in_dim < 1 || out_dim < 1) throw ConfigError("input and output dimensions must be >= 1");
  std::vector<int> sizes{in_dim};
  sizes.insert(sizes.end(), cfg.widths.begin(), cfg.widths.end());
  sizes.push_back(out_dim);
  NetworkWeights net(sizes, std::vector<Activation>(cfg.widths.size(), cfg.activation), cfg.seed);
  Rng rng(cfg.seed);
  for (int l = 0; l < net.num_layers(); ++l) {
    const double limit = std::sqrt(6.0 / (net.layer_in(l) + net.layer_out(l)));
    auto W = net.W_mut(l);
    for (Eigen::Index j = 0; j < W.cols(); ++j) {
      for (Eigen::Index i = 0; i < W.rows(); ++i) W(i, j) = rng.uniform(-limit, limit);
    }
  }
  return net;
}

// Checkpoint container: "CDPN", version, architecture, normalization,
// parameters, trailing CRC-32. All integers and floats little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::vector<std::uint8_t> serialize_checkpoint(const NetworkWeights& net) {
  io::ByteWriter w;
  w.bytes("CDPN", 4);
  w.u32(kCheckpointVersion);
  w.u64(net.seed());
  w.u32(static_cast<std::uint32_t>(net.sizes().size()));
  for (int s : net.sizes()) w.u32(static_cast<std::uint32_t>(s));
  for (Activation a : net.activations()) w.u8(static_cast<std::uint8_t>(a));
  w.f64s(std::span(net.input_shift().data(), net.input_shift().size()));
  w.f64s(std::span(net.input_scale().data(), net.input_scale().size()));
  w.u64(static_cast<std::uint64_t>(net.param_count()));
  w.f64s(std::span(net.params().data(), net.params().size()));
  w.seal();
  return w.data();
}

inline void save_checkpoint(const NetworkWeights& net, const std::string& path) {
  io::ByteWriter w;
  auto bytes = serialize_checkpoint(net);
  w.bytes(bytes.data(), bytes.size());
  w.save(path);
}

inline NetworkWeights parse_checkpoint(std::vector<std::uint8_t> bytes) {
  io::ByteReader<CheckpointError> r(std::move(bytes));
  r.verify_seal();
  r.expect_magic("CDPN");
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                          std::to_string(kCheckpointVersion) + ")");
  }
  const auto seed = r.u64();
  const auto n = r.u32();
  if (n < 2 || n > 1024) throw CheckpointError("corrupt file: bad layer count");
  std::vector<int> sizes(n);
  for (auto& s : sizes) {
    s = static_cast<int>(r.u32());
    if (s < 1) throw CheckpointError("corrupt file: bad layer size");
  }
  std::vector<Activation> acts(n - 2);
  for (auto& a : acts) {
    const auto id = r.u8();
    if (id > 1) throw CheckpointError("corrupt file: unknown activation id");
    a = static_cast<Activation>(id);
  }
  NetworkWeights net(sizes, acts, seed);
  Eigen::VectorXd shift(sizes[0]), scale(sizes[0]);
  r.f64s(std::span(shift.data(), shift.size()));
  r.f64s(std::span(scale.data(), scale.size()));
  net.set_input_normalization(shift, scale);
  const auto count = r.u64();
  if (count != static_cast<std::uint64_t>(net.param_count())) {
    throw CheckpointError("shape mismatch: parameter count does not match architecture");
  }
  r.f64s(std::span(net.params().data(), net.params().size()));
  if (!r.at_end()) throw CheckpointError("corrupt file: trailing bytes");
  return net;
}

inline NetworkWeights load_checkpoint(const std::string& path) {
  return parse_checkpoint(io::read_file<CheckpointError>(path));
}

}  // namespace cdpinn
