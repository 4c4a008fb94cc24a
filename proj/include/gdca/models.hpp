#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gdca/layers.hpp"
#include "gdca/tensor.hpp"

namespace gdca {

template <typename T>
using NamedTensors = std::vector<std::pair<std::string, Tensor<T>>>;

inline constexpr double kLeakySlope = 0.2;

struct GeneratorConfig {
  std::size_t base_channels = 64;
  std::size_t n_ca_blocks = 4;
  std::size_t n_le_blocks = 4;
  std::size_t ca_reduction = 4;
  std::size_t scale_factor = 4;  // two x2 sub-pixel stages; nothing else is supported
  double skip_weight_init = 1.0;

  void validate() const;
  bool operator==(const GeneratorConfig&) const = default;
};

// Residual block gated by channel attention:
// y = x + s * f(x), f = conv -> lrelu -> conv, s = sigmoid(excite(lrelu(squeeze(pool(f(x))))))
template <typename T>
struct CaBlockParams {
  Conv2dParams<T> conv1, conv2;
  DenseParams<T> squeeze;  // C -> C/r
  DenseParams<T> excite;   // C/r -> C
};

// Plain residual block, no normalization: y = x + conv(lrelu(conv(x)))
template <typename T>
struct LeBlockParams {
  Conv2dParams<T> conv1, conv2;
};

template <typename T>
Tensor<T> ca_block_forward(Tape<T>& tape, const Tensor<T>& x, const CaBlockParams<T>& p);
template <typename T>
Tensor<T> le_block_forward(Tape<T>& tape, const Tensor<T>& x, const LeBlockParams<T>& p);

template <typename T>
class Generator {
 public:
  Generator() = default;
  Generator(const GeneratorConfig& config, std::uint64_t seed);

  // Rebuilds the architecture from checkpoint tensors (names "g.*") and
  // copies their values in.
  static Generator from_parameters(const NamedTensors<T>& tensors);

  const GeneratorConfig& config() const { return config_; }
  NamedTensors<T> parameters() const;
  std::size_t parameter_count() const;
  // Copies values for every "g.*" parameter; missing names or shape
  // mismatches raise ShapeError.
  void load_parameters(const NamedTensors<T>& tensors);

  Conv2dParams<T> head;  // 5x5, 3 -> C
  std::vector<CaBlockParams<T>> ca_blocks;
  std::vector<LeBlockParams<T>> le_blocks;
  Tensor<T> skip_weight;  // learnable scalar on the long skip
  Conv2dParams<T> fusion;  // 3x3, C -> C, after the skip join
  Conv2dParams<T> upsample1, upsample2;  // 3x3, C -> 4C, each followed by pixel_shuffle(2)
  Conv2dParams<T> tail;  // 3x3, C -> 3, linear

 private:
  GeneratorConfig config_;
};

// [3,H,W] -> [3,4H,4W]. `inference` clamps the output into [0,1].
template <typename T>
Tensor<T> generator_forward(Tape<T>& tape, const Generator<T>& g, const Tensor<T>& lr,
                            bool inference = false);

struct DiscriminatorConfig {
  std::size_t input_channels = 3;
  std::size_t width = 32;  // conv stack is w,w,2w,2w,4w,4w; classifier 4w -> 2w -> 1
};

template <typename T>
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(const DiscriminatorConfig& config, std::uint64_t seed);

  const DiscriminatorConfig& config() const { return config_; }
  NamedTensors<T> parameters(const std::string& prefix) const;
  void load_parameters(const std::string& prefix, const NamedTensors<T>& tensors);

  std::vector<Conv2dParams<T>> conv_stack;
  DenseParams<T> fc1, fc2;

 private:
  DiscriminatorConfig config_;
};

// Single unbounded logit of shape [1].
template <typename T>
Tensor<T> discriminator_forward(Tape<T>& tape, const Discriminator<T>& d, const Tensor<T>& x);

// Frozen, seed-determined random conv stack standing in for a pretrained
// deep feature network: four (conv s1 -> lrelu -> conv s2) stages,
// channels 3 -> 32 -> 64 -> 96 -> 128, total downsampling 16.
template <typename T>
class FeatureExtractor {
 public:
  static constexpr std::size_t kOutputChannels = 128;
  static constexpr std::size_t kDownsample = 16;

  explicit FeatureExtractor(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }
  NamedTensors<T> parameters() const;

  std::vector<Conv2dParams<T>> conv_stack;

 private:
  std::uint64_t seed_;
};

// [3,H,W] -> [128,H/16,W/16]; gradients flow to the input only.
template <typename T>
Tensor<T> feature_extract(Tape<T>& tape, const FeatureExtractor<T>& fe, const Tensor<T>& img);

}  // namespace gdca
