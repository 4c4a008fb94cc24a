#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "gdca/losses.hpp"
#include "gdca/models.hpp"

namespace gdca {

template <typename T>
struct AdamState {
  std::vector<Tensor<T>> m, v;  // one pair per parameter, same shapes
  std::uint64_t t = 0;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
AdamState<T> adam_init(const std::vector<Tensor<T>>& params, double lr);

// One bias-corrected Adam update using each parameter's accumulated grad
// (absent grad counts as zero). Shape or count mismatch raises ContractError.
template <typename T>
void adam_step(AdamState<T>& state, const std::vector<Tensor<T>>& params);

template <typename T>
std::vector<Tensor<T>> tensors_of(const NamedTensors<T>& named);

template <typename T>
void zero_grads(const std::vector<Tensor<T>>& params);

struct TrainSchedule {
  std::uint64_t pretrain_steps = 1000;
  std::uint64_t gan_steps = 1000;
  std::size_t batch_size = 4;
  double lr_pretrain = 1e-4;
  double lr_gan = 1e-4;
  std::uint64_t seed = 1;

  bool operator==(const TrainSchedule&) const = default;
};

// (lr, hr) pairs
template <typename T>
using Batch = std::vector<std::pair<Tensor<T>, Tensor<T>>>;

// MAE on the generator only; returns the batch-mean loss.
template <typename T>
double pretrain_step(Generator<T>& g, const Batch<T>& batch, AdamState<T>& opt);

struct GanLosses {
  double g_loss = 0;
  double d_img_loss = 0;
  double d_feat_loss = 0;
};

enum class GanPhase { ImageDiscriminator, FeatureDiscriminator, Generator };

template <typename T>
struct GanNetworks {
  Generator<T>& g;
  Discriminator<T>& d_img;
  Discriminator<T>& d_feat;
  const FeatureExtractor<T>& fe;
};

template <typename T>
struct GanOptimizers {
  AdamState<T>& g;
  AdamState<T>& d_img;
  AdamState<T>& d_feat;
};

// One adversarial step: update d_img on detached SR, then d_feat on detached
// SR features, then the generator against the freshly updated discriminators.
// `after_phase` (optional) runs after each of the three updates.
template <typename T>
GanLosses gan_train_step(const GanNetworks<T>& nets, const Batch<T>& batch,
                         const GanOptimizers<T>& opts, const LossWeights& w,
                         const std::function<void(GanPhase)>& after_phase = {});

// Everything a training run owns; checkpoints capture all of it.
struct TrainState {
  Generator<float> g;
  Discriminator<float> d_img;
  Discriminator<float> d_feat;
  FeatureExtractor<float> fe;
  AdamState<float> g_opt, d_img_opt, d_feat_opt;
  std::uint64_t step = 0;  // completed steps across both phases

  TrainState(const GeneratorConfig& gc, std::size_t disc_width, std::uint64_t seed,
             std::uint64_t extractor_seed, const TrainSchedule& schedule);

  // Generator, discriminators, optimizer moments and counters. The extractor
  // is rebuilt from its seed and is not part of the map.
  NamedTensors<float> to_named() const;
  // Inverse of to_named for a state built with the same architecture.
  void load_named(const NamedTensors<float>& tensors);
};

// Batch for a global step index; must depend only on the index for resumable runs.
using BatchSource = std::function<Batch<float>(std::uint64_t step)>;

// Runs the remaining pretrain then GAN steps from state.step. The generator
// optimizer restarts with fresh moments and lr_gan when the GAN phase begins.
// `after_step` runs after every completed step.
void run_training(TrainState& state, const TrainSchedule& schedule, const LossWeights& w,
                  const BatchSource& batches, std::ostream* log,
                  const std::function<void(const TrainState&)>& after_step = {});

// `step <n> phase <p> g_loss <v> d_img_loss <v> d_feat_loss <v>`, "-" for absent values.
std::string format_log_line(std::uint64_t step, bool gan_phase, double g_loss,
                            std::optional<double> d_img_loss, std::optional<double> d_feat_loss);

}  // namespace gdca
