#pragma once

#include "gdca/models.hpp"
#include "gdca/tensor.hpp"

namespace gdca {

struct LossWeights {
  double w_percep = 1.0;
  double w_img_gan = 1e-3;
  double w_feat_gan = 1e-3;

  // Non-negative, at least one positive; ConfigError otherwise.
  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

// mean |sr - hr|
template <typename T>
Tensor<T> mae_loss(Tape<T>& tape, const Tensor<T>& sr, const Tensor<T>& hr);

// mean (a - b)^2 between two feature maps; b is treated as a constant.
template <typename T>
Tensor<T> feature_mse(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

// feature_mse(fe(sr), fe(hr)); hr never receives gradient.
template <typename T>
Tensor<T> perceptual_loss(Tape<T>& tape, const FeatureExtractor<T>& fe, const Tensor<T>& sr,
                          const Tensor<T>& hr);

// -mean(log sigmoid(real)) - mean(log sigmoid(-fake)); logits may be batched.
template <typename T>
Tensor<T> gan_d_loss(Tape<T>& tape, const Tensor<T>& real_logit, const Tensor<T>& fake_logit);

// Non-saturating generator term: -mean(log sigmoid(fake)).
template <typename T>
Tensor<T> gan_g_loss(Tape<T>& tape, const Tensor<T>& fake_logit);

// w_percep * percep + w_img_gan * gan_g(img) + w_feat_gan * gan_g(feat).
// Terms with zero weight are left out of the graph entirely.
template <typename T>
Tensor<T> combine_generator_loss(Tape<T>& tape, const LossWeights& w, const Tensor<T>& percep,
                                 const Tensor<T>& img_fake_logit,
                                 const Tensor<T>& feat_fake_logit);

template <typename T>
Tensor<T> total_generator_loss(Tape<T>& tape, const LossWeights& w, const FeatureExtractor<T>& fe,
                               const Tensor<T>& sr, const Tensor<T>& hr,
                               const Tensor<T>& img_fake_logit, const Tensor<T>& feat_fake_logit);

}  // namespace gdca
