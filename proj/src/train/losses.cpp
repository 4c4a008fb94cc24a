#include "gdca/losses.hpp"

#include "gdca/errors.hpp"
#include "gdca/layers.hpp"
#include "gdca/ops.hpp"

namespace gdca {

void LossWeights::validate() const {
  if (w_percep < 0 || w_img_gan < 0 || w_feat_gan < 0)
    throw ConfigError("loss weights must be non-negative");
  if (w_percep == 0 && w_img_gan == 0 && w_feat_gan == 0)
    throw ConfigError("at least one loss weight must be positive");
}

namespace {

template <typename T>
void require_same_shape(const char* what, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(what) + ": shapes " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()) + " differ");
}

}  // namespace

template <typename T>
Tensor<T> mae_loss(Tape<T>& tape, const Tensor<T>& sr, const Tensor<T>& hr) {
  require_same_shape("mae_loss", sr, hr);
  return mean(tape, abs(tape, sub(tape, sr, hr)));
}

template <typename T>
Tensor<T> feature_mse(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("feature_mse", a, b);
  return mean(tape, square(tape, sub(tape, a, b.detach())));
}

template <typename T>
Tensor<T> perceptual_loss(Tape<T>& tape, const FeatureExtractor<T>& fe, const Tensor<T>& sr,
                          const Tensor<T>& hr) {
  require_same_shape("perceptual_loss", sr, hr);
  Tape<T> quiet;
  quiet.set_enabled(false);
  auto target = feature_extract(quiet, fe, hr.detach());
  return feature_mse(tape, feature_extract(tape, fe, sr), target);
}

template <typename T>
Tensor<T> gan_d_loss(Tape<T>& tape, const Tensor<T>& real_logit, const Tensor<T>& fake_logit) {
  auto real_term = mean(tape, log_sigmoid(tape, real_logit));
  auto fake_term = mean(tape, log_sigmoid(tape, neg(tape, fake_logit)));
  return neg(tape, add(tape, real_term, fake_term));
}

template <typename T>
Tensor<T> gan_g_loss(Tape<T>& tape, const Tensor<T>& fake_logit) {
  return neg(tape, mean(tape, log_sigmoid(tape, fake_logit)));
}

template <typename T>
Tensor<T> combine_generator_loss(Tape<T>& tape, const LossWeights& w, const Tensor<T>& percep,
                                 const Tensor<T>& img_fake_logit,
                                 const Tensor<T>& feat_fake_logit) {
  std::optional<Tensor<T>> total;
  auto accumulate = [&](double weight, const auto& make_term) {
    if (weight == 0) return;
    auto term = scale(tape, make_term(), static_cast<T>(weight));
    total = total ? add(tape, *total, term) : term;
  };
  accumulate(w.w_percep, [&] { return percep; });
  accumulate(w.w_img_gan, [&] { return gan_g_loss(tape, img_fake_logit); });
  accumulate(w.w_feat_gan, [&] { return gan_g_loss(tape, feat_fake_logit); });
  if (!total) return Tensor<T>::scalar(T(0));
  return *total;
}

template <typename T>
Tensor<T> total_generator_loss(Tape<T>& tape, const LossWeights& w, const FeatureExtractor<T>& fe,
                               const Tensor<T>& sr, const Tensor<T>& hr,
                               const Tensor<T>& img_fake_logit, const Tensor<T>& feat_fake_logit) {
  auto percep = w.w_percep == 0 ? Tensor<T>::scalar(T(0)) : perceptual_loss(tape, fe, sr, hr);
  return combine_generator_loss(tape, w, percep, img_fake_logit, feat_fake_logit);
}

#define GDCA_INSTANTIATE(T)                                                                       \
  template Tensor<T> mae_loss(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> feature_mse(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                   \
  template Tensor<T> perceptual_loss(Tape<T>&, const FeatureExtractor<T>&, const Tensor<T>&,      \
                                     const Tensor<T>&);                                           \
  template Tensor<T> gan_d_loss(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                    \
  template Tensor<T> gan_g_loss(Tape<T>&, const Tensor<T>&);                                      \
  template Tensor<T> combine_generator_loss(Tape<T>&, const LossWeights&, const Tensor<T>&,       \
                                            const Tensor<T>&, const Tensor<T>&);                  \
  template Tensor<T> total_generator_loss(Tape<T>&, const LossWeights&,                           \
                                          const FeatureExtractor<T>&, const Tensor<T>&,           \
                                          const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);
GDCA_INSTANTIATE(float)
GDCA_INSTANTIATE(double)
#undef GDCA_INSTANTIATE

}  // namespace gdca
