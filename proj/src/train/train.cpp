#include "gdca/train.hpp"

#include <charconv>
#include <cmath>
#include <map>

#include "gdca/errors.hpp"
#include "gdca/ops.hpp"
#include "gdca/rng.hpp"

namespace gdca {

template <typename T>
AdamState<T> adam_init(const std::vector<Tensor<T>>& params, double lr) {
  AdamState<T> s;
  s.lr = lr;
  for (const auto& p : params) {
    s.m.push_back(Tensor<T>::zeros(p.shape()));
    s.v.push_back(Tensor<T>::zeros(p.shape()));
  }
  return s;
}

template <typename T>
void adam_step(AdamState<T>& state, const std::vector<Tensor<T>>& params) {
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw ContractError("adam_step: state holds " + std::to_string(state.m.size()) +
                        " moments for " + std::to_string(params.size()) + " parameters");
  for (std::size_t k = 0; k < params.size(); ++k)
    if (state.m[k].shape() != params[k].shape() || state.v[k].shape() != params[k].shape())
      throw ContractError("adam_step: moment shape " + shape_str(state.m[k].shape()) +
                          " does not match parameter " + shape_str(params[k].shape()));
  state.t += 1;
  const double b1 = state.beta1, b2 = state.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor<T> p = params[k];
    auto theta = p.mutable_data();
    auto m = state.m[k].mutable_data();
    auto v = state.v[k].mutable_data();
    const bool has_grad = p.has_grad();
    const auto grad = p.grad();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = has_grad ? static_cast<double>(grad[i]) : 0.0;
      const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * g;
      const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double m_hat = mi / bc1;
      const double v_hat = vi / bc2;
      theta[i] = static_cast<T>(static_cast<double>(theta[i]) -
                                state.lr * m_hat / (std::sqrt(v_hat) + state.eps));
    }
  }
}

template <typename T>
std::vector<Tensor<T>> tensors_of(const NamedTensors<T>& named) {
  std::vector<Tensor<T>> out;
  out.reserve(named.size());
  for (const auto& [name, t] : named) out.push_back(t);
  return out;
}

template <typename T>
void zero_grads(const std::vector<Tensor<T>>& params) {
  for (Tensor<T> p : params) p.zero_grad();
}

template <typename T>
double pretrain_step(Generator<T>& g, const Batch<T>& batch, AdamState<T>& opt) {
  if (batch.empty()) throw ContractError("pretrain_step: empty batch");
  const auto params = tensors_of(g.parameters());
  zero_grads(params);
  Tape<T> tape;
  std::vector<Tensor<T>> losses;
  for (const auto& [lr, hr] : batch) losses.push_back(mae_loss(tape, generator_forward(tape, g, lr), hr));
  auto loss = mean(tape, concat(tape, losses));
  tape.backward(loss);
  adam_step(opt, params);
  zero_grads(params);
  return static_cast<double>(loss.item());
}

namespace {

// One discriminator update on (real, fake) inputs; fakes arrive detached.
template <typename T>
double discriminator_update(Discriminator<T>& d, AdamState<T>& opt,
                            const std::vector<Tensor<T>>& real,
                            const std::vector<Tensor<T>>& fake) {
  const auto params = tensors_of(d.parameters("d"));
  zero_grads(params);
  Tape<T> tape;
  std::vector<Tensor<T>> real_logits, fake_logits;
  for (const auto& x : real) real_logits.push_back(discriminator_forward(tape, d, x));
  for (const auto& x : fake) fake_logits.push_back(discriminator_forward(tape, d, x.detach()));
  auto loss = gan_d_loss(tape, concat(tape, real_logits), concat(tape, fake_logits));
  tape.backward(loss);
  adam_step(opt, params);
  zero_grads(params);
  return static_cast<double>(loss.item());
}

}  // namespace

template <typename T>
GanLosses gan_train_step(const GanNetworks<T>& nets, const Batch<T>& batch,
                         const GanOptimizers<T>& opts, const LossWeights& w,
                         const std::function<void(GanPhase)>& after_phase) {
  if (batch.empty()) throw ContractError("gan_train_step: empty batch");
  w.validate();
  const auto g_params = tensors_of(nets.g.parameters());
  const auto d_img_params = tensors_of(nets.d_img.parameters("d"));
  const auto d_feat_params = tensors_of(nets.d_feat.parameters("d"));
  zero_grads(g_params);

  Tape<T> tape;
  Tape<T> quiet;
  quiet.set_enabled(false);
  const bool feat_graph = w.w_percep != 0 || w.w_feat_gan != 0;
  std::vector<Tensor<T>> hr, sr, feat_hr, feat_sr;
  for (const auto& [lr_img, hr_img] : batch) {
    hr.push_back(hr_img);
    sr.push_back(generator_forward(tape, nets.g, lr_img));
    feat_hr.push_back(feature_extract(quiet, nets.fe, hr_img.detach()));
    feat_sr.push_back(feat_graph ? feature_extract(tape, nets.fe, sr.back())
                                 : feature_extract(quiet, nets.fe, sr.back().detach()));
  }

  GanLosses out;
  out.d_img_loss = discriminator_update(nets.d_img, opts.d_img, hr, sr);
  if (after_phase) after_phase(GanPhase::ImageDiscriminator);
  out.d_feat_loss = discriminator_update(nets.d_feat, opts.d_feat, feat_hr, feat_sr);
  if (after_phase) after_phase(GanPhase::FeatureDiscriminator);

  std::vector<Tensor<T>> img_fake, feat_fake, percep;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (w.w_img_gan != 0) img_fake.push_back(discriminator_forward(tape, nets.d_img, sr[i]));
    if (w.w_feat_gan != 0) feat_fake.push_back(discriminator_forward(tape, nets.d_feat, feat_sr[i]));
    if (w.w_percep != 0) percep.push_back(feature_mse(tape, feat_sr[i], feat_hr[i]));
  }
  auto batch_mean = [&](const std::vector<Tensor<T>>& parts) {
    return parts.empty() ? Tensor<T>::scalar(T(0)) : mean(tape, concat(tape, parts));
  };
  auto loss = combine_generator_loss(tape, w, batch_mean(percep),
                                     img_fake.empty() ? Tensor<T>::scalar(T(0)) : concat(tape, img_fake),
                                     feat_fake.empty() ? Tensor<T>::scalar(T(0)) : concat(tape, feat_fake));
  tape.backward(loss);
  adam_step(opts.g, g_params);
  zero_grads(g_params);
  zero_grads(d_img_params);
  zero_grads(d_feat_params);
  out.g_loss = static_cast<double>(loss.item());
  if (after_phase) after_phase(GanPhase::Generator);
  return out;
}

namespace {

// Counters are stored as float tensors; two 24-bit limbs keep them exact.
Tensor<float> encode_counter(std::uint64_t n) {
  if (n >= (std::uint64_t{1} << 48)) throw ContractError("counter exceeds 2^48");
  return Tensor<float>({2}, {static_cast<float>(n & 0xFFFFFF), static_cast<float>(n >> 24)});
}

std::uint64_t decode_counter(const Tensor<float>& t) {
  if (t.shape() != Shape{2}) throw ShapeError("counter tensor must have shape [2]");
  return static_cast<std::uint64_t>(t[0]) | (static_cast<std::uint64_t>(t[1]) << 24);
}

void add_optimizer(NamedTensors<float>& out, const std::string& tag, const AdamState<float>& s,
                   const NamedTensors<float>& params) {
  for (std::size_t i = 0; i < params.size(); ++i)
    out.emplace_back("opt." + tag + ".m." + params[i].first, s.m[i]);
  for (std::size_t i = 0; i < params.size(); ++i)
    out.emplace_back("opt." + tag + ".v." + params[i].first, s.v[i]);
  out.emplace_back("opt." + tag + ".t", encode_counter(s.t));
}

}  // namespace

TrainState::TrainState(const GeneratorConfig& gc, std::size_t disc_width, std::uint64_t seed,
                       std::uint64_t extractor_seed, const TrainSchedule& schedule)
    : g(gc, mix_seed(seed, ~std::uint64_t{0})),
      d_img({3, disc_width}, mix_seed(seed, ~std::uint64_t{1})),
      d_feat({FeatureExtractor<float>::kOutputChannels, disc_width},
             mix_seed(seed, ~std::uint64_t{2})),
      fe(extractor_seed) {
  g_opt = adam_init(tensors_of(g.parameters()), schedule.lr_pretrain);
  d_img_opt = adam_init(tensors_of(d_img.parameters("d")), schedule.lr_gan);
  d_feat_opt = adam_init(tensors_of(d_feat.parameters("d")), schedule.lr_gan);
}

NamedTensors<float> TrainState::to_named() const {
  NamedTensors<float> out = g.parameters();
  const auto di = d_img.parameters("d_img");
  const auto df = d_feat.parameters("d_feat");
  out.insert(out.end(), di.begin(), di.end());
  out.insert(out.end(), df.begin(), df.end());
  add_optimizer(out, "g", g_opt, g.parameters());
  add_optimizer(out, "d_img", d_img_opt, di);
  add_optimizer(out, "d_feat", d_feat_opt, df);
  out.emplace_back("train.step", encode_counter(step));
  return out;
}

void TrainState::load_named(const NamedTensors<float>& tensors) {
  std::map<std::string, Tensor<float>> lookup(tensors.begin(), tensors.end());
  auto fetch = [&](const std::string& name) -> const Tensor<float>& {
    auto it = lookup.find(name);
    if (it == lookup.end()) throw ShapeError("checkpoint is missing '" + name + "'");
    return it->second;
  };
  g.load_parameters(tensors);
  d_img.load_parameters("d_img", tensors);
  d_feat.load_parameters("d_feat", tensors);
  auto load_opt = [&](const std::string& tag, AdamState<float>& s, const NamedTensors<float>& params) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      for (auto [kind, dst] : {std::pair{".m.", s.m[i]}, std::pair{".v.", s.v[i]}}) {
        const auto& src = fetch("opt." + tag + kind + params[i].first);
        if (src.shape() != dst.shape())
          throw ShapeError("optimizer moment for '" + params[i].first + "' has shape " +
                           shape_str(src.shape()));
        std::ranges::copy(src.data(), dst.mutable_data().begin());
      }
    }
    s.t = decode_counter(fetch("opt." + tag + ".t"));
  };
  load_opt("g", g_opt, g.parameters());
  load_opt("d_img", d_img_opt, d_img.parameters("d_img"));
  load_opt("d_feat", d_feat_opt, d_feat.parameters("d_feat"));
  step = decode_counter(fetch("train.step"));
}

namespace {

std::string format_value(std::optional<double> v) {
  if (!v) return "-";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, *v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string format_log_line(std::uint64_t step, bool gan_phase, double g_loss,
                            std::optional<double> d_img_loss, std::optional<double> d_feat_loss) {
  return "step " + std::to_string(step) + " phase " + (gan_phase ? "gan" : "pretrain") +
         " g_loss " + format_value(g_loss) + " d_img_loss " + format_value(d_img_loss) +
         " d_feat_loss " + format_value(d_feat_loss);
}

void run_training(TrainState& state, const TrainSchedule& schedule, const LossWeights& w,
                  const BatchSource& batches, std::ostream* log,
                  const std::function<void(const TrainState&)>& after_step) {
  const std::uint64_t total = schedule.pretrain_steps + schedule.gan_steps;
  while (state.step < total) {
    const std::uint64_t s = state.step;
    const Batch<float> batch = batches(s);
    std::string line;
    if (s < schedule.pretrain_steps) {
      state.g_opt.lr = schedule.lr_pretrain;
      const double loss = pretrain_step(state.g, batch, state.g_opt);
      line = format_log_line(s + 1, false, loss, std::nullopt, std::nullopt);
    } else {
      if (s == schedule.pretrain_steps)
        state.g_opt = adam_init(tensors_of(state.g.parameters()), schedule.lr_gan);
      state.g_opt.lr = state.d_img_opt.lr = state.d_feat_opt.lr = schedule.lr_gan;
      const auto losses = gan_train_step<float>({state.g, state.d_img, state.d_feat, state.fe},
                                                batch,
                                                {state.g_opt, state.d_img_opt, state.d_feat_opt}, w);
      line = format_log_line(s + 1, true, losses.g_loss, losses.d_img_loss, losses.d_feat_loss);
    }
    state.step = s + 1;
    if (log) *log << line << '\n';
    if (after_step) after_step(state);
  }
}

#define GDCA_INSTANTIATE(T)                                                                     \
  template AdamState<T> adam_init(const std::vector<Tensor<T>>&, double);                      \
  template void adam_step(AdamState<T>&, const std::vector<Tensor<T>>&);                       \
  template std::vector<Tensor<T>> tensors_of(const NamedTensors<T>&);                           \
  template void zero_grads(const std::vector<Tensor<T>>&);                                     \
  template double pretrain_step(Generator<T>&, const Batch<T>&, AdamState<T>&);                \
  template GanLosses gan_train_step(const GanNetworks<T>&, const Batch<T>&,                    \
                                    const GanOptimizers<T>&, const LossWeights&,               \
                                    const std::function<void(GanPhase)>&);
GDCA_INSTANTIATE(float)
GDCA_INSTANTIATE(double)
#undef GDCA_INSTANTIATE

}  // namespace gdca
