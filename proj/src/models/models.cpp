#include "gdca/models.hpp"

#include <algorithm>
#include <map>

#include "gdca/ops.hpp"

namespace gdca {

void GeneratorConfig::validate() const {
  if (base_channels == 0 || n_ca_blocks == 0 || n_le_blocks == 0 || ca_reduction == 0)
    throw ShapeError("generator config: channel and block counts must be positive");
  if (base_channels % ca_reduction != 0)
    throw ShapeError("generator config: base_channels " + std::to_string(base_channels) +
                     " not divisible by ca_reduction " + std::to_string(ca_reduction));
  if (scale_factor != 4) throw ShapeError("generator config: only scale_factor 4 is supported");
}

namespace {

template <typename T>
void add_conv(NamedTensors<T>& out, const std::string& name, const Conv2dParams<T>& p) {
  out.emplace_back(name + ".weight", p.weight);
  out.emplace_back(name + ".bias", p.bias);
}

template <typename T>
void add_dense(NamedTensors<T>& out, const std::string& name, const DenseParams<T>& p) {
  out.emplace_back(name + ".weight", p.weight);
  out.emplace_back(name + ".bias", p.bias);
}

template <typename T>
void copy_into(const NamedTensors<T>& own, const NamedTensors<T>& source) {
  std::map<std::string, const Tensor<T>*> lookup;
  for (const auto& [name, t] : source) lookup[name] = &t;
  for (auto [name, dst] : own) {
    auto it = lookup.find(name);
    if (it == lookup.end()) throw ShapeError("missing parameter '" + name + "'");
    const Tensor<T>& src = *it->second;
    if (src.shape() != dst.shape())
      throw ShapeError("parameter '" + name + "' has shape " + shape_str(src.shape()) +
                       ", expected " + shape_str(dst.shape()));
    std::ranges::copy(src.data(), dst.mutable_data().begin());
  }
}

template <typename T>
const Tensor<T>* find(const NamedTensors<T>& tensors, const std::string& name) {
  for (const auto& [n, t] : tensors)
    if (n == name) return &t;
  return nullptr;
}

}  // namespace

template <typename T>
Tensor<T> ca_block_forward(Tape<T>& tape, const Tensor<T>& x, const CaBlockParams<T>& p) {
  if (x.rank() != 3 || x.dim(0) != p.conv1.in_channels())
    throw ShapeError("ca_block: input " + shape_str(x.shape()) + " does not have " +
                     std::to_string(p.conv1.in_channels()) + " channels");
  const T slope = static_cast<T>(kLeakySlope);
  auto f = conv2d(tape, leaky_relu(tape, conv2d(tape, x, p.conv1), slope), p.conv2);
  auto pooled = global_avg_pool(tape, f);
  auto gate = sigmoid(tape, dense(tape, leaky_relu(tape, dense(tape, pooled, p.squeeze), slope),
                                  p.excite));
  return add(tape, x, mul(tape, f, gate));
}

template <typename T>
Tensor<T> le_block_forward(Tape<T>& tape, const Tensor<T>& x, const LeBlockParams<T>& p) {
  if (x.rank() != 3 || x.dim(0) != p.conv1.in_channels())
    throw ShapeError("le_block: input " + shape_str(x.shape()) + " does not have " +
                     std::to_string(p.conv1.in_channels()) + " channels");
  const T slope = static_cast<T>(kLeakySlope);
  return add(tape, x, conv2d(tape, leaky_relu(tape, conv2d(tape, x, p.conv1), slope), p.conv2));
}

template <typename T>
Generator<T>::Generator(const GeneratorConfig& config, std::uint64_t seed) : config_(config) {
  config.validate();
  Rng rng(seed);
  const std::size_t c = config.base_channels;
  head = make_conv<T>(3, c, 5, 1, 2, rng);
  for (std::size_t i = 0; i < config.n_ca_blocks; ++i) {
    CaBlockParams<T> b;
    b.conv1 = make_conv<T>(c, c, 3, 1, 1, rng);
    b.conv2 = make_conv<T>(c, c, 3, 1, 1, rng);
    b.squeeze = make_dense<T>(c, c / config.ca_reduction, rng);
    b.excite = make_dense<T>(c / config.ca_reduction, c, rng);
    ca_blocks.push_back(std::move(b));
  }
  for (std::size_t i = 0; i < config.n_le_blocks; ++i) {
    LeBlockParams<T> b;
    b.conv1 = make_conv<T>(c, c, 3, 1, 1, rng);
    b.conv2 = make_conv<T>(c, c, 3, 1, 1, rng);
    le_blocks.push_back(std::move(b));
  }
  skip_weight = Tensor<T>::scalar(static_cast<T>(config.skip_weight_init), true);
  fusion = make_conv<T>(c, c, 3, 1, 1, rng);
  upsample1 = make_conv<T>(c, 4 * c, 3, 1, 1, rng);
  upsample2 = make_conv<T>(c, 4 * c, 3, 1, 1, rng);
  tail = make_conv<T>(c, 3, 3, 1, 1, rng);
}

template <typename T>
NamedTensors<T> Generator<T>::parameters() const {
  NamedTensors<T> out;
  add_conv(out, "g.head", head);
  for (std::size_t i = 0; i < ca_blocks.size(); ++i) {
    const std::string base = "g.ca." + std::to_string(i);
    add_conv(out, base + ".conv1", ca_blocks[i].conv1);
    add_conv(out, base + ".conv2", ca_blocks[i].conv2);
    add_dense(out, base + ".squeeze", ca_blocks[i].squeeze);
    add_dense(out, base + ".excite", ca_blocks[i].excite);
  }
  for (std::size_t i = 0; i < le_blocks.size(); ++i) {
    const std::string base = "g.le." + std::to_string(i);
    add_conv(out, base + ".conv1", le_blocks[i].conv1);
    add_conv(out, base + ".conv2", le_blocks[i].conv2);
  }
  out.emplace_back("g.skip_weight", skip_weight);
  add_conv(out, "g.fusion", fusion);
  add_conv(out, "g.up1", upsample1);
  add_conv(out, "g.up2", upsample2);
  add_conv(out, "g.tail", tail);
  return out;
}

template <typename T>
std::size_t Generator<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : parameters()) n += t.numel();
  return n;
}

template <typename T>
void Generator<T>::load_parameters(const NamedTensors<T>& tensors) {
  copy_into(parameters(), tensors);
}

template <typename T>
Generator<T> Generator<T>::from_parameters(const NamedTensors<T>& tensors) {
  const Tensor<T>* head_w = find(tensors, "g.head.weight");
  if (!head_w || head_w->rank() != 4) throw ShapeError("checkpoint has no generator head");
  GeneratorConfig cfg;
  cfg.base_channels = head_w->dim(0);
  cfg.n_ca_blocks = 0;
  while (find(tensors, "g.ca." + std::to_string(cfg.n_ca_blocks) + ".conv1.weight"))
    ++cfg.n_ca_blocks;
  cfg.n_le_blocks = 0;
  while (find(tensors, "g.le." + std::to_string(cfg.n_le_blocks) + ".conv1.weight"))
    ++cfg.n_le_blocks;
  if (const auto* sq = find(tensors, "g.ca.0.squeeze.weight"); sq && sq->rank() == 2)
    cfg.ca_reduction = cfg.base_channels / sq->dim(0);
  if (const auto* sw = find(tensors, "g.skip_weight"); sw) cfg.skip_weight_init = sw->item();
  Generator<T> g(cfg, 0);
  g.load_parameters(tensors);
  return g;
}

template <typename T>
Tensor<T> generator_forward(Tape<T>& tape, const Generator<T>& g, const Tensor<T>& lr,
                            bool inference) {
  if (lr.rank() != 3 || lr.dim(0) != 3)
    throw ShapeError("generator expects a [3,H,W] image, got " + shape_str(lr.shape()));
  const T slope = static_cast<T>(kLeakySlope);
  auto shallow = conv2d(tape, lr, g.head);
  auto body = shallow;
  for (const auto& b : g.ca_blocks) body = ca_block_forward(tape, body, b);
  for (const auto& b : g.le_blocks) body = le_block_forward(tape, body, b);
  auto joined = add(tape, body, mul(tape, shallow, g.skip_weight));
  auto fused = conv2d(tape, joined, g.fusion);
  auto up = leaky_relu(tape, pixel_shuffle(tape, conv2d(tape, fused, g.upsample1), 2), slope);
  up = leaky_relu(tape, pixel_shuffle(tape, conv2d(tape, up, g.upsample2), 2), slope);
  auto out = conv2d(tape, up, g.tail);
  return inference ? clamp01(out) : out;
}

template <typename T>
Discriminator<T>::Discriminator(const DiscriminatorConfig& config, std::uint64_t seed)
    : config_(config) {
  if (config.input_channels == 0 || config.width == 0)
    throw ShapeError("discriminator config: channels must be positive");
  Rng rng(seed);
  const std::size_t w = config.width;
  const std::size_t channels[] = {w, w, 2 * w, 2 * w, 4 * w, 4 * w};
  std::size_t in = config.input_channels;
  for (std::size_t i = 0; i < 6; ++i) {
    conv_stack.push_back(make_conv<T>(in, channels[i], 3, i % 2 == 0 ? 1 : 2, 1, rng));
    in = channels[i];
  }
  fc1 = make_dense<T>(4 * w, 2 * w, rng);
  fc2 = make_dense<T>(2 * w, 1, rng);
}

template <typename T>
NamedTensors<T> Discriminator<T>::parameters(const std::string& prefix) const {
  NamedTensors<T> out;
  for (std::size_t i = 0; i < conv_stack.size(); ++i)
    add_conv(out, prefix + ".conv." + std::to_string(i), conv_stack[i]);
  add_dense(out, prefix + ".fc1", fc1);
  add_dense(out, prefix + ".fc2", fc2);
  return out;
}

template <typename T>
void Discriminator<T>::load_parameters(const std::string& prefix, const NamedTensors<T>& tensors) {
  copy_into(parameters(prefix), tensors);
}

template <typename T>
Tensor<T> discriminator_forward(Tape<T>& tape, const Discriminator<T>& d, const Tensor<T>& x) {
  if (x.rank() != 3 || x.dim(0) != d.config().input_channels)
    throw ShapeError("discriminator expects " + std::to_string(d.config().input_channels) +
                     " input channels, got " + shape_str(x.shape()));
  const T slope = static_cast<T>(kLeakySlope);
  Tensor<T> h = x;
  for (const auto& c : d.conv_stack) h = leaky_relu(tape, conv2d(tape, h, c), slope);
  auto pooled = global_avg_pool(tape, h);
  return dense(tape, leaky_relu(tape, dense(tape, pooled, d.fc1), slope), d.fc2);
}

template <typename T>
FeatureExtractor<T>::FeatureExtractor(std::uint64_t seed) : seed_(seed) {
  Rng rng(seed);
  const std::size_t channels[] = {3, 32, 64, 96, 128};
  for (std::size_t s = 0; s < 4; ++s) {
    conv_stack.push_back(make_conv<T>(channels[s], channels[s + 1], 3, 1, 1, rng, false));
    conv_stack.push_back(make_conv<T>(channels[s + 1], channels[s + 1], 3, 2, 1, rng, false));
  }
}

template <typename T>
NamedTensors<T> FeatureExtractor<T>::parameters() const {
  NamedTensors<T> out;
  for (std::size_t i = 0; i < conv_stack.size(); ++i)
    add_conv(out, "fe.conv." + std::to_string(i), conv_stack[i]);
  return out;
}

template <typename T>
Tensor<T> feature_extract(Tape<T>& tape, const FeatureExtractor<T>& fe, const Tensor<T>& img) {
  constexpr std::size_t k = FeatureExtractor<T>::kDownsample;
  if (img.rank() != 3 || img.dim(0) != 3 || img.dim(1) % k != 0 || img.dim(2) % k != 0)
    throw ShapeError("feature_extract expects [3,H,W] with H,W divisible by 16, got " +
                     shape_str(img.shape()));
  const T slope = static_cast<T>(kLeakySlope);
  Tensor<T> h = img;
  for (std::size_t s = 0; s < fe.conv_stack.size(); s += 2)
    h = conv2d(tape, leaky_relu(tape, conv2d(tape, h, fe.conv_stack[s]), slope),
               fe.conv_stack[s + 1]);
  return h;
}

#define GDCA_INSTANTIATE(T)                                                                    \
  template Tensor<T> ca_block_forward(Tape<T>&, const Tensor<T>&, const CaBlockParams<T>&);    \
  template Tensor<T> le_block_forward(Tape<T>&, const Tensor<T>&, const LeBlockParams<T>&);    \
  template class Generator<T>;                                                                 \
  template Tensor<T> generator_forward(Tape<T>&, const Generator<T>&, const Tensor<T>&, bool); \
  template class Discriminator<T>;                                                             \
  template Tensor<T> discriminator_forward(Tape<T>&, const Discriminator<T>&,                  \
                                           const Tensor<T>&);                                  \
  template class FeatureExtractor<T>;                                                          \
  template Tensor<T> feature_extract(Tape<T>&, const FeatureExtractor<T>&, const Tensor<T>&);
GDCA_INSTANTIATE(float)
GDCA_INSTANTIATE(double)
#undef GDCA_INSTANTIATE

}  // namespace gdca
