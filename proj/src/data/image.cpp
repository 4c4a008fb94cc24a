#include "gdca/image.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gdca/errors.hpp"

namespace gdca {

Image::Image(std::size_t height, std::size_t width, std::vector<double> pixels)
    : height_(height), width_(width), pixels_(std::move(pixels)) {
  if (height == 0 || width == 0)
    throw ShapeError("image dimensions must be positive, got " + std::to_string(height) + "x" +
                     std::to_string(width));
  if (pixels_.size() != height * width * 3)
    throw ShapeError("image " + std::to_string(height) + "x" + std::to_string(width) + " needs " +
                     std::to_string(height * width * 3) + " values, got " +
                     std::to_string(pixels_.size()));
  for (std::size_t i = 0; i < pixels_.size(); ++i)
    if (!(pixels_[i] >= 0.0 && pixels_[i] <= 1.0))
      throw DomainError("pixel value " + std::to_string(pixels_[i]) + " outside [0,1]", i);
}

Image Image::filled(std::size_t height, std::size_t width, double r, double g, double b) {
  std::vector<double> px(height * width * 3);
  for (std::size_t i = 0; i < height * width; ++i) {
    px[3 * i] = r;
    px[3 * i + 1] = g;
    px[3 * i + 2] = b;
  }
  return Image(height, width, std::move(px));
}

std::uint8_t quantize(double v) {
  const double s = std::floor(v * 255.0 + 0.5);
  return static_cast<std::uint8_t>(std::clamp(s, 0.0, 255.0));
}

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::string_view bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n' && bytes_[pos_] != '\r') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        return;
      }
    }
  }

  std::size_t number(const char* what) {
    skip_space_and_comments();
    if (pos_ >= bytes_.size()) throw LengthError(std::string("ppm header ends before ") + what);
    std::size_t value = 0, digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      value = value * 10 + static_cast<std::size_t>(bytes_[pos_] - '0');
      if (value > (std::size_t{1} << 32)) throw FormatError(std::string("ppm ") + what + " too large");
      ++pos_;
      ++digits;
    }
    if (digits == 0)
      throw FormatError(std::string("ppm header: expected ") + what + " at byte " +
                        std::to_string(pos_));
    return value;
  }

  std::size_t pos_ = 0;

 private:
  std::string_view bytes_;
};

}  // namespace

Image read_ppm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6')
    throw FormatError("not a binary PPM: magic is '" + std::string(bytes.substr(0, 2)) +
                      "', expected 'P6'");
  HeaderReader r(bytes);
  r.pos_ = 2;
  const std::size_t width = r.number("width");
  const std::size_t height = r.number("height");
  const std::size_t maxval = r.number("maxval");
  if (width == 0 || height == 0) throw FormatError("ppm dimensions must be positive");
  if (maxval != 255)
    throw UnsupportedError("ppm maxval " + std::to_string(maxval) + " unsupported (only 255)");
  if (r.pos_ >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[r.pos_])))
    throw LengthError("ppm header not terminated by whitespace");
  const std::size_t start = r.pos_ + 1;
  const std::size_t need = width * height * 3;
  if (bytes.size() - start < need)
    throw LengthError("ppm pixel data truncated: expected " + std::to_string(need) +
                      " bytes, found " + std::to_string(bytes.size() - start));
  std::vector<double> px(need);
  for (std::size_t i = 0; i < need; ++i)
    px[i] = static_cast<double>(static_cast<unsigned char>(bytes[start + i])) / 255.0;
  return Image(height, width, std::move(px));
}

std::string write_ppm(const Image& img) {
  std::string out = "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) +
                    "\n255\n";
  out.reserve(out.size() + img.pixels().size());
  for (double v : img.pixels()) out.push_back(static_cast<char>(quantize(v)));
  return out;
}

Image read_ppm_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return read_ppm(ss.str());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const LengthError& e) {
    throw LengthError(path.string() + ": " + e.what());
  } catch (const UnsupportedError& e) {
    throw UnsupportedError(path.string() + ": " + e.what());
  }
}

void write_ppm_file(const std::filesystem::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  const std::string bytes = write_ppm(img);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

namespace {

double catmull_rom(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

struct Taps {
  std::array<std::size_t, 4> index;
  std::array<double, 4> weight;
  std::size_t center;  // index of the tap at floor(src)
};

std::vector<Taps> make_taps(std::size_t in, std::size_t out) {
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  std::vector<Taps> taps(out);
  const auto last = static_cast<std::ptrdiff_t>(in) - 1;
  for (std::size_t i = 0; i < out; ++i) {
    const double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
    const double base = std::floor(src);
    const double t = src - base;
    const auto b = static_cast<std::ptrdiff_t>(base);
    for (int k = 0; k < 4; ++k) {
      taps[i].index[k] = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(b - 1 + k, 0, last));
      taps[i].weight[k] = catmull_rom(t - static_cast<double>(k - 1));
    }
    taps[i].center = taps[i].index[1];
  }
  return taps;
}

// sum_k w_k p_k written as p_c + sum_k w_k (p_k - p_c); equal because the
// weights sum to one, and exact on constant input.
double apply_taps(const Taps& tp, const double* line, std::size_t stride) {
  const double c = line[tp.center * stride];
  double acc = 0.0;
  for (int k = 0; k < 4; ++k) acc += tp.weight[k] * (line[tp.index[k] * stride] - c);
  return c + acc;
}

}  // namespace

Image bicubic_resize(const Image& img, std::size_t out_h, std::size_t out_w) {
  if (out_h == 0 || out_w == 0) throw ShapeError("bicubic_resize: output dims must be positive");
  const std::size_t H = img.height(), W = img.width();
  const auto tx = make_taps(W, out_w);
  const auto ty = make_taps(H, out_h);
  // Horizontal pass into [H, out_w, 3], then vertical.
  std::vector<double> mid(H * out_w * 3);
  const double* src = img.pixels().data();
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < out_w; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        mid[(y * out_w + x) * 3 + c] = apply_taps(tx[x], src + y * W * 3 + c, 3);
  std::vector<double> out(out_h * out_w * 3);
  for (std::size_t y = 0; y < out_h; ++y)
    for (std::size_t x = 0; x < out_w; ++x)
      for (std::size_t c = 0; c < 3; ++c)
        out[(y * out_w + x) * 3 + c] =
            std::clamp(apply_taps(ty[y], mid.data() + x * 3 + c, out_w * 3), 0.0, 1.0);
  return Image(out_h, out_w, std::move(out));
}

template <typename T>
Tensor<T> image_to_tensor(const Image& img) {
  const std::size_t H = img.height(), W = img.width();
  std::vector<T> data(3 * H * W);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) data[(c * H + y) * W + x] = static_cast<T>(img.at(y, x, c));
  return Tensor<T>({3, H, W}, std::move(data));
}

template <typename T>
Image tensor_to_image(const Tensor<T>& t) {
  if (t.rank() != 3 || t.dim(0) != 3)
    throw ShapeError("tensor_to_image expects [3,H,W], got " + shape_str(t.shape()));
  const std::size_t H = t.dim(1), W = t.dim(2);
  std::vector<double> px(H * W * 3);
  const auto d = t.data();
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x)
        px[(y * W + x) * 3 + c] = std::clamp(static_cast<double>(d[(c * H + y) * W + x]), 0.0, 1.0);
  return Image(H, W, std::move(px));
}

Image crop(const Image& img, std::size_t top, std::size_t left, std::size_t height,
           std::size_t width) {
  if (top + height > img.height() || left + width > img.width())
    throw SizeError("crop " + std::to_string(height) + "x" + std::to_string(width) + " at (" +
                    std::to_string(top) + "," + std::to_string(left) + ") exceeds image " +
                    std::to_string(img.height()) + "x" + std::to_string(img.width()));
  std::vector<double> px;
  px.reserve(height * width * 3);
  for (std::size_t y = top; y < top + height; ++y) {
    const auto row = img.pixels().begin() + static_cast<std::ptrdiff_t>((y * img.width() + left) * 3);
    px.insert(px.end(), row, row + static_cast<std::ptrdiff_t>(width * 3));
  }
  return Image(height, width, std::move(px));
}

PatchPair sample_patch_pair(const Image& img, std::size_t patch, Rng& rng,
                            const std::string& source_id) {
  if (patch < 8) throw SizeError("patch size " + std::to_string(patch) + " below minimum 8");
  const std::size_t hr = 4 * patch;
  if (img.height() < hr || img.width() < hr)
    throw SizeError("image " + source_id + " is " + std::to_string(img.height()) + "x" +
                    std::to_string(img.width()) + ", needs at least " + std::to_string(hr) +
                    "x" + std::to_string(hr) + " for patch " + std::to_string(patch));
  const std::size_t row = 4 * rng.uniform_int((img.height() - hr) / 4 + 1);
  const std::size_t col = 4 * rng.uniform_int((img.width() - hr) / 4 + 1);
  const Image hr_img = crop(img, row, col, hr, hr);
  const Image lr_img = bicubic_resize(hr_img, patch, patch);
  return {image_to_tensor<float>(lr_img), image_to_tensor<float>(hr_img), source_id, row, col};
}

template <typename T>
Tensor<T> dihedral(const Tensor<T>& t, unsigned k) {
  if (t.rank() != 3) throw ShapeError("dihedral expects [C,H,W], got " + shape_str(t.shape()));
  if (k >= 8) throw ContractError("dihedral transform index must be < 8");
  std::size_t C = t.dim(0), H = t.dim(1), W = t.dim(2);
  std::vector<T> cur = to_vector(t.data());
  if (k >= 4) {
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t y = 0; y < H; ++y) {
        auto row = cur.begin() + static_cast<std::ptrdiff_t>((c * H + y) * W);
        std::reverse(row, row + static_cast<std::ptrdiff_t>(W));
      }
  }
  for (unsigned r = 0; r < k % 4; ++r) {
    // Counter-clockwise quarter turn: out[W-1-x][y] = in[y][x].
    std::vector<T> next(cur.size());
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x)
          next[(c * W + (W - 1 - x)) * H + y] = cur[(c * H + y) * W + x];
    cur.swap(next);
    std::swap(H, W);
  }
  return Tensor<T>({C, H, W}, std::move(cur));
}

PatchPair apply_dihedral(const PatchPair& pair, unsigned k) {
  return {dihedral(pair.lr, k), dihedral(pair.hr, k), pair.source_id, pair.row, pair.col};
}

PatchPair augment(const PatchPair& pair, Rng& rng) {
  return apply_dihedral(pair, static_cast<unsigned>(rng.uniform_int(8)));
}

std::vector<std::string> list_ppm_files(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec))
    throw IoError("'" + dir.string() + "' is not a directory");
  std::vector<std::string> names;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    if (entry.path().extension() == ".ppm") names.push_back(entry.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  return names;
}

std::vector<NamedImage> load_image_dir(const std::filesystem::path& dir) {
  std::vector<NamedImage> out;
  for (const auto& name : list_ppm_files(dir)) out.push_back({name, read_ppm_file(dir / name)});
  return out;
}

std::vector<PatchPair> sample_batch(const std::vector<NamedImage>& images, std::size_t batch_size,
                                    std::size_t patch, bool augment_pairs, Rng& rng) {
  if (images.empty()) throw SizeError("cannot sample a batch from an empty image set");
  std::vector<PatchPair> out;
  for (std::size_t i = 0; i < batch_size; ++i) {
    const auto& src = images[rng.uniform_int(images.size())];
    PatchPair p = sample_patch_pair(src.image, patch, rng, src.name);
    out.push_back(augment_pairs ? augment(p, rng) : std::move(p));
  }
  return out;
}

template Tensor<float> image_to_tensor(const Image&);
template Tensor<double> image_to_tensor(const Image&);
template Image tensor_to_image(const Tensor<float>&);
template Image tensor_to_image(const Tensor<double>&);
template Tensor<float> dihedral(const Tensor<float>&, unsigned);
template Tensor<double> dihedral(const Tensor<double>&, unsigned);

}  // namespace gdca
