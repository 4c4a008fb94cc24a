#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "gdca/rng.hpp"
#include "gdca/tensor.hpp"

namespace gdca {

// H x W x 3 interleaved RGB, values in [0,1].
class Image {
 public:
  Image() = default;
  // Throws ShapeError for zero dims or a size mismatch, DomainError for values outside [0,1].
  Image(std::size_t height, std::size_t width, std::vector<double> pixels);
  static Image filled(std::size_t height, std::size_t width, double r, double g, double b);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  const std::vector<double>& pixels() const { return pixels_; }
  double at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels_[(y * width_ + x) * 3 + c];
  }

  bool operator==(const Image&) const = default;

 private:
  std::size_t height_ = 0, width_ = 0;
  std::vector<double> pixels_;
};

// round(v * 255), half up, clamped to [0,255].
std::uint8_t quantize(double v);

Image read_ppm(std::string_view bytes);
std::string write_ppm(const Image& img);
Image read_ppm_file(const std::filesystem::path& path);
void write_ppm_file(const std::filesystem::path& path, const Image& img);

// Separable Catmull-Rom (a = -0.5) resampling with center-aligned sample
// positions and clamped edges; no antialiasing when shrinking.
Image bicubic_resize(const Image& img, std::size_t out_h, std::size_t out_w);

// [3,H,W] planar tensor.
template <typename T>
Tensor<T> image_to_tensor(const Image& img);
// Values are clamped into [0,1].
template <typename T>
Image tensor_to_image(const Tensor<T>& t);

Image crop(const Image& img, std::size_t top, std::size_t left, std::size_t height,
           std::size_t width);

struct PatchPair {
  Tensor<float> lr;  // [3,p,p]
  Tensor<float> hr;  // [3,4p,4p]
  std::string source_id;
  std::size_t row = 0, col = 0;  // HR offset, multiples of 4
};

// Uniform 4-aligned HR crop of size 4p and its bicubic downscale to p.
PatchPair sample_patch_pair(const Image& img, std::size_t patch, Rng& rng,
                            const std::string& source_id = {});

// Dihedral transform k in [0,8): optional horizontal flip (k >= 4) followed
// by k % 4 counter-clockwise quarter turns. Works on any [C,H,W] tensor.
template <typename T>
Tensor<T> dihedral(const Tensor<T>& t, unsigned k);
PatchPair apply_dihedral(const PatchPair& pair, unsigned k);
// Draws k uniformly and applies it to both halves of the pair.
PatchPair augment(const PatchPair& pair, Rng& rng);

struct NamedImage {
  std::string name;
  Image image;
};

// Every regular *.ppm file in `dir`, in lexicographic filename order.
std::vector<NamedImage> load_image_dir(const std::filesystem::path& dir);
// Sorted *.ppm filenames without decoding.
std::vector<std::string> list_ppm_files(const std::filesystem::path& dir);

// One training batch: each entry picks an image uniformly, samples a patch
// and optionally augments it, all from `rng`.
std::vector<PatchPair> sample_batch(const std::vector<NamedImage>& images, std::size_t batch_size,
                                    std::size_t patch, bool augment_pairs, Rng& rng);

}  // namespace gdca
