#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "gdca/errors.hpp"
#include "gdca/image.hpp"

using namespace gdca;

namespace {

Image random_quantized(Rng& rng, std::size_t h, std::size_t w) {
  std::vector<double> px(h * w * 3);
  for (auto& v : px) v = static_cast<double>(rng.uniform_int(256)) / 255.0;
  return Image(h, w, std::move(px));
}

Image from_function(std::size_t h, std::size_t w, double (*f)(double y, double x)) {
  std::vector<double> px(h * w * 3);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) px[(y * w + x) * 3 + c] = f(double(y), double(x));
  return Image(h, w, std::move(px));
}

std::string bytes(std::initializer_list<int> v) {
  std::string s;
  for (int b : v) s.push_back(static_cast<char>(b));
  return s;
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() / ("gdca_test_" + tag);
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("read_ppm decodes exactly") {
  const Image img = read_ppm("P6\n1 1\n255\n" + bytes({255, 0, 0}));
  CHECK(img.height() == 1);
  CHECK(img.width() == 1);
  CHECK(img.pixels() == std::vector<double>{1.0, 0.0, 0.0});
  const Image two = read_ppm("P6 2 1 255\n" + bytes({0, 51, 102, 153, 204, 255}));
  CHECK(two.at(0, 1, 0) == 153.0 / 255.0);
}

TEST_CASE("comments in the header are ignored") {
  const std::string data = bytes({1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
  const Image plain = read_ppm("P6\n2 2\n255\n" + data);
  const Image commented = read_ppm("P6\n# made by hand\n2 # width\n2\n# maxval next\n255\n" + data);
  CHECK(plain == commented);
}

TEST_CASE("read_ppm errors") {
  CHECK_THROWS_AS(read_ppm("P3\n1 1\n255\n0 0 0"), FormatError);
  CHECK_THROWS_AS(read_ppm("GIF89a"), FormatError);
  CHECK_THROWS_AS(read_ppm(""), FormatError);
  CHECK_THROWS_AS(read_ppm("P6\nx 1\n255\n"), FormatError);
  CHECK_THROWS_AS(read_ppm("P6\n1 1\n65535\n" + bytes({0, 0, 0, 0, 0, 0})), UnsupportedError);
  CHECK_THROWS_AS(read_ppm("P6\n1 1\n15\n" + bytes({0, 0, 0})), UnsupportedError);
  CHECK_THROWS_AS(read_ppm("P6\n2 2\n255\n" + bytes({1, 2, 3})), LengthError);
  CHECK_THROWS_AS(read_ppm("P6\n2 2"), LengthError);
}

TEST_CASE("write_ppm canonical output and rounding") {
  CHECK(write_ppm(Image::filled(1, 1, 1, 1, 1)) == "P6\n1 1\n255\n" + bytes({255, 255, 255}));
  CHECK(quantize(0.5) == 128);
  CHECK(quantize(0.0) == 0);
  CHECK(quantize(1.0) == 255);
  CHECK(quantize(127.5 / 255.0 - 1e-9) == 127);
  CHECK(write_ppm(Image::filled(1, 2, 0.5, 0, 1)) == "P6\n2 1\n255\n" + bytes({128, 0, 255, 128, 0, 255}));
}

TEST_CASE("ppm round trips byte for byte over a corpus") {
  Rng rng(1);
  for (int i = 0; i < 25; ++i) {
    const std::size_t h = 1 + rng.uniform_int(17), w = 1 + rng.uniform_int(17);
    std::string file = "P6\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    for (std::size_t k = 0; k < h * w * 3; ++k) file.push_back(static_cast<char>(rng.uniform_int(256)));
    CHECK(write_ppm(read_ppm(file)) == file);
    const Image img = random_quantized(rng, h, w);
    CHECK(read_ppm(write_ppm(img)) == img);
  }
}

TEST_CASE("ppm files on disk") {
  TempDir dir("ppm_io");
  Rng rng(2);
  const Image img = random_quantized(rng, 5, 7);
  write_ppm_file(dir.path / "a.ppm", img);
  CHECK(read_ppm_file(dir.path / "a.ppm") == img);
  CHECK_THROWS_AS(read_ppm_file(dir.path / "missing.ppm"), IoError);
}

TEST_CASE("image invariants") {
  CHECK_THROWS_AS(Image(2, 2, std::vector<double>(11, 0.0)), ShapeError);
  CHECK_THROWS_AS(Image(0, 2, {}), ShapeError);
  CHECK_THROWS_AS(Image(1, 1, {0.0, 1.5, 0.0}), DomainError);
  Rng rng(3);
  const Image img = random_quantized(rng, 4, 6);
  const auto t = image_to_tensor<float>(img);
  CHECK(t.shape() == Shape{3, 4, 6});
  CHECK(t[(2 * 4 + 3) * 6 + 5] == static_cast<float>(img.at(3, 5, 2)));
  CHECK(tensor_to_image(image_to_tensor<double>(img)) == img);
}

TEST_CASE("bicubic resize reproduces constants exactly") {
  const Image c = Image::filled(7, 9, 0.3, 0.55, 0.9);
  for (auto [h, w] : {std::pair{1, 1}, {3, 4}, {7, 9}, {14, 18}, {28, 36}, {5, 31}}) {
    const Image r = bicubic_resize(c, h, w);
    CHECK(r == Image::filled(h, w, 0.3, 0.55, 0.9));
  }
  CHECK(bicubic_resize(bicubic_resize(c, 2, 3), 7, 9) == c);
}

TEST_CASE("bicubic resize to the same size is the identity") {
  Rng rng(4);
  const Image img = random_quantized(rng, 6, 11);
  CHECK(bicubic_resize(img, 6, 11) == img);
}

TEST_CASE("bicubic downscale of an 8x8 ramp stays linear in the interior") {
  const Image ramp = from_function(8, 8, [](double, double x) { return x / 7.0; });
  const Image r = bicubic_resize(ramp, 4, 4);
  // Output column i samples source x = 2i + 0.5 with taps 2i-1 .. 2i+2, so
  // only columns 1 and 2 avoid clamped taps.
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t i = 1; i < 3; ++i)
      for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(r.at(y, i, c) - (2.0 * i + 0.5) / 7.0) <= 1e-6);
}

TEST_CASE("bicubic upscale reproduces a 2-D linear function away from borders") {
  const Image lin = from_function(12, 10, [](double y, double x) { return 0.1 + 0.03 * y + 0.04 * x; });
  const Image r = bicubic_resize(lin, 48, 40);
  for (std::size_t y = 8; y < 40; ++y)
    for (std::size_t x = 8; x < 32; ++x) {
      const double sy = (y + 0.5) / 4.0 - 0.5, sx = (x + 0.5) / 4.0 - 0.5;
      CHECK(std::abs(r.at(y, x, 1) - (0.1 + 0.03 * sy + 0.04 * sx)) <= 1e-6);
    }
}

TEST_CASE("sample_patch_pair contracts") {
  Rng rng(5);
  const Image img = random_quantized(rng, 130, 150);
  const PatchPair p = sample_patch_pair(img, 24, rng, "img");
  CHECK(p.lr.shape() == Shape{3, 24, 24});
  CHECK(p.hr.shape() == Shape{3, 96, 96});
  CHECK(p.source_id == "img");

  std::set<std::size_t> rows, cols;
  for (int i = 0; i < 1000; ++i) {
    const PatchPair q = sample_patch_pair(img, 8, rng);
    CHECK(q.row % 4 == 0);
    CHECK(q.col % 4 == 0);
    CHECK(q.row + 32 <= 130);
    CHECK(q.col + 32 <= 150);
    rows.insert(q.row);
    cols.insert(q.col);
  }
  CHECK(rows.size() == 25);  // every aligned offset in 0..96
  CHECK(cols.size() == 30);

  CHECK_THROWS_AS(sample_patch_pair(img, 40, rng), SizeError);
  CHECK_THROWS_AS(sample_patch_pair(img, 4, rng), SizeError);
}

TEST_CASE("patch halves match an independent re-crop") {
  Rng rng(6);
  const Image img = random_quantized(rng, 70, 90);
  for (int i = 0; i < 10; ++i) {
    const PatchPair p = sample_patch_pair(img, 12, rng);
    std::vector<double> px;
    for (std::size_t y = 0; y < 48; ++y)
      for (std::size_t x = 0; x < 48; ++x)
        for (std::size_t c = 0; c < 3; ++c) px.push_back(img.at(p.row + y, p.col + x, c));
    const Image region(48, 48, px);
    CHECK(to_vector(p.hr.data()) == to_vector(image_to_tensor<float>(region).data()));
    CHECK(to_vector(p.lr.data()) == to_vector(image_to_tensor<float>(bicubic_resize(region, 12, 12)).data()));
  }
}

TEST_CASE("seeded patch stream is stable") {
  // Frozen offsets; any change to the generator or the sampling order breaks this.
  const Image img = Image::filled(200, 160, 0.5, 0.5, 0.5);
  Rng rng(42);
  std::vector<std::pair<std::size_t, std::size_t>> got;
  for (int i = 0; i < 6; ++i) {
    const auto p = sample_patch_pair(img, 8, rng);
    got.emplace_back(p.row, p.col);
  }
  const std::vector<std::pair<std::size_t, std::size_t>> expected {
      {156, 44}, {20, 36}, {80, 104}, {88, 24}, {156, 124}, {128, 108}};
  CHECK(got == expected);
}

TEST_CASE("dihedral transforms") {
  Rng rng(7);
  const Image img = random_quantized(rng, 32, 32);
  PatchPair p = sample_patch_pair(img, 8, rng);
  const auto same = apply_dihedral(p, 0);
  CHECK(to_vector(same.lr.data()) == to_vector(p.lr.data()));
  CHECK(to_vector(same.hr.data()) == to_vector(p.hr.data()));

  const auto twice = apply_dihedral(apply_dihedral(p, 2), 2);
  CHECK(to_vector(twice.hr.data()) == to_vector(p.hr.data()));
  auto quarter = p.hr;
  for (int i = 0; i < 4; ++i) quarter = dihedral(quarter, 1);
  CHECK(to_vector(quarter.data()) == to_vector(p.hr.data()));
  CHECK(to_vector(dihedral(dihedral(p.hr, 4), 4).data()) == to_vector(p.hr.data()));

  std::set<std::vector<float>> distinct;
  auto sorted = [](const Tensor<float>& t) {
    auto v = to_vector(t.data());
    std::sort(v.begin(), v.end());
    return v;
  };
  for (unsigned k = 0; k < 8; ++k) {
    const auto q = apply_dihedral(p, k);
    CHECK(sorted(q.hr) == sorted(p.hr));
    CHECK(sorted(q.lr) == sorted(p.lr));
    distinct.insert(to_vector(q.hr.data()));
  }
  CHECK(distinct.size() == 8);

  // Non-square planes: a quarter turn swaps H and W; out[W-1-x][y] = in[y][x].
  const Tensor<double> t({1, 2, 3}, {1, 2, 3, 4, 5, 6});
  const auto r = dihedral(t, 1);
  CHECK(r.shape() == Shape{1, 3, 2});
  CHECK(to_vector(r.data()) == std::vector<double>{3, 6, 2, 5, 1, 4});
  CHECK(to_vector(dihedral(t, 4).data()) == std::vector<double>{3, 2, 1, 6, 5, 4});
}

TEST_CASE("augment draws every transform and applies it to both halves") {
  Rng rng(8);
  const Image img = random_quantized(rng, 32, 32);
  const PatchPair p = sample_patch_pair(img, 8, rng);
  std::set<unsigned> seen;
  for (int i = 0; i < 200; ++i) {
    const PatchPair a = augment(p, rng);
    for (unsigned k = 0; k < 8; ++k) {
      const auto q = apply_dihedral(p, k);
      if (to_vector(q.hr.data()) == to_vector(a.hr.data())) {
        CHECK(to_vector(q.lr.data()) == to_vector(a.lr.data()));
        seen.insert(k);
      }
    }
  }
  CHECK(seen.size() == 8);
}

TEST_CASE("image directories load in lexicographic order") {
  TempDir dir("load_dir");
  Rng rng(9);
  for (const char* name : {"b.ppm", "a.ppm", "c10.ppm", "c2.ppm"})
    write_ppm_file(dir.path / name, random_quantized(rng, 40, 40));
  std::ofstream(dir.path / "notes.txt") << "ignored";
  std::filesystem::create_directory(dir.path / "sub.ppm");
  const auto images = load_image_dir(dir.path);
  std::vector<std::string> names;
  for (const auto& n : images) names.push_back(n.name);
  CHECK(names == std::vector<std::string>{"a.ppm", "b.ppm", "c10.ppm", "c2.ppm"});
  CHECK_THROWS_AS(load_image_dir(dir.path / "nope"), IoError);

  Rng a(10), b(10);
  const auto x = sample_batch(images, 3, 8, true, a);
  const auto y = sample_batch(images, 3, 8, true, b);
  REQUIRE(x.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(x[i].source_id == y[i].source_id);
    CHECK(to_vector(x[i].lr.data()) == to_vector(y[i].lr.data()));
  }
  CHECK_THROWS_AS(sample_batch({}, 1, 8, false, a), SizeError);
}
