#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gdca/image.hpp"

namespace gdca {

inline constexpr std::size_t kDefaultBorderCrop = 4;

// RMSE in 8-bit units between the quantized images after removing
// `border_crop` pixels from every side.
double rmse(const Image& a, const Image& b, std::size_t border_crop = kDefaultBorderCrop);
// 20 log10(255 / rmse); +infinity for identical images.
double psnr_from_rmse(double rmse_value);
double psnr(const Image& a, const Image& b, std::size_t border_crop = kDefaultBorderCrop);

// Six significant digits; infinity prints as "inf".
std::string format_metric(double v);

struct EvalRow {
  std::string name;
  double rmse = 0;
  double psnr = 0;
  std::optional<std::string> error;  // set when the pair could not be scored
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::size_t border_crop = kDefaultBorderCrop;
  std::size_t scored() const;
  double mean_rmse() const;  // over rows without errors
  double mean_psnr() const;
};

std::string report_table(const EvalReport& report);
// `name,rmse,psnr` header, one row per pair (errors as `error`), then a `mean` row.
std::string report_csv(const EvalReport& report);

}  // namespace gdca
