#include "gdca/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "gdca/errors.hpp"

namespace gdca {

double rmse(const Image& a, const Image& b, std::size_t border_crop) {
  if (a.height() != b.height() || a.width() != b.width())
    throw ShapeError("rmse: image sizes differ (" + std::to_string(a.height()) + "x" +
                     std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                     std::to_string(b.width()) + ")");
  if (a.height() <= 2 * border_crop || a.width() <= 2 * border_crop)
    throw ShapeError("rmse: image " + std::to_string(a.height()) + "x" + std::to_string(a.width()) +
                     " too small for border crop " + std::to_string(border_crop));
  double acc = 0;
  std::size_t n = 0;
  for (std::size_t y = border_crop; y < a.height() - border_crop; ++y)
    for (std::size_t x = border_crop; x < a.width() - border_crop; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        const double d = static_cast<double>(quantize(a.at(y, x, c))) -
                         static_cast<double>(quantize(b.at(y, x, c)));
        acc += d * d;
        ++n;
      }
  return std::sqrt(acc / static_cast<double>(n));
}

double psnr_from_rmse(double rmse_value) {
  if (rmse_value == 0) return std::numeric_limits<double>::infinity();
  return 20.0 * std::log10(255.0 / rmse_value);
}

double psnr(const Image& a, const Image& b, std::size_t border_crop) {
  return psnr_from_rmse(rmse(a, b, border_crop));
}

std::string format_metric(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::size_t EvalReport::scored() const {
  std::size_t n = 0;
  for (const auto& r : rows) n += !r.error;
  return n;
}

double EvalReport::mean_rmse() const {
  double acc = 0;
  for (const auto& r : rows)
    if (!r.error) acc += r.rmse;
  return scored() ? acc / static_cast<double>(scored()) : std::nan("");
}

double EvalReport::mean_psnr() const {
  double acc = 0;
  for (const auto& r : rows)
    if (!r.error) acc += r.psnr;
  return scored() ? acc / static_cast<double>(scored()) : std::nan("");
}

std::string report_table(const EvalReport& report) {
  std::size_t width = 4;
  for (const auto& r : report.rows) width = std::max(width, r.name.size());
  auto line = [&](const std::string& a, const std::string& b, const std::string& c) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "%-*s  %12s  %12s\n", static_cast<int>(width), a.c_str(),
                  b.c_str(), c.c_str());
    return std::string(buf);
  };
  std::string out = line("name", "rmse", "psnr_db");
  for (const auto& r : report.rows) {
    if (r.error)
      out += line(r.name, "error", "error") + "  ! " + *r.error + "\n";
    else
      out += line(r.name, format_metric(r.rmse), format_metric(r.psnr));
  }
  const bool any = report.scored() > 0;
  out += line("mean", any ? format_metric(report.mean_rmse()) : "-",
              any ? format_metric(report.mean_psnr()) : "-");
  out += "pairs scored: " + std::to_string(report.scored()) + " of " +
         std::to_string(report.rows.size()) + "\n";
  out += "rmse: 8-bit RGB, border crop " + std::to_string(report.border_crop) + " px\n";
  out += "PI: not computed\n";
  return out;
}

std::string report_csv(const EvalReport& report) {
  std::string out = "name,rmse,psnr\n";
  for (const auto& r : report.rows) {
    if (r.error)
      out += r.name + ",error,error\n";
    else
      out += r.name + "," + format_metric(r.rmse) + "," + format_metric(r.psnr) + "\n";
  }
  if (report.scored() > 0)
    out += "mean," + format_metric(report.mean_rmse()) + "," + format_metric(report.mean_psnr()) + "\n";
  return out;
}

}  // namespace gdca
