#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "gdca/commands.hpp"
#include "gdca/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"GDCA x4 super-resolution: train, infer and evaluate"};
  app.require_subcommand(0, 1);

  std::optional<std::uint64_t> seed;
  bool print_config = false;
  app.add_option("--seed", seed, "Override the training seed");
  app.add_flag("--print-config", print_config, "Print the fully resolved config and exit");

  std::string config_path;
  auto* train = app.add_subcommand("train", "Pretrain then adversarially train a generator");
  train->add_option("--config", config_path, "Config file (key = value lines)")->required();
  train->fallthrough();

  std::string ckpt, in, out;
  auto* infer = app.add_subcommand("infer", "Upscale one PPM image x4");
  infer->add_option("--checkpoint", ckpt, "Checkpoint written by train")->required();
  infer->add_option("--in", in, "Low-resolution input PPM")->required();
  infer->add_option("--out", out, "Output PPM path")->required();

  std::string sr_dir, hr_dir;
  std::optional<std::string> csv;
  auto* eval = app.add_subcommand("eval", "RMSE/PSNR between same-named PPMs of two directories");
  eval->add_option("--sr", sr_dir, "Directory of super-resolved images")->required();
  eval->add_option("--hr", hr_dir, "Directory of reference images")->required();
  eval->add_option("--csv", csv, "Also write the per-image table as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : gdca::kExitConfig;
  }

  if (*infer) return gdca::cmd_infer(ckpt, in, out, std::cout, std::cerr);
  if (*eval) {
    std::optional<std::filesystem::path> csv_path;
    if (csv) csv_path = *csv;
    return gdca::cmd_eval(sr_dir, hr_dir, csv_path, std::cout, std::cerr);
  }

  gdca::Config config;
  try {
    if (*train) config = gdca::load_config_file(config_path);
    if (seed) config.schedule.seed = *seed;
    gdca::validate_config(config);
  } catch (const gdca::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return gdca::kExitConfig;
  }
  if (print_config) {
    std::cout << gdca::print_config(config);
    return gdca::kExitOk;
  }
  if (*train) return gdca::cmd_train(config, std::cout, std::cerr);
  std::cout << app.help();
  return gdca::kExitOk;
}
