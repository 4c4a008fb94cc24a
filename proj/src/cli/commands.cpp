#include "gdca/commands.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <set>

#include "gdca/checkpoint.hpp"
#include "gdca/errors.hpp"
#include "gdca/rng.hpp"

namespace gdca {

namespace fs = std::filesystem;

Batch<float> make_batch(const std::vector<NamedImage>& images, const Config& config,
                        std::uint64_t step) {
  Rng rng(mix_seed(config.schedule.seed, step));
  const auto pairs =
      sample_batch(images, config.schedule.batch_size, config.lr_patch, config.augment, rng);
  Batch<float> batch;
  batch.reserve(pairs.size());
  for (const auto& p : pairs) batch.emplace_back(p.lr, p.hr);
  return batch;
}

namespace {

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

int cmd_train(const Config& config, std::ostream& out, std::ostream& err) {
  try {
    validate_config(config);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  std::vector<NamedImage> images;
  try {
    images = load_image_dir(config.dataset_dir);
  } catch (const std::exception& e) {
    err << "dataset error: " << e.what() << '\n';
    return kExitDataset;
  }
  if (images.empty()) {
    err << "dataset error: no .ppm images in '" << config.dataset_dir << "'\n";
    return kExitDataset;
  }
  const std::size_t need = 4 * config.lr_patch;
  for (const auto& im : images) {
    if (im.image.height() < need || im.image.width() < need) {
      err << "dataset error: " << im.name << " is " << im.image.height() << "x"
          << im.image.width() << ", smaller than the " << need << "x" << need << " HR patch\n";
      return kExitDataset;
    }
  }

  TrainState state(config.generator, config.disc_width, config.schedule.seed, config.extractor_seed,
                   config.schedule);
  if (!config.resume_from.empty()) {
    Checkpoint ck;
    try {
      ck = load_checkpoint(config.resume_from);
    } catch (const std::exception& e) {
      err << "cannot resume: " << e.what() << '\n';
      return kExitFailure;
    }
    if (ck.extractor_seed != config.extractor_seed) {
      err << "config error: checkpoint extractor seed " << ck.extractor_seed
          << " differs from extractor_seed " << config.extractor_seed << '\n';
      return kExitConfig;
    }
    try {
      state.load_named(ck.tensors);
    } catch (const ShapeError& e) {
      err << "config error: checkpoint does not match the configured architecture: " << e.what()
          << '\n';
      return kExitConfig;
    }
  }

  std::ofstream log_file;
  std::ostream* log = &out;
  if (!config.log_path.empty()) {
    log_file.open(config.log_path, std::ios::app);
    if (!log_file) {
      err << "cannot open log file '" << config.log_path << "'\n";
      return kExitFailure;
    }
    log = &log_file;
  }
  *log << "# " << utc_timestamp() << " training from step " << state.step << " to "
       << config.schedule.pretrain_steps + config.schedule.gan_steps << '\n';

  try {
    const BatchSource batches = [&](std::uint64_t step) { return make_batch(images, config, step); };
    auto periodic = [&](const TrainState& s) {
      if (config.checkpoint_every != 0 && s.step % config.checkpoint_every == 0)
        save_checkpoint(config.checkpoint_path + ".step" + std::to_string(s.step), s.to_named(),
                        config.extractor_seed);
    };
    run_training(state, config.schedule, config.weights, batches, log, periodic);
    save_checkpoint(config.checkpoint_path, state.to_named(), config.extractor_seed);
  } catch (const IoError& e) {
    err << "checkpoint error: " << e.what() << '\n';
    return kExitFailure;
  }
  *log << "# " << utc_timestamp() << " wrote " << config.checkpoint_path << '\n';
  return kExitOk;
}

int cmd_infer(const fs::path& checkpoint, const fs::path& input, const fs::path& output,
              std::ostream& out, std::ostream& err) {
  try {
    const Checkpoint ck = load_checkpoint(checkpoint);
    const Generator<float> g = Generator<float>::from_parameters(ck.tensors);
    const Image lr = read_ppm_file(input);
    if (lr.height() < 8 || lr.width() < 8) {
      err << "input " << input.string() << " is " << lr.height() << "x" << lr.width()
          << "; both sides must be at least 8\n";
      return kExitFailure;
    }
    Tape<float> tape;
    tape.set_enabled(false);
    const auto sr = generator_forward(tape, g, image_to_tensor<float>(lr), true);
    const Image result = tensor_to_image(sr);
    write_ppm_file(output, result);
    out << "wrote " << output.string() << " (" << result.height() << "x" << result.width() << ")\n";
    return kExitOk;
  } catch (const std::exception& e) {
    err << "infer failed: " << e.what() << '\n';
    return kExitFailure;
  }
}

int cmd_eval(const fs::path& sr_dir, const fs::path& hr_dir,
             const std::optional<fs::path>& csv_path, std::ostream& out, std::ostream& err,
             EvalReport* report_out) {
  std::vector<std::string> sr_names, hr_names;
  try {
    sr_names = list_ppm_files(sr_dir);
    hr_names = list_ppm_files(hr_dir);
  } catch (const std::exception& e) {
    err << "eval failed: " << e.what() << '\n';
    return kExitFailure;
  }
  if (sr_names != hr_names) {
    const std::set<std::string> sr(sr_names.begin(), sr_names.end());
    const std::set<std::string> hr(hr_names.begin(), hr_names.end());
    err << "filename mismatch between '" << sr_dir.string() << "' and '" << hr_dir.string()
        << "':\n";
    for (const auto& n : sr)
      if (!hr.count(n)) err << "  only in sr: " << n << '\n';
    for (const auto& n : hr)
      if (!sr.count(n)) err << "  only in hr: " << n << '\n';
    return kExitNameMismatch;
  }

  EvalReport report;
  report.rows.resize(sr_names.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(sr_names.size()); ++i) {
    auto& row = report.rows[static_cast<std::size_t>(i)];
    row.name = sr_names[static_cast<std::size_t>(i)];
    try {
      const Image a = read_ppm_file(sr_dir / row.name);
      const Image b = read_ppm_file(hr_dir / row.name);
      row.rmse = rmse(a, b, report.border_crop);
      row.psnr = psnr_from_rmse(row.rmse);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  }

  out << report_table(report);
  const std::string csv = report_csv(report);
  if (csv_path) {
    std::ofstream f(*csv_path, std::ios::binary | std::ios::trunc);
    f << csv;
    if (!f) {
      err << "cannot write CSV to '" << csv_path->string() << "'\n";
      return kExitFailure;
    }
  } else {
    out << '\n' << csv;
  }
  if (report_out) *report_out = report;
  return report.scored() == report.rows.size() ? kExitOk : kExitPairError;
}

}  // namespace gdca
