#pragma once

#include <filesystem>
#include <optional>
#include <ostream>

#include "gdca/config.hpp"
#include "gdca/metrics.hpp"

namespace gdca {

// Process exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,  // checkpoint, image or other I/O failures
  kExitConfig = 2,
  kExitDataset = 3,
  kExitNameMismatch = 4,
  kExitPairError = 5,
};

// Deterministic batch for a global step: the patch stream depends only on
// (seed, step).
Batch<float> make_batch(const std::vector<NamedImage>& images, const Config& config,
                        std::uint64_t step);

// Trains per `config`, writing `<checkpoint_path>.step<N>` every
// checkpoint_every steps and `checkpoint_path` at the end.
int cmd_train(const Config& config, std::ostream& out, std::ostream& err);

int cmd_infer(const std::filesystem::path& checkpoint, const std::filesystem::path& input,
              const std::filesystem::path& output, std::ostream& out, std::ostream& err);

// Scores every same-named PPM pair. `report` receives the rows when given.
int cmd_eval(const std::filesystem::path& sr_dir, const std::filesystem::path& hr_dir,
             const std::optional<std::filesystem::path>& csv_path, std::ostream& out,
             std::ostream& err, EvalReport* report = nullptr);

}  // namespace gdca
