#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "gdca/losses.hpp"
#include "gdca/models.hpp"
#include "gdca/train.hpp"

namespace gdca {

struct Config {
  GeneratorConfig generator;
  std::size_t disc_width = 32;
  LossWeights weights;
  TrainSchedule schedule;
  std::size_t lr_patch = 24;
  bool augment = true;
  std::string dataset_dir = "data/train";
  std::uint64_t extractor_seed = 20190101;
  std::string checkpoint_path = "gdca.ckpt";
  std::uint64_t checkpoint_every = 0;  // 0: only the final checkpoint
  std::string resume_from;             // empty: start fresh
  std::string log_path;                // empty: standard output

  bool operator==(const Config&) const = default;
};

// `key = value` lines; `#` starts a comment outside double quotes. Unknown
// keys, duplicates, malformed values and failed validation raise ConfigError
// whose message names the line.
Config parse_config(std::string_view text);
Config load_config_file(const std::string& path);

// Every key, sorted, one `key = value` per line; parse_config reads it back
// to an equal Config.
std::string print_config(const Config& config);

// Cross-field checks run after parsing (and after command-line overrides).
void validate_config(const Config& config);

}  // namespace gdca
