#include "gdca/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "gdca/errors.hpp"

namespace gdca {

namespace {

struct ParseFailure {
  std::string what;
};

std::uint64_t parse_uint(const std::string& v) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw ParseFailure{"expected a non-negative integer, got '" + v + "'"};
  return out;
}

double parse_real(const std::string& v) {
  double out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out))
    throw ParseFailure{"expected a finite real number, got '" + v + "'"};
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ParseFailure{"expected true or false, got '" + v + "'"};
}

std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  // Keep reals recognisable as reals when they happen to be integral.
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out + "\"";
}

struct Field {
  std::function<void(Config&, const std::string&)> set;
  std::function<std::string(Config)> get;  // by value: accessors take Config&
};

Field size_field(std::function<std::size_t&(Config&)> ref) {
  return {[ref](Config& c, const std::string& v) { ref(c) = static_cast<std::size_t>(parse_uint(v)); },
          [ref](Config c) { return std::to_string(ref(c)); }};
}

Field u64_field(std::function<std::uint64_t&(Config&)> ref) {
  return {[ref](Config& c, const std::string& v) { ref(c) = parse_uint(v); },
          [ref](Config c) { return std::to_string(ref(c)); }};
}

Field real_field(std::function<double&(Config&)> ref) {
  return {[ref](Config& c, const std::string& v) { ref(c) = parse_real(v); },
          [ref](Config c) { return format_real(ref(c)); }};
}

Field string_field(std::function<std::string&(Config&)> ref) {
  return {[ref](Config& c, const std::string& v) { ref(c) = v; },
          [ref](Config c) { return quote(ref(c)); }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"base_channels", size_field([](Config& c) -> auto& { return c.generator.base_channels; })},
      {"n_ca_blocks", size_field([](Config& c) -> auto& { return c.generator.n_ca_blocks; })},
      {"n_le_blocks", size_field([](Config& c) -> auto& { return c.generator.n_le_blocks; })},
      {"ca_reduction", size_field([](Config& c) -> auto& { return c.generator.ca_reduction; })},
      {"skip_weight_init", real_field([](Config& c) -> auto& { return c.generator.skip_weight_init; })},
      {"disc_width", size_field([](Config& c) -> auto& { return c.disc_width; })},
      {"w_percep", real_field([](Config& c) -> auto& { return c.weights.w_percep; })},
      {"w_img_gan", real_field([](Config& c) -> auto& { return c.weights.w_img_gan; })},
      {"w_feat_gan", real_field([](Config& c) -> auto& { return c.weights.w_feat_gan; })},
      {"pretrain_steps", u64_field([](Config& c) -> auto& { return c.schedule.pretrain_steps; })},
      {"gan_steps", u64_field([](Config& c) -> auto& { return c.schedule.gan_steps; })},
      {"batch_size", size_field([](Config& c) -> auto& { return c.schedule.batch_size; })},
      {"lr_pretrain", real_field([](Config& c) -> auto& { return c.schedule.lr_pretrain; })},
      {"lr_gan", real_field([](Config& c) -> auto& { return c.schedule.lr_gan; })},
      {"seed", u64_field([](Config& c) -> auto& { return c.schedule.seed; })},
      {"lr_patch", size_field([](Config& c) -> auto& { return c.lr_patch; })},
      {"augment",
       {[](Config& c, const std::string& v) { c.augment = parse_bool(v); },
        [](Config c) { return std::string(c.augment ? "true" : "false"); }}},
      {"dataset_dir", string_field([](Config& c) -> auto& { return c.dataset_dir; })},
      {"extractor_seed", u64_field([](Config& c) -> auto& { return c.extractor_seed; })},
      {"checkpoint_path", string_field([](Config& c) -> auto& { return c.checkpoint_path; })},
      {"checkpoint_every", u64_field([](Config& c) -> auto& { return c.checkpoint_every; })},
      {"resume_from", string_field([](Config& c) -> auto& { return c.resume_from; })},
      {"log_path", string_field([](Config& c) -> auto& { return c.log_path; })},
  };
  return table;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Splits off a trailing comment and unquotes a quoted value.
std::string clean_value(const std::string& raw) {
  std::string v = trim(raw);
  if (!v.empty() && v.front() == '"') {
    std::string out;
    std::size_t i = 1;
    for (; i < v.size() && v[i] != '"'; ++i) {
      if (v[i] == '\\' && i + 1 < v.size()) ++i;
      out.push_back(v[i]);
    }
    if (i >= v.size()) throw ParseFailure{"unterminated string"};
    const std::string rest = trim(std::string_view(v).substr(i + 1));
    if (!rest.empty() && rest.front() != '#')
      throw ParseFailure{"unexpected text after string: '" + rest + "'"};
    return out;
  }
  const auto hash = v.find('#');
  if (hash != std::string::npos) v = trim(std::string_view(v).substr(0, hash));
  return v;
}

}  // namespace

Config parse_config(std::string_view text) {
  Config cfg;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const auto it = fields().find(key);
    if (it == fields().end()) throw ConfigError(where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + "duplicate key '" + key + "'");
    try {
      it->second.set(cfg, clean_value(line.substr(eq + 1)));
    } catch (const ParseFailure& f) {
      throw ConfigError(where + key + ": " + f.what);
    }
  }
  validate_config(cfg);
  return cfg;
}

Config load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string print_config(const Config& config) {
  std::string out;
  for (const auto& [key, field] : fields()) out += key + " = " + field.get(config) + "\n";
  return out;
}

void validate_config(const Config& c) {
  try {
    c.generator.validate();
  } catch (const ShapeError& e) {
    throw ConfigError(e.what());
  }
  c.weights.validate();
  if (c.disc_width == 0) throw ConfigError("disc_width must be positive");
  if (c.schedule.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (c.lr_patch < 8) throw ConfigError("lr_patch must be at least 8");
  if ((4 * c.lr_patch) % FeatureExtractor<float>::kDownsample != 0)
    throw ConfigError("4 * lr_patch must be divisible by 16 for the feature extractor");
  if (!(c.schedule.lr_pretrain > 0) || !(c.schedule.lr_gan > 0))
    throw ConfigError("learning rates must be positive");
  if (c.checkpoint_path.empty()) throw ConfigError("checkpoint_path must not be empty");
}

}  // namespace gdca
