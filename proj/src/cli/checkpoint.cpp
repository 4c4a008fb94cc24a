#include "gdca/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "gdca/errors.hpp"

namespace gdca {

namespace {

template <typename U>
void put(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i)
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
}

bool valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t extra = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + extra >= s.size()) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    const std::uint32_t min_cp[] = {0, 0x80, 0x800, 0x10000};
    if (cp < min_cp[extra] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
    i += extra + 1;
  }
  return true;
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  void need(std::size_t n, const std::string& what) const {
    if (bytes_.size() - pos_ < n)
      throw LengthError("checkpoint truncated at byte offset " + std::to_string(pos_) + " reading " +
                        what + ": expected " + std::to_string(n) + " bytes, found " +
                        std::to_string(bytes_.size() - pos_));
  }

  template <typename U>
  U get(const std::string& what) {
    need(sizeof(U), what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    return static_cast<U>(v);
  }

  std::string_view take(std::size_t n, const std::string& what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t pos() const { return pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const NamedTensors<float>& tensors, std::uint64_t extractor_seed) {
  std::string out = "GDCA";
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, extractor_seed);
  if (tensors.size() > 0xFFFFFFFFu) throw ContractError("too many tensors for a checkpoint");
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  std::set<std::string> names;
  for (const auto& [name, t] : tensors) {
    if (name.empty() || name.size() > 0xFFFF)
      throw ContractError("checkpoint tensor name must be 1..65535 bytes");
    if (!valid_utf8(name)) throw ContractError("checkpoint tensor name is not valid UTF-8");
    if (!names.insert(name).second) throw ContractError("duplicate checkpoint tensor '" + name + "'");
    if (t.rank() > 0xFF) throw ContractError("tensor '" + name + "' has too many dimensions");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out += name;
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape()) {
      if (d > 0xFFFFFFFFu) throw ContractError("tensor '" + name + "' dimension exceeds u32");
      put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    }
    for (float v : t.data()) put<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  const auto magic = bytes.substr(0, 4);
  if (magic != "GDCA") {
    std::ostringstream found;
    found << "checkpoint magic mismatch: found bytes";
    for (unsigned char c : magic) {
      char hex[8];
      std::snprintf(hex, sizeof hex, " %02x", c);
      found << hex;
    }
    if (magic.size() < 4) found << " (only " << magic.size() << " bytes)";
    found << ", expected \"GDCA\"";
    throw FormatError(found.str());
  }
  r.take(4, "magic");
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion)
    throw VersionError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  Checkpoint ck;
  ck.extractor_seed = r.get<std::uint64_t>("extractor seed");
  const auto count = r.get<std::uint32_t>("tensor count");
  std::set<std::string> names;
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::string idx = "tensor " + std::to_string(k);
    const auto len = r.get<std::uint16_t>(idx + " name length");
    std::string name(r.take(len, idx + " name"));
    if (name.empty() || !valid_utf8(name))
      throw FormatError("checkpoint " + idx + " has an empty or non-UTF-8 name");
    if (!names.insert(name).second) throw FormatError("checkpoint repeats tensor '" + name + "'");
    const auto ndim = r.get<std::uint8_t>("'" + name + "' ndim");
    if (ndim == 0) throw FormatError("checkpoint tensor '" + name + "' has no dimensions");
    Shape shape;
    std::uint64_t numel = 1;
    for (std::uint8_t d = 0; d < ndim; ++d) {
      const auto dim = r.get<std::uint32_t>("'" + name + "' dims");
      if (dim == 0) throw FormatError("checkpoint tensor '" + name + "' has a zero dimension");
      shape.push_back(dim);
      if (dim > bytes.size() / numel)
        throw LengthError("checkpoint tensor '" + name + "' declares more data than the " +
                          std::to_string(bytes.size()) + "-byte file holds");
      numel *= dim;
    }
    r.need(numel * 4, "'" + name + "' data");
    std::vector<float> data(numel);
    for (auto& v : data) v = std::bit_cast<float>(r.get<std::uint32_t>("'" + name + "' data"));
    ck.tensors.emplace_back(name, Tensor<float>(shape, std::move(data)));
  }
  if (r.pos() != bytes.size())
    throw FormatError("checkpoint has " + std::to_string(bytes.size() - r.pos()) +
                      " trailing bytes after the last tensor");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const NamedTensors<float>& tensors,
                     std::uint64_t extractor_seed) {
  const std::string bytes = encode_checkpoint(tensors, extractor_seed);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move checkpoint into place at '" + path.string() + "'");
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  try {
    return decode_checkpoint(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const VersionError& e) {
    throw VersionError(path.string() + ": " + e.what());
  } catch (const LengthError& e) {
    throw LengthError(path.string() + ": " + e.what());
  }
}

}  // namespace gdca
