#include "schemex/model_io.hpp"

#include <openssl/sha.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"

namespace schemex {

static_assert(std::endian::native == std::endian::little,
              "model files store raw little-endian payloads");

namespace {

using json = nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelFileError("FileError", "cannot open model file " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get(const std::string& in, std::size_t offset) {
  T value;
  std::memcpy(&value, in.data() + offset, sizeof(T));
  return value;
}

json config_json(const ModelConfig& c) {
  return {{"vocab_size", c.vocab_size},         {"hidden_dim", c.hidden_dim},
          {"layers", c.layers},                 {"heads", c.heads},
          {"ffn_dim", c.ffn_dim},               {"max_positions", c.max_positions},
          {"max_span_width", c.max_span_width}, {"max_count", c.max_count},
          {"seed", c.seed}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.layers = j.at("layers").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.ffn_dim = j.at("ffn_dim").get<std::size_t>();
  c.max_positions = j.at("max_positions").get<std::size_t>();
  c.max_span_width = j.at("max_span_width").get<std::size_t>();
  c.max_count = j.at("max_count").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

void save_model(const Model& model, const std::filesystem::path& path) {
  json manifest = json::array();
  std::size_t offset = 0;
  for (const auto& [name, t] : model.params) {
    const std::size_t nbytes = t.size() * sizeof(double);
    manifest.push_back(
        {{"name", name}, {"shape", t.shape}, {"dtype", "f64"}, {"offset", offset}, {"nbytes", nbytes}});
    offset += nbytes;
  }
  const json header = {{"config", config_json(model.config)},
                       {"vocab", model.vocab.tokens()},
                       {"tensors", std::move(manifest)}};
  const std::string header_text = header.dump();

  std::string out(kModelMagic, sizeof(kModelMagic));
  put<std::uint16_t>(out, kModelFormatVersion);
  put<std::uint64_t>(out, header_text.size());
  out += header_text;
  for (const auto& [_, t] : model.params) {
    out.append(reinterpret_cast<const char*>(t.data.data()), t.size() * sizeof(double));
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw ModelFileError("FileError", "cannot write model file " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw ModelFileError("FileError", "short write to " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  constexpr std::size_t kMagicLen = sizeof(kModelMagic);
  constexpr std::size_t kPrelude = kMagicLen + sizeof(std::uint16_t) + sizeof(std::uint64_t);

  if (bytes.size() < kMagicLen || std::memcmp(bytes.data(), kModelMagic, kMagicLen) != 0) {
    throw ModelFileError("BadMagic", path.string() + " is not a model file");
  }
  if (bytes.size() < kPrelude) throw ModelFileError("TruncatedFile", "file ends inside the prelude");
  const auto version = get<std::uint16_t>(bytes, kMagicLen);
  if (version != kModelFormatVersion) {
    throw ModelFileError("VersionMismatch", "model format version " + std::to_string(version) +
                                                " is not supported (expected " +
                                                std::to_string(kModelFormatVersion) + ")");
  }
  const auto header_len = get<std::uint64_t>(bytes, kMagicLen + sizeof(std::uint16_t));
  if (header_len > bytes.size() - kPrelude) {
    throw ModelFileError("TruncatedFile", "file ends inside the header");
  }

  json header;
  Model model;
  try {
    header = json::parse(bytes.begin() + kPrelude,
                         bytes.begin() + static_cast<std::ptrdiff_t>(kPrelude + header_len));
    model.config = config_from_json(header.at("config"));
    model.vocab = Vocabulary(header.at("vocab").get<std::vector<std::string>>());
  } catch (const json::exception& e) {
    throw ModelFileError("CorruptHeader", std::string("unreadable header: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ModelFileError("CorruptHeader", e.what());
  }
  try {
    model.config.validate();
  } catch (const std::invalid_argument& e) {
    throw ModelFileError("ShapeMismatch", e.what());
  }
  if (model.vocab.size() != model.config.vocab_size) {
    throw ModelFileError("ShapeMismatch", "vocabulary size disagrees with config");
  }

  // The expected layout comes from the config; the manifest must match it.
  TensorMap expected = init_params(model.config);
  const std::size_t payload = kPrelude + header_len;
  const json& manifest = header.at("tensors");
  if (!manifest.is_array() || manifest.size() != expected.size()) {
    throw ModelFileError("ShapeMismatch", "tensor manifest has " +
                                              std::to_string(manifest.size()) + " entries, expected " +
                                              std::to_string(expected.size()));
  }
  std::size_t needed = 0;
  for (const auto& entry : manifest) {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t offset = 0, nbytes = 0;
    try {
      name = entry.at("name").get<std::string>();
      shape = entry.at("shape").get<std::vector<std::size_t>>();
      offset = entry.at("offset").get<std::size_t>();
      nbytes = entry.at("nbytes").get<std::size_t>();
      if (entry.at("dtype").get<std::string>() != "f64") {
        throw ModelFileError("ShapeMismatch", name + ": unsupported dtype");
      }
    } catch (const json::exception& e) {
      throw ModelFileError("CorruptHeader", std::string("bad manifest entry: ") + e.what());
    }
    auto it = expected.find(name);
    if (it == expected.end()) throw ModelFileError("ShapeMismatch", "unexpected tensor " + name);
    if (it->second.shape != shape || nbytes != Tensor::count(shape) * sizeof(double)) {
      throw ModelFileError("ShapeMismatch", name + ": shape disagrees with config");
    }
    needed = std::max(needed, offset + nbytes);
    if (payload + offset + nbytes > bytes.size()) {
      throw ModelFileError("TruncatedFile", name + ": payload extends past end of file");
    }
    Tensor t(shape);
    std::memcpy(t.data.data(), bytes.data() + payload + offset, nbytes);
    for (double x : t.data) {
      if (!std::isfinite(x)) throw ModelFileError("NonFiniteTensor", name + " holds a non-finite value");
    }
    model.params[name] = std::move(t);
  }
  if (model.params.size() != expected.size()) {
    throw ModelFileError("ShapeMismatch", "duplicate tensor names in manifest");
  }
  if (payload + needed != bytes.size()) {
    throw ModelFileError("ShapeMismatch", "trailing bytes after the last tensor");
  }
  return model;
}

std::string model_file_id(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), digest);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned char b : digest) {
    out += kHex[b >> 4];
    out += kHex[b & 0xF];
  }
  return out;
}

}  // namespace schemex
