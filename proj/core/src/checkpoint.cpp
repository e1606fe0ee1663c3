#include "ftg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ftg/error.hpp"

namespace ftg {

namespace {

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

template <class T>
T require(const nlohmann::ordered_json& meta, const char* key) {
  if (!meta.contains(key))
    throw CheckpointError(CheckpointError::Kind::BadMetadata,
                          std::string("checkpoint metadata lacks '") + key + "'");
  try {
    return meta.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(CheckpointError::Kind::BadMetadata,
                          std::string("checkpoint metadata field '") + key + "': " + e.what());
  }
}

}  // namespace

std::vector<unsigned char> encode_container(const nlohmann::ordered_json& metadata,
                                            std::span<const std::span<const float>> sections) {
  const std::string meta = metadata.dump();
  std::size_t floats = 0;
  for (const auto& s : sections) floats += s.size();

  std::vector<unsigned char> out;
  out.reserve(kCheckpointMagic.size() + 4 + meta.size() + 4 * floats);
  out.insert(out.end(), kCheckpointMagic.begin(), kCheckpointMagic.end());
  put_u32(out, static_cast<std::uint32_t>(meta.size()));
  out.insert(out.end(), meta.begin(), meta.end());
  for (const auto& s : sections) {
    for (float f : s) put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

DecodedContainer decode_container(std::vector<unsigned char> bytes) {
  const std::size_t magic_len = kCheckpointMagic.size();
  const std::size_t prefix = std::min(bytes.size(), magic_len);
  if (prefix > 0 && std::memcmp(bytes.data(), kCheckpointMagic.data(), prefix) != 0)
    throw CheckpointError(CheckpointError::Kind::MagicMismatch,
                          "checkpoint magic mismatch: not an FTGKGE1 file");
  if (bytes.size() < magic_len + 4)
    throw CheckpointError(CheckpointError::Kind::Truncated,
                          "checkpoint truncated: expected at least " + std::to_string(magic_len + 4) +
                              " bytes, got " + std::to_string(bytes.size()));
  const std::uint32_t len = get_u32(bytes.data() + magic_len);
  const std::size_t meta_end = magic_len + 4 + len;
  if (bytes.size() < meta_end)
    throw CheckpointError(CheckpointError::Kind::Truncated,
                          "checkpoint truncated in metadata: expected at least " +
                              std::to_string(meta_end) + " bytes, got " + std::to_string(bytes.size()));
  DecodedContainer c;
  try {
    c.metadata = nlohmann::ordered_json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(magic_len + 4),
                                               bytes.begin() + static_cast<std::ptrdiff_t>(meta_end));
  } catch (const nlohmann::json::parse_error& e) {
    throw CheckpointError(CheckpointError::Kind::BadMetadata,
                          std::string("checkpoint metadata is not valid JSON: ") + e.what());
  }
  if (!c.metadata.is_object())
    throw CheckpointError(CheckpointError::Kind::BadMetadata, "checkpoint metadata is not an object");
  c.payload_offset = meta_end;
  c.bytes = std::move(bytes);
  return c;
}

std::vector<std::vector<float>> read_sections(const DecodedContainer& c,
                                              std::span<const std::size_t> counts) {
  std::size_t expected = c.payload_offset;
  for (auto n : counts) expected += 4 * n;
  if (c.bytes.size() < expected)
    throw CheckpointError(CheckpointError::Kind::Truncated,
                          "checkpoint truncated: expected " + std::to_string(expected) +
                              " bytes, got " + std::to_string(c.bytes.size()));
  if (c.bytes.size() > expected)
    throw CheckpointError(CheckpointError::Kind::DimensionMismatch,
                          "checkpoint size does not match metadata dimensions: expected " +
                              std::to_string(expected) + " bytes, got " +
                              std::to_string(c.bytes.size()));
  std::vector<std::vector<float>> out;
  const unsigned char* p = c.bytes.data() + c.payload_offset;
  for (auto n : counts) {
    std::vector<float> section(n);
    for (auto& f : section) {
      f = std::bit_cast<float>(get_u32(p));
      p += 4;
    }
    out.push_back(std::move(section));
  }
  return out;
}

void write_file(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Kind::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<unsigned char> encode_checkpoint(const EmbeddingModel& model) {
  model.validate();
  nlohmann::ordered_json meta;
  meta["kind"] = std::string(to_string(model.kind));
  meta["n_entities"] = model.n_entities;
  meta["n_relations"] = model.n_relations;
  meta["d_s"] = model.dim;
  meta["gamma"] = static_cast<double>(model.gamma);
  meta["seed"] = model.seed;
  const std::span<const float> sections[] = {model.entity, model.relation};
  return encode_container(meta, sections);
}

EmbeddingModel decode_checkpoint(std::vector<unsigned char> bytes) {
  const auto c = decode_container(std::move(bytes));
  EmbeddingModel m;
  const auto kind = require<std::string>(c.metadata, "kind");
  try {
    m.kind = parse_model_kind(kind);
  } catch (const InvalidArgument&) {
    throw CheckpointError(CheckpointError::Kind::BadMetadata,
                          "checkpoint kind '" + kind + "' is not an embedding model");
  }
  m.n_entities = require<std::size_t>(c.metadata, "n_entities");
  m.n_relations = require<std::size_t>(c.metadata, "n_relations");
  m.dim = require<std::size_t>(c.metadata, "d_s");
  m.gamma = static_cast<float>(require<double>(c.metadata, "gamma"));
  m.seed = require<std::uint64_t>(c.metadata, "seed");
  if (m.dim == 0 || (is_complex(m.kind) && m.dim % 2 != 0))
    throw CheckpointError(CheckpointError::Kind::DimensionMismatch,
                          "checkpoint d_s=" + std::to_string(m.dim) + " invalid for " + kind);
  const std::size_t counts[] = {m.n_entities * m.dim, m.n_relations * m.relation_dim()};
  auto sections = read_sections(c, counts);
  m.entity = std::move(sections[0]);
  m.relation = std::move(sections[1]);
  return m;
}

void save_checkpoint(const EmbeddingModel& model, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(model));
}

EmbeddingModel load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

}  // namespace ftg
