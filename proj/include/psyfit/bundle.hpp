#pragma once

// Per-token final-layer vectors with model metadata, and the versioned binary bundle format.
//
// Layout (all integers little-endian, strings are u32 byte length + UTF-8 bytes):
//
//   u8[8]   magic "PSYVBND\0"
//   u32     format version (1)
//   str     model_name
//   str     family
//   u64     parameter_count
//   u32     d_model
//   u64     training_steps
//   u8      has_init_seed (0 or 1)
//   i64     init_seed                      present only when has_init_seed == 1
//   u32     doc_count
//   str     doc_id                         x doc_count, in order of first appearance
//   u64     token_count
//   record  x token_count: u32 doc_index, u64 token_index, u32 sentence_id, u32 word_index
//   f32     vectors, token_count x d_model, token-major, IEEE-754 binary32
//
// The file ends exactly after the vector payload.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "psyfit/corpus.hpp"
#include "psyfit/error.hpp"

namespace psyfit {

inline constexpr char kBundleMagic[8] = {'P', 'S', 'Y', 'V', 'B', 'N', 'D', '\0'};
inline constexpr std::uint32_t kBundleVersion = 1;
inline constexpr std::uint64_t kUntrainedSteps = 0;
inline constexpr std::uint64_t kFullyTrainedSteps = 143000;

using FloatRowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct BundleMeta {
  std::string model_name;
  std::string family;
  std::uint64_t parameter_count = 0;
  std::uint32_t d_model = 0;
  std::uint64_t training_steps = 0;
  std::optional<std::int64_t> init_seed;

  [[nodiscard]] bool untrained() const noexcept { return training_steps == kUntrainedSteps; }

  friend bool operator==(const BundleMeta&, const BundleMeta&) = default;
};

struct TokenRecord {
  std::string doc_id;
  std::uint64_t token_index = 0;
  std::uint32_t sentence_id = 0;
  std::uint32_t word_index = 0;

  [[nodiscard]] WordKey word_key() const { return {doc_id, sentence_id, word_index}; }

  friend bool operator==(const TokenRecord&, const TokenRecord&) = default;
};

struct VectorBundle {
  BundleMeta meta;
  std::vector<TokenRecord> tokens;
  FloatRowMatrix vectors;  // tokens.size() x d_model

  [[nodiscard]] std::size_t token_count() const noexcept { return tokens.size(); }

  /// Bit-exact equality, including the float payload.
  friend bool operator==(const VectorBundle& a, const VectorBundle& b) {
    if (!(a.meta == b.meta) || a.tokens != b.tokens) return false;
    if (a.vectors.rows() != b.vectors.rows() || a.vectors.cols() != b.vectors.cols()) return false;
    return std::memcmp(a.vectors.data(), b.vectors.data(), sizeof(float) * a.vectors.size()) == 0;
  }
};

/// Throws DataError on any violated bundle invariant.
inline void validate(const VectorBundle& b) {
  const auto& m = b.meta;
  if (m.d_model == 0) throw DataError("bundle '" + m.model_name + "': d_model must be positive");
  if (m.parameter_count == 0) throw DataError("bundle '" + m.model_name + "': parameter_count must be positive");
  if (b.vectors.rows() != static_cast<Eigen::Index>(b.tokens.size()) ||
      b.vectors.cols() != static_cast<Eigen::Index>(m.d_model)) {
    throw DataError("bundle '" + m.model_name + "': vector payload is " + std::to_string(b.vectors.rows()) + "x" +
                    std::to_string(b.vectors.cols()) + ", expected " + std::to_string(b.tokens.size()) + "x" +
                    std::to_string(m.d_model));
  }
  if (!b.vectors.allFinite()) throw DataError("bundle '" + m.model_name + "': non-finite vector entries");
  std::map<std::string, std::uint64_t> last;
  for (const auto& t : b.tokens) {
    const auto [it, fresh] = last.try_emplace(t.doc_id, t.token_index);
    if (!fresh) {
      if (t.token_index <= it->second) {
        throw DataError("bundle '" + m.model_name + "': token_index not strictly increasing in doc '" + t.doc_id +
                        "' at " + std::to_string(t.token_index));
      }
      it->second = t.token_index;
    }
  }
}

namespace detail {

class LeWriter {
public:
  explicit LeWriter(std::ostream& out) : out_(out) {}

  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }

  template <typename UInt>
  void uint(UInt v) {
    unsigned char buf[sizeof(UInt)];
    for (std::size_t i = 0; i < sizeof(UInt); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(buf, sizeof(UInt));
  }

  void str(const std::string& s) {
    if (s.size() > UINT32_MAX) throw DataError("string too long for bundle format");
    uint<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }

private:
  std::ostream& out_;
};

class LeReader {
public:
  LeReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  void bytes(void* p, std::size_t n, const char* what) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw DataError(source_ + ": truncated file while reading " + what);
    }
  }

  template <typename UInt>
  UInt uint(const char* what) {
    unsigned char buf[sizeof(UInt)];
    bytes(buf, sizeof(UInt), what);
    UInt v = 0;
    for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(buf[i]) << (8 * i);
    return v;
  }

  std::string str(const char* what) {
    const auto n = uint<std::uint32_t>(what);
    if (auto left = remaining(); left && n > *left) {
      throw DataError(source_ + ": truncated file while reading " + what);
    }
    std::string s(n, '\0');
    if (n > 0) bytes(s.data(), n, what);
    return s;
  }

  /// Bytes left in a seekable stream.
  std::optional<std::uint64_t> remaining() {
    const auto here = in_.tellg();
    if (here == std::streampos(-1)) return std::nullopt;
    in_.seekg(0, std::ios::end);
    const auto end = in_.tellg();
    in_.seekg(here);
    return static_cast<std::uint64_t>(end - here);
  }

  [[nodiscard]] const std::string& source() const noexcept { return source_; }

private:
  std::istream& in_;
  std::string source_;
};

} // namespace detail

inline void write_vector_bundle(std::ostream& out, const VectorBundle& bundle) {
  validate(bundle);
  if (bundle.tokens.empty()) throw DataError("bundle '" + bundle.meta.model_name + "': refusing to write zero tokens");

  std::vector<std::string> docs;
  std::map<std::string, std::uint32_t> doc_index;
  for (const auto& t : bundle.tokens) {
    if (doc_index.try_emplace(t.doc_id, static_cast<std::uint32_t>(docs.size())).second) docs.push_back(t.doc_id);
  }

  detail::LeWriter w(out);
  w.bytes(kBundleMagic, sizeof(kBundleMagic));
  w.uint<std::uint32_t>(kBundleVersion);
  const auto& m = bundle.meta;
  w.str(m.model_name);
  w.str(m.family);
  w.uint<std::uint64_t>(m.parameter_count);
  w.uint<std::uint32_t>(m.d_model);
  w.uint<std::uint64_t>(m.training_steps);
  w.uint<std::uint8_t>(m.init_seed ? 1 : 0);
  if (m.init_seed) w.uint<std::uint64_t>(static_cast<std::uint64_t>(*m.init_seed));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(docs.size()));
  for (const auto& d : docs) w.str(d);
  w.uint<std::uint64_t>(bundle.tokens.size());
  for (const auto& t : bundle.tokens) {
    w.uint<std::uint32_t>(doc_index.at(t.doc_id));
    w.uint<std::uint64_t>(t.token_index);
    w.uint<std::uint32_t>(t.sentence_id);
    w.uint<std::uint32_t>(t.word_index);
  }
  const float* p = bundle.vectors.data();
  if constexpr (std::endian::native == std::endian::little) {
    w.bytes(p, sizeof(float) * static_cast<std::size_t>(bundle.vectors.size()));
  } else {
    for (Eigen::Index i = 0; i < bundle.vectors.size(); ++i) w.uint<std::uint32_t>(std::bit_cast<std::uint32_t>(p[i]));
  }
  if (!out) throw DataError("bundle write failed");
}

inline VectorBundle read_vector_bundle(std::istream& in, const std::string& source = "<stream>") {
  detail::LeReader r(in, source);
  char magic[sizeof(kBundleMagic)];
  r.bytes(magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kBundleMagic, sizeof(magic)) != 0) {
    throw DataError(source + ": not a vector bundle (magic number mismatch)");
  }
  const auto version = r.uint<std::uint32_t>("version");
  if (version != kBundleVersion) {
    throw DataError(source + ": unsupported bundle format version " + std::to_string(version));
  }
  VectorBundle b;
  auto& m = b.meta;
  m.model_name = r.str("model_name");
  m.family = r.str("family");
  m.parameter_count = r.uint<std::uint64_t>("parameter_count");
  m.d_model = r.uint<std::uint32_t>("d_model");
  m.training_steps = r.uint<std::uint64_t>("training_steps");
  const auto has_seed = r.uint<std::uint8_t>("has_init_seed");
  if (has_seed > 1) throw DataError(source + ": invalid has_init_seed byte");
  if (has_seed) m.init_seed = static_cast<std::int64_t>(r.uint<std::uint64_t>("init_seed"));
  if (m.d_model == 0) throw DataError(source + ": d_model must be positive");

  const auto doc_count = r.uint<std::uint32_t>("doc_count");
  std::vector<std::string> docs;
  for (std::uint32_t i = 0; i < doc_count; ++i) docs.push_back(r.str("doc_id"));

  const auto token_count = r.uint<std::uint64_t>("token_count");
  constexpr std::uint64_t kRecordBytes = 4 + 8 + 4 + 4;
  const std::uint64_t row_bytes = std::uint64_t{m.d_model} * sizeof(float);
  if (auto left = r.remaining()) {
    const long double expected = static_cast<long double>(token_count) * (kRecordBytes + row_bytes);
    if (expected != static_cast<long double>(*left)) {
      throw DataError(source + ": declared token count " + std::to_string(token_count) + " needs " +
                      std::to_string(static_cast<unsigned long long>(expected)) + " payload bytes, file has " +
                      std::to_string(*left) + (expected > *left ? " (truncated file)" : ""));
    }
  }

  b.tokens.resize(token_count);
  for (auto& t : b.tokens) {
    const auto di = r.uint<std::uint32_t>("token record");
    if (di >= docs.size()) throw DataError(source + ": token doc_index out of range");
    t.doc_id = docs[di];
    t.token_index = r.uint<std::uint64_t>("token record");
    t.sentence_id = r.uint<std::uint32_t>("token record");
    t.word_index = r.uint<std::uint32_t>("token record");
  }
  b.vectors.resize(static_cast<Eigen::Index>(token_count), m.d_model);
  float* p = b.vectors.data();
  if constexpr (std::endian::native == std::endian::little) {
    r.bytes(p, sizeof(float) * static_cast<std::size_t>(b.vectors.size()), "vector payload");
  } else {
    for (Eigen::Index i = 0; i < b.vectors.size(); ++i) {
      p[i] = std::bit_cast<float>(r.uint<std::uint32_t>("vector payload"));
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw DataError(source + ": trailing bytes after declared " + std::to_string(token_count) + " tokens");
  }
  validate(b);
  return b;
}

inline void write_vector_bundle(const std::string& path, const VectorBundle& bundle) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  write_vector_bundle(out, bundle);
}

inline VectorBundle read_vector_bundle(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "' for reading");
  return read_vector_bundle(in, path);
}

} // namespace psyfit
