// Copyright 2026 The argus-audit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "argus/error.hpp"
#include "argus/io.hpp"
#include "argus/random.hpp"
#include "argus/text.hpp"

namespace argus {

/// Fixed-dimension real vector with finite components and non-zero norm.
/// Values are kept exactly as the provider produced them; normalization only
/// happens inside cosine().
class EmbeddingVector {
 public:
  EmbeddingVector() = default;

  explicit EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) fail(ErrorKind::dimension, "embedding must have positive dimension");
    double sq = 0.0;
    for (double v : values_) {
      if (!std::isfinite(v)) fail(ErrorKind::validation, "embedding has a non-finite component");
      sq += v * v;
    }
    norm_ = std::sqrt(sq);
    if (!(norm_ > 0.0)) fail(ErrorKind::validation, "embedding has zero norm");
  }

  std::size_t dim() const { return values_.size(); }
  double norm() const { return norm_; }
  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }

  friend bool operator==(const EmbeddingVector& a, const EmbeddingVector& b) {
    return a.values_ == b.values_;
  }

 private:
  std::vector<double> values_;
  double norm_ = 0.0;
};

inline double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim())
    fail(ErrorKind::dimension,
         "dimension mismatch " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  double s = 0.0;
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) s += av[i] * bv[i];
  return s;
}

inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  return dot(a, b) / (a.norm() * b.norm());
}

enum class Granularity { sentence, token };

inline std::string_view to_string(Granularity g) {
  return g == Granularity::token ? "token" : "sentence";
}

inline Granularity parse_granularity(std::string_view s) {
  if (s == "token") return Granularity::token;
  if (s == "sentence") return Granularity::sentence;
  fail(ErrorKind::validation, "unknown granularity '" + std::string(s) + "'");
}

/// Encoder output for one text: a row per token with the token's character
/// span, or a single row for sentence-level encoders.
struct TokenMatrix {
  std::vector<EmbeddingVector> rows;
  std::vector<Span> token_spans;
  std::size_t text_length = 0;

  std::size_t dim() const { return rows.empty() ? 0 : rows.front().dim(); }

  void validate() const {
    if (rows.empty()) fail(ErrorKind::protocol, "token matrix has no rows");
    if (rows.size() != token_spans.size())
      fail(ErrorKind::protocol, "token matrix has " + std::to_string(rows.size()) + " rows but " +
                                    std::to_string(token_spans.size()) + " spans");
    const auto d = rows.front().dim();
    for (const auto& r : rows)
      if (r.dim() != d) fail(ErrorKind::dimension, "token rows differ in dimension");
    for (std::size_t i = 0; i < token_spans.size(); ++i) {
      const auto& s = token_spans[i];
      if (s.end < s.start || s.end > text_length)
        fail(ErrorKind::protocol, "token span " + std::to_string(i) + " outside text");
      if (i > 0 && s.start < token_spans[i - 1].start)
        fail(ErrorKind::protocol, "token spans are not monotone");
    }
  }
};

/// Mention pooling: mean of every token row whose span overlaps `span` by at
/// least one character. Sentence-level input returns its single vector.
inline EmbeddingVector pool_span(const TokenMatrix& m, Span span,
                                 Granularity granularity = Granularity::token) {
  if (span.empty() || span.end > m.text_length)
    fail(ErrorKind::span, "span [" + std::to_string(span.start) + "," + std::to_string(span.end) +
                              ") outside text of length " + std::to_string(m.text_length));
  if (m.rows.empty()) fail(ErrorKind::protocol, "token matrix has no rows");
  if (granularity == Granularity::sentence) return m.rows.front();

  std::vector<double> acc(m.dim(), 0.0);
  std::size_t count = 0;
  for (std::size_t i = 0; i < m.rows.size(); ++i) {
    if (!m.token_spans[i].overlaps(span)) continue;
    const auto v = m.rows[i].values();
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += v[j];
    ++count;
  }
  if (count == 0) fail(ErrorKind::span, "span overlaps no token");
  for (auto& x : acc) x /= static_cast<double>(count);
  return EmbeddingVector(std::move(acc));
}

/// Deterministic pseudo-random unit vector keyed on (text, span, seed).
inline EmbeddingVector synthetic_embed(std::string_view text, Span span, std::size_t dim,
                                       std::uint64_t seed) {
  if (dim < 2) fail(ErrorKind::dimension, "synthetic embeddings need dim >= 2");
  std::uint64_t h = fnv1a(text);
  h = hash_u64(h, span.start);
  h = hash_u64(h, span.end);
  h = hash_u64(h, seed);
  Rng rng(mix64(h));
  std::vector<double> v(dim);
  double sq = 0.0;
  do {
    sq = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      sq += x * x;
    }
  } while (sq == 0.0);
  const double inv = 1.0 / std::sqrt(sq);
  for (auto& x : v) x *= inv;
  return EmbeddingVector(std::move(v));
}

// ---------------------------------------------------------------------------
// Providers

enum class ProviderKind { file_store, synthetic, bridge };

inline std::string_view to_string(ProviderKind k) {
  switch (k) {
    case ProviderKind::file_store: return "file-store";
    case ProviderKind::synthetic: return "synthetic";
    case ProviderKind::bridge: return "bridge";
  }
  return "synthetic";
}

inline ProviderKind parse_provider_kind(std::string_view s) {
  if (s == "file-store") return ProviderKind::file_store;
  if (s == "synthetic") return ProviderKind::synthetic;
  if (s == "bridge") return ProviderKind::bridge;
  fail(ErrorKind::validation, "unknown provider kind '" + std::string(s) + "'");
}

struct ProviderDescriptor {
  ProviderKind kind = ProviderKind::synthetic;
  std::size_t dim = 64;
  Granularity granularity = Granularity::sentence;
};

/// What a provider is asked to embed. `key` identifies precomputed entries
/// (entity id or doc id); `text` is always the full paragraph or document.
struct EmbedRequest {
  std::string_view key;
  std::string_view text;
  Span span;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual const ProviderDescriptor& descriptor() const = 0;
  virtual EmbeddingVector embed(const EmbedRequest& request) const = 0;
};

/// Produces token-level (or single-row sentence) representations of a text.
class TokenEncoder {
 public:
  virtual ~TokenEncoder() = default;
  virtual TokenMatrix encode(std::string_view text) const = 0;
};

/// Adapts a TokenEncoder into a provider by pooling at the requested span.
class EncoderProvider final : public EmbeddingProvider {
 public:
  EncoderProvider(std::shared_ptr<const TokenEncoder> encoder, ProviderDescriptor desc)
      : encoder_(std::move(encoder)), desc_(desc) {}

  const ProviderDescriptor& descriptor() const override { return desc_; }

  EmbeddingVector embed(const EmbedRequest& req) const override {
    const auto m = encoder_->encode(req.text);
    m.validate();
    if (m.dim() != desc_.dim)
      fail(ErrorKind::protocol, "encoder returned dim " + std::to_string(m.dim()) +
                                    ", descriptor declares " + std::to_string(desc_.dim));
    if (m.text_length != req.text.size())
      fail(ErrorKind::protocol, "encoder reported text length " + std::to_string(m.text_length) +
                                    ", sent " + std::to_string(req.text.size()));
    return pool_span(m, req.span, desc_.granularity);
  }

 private:
  std::shared_ptr<const TokenEncoder> encoder_;
  ProviderDescriptor desc_;
};

/// Test-double encoder: one row per word, each the synthetic embedding of
/// the casefolded word. Texts sharing words therefore share geometry, which
/// makes document expansion measurable without a neural model.
class SyntheticTokenEncoder final : public TokenEncoder {
 public:
  SyntheticTokenEncoder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {}

  TokenMatrix encode(std::string_view text) const override {
    TokenMatrix m;
    m.text_length = text.size();
    for (const auto& span : text::word_spans(text)) {
      const auto word = text::casefold(text.substr(span.start, span.length()));
      m.rows.push_back(synthetic_embed(word, Span{0, word.size()}, dim_, seed_));
      m.token_spans.push_back(span);
    }
    if (m.rows.empty()) fail(ErrorKind::span, "text has no word tokens");
    return m;
  }

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

/// Synthetic provider. Sentence granularity hashes (text, span) directly;
/// token granularity pools bag-of-words token rows.
class SyntheticProvider final : public EmbeddingProvider {
 public:
  SyntheticProvider(std::size_t dim, std::uint64_t seed,
                    Granularity granularity = Granularity::sentence)
      : desc_{ProviderKind::synthetic, dim, granularity},
        seed_(seed),
        tokens_(std::make_shared<SyntheticTokenEncoder>(dim, seed),
                ProviderDescriptor{ProviderKind::synthetic, dim, Granularity::token}) {
    if (dim < 2) fail(ErrorKind::dimension, "synthetic embeddings need dim >= 2");
  }

  const ProviderDescriptor& descriptor() const override { return desc_; }

  EmbeddingVector embed(const EmbedRequest& req) const override {
    if (desc_.granularity == Granularity::token) return tokens_.embed(req);
    return synthetic_embed(req.text, req.span, desc_.dim, seed_);
  }

 private:
  ProviderDescriptor desc_;
  std::uint64_t seed_;
  EncoderProvider tokens_;
};

// ---------------------------------------------------------------------------
// Binary embedding store: "ARGE" | u16 version | u32 dim, then per record
// u16 key length | key bytes | dim x f32, all little-endian.

inline constexpr char kStoreMagic[4] = {'A', 'R', 'G', 'E'};
inline constexpr std::uint16_t kStoreVersion = 1;

namespace detail {

inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[3]} << 24);
}

inline std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace detail

/// Immutable key -> vector store. Opening rebuilds the key -> offset index;
/// vectors are decoded on lookup.
class VectorStore {
 public:
  static void write(const std::filesystem::path& path, std::size_t dim,
                    const std::vector<std::pair<std::string, EmbeddingVector>>& entries) {
    std::string out(kStoreMagic, 4);
    detail::put_u16(out, kStoreVersion);
    detail::put_u32(out, static_cast<std::uint32_t>(dim));
    for (const auto& [key, vec] : entries) {
      if (key.size() > 0xffff) fail(ErrorKind::validation, "store key too long");
      if (vec.dim() != dim) fail(ErrorKind::dimension, "store entry '" + key + "' has wrong dim");
      detail::put_u16(out, static_cast<std::uint16_t>(key.size()));
      out.append(key);
      for (double x : vec.values()) {
        const float f = static_cast<float>(x);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        detail::put_u32(out, bits);
      }
    }
    io::write_text(path, out);
  }

  static VectorStore open(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path))
      fail(ErrorKind::io, "embedding store '" + path.string() + "' does not exist");
    VectorStore s;
    s.bytes_ = io::read_text(path);
    const auto* p = reinterpret_cast<const unsigned char*>(s.bytes_.data());
    const std::size_t n = s.bytes_.size();
    if (n < 10 || std::memcmp(p, kStoreMagic, 4) != 0)
      fail(ErrorKind::protocol, "'" + path.string() + "' is not an embedding store");
    const auto version = detail::get_u16(p + 4);
    if (version != kStoreVersion)
      fail(ErrorKind::protocol, "unsupported store version " + std::to_string(version));
    s.dim_ = detail::get_u32(p + 6);
    if (s.dim_ == 0) fail(ErrorKind::protocol, "store declares dim 0");
    std::size_t off = 10;
    const std::size_t payload = 4 * s.dim_;
    while (off < n) {
      if (off + 2 > n) fail(ErrorKind::protocol, "truncated store record header");
      const auto klen = detail::get_u16(p + off);
      off += 2;
      if (off + klen + payload > n) fail(ErrorKind::protocol, "truncated store record");
      std::string key(s.bytes_.data() + off, klen);
      off += klen;
      if (!s.index_.emplace(std::move(key), off).second)
        fail(ErrorKind::protocol, "duplicate key in store");
      off += payload;
    }
    return s;
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return index_.size(); }
  bool contains(std::string_view key) const { return index_.count(std::string(key)) != 0; }

  EmbeddingVector get(std::string_view key) const {
    auto it = index_.find(std::string(key));
    if (it == index_.end()) fail(ErrorKind::lookup, "no stored embedding for '" + std::string(key) + "'");
    const auto* p = reinterpret_cast<const unsigned char*>(bytes_.data()) + it->second;
    std::vector<double> v(dim_);
    for (std::size_t i = 0; i < dim_; ++i) {
      const std::uint32_t bits = detail::get_u32(p + 4 * i);
      float f;
      std::memcpy(&f, &bits, 4);
      v[i] = f;
    }
    return EmbeddingVector(std::move(v));
  }

 private:
  std::string bytes_;
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Precomputed vectors looked up by request key.
class FileStoreProvider final : public EmbeddingProvider {
 public:
  explicit FileStoreProvider(const std::filesystem::path& path)
      : store_(VectorStore::open(path)),
        desc_{ProviderKind::file_store, store_.dim(), Granularity::sentence} {}

  const ProviderDescriptor& descriptor() const override { return desc_; }

  EmbeddingVector embed(const EmbedRequest& req) const override { return store_.get(req.key); }

 private:
  VectorStore store_;
  ProviderDescriptor desc_;
};

/// Encodes the full paragraph and pools at `span`; checks the declared dim.
inline EmbeddingVector embed_entity(const EmbeddingProvider& provider, std::string_view paragraph,
                                    Span span, std::string_view key = {}) {
  if (span.empty() || span.end > paragraph.size())
    fail(ErrorKind::span, "mention span outside paragraph");
  auto v = provider.embed({key, paragraph, span});
  if (v.dim() != provider.descriptor().dim)
    fail(ErrorKind::protocol, "provider returned dim " + std::to_string(v.dim()) +
                                  ", descriptor declares " +
                                  std::to_string(provider.descriptor().dim));
  return v;
}

/// Whole-text embedding (queries, documents, views).
inline EmbeddingVector embed_text(const EmbeddingProvider& provider, std::string_view text,
                                  std::string_view key = {}) {
  return embed_entity(provider, text, Span{0, text.size()}, key);
}

}  // namespace argus
