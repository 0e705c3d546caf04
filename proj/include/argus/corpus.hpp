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

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "argus/error.hpp"
#include "argus/io.hpp"
#include "argus/random.hpp"
#include "argus/text.hpp"

namespace argus {

/// An auditable entity with its grounded mention span and 1-hop KG neighbors.
struct EntityRecord {
  std::string id;
  std::string label;
  std::string paragraph;
  Span mention_span;
  std::vector<std::string> neighbor_ids;  // sorted, unique

  bool has_neighbor(std::string_view other) const {
    return std::binary_search(neighbor_ids.begin(), neighbor_ids.end(), other);
  }
};

/// Proxy queries T_x for one target. Never empty, no duplicates, no self.
struct RelatedEntitySet {
  std::string target_id;
  std::vector<std::string> related_ids;
};

/// Neutral competitors sampled for one related entity (query).
struct NeutralPool {
  std::string related_id;
  std::vector<std::string> member_ids;
};

enum class DocSource { original, expansion, synthesis };

inline std::string_view to_string(DocSource s) {
  switch (s) {
    case DocSource::original: return "original";
    case DocSource::expansion: return "expansion";
    case DocSource::synthesis: return "synthesis";
  }
  return "original";
}

inline DocSource parse_doc_source(std::string_view s) {
  if (s == "original") return DocSource::original;
  if (s == "expansion") return DocSource::expansion;
  if (s == "synthesis") return DocSource::synthesis;
  fail(ErrorKind::validation, "unknown document source '" + std::string(s) + "'");
}

struct Document {
  std::string doc_id;
  std::string text;
  DocSource source = DocSource::original;
  std::optional<std::string> parent_id;

  /// The original document this view belongs to.
  const std::string& root_id() const { return parent_id ? *parent_id : doc_id; }
};

inline void validate_document(const Document& d) {
  if (d.doc_id.empty()) fail(ErrorKind::validation, "document without doc_id");
  if (d.source == DocSource::original && d.parent_id)
    fail(ErrorKind::validation, "original document '" + d.doc_id + "' must not carry parent_id");
  if (d.source != DocSource::original && (!d.parent_id || d.parent_id->empty()))
    fail(ErrorKind::validation, "view '" + d.doc_id + "' is missing parent_id");
}

// ---------------------------------------------------------------------------
// Surface-form grounding

struct GroundingOptions {
  bool strip_punctuation = false;
};

struct Grounding {
  std::string paragraph;
  Span mention_span;
  bool prepended = false;
};

inline constexpr std::string_view kGroundingSeparator = ". ";

/// Locates the earliest normalized, word-bounded occurrence of `label` in
/// `paragraph`. When there is none the label is prepended as "label. " and
/// the span covers the prepended copy.
inline Grounding ground_surface_form(std::string_view label, std::string_view paragraph,
                                     GroundingOptions opts = {}) {
  const auto trimmed_label = text::trim(label);
  if (trimmed_label.empty()) fail(ErrorKind::validation, "empty label");
  if (text::trim(paragraph).empty()) fail(ErrorKind::validation, "empty paragraph");

  const text::NormalizeOptions nopts{opts.strip_punctuation};
  const auto needle = text::normalize(trimmed_label, nopts);
  const auto hay = text::normalize(paragraph, nopts);
  if (needle.text.empty()) fail(ErrorKind::validation, "label normalizes to nothing");

  for (auto pos = hay.text.find(needle.text); pos != std::string::npos;
       pos = hay.text.find(needle.text, pos + 1)) {
    const Span span{hay.origin[pos], hay.origin[pos + needle.text.size() - 1] + 1};
    if (text::on_word_boundary(paragraph, span)) {
      return {std::string(paragraph), span, false};
    }
  }

  Grounding g;
  g.paragraph.reserve(trimmed_label.size() + kGroundingSeparator.size() + paragraph.size());
  g.paragraph.append(trimmed_label).append(kGroundingSeparator).append(paragraph);
  g.mention_span = {0, trimmed_label.size()};
  g.prepended = true;
  return g;
}

// ---------------------------------------------------------------------------
// Ingestion and validation

/// One line of the entity corpus file before validation.
struct RawEntity {
  std::string id;
  std::string label;
  std::string paragraph;
  std::vector<std::string> neighbors;
  std::vector<std::string> related;
};

inline RawEntity raw_entity_from_json(const io::json& j) {
  RawEntity r;
  if (!j.is_object()) fail(ErrorKind::validation, "entity line is not a JSON object");
  r.id = j.value("id", std::string{});
  r.label = j.value("label", std::string{});
  r.paragraph = j.value("paragraph", std::string{});
  if (j.contains("neighbors")) r.neighbors = j.at("neighbors").get<std::vector<std::string>>();
  if (j.contains("related")) r.related = j.at("related").get<std::vector<std::string>>();
  return r;
}

inline io::json to_json(const RawEntity& r) {
  return io::json{{"id", r.id},
                  {"label", r.label},
                  {"paragraph", r.paragraph},
                  {"neighbors", r.neighbors},
                  {"related", r.related}};
}

inline std::vector<RawEntity> read_entity_corpus(const std::filesystem::path& path) {
  std::vector<RawEntity> out;
  for (const auto& j : io::read_ndjson(path)) out.push_back(raw_entity_from_json(j));
  return out;
}

inline void write_entity_corpus(const std::filesystem::path& path,
                                std::span<const RawEntity> records) {
  std::vector<io::json> rows;
  rows.reserve(records.size());
  for (const auto& r : records) rows.push_back(to_json(r));
  io::write_ndjson(path, rows);
}

enum class RejectReason {
  missing_id,
  duplicate_id,
  empty_paragraph,
  ungroundable_label,
  self_neighbor,
  no_related,
};

inline std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::missing_id: return "missing-id";
    case RejectReason::duplicate_id: return "duplicate-id";
    case RejectReason::empty_paragraph: return "empty-paragraph";
    case RejectReason::ungroundable_label: return "ungroundable-label";
    case RejectReason::self_neighbor: return "self-neighbor";
    case RejectReason::no_related: return "no-related";
  }
  return "unknown";
}

struct Rejection {
  std::size_t index = 0;  // position in the input batch
  std::string id;
  RejectReason reason{};
};

struct ValidationReport {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::vector<Rejection> rejections;

  std::size_t count(RejectReason reason) const {
    return static_cast<std::size_t>(std::count_if(
        rejections.begin(), rejections.end(), [&](const Rejection& r) { return r.reason == reason; }));
  }
};

inline io::json to_json(const ValidationReport& rep) {
  io::json rej = io::json::array();
  for (const auto& r : rep.rejections)
    rej.push_back({{"index", r.index}, {"id", r.id}, {"reason", std::string(to_string(r.reason))}});
  return {{"accepted", rep.accepted}, {"rejected", rep.rejected}, {"rejections", rej}};
}

/// Validated corpus. `entities` holds every record that grounds cleanly and
/// is therefore usable as a query or neutral; `targets` are the subset with a
/// non-empty related set, i.e. the entities that can be audited.
struct Corpus {
  std::vector<EntityRecord> entities;
  std::vector<RelatedEntitySet> targets;
  std::unordered_map<std::string, std::size_t> index;

  const EntityRecord& at(std::string_view id) const {
    auto it = index.find(std::string(id));
    if (it == index.end()) fail(ErrorKind::lookup, "unknown entity '" + std::string(id) + "'");
    return entities[it->second];
  }
  bool contains(std::string_view id) const { return index.count(std::string(id)) != 0; }
};

struct ValidatedCorpus {
  Corpus corpus;
  ValidationReport report;
};

/// Grounds every record and builds related sets. Rejections are reported per
/// record; a record rejected only for lacking related entities stays in the
/// neutral/query universe but is not an audit target.
inline ValidatedCorpus validate_corpus(std::span<const RawEntity> records,
                                       GroundingOptions opts = {}) {
  ValidatedCorpus out;
  auto& corpus = out.corpus;
  auto& report = out.report;
  std::vector<std::size_t> source_index;  // entity slot -> input index

  auto reject = [&](std::size_t i, RejectReason why) {
    report.rejections.push_back({i, records[i].id, why});
  };

  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.id.empty()) { reject(i, RejectReason::missing_id); continue; }
    if (corpus.index.count(r.id)) { reject(i, RejectReason::duplicate_id); continue; }
    if (text::trim(r.paragraph).empty()) { reject(i, RejectReason::empty_paragraph); continue; }
    if (text::trim(r.label).empty()) { reject(i, RejectReason::ungroundable_label); continue; }
    if (std::find(r.neighbors.begin(), r.neighbors.end(), r.id) != r.neighbors.end()) {
      reject(i, RejectReason::self_neighbor);
      continue;
    }
    Grounding g;
    try {
      g = ground_surface_form(r.label, r.paragraph, opts);
    } catch (const Error&) {
      reject(i, RejectReason::ungroundable_label);
      continue;
    }
    EntityRecord e;
    e.id = r.id;
    e.label = std::string(text::trim(r.label));
    e.paragraph = std::move(g.paragraph);
    e.mention_span = g.mention_span;
    e.neighbor_ids = r.neighbors;
    std::sort(e.neighbor_ids.begin(), e.neighbor_ids.end());
    e.neighbor_ids.erase(std::unique(e.neighbor_ids.begin(), e.neighbor_ids.end()),
                         e.neighbor_ids.end());
    corpus.index.emplace(e.id, corpus.entities.size());
    corpus.entities.push_back(std::move(e));
    source_index.push_back(i);
  }

  for (std::size_t slot = 0; slot < corpus.entities.size(); ++slot) {
    const auto i = source_index[slot];
    const auto& r = records[i];
    RelatedEntitySet rel{r.id, {}};
    std::unordered_set<std::string> seen;
    for (const auto& t : r.related) {
      if (t == r.id || !corpus.contains(t) || !seen.insert(t).second) continue;
      rel.related_ids.push_back(t);
    }
    if (rel.related_ids.empty()) {
      reject(i, RejectReason::no_related);
      continue;
    }
    corpus.targets.push_back(std::move(rel));
  }

  std::sort(report.rejections.begin(), report.rejections.end(),
            [](const Rejection& a, const Rejection& b) { return a.index < b.index; });
  report.rejected = report.rejections.size();
  report.accepted = corpus.targets.size();
  return out;
}

// ---------------------------------------------------------------------------
// Neutral pools

/// Two-sided KG disjointness: no edge t->z and no edge z->t.
inline bool is_disjoint(const EntityRecord& related, const EntityRecord& candidate) {
  return candidate.id != related.id && !related.has_neighbor(candidate.id) &&
         !candidate.has_neighbor(related.id);
}

inline std::uint64_t pool_seed(std::uint64_t global_seed, std::string_view related_id) {
  return derive_seed(global_seed, "neutral-pool", related_id);
}

/// Seeded uniform sample of N-1 neutrals for `related` from `universe`.
/// Eligible ids are sorted before sampling so the result depends only on the
/// universe content, not its order. Ids listed in `exclude` (typically the
/// audited target) are never drawn.
inline NeutralPool build_neutral_pool(const EntityRecord& related,
                                      std::span<const EntityRecord> universe, std::size_t n,
                                      std::uint64_t seed,
                                      std::span<const std::string> exclude = {}) {
  if (n < 2) fail(ErrorKind::validation, "pool size N must be at least 2");
  std::vector<const std::string*> eligible;
  eligible.reserve(universe.size());
  for (const auto& u : universe) {
    if (!is_disjoint(related, u)) continue;
    if (std::find(exclude.begin(), exclude.end(), u.id) != exclude.end()) continue;
    eligible.push_back(&u.id);
  }
  const std::size_t need = n - 1;
  if (eligible.size() < need) {
    fail(ErrorKind::insufficient_pool,
         "related entity '" + related.id + "' has " + std::to_string(eligible.size()) +
             " eligible neutrals, needs " + std::to_string(need) + " (deficit " +
             std::to_string(need - eligible.size()) + ")");
  }
  std::sort(eligible.begin(), eligible.end(),
            [](const std::string* a, const std::string* b) { return *a < *b; });
  Rng rng(seed);
  // partial Fisher-Yates over the first `need` slots
  for (std::size_t i = 0; i < need; ++i) {
    const auto j = i + rng.index(eligible.size() - i);
    std::swap(eligible[i], eligible[j]);
  }
  NeutralPool pool{related.id, {}};
  pool.member_ids.reserve(need);
  for (std::size_t i = 0; i < need; ++i) pool.member_ids.push_back(*eligible[i]);
  return pool;
}

// ---------------------------------------------------------------------------
// Document files

inline Document document_from_json(const io::json& j) {
  Document d;
  d.doc_id = j.at("doc_id").get<std::string>();
  d.text = j.value("text", std::string{});
  d.source = parse_doc_source(j.value("source", std::string("original")));
  if (j.contains("parent_id") && !j.at("parent_id").is_null())
    d.parent_id = j.at("parent_id").get<std::string>();
  validate_document(d);
  return d;
}

inline io::json to_json(const Document& d) {
  io::json j{{"doc_id", d.doc_id}, {"text", d.text}, {"source", std::string(to_string(d.source))}};
  if (d.parent_id) j["parent_id"] = *d.parent_id;
  return j;
}

inline std::vector<Document> read_documents(const std::filesystem::path& path) {
  std::vector<Document> docs;
  for (const auto& j : io::read_ndjson(path)) docs.push_back(document_from_json(j));
  return docs;
}

inline void write_documents(const std::filesystem::path& path, std::span<const Document> docs) {
  std::vector<io::json> rows;
  rows.reserve(docs.size());
  for (const auto& d : docs) rows.push_back(to_json(d));
  io::write_ndjson(path, rows);
}

}  // namespace argus
