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
#include <cmath>
#include <cstdint>
#include <limits>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "argus/bm25.hpp"
#include "argus/corpus.hpp"
#include "argus/embedding.hpp"
#include "argus/error.hpp"
#include "argus/io.hpp"
#include "argus/probes.hpp"
#include "argus/text.hpp"

namespace argus {

inline constexpr double kDefaultTau = 0.3;
inline constexpr std::size_t kDefaultKAug = 2;
inline constexpr std::string_view kExpansionSeparator = "\n";

// ---------------------------------------------------------------------------
// Mention extraction

struct MentionOccurrence {
  std::string surface;
  Span span;
  double predicted_rps = std::numeric_limits<double>::quiet_NaN();  // unset until diagnosed
};

class NerProvider {
 public:
  virtual ~NerProvider() = default;
  virtual std::vector<MentionOccurrence> extract(std::string_view text) const = 0;
};

/// Gazetteer tagger: case-insensitive, word-bounded, longest match first,
/// scanning left to right so returned spans never overlap.
class DictionaryTagger final : public NerProvider {
 public:
  explicit DictionaryTagger(std::vector<std::string> gazetteer) {
    for (auto& g : gazetteer) {
      auto t = std::string(text::trim(g));
      if (!t.empty()) entries_.push_back(text::casefold(t));
    }
    std::sort(entries_.begin(), entries_.end(), [](const std::string& a, const std::string& b) {
      return a.size() != b.size() ? a.size() > b.size() : a < b;
    });
    entries_.erase(std::unique(entries_.begin(), entries_.end()), entries_.end());
  }

  std::vector<MentionOccurrence> extract(std::string_view doc) const override {
    std::vector<MentionOccurrence> out;
    if (entries_.empty()) return out;
    const std::string folded = text::casefold(doc);
    std::size_t i = 0;
    while (i < doc.size()) {
      const bool word_start = text::is_word_char(doc[i]) && (i == 0 || !text::is_word_char(doc[i - 1]));
      const bool other_start = !text::is_word_char(doc[i]) && !text::is_space(doc[i]);
      if (!word_start && !other_start) {
        ++i;
        continue;
      }
      bool matched = false;
      for (const auto& e : entries_) {
        if (folded.compare(i, e.size(), e) != 0) continue;
        const Span span{i, i + e.size()};
        if (!text::on_word_boundary(doc, span)) continue;
        out.push_back({std::string(doc.substr(span.start, span.length())), span});
        i = span.end;
        matched = true;
        break;
      }
      if (!matched) ++i;
    }
    return out;
  }

  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<std::string> entries_;
};

inline std::vector<std::string> read_gazetteer(const std::filesystem::path& path) {
  auto in = io::open_in(path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto t = text::trim(line);
    if (!t.empty() && t.front() != '#') out.emplace_back(t);
  }
  return out;
}

inline std::vector<MentionOccurrence> extract_mentions(const NerProvider& ner, const Document& doc) {
  if (doc.text.empty()) fail(ErrorKind::validation, "document '" + doc.doc_id + "' is empty");
  auto mentions = ner.extract(doc.text);
  for (const auto& m : mentions)
    if (m.span.empty() || m.span.end > doc.text.size())
      fail(ErrorKind::span, "mention outside document '" + doc.doc_id + "'");
  return mentions;
}

// ---------------------------------------------------------------------------
// Diagnosis

/// One surface form within one document with its min-aggregated score.
struct EntityScore {
  std::string surface;  // first occurrence as written
  std::string key;      // casefolded surface, the dedup key
  std::string doc_id;
  double doc_score = 1.0;
  std::vector<MentionOccurrence> occurrences;
};

using FlaggedEntity = EntityScore;

/// Store key for a precomputed mention vector: "<doc_id>@<start>:<end>".
inline std::string mention_key(std::string_view doc_id, Span span) {
  return std::string(doc_id) + "@" + std::to_string(span.start) + ":" + std::to_string(span.end);
}

/// Scores every occurrence with the probe applied to the mention embedding
/// of the full document, then groups by casefolded surface (min rule).
inline std::vector<EntityScore> score_entities(const Document& doc, std::vector<MentionOccurrence> mentions,
                                               const EmbeddingProvider& provider, const ProbeModel& probe) {
  if (probe.dim != provider.descriptor().dim)
    fail(ErrorKind::dimension, "probe dim " + std::to_string(probe.dim) + " does not match provider dim " +
                                   std::to_string(provider.descriptor().dim));
  std::vector<EntityScore> groups;
  std::unordered_map<std::string, std::size_t> by_key;
  for (auto& m : mentions) {
    if (std::isnan(m.predicted_rps))
      m.predicted_rps = probe.predict(embed_entity(provider, doc.text, m.span, mention_key(doc.doc_id, m.span)));
    if (m.predicted_rps < 0.0 || m.predicted_rps > 1.0)
      fail(ErrorKind::validation, "predicted RPS outside [0,1]");
    auto key = text::casefold(m.surface);
    auto [it, inserted] = by_key.emplace(key, groups.size());
    if (inserted) groups.push_back({m.surface, key, doc.doc_id, m.predicted_rps, {}});
    auto& g = groups[it->second];
    g.doc_score = std::min(g.doc_score, m.predicted_rps);
    g.occurrences.push_back(std::move(m));
  }
  return groups;
}

/// Surfaces whose minimum predicted RPS is strictly below tau, once each.
inline std::vector<FlaggedEntity> flag_entities(std::span<const EntityScore> scored, double tau) {
  std::vector<FlaggedEntity> out;
  for (const auto& s : scored)
    if (s.doc_score < tau) out.push_back(s);
  return out;
}

inline std::vector<FlaggedEntity> diagnose(const Document& doc, std::vector<MentionOccurrence> mentions,
                                           const EmbeddingProvider& provider, const ProbeModel& probe,
                                           double tau = kDefaultTau) {
  return flag_entities(score_entities(doc, std::move(mentions), provider, probe), tau);
}

inline io::json to_json(const EntityScore& f) {
  io::json spans = io::json::array();
  io::json scores = io::json::array();
  for (const auto& o : f.occurrences) {
    spans.push_back({o.span.start, o.span.end});
    scores.push_back(o.predicted_rps);
  }
  return {{"doc_id", f.doc_id}, {"surface", f.surface}, {"doc_score", f.doc_score},
          {"spans", spans},     {"occurrence_scores", scores}};
}

inline EntityScore entity_score_from_json(const io::json& j) {
  EntityScore f;
  f.doc_id = j.at("doc_id").get<std::string>();
  f.surface = j.at("surface").get<std::string>();
  f.key = text::casefold(f.surface);
  f.doc_score = j.at("doc_score").get<double>();
  const auto spans = j.value("spans", io::json::array());
  const auto scores = j.value("occurrence_scores", io::json::array());
  for (std::size_t i = 0; i < spans.size(); ++i) {
    MentionOccurrence o{f.surface, {spans[i].at(0).get<std::size_t>(), spans[i].at(1).get<std::size_t>()}, f.doc_score};
    if (i < scores.size()) o.predicted_rps = scores[i].get<double>();
    f.occurrences.push_back(o);
  }
  return f;
}

// ---------------------------------------------------------------------------
// Remedy

inline std::vector<KbPassage> kb_lookup(const Bm25Index& index, std::string_view surface,
                                        std::size_t k_aug = kDefaultKAug) {
  if (k_aug < 1) fail(ErrorKind::validation, "k_aug must be >= 1");
  if (index.size() == 0) fail(ErrorKind::validation, "empty KB index");
  return index.search(surface, k_aug);
}

struct AugmentedView {
  Document document;
  std::optional<std::string> surface;   // expansion provenance
  std::vector<std::string> passage_ids;  // one for expansion, all for synthesis
};

inline io::json to_json(const AugmentedView& v) {
  auto j = to_json(v.document);
  io::json prov{{"passage_ids", v.passage_ids}};
  if (v.surface) prov["surface"] = *v.surface;
  j["provenance"] = prov;
  return j;
}

/// One view per (flagged surface, retrieved passage): document, a newline,
/// then the passage.
inline std::vector<AugmentedView> expand(const Document& doc, std::span<const FlaggedEntity> flagged,
                                         const Bm25Index& kb, std::size_t k_aug = kDefaultKAug) {
  std::vector<AugmentedView> views;
  std::size_t n = 0;
  for (const auto& f : flagged) {
    for (const auto& p : kb_lookup(kb, f.surface, k_aug)) {
      AugmentedView v;
      v.document.doc_id = doc.doc_id + "::exp" + std::to_string(++n);
      v.document.text = doc.text;
      v.document.text.append(kExpansionSeparator).append(p.text);
      v.document.source = DocSource::expansion;
      v.document.parent_id = doc.doc_id;
      v.surface = f.surface;
      v.passage_ids = {p.passage_id};
      views.push_back(std::move(v));
    }
  }
  return views;
}

struct EntityContext {
  std::string surface;
  std::vector<std::string> passages;
};

struct SynthesisRequest {
  std::string document;
  std::vector<EntityContext> contexts;
  std::string prompt_template;
};

class Generator {
 public:
  virtual ~Generator() = default;
  virtual std::string generate(const SynthesisRequest& request) const = 0;
};

/// Mechanical stand-in for the LLM: after the first occurrence of each
/// flagged surface inserts " (" + first sentence of its top passage + ")".
class StubGenerator final : public Generator {
 public:
  std::string generate(const SynthesisRequest& req) const override {
    std::vector<std::pair<std::size_t, std::string>> inserts;
    for (const auto& c : req.contexts) {
      if (c.passages.empty()) continue;
      Span at;
      if (!text::find_word(req.document, c.surface, at)) continue;
      const auto gloss = text::first_sentence(c.passages.front());
      if (gloss.empty()) continue;
      inserts.emplace_back(at.end, " (" + gloss + ")");
    }
    std::stable_sort(inserts.begin(), inserts.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::string out = req.document;
    for (const auto& [pos, s] : inserts) out.insert(pos, s);
    return out;
  }
};

inline constexpr std::string_view kDefaultSynthesisPrompt =
    R"(You are preparing a document for a search index. Some named entities in it are hard for the retriever to find, and reference passages describing them are provided below.

Rewrite the document so that it keeps its original wording, order and meaning, but right after the first mention of each listed entity add a short clarification in parentheses drawn only from the reference passages. Add a clarification only when the passage clearly describes the same entity as the document. Do not add any other text, headings or commentary.

Entities and reference passages:
{entity_contexts}

Document:
{document}

Augmented document:)";

inline std::string format_entity_contexts(std::span<const EntityContext> contexts) {
  std::string out;
  for (const auto& c : contexts) {
    out += "- " + c.surface + "\n";
    for (std::size_t i = 0; i < c.passages.size(); ++i)
      out += "  [" + std::to_string(i + 1) + "] " + c.passages[i] + "\n";
  }
  return out;
}

inline std::string render_prompt(std::string_view tmpl, std::string_view document,
                                 std::span<const EntityContext> contexts) {
  std::string out(tmpl);
  auto replace_all = [&](std::string_view key, const std::string& value) {
    for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos + value.size()))
      out.replace(pos, key.size(), value);
  };
  replace_all("{entity_contexts}", format_entity_contexts(contexts));
  replace_all("{document}", std::string(document));
  return out;
}

/// Exactly one synthesis view per document; with nothing flagged the view
/// repeats the original text.
inline AugmentedView synthesize(const Document& doc, std::span<const FlaggedEntity> flagged, const Bm25Index& kb,
                                const Generator& generator, std::size_t k_aug = kDefaultKAug,
                                std::string_view prompt_template = kDefaultSynthesisPrompt) {
  AugmentedView v;
  v.document.doc_id = doc.doc_id + "::synth";
  v.document.source = DocSource::synthesis;
  v.document.parent_id = doc.doc_id;
  SynthesisRequest req{doc.text, {}, std::string(prompt_template)};
  for (const auto& f : flagged) {
    EntityContext c{f.surface, {}};
    for (const auto& p : kb_lookup(kb, f.surface, k_aug)) {
      c.passages.push_back(p.text);
      v.passage_ids.push_back(p.passage_id);
    }
    req.contexts.push_back(std::move(c));
  }
  if (req.contexts.empty()) {
    v.document.text = doc.text;
    return v;
  }
  try {
    v.document.text = generator.generate(req);
  } catch (const Error& e) {
    throw Error(e.kind(), "synthesis failed for '" + doc.doc_id + "': " + e.what());
  } catch (const std::exception& e) {
    fail(ErrorKind::transport, "synthesis failed for '" + doc.doc_id + "': " + e.what());
  }
  return v;
}

enum class AugmentMode { expansion, synthesis, both };

inline AugmentMode parse_augment_mode(std::string_view s) {
  if (s == "expansion") return AugmentMode::expansion;
  if (s == "synthesis") return AugmentMode::synthesis;
  if (s == "both") return AugmentMode::both;
  fail(ErrorKind::validation, "unknown augmentation mode '" + std::string(s) + "'");
}

inline std::string_view to_string(AugmentMode m) {
  switch (m) {
    case AugmentMode::expansion: return "expansion";
    case AugmentMode::synthesis: return "synthesis";
    case AugmentMode::both: return "both";
  }
  return "expansion";
}

struct AugmentOptions {
  AugmentMode mode = AugmentMode::expansion;
  std::size_t k_aug = kDefaultKAug;
  bool fallback_to_expansion = false;
  std::string prompt_template = std::string(kDefaultSynthesisPrompt);
};

struct AugmentStats {
  std::size_t originals = 0;
  std::size_t expansion_views = 0;
  std::size_t synthesis_views = 0;
  std::size_t synthesis_fallbacks = 0;
};

/// Originals followed by their views, grouped per document in input order.
/// Originals are emitted unchanged.
inline std::vector<AugmentedView> augment_corpus(
    std::span<const Document> docs, const std::unordered_map<std::string, std::vector<FlaggedEntity>>& flags,
    const Bm25Index& kb, const Generator* generator, const AugmentOptions& opts, AugmentStats* stats = nullptr) {
  std::vector<AugmentedView> out;
  AugmentStats st;
  static const std::vector<FlaggedEntity> none;
  for (const auto& d : docs) {
    if (d.source != DocSource::original) continue;
    ++st.originals;
    out.push_back({d, std::nullopt, {}});
    auto it = flags.find(d.doc_id);
    const auto& flagged = it == flags.end() ? none : it->second;
    bool expand_this = opts.mode != AugmentMode::synthesis;
    if (opts.mode != AugmentMode::expansion) {
      if (!generator) fail(ErrorKind::dependency, "synthesis mode needs a generator");
      try {
        out.push_back(synthesize(d, flagged, kb, *generator, opts.k_aug, opts.prompt_template));
        ++st.synthesis_views;
      } catch (const Error&) {
        if (!opts.fallback_to_expansion) throw;
        ++st.synthesis_fallbacks;
        expand_this = true;
      }
    }
    if (expand_this) {
      for (auto& v : expand(d, flagged, kb, opts.k_aug)) {
        out.push_back(std::move(v));
        ++st.expansion_views;
      }
    }
  }
  if (stats) *stats = st;
  return out;
}

}  // namespace argus
