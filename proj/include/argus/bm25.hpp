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
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "argus/error.hpp"
#include "argus/io.hpp"
#include "argus/text.hpp"

namespace argus {

struct Bm25Params {
  double k1 = 1.5;
  double b = 0.75;
};

/// A reference-KB passage as stored on disk.
struct Passage {
  std::string passage_id;
  std::string text;
};

/// A scored lookup result.
struct KbPassage {
  std::string passage_id;
  std::string text;
  double bm25_score = 0.0;
};

/// Immutable Okapi BM25 index:
///   score(q, d) = sum_t idf(t) * f(t,d) (k1+1) / (f(t,d) + k1 (1 - b + b |d| / avgdl))
///   idf(t)      = ln(1 + (N - df + 0.5) / (df + 0.5))
class Bm25Index {
 public:
  explicit Bm25Index(std::vector<Passage> passages, Bm25Params params = {})
      : passages_(std::move(passages)), params_(params) {
    if (passages_.empty()) fail(ErrorKind::validation, "BM25 index needs at least one passage");
    lengths_.reserve(passages_.size());
    double total = 0.0;
    for (std::size_t d = 0; d < passages_.size(); ++d) {
      if (text::trim(passages_[d].text).empty())
        fail(ErrorKind::validation, "KB passage '" + passages_[d].passage_id + "' is empty");
      const auto toks = text::lexical_tokens(passages_[d].text);
      lengths_.push_back(toks.size());
      total += static_cast<double>(toks.size());
      std::unordered_map<std::string, std::size_t> tf;
      for (const auto& t : toks) ++tf[t];
      for (auto& [term, f] : tf) postings_[term].push_back({d, f});
    }
    avgdl_ = total / static_cast<double>(passages_.size());
  }

  std::size_t size() const { return passages_.size(); }
  double avgdl() const { return avgdl_; }
  const Bm25Params& params() const { return params_; }
  const std::vector<Passage>& passages() const { return passages_; }

  std::size_t document_frequency(std::string_view term) const {
    auto it = postings_.find(std::string(term));
    return it == postings_.end() ? 0 : it->second.size();
  }

  double idf(std::string_view term) const {
    const double n = static_cast<double>(passages_.size());
    const double df = static_cast<double>(document_frequency(term));
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
  }

  /// Score of every passage for `query`, indexed like passages().
  std::vector<double> score_all(std::string_view query) const {
    std::vector<double> scores(passages_.size(), 0.0);
    for (const auto& term : text::lexical_tokens(query)) {
      auto it = postings_.find(term);
      if (it == postings_.end()) continue;
      const double w = idf(term);
      for (const auto& [d, f] : it->second) {
        const double tf = static_cast<double>(f);
        const double norm = params_.k1 * (1.0 - params_.b + params_.b * static_cast<double>(lengths_[d]) / avgdl_);
        scores[d] += w * tf * (params_.k1 + 1.0) / (tf + norm);
      }
    }
    return scores;
  }

  /// Top-k passages with positive score, descending; ties by passage_id.
  std::vector<KbPassage> search(std::string_view query, std::size_t k) const {
    if (k < 1) fail(ErrorKind::validation, "k must be >= 1");
    const auto scores = score_all(query);
    std::vector<std::size_t> hits;
    for (std::size_t d = 0; d < scores.size(); ++d)
      if (scores[d] > 0.0) hits.push_back(d);
    std::sort(hits.begin(), hits.end(), [&](std::size_t a, std::size_t b) {
      if (scores[a] != scores[b]) return scores[a] > scores[b];
      return passages_[a].passage_id < passages_[b].passage_id;
    });
    if (hits.size() > k) hits.resize(k);
    std::vector<KbPassage> out;
    out.reserve(hits.size());
    for (auto d : hits) out.push_back({passages_[d].passage_id, passages_[d].text, scores[d]});
    return out;
  }

 private:
  struct Posting {
    std::size_t doc;
    std::size_t tf;
  };
  std::vector<Passage> passages_;
  Bm25Params params_;
  std::vector<std::size_t> lengths_;
  double avgdl_ = 0.0;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
};

inline Bm25Index build_bm25_index(std::vector<Passage> passages, Bm25Params params = {}) {
  return Bm25Index(std::move(passages), params);
}

inline std::vector<Passage> read_kb(const std::filesystem::path& path) {
  std::vector<Passage> out;
  for (const auto& j : io::read_ndjson(path))
    out.push_back({j.at("passage_id").get<std::string>(), j.at("text").get<std::string>()});
  return out;
}

inline void write_kb(const std::filesystem::path& path, std::span<const Passage> kb) {
  std::vector<io::json> rows;
  for (const auto& p : kb) rows.push_back({{"passage_id", p.passage_id}, {"text", p.text}});
  io::write_ndjson(path, rows);
}

}  // namespace argus
