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
#include <vector>

#include "argus/corpus.hpp"
#include "argus/embedding.hpp"
#include "argus/error.hpp"
#include "argus/io.hpp"
#include "argus/parallel.hpp"
#include "argus/random.hpp"

namespace argus {

inline constexpr std::size_t kDefaultPoolSize = 800;
inline constexpr std::size_t kDefaultTopK = 50;

// ---------------------------------------------------------------------------
// Tercile bands

enum class Band { low = 0, mid = 1, high = 2 };

inline constexpr double kBandLowUpper = 0.33;
inline constexpr double kBandMidUpper = 0.66;

/// Half-open bands: low [0, 0.33), mid [0.33, 0.66), high [0.66, 1].
inline Band band_of(double score) {
  if (score < kBandLowUpper) return Band::low;
  if (score < kBandMidUpper) return Band::mid;
  return Band::high;
}

inline std::string_view to_string(Band b) {
  switch (b) {
    case Band::low: return "low";
    case Band::mid: return "mid";
    case Band::high: return "high";
  }
  return "low";
}

inline Band parse_band(std::string_view s) {
  if (s == "low") return Band::low;
  if (s == "mid") return Band::mid;
  if (s == "high") return Band::high;
  fail(ErrorKind::validation, "unknown band '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Ranking

struct Candidate {
  std::string_view id;
  const EmbeddingVector* vector = nullptr;
};

/// 1-based rank of `target_id` by cosine to `query`. Ties are broken
/// pessimistically: every equal-scoring candidate whose id sorts before the
/// target is ranked ahead of it. Computed by counting, no sort.
inline std::size_t rank_target(const EmbeddingVector& query, std::string_view target_id,
                               std::span<const Candidate> candidates) {
  const Candidate* target = nullptr;
  for (const auto& c : candidates) {
    if (c.id == target_id) {
      if (target) fail(ErrorKind::validation, "target appears twice in candidate pool");
      target = &c;
    }
  }
  if (!target) fail(ErrorKind::lookup, "target '" + std::string(target_id) + "' not in candidates");
  const double target_score = cosine(query, *target->vector);
  std::size_t ahead = 0;
  for (const auto& c : candidates) {
    if (&c == target) continue;
    const double s = cosine(query, *c.vector);
    if (s > target_score || (s == target_score && c.id < target_id)) ++ahead;
  }
  return ahead + 1;
}

inline std::size_t rank_target(const EmbeddingVector& query, std::string_view target_id,
                               const std::map<std::string, EmbeddingVector>& candidates) {
  std::vector<Candidate> list;
  list.reserve(candidates.size());
  for (const auto& [id, v] : candidates) list.push_back({id, &v});
  return rank_target(query, target_id, list);
}

inline bool hit_at_k(std::size_t rank, std::size_t k) {
  if (rank < 1 || k < 1) fail(ErrorKind::validation, "rank and k must be >= 1");
  return rank <= k;
}

// ---------------------------------------------------------------------------
// Embedding table

/// Pooled mention embedding for every entity, keyed by id.
using EmbeddingTable = std::unordered_map<std::string, EmbeddingVector>;

inline EmbeddingTable build_embedding_table(std::span<const EntityRecord> entities,
                                            const EmbeddingProvider& provider,
                                            std::size_t workers = 1) {
  std::vector<EmbeddingVector> vecs(entities.size());
  parallel_for(entities.size(), workers, [&](std::size_t i) {
    const auto& e = entities[i];
    vecs[i] = embed_entity(provider, e.paragraph, e.mention_span, e.id);
  });
  EmbeddingTable table;
  table.reserve(entities.size());
  for (std::size_t i = 0; i < entities.size(); ++i) table.emplace(entities[i].id, std::move(vecs[i]));
  return table;
}

inline const EmbeddingVector& lookup(const EmbeddingTable& table, std::string_view id) {
  auto it = table.find(std::string(id));
  if (it == table.end()) fail(ErrorKind::lookup, "no embedding for '" + std::string(id) + "'");
  return it->second;
}

// ---------------------------------------------------------------------------
// RPS

struct CandidatePool {
  std::string related_id;
  std::string target_id;
  std::vector<std::string> candidate_ids;  // target first, then N-1 neutrals
  std::uint64_t seed = 0;
};

inline CandidatePool make_candidate_pool(std::string_view target_id, const NeutralPool& neutrals,
                                         std::size_t n, std::uint64_t seed) {
  if (neutrals.member_ids.size() < n - 1)
    fail(ErrorKind::insufficient_pool, "neutral pool for '" + neutrals.related_id + "' has " +
                                           std::to_string(neutrals.member_ids.size()) +
                                           " members, needs " + std::to_string(n - 1));
  CandidatePool pool{neutrals.related_id, std::string(target_id), {}, seed};
  pool.candidate_ids.reserve(n);
  pool.candidate_ids.emplace_back(target_id);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (neutrals.member_ids[i] == target_id)
      fail(ErrorKind::validation, "target '" + std::string(target_id) +
                                      "' drawn as a neutral for '" + neutrals.related_id + "'");
    pool.candidate_ids.push_back(neutrals.member_ids[i]);
  }
  return pool;
}

struct RpsResult {
  std::string target_id;
  std::size_t k = 0;
  std::size_t n = 0;
  std::vector<std::uint8_t> hits;  // one bit per related entity, in T_x order
  double rps = 0.0;

  std::size_t n_queries() const { return hits.size(); }
  Band band() const { return band_of(rps); }
};

inline double mean_hits(std::span<const std::uint8_t> hits) {
  if (hits.empty()) fail(ErrorKind::validation, "RPS needs at least one query");
  std::size_t set = 0;
  for (auto h : hits) set += h ? 1 : 0;
  return static_cast<double>(set) / static_cast<double>(hits.size());
}

/// Pools keyed by related id.
using PoolMap = std::unordered_map<std::string, CandidatePool>;

/// Hit per related entity against its candidate pool; rps is their mean.
inline RpsResult compute_rps(const EntityRecord& target, const RelatedEntitySet& related,
                             const PoolMap& pools, const EmbeddingTable& table, std::size_t k) {
  if (related.related_ids.empty()) fail(ErrorKind::validation, "empty related set for '" + target.id + "'");
  RpsResult res{target.id, k, 0, {}, 0.0};
  res.hits.reserve(related.related_ids.size());
  std::vector<Candidate> cands;
  for (const auto& t : related.related_ids) {
    auto it = pools.find(t);
    if (it == pools.end()) fail(ErrorKind::lookup, "no candidate pool for related entity '" + t + "'");
    const auto& pool = it->second;
    if (pool.target_id != target.id)
      fail(ErrorKind::validation, "pool for '" + t + "' belongs to another target");
    res.n = pool.candidate_ids.size();
    cands.clear();
    for (const auto& id : pool.candidate_ids) cands.push_back({id, &lookup(table, id)});
    const auto rank = rank_target(lookup(table, t), target.id, cands);
    res.hits.push_back(hit_at_k(rank, k) ? 1 : 0);
  }
  res.rps = mean_hits(res.hits);
  return res;
}

struct AuditOptions {
  std::size_t n = kDefaultPoolSize;
  std::size_t k = kDefaultTopK;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::optional<std::size_t> query_cap;  // opt-in subsampling of T_x
};

/// Related set actually used for the audit (all of T_x unless capped).
inline RelatedEntitySet effective_related(const RelatedEntitySet& rel, const AuditOptions& opts) {
  if (!opts.query_cap || rel.related_ids.size() <= *opts.query_cap) return rel;
  RelatedEntitySet out{rel.target_id, rel.related_ids};
  Rng rng(derive_seed(opts.seed, "query-cap", rel.target_id));
  rng.shuffle(out.related_ids.begin(), out.related_ids.end());
  out.related_ids.resize(*opts.query_cap);
  return out;
}

/// Builds the candidate pools for one target: the neutral pool for each
/// related entity is seeded by (global seed, related id) and never contains
/// the target itself.
inline PoolMap build_pools_for(const Corpus& corpus, const RelatedEntitySet& related,
                               const AuditOptions& opts) {
  PoolMap pools;
  const std::string exclude[] = {related.target_id};
  for (const auto& t : related.related_ids) {
    const auto seed = pool_seed(opts.seed, t);
    auto neutrals = build_neutral_pool(corpus.at(t), corpus.entities, opts.n, seed, exclude);
    pools.emplace(t, make_candidate_pool(related.target_id, neutrals, opts.n, seed));
  }
  return pools;
}

/// RPS for every audit target, in corpus order regardless of worker count.
inline std::vector<RpsResult> run_audit(const Corpus& corpus, const EmbeddingTable& table,
                                        const AuditOptions& opts) {
  if (opts.k < 1 || opts.n < 2) fail(ErrorKind::validation, "need k >= 1 and N >= 2");
  std::vector<RpsResult> results(corpus.targets.size());
  parallel_for(corpus.targets.size(), opts.workers, [&](std::size_t i) {
    const auto rel = effective_related(corpus.targets[i], opts);
    const auto pools = build_pools_for(corpus, rel, opts);
    auto r = compute_rps(corpus.at(rel.target_id), rel, pools, table, opts.k);
    r.n = opts.n;
    results[i] = std::move(r);
  });
  return results;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepRow {
  std::size_t n = 0;
  std::size_t k = 0;
  double fraction_above = 0.0;  // share of targets with RPS > 0.5
  double mean_rps = 0.0;
  double chance = 0.0;          // k / N
  std::optional<std::string> error;
};

inline double fraction_above_half(std::span<const RpsResult> results) {
  if (results.empty()) return 0.0;
  std::size_t above = 0;
  for (const auto& r : results) above += r.rps > 0.5 ? 1 : 0;
  return static_cast<double>(above) / static_cast<double>(results.size());
}

inline double mean_rps(std::span<const RpsResult> results) {
  if (results.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : results) s += r.rps;
  return s / static_cast<double>(results.size());
}

inline SweepRow sweep_row(const Corpus& corpus, const EmbeddingTable& table, AuditOptions opts) {
  SweepRow row{opts.n, opts.k, 0.0, 0.0, static_cast<double>(opts.k) / static_cast<double>(opts.n), {}};
  try {
    const auto results = run_audit(corpus, table, opts);
    row.fraction_above = fraction_above_half(results);
    row.mean_rps = mean_rps(results);
  } catch (const Error& e) {
    row.error = e.what();
  }
  return row;
}

/// Fraction of targets with RPS > 0.5 for each pool size. Infeasible sizes
/// carry an error marker; the remaining rows are still computed.
inline std::vector<SweepRow> sweep_fraction_above(const Corpus& corpus, const EmbeddingTable& table,
                                                  std::span<const std::size_t> n_list,
                                                  AuditOptions base) {
  if (n_list.empty()) fail(ErrorKind::validation, "empty N list");
  std::vector<SweepRow> rows;
  for (auto n : n_list) {
    base.n = n;
    rows.push_back(sweep_row(corpus, table, base));
  }
  return rows;
}

/// Same statistic over retrieval budgets at a fixed pool size.
inline std::vector<SweepRow> sweep_fraction_above_k(const Corpus& corpus, const EmbeddingTable& table,
                                                    std::span<const std::size_t> k_list,
                                                    AuditOptions base) {
  if (k_list.empty()) fail(ErrorKind::validation, "empty k list");
  std::vector<SweepRow> rows;
  for (auto k : k_list) {
    base.k = k;
    rows.push_back(sweep_row(corpus, table, base));
  }
  return rows;
}

inline std::string sweep_csv(std::span<const SweepRow> rows) {
  io::CsvWriter w({"N", "k", "fraction_rps_above_0.5", "mean_rps", "chance_k_over_N", "error"});
  for (const auto& r : rows) {
    w.row({std::to_string(r.n), std::to_string(r.k), io::format_double(r.fraction_above),
           io::format_double(r.mean_rps), io::format_double(r.chance), r.error.value_or("")});
  }
  return w.str();
}

// ---------------------------------------------------------------------------
// RPS file

inline io::json to_json(const RpsResult& r) {
  return {{"target_id", r.target_id}, {"k", r.k},           {"N", r.n},
          {"n_queries", r.n_queries()}, {"rps", r.rps}, {"band", std::string(to_string(r.band()))}};
}

/// Label row read back from an RPS file (hits are not persisted).
struct RpsLabel {
  std::string target_id;
  std::size_t k = 0;
  std::size_t n = 0;
  std::size_t n_queries = 0;
  double rps = 0.0;
};

inline RpsLabel rps_label_from_json(const io::json& j) {
  RpsLabel l;
  l.target_id = j.at("target_id").get<std::string>();
  l.k = j.at("k").get<std::size_t>();
  l.n = j.at("N").get<std::size_t>();
  l.n_queries = j.at("n_queries").get<std::size_t>();
  l.rps = j.at("rps").get<double>();
  if (l.rps < 0.0 || l.rps > 1.0 || l.n_queries == 0)
    fail(ErrorKind::validation, "bad RPS row for '" + l.target_id + "'");
  return l;
}

inline void write_rps_file(const std::filesystem::path& path, std::span<const RpsResult> results) {
  std::vector<io::json> rows;
  rows.reserve(results.size());
  for (const auto& r : results) rows.push_back(to_json(r));
  io::write_ndjson(path, rows);
}

inline std::vector<RpsLabel> read_rps_file(const std::filesystem::path& path) {
  std::vector<RpsLabel> out;
  for (const auto& j : io::read_ndjson(path)) out.push_back(rps_label_from_json(j));
  return out;
}

}  // namespace argus
