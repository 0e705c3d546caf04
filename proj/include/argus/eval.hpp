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
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include "argus/corpus.hpp"
#include "argus/embedding.hpp"
#include "argus/error.hpp"
#include "argus/io.hpp"
#include "argus/parallel.hpp"

namespace argus {

inline const std::vector<std::size_t>& default_cutoffs() {
  static const std::vector<std::size_t> c{5, 10, 20, 50};
  return c;
}

// ---------------------------------------------------------------------------
// Qrels and queries

class Qrels {
 public:
  void add(const std::string& query_id, const std::string& doc_id, int grade) {
    if (grade < 0) fail(ErrorKind::validation, "negative grade for " + query_id + "/" + doc_id);
    grades_[query_id][doc_id] = grade;
  }

  bool has_query(const std::string& q) const { return grades_.count(q) != 0; }

  int grade(const std::string& q, const std::string& d) const {
    auto it = grades_.find(q);
    if (it == grades_.end()) return 0;
    auto jt = it->second.find(d);
    return jt == it->second.end() ? 0 : jt->second;
  }

  const std::map<std::string, int>& judgments(const std::string& q) const {
    auto it = grades_.find(q);
    if (it == grades_.end()) fail(ErrorKind::undefined_metric, "query '" + q + "' absent from qrels");
    return it->second;
  }

  std::size_t relevant_count(const std::string& q) const {
    auto it = grades_.find(q);
    if (it == grades_.end()) return 0;
    return static_cast<std::size_t>(
        std::count_if(it->second.begin(), it->second.end(), [](const auto& kv) { return kv.second > 0; }));
  }

  std::vector<std::string> query_ids() const {
    std::vector<std::string> out;
    for (const auto& [q, _] : grades_) out.push_back(q);
    return out;
  }

  std::size_t size() const { return grades_.size(); }

 private:
  std::map<std::string, std::map<std::string, int>> grades_;
};

/// "query_id 0 doc_id grade" per line, tab or space separated.
inline Qrels parse_qrels(std::string_view content) {
  Qrels q;
  std::istringstream in{std::string(content)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    std::istringstream fields(line);
    std::string qid, iter, did, grade;
    if (!(fields >> qid >> iter >> did >> grade))
      fail(ErrorKind::validation, "qrels line " + std::to_string(lineno) + ": expected 4 fields");
    int g = 0;
    try {
      std::size_t used = 0;
      g = std::stoi(grade, &used);
      if (used != grade.size()) throw std::invalid_argument(grade);
    } catch (const std::exception&) {
      fail(ErrorKind::validation, "qrels line " + std::to_string(lineno) + ": bad grade '" + grade + "'");
    }
    q.add(qid, did, g);
  }
  return q;
}

inline Qrels read_qrels(const std::filesystem::path& path) { return parse_qrels(io::read_text(path)); }

inline void write_qrels(const std::filesystem::path& path,
                        std::span<const std::tuple<std::string, std::string, int>> rows) {
  std::string out;
  for (const auto& [q, d, g] : rows) out += q + "\t0\t" + d + "\t" + std::to_string(g) + "\n";
  io::write_text(path, out);
}

struct Query {
  std::string query_id;
  std::string text;
};

inline std::vector<Query> read_queries(const std::filesystem::path& path) {
  std::vector<Query> out;
  for (const auto& j : io::read_ndjson(path))
    out.push_back({j.at("query_id").get<std::string>(), j.at("text").get<std::string>()});
  return out;
}

inline void write_queries(const std::filesystem::path& path, std::span<const Query> qs) {
  std::vector<io::json> rows;
  for (const auto& q : qs) rows.push_back({{"query_id", q.query_id}, {"text", q.text}});
  io::write_ndjson(path, rows);
}

// ---------------------------------------------------------------------------
// Retrieval

struct ViewIndex {
  std::vector<std::string> view_ids;
  std::vector<std::string> parent_ids;
  std::vector<EmbeddingVector> vectors;

  std::size_t size() const { return view_ids.size(); }
};

inline ViewIndex build_view_index(std::span<const Document> docs, const EmbeddingProvider& provider,
                                  std::size_t workers = 1) {
  ViewIndex idx;
  std::vector<std::optional<EmbeddingVector>> slots(docs.size());
  parallel_for(docs.size(), workers, [&](std::size_t i) { slots[i] = embed_text(provider, docs[i].text, docs[i].doc_id); });
  for (std::size_t i = 0; i < docs.size(); ++i) {
    idx.view_ids.push_back(docs[i].doc_id);
    idx.parent_ids.push_back(docs[i].root_id());
    idx.vectors.push_back(std::move(*slots[i]));
  }
  return idx;
}

struct RankedDoc {
  std::string doc_id;
  double score = 0.0;
  bool operator==(const RankedDoc&) const = default;
};

inline bool ranked_before(const RankedDoc& a, const RankedDoc& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.doc_id < b.doc_id;
}

/// Top-k originals, each scored by the max cosine over its views. With
/// aggregation off every view competes on its own and is reported under its
/// parent id, so a parent may repeat.
inline std::vector<RankedDoc> retrieve(const EmbeddingVector& query, const ViewIndex& index, std::size_t k,
                                       bool aggregate = true) {
  if (index.size() == 0) fail(ErrorKind::validation, "empty retrieval index");
  if (k < 1) fail(ErrorKind::validation, "k must be >= 1");
  std::vector<RankedDoc> all;
  if (aggregate) {
    std::unordered_map<std::string, std::size_t> slot;
    for (std::size_t i = 0; i < index.size(); ++i) {
      const double s = cosine(query, index.vectors[i]);
      auto [it, inserted] = slot.emplace(index.parent_ids[i], all.size());
      if (inserted)
        all.push_back({index.parent_ids[i], s});
      else
        all[it->second].score = std::max(all[it->second].score, s);
    }
    const auto m = std::min(k, all.size());
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(m), all.end(), ranked_before);
    all.resize(m);
    return all;
  }
  std::vector<std::pair<RankedDoc, std::string>> views;
  for (std::size_t i = 0; i < index.size(); ++i)
    views.push_back({{index.view_ids[i], cosine(query, index.vectors[i])}, index.parent_ids[i]});
  const auto m = std::min(k, views.size());
  std::partial_sort(views.begin(), views.begin() + static_cast<std::ptrdiff_t>(m), views.end(),
                    [](const auto& a, const auto& b) { return ranked_before(a.first, b.first); });
  for (std::size_t i = 0; i < m; ++i) all.push_back({views[i].second, views[i].first.score});
  return all;
}

// ---------------------------------------------------------------------------
// nDCG

enum class GainKind { linear, exponential };

inline GainKind parse_gain(std::string_view s) {
  if (s == "linear") return GainKind::linear;
  if (s == "exponential") return GainKind::exponential;
  fail(ErrorKind::validation, "unknown gain '" + std::string(s) + "'");
}

inline double gain_of(int grade, GainKind g) {
  if (grade <= 0) return 0.0;
  return g == GainKind::linear ? static_cast<double>(grade) : std::exp2(static_cast<double>(grade)) - 1.0;
}

/// Repeated doc ids after the first occurrence earn no gain.
inline double ndcg_at_k(std::span<const RankedDoc> ranked, const Qrels& qrels, const std::string& query_id,
                        std::size_t k, GainKind gain = GainKind::linear) {
  if (k < 1) fail(ErrorKind::validation, "k must be >= 1");
  const auto& judged = qrels.judgments(query_id);
  std::vector<int> grades;
  for (const auto& [_, g] : judged)
    if (g > 0) grades.push_back(g);
  if (grades.empty()) fail(ErrorKind::undefined_metric, "query '" + query_id + "' has no relevant documents");
  std::sort(grades.rbegin(), grades.rend());

  double ideal = 0.0;
  for (std::size_t i = 0; i < std::min(k, grades.size()); ++i)
    ideal += gain_of(grades[i], gain) / std::log2(static_cast<double>(i) + 2.0);

  double dcg = 0.0;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) {
    if (!seen.insert(ranked[i].doc_id).second) continue;
    auto it = judged.find(ranked[i].doc_id);
    if (it == judged.end()) continue;
    dcg += gain_of(it->second, gain) / std::log2(static_cast<double>(i) + 2.0);
  }
  return dcg / ideal;
}

inline double recall_at_k(std::span<const RankedDoc> ranked, const Qrels& qrels, const std::string& query_id,
                          std::size_t k) {
  const auto total = qrels.relevant_count(query_id);
  if (total == 0) fail(ErrorKind::undefined_metric, "query '" + query_id + "' has no relevant documents");
  std::set<std::string> hit;
  for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i)
    if (qrels.grade(query_id, ranked[i].doc_id) > 0) hit.insert(ranked[i].doc_id);
  return static_cast<double>(hit.size()) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// Runs

struct QueryRanking {
  std::string query_id;
  std::vector<RankedDoc> ranked;
};

struct RunResult {
  std::string task;
  std::string system;
  std::vector<QueryRanking> rankings;  // query order
  std::vector<std::size_t> cutoffs;
  std::map<std::size_t, double> ndcg;                                    // mean per cutoff
  std::map<std::size_t, std::map<std::string, double>> per_query_ndcg;  // cutoff -> query -> value
  std::vector<std::string> excluded;                                    // queries with no relevant docs
};

inline RunResult run_retrieval(std::span<const Query> queries, const ViewIndex& index,
                               const EmbeddingProvider& provider, std::size_t depth, bool aggregate = true,
                               std::size_t workers = 1) {
  RunResult r;
  r.rankings.resize(queries.size());
  parallel_for(queries.size(), workers, [&](std::size_t i) {
    const auto q = embed_text(provider, queries[i].text, queries[i].query_id);
    r.rankings[i] = {queries[i].query_id, retrieve(q, index, depth, aggregate)};
  });
  return r;
}

inline void evaluate_run(RunResult& run, const Qrels& qrels, std::span<const std::size_t> cutoffs,
                         GainKind gain = GainKind::linear) {
  run.cutoffs.assign(cutoffs.begin(), cutoffs.end());
  run.ndcg.clear();
  run.per_query_ndcg.clear();
  run.excluded.clear();
  for (const auto& qr : run.rankings) {
    if (!qrels.has_query(qr.query_id) || qrels.relevant_count(qr.query_id) == 0) {
      run.excluded.push_back(qr.query_id);
      continue;
    }
    for (auto k : cutoffs) run.per_query_ndcg[k][qr.query_id] = ndcg_at_k(qr.ranked, qrels, qr.query_id, k, gain);
  }
  for (auto k : cutoffs) {
    const auto& pq = run.per_query_ndcg[k];
    if (pq.empty()) fail(ErrorKind::undefined_metric, "no query in '" + run.task + "' has relevant documents");
    double s = 0.0;
    for (const auto& [_, v] : pq) s += v;
    run.ndcg[k] = s / static_cast<double>(pq.size());
  }
}

struct MetricRow {
  std::string task;
  std::string system;
  std::size_t cutoff = 0;
  std::string metric;
  double value = 0.0;
};

inline std::vector<MetricRow> metric_rows(const RunResult& run) {
  std::vector<MetricRow> out;
  for (const auto& [k, v] : run.ndcg) out.push_back({run.task, run.system, k, "ndcg", v});
  return out;
}

inline std::string metrics_csv(std::span<const MetricRow> rows) {
  io::CsvWriter w({"task", "system", "cutoff", "metric", "value"});
  for (const auto& r : rows) w.row({r.task, r.system, std::to_string(r.cutoff), r.metric, io::format_double(r.value)});
  return w.str();
}

inline std::vector<MetricRow> read_metrics_csv(const std::filesystem::path& path) {
  const auto t = io::read_csv(path);
  std::vector<MetricRow> out;
  const auto task = t.column("task"), system = t.column("system"), cutoff = t.column("cutoff"),
             metric = t.column("metric"), value = t.column("value");
  for (const auto& r : t.rows)
    out.push_back({r[task], r[system], static_cast<std::size_t>(std::stoul(r[cutoff])), r[metric],
                   io::parse_double(r[value])});
  return out;
}

inline constexpr std::string_view kBenchmarkAvgTask = "Full Benchmark Avg.";

/// Unweighted mean across tasks per (system, cutoff, metric). Every system
/// must report every task in `tasks` with the same cutoffs.
inline std::vector<MetricRow> full_benchmark_avg(std::span<const MetricRow> rows, std::span<const std::string> tasks) {
  using Key = std::tuple<std::string, std::string, std::size_t>;  // system, metric, cutoff
  std::map<Key, std::map<std::string, double>> cells;
  std::set<std::string> systems;
  std::set<std::pair<std::string, std::size_t>> metric_cutoffs;
  for (const auto& r : rows) {
    cells[{r.system, r.metric, r.cutoff}][r.task] = r.value;
    systems.insert(r.system);
    metric_cutoffs.insert({r.metric, r.cutoff});
  }
  std::vector<std::string> missing;
  for (const auto& s : systems)
    for (const auto& [m, k] : metric_cutoffs) {
      const auto& by_task = cells[{s, m, k}];
      for (const auto& t : tasks)
        if (!by_task.count(t)) missing.push_back(t + " (" + s + ", " + m + "@" + std::to_string(k) + ")");
    }
  if (!missing.empty()) {
    std::string msg = "missing tasks:";
    for (const auto& m : missing) msg += " " + m + ";";
    fail(ErrorKind::validation, msg);
  }
  std::vector<MetricRow> out;
  for (const auto& [key, by_task] : cells) {
    double s = 0.0;
    for (const auto& t : tasks) s += by_task.at(t);
    out.push_back({std::string(kBenchmarkAvgTask), std::get<0>(key), std::get<2>(key), std::get<1>(key),
                   s / static_cast<double>(tasks.size())});
  }
  return out;
}

struct DeltaRow {
  std::string task;
  std::size_t cutoff = 0;
  double baseline = 0.0;
  double treated = 0.0;
  double delta = 0.0;
};

inline std::vector<DeltaRow> compare_runs(const RunResult& baseline, const RunResult& treated,
                                          std::span<const std::size_t> cutoffs) {
  std::set<std::string> a, b;
  for (const auto& q : baseline.rankings) a.insert(q.query_id);
  for (const auto& q : treated.rankings) b.insert(q.query_id);
  if (a != b) fail(ErrorKind::validation, "runs cover different query sets");
  std::vector<DeltaRow> out;
  for (auto k : cutoffs) {
    if (!baseline.ndcg.count(k) || !treated.ndcg.count(k))
      fail(ErrorKind::validation, "cutoff " + std::to_string(k) + " not evaluated in both runs");
    const double x = baseline.ndcg.at(k), y = treated.ndcg.at(k);
    out.push_back({baseline.task, k, x, y, y - x});
  }
  return out;
}

inline std::string delta_csv(std::span<const DeltaRow> rows) {
  io::CsvWriter w({"task", "cutoff", "baseline", "treated", "delta"});
  for (const auto& r : rows)
    w.row({r.task, std::to_string(r.cutoff), io::format_double(r.baseline), io::format_double(r.treated),
           io::format_double(r.delta)});
  return w.str();
}

inline io::json to_json(const RunResult& r) {
  io::json q = io::json::array();
  for (const auto& qr : r.rankings) {
    io::json ranked = io::json::array();
    for (const auto& d : qr.ranked) ranked.push_back({{"doc_id", d.doc_id}, {"score", d.score}});
    q.push_back({{"query_id", qr.query_id}, {"ranked", ranked}});
  }
  return {{"task", r.task}, {"system", r.system}, {"queries", q}};
}

inline RunResult run_from_json(const io::json& j) {
  RunResult r;
  r.task = j.at("task").get<std::string>();
  r.system = j.at("system").get<std::string>();
  for (const auto& q : j.at("queries")) {
    QueryRanking qr{q.at("query_id").get<std::string>(), {}};
    for (const auto& d : q.at("ranked")) qr.ranked.push_back({d.at("doc_id").get<std::string>(), d.at("score").get<double>()});
    r.rankings.push_back(std::move(qr));
  }
  return r;
}

}  // namespace argus
