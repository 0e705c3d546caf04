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
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "argus/bm25.hpp"
#include "argus/bridge.hpp"
#include "argus/config.hpp"
#include "argus/corpus.hpp"
#include "argus/embedding.hpp"
#include "argus/error.hpp"
#include "argus/eval.hpp"
#include "argus/geometry.hpp"
#include "argus/io.hpp"
#include "argus/parallel.hpp"
#include "argus/probes.hpp"
#include "argus/remedy.hpp"
#include "argus/rps.hpp"

namespace argus::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kValidation = 1, kDependency = 2, kTransport = 3 };

inline int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::dependency: return kDependency;
    case ErrorKind::transport:
    case ErrorKind::protocol: return kTransport;
    default: return kValidation;
  }
}

// Artifact names inside the output directory.
inline constexpr const char* kRpsFile = "rps.jsonl";
inline constexpr const char* kValidationFile = "validation_report.json";
inline constexpr const char* kSweepNFile = "sweep_n.csv";
inline constexpr const char* kSweepKFile = "sweep_k.csv";
inline constexpr const char* kConfigFile = "effective_config.json";
inline constexpr const char* kProbeFile = "probe.json";
inline constexpr const char* kProbeSweepFile = "probe_sweep.csv";
inline constexpr const char* kProbeReportFile = "probe_report.json";
inline constexpr const char* kFlagsFile = "flags.jsonl";
inline constexpr const char* kMentionScoresFile = "mention_scores.jsonl";
inline constexpr const char* kAugmentedFile = "augmented.jsonl";
inline constexpr const char* kAugmentStatsFile = "augment_stats.json";
inline constexpr const char* kMetricsFile = "metrics.csv";
inline constexpr const char* kComparisonFile = "comparison.csv";
inline constexpr const char* kRunOriginalFile = "run_original.json";
inline constexpr const char* kRunAugmentedFile = "run_augmented.json";
inline constexpr const char* kBenchmarkFile = "benchmark_avg.csv";
inline constexpr const char* kLdaFile = "lda.csv";
inline constexpr const char* kAssociationFile = "association.json";

inline fs::path require_input(const std::string& path, const std::string& what, const std::string& hint = {}) {
  if (path.empty()) fail(ErrorKind::dependency, "no " + what + " path configured" + (hint.empty() ? "" : "; " + hint));
  if (!fs::exists(path))
    fail(ErrorKind::dependency, what + " not found at " + path + (hint.empty() ? "" : "; " + hint));
  return path;
}

inline fs::path require_artifact(const RunConfig& c, const char* name, const std::string& hint) {
  return require_input(c.out(name).string(), name, hint);
}

inline void write_json(const fs::path& p, const io::json& j) { io::write_text(p, j.dump(2) + "\n"); }

/// Providers and bridge-backed components built from the config.
struct Runtime {
  std::shared_ptr<bridge::Client> client;
  std::shared_ptr<EmbeddingProvider> entity_provider;
  std::shared_ptr<EmbeddingProvider> text_provider;

  bridge::Client& bridge_client(const RunConfig& c) {
    if (!client) client = std::make_shared<bridge::Client>(bridge::make_transport(bridge::resolve_endpoint(c.provider.endpoint)));
    return *client;
  }
};

inline Runtime make_runtime(const RunConfig& c) {
  Runtime rt;
  const auto kind = parse_provider_kind(c.provider.kind);
  const auto gran = parse_granularity(c.provider.granularity);
  switch (kind) {
    case ProviderKind::synthetic:
      rt.entity_provider = std::make_shared<SyntheticProvider>(c.provider.dim, derive_seed(c.seed, "synthetic-provider"), gran);
      rt.text_provider = rt.entity_provider;
      break;
    case ProviderKind::file_store:
      if (!c.provider.store.empty())
        rt.entity_provider = std::make_shared<FileStoreProvider>(require_input(c.provider.store, "entity vector store"));
      if (!c.provider.doc_store.empty())
        rt.text_provider = std::make_shared<FileStoreProvider>(require_input(c.provider.doc_store, "document vector store"));
      break;
    case ProviderKind::bridge:
      rt.bridge_client(c);
      rt.entity_provider = bridge::make_bridge_provider(rt.client, c.provider.dim, gran);
      rt.text_provider = rt.entity_provider;
      break;
  }
  return rt;
}

inline const EmbeddingProvider& entity_provider(const Runtime& rt) {
  if (!rt.entity_provider) fail(ErrorKind::dependency, "no entity vector store configured");
  return *rt.entity_provider;
}

inline const EmbeddingProvider& text_provider(const Runtime& rt) {
  if (!rt.text_provider) fail(ErrorKind::dependency, "no document vector store configured");
  return *rt.text_provider;
}

inline void begin(const RunConfig& c) {
  validate_config(c);
  fs::create_directories(c.paths.output_dir);
  write_json(c.out(kConfigFile), to_json(c));
}

inline ValidatedCorpus load_corpus(const RunConfig& c) {
  const auto raw = read_entity_corpus(require_input(c.paths.corpus, "entity corpus"));
  return validate_corpus(raw);
}

inline AuditOptions audit_options(const RunConfig& c) {
  AuditOptions o;
  o.n = c.n;
  o.k = c.k;
  o.seed = c.seed;
  o.workers = c.workers;
  o.query_cap = c.query_cap;
  return o;
}

// ---------------------------------------------------------------------------
// audit

inline int cmd_audit(const RunConfig& c, std::ostream& log) {
  begin(c);
  auto vc = load_corpus(c);
  write_json(c.out(kValidationFile), to_json(vc.report));
  log << "corpus: " << vc.report.accepted << " accepted, " << vc.report.rejected << " rejected\n";
  if (c.strict && vc.report.rejected > 0)
    fail(ErrorKind::validation, std::to_string(vc.report.rejected) + " records rejected; see " +
                                    c.out(kValidationFile).string());
  if (vc.corpus.targets.empty()) fail(ErrorKind::validation, "no auditable targets");

  Runtime rt = make_runtime(c);
  const auto table = build_embedding_table(vc.corpus.entities, entity_provider(rt), c.workers);
  const auto opts = audit_options(c);
  const auto results = run_audit(vc.corpus, table, opts);
  write_rps_file(c.out(kRpsFile), results);
  log << "audit: " << results.size() << " targets, mean RPS " << io::format_double(mean_rps(results)) << "\n";

  if (!c.n_sweep.empty()) io::write_text(c.out(kSweepNFile), sweep_csv(sweep_fraction_above(vc.corpus, table, c.n_sweep, opts)));
  if (!c.k_sweep.empty()) io::write_text(c.out(kSweepKFile), sweep_csv(sweep_fraction_above_k(vc.corpus, table, c.k_sweep, opts)));
  return kOk;
}

// ---------------------------------------------------------------------------
// train-probe

struct LabeledData {
  std::vector<std::string> ids;
  std::vector<EmbeddingVector> vectors;
  std::vector<double> labels;
};

inline LabeledData labeled_data(const RunConfig& c, const Runtime& rt) {
  const auto labels_path = require_artifact(c, kRpsFile, "run 'argus audit' first");
  const auto labels = read_rps_file(labels_path);
  auto vc = load_corpus(c);
  LabeledData d;
  std::vector<EntityRecord> rows;
  for (const auto& l : labels) {
    if (!vc.corpus.contains(l.target_id))
      fail(ErrorKind::validation, "label for unknown entity '" + l.target_id + "'");
    rows.push_back(vc.corpus.at(l.target_id));
    d.ids.push_back(l.target_id);
    d.labels.push_back(l.rps);
  }
  const auto table = build_embedding_table(rows, entity_provider(rt), c.workers);
  for (const auto& id : d.ids) d.vectors.push_back(lookup(table, id));
  return d;
}

inline io::json to_json(const ProbeReport& r) {
  return {{"rmse", r.rmse},
          {"mae", r.mae},
          {"pearson_r", r.pearson_r},
          {"spearman_rho", r.spearman_rho},
          {"macro_f1", r.macro_f1},
          {"macro_recall", r.macro_recall},
          {"macro_precision", r.macro_precision},
          {"weighted_precision", r.weighted_precision},
          {"weighted_f1", r.weighted_f1},
          {"accuracy", r.accuracy}};
}

inline int cmd_train_probe(const RunConfig& c, std::ostream& log) {
  begin(c);
  Runtime rt = make_runtime(c);
  const auto data = labeled_data(c, rt);
  if (data.ids.size() < 3) fail(ErrorKind::validation, "need at least 3 labeled entities to train a probe");
  const auto X = feature_matrix(data.vectors);
  const auto y = target_vector(data.labels);
  const auto split = make_split(data.ids.size(), c.seed, c.probe.train_fraction, c.probe.validation_fraction);
  const auto grid = probe_grid(c);
  auto sweep = sweep_and_select(grid, X, y, split, c.workers);
  sweep.best.meta.seed = c.seed;
  save_probe(c.out(kProbeFile), sweep.best);
  io::write_text(c.out(kProbeSweepFile), sweep_table_csv(sweep.entries));
  const auto& best = sweep.entries[sweep.best_index];
  io::json report{{"family", std::string(to_string(best.spec.family))},
                  {"params", best.spec.describe()},
                  {"validation_rmse", best.validation_rmse},
                  {"n_train", split.train.size()},
                  {"n_validation", split.validation.size()},
                  {"n_test", split.test.size()}};
  if (best.test) report["test"] = to_json(*best.test);
  for (const auto& e : sweep.entries)
    if (is_baseline(e.spec.family) && e.test) report[std::string(to_string(e.spec.family))] = to_json(*e.test);
  write_json(c.out(kProbeReportFile), report);
  log << "probe: " << to_string(best.spec.family) << " " << best.spec.describe() << ", validation RMSE "
      << io::format_double(best.validation_rmse) << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// diagnose

inline std::vector<Document> load_originals(const RunConfig& c) {
  auto docs = read_documents(require_input(c.paths.documents, "document corpus"));
  std::set<std::string> seen;
  for (const auto& d : docs) {
    validate_document(d);
    if (!seen.insert(d.doc_id).second) fail(ErrorKind::validation, "duplicate doc_id '" + d.doc_id + "'");
  }
  return docs;
}

inline std::unique_ptr<NerProvider> make_ner(const RunConfig& c, Runtime& rt) {
  if (c.ner == "bridge") {
    rt.bridge_client(c);
    return std::make_unique<bridge::BridgeNer>(rt.client);
  }
  if (!c.paths.gazetteer.empty()) return std::make_unique<DictionaryTagger>(read_gazetteer(require_input(c.paths.gazetteer, "gazetteer")));
  if (!c.paths.corpus.empty()) {
    std::vector<std::string> labels;
    for (const auto& r : read_entity_corpus(require_input(c.paths.corpus, "entity corpus"))) labels.push_back(r.label);
    return std::make_unique<DictionaryTagger>(std::move(labels));
  }
  fail(ErrorKind::dependency, "dictionary NER needs a gazetteer or an entity corpus");
}

inline int cmd_diagnose(const RunConfig& c, std::ostream& log) {
  begin(c);
  const auto probe = load_probe(require_artifact(c, kProbeFile, "run 'argus train-probe' first"));
  const auto docs = load_originals(c);
  Runtime rt = make_runtime(c);
  const auto ner = make_ner(c, rt);
  const auto& provider = text_provider(rt);

  std::vector<std::vector<EntityScore>> scored(docs.size());
  parallel_for(docs.size(), c.workers, [&](std::size_t i) {
    scored[i] = score_entities(docs[i], extract_mentions(*ner, docs[i]), provider, probe);
  });
  std::vector<io::json> flag_rows, score_rows;
  for (const auto& per_doc : scored) {
    for (const auto& s : per_doc) score_rows.push_back(to_json(s));
    for (const auto& f : flag_entities(per_doc, c.tau)) flag_rows.push_back(to_json(f));
  }
  io::write_ndjson(c.out(kFlagsFile), flag_rows);
  io::write_ndjson(c.out(kMentionScoresFile), score_rows);
  log << "diagnose: " << docs.size() << " documents, " << score_rows.size() << " entities, " << flag_rows.size()
      << " flagged at tau " << io::format_double(c.tau) << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// augment

inline std::unordered_map<std::string, std::vector<FlaggedEntity>> read_flags(const fs::path& p) {
  std::unordered_map<std::string, std::vector<FlaggedEntity>> out;
  for (const auto& j : io::read_ndjson(p)) {
    auto f = entity_score_from_json(j);
    out[f.doc_id].push_back(std::move(f));
  }
  return out;
}

inline int cmd_augment(const RunConfig& c, std::ostream& log) {
  begin(c);
  const auto flags = read_flags(require_artifact(c, kFlagsFile, "run 'argus diagnose' first"));
  const auto docs = load_originals(c);
  const Bm25Index kb(read_kb(require_input(c.paths.kb, "reference KB")));

  AugmentOptions opts;
  opts.mode = parse_augment_mode(c.mode);
  opts.k_aug = c.k_aug;
  opts.fallback_to_expansion = c.fallback_to_expansion;
  if (!c.paths.prompt_template.empty())
    opts.prompt_template = io::read_text(require_input(c.paths.prompt_template, "prompt template"));

  Runtime rt;
  std::unique_ptr<Generator> generator;
  if (opts.mode != AugmentMode::expansion) {
    if (c.generator == "bridge") {
      rt.bridge_client(c);
      generator = std::make_unique<bridge::BridgeGenerator>(rt.client);
    } else {
      generator = std::make_unique<StubGenerator>();
    }
  }
  AugmentStats stats;
  const auto views = augment_corpus(docs, flags, kb, generator.get(), opts, &stats);
  std::vector<io::json> rows;
  for (const auto& v : views) rows.push_back(to_json(v));
  io::write_ndjson(c.out(kAugmentedFile), rows);
  write_json(c.out(kAugmentStatsFile), {{"mode", c.mode},
                                        {"originals", stats.originals},
                                        {"expansion_views", stats.expansion_views},
                                        {"synthesis_views", stats.synthesis_views},
                                        {"synthesis_fallbacks", stats.synthesis_fallbacks},
                                        {"indexed_views", views.size()}});
  log << "augment: " << stats.originals << " documents -> " << views.size() << " indexed views\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// evaluate

inline RunResult evaluate_system(const RunConfig& c, const EmbeddingProvider& provider, std::span<const Query> queries,
                                 const Qrels& qrels, std::span<const Document> docs, const std::string& system) {
  const auto index = build_view_index(docs, provider, c.workers);
  const auto depth = *std::max_element(c.cutoffs.begin(), c.cutoffs.end());
  auto run = run_retrieval(queries, index, provider, depth, c.aggregate_views, c.workers);
  run.task = c.task;
  run.system = system;
  evaluate_run(run, qrels, c.cutoffs, parse_gain(c.gain));
  return run;
}

inline int cmd_evaluate(const RunConfig& c, std::ostream& log) {
  begin(c);
  const auto augmented_path = require_artifact(c, kAugmentedFile, "run 'argus augment' first");
  const auto queries = read_queries(require_input(c.paths.queries, "queries"));
  const auto qrels = read_qrels(require_input(c.paths.qrels, "qrels"));
  const auto originals = load_originals(c);
  const auto augmented = read_documents(augmented_path);
  Runtime rt = make_runtime(c);
  const auto& provider = text_provider(rt);

  const auto base = evaluate_system(c, provider, queries, qrels, originals, "original");
  const auto treated = evaluate_system(c, provider, queries, qrels, augmented, "argus-" + c.mode);
  auto rows = metric_rows(base);
  for (auto& r : metric_rows(treated)) rows.push_back(std::move(r));
  io::write_text(c.out(kMetricsFile), metrics_csv(rows));
  io::write_text(c.out(kComparisonFile), delta_csv(compare_runs(base, treated, c.cutoffs)));
  auto jb = to_json(base);
  jb["excluded_queries"] = base.excluded;
  write_json(c.out(kRunOriginalFile), jb);
  auto jt = to_json(treated);
  jt["excluded_queries"] = treated.excluded;
  write_json(c.out(kRunAugmentedFile), jt);
  log << "evaluate: " << queries.size() << " queries (" << base.excluded.size() << " excluded)";
  for (auto k : c.cutoffs)
    log << ", nDCG@" << k << " " << io::format_double(base.ndcg.at(k)) << " -> " << io::format_double(treated.ndcg.at(k));
  log << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// report

inline int cmd_report(const RunConfig& c, std::ostream& log) {
  begin(c);
  auto rows = read_metrics_csv(require_artifact(c, kMetricsFile, "run 'argus evaluate' first"));
  for (const auto& extra : c.report_metrics)
    for (auto& r : read_metrics_csv(require_input(extra, "metrics file"))) rows.push_back(std::move(r));
  std::vector<std::string> tasks;
  for (const auto& r : rows)
    if (std::find(tasks.begin(), tasks.end(), r.task) == tasks.end()) tasks.push_back(r.task);
  io::write_text(c.out(kBenchmarkFile), metrics_csv(full_benchmark_avg(rows, tasks)));
  log << "report: averaged " << tasks.size() << " task(s)\n";

  // LDA projection of audited entities, when the audit artifacts exist.
  if (!c.paths.corpus.empty() && fs::exists(c.out(kRpsFile))) {
    Runtime rt = make_runtime(c);
    const auto labels = read_rps_file(c.out(kRpsFile));
    auto vc = load_corpus(c);
    std::vector<EntityRecord> ents;
    for (const auto& l : labels) ents.push_back(vc.corpus.at(l.target_id));
    const auto table = build_embedding_table(ents, entity_provider(rt), c.workers);
    std::vector<LabeledPoint> pts;
    std::vector<std::string> ids;
    for (const auto& l : labels) {
      pts.push_back({lookup(table, l.target_id), band_of(l.rps)});
      ids.push_back(l.target_id);
    }
    try {
      io::write_text(c.out(kLdaFile), lda_csv(fit_lda(pts), ids));
    } catch (const Error& e) {
      log << "report: LDA skipped: " << e.what() << "\n";
    }
  }

  // Max-RPS association between retrieval and entity scores.
  if (fs::exists(c.out(kRunOriginalFile)) && fs::exists(c.out(kMentionScoresFile)) && !c.paths.qrels.empty()) {
    const auto qrels = read_qrels(require_input(c.paths.qrels, "qrels"));
    const auto run = run_from_json(io::json::parse(io::read_text(c.out(kRunOriginalFile))));
    std::unordered_map<std::string, std::vector<double>> doc_scores;
    for (const auto& j : io::read_ndjson(c.out(kMentionScoresFile))) {
      const auto s = entity_score_from_json(j);
      doc_scores[s.doc_id].push_back(s.doc_score);
    }
    std::vector<GoldDocScores> gold;
    for (const auto& qr : run.rankings) {
      if (!qrels.has_query(qr.query_id)) continue;
      std::set<std::string> top;
      for (std::size_t i = 0; i < std::min(c.association_cutoff, qr.ranked.size()); ++i) top.insert(qr.ranked[i].doc_id);
      for (const auto& [doc, grade] : qrels.judgments(qr.query_id)) {
        if (grade <= 0) continue;
        auto it = doc_scores.find(doc);
        gold.push_back({doc, top.count(doc) > 0, it == doc_scores.end() ? std::vector<double>{} : it->second});
      }
    }
    io::json out{{"cutoff", c.association_cutoff}, {"gold_documents", gold.size()}};
    try {
      out["delta"] = association_delta(gold);
    } catch (const Error& e) {
      out["delta"] = nullptr;
      out["error"] = e.what();
    }
    write_json(c.out(kAssociationFile), out);
  }
  return kOk;
}

// ---------------------------------------------------------------------------

inline int run_command(const std::string& name, const RunConfig& c, std::ostream& log = std::cerr) {
  try {
    if (name == "audit") return cmd_audit(c, log);
    if (name == "train-probe") return cmd_train_probe(c, log);
    if (name == "diagnose") return cmd_diagnose(c, log);
    if (name == "augment") return cmd_augment(c, log);
    if (name == "evaluate") return cmd_evaluate(c, log);
    if (name == "report") return cmd_report(c, log);
    log << "error: unknown subcommand '" << name << "'\n";
    return kValidation;
  } catch (const Error& e) {
    log << "error [" << to_string(e.kind()) << "]: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kValidation;
  }
}

}  // namespace argus::cli
