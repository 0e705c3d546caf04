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

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "argus/commands.hpp"
#include "argus/config.hpp"

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> k, n, k_aug, workers, query_cap, dim;
  std::optional<double> tau;
  std::optional<std::string> mode, provider, granularity, store, doc_store, endpoint, ner, generator, gain, task,
      family, corpus, documents, queries, qrels, kb, gazetteer, prompt, out;
  std::vector<std::size_t> n_sweep, k_sweep, cutoffs;
  bool strict = false, fallback = false, no_aggregate = false;
};

void add_common(CLI::App* sub, Overrides& o, std::string& config_path) {
  sub->add_option("-c,--config", config_path, "JSON run config");
  sub->add_option("--seed", o.seed, "global seed");
  sub->add_option("--workers", o.workers, "worker threads");
  sub->add_option("-o,--out", o.out, "output directory");
  sub->add_option("--provider", o.provider, "synthetic | file-store | bridge");
  sub->add_option("--dim", o.dim, "embedding dimension");
  sub->add_option("--granularity", o.granularity, "sentence | token");
  sub->add_option("--store", o.store, "entity vector store");
  sub->add_option("--doc-store", o.doc_store, "document vector store");
  sub->add_option("--endpoint", o.endpoint, "bridge endpoint (stdio:<cmd> or http://...)");
  sub->add_option("--corpus", o.corpus, "entity corpus NDJSON");
  sub->add_option("--documents", o.documents, "document corpus NDJSON");
  sub->add_option("--queries", o.queries, "queries NDJSON");
  sub->add_option("--qrels", o.qrels, "TREC qrels");
  sub->add_option("--kb", o.kb, "reference KB NDJSON");
  sub->add_option("--gazetteer", o.gazetteer, "NER gazetteer, one surface per line");
  sub->add_option("--prompt-template", o.prompt, "synthesis prompt template");
  sub->add_option("-k,--k", o.k, "retrieval budget for RPS");
  sub->add_option("-N,--pool-size", o.n, "neutral pool size");
  sub->add_option("--tau", o.tau, "flagging threshold");
  sub->add_option("--k-aug", o.k_aug, "KB passages per flagged entity");
  sub->add_option("--query-cap", o.query_cap, "cap on related entities per target");
  sub->add_option("--n-sweep", o.n_sweep, "pool sizes for the N sweep");
  sub->add_option("--k-sweep", o.k_sweep, "budgets for the k sweep");
  sub->add_option("--mode", o.mode, "expansion | synthesis | both");
  sub->add_option("--ner", o.ner, "dictionary | bridge");
  sub->add_option("--generator", o.generator, "stub | bridge");
  sub->add_option("--cutoffs", o.cutoffs, "nDCG cutoffs");
  sub->add_option("--gain", o.gain, "linear | exponential");
  sub->add_option("--task", o.task, "task name in metrics");
  sub->add_option("--probe-family", o.family, "ridge | mlp | all");
  sub->add_flag("--strict", o.strict, "fail on any rejected record");
  sub->add_flag("--fallback-to-expansion", o.fallback, "expand documents whose synthesis fails");
  sub->add_flag("--no-aggregate", o.no_aggregate, "let views compete as separate index entries");
}

void apply(const Overrides& o, argus::RunConfig& c) {
  if (o.seed) c.seed = *o.seed;
  if (o.workers) c.workers = *o.workers;
  if (o.out) c.paths.output_dir = *o.out;
  if (o.provider) c.provider.kind = *o.provider;
  if (o.dim) c.provider.dim = *o.dim;
  if (o.granularity) c.provider.granularity = *o.granularity;
  if (o.store) c.provider.store = *o.store;
  if (o.doc_store) c.provider.doc_store = *o.doc_store;
  if (o.endpoint) c.provider.endpoint = *o.endpoint;
  if (o.corpus) c.paths.corpus = *o.corpus;
  if (o.documents) c.paths.documents = *o.documents;
  if (o.queries) c.paths.queries = *o.queries;
  if (o.qrels) c.paths.qrels = *o.qrels;
  if (o.kb) c.paths.kb = *o.kb;
  if (o.gazetteer) c.paths.gazetteer = *o.gazetteer;
  if (o.prompt) c.paths.prompt_template = *o.prompt;
  if (o.k) c.k = *o.k;
  if (o.n) c.n = *o.n;
  if (o.tau) c.tau = *o.tau;
  if (o.k_aug) c.k_aug = *o.k_aug;
  if (o.query_cap) c.query_cap = *o.query_cap;
  if (!o.n_sweep.empty()) c.n_sweep = o.n_sweep;
  if (!o.k_sweep.empty()) c.k_sweep = o.k_sweep;
  if (o.mode) c.mode = *o.mode;
  if (o.ner) c.ner = *o.ner;
  if (o.generator) c.generator = *o.generator;
  if (!o.cutoffs.empty()) c.cutoffs = o.cutoffs;
  if (o.gain) c.gain = *o.gain;
  if (o.task) c.task = *o.task;
  if (o.family) c.probe.family = *o.family;
  if (o.strict) c.strict = true;
  if (o.fallback) c.fallback_to_expansion = true;
  if (o.no_aggregate) c.aggregate_views = false;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"argus: entity retrievability audit, diagnosis and remedy"};
  app.require_subcommand(1);
  Overrides o;
  std::string config_path;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"audit", "score retrievability of every entity"},
      {"train-probe", "fit a probe predicting RPS from embeddings"},
      {"diagnose", "flag low-RPS entities in documents"},
      {"augment", "build expansion and synthesis views"},
      {"evaluate", "nDCG of original vs augmented index"},
      {"report", "benchmark averages, LDA and association tables"}};
  for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help), o, config_path);
  CLI11_PARSE(app, argc, argv);

  const auto* sub = app.get_subcommands().front();
  argus::RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = argus::load_config(config_path);
  } catch (const argus::Error& e) {
    std::cerr << "error [" << argus::to_string(e.kind()) << "]: " << e.what() << "\n";
    return argus::cli::exit_code(e.kind());
  }
  apply(o, cfg);
  return argus::cli::run_command(sub->get_name(), cfg, std::cerr);
}
