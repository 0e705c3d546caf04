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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "argus/embedding.hpp"
#include "argus/error.hpp"
#include "argus/eval.hpp"
#include "argus/io.hpp"
#include "argus/probes.hpp"
#include "argus/remedy.hpp"
#include "argus/rps.hpp"

namespace argus {

struct ProviderConfig {
  std::string kind = "synthetic";  // synthetic | file-store | bridge
  std::size_t dim = 64;
  std::string granularity = "token";
  std::string store;     // file_store: entity vectors
  std::string doc_store;  // file_store: document, query and mention vectors
  std::string endpoint;  // bridge: stdio:<cmd> or http://host:port/path
};

struct ProbeConfig {
  std::string family = "ridge";  // ridge | mlp | all
  std::vector<double> alphas{1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0, 1000.0};
  std::vector<bool> standardize{false, true};
  std::vector<std::size_t> widths{256};
  std::vector<std::size_t> depths{1};
  std::vector<double> dropouts{0.0};
  std::vector<double> learning_rates{1e-3};
  std::size_t batch_size = 256;
  std::size_t max_epochs = 200;
  std::size_t patience = 10;
  double train_fraction = 0.7;
  double validation_fraction = 0.15;
};

struct PathConfig {
  std::string corpus;     // entity records (NDJSON)
  std::string documents;  // retrieval corpus (NDJSON)
  std::string queries;
  std::string qrels;
  std::string kb;
  std::string gazetteer;
  std::string prompt_template;
  std::string output_dir = "argus_out";
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::size_t k = kDefaultTopK;
  std::size_t n = kDefaultPoolSize;
  double tau = kDefaultTau;
  std::size_t k_aug = kDefaultKAug;
  std::size_t workers = 1;
  bool strict = false;
  std::optional<std::size_t> query_cap;
  std::vector<std::size_t> n_sweep;
  std::vector<std::size_t> k_sweep;
  std::string mode = "expansion";  // expansion | synthesis | both
  bool fallback_to_expansion = false;
  std::string ner = "dictionary";  // dictionary | bridge
  std::string generator = "stub";  // stub | bridge
  std::vector<std::size_t> cutoffs = default_cutoffs();
  std::string gain = "linear";
  bool aggregate_views = true;
  std::string task = "task";
  std::vector<std::string> report_metrics;  // extra metrics CSVs to average
  std::size_t association_cutoff = 10;
  ProviderConfig provider;
  ProbeConfig probe;
  PathConfig paths;

  std::filesystem::path out(const std::string& name) const {
    return std::filesystem::path(paths.output_dir) / name;
  }
};

inline io::json to_json(const RunConfig& c) {
  io::json j;
  j["seed"] = c.seed;
  j["k"] = c.k;
  j["N"] = c.n;
  j["tau"] = c.tau;
  j["k_aug"] = c.k_aug;
  j["workers"] = c.workers;
  j["strict"] = c.strict;
  j["query_cap"] = c.query_cap ? io::json(*c.query_cap) : io::json(nullptr);
  j["n_sweep"] = c.n_sweep;
  j["k_sweep"] = c.k_sweep;
  j["mode"] = c.mode;
  j["fallback_to_expansion"] = c.fallback_to_expansion;
  j["ner"] = c.ner;
  j["generator"] = c.generator;
  j["cutoffs"] = c.cutoffs;
  j["gain"] = c.gain;
  j["aggregate_views"] = c.aggregate_views;
  j["task"] = c.task;
  j["report_metrics"] = c.report_metrics;
  j["association_cutoff"] = c.association_cutoff;
  j["provider"] = {{"kind", c.provider.kind},
                   {"dim", c.provider.dim},
                   {"granularity", c.provider.granularity},
                   {"store", c.provider.store},
                   {"doc_store", c.provider.doc_store},
                   {"endpoint", c.provider.endpoint}};
  j["probe"] = {{"family", c.probe.family},
                {"alphas", c.probe.alphas},
                {"standardize", c.probe.standardize},
                {"widths", c.probe.widths},
                {"depths", c.probe.depths},
                {"dropouts", c.probe.dropouts},
                {"learning_rates", c.probe.learning_rates},
                {"batch_size", c.probe.batch_size},
                {"max_epochs", c.probe.max_epochs},
                {"patience", c.probe.patience},
                {"train_fraction", c.probe.train_fraction},
                {"validation_fraction", c.probe.validation_fraction}};
  j["paths"] = {{"corpus", c.paths.corpus},
                {"documents", c.paths.documents},
                {"queries", c.paths.queries},
                {"qrels", c.paths.qrels},
                {"kb", c.paths.kb},
                {"gazetteer", c.paths.gazetteer},
                {"prompt_template", c.paths.prompt_template},
                {"output_dir", c.paths.output_dir}};
  return j;
}

namespace detail {

template <typename T>
void take(const io::json& j, const char* key, T& field) {
  if (j.contains(key) && !j[key].is_null()) field = j[key].get<T>();
}

}  // namespace detail

/// Missing keys keep their defaults; unknown keys are rejected so typos
/// surface instead of silently running with defaults.
inline RunConfig config_from_json(const io::json& j) {
  static const std::vector<std::string> top{"seed", "k", "N", "tau", "k_aug", "workers", "strict", "query_cap",
                                            "n_sweep", "k_sweep", "mode", "fallback_to_expansion", "ner",
                                            "generator", "cutoffs", "gain", "aggregate_views", "task",
                                            "report_metrics", "association_cutoff", "provider", "probe", "paths"};
  if (!j.is_object()) fail(ErrorKind::validation, "config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (std::find(top.begin(), top.end(), key) == top.end())
      fail(ErrorKind::validation, "unknown config key '" + key + "'");
  RunConfig c;
  try {
    detail::take(j, "seed", c.seed);
    detail::take(j, "k", c.k);
    detail::take(j, "N", c.n);
    detail::take(j, "tau", c.tau);
    detail::take(j, "k_aug", c.k_aug);
    detail::take(j, "workers", c.workers);
    detail::take(j, "strict", c.strict);
    if (j.contains("query_cap") && !j["query_cap"].is_null()) c.query_cap = j["query_cap"].get<std::size_t>();
    detail::take(j, "n_sweep", c.n_sweep);
    detail::take(j, "k_sweep", c.k_sweep);
    detail::take(j, "mode", c.mode);
    detail::take(j, "fallback_to_expansion", c.fallback_to_expansion);
    detail::take(j, "ner", c.ner);
    detail::take(j, "generator", c.generator);
    detail::take(j, "cutoffs", c.cutoffs);
    detail::take(j, "gain", c.gain);
    detail::take(j, "aggregate_views", c.aggregate_views);
    detail::take(j, "task", c.task);
    detail::take(j, "report_metrics", c.report_metrics);
    detail::take(j, "association_cutoff", c.association_cutoff);
    if (j.contains("provider")) {
      const auto& p = j["provider"];
      detail::take(p, "kind", c.provider.kind);
      detail::take(p, "dim", c.provider.dim);
      detail::take(p, "granularity", c.provider.granularity);
      detail::take(p, "store", c.provider.store);
      detail::take(p, "doc_store", c.provider.doc_store);
      detail::take(p, "endpoint", c.provider.endpoint);
    }
    if (j.contains("probe")) {
      const auto& p = j["probe"];
      detail::take(p, "family", c.probe.family);
      detail::take(p, "alphas", c.probe.alphas);
      detail::take(p, "standardize", c.probe.standardize);
      detail::take(p, "widths", c.probe.widths);
      detail::take(p, "depths", c.probe.depths);
      detail::take(p, "dropouts", c.probe.dropouts);
      detail::take(p, "learning_rates", c.probe.learning_rates);
      detail::take(p, "batch_size", c.probe.batch_size);
      detail::take(p, "max_epochs", c.probe.max_epochs);
      detail::take(p, "patience", c.probe.patience);
      detail::take(p, "train_fraction", c.probe.train_fraction);
      detail::take(p, "validation_fraction", c.probe.validation_fraction);
    }
    if (j.contains("paths")) {
      const auto& p = j["paths"];
      detail::take(p, "corpus", c.paths.corpus);
      detail::take(p, "documents", c.paths.documents);
      detail::take(p, "queries", c.paths.queries);
      detail::take(p, "qrels", c.paths.qrels);
      detail::take(p, "kb", c.paths.kb);
      detail::take(p, "gazetteer", c.paths.gazetteer);
      detail::take(p, "prompt_template", c.paths.prompt_template);
      detail::take(p, "output_dir", c.paths.output_dir);
    }
  } catch (const io::json::exception& e) {
    fail(ErrorKind::validation, std::string("bad config value: ") + e.what());
  }
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  try {
    return config_from_json(io::json::parse(io::read_text(path)));
  } catch (const io::json::parse_error& e) {
    fail(ErrorKind::validation, "config " + path.string() + ": " + e.what());
  }
}

inline void validate_config(const RunConfig& c) {
  if (!(c.tau > 0.0 && c.tau < 1.0)) fail(ErrorKind::validation, "tau must lie in (0, 1)");
  if (c.k < 1) fail(ErrorKind::validation, "k must be >= 1");
  if (c.k > c.n) fail(ErrorKind::validation, "k must not exceed N");
  if (c.k_aug < 1) fail(ErrorKind::validation, "k_aug must be >= 1");
  if (c.workers < 1) fail(ErrorKind::validation, "workers must be >= 1");
  if (c.cutoffs.empty()) fail(ErrorKind::validation, "no evaluation cutoffs");
  for (auto k : c.cutoffs)
    if (k < 1) fail(ErrorKind::validation, "cutoffs must be >= 1");
  parse_augment_mode(c.mode);
  parse_gain(c.gain);
  parse_provider_kind(c.provider.kind);
  parse_granularity(c.provider.granularity);
  if (c.ner != "dictionary" && c.ner != "bridge") fail(ErrorKind::validation, "ner must be dictionary or bridge");
  if (c.generator != "stub" && c.generator != "bridge")
    fail(ErrorKind::validation, "generator must be stub or bridge");
  if (c.probe.family != "ridge" && c.probe.family != "mlp" && c.probe.family != "all")
    fail(ErrorKind::validation, "probe family must be ridge, mlp or all");
}

/// Grid implied by the probe section; baselines are always appended.
inline std::vector<ProbeSpec> probe_grid(const RunConfig& c) {
  std::vector<ProbeSpec> grid;
  if (c.probe.family == "ridge" || c.probe.family == "all") {
    for (double a : c.probe.alphas)
      for (bool st : c.probe.standardize) {
        ProbeSpec s;
        s.family = ProbeFamily::ridge;
        s.alpha = a;
        s.standardize = st;
        grid.push_back(s);
      }
  }
  if (c.probe.family == "mlp" || c.probe.family == "all") {
    for (auto w : c.probe.widths)
      for (auto d : c.probe.depths)
        for (double dr : c.probe.dropouts)
          for (double lr : c.probe.learning_rates)
            for (bool st : c.probe.standardize) {
              ProbeSpec s;
              s.family = ProbeFamily::mlp;
              s.standardize = st;
              s.mlp.hidden_width = w;
              s.mlp.depth = d;
              s.mlp.dropout = dr;
              s.mlp.learning_rate = lr;
              s.mlp.batch_size = c.probe.batch_size;
              s.mlp.max_epochs = c.probe.max_epochs;
              s.mlp.patience = c.probe.patience;
              s.mlp.standardize = st;
              s.mlp.seed = derive_seed(c.seed, "mlp-init");
              grid.push_back(s);
            }
  }
  for (auto f : {ProbeFamily::baseline_all_one, ProbeFamily::baseline_all_zero}) {
    ProbeSpec s;
    s.family = f;
    grid.push_back(s);
  }
  return grid;
}

}  // namespace argus
