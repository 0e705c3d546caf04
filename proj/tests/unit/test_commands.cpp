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

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "argus/commands.hpp"
#include "planted.hpp"

namespace argus {
namespace {

namespace fs = std::filesystem;
using cli::run_command;

class Workdir : public ::testing::Test {
 protected:
  fs::path root;

  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    root = fs::temp_directory_path() / (std::string("argus_cmd_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(root);
    fs::create_directories(root);
  }
  void TearDown() override { fs::remove_all(root); }

  std::string path(const std::string& name) const { return (root / name).string(); }

  /// Ring of ten entities; each target's only related entity is its successor.
  void write_ring(bool with_invalid = false) {
    std::vector<RawEntity> recs;
    for (int i = 0; i < 10; ++i) {
      const auto id = "e" + std::to_string(i);
      const auto prev = "e" + std::to_string((i + 9) % 10), next = "e" + std::to_string((i + 1) % 10);
      recs.push_back({id, "Entity" + std::to_string(i), "Entity" + std::to_string(i) + " is on the ring.",
                      {prev, next}, {next}});
    }
    if (with_invalid) recs.push_back({"bad", "Bad", "  ", {}, {}});
    write_entity_corpus(path("corpus.jsonl"), recs);
  }

  RunConfig ring_config() {
    RunConfig c;
    c.seed = 3;
    c.n = 8;
    c.k = 4;
    c.provider.dim = 16;
    c.paths.corpus = path("corpus.jsonl");
    c.paths.output_dir = path("out");
    return c;
  }

  int run(const std::string& cmd, const RunConfig& c, std::string* log_out = nullptr) {
    std::ostringstream log;
    const int rc = run_command(cmd, c, log);
    if (log_out) *log_out = log.str();
    return rc;
  }
};

using Commands = Workdir;

TEST_F(Commands, AuditWritesOneRowPerTargetAndIsReproducible) {
  write_ring();
  auto c = ring_config();
  c.n_sweep = {4, 8, 64};
  c.k_sweep = {1, 4};
  ASSERT_EQ(run("audit", c), cli::kOk);
  const auto labels = read_rps_file(c.out(cli::kRpsFile));
  EXPECT_EQ(labels.size(), 10u);
  for (const auto& l : labels) {
    EXPECT_EQ(l.n, 8u);
    EXPECT_EQ(l.k, 4u);
  }
  const auto first = io::read_text(c.out(cli::kRpsFile));
  EXPECT_NE(io::read_text(c.out(cli::kSweepNFile)).find("insufficient-pool"), std::string::npos);
  EXPECT_TRUE(fs::exists(c.out(cli::kSweepKFile)));

  c.workers = 4;
  ASSERT_EQ(run("audit", c), cli::kOk);
  EXPECT_EQ(io::read_text(c.out(cli::kRpsFile)), first);
}

TEST_F(Commands, EffectiveConfigReproducesTheRun) {
  write_ring();
  auto c = ring_config();
  ASSERT_EQ(run("audit", c), cli::kOk);
  const auto first = io::read_text(c.out(cli::kRpsFile));
  auto again = load_config(c.out(cli::kConfigFile));
  EXPECT_EQ(to_json(again), to_json(c));
  again.paths.output_dir = path("out2");
  ASSERT_EQ(run("audit", again), cli::kOk);
  EXPECT_EQ(io::read_text(again.out(cli::kRpsFile)), first);
}

TEST_F(Commands, StrictModeRejectsInvalidRecords) {
  write_ring(true);
  auto c = ring_config();
  ASSERT_EQ(run("audit", c), cli::kOk);
  c.strict = true;
  std::string log;
  EXPECT_EQ(run("audit", c, &log), cli::kValidation);
  EXPECT_NE(log.find(cli::kValidationFile), std::string::npos) << log;
}

TEST_F(Commands, InvalidConfigIsAValidationError) {
  write_ring();
  auto c = ring_config();
  c.tau = 0.0;
  EXPECT_EQ(run("audit", c), cli::kValidation);
  c = ring_config();
  c.k = 9;
  EXPECT_EQ(run("audit", c), cli::kValidation);
  EXPECT_THROW(config_from_json({{"tua", 0.3}}), Error);
}

TEST_F(Commands, MissingInputsAreDependencyErrorsWithHints) {
  write_ring();
  auto c = ring_config();
  std::string log;
  EXPECT_EQ(run("train-probe", c, &log), cli::kDependency);
  EXPECT_NE(log.find("run 'argus audit' first"), std::string::npos) << log;
  c.paths.corpus = path("absent.jsonl");
  EXPECT_EQ(run("audit", c), cli::kDependency);
  EXPECT_EQ(run("evaluate", ring_config()), cli::kDependency);
}

TEST_F(Commands, AuditThenTrainProbe) {
  write_ring();
  auto c = ring_config();
  c.probe.alphas = {0.1, 1.0};
  ASSERT_EQ(run("audit", c), cli::kOk);
  ASSERT_EQ(run("train-probe", c), cli::kOk);
  const auto probe = load_probe(c.out(cli::kProbeFile));
  EXPECT_EQ(probe.family, ProbeFamily::ridge);
  EXPECT_EQ(probe.dim, 16u);
  const auto report = io::json::parse(io::read_text(c.out(cli::kProbeReportFile)));
  EXPECT_TRUE(report.contains("baseline-all-one"));
}

class Pipeline : public Workdir {
 protected:
  RunConfig setup_retrieval(double probe_value) {
    const auto audit = testing::make_planted_audit(1, 40, 2, 16);
    const auto s = testing::make_planted_retrieval(2, audit, 6, 10, 30);
    write_documents(path("docs.jsonl"), s.documents);
    write_queries(path("queries.jsonl"), s.queries);
    std::vector<std::tuple<std::string, std::string, int>> rows;
    for (const auto& q : s.qrels.query_ids())
      for (const auto& [d, g] : s.qrels.judgments(q)) rows.emplace_back(q, d, g);
    write_qrels(path("qrels.tsv"), rows);
    write_kb(path("kb.jsonl"), s.kb);
    std::string gaz;
    for (const auto& g : s.gazetteer) gaz += g + "\n";
    io::write_text(path("gazetteer.txt"), gaz);

    RunConfig c;
    c.seed = 4;
    c.provider.dim = 32;
    c.cutoffs = {5, 10};
    c.paths.documents = path("docs.jsonl");
    c.paths.queries = path("queries.jsonl");
    c.paths.qrels = path("qrels.tsv");
    c.paths.kb = path("kb.jsonl");
    c.paths.gazetteer = path("gazetteer.txt");
    c.paths.output_dir = path("out");
    fs::create_directories(c.paths.output_dir);
    ProbeModel p;
    p.family = ProbeFamily::ridge;
    p.dim = 32;
    p.ridge_weights = Eigen::VectorXd::Zero(32);
    p.ridge_intercept = probe_value;
    save_probe(c.out(cli::kProbeFile), p);
    return c;
  }
};

TEST_F(Pipeline, ExpansionChainProducesAllArtifacts) {
  auto c = setup_retrieval(0.1);
  ASSERT_EQ(run("diagnose", c), cli::kOk);
  EXPECT_EQ(io::read_ndjson(c.out(cli::kFlagsFile)).size(), 6u);
  ASSERT_EQ(run("augment", c), cli::kOk);
  const auto stats = io::json::parse(io::read_text(c.out(cli::kAugmentStatsFile)));
  EXPECT_EQ(stats["originals"], 16);
  EXPECT_EQ(stats["expansion_views"], 12);
  ASSERT_EQ(run("evaluate", c), cli::kOk);
  const auto metrics = read_metrics_csv(c.out(cli::kMetricsFile));
  EXPECT_EQ(metrics.size(), 4u);
  ASSERT_EQ(run("report", c), cli::kOk);
  EXPECT_TRUE(fs::exists(c.out(cli::kBenchmarkFile)));
  EXPECT_TRUE(fs::exists(c.out(cli::kAssociationFile)));
}

TEST_F(Pipeline, NothingFlaggedMeansNoViews) {
  auto c = setup_retrieval(0.9);
  ASSERT_EQ(run("diagnose", c), cli::kOk);
  EXPECT_TRUE(io::read_ndjson(c.out(cli::kFlagsFile)).empty());
  EXPECT_EQ(io::read_ndjson(c.out(cli::kMentionScoresFile)).size(), 6u);
  ASSERT_EQ(run("augment", c), cli::kOk);
  EXPECT_EQ(read_documents(c.out(cli::kAugmentedFile)).size(), 16u);
  ASSERT_EQ(run("evaluate", c), cli::kOk);
  for (const auto& r : io::read_csv(c.out(cli::kComparisonFile)).rows) EXPECT_EQ(io::parse_double(r[4]), 0.0);
}

TEST_F(Pipeline, SynthesisModeGivesTwoViewsPerDocument) {
  auto c = setup_retrieval(0.1);
  c.mode = "synthesis";
  ASSERT_EQ(run("diagnose", c), cli::kOk);
  ASSERT_EQ(run("augment", c), cli::kOk);
  const auto docs = read_documents(c.out(cli::kAugmentedFile));
  EXPECT_EQ(docs.size(), 32u);
  for (std::size_t i = 0; i < docs.size(); i += 2) {
    EXPECT_EQ(docs[i].source, DocSource::original);
    EXPECT_EQ(docs[i + 1].doc_id, docs[i].doc_id + "::synth");
  }
}

TEST_F(Pipeline, BridgeBackedNerAndGenerator) {
  auto c = setup_retrieval(0.1);
  c.ner = "bridge";
  c.generator = "bridge";
  c.mode = "synthesis";
  c.provider.endpoint = std::string("stdio:") + ARGUS_STUB_BRIDGE + " --dim 32";
  // The stub tags capitalized words after position 0, so lead with a lowercase word.
  auto docs = read_documents(c.paths.documents);
  for (auto& d : docs) d.text = "about " + d.text;
  write_documents(c.paths.documents, docs);
  ASSERT_EQ(run("diagnose", c), cli::kOk);
  EXPECT_FALSE(io::read_ndjson(c.out(cli::kMentionScoresFile)).empty());
  ASSERT_EQ(run("augment", c), cli::kOk);
  EXPECT_EQ(read_documents(c.out(cli::kAugmentedFile)).size(), 32u);
}

TEST_F(Pipeline, BridgeFailuresMapToExitCodes) {
  auto c = setup_retrieval(0.1);
  c.ner = "bridge";
  c.provider.endpoint = "stdio:/nonexistent/argus-bridge";
  EXPECT_EQ(run("diagnose", c), cli::kTransport);
  c.provider.endpoint = std::string("stdio:") + ARGUS_STUB_BRIDGE + " --truncate";
  EXPECT_EQ(run("diagnose", c), cli::kTransport);
  c.provider.endpoint.clear();
  ::unsetenv(bridge::kEndpointEnv);
  EXPECT_EQ(run("diagnose", c), cli::kDependency);
}

TEST(ExitCodes, Mapping) {
  EXPECT_EQ(cli::exit_code(ErrorKind::dependency), 2);
  EXPECT_EQ(cli::exit_code(ErrorKind::transport), 3);
  EXPECT_EQ(cli::exit_code(ErrorKind::protocol), 3);
  EXPECT_EQ(cli::exit_code(ErrorKind::validation), 1);
  EXPECT_EQ(cli::exit_code(ErrorKind::insufficient_pool), 1);
}

#ifdef ARGUS_CLI_BINARY
int shell_status(const std::string& cmd) {
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

TEST_F(Commands, CliBinaryExitCodes) {
  write_ring();
  const std::string bin = ARGUS_CLI_BINARY;
  const auto out = path("cli_out");
  EXPECT_EQ(shell_status(bin + " audit --corpus " + path("corpus.jsonl") + " -N 8 -k 4 --dim 16 -o " + out +
                         " 2>/dev/null"),
            0);
  EXPECT_EQ(read_rps_file(fs::path(out) / cli::kRpsFile).size(), 10u);
  EXPECT_EQ(shell_status(bin + " train-probe --corpus " + path("corpus.jsonl") + " -o " + path("empty") + " 2>/dev/null"), 2);
  EXPECT_EQ(shell_status(bin + " audit --corpus " + path("corpus.jsonl") + " --tau 2 -o " + out + " 2>/dev/null"), 1);
}
#endif

}  // namespace
}  // namespace argus
