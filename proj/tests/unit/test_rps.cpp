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

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "argus/rps.hpp"
#include "planted.hpp"

namespace argus {
namespace {

TEST(Ranking, PessimisticTieBreak) {
  const EmbeddingVector q({1.0, 0.0});
  std::map<std::string, EmbeddingVector> c{{"a", EmbeddingVector({1.0, 0.0})},
                                           {"m", EmbeddingVector({2.0, 0.0})},
                                           {"z", EmbeddingVector({1.0, 0.0})},
                                           {"low", EmbeddingVector({0.0, 1.0})}};
  EXPECT_EQ(rank_target(q, "m", c), 2u);  // "a" ties and sorts first
  EXPECT_EQ(rank_target(q, "a", c), 1u);
  EXPECT_EQ(rank_target(q, "z", c), 3u);
  EXPECT_EQ(rank_target(q, "low", c), 4u);
}

TEST(Ranking, MissingOrDuplicatedTarget) {
  const EmbeddingVector q({1.0, 0.0}), v({0.0, 1.0});
  std::vector<Candidate> c{{"a", &v}, {"a", &v}};
  EXPECT_THROW(rank_target(q, "b", c), Error);
  EXPECT_THROW(rank_target(q, "a", c), Error);
  EXPECT_THROW(hit_at_k(0, 1), Error);
  EXPECT_TRUE(hit_at_k(3, 3));
  EXPECT_FALSE(hit_at_k(4, 3));
}

TEST(Bands, HalfOpenBoundaries) {
  EXPECT_EQ(band_of(0.0), Band::low);
  EXPECT_EQ(band_of(0.3299), Band::low);
  EXPECT_EQ(band_of(0.33), Band::mid);
  EXPECT_EQ(band_of(0.6599), Band::mid);
  EXPECT_EQ(band_of(0.66), Band::high);
  EXPECT_EQ(band_of(1.0), Band::high);
  for (auto b : {Band::low, Band::mid, Band::high}) EXPECT_EQ(parse_band(to_string(b)), b);
}

TEST(CandidatePool, TargetFirstAndNeverANeutral) {
  const NeutralPool np{"q", {"a", "b", "c"}};
  const auto p = make_candidate_pool("t", np, 4, 1);
  EXPECT_EQ(p.candidate_ids, (std::vector<std::string>{"t", "a", "b", "c"}));
  EXPECT_THROW(make_candidate_pool("b", np, 4, 1), Error);
  EXPECT_THROW(make_candidate_pool("t", np, 5, 1), Error);
}

class Audit : public ::testing::Test {
 protected:
  testing::PlantedAudit audit = testing::make_chance_audit(5, 40, 3, 16);
  AuditOptions opts() const {
    AuditOptions o;
    o.n = 30;
    o.k = 5;
    o.seed = 9;
    return o;
  }
};

TEST_F(Audit, ScoresAreMultiplesOfOneOverQueryCount) {
  const auto res = run_audit(audit.corpus.corpus, audit.table, opts());
  ASSERT_EQ(res.size(), 40u);
  for (const auto& r : res) {
    ASSERT_EQ(r.n_queries(), 3u);
    EXPECT_GE(r.rps, 0.0);
    EXPECT_LE(r.rps, 1.0);
    const double scaled = r.rps * 3.0;
    EXPECT_NEAR(scaled, std::round(scaled), 1e-12);
    EXPECT_EQ(r.n, 30u);
  }
}

TEST_F(Audit, DeterministicAndWorkerInvariant) {
  auto o = opts();
  const auto a = run_audit(audit.corpus.corpus, audit.table, o);
  o.workers = 7;
  const auto b = run_audit(audit.corpus.corpus, audit.table, o);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].target_id, b[i].target_id);
    EXPECT_EQ(a[i].hits, b[i].hits);
  }
}

TEST_F(Audit, KEqualsNAlwaysHits) {
  auto o = opts();
  o.k = o.n;
  for (const auto& r : run_audit(audit.corpus.corpus, audit.table, o)) EXPECT_EQ(r.rps, 1.0);
}

TEST_F(Audit, QueryCapSubsamples) {
  auto o = opts();
  o.query_cap = 2;
  for (const auto& r : run_audit(audit.corpus.corpus, audit.table, o)) EXPECT_EQ(r.n_queries(), 2u);
  const auto rel = effective_related(audit.corpus.corpus.targets[0], o);
  EXPECT_EQ(rel.related_ids, effective_related(audit.corpus.corpus.targets[0], o).related_ids);
}

TEST_F(Audit, PoolsExcludeTargetAndNeighbors) {
  const auto o = opts();
  const auto& corpus = audit.corpus.corpus;
  for (const auto& rel : corpus.targets) {
    for (const auto& [qid, pool] : build_pools_for(corpus, rel, o)) {
      EXPECT_EQ(pool.candidate_ids.size(), o.n);
      EXPECT_EQ(std::count(pool.candidate_ids.begin(), pool.candidate_ids.end(), rel.target_id), 1);
      for (std::size_t i = 1; i < pool.candidate_ids.size(); ++i)
        EXPECT_TRUE(is_disjoint(corpus.at(qid), corpus.at(pool.candidate_ids[i])));
    }
  }
}

TEST_F(Audit, SweepMarksInfeasibleSizes) {
  const std::vector<std::size_t> ns{10, 30, 100000};
  const auto rows = sweep_fraction_above(audit.corpus.corpus, audit.table, ns, opts());
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_FALSE(rows[0].error);
  EXPECT_FALSE(rows[1].error);
  ASSERT_TRUE(rows[2].error);
  EXPECT_NE(rows[2].error->find("insufficient-pool"), std::string::npos);
  EXPECT_DOUBLE_EQ(rows[1].chance, 5.0 / 30.0);
  EXPECT_NE(sweep_csv(rows).find("insufficient-pool"), std::string::npos);
  const std::vector<std::size_t> empty;
  EXPECT_THROW(sweep_fraction_above(audit.corpus.corpus, audit.table, empty, opts()), Error);
}

TEST_F(Audit, KSweepIsMonotone) {
  const std::vector<std::size_t> ks{1, 5, 10, 20, 30};
  const auto rows = sweep_fraction_above_k(audit.corpus.corpus, audit.table, ks, opts());
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_GE(rows[i].mean_rps, rows[i - 1].mean_rps);
}

TEST_F(Audit, RpsFileRoundTrip) {
  const auto res = run_audit(audit.corpus.corpus, audit.table, opts());
  const auto path = std::filesystem::temp_directory_path() / "argus_rps_rt.jsonl";
  write_rps_file(path, res);
  const auto labels = read_rps_file(path);
  ASSERT_EQ(labels.size(), res.size());
  for (std::size_t i = 0; i < res.size(); ++i) {
    EXPECT_EQ(labels[i].target_id, res[i].target_id);
    EXPECT_EQ(labels[i].rps, res[i].rps);
    EXPECT_EQ(labels[i].n, 30u);
  }
  std::filesystem::remove(path);
}

TEST(RpsLabel, RejectsOutOfRange) {
  EXPECT_THROW(rps_label_from_json({{"target_id", "a"}, {"k", 1}, {"N", 2}, {"n_queries", 1}, {"rps", 1.5}}),
               Error);
  EXPECT_THROW(mean_hits({}), Error);
}

}  // namespace
}  // namespace argus
