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

// Acceptance gate. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "argus/bm25.hpp"
#include "argus/commands.hpp"
#include "argus/eval.hpp"
#include "argus/probes.hpp"
#include "argus/remedy.hpp"
#include "argus/rps.hpp"
#include "planted.hpp"

namespace {

using namespace argus;
namespace at = argus::testing;

// Pinned tolerances.
constexpr std::size_t kRankingTrials = 1200;
constexpr double kRankingBudgetSeconds = 10.0;
constexpr double kChanceMean = 0.50;
constexpr double kChanceTol = 0.02;
constexpr double kMonotoneSlack = 0.03;
constexpr double kVisibleMin = 0.95;
constexpr double kBlindMax = 0.05;
constexpr double kVisibleCos = 0.9;
constexpr double kProbePearsonMin = 0.9;
constexpr double kProbeAccuracyMin = 0.9;
constexpr double kRidgeTol = 1e-6;
constexpr double kRidgeGdTol = 1e-4;
constexpr double kMlpRelTol = 1e-4;
constexpr double kFixtureTol = 1e-6;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 6) {
  std::ostringstream os;
  os.precision(prec);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------

Outcome ranking_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(20260101);
  std::size_t mismatches = 0, ties = 0;
  for (std::size_t trial = 0; trial < kRankingTrials; ++trial) {
    const std::size_t n = 2 + rng.index(49);
    const std::size_t dim = 1 + rng.index(32);
    std::vector<std::string> ids(n);
    std::vector<std::size_t> labels(n);
    std::iota(labels.begin(), labels.end(), 0);
    rng.shuffle(labels.begin(), labels.end());
    for (std::size_t i = 0; i < n; ++i) ids[i] = "c" + std::to_string(labels[i]);
    std::vector<EmbeddingVector> vecs;
    auto draw = [&] {
      for (;;) {
        std::vector<double> v(dim);
        bool nz = false;
        for (auto& x : v) {
          x = static_cast<double>(static_cast<int>(rng.index(5)) - 2);  // coarse grid, frequent ties
          nz = nz || x != 0.0;
        }
        if (nz) return EmbeddingVector(v);
      }
    };
    for (std::size_t i = 0; i < n; ++i) vecs.push_back(draw());
    const std::size_t target = rng.index(n);
    for (std::size_t i = 0; i < n; ++i)
      if (i != target && rng.uniform() < 0.2) vecs[i] = vecs[target];  // exact duplicates of the target
    const auto query = draw();

    std::vector<Candidate> cands;
    for (std::size_t i = 0; i < n; ++i) cands.push_back({ids[i], &vecs[i]});
    const auto rank = rank_target(query, ids[target], cands);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> score(n);
    for (std::size_t i = 0; i < n; ++i) score[i] = cosine(query, vecs[i]);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (score[a] != score[b]) return score[a] > score[b];
      return ids[a] < ids[b];
    });
    const auto pos = static_cast<std::size_t>(std::find(order.begin(), order.end(), target) - order.begin()) + 1;
    for (std::size_t i = 0; i < n; ++i) ties += (i != target && score[i] == score[target]) ? 1 : 0;
    mismatches += pos == rank ? 0 : 1;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {mismatches == 0 && secs < kRankingBudgetSeconds && ties > 0,
          std::to_string(kRankingTrials) + " pools, " + std::to_string(ties) + " tied candidates, " +
              std::to_string(mismatches) + " mismatches, " + fmt(secs, 3) + " s"};
}

Outcome chance_baseline() {
  const std::vector<std::size_t> ns{100, 200, 400, 800};
  double pooled = 0.0;
  std::size_t pooled_n = 0;
  bool monotone = true;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto p = at::make_chance_audit(seed);
    AuditOptions o;
    o.k = 50;
    o.seed = seed;
    o.workers = 4;
    o.n = 100;
    const auto base = run_audit(p.corpus.corpus, p.table, o);
    pooled += mean_rps(base) * static_cast<double>(base.size());
    pooled_n += base.size();
    const auto rows = sweep_fraction_above(p.corpus.corpus, p.table, ns, o);
    detail += " seed" + std::to_string(seed) + "[mean " + fmt(mean_rps(base), 4) + "; frac";
    for (std::size_t i = 0; i < rows.size(); ++i) {
      detail += " " + fmt(rows[i].fraction_above, 3);
      if (rows[i].error) monotone = false;
      if (i > 0 && rows[i].fraction_above > rows[i - 1].fraction_above + kMonotoneSlack) monotone = false;
    }
    detail += "]";
  }
  const double mean = pooled / static_cast<double>(pooled_n);
  return {std::abs(mean - kChanceMean) <= kChanceTol && monotone,
          "pooled mean RPS " + fmt(mean, 4) + ";" + detail};
}

Outcome planted_geometry() {
  const auto p = at::make_planted_audit(7);
  double min_cos = 1.0;
  for (const auto& t : p.visible)
    for (const auto& q : p.corpus.corpus.at(t).neighbor_ids)
      min_cos = std::min(min_cos, cosine(lookup(p.table, q), lookup(p.table, t)));
  AuditOptions o;
  o.n = 800;
  o.k = 50;
  o.seed = 7;
  o.workers = 4;
  const auto results = run_audit(p.corpus.corpus, p.table, o);
  std::map<std::string, double> rps;
  for (const auto& r : results) rps[r.target_id] = r.rps;
  double vis_min = 1.0, blind_max = 0.0;
  for (const auto& t : p.visible) vis_min = std::min(vis_min, rps.at(t));
  for (const auto& t : p.blind) blind_max = std::max(blind_max, rps.at(t));

  std::vector<EmbeddingVector> xs;
  std::vector<double> ys;
  for (const auto& r : results) {
    xs.push_back(lookup(p.table, r.target_id));
    ys.push_back(r.rps);
  }
  const auto X = feature_matrix(xs);
  const auto y = target_vector(ys);
  const auto split = make_split(xs.size(), 7);
  const auto grid = default_ridge_grid();
  const auto sweep = sweep_and_select(grid, X, y, split);
  const auto rep = evaluate_probe(sweep.best, take_rows(X, split.test), take_rows(y, split.test));
  const bool ok = min_cos >= kVisibleCos && vis_min >= kVisibleMin && blind_max <= kBlindMax &&
                  rep.pearson_r >= kProbePearsonMin && rep.accuracy >= kProbeAccuracyMin;
  return {ok, "visible cos min " + fmt(min_cos, 4) + ", visible RPS min " + fmt(vis_min, 4) + ", blind RPS max " +
                  fmt(blind_max, 4) + ", ridge test Pearson " + fmt(rep.pearson_r, 4) + ", band accuracy " +
                  fmt(rep.accuracy, 4) + " (n_test " + std::to_string(split.test.size()) + ")"};
}

Outcome ridge_oracle() {
  Rng rng(424242);
  double worst = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const auto n = static_cast<Eigen::Index>(3 + rng.index(38));
    const auto d = static_cast<Eigen::Index>(1 + rng.index(20));
    const double alpha = std::pow(10.0, rng.uniform(-3.0, 1.0));
    Eigen::MatrixXd X(n, d);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < n; ++i) y[i] = rng.uniform();
    const auto m = fit_ridge(X, y, alpha, false);
    Eigen::MatrixXd A(n, d + 1);
    A << X, Eigen::VectorXd::Ones(n);
    Eigen::MatrixXd P = Eigen::MatrixXd::Identity(d + 1, d + 1) * alpha;
    P(d, d) = 0.0;
    const Eigen::VectorXd theta = (A.transpose() * A + P).fullPivLu().solve(A.transpose() * y);
    worst = std::max(worst, (m.ridge_weights - theta.head(d)).cwiseAbs().maxCoeff());
    worst = std::max(worst, std::abs(m.ridge_intercept - theta[d]));
  }
  // Gradient descent on the same objective.
  double gd_worst = 0.0;
  for (int inst = 0; inst < 10; ++inst) {
    const Eigen::Index n = 40, d = 5;
    const double alpha = 0.5;
    Eigen::MatrixXd X(n, d);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < n; ++i) y[i] = rng.uniform();
    const auto m = fit_ridge(X, y, alpha, false);
    Eigen::MatrixXd A(n, d + 1);
    A << X, Eigen::VectorXd::Ones(n);
    Eigen::MatrixXd H = A.transpose() * A;
    H.diagonal().head(d).array() += alpha;
    const double L = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H).eigenvalues().maxCoeff();
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(d + 1);
    for (int it = 0; it < 200000; ++it) {
      Eigen::VectorXd g = A.transpose() * (A * theta - y);
      g.head(d) += alpha * theta.head(d);
      if (g.norm() < 1e-12) break;
      theta -= g / L;
    }
    gd_worst = std::max(gd_worst, (m.ridge_weights - theta.head(d)).cwiseAbs().maxCoeff());
    gd_worst = std::max(gd_worst, std::abs(m.ridge_intercept - theta[d]));
  }
  return {worst <= kRidgeTol && gd_worst <= kRidgeGdTol,
          "normal-equation max abs diff " + fmt(worst, 3) + " over 50 instances; gradient descent max abs diff " +
              fmt(gd_worst, 3)};
}

Outcome mlp_gradient() {
  Rng rng(99);
  double worst = 0.0;
  for (int cfg = 0; cfg < 10; ++cfg) {
    const std::size_t in = 2 + rng.index(5), width = 2 + rng.index(7), depth = 1 + rng.index(3);
    const auto n = static_cast<Eigen::Index>(3 + rng.index(8));
    auto p = init_mlp(in, width, depth, rng);
    for (auto& l : p.layers)
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = rng.normal(0.0, 0.1);
    Eigen::MatrixXd X(n, static_cast<Eigen::Index>(in));
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < n; ++i) y[i] = rng.uniform();
    const auto g = mlp_loss_gradient(p, X, y);
    const double h = 1e-5;
    auto loss_at = [&](const MlpParams& q) { return mlp_loss_gradient(q, X, y).loss; };
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      auto check = [&](double* slot, double analytic) {
        const double orig = *slot;
        *slot = orig + h;
        const double up = loss_at(p);
        *slot = orig - h;
        const double down = loss_at(p);
        *slot = orig;
        const double fd = (up - down) / (2 * h);
        const double rel = std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-6});
        worst = std::max(worst, rel);
      };
      auto& W = p.layers[l].weights;
      for (Eigen::Index i = 0; i < W.size(); ++i) check(W.data() + i, g.grads[l].weights.data()[i]);
      auto& b = p.layers[l].bias;
      for (Eigen::Index i = 0; i < b.size(); ++i) check(b.data() + i, g.grads[l].bias[i]);
    }
  }
  return {worst < kMlpRelTol, "max relative error " + fmt(worst, 3) + " over 10 configurations"};
}

Outcome baseline_prevalence() {
  Rng rng(5);
  std::vector<double> truth(137);
  for (auto& t : truth) t = rng.uniform();
  std::array<std::size_t, 3> counts{};
  for (double t : truth) ++counts[static_cast<std::size_t>(band_of(t))];
  const double n = static_cast<double>(truth.size());
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(static_cast<Eigen::Index>(truth.size()), 4);
  const auto y = target_vector(truth);
  const auto zero = evaluate_probe(make_baseline(ProbeFamily::baseline_all_zero, 4), X, y);
  const auto one = evaluate_probe(make_baseline(ProbeFamily::baseline_all_one, 4), X, y);
  const double low = static_cast<double>(counts[0]) / n, high = static_cast<double>(counts[2]) / n;
  return {zero.accuracy == low && one.accuracy == high,
          "all-zero " + fmt(zero.accuracy) + " vs low prevalence " + fmt(low) + ", all-one " + fmt(one.accuracy) +
              " vs high prevalence " + fmt(high)};
}

Outcome bm25_fixture() {
  const Bm25Index idx({{"p1", "the cat sat on the mat"}, {"p2", "the dog chased the cat"},
                       {"p3", "birds fly over the river bank"}});
  const std::vector<std::pair<std::string, std::vector<double>>> expected{
      {"cat", {0.457883191815, 0.496277124048, 0.0}},
      {"the cat", {0.645102463949, 0.694533340172, 0.130087889663}},
      {"river", {0.0, 0.0, 0.955535661960}},
      {"dog mat", {0.955535661960, 1.035658217466, 0.0}}};
  double worst = 0.0;
  for (const auto& [q, want] : expected) {
    const auto got = idx.score_all(q);
    for (std::size_t i = 0; i < want.size(); ++i) worst = std::max(worst, std::abs(got[i] - want[i]));
  }
  return {worst <= kFixtureTol, "max abs diff " + fmt(worst, 3) + " over 4 queries x 3 passages"};
}

Outcome ndcg_fixtures() {
  Qrels q;
  q.add("a", "r", 1);
  q.add("b", "r1", 1);
  q.add("b", "r2", 1);
  const std::vector<RankedDoc> first{{"r", 0.9}, {"x", 0.5}, {"y", 0.4}};
  const std::vector<RankedDoc> second{{"x", 0.9}, {"r", 0.5}, {"y", 0.4}, {"z", 0.3}, {"w", 0.2}};
  const std::vector<RankedDoc> third{{"r1", 0.9}, {"x", 0.5}, {"r2", 0.4}, {"y", 0.3}, {"z", 0.2}};
  const double v1 = ndcg_at_k(first, q, "a", 5), v2 = ndcg_at_k(second, q, "a", 5), v3 = ndcg_at_k(third, q, "b", 5);
  double worst = std::max({std::abs(v1 - 1.0), std::abs(v2 - 0.630929753571458), std::abs(v3 - 0.919720789148188)});

  Rng rng(31337);
  double ideal_worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Qrels r;
    const std::size_t docs = 1 + rng.index(30);
    std::vector<std::pair<std::string, int>> judged;
    for (std::size_t d = 0; d < docs; ++d) {
      int g = static_cast<int>(rng.index(4));
      if (d == 0 && g == 0) g = 1;
      judged.push_back({"d" + std::to_string(d), g});
      r.add("q", judged.back().first, g);
    }
    std::sort(judged.begin(), judged.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<RankedDoc> ranked;
    for (std::size_t i = 0; i < judged.size(); ++i) ranked.push_back({judged[i].first, 1.0 - 0.001 * static_cast<double>(i)});
    const std::size_t k = 1 + rng.index(20);
    ideal_worst = std::max(ideal_worst, std::abs(ndcg_at_k(ranked, r, "q", k) - 1.0));
  }
  return {worst <= kFixtureTol && ideal_worst == 0.0,
          "fixtures " + fmt(v1, 10) + " " + fmt(v2, 10) + " " + fmt(v3, 10) + "; ideal ordering max deviation " +
              fmt(ideal_worst, 3) + " over 100 qrels"};
}

Outcome planted_end_to_end() {
  bool ok = true;
  std::string detail;
  for (std::uint64_t seed : {11, 12, 13}) {
    const auto audit = at::make_planted_audit(seed);
    AuditOptions o;
    o.seed = seed;
    o.workers = 4;
    const auto results = run_audit(audit.corpus.corpus, audit.table, o);
    std::vector<EmbeddingVector> xs;
    std::vector<double> ys;
    for (const auto& r : results) {
      xs.push_back(lookup(audit.table, r.target_id));
      ys.push_back(r.rps);
    }
    const auto X = feature_matrix(xs);
    const auto y = target_vector(ys);
    const auto grid = default_ridge_grid();
    const auto probe = sweep_and_select(grid, X, y, make_split(xs.size(), seed)).best;

    const auto sc = at::make_planted_retrieval(seed, audit);
    const at::PlantedMentionProvider provider(32, derive_seed(seed, "words"), sc.mention_vectors);
    const DictionaryTagger ner(sc.gazetteer);
    const Bm25Index kb(sc.kb);

    auto run_with = [&](double tau, std::size_t& views, bool& counts_ok) {
      std::unordered_map<std::string, std::vector<FlaggedEntity>> flags;
      for (const auto& d : sc.documents) {
        auto f = diagnose(d, extract_mentions(ner, d), provider, probe, tau);
        if (!f.empty()) flags[d.doc_id] = std::move(f);
      }
      AugmentOptions ao;
      ao.k_aug = 2;
      const auto augmented = augment_corpus(sc.documents, flags, kb, nullptr, ao);
      std::map<std::string, std::size_t> per_doc;
      std::vector<Document> docs;
      for (const auto& v : augmented) {
        ++per_doc[v.document.root_id()];
        docs.push_back(v.document);
      }
      counts_ok = true;
      for (const auto& d : sc.documents) {
        const auto it = flags.find(d.doc_id);
        const std::size_t nd = it == flags.end() ? 0 : it->second.size();
        if (per_doc[d.doc_id] != 1 + ao.k_aug * nd) counts_ok = false;
      }
      views = docs.size();
      const auto index = build_view_index(docs, provider);
      auto run = run_retrieval(sc.queries, index, provider, 50);
      run.task = "planted";
      evaluate_run(run, sc.qrels, default_cutoffs());
      return run;
    };
    std::size_t base_views = 0, ctrl_views = 0, views = 0;
    bool base_counts = false, ctrl_counts = false, counts = false;
    // Original index: no views at all.
    auto base = [&] {
      const auto index = build_view_index(sc.documents, provider);
      auto r = run_retrieval(sc.queries, index, provider, 50);
      r.task = "planted";
      evaluate_run(r, sc.qrels, default_cutoffs());
      base_views = sc.documents.size();
      base_counts = true;
      return r;
    }();
    const auto control = run_with(0.0, ctrl_views, ctrl_counts);
    const auto treated = run_with(kDefaultTau, views, counts);
    const auto deltas = compare_runs(base, treated, default_cutoffs());
    double d5 = 0.0;
    for (const auto& d : deltas)
      if (d.cutoff == 5) d5 = d.delta;
    bool control_same = ctrl_views == base_views;
    for (auto k : default_cutoffs()) control_same = control_same && control.ndcg.at(k) == base.ndcg.at(k);
    const bool seed_ok = d5 > 0.0 && control_same && counts && ctrl_counts && base_counts;
    ok = ok && seed_ok;
    detail += " seed" + std::to_string(seed) + "[nDCG@5 " + fmt(base.ndcg.at(5), 4) + "->" +
              fmt(treated.ndcg.at(5), 4) + ", views " + std::to_string(base_views) + "->" + std::to_string(views) +
              ", tau=0 " + (control_same ? "unchanged" : "CHANGED") + ", view counts " + (counts ? "ok" : "BAD") + "]";
  }
  return {ok, detail.substr(1)};
}

Outcome audit_workers() {
  namespace fs = std::filesystem;
  const auto root = fs::temp_directory_path() / "argus_acceptance_workers";
  fs::remove_all(root);
  const auto corpus_path = root / "corpus.jsonl";
  write_entity_corpus(corpus_path, at::star_records(40, 4));
  std::vector<std::string> files{cli::kRpsFile, cli::kValidationFile, cli::kSweepNFile, cli::kSweepKFile};
  std::map<std::size_t, std::vector<std::string>> out;
  std::ostringstream log;
  for (std::size_t workers : {1, 8}) {
    RunConfig c;
    c.seed = 3;
    c.n = 100;
    c.k = 10;
    c.workers = workers;
    c.n_sweep = {20, 50, 100, 150};
    c.k_sweep = {5, 10, 20};
    c.provider.dim = 16;
    c.paths.corpus = corpus_path.string();
    c.paths.output_dir = (root / ("w" + std::to_string(workers))).string();
    if (cli::run_command("audit", c, log) != cli::kOk) return {false, "audit failed: " + log.str()};
    for (const auto& f : files) out[workers].push_back(io::read_text(c.out(f)));
  }
  std::size_t identical = 0;
  for (std::size_t i = 0; i < files.size(); ++i) identical += out[1][i] == out[8][i] ? 1 : 0;
  fs::remove_all(root);
  return {identical == files.size(), std::to_string(identical) + "/" + std::to_string(files.size()) +
                                         " payload files byte-identical between 1 and 8 workers"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"ranking-oracle", ranking_oracle},
      {"chance-baseline", chance_baseline},
      {"planted-geometry", planted_geometry},
      {"ridge-closed-form", ridge_oracle},
      {"mlp-gradient", mlp_gradient},
      {"baseline-prevalence", baseline_prevalence},
      {"bm25-fixture", bm25_fixture},
      {"ndcg-fixtures", ndcg_fixtures},
      {"planted-end-to-end", planted_end_to_end},
      {"audit-worker-invariance", audit_workers},
  };
  std::size_t passed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    passed += o.pass ? 1 : 0;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << "acceptance: " << passed << "/" << criteria.size() << " passed" << std::endl;
  return passed == criteria.size() ? 0 : 1;
}
