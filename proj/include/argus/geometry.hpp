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
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "argus/embedding.hpp"
#include "argus/error.hpp"
#include "argus/io.hpp"
#include "argus/rps.hpp"

namespace argus {

struct LdaOptions {
  bool shrinkage = true;
  double shrinkage_scale = 1e-3;  // lambda = scale * trace(S_w) / h
  double shrinkage_floor = 1e-12;
};

struct ProjectedPoint {
  std::array<double, 2> xy{};
  Band band = Band::low;
};

/// Two-dimensional Fisher discriminant projection of banded embeddings.
struct LdaProjection {
  Eigen::MatrixXd basis;  // h x 2, orthonormal columns
  std::vector<std::pair<Band, std::array<double, 2>>> class_means;
  std::vector<ProjectedPoint> projected_points;
  std::array<double, 2> eigenvalues{};
  double shrinkage = 0.0;
  bool between_class_degenerate = false;

  std::array<double, 2> project(const EmbeddingVector& v) const {
    const Eigen::Map<const Eigen::VectorXd> x(v.values().data(), static_cast<Eigen::Index>(v.dim()));
    const Eigen::Vector2d p = basis.transpose() * x;
    return {p[0], p[1]};
  }
};

struct LabeledPoint {
  EmbeddingVector vector;
  Band band = Band::low;
};

/// Scatter matrices of labeled points (total-sum form, not normalized).
struct Scatter {
  Eigen::MatrixXd within;
  Eigen::MatrixXd between;
  std::vector<std::pair<Band, Eigen::VectorXd>> means;
};

inline Scatter scatter_matrices(std::span<const LabeledPoint> points) {
  const auto h = static_cast<Eigen::Index>(points.front().vector.dim());
  std::array<Eigen::VectorXd, 3> sums;
  std::array<std::size_t, 3> counts{};
  for (auto& s : sums) s = Eigen::VectorXd::Zero(h);
  Eigen::VectorXd total = Eigen::VectorXd::Zero(h);
  for (const auto& p : points) {
    if (p.vector.dim() != static_cast<std::size_t>(h)) fail(ErrorKind::dimension, "LDA points differ in dim");
    const Eigen::Map<const Eigen::VectorXd> x(p.vector.values().data(), h);
    const auto c = static_cast<std::size_t>(p.band);
    sums[c] += x;
    ++counts[c];
    total += x;
  }
  total /= static_cast<double>(points.size());

  Scatter s;
  s.within = Eigen::MatrixXd::Zero(h, h);
  s.between = Eigen::MatrixXd::Zero(h, h);
  std::array<Eigen::VectorXd, 3> means;
  for (std::size_t c = 0; c < 3; ++c) {
    if (counts[c] == 0) continue;
    means[c] = sums[c] / static_cast<double>(counts[c]);
    const Eigen::VectorXd d = means[c] - total;
    s.between += static_cast<double>(counts[c]) * d * d.transpose();
    s.means.emplace_back(static_cast<Band>(c), means[c]);
  }
  for (const auto& p : points) {
    const Eigen::Map<const Eigen::VectorXd> x(p.vector.values().data(), h);
    const Eigen::VectorXd d = x - means[static_cast<std::size_t>(p.band)];
    s.within += d * d.transpose();
  }
  return s;
}

/// Solves S_b v = mu (S_w + lambda I) v and keeps the two leading directions,
/// orthonormalized.
inline LdaProjection fit_lda(std::span<const LabeledPoint> points, LdaOptions opts = {}) {
  if (points.empty()) fail(ErrorKind::degenerate, "LDA needs points");
  std::array<bool, 3> present{};
  for (const auto& p : points) present[static_cast<std::size_t>(p.band)] = true;
  if (std::count(present.begin(), present.end(), true) < 2)
    fail(ErrorKind::degenerate, "LDA needs at least two distinct bands");
  const auto h = static_cast<Eigen::Index>(points.front().vector.dim());
  if (h < 2) fail(ErrorKind::dimension, "LDA needs dim >= 2");

  auto sc = scatter_matrices(points);
  LdaProjection out;
  Eigen::MatrixXd sw = sc.within;
  if (opts.shrinkage) {
    out.shrinkage = std::max(opts.shrinkage_scale * sw.trace() / static_cast<double>(h), opts.shrinkage_floor);
    sw.diagonal().array() += out.shrinkage;
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> check(sw, Eigen::EigenvaluesOnly);
    const double top = std::max(check.eigenvalues().maxCoeff(), 0.0);
    if (check.eigenvalues().minCoeff() <= 1e-12 * std::max(top, 1.0))
      fail(ErrorKind::singular, "within-class scatter is singular; enable shrinkage");
  }
  const double sb_trace = sc.between.trace();
  out.between_class_degenerate = sb_trace <= 1e-10 * std::max(sc.within.trace(), 1e-300) || sb_trace == 0.0;

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(sc.between, sw);
  if (ges.info() != Eigen::Success) fail(ErrorKind::singular, "generalized eigensolver failed");
  // eigenvalues ascending; take the last two
  Eigen::MatrixXd dirs(h, 2);
  dirs.col(0) = ges.eigenvectors().col(h - 1);
  dirs.col(1) = ges.eigenvectors().col(h - 2);
  out.eigenvalues = {ges.eigenvalues()[h - 1], ges.eigenvalues()[h - 2]};

  // Gram-Schmidt
  dirs.col(0).normalize();
  dirs.col(1) -= dirs.col(0).dot(dirs.col(1)) * dirs.col(0);
  if (dirs.col(1).norm() < 1e-12) {
    // pick any unit vector orthogonal to the first direction
    Eigen::Index j = 0;
    dirs.col(0).cwiseAbs().minCoeff(&j);
    dirs.col(1) = Eigen::VectorXd::Unit(h, j) - dirs.col(0)(j) * dirs.col(0);
  }
  dirs.col(1).normalize();
  out.basis = dirs;

  for (const auto& [band, mean] : sc.means) {
    const Eigen::Vector2d p = out.basis.transpose() * mean;
    out.class_means.push_back({band, {p[0], p[1]}});
  }
  out.projected_points.reserve(points.size());
  for (const auto& p : points) out.projected_points.push_back({out.project(p.vector), p.band});
  return out;
}

/// Nearest projected class mean.
inline Band classify_lda(const LdaProjection& lda, const EmbeddingVector& v) {
  const auto p = lda.project(v);
  double best = std::numeric_limits<double>::infinity();
  Band out = Band::low;
  for (const auto& [band, m] : lda.class_means) {
    const double d = (p[0] - m[0]) * (p[0] - m[0]) + (p[1] - m[1]) * (p[1] - m[1]);
    if (d < best) {
      best = d;
      out = band;
    }
  }
  return out;
}

inline std::string lda_csv(const LdaProjection& lda, std::span<const std::string> entity_ids) {
  io::CsvWriter w({"x", "y", "band", "entity_id"});
  for (std::size_t i = 0; i < lda.projected_points.size(); ++i) {
    const auto& p = lda.projected_points[i];
    w.row({io::format_double(p.xy[0]), io::format_double(p.xy[1]), std::string(to_string(p.band)),
           i < entity_ids.size() ? entity_ids[i] : std::string{}});
  }
  return w.str();
}

// ---------------------------------------------------------------------------
// Retrieved-vs-unretrieved association

struct GoldDocScores {
  std::string doc_id;
  bool retrieved = false;
  std::vector<double> entity_scores;  // predicted RPS of entities in the doc
};

/// Mean over retrieved gold docs of their max entity score minus the same
/// mean over unretrieved gold docs. Docs without entities are skipped.
inline double association_delta(std::span<const GoldDocScores> docs) {
  double sum_in = 0.0, sum_out = 0.0;
  std::size_t n_in = 0, n_out = 0;
  for (const auto& d : docs) {
    if (d.entity_scores.empty()) continue;
    const double m = *std::max_element(d.entity_scores.begin(), d.entity_scores.end());
    if (d.retrieved) {
      sum_in += m;
      ++n_in;
    } else {
      sum_out += m;
      ++n_out;
    }
  }
  if (n_in == 0 || n_out == 0)
    fail(ErrorKind::undefined_metric, "association delta needs retrieved and unretrieved gold docs");
  return sum_in / static_cast<double>(n_in) - sum_out / static_cast<double>(n_out);
}

}  // namespace argus
