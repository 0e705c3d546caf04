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

#include <atomic>
#include <filesystem>
#include <numeric>
#include <set>

#include "argus/io.hpp"
#include "argus/parallel.hpp"
#include "argus/random.hpp"

namespace argus {
namespace {

namespace fs = std::filesystem;

TEST(Random, DeriveSeedIsStableAndPurposeSpecific) {
  EXPECT_EQ(derive_seed(1, "pool", "x"), derive_seed(1, "pool", "x"));
  EXPECT_NE(derive_seed(1, "pool", "x"), derive_seed(1, "split", "x"));
  EXPECT_NE(derive_seed(1, "pool", "x"), derive_seed(2, "pool", "x"));
  EXPECT_NE(derive_seed(1, "pool", "x"), derive_seed(1, "pool", "y"));
}

TEST(Random, StreamsAreReproducible) {
  Rng a(9), b(9);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(a.next(), b.next());
  Rng c(9), d(9);
  for (int i = 0; i < 100; ++i) ASSERT_EQ(c.normal(), d.normal());
}

TEST(Random, IndexStaysInRangeAndCoversIt) {
  Rng r(3);
  std::set<std::size_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto v = r.index(7);
    ASSERT_LT(v, 7u);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 7u);
}

TEST(Random, ShuffleIsAPermutation) {
  std::vector<int> v(50);
  std::iota(v.begin(), v.end(), 0);
  Rng r(4);
  r.shuffle(v.begin(), v.end());
  auto s = v;
  std::sort(s.begin(), s.end());
  for (int i = 0; i < 50; ++i) EXPECT_EQ(s[static_cast<std::size_t>(i)], i);
}

TEST(Random, NormalMoments) {
  Rng r(11);
  double s = 0, s2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s / n, 0.0, 0.01);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Parallel, ResultsIndependentOfWorkerCount) {
  for (std::size_t workers : {1, 2, 8, 64}) {
    std::vector<std::size_t> out(1000);
    parallel_for(out.size(), workers, [&](std::size_t i) { out[i] = i * i; });
    for (std::size_t i = 0; i < out.size(); ++i) ASSERT_EQ(out[i], i * i);
  }
}

TEST(Parallel, RethrowsLowestIndexFailure) {
  try {
    parallel_for(100, 8, [](std::size_t i) {
      if (i == 17 || i == 60) throw std::runtime_error("fail " + std::to_string(i));
    });
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "fail 17");
  }
}

TEST(Io, CsvRoundTrip) {
  io::CsvWriter w({"a", "b"});
  w.row({"plain", "with,comma"});
  w.row({"quote \"x\"", ""});
  const auto path = fs::temp_directory_path() / "argus_io_csv.csv";
  w.save(path);
  const auto t = io::read_csv(path);
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[0][t.column("b")], "with,comma");
  EXPECT_EQ(t.rows[1][t.column("a")], "quote \"x\"");
  EXPECT_THROW(t.column("missing"), Error);
  fs::remove(path);
}

TEST(Io, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17}) EXPECT_EQ(io::parse_double(io::format_double(v)), v);
  EXPECT_EQ(io::format_double(std::numeric_limits<double>::quiet_NaN()), "nan");
}

TEST(Io, NdjsonErrorsNameTheLine) {
  const auto path = fs::temp_directory_path() / "argus_io_bad.jsonl";
  io::write_text(path, "{\"a\":1}\n{\"a\":\n");
  try {
    io::read_ndjson(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
  }
  fs::remove(path);
}

TEST(Io, MissingFileIsAnIoError) {
  try {
    io::read_text("/nonexistent/argus/file");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::io);
  }
}

}  // namespace
}  // namespace argus
