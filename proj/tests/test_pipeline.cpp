#include <doctest.h>

#include <cmath>
#include <fstream>

#include "fixtures.hpp"
#include "joinsample/error.hpp"
#include "joinsample/oracle.hpp"
#include "joinsample/pipeline.hpp"

using namespace joinsample;
using namespace joinsample::testing;

namespace {

void check_passes(const SampleSet& sample, const std::string& main) {
  CHECK(sample.report.passes.at(main) == 1);
  for (const auto& [table, passes] : sample.report.passes) {
    if (table != main) CHECK(passes <= 2);
  }
}

}  // namespace

TEST_CASE("stream sampling on F1 matches the oracle distribution") {
  TempDir dir;
  JoinQuery q = make_f1(dir);
  Sampler sampler(q);
  SampleSet sample = sampler.stream_sample(100000, 17);
  EnumeratedJoin join = enumerate_join(q);
  auto r = compare_distributions(sample, join);
  CHECK(r.p_value > 1e-3);
  check_passes(sample, "AB");
  CHECK(sample.report.method == "stream");
}

TEST_CASE("uniform weights over a key join sample every row equiprobably") {
  TempDir dir;
  JoinQuery q = make_key_join(dir, 50, 3);
  q.weights = WeightSpec{};  // pure key join, unit weights
  Sampler sampler(q);
  SampleSet sample = sampler.stream_sample(50000, 21);
  EnumeratedJoin join = enumerate_join(q);
  CHECK(join.trees.size() == 50);
  auto r = compare_distributions(sample, join);
  CHECK(r.p_value > 1e-3);
}

TEST_CASE("stream sampling covers the six-table running example") {
  TempDir dir;
  JoinQuery q = make_six_table(dir);
  Sampler sampler(q);
  SampleSet sample = sampler.stream_sample(30000, 23);
  EnumeratedJoin join = enumerate_join(q);
  REQUIRE(join.trees.size() > 0);
  auto r = compare_distributions(sample, join);
  CHECK(r.p_value > 1e-3);
  check_passes(sample, "AB");
  // Semi'd CD never shows up in the output.
  for (const auto& t : sample.tables) CHECK(t != "CD");
  // Realized tree weights agree with the enumeration.
  auto indices = map_sample(sample, join);
  for (size_t i = 0; i < 200; ++i) {
    CHECK(sample.trees[i].weight ==
          doctest::Approx(join.trees[indices[i]].weight).epsilon(1e-9));
  }
}

TEST_CASE("outer fixture samples its ∅_main group at the right rate") {
  TempDir dir;
  JoinQuery q = make_outer_four(dir);
  Sampler sampler(q);
  SampleSet sample = sampler.stream_sample(50000, 29);
  EnumeratedJoin join = enumerate_join(q);
  auto r = compare_distributions(sample, join);
  CHECK(r.p_value > 1e-3);
  size_t null_mains = 0;
  for (const auto& t : sample.trees) null_mains += t.main_null;
  CHECK(null_mains > 0);
  // Realized weights agree with the enumeration, NULL bands included.
  auto indices = map_sample(sample, join);
  for (size_t i = 0; i < sample.trees.size(); i += 97) {
    CHECK(sample.trees[i].weight ==
          doctest::Approx(join.trees[indices[i]].weight).epsilon(1e-9));
  }
}

TEST_CASE("theta joins sample proportionally") {
  TempDir dir;
  JoinQuery q = make_f1(dir);
  q.edges[0].cmp = Comparison::Lt;  // AB.B < BC.B, values parse as... not numeric
  // Rebuild with numeric join values.
  q.tables[0].path = write_csv(dir.path("ta.csv"), {"A", "B", "w"},
                               {{"a1", "1", "2"}, {"a2", "3", "3"}, {"a3", "5", "5"}});
  q.tables[1].path = write_csv(dir.path("tb.csv"), {"B", "C", "w"},
                               {{"2", "c1", "7"}, {"4", "c2", "1"}, {"6", "c3", "4"}});
  Sampler sampler(q);
  SampleSet sample = sampler.stream_sample(30000, 31);
  EnumeratedJoin join = enumerate_join(q);
  // 1<{2,4,6}, 3<{4,6}, 5<{6}: six trees.
  CHECK(join.trees.size() == 6);
  auto r = compare_distributions(sample, join);
  CHECK(r.p_value > 1e-3);
}

TEST_CASE("not-equal joins sample proportionally") {
  TempDir dir;
  JoinQuery q = make_f1(dir);
  q.edges[0].cmp = Comparison::Neq;
  Sampler sampler(q);
  SampleSet sample = sampler.stream_sample(30000, 37);
  EnumeratedJoin join = enumerate_join(q);
  CHECK(join.trees.size() == 4);  // each AB row joins rows with a different B
  auto r = compare_distributions(sample, join);
  CHECK(r.p_value > 1e-3);
}

TEST_CASE("semi plans skip the filtered table's resolve scan entirely") {
  TempDir dir;
  JoinQuery q = make_f1(dir, JoinOperator::Semi);
  Sampler sampler(q);
  SampleSet sample = sampler.stream_sample(20000, 41);
  CHECK(sample.report.passes.at("BC") == 1);  // index build only
  EnumeratedJoin join = enumerate_join(q);
  auto r = compare_distributions(sample, join);
  CHECK(r.p_value > 1e-3);
}

TEST_CASE("an empty join raises ZeroTotalWeight") {
  TempDir dir;
  JoinQuery q = make_f1(dir, JoinOperator::Anti);
  Sampler sampler(q);
  try {
    sampler.stream_sample(10, 1);
    FAIL("expected ZeroTotalWeight");
  } catch (const Error& e) {
    CHECK(e.code() == "ZeroTotalWeight");
  }
}

TEST_CASE("left-outer extension resolves unmatched draws to NULL markers") {
  TempDir dir;
  JoinQuery q = make_f1(dir, JoinOperator::LeftOuter);
  q.tables[0].path = write_csv(dir.path("lo_ab.csv"), {"A", "B", "w"},
                               {{"a4", "b9", "1"}});
  Sampler sampler(q);
  SampleSet sample = sampler.stream_sample(5, 43);
  REQUIRE(sample.trees.size() == 5);
  for (const auto& t : sample.trees) {
    CHECK_FALSE(t.slots[0].is_null);
    CHECK(t.slots[1].is_null);  // the w(∅) band is the only band
  }
}

TEST_CASE("stream draws are deterministic in the seed") {
  TempDir dir;
  JoinQuery q = make_six_table(dir);
  Sampler sampler(q);
  auto a = sampler.stream_sample(500, 99);
  auto b = sampler.stream_sample(500, 99);
  auto c = sampler.stream_sample(500, 100);
  REQUIRE(a.trees.size() == b.trees.size());
  bool same = true, differs = false;
  for (size_t i = 0; i < a.trees.size(); ++i) {
    if (a.trees[i].ordinals() != b.trees[i].ordinals()) same = false;
    if (a.trees[i].ordinals() != c.trees[i].ordinals()) differs = true;
  }
  CHECK(same);
  CHECK(differs);
}

TEST_CASE("foreign-key sampler accepts everything under constant weights") {
  TempDir dir;
  JoinQuery q = make_fk_chain(dir, 400, 40, 8, "constant", 5);
  Sampler sampler(q);
  SampleSet sample = sampler.fk_economic_sample(2000, 7);
  CHECK(sample.report.acceptance_rate == doctest::Approx(1.0));
  CHECK(sample.trees.size() == 2000);
  EnumeratedJoin join = enumerate_join(q);
  auto r = compare_distributions(sample, join);
  CHECK(r.p_value > 1e-3);
}

TEST_CASE("foreign-key sampler acceptance tracks avg/max weight") {
  TempDir dir;
  JoinQuery q = make_fk_chain(dir, 2020, 40, 8, "uniform_linear", 5);
  Sampler sampler(q);
  SampleSet sample = sampler.fk_economic_sample(10000, 11);
  // Weights 0..100 uniform: acceptance = mean/max = 0.5.
  CHECK(std::fabs(sample.report.acceptance_rate - 0.5) < 0.05);
  EnumeratedJoin join = enumerate_join(q);
  auto r = compare_distributions(sample, join);
  CHECK(r.p_value > 1e-3);
}

TEST_CASE("exponential skew stalls the foreign-key sampler and falls back") {
  TempDir dir;
  JoinQuery q = make_fk_chain(dir, 2000, 40, 8, "exp_skew", 5);
  Sampler direct(q);
  CHECK_THROWS_AS(direct.fk_economic_sample(2000, 13), Error);

  RunOptions opts;
  opts.method = Method::Economic;
  Sampler sampler(q, opts);
  SampleSet sample = sampler.run(20000, 13);
  CHECK(sample.report.fallback == "stream");
  EnumeratedJoin join = enumerate_join(q);
  auto r = compare_distributions(sample, join);
  CHECK(r.p_value > 1e-3);
}

TEST_CASE("duplicate child keys violate the foreign-key contract") {
  TempDir dir;
  JoinQuery q = make_fk_chain(dir, 100, 10, 4, "constant", 5);
  // Duplicate one D1 key.
  q.tables[1].path = write_csv(dir.path("dup_d1.csv"), {"id1", "d2", "y"},
                               {{"0", "0", "d"}, {"0", "1", "d"}, {"1", "1", "d"}});
  Sampler sampler(q);
  try {
    sampler.fk_economic_sample(10, 1);
    FAIL("expected KeyViolation");
  } catch (const Error& e) {
    CHECK(e.code() == "KeyViolation");
  }
}

TEST_CASE("hashed join with a collision-free universe purges nothing") {
  TempDir dir;
  JoinQuery q = make_key_join(dir, 200, 9);
  RunOptions opts;
  opts.hashed.universe = 1ULL << 30;
  Sampler sampler(q, opts);
  SampleSet sample = sampler.hashed_join_sample(20000, 3);
  CHECK(sample.report.purge_rate == 0.0);
  EnumeratedJoin join = enumerate_join(q);
  auto r = compare_distributions(sample, join);
  CHECK(r.p_value > 1e-3);
}

TEST_CASE("hashed join under heavy collisions still samples correctly") {
  TempDir dir;
  JoinQuery q = make_key_join(dir, 300, 10);
  RunOptions opts;
  opts.hashed.universe = 1ULL << 4;  // 16 buckets for 300 keys
  opts.hashed.max_retry_rounds = 64;
  Sampler sampler(q, opts);
  SampleSet sample = sampler.hashed_join_sample(20000, 5);
  CHECK(sample.report.purge_rate > 0.5);
  CHECK(sample.report.peak_index_entries <= 16);  // memory ceiling: ≤ u per edge
  EnumeratedJoin join = enumerate_join(q);
  auto r = compare_distributions(sample, join);
  CHECK(r.p_value > 1e-3);
}

TEST_CASE("the oversampling heuristic matches its closed form") {
  CHECK(hashed_oversample_factor(1e6, 65536.0, 2.0) == doctest::Approx(30.52).epsilon(1e-3));
}

TEST_CASE("hashed joins reject non-equi plans") {
  TempDir dir;
  JoinQuery q = make_f1(dir, JoinOperator::LeftOuter);
  Sampler sampler(q);
  CHECK_THROWS_AS(sampler.hashed_join_sample(10, 1), Error);
}

TEST_CASE("simplify merges a strict foreign-key edge") {
  TempDir dir;
  JoinQuery q = make_fk_chain(dir, 300, 30, 6, "constant", 5);
  JoinQuery simplified = simplify_join_graph(q, 1.1, dir.path("tmp"));
  CHECK(simplified.tables.size() == 1);  // whole chain collapses
  // Merged table has exactly |many side| rows.
  TableStream stream(simplified.tables[0], nullptr);
  Row row;
  size_t rows = 0;
  while (stream.next(row)) ++rows;
  CHECK(rows == 300);
}

TEST_CASE("simplify rejects merges that blow up the table") {
  TempDir dir;
  // 10x blowup: every row matches ten partners.
  JoinQuery q = make_many_to_many(dir, 100, 100, 10, 6);
  JoinQuery simplified = simplify_join_graph(q, 1.1, dir.path("tmp"));
  CHECK(simplified.tables.size() == 2);
}

TEST_CASE("simplify collapses a triangle with one foreign-key edge") {
  TempDir dir;
  // A(a,b) many-to-many with B; B.c is a foreign key into C; C.a closes the cycle.
  std::vector<std::vector<std::string>> a_rows, b_rows, c_rows;
  CounterRng rng(77);
  for (int i = 0; i < 60; ++i) {
    a_rows.push_back({std::to_string(rng.next_u64() % 6), std::to_string(rng.next_u64() % 8)});
  }
  for (int i = 0; i < 40; ++i) {
    b_rows.push_back({std::to_string(rng.next_u64() % 8), std::to_string(i % 20)});
  }
  for (int i = 0; i < 20; ++i) {
    c_rows.push_back({std::to_string(i), std::to_string(rng.next_u64() % 6)});
  }
  JoinQuery q;
  TableRef a, b, c;
  a.name = "A";
  a.path = write_csv(dir.path("tri_a.csv"), {"a", "b"}, a_rows);
  a.columns = {"a", "b"};
  b.name = "B";
  b.path = write_csv(dir.path("tri_b.csv"), {"b", "c"}, b_rows);
  b.columns = {"b", "c"};
  c.name = "C";
  c.path = write_csv(dir.path("tri_c.csv"), {"c", "a"}, c_rows);
  c.columns = {"c", "a"};
  q.tables = {a, b, c};
  JoinEdge ab, bc, ca;
  ab.left = {"A", "b"};
  ab.right = {"B", "b"};
  bc.left = {"B", "c"};
  bc.right = {"C", "c"};
  ca.left = {"C", "a"};
  ca.right = {"A", "a"};
  q.edges = {ab, bc, ca};
  q.main = "A";

  // The raw query is cyclic.
  CHECK_FALSE(Sampler(q).plan().residuals.empty());

  JoinQuery simplified = simplify_join_graph(q, 1.1, dir.path("tmp2"));
  CHECK(simplified.tables.size() == 2);
  Sampler sampler(simplified);
  CHECK(sampler.plan().residuals.empty());  // parallel edges merged, acyclic now
}

TEST_CASE("cyclic rejection matches brute-force triangle enumeration") {
  TempDir dir;
  JoinQuery q = make_triangle(dir, 12, 0.4, 2025);
  Sampler sampler(q);
  REQUIRE_FALSE(sampler.plan().residuals.empty());
  SampleSet sample = sampler.cyclic_sample(20000, 3);
  EnumeratedJoin join = enumerate_join(q);
  REQUIRE(join.trees.size() > 0);
  auto r = compare_distributions(sample, join);
  CHECK(r.p_value > 1e-3);

  // Acceptance tracks the rewrite's selectivity.
  ValidatedPlan plan = sampler.plan();
  ValidatedPlan superset = plan;
  superset.residuals.clear();
  Dataset data = load_dataset(plan.tables);
  EnumeratedJoin acyclic = enumerate_join(superset, q.weights, data);
  const double selectivity = join.total_weight / acyclic.total_weight;
  CHECK(std::fabs(sample.report.acceptance_rate - selectivity) < 0.2 * selectivity);
}

TEST_CASE("graphs without triangles stall the cyclic sampler") {
  TempDir dir;
  // Edges only from smaller to larger node ids: no directed 3-cycles.
  std::vector<std::vector<std::string>> rows;
  for (int i = 0; i < 20; ++i) {
    for (int j = i + 1; j < 20; ++j) {
      if ((i + j) % 3 == 0) rows.push_back({std::to_string(i), std::to_string(j)});
    }
  }
  std::string path = write_csv(dir.path("dag.csv"), {"src", "dst"}, rows);
  JoinQuery q = make_triangle(dir, 2, 0.0, 1);
  for (auto& t : q.tables) t.path = path;
  Sampler sampler(q);
  try {
    sampler.cyclic_sample(100, 1);
    FAIL("expected AcceptanceStall");
  } catch (const Error& e) {
    CHECK(e.code() == "AcceptanceStall");
  }
}

TEST_CASE("a redundant cycle edge accepts every draw") {
  TempDir dir;
  // All join values equal: the residual predicate always holds.
  std::vector<std::vector<std::string>> rows{{"1", "1"}, {"1", "1"}};
  std::string path = write_csv(dir.path("const.csv"), {"src", "dst"}, rows);
  JoinQuery q = make_triangle(dir, 2, 0.0, 1);
  for (auto& t : q.tables) t.path = path;
  Sampler sampler(q);
  SampleSet sample = sampler.cyclic_sample(1000, 1);
  CHECK(sample.report.acceptance_rate == doctest::Approx(1.0));
}

TEST_CASE("stream sampling matches the oracle across random operator mixes") {
  int tested = 0;
  for (int id = 0; id < 30; ++id) {
    TempDir dir;
    JoinQuery q = make_random_fixture(dir, 777000, id);
    CAPTURE(id);
    Sampler sampler(q);
    EnumeratedJoin join = enumerate_join(q);
    if (join.trees.empty()) continue;  // empty joins raise ZeroTotalWeight instead
    SampleSet sample = sampler.stream_sample(20000, 9);
    auto r = compare_distributions(sample, join);
    CHECK(r.p_value > 1e-4);
    ++tested;
  }
  CHECK(tested >= 20);
}

TEST_CASE("index footprint equals the sum of distinct join values per edge") {
  TempDir dir;
  JoinQuery q = make_f1(dir);
  Sampler sampler(q);
  SampleSet sample = sampler.stream_sample(100, 1);
  CHECK(sample.report.peak_index_entries == 2);  // BC holds {b1, b2}
}

TEST_CASE("economic routes non-FK acyclic plans through the hashed sampler") {
  TempDir dir;
  JoinQuery q = make_many_to_many(dir, 80, 90, 10, 12);
  RunOptions opts;
  opts.method = Method::Economic;
  opts.hashed.max_retry_rounds = 64;
  Sampler sampler(q, opts);
  SampleSet sample = sampler.run(5000, 2);
  CHECK(sample.report.method == "hashed");
  EnumeratedJoin join = enumerate_join(q);
  auto r = compare_distributions(sample, join);
  CHECK(r.p_value > 1e-3);
}

TEST_CASE("economic on a collapsible cyclic query samples the simplified join") {
  TempDir dir;
  // Triangle whose B-C edge is a strict foreign key (same shape as the
  // simplify unit test), run end to end through the economic dispatcher.
  std::vector<std::vector<std::string>> a_rows, b_rows, c_rows;
  CounterRng rng(78);
  for (int i = 0; i < 50; ++i) {
    a_rows.push_back({std::to_string(rng.next_u64() % 6), std::to_string(rng.next_u64() % 8)});
  }
  for (int i = 0; i < 30; ++i) {
    b_rows.push_back({std::to_string(rng.next_u64() % 8), std::to_string(i % 15)});
  }
  for (int i = 0; i < 15; ++i) {
    c_rows.push_back({std::to_string(i), std::to_string(rng.next_u64() % 6)});
  }
  JoinQuery q;
  TableRef a, b, c;
  a.name = "A";
  a.path = write_csv(dir.path("ec_a.csv"), {"a", "b"}, a_rows);
  a.columns = {"a", "b"};
  b.name = "B";
  b.path = write_csv(dir.path("ec_b.csv"), {"b", "c"}, b_rows);
  b.columns = {"b", "c"};
  c.name = "C";
  c.path = write_csv(dir.path("ec_c.csv"), {"c", "a"}, c_rows);
  c.columns = {"c", "a"};
  q.tables = {a, b, c};
  JoinEdge ab, bc, ca;
  ab.left = {"A", "b"};
  ab.right = {"B", "b"};
  bc.left = {"B", "c"};
  bc.right = {"C", "c"};
  ca.left = {"C", "a"};
  ca.right = {"A", "a"};
  q.edges = {ab, bc, ca};
  q.main = "A";

  // Merging preserves the total join weight.
  JoinQuery simplified = simplify_join_graph(q, 1.1, dir.path("ec_tmp"));
  REQUIRE(simplified.tables.size() == 2);
  EnumeratedJoin original = enumerate_join(q);
  EnumeratedJoin merged = enumerate_join(simplified);
  CHECK(merged.total_weight ==
        doctest::Approx(original.total_weight).epsilon(1e-9));
  CHECK(merged.trees.size() == original.trees.size());

  if (original.trees.empty()) return;  // degenerate draw for this seed
  RunOptions opts;
  opts.method = Method::Economic;
  opts.temp_dir = dir.path("ec_tmp2");
  Sampler sampler(q, opts);
  SampleSet sample = sampler.run(5000, 3);
  CHECK(sample.trees.size() == 5000);
  CHECK(sample.report.fallback == "simplified");

  // The sample follows the simplified query's distribution, which carries the
  // same weights as the original.
  auto r = compare_distributions(sample, merged);
  CHECK(r.p_value > 1e-3);
}

TEST_CASE("select_method routes FK plans to the economic sampler") {
  TempDir dir;
  JoinQuery q = make_fk_chain(dir, 200, 20, 5, "constant", 5);
  Sampler sampler(q);
  CHECK(sampler.select_method(1000) == Method::Economic);
}

TEST_CASE("select_method routes high-cardinality joins with small n to hashed") {
  TempDir dir;
  JoinQuery q = make_key_join(dir, 120000, 8);
  // Duplicate a key so the plan is not FK-shaped.
  {
    std::ofstream out(q.tables[1].path, std::ios::app);
    out << "0,1\n";
  }
  Sampler sampler(q);
  CHECK(sampler.select_method(1000) == Method::Hashed);
  CHECK(sampler.select_method(50000) == Method::Stream);
}

TEST_CASE("run() wraps cyclic plans regardless of the requested method") {
  TempDir dir;
  JoinQuery q = make_triangle(dir, 10, 0.5, 3);
  RunOptions opts;
  opts.method = Method::Stream;
  Sampler sampler(q, opts);
  SampleSet sample = sampler.run(200, 4);
  CHECK(sample.report.method == "cyclic");
}

TEST_CASE("stream sampling rejects cyclic plans directly") {
  TempDir dir;
  JoinQuery q = make_triangle(dir, 10, 0.5, 3);
  Sampler sampler(q);
  CHECK_THROWS_AS(sampler.stream_sample(10, 1), Error);
}
