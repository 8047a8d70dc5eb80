#include "fixtures.hpp"

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "joinsample/error.hpp"

namespace joinsample::testing {

namespace fs = std::filesystem;

TempDir::TempDir() {
  static std::atomic<uint64_t> counter{0};
  auto base = fs::temp_directory_path() / "joinsample-tests";
  fs::create_directories(base);
  root_ = (base / (std::to_string(::getpid()) + "-" +
                   std::to_string(counter.fetch_add(1)) + "-" +
                   std::to_string(std::random_device{}())))
              .string();
  fs::create_directories(root_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(root_, ec);
}

std::string TempDir::path(const std::string& name) const {
  return (fs::path(root_) / name).string();
}

std::string write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::binary);
  for (size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << "\n";
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
  return path;
}

namespace {

TableRef table(const std::string& name, const std::string& path,
               std::vector<std::string> columns, double null_weight = 1.0) {
  TableRef t;
  t.name = name;
  t.path = path;
  t.columns = std::move(columns);
  t.null_weight = null_weight;
  return t;
}

JoinEdge edge(const std::string& lt, const std::string& lc, const std::string& rt,
              const std::string& rc, JoinOperator op = JoinOperator::Inner,
              Comparison cmp = Comparison::Eq) {
  JoinEdge e;
  e.left = {lt, lc};
  e.right = {rt, rc};
  e.op = op;
  e.cmp = cmp;
  return e;
}

}  // namespace

JoinQuery make_f1(const TempDir& dir, JoinOperator op) {
  JoinQuery q;
  q.tables.push_back(table("AB", write_csv(dir.path("f1_ab.csv"), {"A", "B", "w"},
                                           {{"a1", "b1", "2"},
                                            {"a2", "b1", "3"},
                                            {"a3", "b2", "5"}}),
                           {"A", "B", "w"}));
  q.tables.push_back(table("BC", write_csv(dir.path("f1_bc.csv"), {"B", "C", "w"},
                                           {{"b1", "c1", "7"},
                                            {"b1", "c2", "1"},
                                            {"b2", "c1", "4"}}),
                           {"B", "C", "w"}));
  q.edges.push_back(edge("AB", "B", "BC", "B", op));
  q.main = "AB";
  q.weights.set("AB", "w", WeightIdentity{});
  q.weights.set("BC", "w", WeightIdentity{});
  q.sample_size = 5;
  q.seed = 1;
  q.method = Method::Stream;
  return q;
}

namespace {

void write_six_table_files(const TempDir& dir, bool with_appendage,
                           std::vector<TableRef>& tables) {
  tables.push_back(table("AB", write_csv(dir.path("six_ab.csv"), {"A", "B", "w"},
                                         {{"a1", "b1", "2"},
                                          {"a1", "b2", "3"},
                                          {"a3", "b3", "5"},
                                          {"a2", "b4", "1"},
                                          {"a4", "b9", "4"}}),
                         {"A", "B", "w"}, 1.0));
  tables.push_back(table("FA", write_csv(dir.path("six_fa.csv"), {"F", "A", "w"},
                                         {{"f1", "a1", "1"},
                                          {"f2", "a2", "2"},
                                          {"f3", "a2", "1"},
                                          {"f4", "a4", "3"},
                                          {"f5", "a9", "2"}}),
                         {"F", "A", "w"}, 2.0));
  tables.push_back(table("BC", write_csv(dir.path("six_bc.csv"), {"B", "C", "w"},
                                         {{"b1", "c1", "7"},
                                          {"b2", "c1", "1"},
                                          {"b3", "c2", "4"},
                                          {"b4", "c3", "2"},
                                          {"b8", "c9", "5"},
                                          {"b7", "c2", "3"}}),
                         {"B", "C", "w"}, 1.5));
  tables.push_back(table("CD", write_csv(dir.path("six_cd.csv"), {"C", "D", "w"},
                                         {{"c1", "d1", "1"},
                                          {"c2", "d2", "3"},
                                          {"c2", "d3", "2"}}),
                         {"C", "D", "w"}, 1.0));
  if (with_appendage) {
    tables.push_back(table("BG", write_csv(dir.path("six_bg.csv"), {"B", "G", "w"},
                                           {{"b1", "g1", "1"},
                                            {"b2", "g1", "2"},
                                            {"b3", "g2", "1"},
                                            {"b4", "g2", "1"},
                                            {"b9", "g1", "2"}}),
                           {"B", "G", "w"}, 1.0));
    tables.push_back(table("GH", write_csv(dir.path("six_gh.csv"), {"G", "H", "w"},
                                           {{"g1", "h1", "1"}, {"g2", "h2", "4"}}),
                           {"G", "H", "w"}, 1.0));
  }
}

}  // namespace

JoinQuery make_six_table(const TempDir& dir) {
  JoinQuery q;
  write_six_table_files(dir, true, q.tables);
  q.edges.push_back(edge("FA", "A", "AB", "A", JoinOperator::FullOuter));
  q.edges.push_back(edge("AB", "B", "BC", "B", JoinOperator::RightOuter));
  q.edges.push_back(edge("BC", "C", "CD", "C", JoinOperator::Semi));
  q.edges.push_back(edge("AB", "B", "BG", "B", JoinOperator::Inner));
  q.edges.push_back(edge("BG", "G", "GH", "G", JoinOperator::Inner));
  q.main = "AB";
  for (const char* t : {"AB", "FA", "BC", "CD", "BG", "GH"}) {
    q.weights.set(t, "w", WeightIdentity{});
  }
  q.sample_size = 100;
  q.seed = 7;
  q.method = Method::Stream;
  return q;
}

JoinQuery make_outer_four(const TempDir& dir) {
  JoinQuery q;
  write_six_table_files(dir, false, q.tables);
  q.edges.push_back(edge("FA", "A", "AB", "A", JoinOperator::FullOuter));
  q.edges.push_back(edge("AB", "B", "BC", "B", JoinOperator::RightOuter));
  q.edges.push_back(edge("BC", "C", "CD", "C", JoinOperator::Semi));
  q.main = "AB";
  for (const char* t : {"AB", "FA", "BC", "CD"}) {
    q.weights.set(t, "w", WeightIdentity{});
  }
  q.sample_size = 100;
  q.seed = 7;
  q.method = Method::Stream;
  return q;
}

JoinQuery make_many_to_many(const TempDir& dir, size_t left_rows, size_t right_rows,
                            size_t domain, uint64_t seed) {
  CounterRng rng(seed);
  std::vector<std::vector<std::string>> left, right;
  for (size_t i = 0; i < left_rows; ++i) {
    left.push_back({"r" + std::to_string(i), std::to_string(rng.next_u64() % domain),
                    std::to_string(1 + rng.next_u64() % 4)});
  }
  for (size_t i = 0; i < right_rows; ++i) {
    right.push_back({std::to_string(rng.next_u64() % domain), "s" + std::to_string(i),
                     std::to_string(1 + rng.next_u64() % 3)});
  }
  JoinQuery q;
  q.tables.push_back(table("R", write_csv(dir.path("mm_r.csv"), {"a", "b", "w"}, left),
                           {"a", "b", "w"}));
  q.tables.push_back(table("S", write_csv(dir.path("mm_s.csv"), {"b", "c", "w"}, right),
                           {"b", "c", "w"}));
  q.edges.push_back(edge("R", "b", "S", "b"));
  q.main = "R";
  q.weights.set("R", "w", WeightIdentity{});
  q.weights.set("S", "w", WeightIdentity{});
  q.sample_size = 100;
  q.seed = seed;
  q.method = Method::Stream;
  return q;
}

JoinQuery make_key_join(const TempDir& dir, size_t rows, uint64_t seed) {
  CounterRng rng(seed);
  std::vector<std::vector<std::string>> left, right;
  for (size_t i = 0; i < rows; ++i) {
    left.push_back({std::to_string(i), std::to_string(1 + rng.next_u64() % 4)});
    right.push_back({std::to_string(i), std::to_string(1 + rng.next_u64() % 3)});
  }
  JoinQuery q;
  q.tables.push_back(table("R", write_csv(dir.path("kj_r.csv"), {"k", "w"}, left),
                           {"k", "w"}));
  q.tables.push_back(table("S", write_csv(dir.path("kj_s.csv"), {"k", "w"}, right),
                           {"k", "w"}));
  q.edges.push_back(edge("R", "k", "S", "k"));
  q.main = "R";
  q.weights.set("R", "w", WeightIdentity{});
  q.weights.set("S", "w", WeightIdentity{});
  q.sample_size = 100;
  q.seed = seed;
  q.method = Method::Stream;
  return q;
}

JoinQuery make_fk_chain(const TempDir& dir, size_t rows, size_t dim1, size_t dim2,
                        const std::string& main_weight_kind, uint64_t seed) {
  CounterRng rng(seed);
  std::vector<std::vector<std::string>> main_rows, d1_rows, d2_rows;
  for (size_t i = 0; i < rows; ++i) {
    std::string x;
    if (main_weight_kind == "uniform_linear") {
      x = std::to_string(i % 101);  // 0..100: mean 50, max 100
    } else if (main_weight_kind == "exp_skew") {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.9g",
                    std::pow(2.0, -static_cast<double>(i % 2000) / 10.0));
      x = buf;
    } else {
      x = "1";
    }
    main_rows.push_back({"m" + std::to_string(i), std::to_string(rng.next_u64() % dim1), x});
  }
  for (size_t i = 0; i < dim1; ++i) {
    d1_rows.push_back({std::to_string(i), std::to_string(i % dim2),
                       "d" + std::to_string(i)});
  }
  for (size_t i = 0; i < dim2; ++i) {
    d2_rows.push_back({std::to_string(i), "z" + std::to_string(i)});
  }
  JoinQuery q;
  q.tables.push_back(table("M", write_csv(dir.path("fk_m.csv"), {"id", "d1", "x"}, main_rows),
                           {"id", "d1", "x"}));
  q.tables.push_back(table("D1", write_csv(dir.path("fk_d1.csv"), {"id1", "d2", "y"}, d1_rows),
                           {"id1", "d2", "y"}));
  q.tables.push_back(table("D2", write_csv(dir.path("fk_d2.csv"), {"id2", "z"}, d2_rows),
                           {"id2", "z"}));
  q.edges.push_back(edge("M", "d1", "D1", "id1"));
  q.edges.push_back(edge("D1", "d2", "D2", "id2"));
  q.main = "M";
  q.weights.set("M", "x", WeightIdentity{});
  q.sample_size = 100;
  q.seed = seed;
  q.method = Method::Economic;
  return q;
}

JoinQuery make_triangle(const TempDir& dir, size_t nodes, double edge_prob, uint64_t seed) {
  CounterRng rng(seed);
  std::vector<std::vector<std::string>> edges_rows;
  for (size_t i = 0; i < nodes; ++i) {
    for (size_t j = 0; j < nodes; ++j) {
      if (i == j) continue;
      if (rng.next_unit() < edge_prob) {
        edges_rows.push_back({std::to_string(i), std::to_string(j)});
      }
    }
  }
  std::string path = write_csv(dir.path("tri_edges.csv"), {"src", "dst"}, edges_rows);
  JoinQuery q;
  q.tables.push_back(table("E1", path, {"src", "dst"}));
  q.tables.push_back(table("E2", path, {"src", "dst"}));
  q.tables.push_back(table("E3", path, {"src", "dst"}));
  q.edges.push_back(edge("E1", "dst", "E2", "src"));
  q.edges.push_back(edge("E2", "dst", "E3", "src"));
  q.edges.push_back(edge("E3", "dst", "E1", "src"));
  q.main = "E1";
  q.sample_size = 100;
  q.seed = seed;
  q.method = Method::Stream;
  return q;
}

JoinQuery make_random_fixture(const TempDir& dir, uint64_t seed, int id) {
  CounterRng rng(CounterRng(seed).fork(static_cast<uint64_t>(id)).next_u64());
  const int n_tables = 2 + static_cast<int>(rng.next_u64() % 5);

  struct Spec {
    int parent = -1;
    JoinOperator op = JoinOperator::Inner;
    Comparison cmp = Comparison::Eq;
  };
  std::vector<Spec> specs(static_cast<size_t>(n_tables));
  for (int i = 1; i < n_tables; ++i) {
    Spec& s = specs[static_cast<size_t>(i)];
    s.parent = static_cast<int>(rng.next_u64() % static_cast<uint64_t>(i));
    const uint64_t pick = rng.next_u64() % 100;
    if (pick < 40) {
      s.op = JoinOperator::Inner;
    } else if (pick < 52) {
      s.op = JoinOperator::LeftOuter;
    } else if (pick < 64) {
      s.op = JoinOperator::RightOuter;
    } else if (pick < 72) {
      s.op = JoinOperator::FullOuter;
    } else if (pick < 80) {
      s.op = JoinOperator::Semi;
    } else if (pick < 86) {
      s.op = JoinOperator::Anti;
    } else if (pick < 94) {
      s.op = JoinOperator::Inner;
      const Comparison thetas[] = {Comparison::Lt, Comparison::Le, Comparison::Ge,
                                   Comparison::Gt};
      s.cmp = thetas[rng.next_u64() % 4];
    } else {
      s.op = JoinOperator::Inner;
      s.cmp = Comparison::Neq;
    }
  }

  // Columns per table: one key column per incident edge plus a weight column.
  // Keys are small integers; 5% of join cells are NULL.
  JoinQuery q;
  std::vector<std::vector<std::string>> headers(static_cast<size_t>(n_tables));
  for (int i = 0; i < n_tables; ++i) {
    headers[static_cast<size_t>(i)].push_back("w");
    if (i > 0) headers[static_cast<size_t>(i)].push_back("pk");  // join to parent
    for (int j = 1; j < n_tables; ++j) {
      if (specs[static_cast<size_t>(j)].parent == i) {
        headers[static_cast<size_t>(i)].push_back("c" + std::to_string(j));
      }
    }
  }

  const char* weight_values[] = {"0", "0.3", "1", "2", "7.5"};
  for (int i = 0; i < n_tables; ++i) {
    const bool constrained = i > 0 && specs[static_cast<size_t>(i)].cmp != Comparison::Eq;
    // Ordered/≠ children stay small (their fanout is a whole value range);
    // the value domain scales with the row count to keep join sizes sane.
    const size_t rows = constrained ? 4 + rng.next_u64() % 8 : 5 + rng.next_u64() % 80;
    const uint64_t domain = 3 + static_cast<uint64_t>(rows) / 3;
    std::vector<std::vector<std::string>> data;
    for (size_t r = 0; r < rows; ++r) {
      std::vector<std::string> row;
      for (const auto& col : headers[static_cast<size_t>(i)]) {
        if (col == "w") {
          row.push_back(weight_values[rng.next_u64() % 5]);
        } else if (rng.next_unit() < 0.05) {
          row.push_back("");  // NULL join cell
        } else {
          row.push_back(std::to_string(1 + rng.next_u64() % domain));
        }
      }
      data.push_back(std::move(row));
    }
    std::string name = "T" + std::to_string(i);
    double null_w;
    const double null_choices[] = {0.0, 0.5, 1.0, 2.0};
    null_w = null_choices[rng.next_u64() % 4];
    q.tables.push_back(table(name,
                             write_csv(dir.path("rf" + std::to_string(id) + "_" + name + ".csv"),
                                       headers[static_cast<size_t>(i)],
                                       data),
                             headers[static_cast<size_t>(i)], null_w));
    if (rng.next_unit() < 0.8) q.weights.set(name, "w", WeightIdentity{});
  }
  for (int i = 1; i < n_tables; ++i) {
    const Spec& s = specs[static_cast<size_t>(i)];
    q.edges.push_back(edge("T" + std::to_string(s.parent), "c" + std::to_string(i),
                           "T" + std::to_string(i), "pk", s.op, s.cmp));
  }
  q.main = "T0";
  q.sample_size = 10;
  q.seed = seed;
  q.method = Method::Stream;
  return q;
}

std::string write_query_spec(const TempDir& dir, const JoinQuery& query,
                             const std::string& name) {
  nlohmann::json doc;
  for (const auto& t : query.tables) {
    nlohmann::json jt;
    jt["name"] = t.name;
    jt["path"] = t.path;
    jt["columns"] = t.columns;
    jt["null_weight"] = t.null_weight;
    jt["delimiter"] = std::string(1, t.delimiter);
    doc["tables"].push_back(jt);
  }
  doc["joins"] = nlohmann::json::array();
  for (const auto& e : query.edges) {
    nlohmann::json je;
    je["left"] = e.left.qualified();
    je["right"] = e.right.qualified();
    je["op"] = to_string(e.op);
    je["cmp"] = to_string(e.cmp);
    doc["joins"].push_back(je);
  }
  doc["main"] = query.main;
  doc["weights"] = nlohmann::json::object();
  for (const auto& [key, expr] : query.weights.exprs) {
    nlohmann::json je;
    if (const auto* c = std::get_if<WeightConstant>(&expr)) {
      je["constant"] = c->value;
    } else if (std::get_if<WeightIdentity>(&expr)) {
      je["identity"] = true;
    } else if (const auto* l = std::get_if<WeightLinear>(&expr)) {
      je["linear"] = {l->a, l->b};
    } else if (const auto* p = std::get_if<WeightPower>(&expr)) {
      je["power"] = p->base;
      if (p->negate_exponent) je["negate"] = true;
    } else if (const auto* lk = std::get_if<WeightLookup>(&expr)) {
      je["lookup"] = lk->path;
    } else if (const auto* pr = std::get_if<WeightPredicate>(&expr)) {
      je["predicate"] = {{"cmp", to_string(pr->cmp)}, {"value", pr->constant}};
    }
    doc["weights"][key.first + "." + key.second] = je;
  }
  doc["sample"] = {{"n", query.sample_size}, {"seed", query.seed}};
  doc["method"] = to_string(query.method);

  std::string path = dir.path(name);
  std::ofstream out(path, std::ios::binary);
  out << doc.dump(2) << "\n";
  return path;
}

}  // namespace joinsample::testing
