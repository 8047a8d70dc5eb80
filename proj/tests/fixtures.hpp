#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "joinsample/model.hpp"
#include "joinsample/rng.hpp"

namespace joinsample::testing {

// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string path(const std::string& name) const;
  const std::string& root() const { return root_; }

 private:
  std::string root_;
};

std::string write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<std::string>>& rows);

// Fixture F1: AB(A,B,w) joined with BC(B,C,w) on B, weights = identity on w.
// Join rows and weights: a1b1c1:14 a1b1c2:2 a2b1c1:21 a2b1c2:3 a3b2c1:20.
JoinQuery make_f1(const TempDir& dir, JoinOperator op = JoinOperator::Inner);

// Six-table fixture shaped like the running example:
// FA =full= AB =right= BC =semi= CD, plus AB =inner= BG =inner= GH.
JoinQuery make_six_table(const TempDir& dir);

// Four-table outer fixture with a nonempty ∅_main group:
// FA =full= AB =right= BC =semi= CD (main AB).
JoinQuery make_outer_four(const TempDir& dir);

// Two-table many-to-many fixture with weighted rows.
JoinQuery make_many_to_many(const TempDir& dir, size_t left_rows, size_t right_rows,
                            size_t domain, uint64_t seed);

// Key-join fixture: two tables with unique keys 0..rows-1 and varied weights.
JoinQuery make_key_join(const TempDir& dir, size_t rows, uint64_t seed);

// FK chain: main(rows) -> D1(dim1) -> D2(dim2); weight on main column "x".
JoinQuery make_fk_chain(const TempDir& dir, size_t rows, size_t dim1, size_t dim2,
                        const std::string& main_weight_kind, uint64_t seed);

// Triangle query over a random digraph: tables E1,E2,E3 share one edge file;
// E1.dst=E2.src, E2.dst=E3.src, E3.dst=E1.src (cyclic).
JoinQuery make_triangle(const TempDir& dir, size_t nodes, double edge_prob, uint64_t seed);

// Random acyclic fixture for the weight-equivalence property: 2..6 tables,
// random tree, operators spanning inner/left/right/full/semi/anti/theta/neq,
// random nonnegative weights including zeros.
JoinQuery make_random_fixture(const TempDir& dir, uint64_t seed, int id);

// Serializes a query as a JSON spec file for CLI runs.
std::string write_query_spec(const TempDir& dir, const JoinQuery& query,
                             const std::string& name);

}  // namespace joinsample::testing
