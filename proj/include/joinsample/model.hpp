#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <utility>
#include <variant>
#include <vector>

namespace joinsample {

enum class JoinOperator { Inner, LeftOuter, RightOuter, FullOuter, Semi, Anti };
enum class Comparison { Eq, Neq, Lt, Le, Ge, Gt };
enum class Method { Stream, Economic, Hashed, Auto };

const char* to_string(JoinOperator op);
const char* to_string(Comparison cmp);
const char* to_string(Method m);
JoinOperator parse_join_operator(const std::string& s);
Comparison parse_comparison(const std::string& s);
Method parse_method(const std::string& s);

// Swaps operand roles: x cmp y  <=>  y flip(cmp) x.
Comparison flip_comparison(Comparison cmp);
bool compare_doubles(double a, Comparison cmp, double b);

struct ColumnRef {
  std::string table;
  std::string column;

  std::string qualified() const { return table + "." + column; }
  bool operator==(const ColumnRef& o) const {
    return table == o.table && column == o.column;
  }
};

struct TableRef {
  std::string name;
  std::string path;
  std::vector<std::string> columns;
  double null_weight = 1.0;  // w(∅_T)
  char delimiter = ',';

  // -1 if the column is not declared.
  int column_index(const std::string& column) const;
};

// ---------------------------------------------------------------------------
// Column weight expressions. A row's weight is the product over its columns;
// unspecified columns contribute 1.

struct WeightConstant {
  double value = 1.0;
};
struct WeightIdentity {};
struct WeightLinear {
  double a = 0.0, b = 0.0;  // a*x + b
};
struct WeightPower {
  double base = 1.0;
  bool negate_exponent = false;  // base^x, or base^(-x) when set
};
struct WeightLookup {
  std::string path;
  // Loaded lazily by the ingest layer; values absent from the mapping get
  // weight 0.
  std::shared_ptr<const std::unordered_map<std::string, double>> mapping;
};
struct WeightPredicate {
  Comparison cmp = Comparison::Eq;
  std::string constant;  // 1 if cell cmp constant else 0
};

using WeightExpr = std::variant<WeightConstant, WeightIdentity, WeightLinear,
                                WeightPower, WeightLookup, WeightPredicate>;

struct WeightSpec {
  std::map<std::pair<std::string, std::string>, WeightExpr> exprs;

  const WeightExpr* find(const std::string& table, const std::string& column) const {
    auto it = exprs.find({table, column});
    return it == exprs.end() ? nullptr : &it->second;
  }
  void set(const std::string& table, const std::string& column, WeightExpr e) {
    exprs[{table, column}] = std::move(e);
  }
};

struct JoinEdge {
  ColumnRef left;
  ColumnRef right;
  JoinOperator op = JoinOperator::Inner;
  Comparison cmp = Comparison::Eq;

  // Stable identifier used for deterministic tie breaking.
  std::string name() const {
    return left.qualified() + to_string(cmp) + right.qualified();
  }
};

struct JoinQuery {
  std::vector<TableRef> tables;
  std::vector<JoinEdge> edges;
  std::string main;
  WeightSpec weights;
  uint64_t sample_size = 1;
  uint64_t seed = 0;
  Method method = Method::Auto;

  const TableRef* table(const std::string& name) const;
};

// ---------------------------------------------------------------------------
// Validated plan: a tree rooted at the main table plus the residual selection
// predicates produced by cycle rewriting.

struct ResidualPredicate {
  ColumnRef left;
  ColumnRef right;
  Comparison cmp = Comparison::Eq;
};

struct PlanEdge {
  std::string parent;
  std::string child;
  // Join conditions, oriented parent-vs-child. More than one pair appears when
  // parallel edges were merged into a composite key.
  std::vector<std::pair<std::string, std::string>> columns;
  JoinOperator op = JoinOperator::Inner;   // as declared in the query
  Comparison cmp = Comparison::Eq;         // oriented: parent_value cmp child_value
  bool null_extends_child = false;   // parent rows without a match keep w(∅_child)
  bool null_extends_parent = false;  // unmatched child rows feed the ∅_main group
  bool filter_only = false;          // semi/anti: child side never materializes
  bool anti = false;
};

struct ValidatedPlan {
  std::vector<TableRef> tables;
  std::string main;
  std::vector<PlanEdge> edges;  // BFS order from the root
  std::vector<ResidualPredicate> residuals;
  std::vector<std::string> bfs_tables;  // main first
  std::vector<std::string> reachable;   // BFS order, semi/anti subtrees excluded
  std::map<std::string, int> pass_budget;

  const TableRef* table(const std::string& name) const;
  std::vector<const PlanEdge*> children_of(const std::string& name) const;
  bool is_reachable(const std::string& name) const;
};

// Exact two-way join statistics for break-edge selection.
struct EdgeStatistics {
  bool known = false;
  double join_size = 0.0;
  double left_rows = 0.0;
  double right_rows = 0.0;
};
using EdgeStatsProvider = std::function<EdgeStatistics(const JoinEdge&)>;

struct RewriteResult {
  std::vector<JoinEdge> tree_edges;
  std::vector<ResidualPredicate> residuals;
  std::vector<JoinEdge> removed;
};

// Removes one edge per independent cycle, recording the removed condition as a
// residual predicate. Acyclic input comes back unchanged.
RewriteResult rewrite_cyclic(const std::vector<TableRef>& tables,
                             const std::vector<JoinEdge>& edges,
                             const EdgeStatsProvider& stats = nullptr);

// Index into `cycle` of the edge to remove: the link two independently drawn
// rows are most likely to satisfy. Falls back to the largest size product when
// any candidate's join size is unknown; ties break on the lexicographically
// first edge name.
size_t choose_break_edge(const std::vector<JoinEdge>& cycle,
                         const std::vector<EdgeStatistics>& stats);

struct ValidationWarnings {
  std::vector<std::string> messages;
};

ValidatedPlan validate(const JoinQuery& query,
                       const EdgeStatsProvider& stats = nullptr,
                       ValidationWarnings* warnings = nullptr);

}  // namespace joinsample
