#include "joinsample/model.hpp"

#include <algorithm>
#include <deque>
#include <set>

#include "joinsample/error.hpp"

namespace joinsample {

const char* to_string(JoinOperator op) {
  switch (op) {
    case JoinOperator::Inner: return "inner";
    case JoinOperator::LeftOuter: return "left";
    case JoinOperator::RightOuter: return "right";
    case JoinOperator::FullOuter: return "full";
    case JoinOperator::Semi: return "semi";
    case JoinOperator::Anti: return "anti";
  }
  return "?";
}

const char* to_string(Comparison cmp) {
  switch (cmp) {
    case Comparison::Eq: return "=";
    case Comparison::Neq: return "!=";
    case Comparison::Lt: return "<";
    case Comparison::Le: return "<=";
    case Comparison::Ge: return ">=";
    case Comparison::Gt: return ">";
  }
  return "?";
}

const char* to_string(Method m) {
  switch (m) {
    case Method::Stream: return "stream";
    case Method::Economic: return "economic";
    case Method::Hashed: return "hashed";
    case Method::Auto: return "auto";
  }
  return "?";
}

JoinOperator parse_join_operator(const std::string& s) {
  if (s == "inner") return JoinOperator::Inner;
  if (s == "left" || s == "left-outer") return JoinOperator::LeftOuter;
  if (s == "right" || s == "right-outer") return JoinOperator::RightOuter;
  if (s == "full" || s == "full-outer") return JoinOperator::FullOuter;
  if (s == "semi") return JoinOperator::Semi;
  if (s == "anti") return JoinOperator::Anti;
  raise(ErrorCategory::Spec, "UnknownOperator", "join operator '" + s + "'");
}

Comparison parse_comparison(const std::string& s) {
  if (s == "=" || s == "==") return Comparison::Eq;
  if (s == "!=" || s == "<>") return Comparison::Neq;
  if (s == "<") return Comparison::Lt;
  if (s == "<=") return Comparison::Le;
  if (s == ">=") return Comparison::Ge;
  if (s == ">") return Comparison::Gt;
  raise(ErrorCategory::Spec, "UnknownComparison", "comparison '" + s + "'");
}

Method parse_method(const std::string& s) {
  if (s == "stream") return Method::Stream;
  if (s == "economic") return Method::Economic;
  if (s == "hashed") return Method::Hashed;
  if (s == "auto") return Method::Auto;
  raise(ErrorCategory::Spec, "UnknownMethod", "method '" + s + "'");
}

Comparison flip_comparison(Comparison cmp) {
  switch (cmp) {
    case Comparison::Lt: return Comparison::Gt;
    case Comparison::Le: return Comparison::Ge;
    case Comparison::Ge: return Comparison::Le;
    case Comparison::Gt: return Comparison::Lt;
    default: return cmp;
  }
}

bool compare_doubles(double a, Comparison cmp, double b) {
  switch (cmp) {
    case Comparison::Eq: return a == b;
    case Comparison::Neq: return a != b;
    case Comparison::Lt: return a < b;
    case Comparison::Le: return a <= b;
    case Comparison::Ge: return a >= b;
    case Comparison::Gt: return a > b;
  }
  return false;
}

int TableRef::column_index(const std::string& column) const {
  for (size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == column) return static_cast<int>(i);
  }
  return -1;
}

const TableRef* JoinQuery::table(const std::string& name) const {
  for (const auto& t : tables) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

const TableRef* ValidatedPlan::table(const std::string& name) const {
  for (const auto& t : tables) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::vector<const PlanEdge*> ValidatedPlan::children_of(const std::string& name) const {
  std::vector<const PlanEdge*> out;
  for (const auto& e : edges) {
    if (e.parent == name) out.push_back(&e);
  }
  return out;
}

bool ValidatedPlan::is_reachable(const std::string& name) const {
  return std::find(reachable.begin(), reachable.end(), name) != reachable.end();
}

namespace {

// Shortest path between the endpoints of `edges[skip]` that avoids the edge
// itself. Returns edge indices along the path, empty if none exists.
std::vector<size_t> path_avoiding_edge(const std::vector<JoinEdge>& edges,
                                       size_t skip) {
  const std::string& from = edges[skip].left.table;
  const std::string& to = edges[skip].right.table;
  std::map<std::string, std::pair<std::string, size_t>> parent;  // node -> (prev node, via edge)
  std::deque<std::string> queue{from};
  std::set<std::string> seen{from};
  while (!queue.empty()) {
    std::string cur = queue.front();
    queue.pop_front();
    if (cur == to) break;
    for (size_t i = 0; i < edges.size(); ++i) {
      if (i == skip) continue;
      const auto& e = edges[i];
      std::string next;
      if (e.left.table == cur) next = e.right.table;
      else if (e.right.table == cur) next = e.left.table;
      else continue;
      if (seen.count(next)) continue;
      seen.insert(next);
      parent[next] = {cur, i};
      queue.push_back(next);
    }
  }
  if (!seen.count(to)) return {};
  std::vector<size_t> path;
  std::string cur = to;
  while (cur != from) {
    auto it = parent.find(cur);
    path.push_back(it->second.second);
    cur = it->second.first;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

bool breakable(const JoinEdge& e) {
  // Outer/semi/anti semantics cannot be reproduced by a post-hoc selection.
  return e.op == JoinOperator::Inner;
}

}  // namespace

size_t choose_break_edge(const std::vector<JoinEdge>& cycle,
                         const std::vector<EdgeStatistics>& stats) {
  if (cycle.empty()) {
    raise(ErrorCategory::Internal, "EmptyCycle", "no break candidates");
  }
  bool all_known = true;
  for (const auto& s : stats) {
    if (!s.known) all_known = false;
  }
  auto better = [&](size_t a, size_t b) {
    double ka, kb;
    if (all_known) {
      ka = stats[a].left_rows * stats[a].right_rows > 0
               ? stats[a].join_size / (stats[a].left_rows * stats[a].right_rows)
               : 0.0;
      kb = stats[b].left_rows * stats[b].right_rows > 0
               ? stats[b].join_size / (stats[b].left_rows * stats[b].right_rows)
               : 0.0;
    } else {
      ka = stats[a].left_rows * stats[a].right_rows;
      kb = stats[b].left_rows * stats[b].right_rows;
    }
    if (ka != kb) return ka > kb;
    return cycle[a].name() < cycle[b].name();
  };
  size_t best = 0;
  for (size_t i = 1; i < cycle.size(); ++i) {
    if (better(i, best)) best = i;
  }
  return best;
}

RewriteResult rewrite_cyclic(const std::vector<TableRef>& tables,
                             const std::vector<JoinEdge>& edges,
                             const EdgeStatsProvider& stats) {
  RewriteResult result;
  (void)tables;
  result.tree_edges = edges;

  for (;;) {
    bool found_cycle = false;
    for (size_t i = 0; i < result.tree_edges.size() && !found_cycle; ++i) {
      auto path = path_avoiding_edge(result.tree_edges, i);
      // A cycle must pass through at least two edges and three nodes; a
      // single parallel edge is a composite join condition, not a cycle.
      if (path.size() < 2) continue;
      found_cycle = true;

      // Candidate edges of this cycle that can be demoted to a selection.
      std::vector<size_t> candidate_indices;
      std::vector<JoinEdge> candidates;
      std::vector<EdgeStatistics> candidate_stats;
      auto consider = [&](size_t idx) {
        const auto& e = result.tree_edges[idx];
        if (!breakable(e)) return;
        candidate_indices.push_back(idx);
        candidates.push_back(e);
        candidate_stats.push_back(stats ? stats(e) : EdgeStatistics{});
      };
      consider(i);
      for (size_t idx : path) consider(idx);
      if (candidates.empty()) {
        raise(ErrorCategory::Spec, "UnsupportedOperatorCombination",
              "cycle through " + result.tree_edges[i].name() +
                  " contains no inner-join edge to demote to a selection");
      }
      size_t pick = candidate_indices[choose_break_edge(candidates, candidate_stats)];
      const JoinEdge removed = result.tree_edges[pick];
      result.removed.push_back(removed);
      result.residuals.push_back({removed.left, removed.right, removed.cmp});
      result.tree_edges.erase(result.tree_edges.begin() + static_cast<long>(pick));
    }
    if (!found_cycle) break;
  }
  return result;
}

namespace {

void check_query_shape(const JoinQuery& query) {
  if (query.tables.empty()) {
    raise(ErrorCategory::Spec, "UnknownTable", "query declares no tables");
  }
  std::set<std::string> names;
  for (const auto& t : query.tables) {
    if (!names.insert(t.name).second) {
      raise(ErrorCategory::Spec, "DuplicateTable", "table '" + t.name + "' declared twice");
    }
    std::set<std::string> cols(t.columns.begin(), t.columns.end());
    if (cols.size() != t.columns.size()) {
      raise(ErrorCategory::Spec, "DuplicateColumn",
            "table '" + t.name + "' has duplicate column names");
    }
    if (!(t.null_weight >= 0.0)) {
      raise(ErrorCategory::Spec, "NegativeWeight",
            "null weight of table '" + t.name + "' must be nonnegative");
    }
  }
  if (!query.table(query.main)) {
    raise(ErrorCategory::Spec, "UnknownTable", "main table '" + query.main + "' not declared");
  }
  if (query.sample_size < 1 || query.sample_size > 1000000000ULL) {
    raise(ErrorCategory::Spec, "InvalidSampleSize",
          "sample size must be between 1 and 1e9");
  }
  auto check_ref = [&](const ColumnRef& r) {
    const TableRef* t = query.table(r.table);
    if (!t) {
      raise(ErrorCategory::Spec, "UnknownTable", "edge references table '" + r.table + "'");
    }
    if (t->column_index(r.column) < 0) {
      raise(ErrorCategory::Spec, "UnknownColumn", "edge references column '" + r.qualified() + "'");
    }
  };
  for (const auto& e : query.edges) {
    check_ref(e.left);
    check_ref(e.right);
    if (e.left.table == e.right.table) {
      raise(ErrorCategory::Spec, "UnsupportedOperatorCombination",
            "self-join edge on table '" + e.left.table + "'");
    }
    if (e.cmp != Comparison::Eq && e.op != JoinOperator::Inner) {
      raise(ErrorCategory::Spec, "UnsupportedOperatorCombination",
            "comparison " + std::string(to_string(e.cmp)) + " requires an inner join (" +
                e.name() + ")");
    }
  }
  for (const auto& [key, expr] : query.weights.exprs) {
    const TableRef* t = query.table(key.first);
    if (!t) {
      raise(ErrorCategory::Spec, "UnknownTable", "weight spec references table '" + key.first + "'");
    }
    if (t->column_index(key.second) < 0) {
      raise(ErrorCategory::Spec, "UnknownColumn",
            "weight spec references column '" + key.first + "." + key.second + "'");
    }
    (void)expr;
  }
  // Connectivity.
  std::set<std::string> seen{query.tables.front().name};
  std::deque<std::string> queue{query.tables.front().name};
  while (!queue.empty()) {
    std::string cur = queue.front();
    queue.pop_front();
    for (const auto& e : query.edges) {
      std::string next;
      if (e.left.table == cur) next = e.right.table;
      else if (e.right.table == cur) next = e.left.table;
      else continue;
      if (seen.insert(next).second) queue.push_back(next);
    }
  }
  if (seen.size() != query.tables.size()) {
    raise(ErrorCategory::Spec, "DisconnectedGraph", "join graph is not connected");
  }
}

bool is_default_weight(const WeightExpr* e) {
  if (!e) return true;
  if (const auto* c = std::get_if<WeightConstant>(e)) return c->value == 1.0;
  return false;
}

}  // namespace

ValidatedPlan validate(const JoinQuery& query, const EdgeStatsProvider& stats,
                       ValidationWarnings* warnings) {
  check_query_shape(query);

  if (warnings) {
    for (const auto& e : query.edges) {
      if (!is_default_weight(query.weights.find(e.left.table, e.left.column)) &&
          !is_default_weight(query.weights.find(e.right.table, e.right.column))) {
        warnings->messages.push_back(
            "both endpoints of edge " + e.name() +
            " carry non-default weights; join-column weights may be double-counted");
      }
    }
  }

  RewriteResult rewrite = rewrite_cyclic(query.tables, query.edges, stats);

  ValidatedPlan plan;
  plan.tables = query.tables;
  plan.main = query.main;
  plan.residuals = rewrite.residuals;

  // Root the tree at the main table, orienting each edge parent -> child.
  std::set<std::string> placed{plan.main};
  plan.bfs_tables.push_back(plan.main);
  std::deque<std::string> queue{plan.main};
  std::vector<bool> used(rewrite.tree_edges.size(), false);
  while (!queue.empty()) {
    std::string cur = queue.front();
    queue.pop_front();
    for (size_t i = 0; i < rewrite.tree_edges.size(); ++i) {
      if (used[i]) continue;
      const JoinEdge& e = rewrite.tree_edges[i];
      bool parent_is_left;
      if (e.left.table == cur && !placed.count(e.right.table)) {
        parent_is_left = true;
      } else if (e.right.table == cur && !placed.count(e.left.table)) {
        parent_is_left = false;
      } else {
        continue;
      }
      used[i] = true;
      PlanEdge pe;
      pe.parent = cur;
      pe.child = parent_is_left ? e.right.table : e.left.table;
      pe.columns = {parent_is_left ? std::make_pair(e.left.column, e.right.column)
                                   : std::make_pair(e.right.column, e.left.column)};
      pe.op = e.op;
      pe.cmp = parent_is_left ? e.cmp : flip_comparison(e.cmp);
      switch (e.op) {
        case JoinOperator::Inner:
          break;
        case JoinOperator::LeftOuter:
          pe.null_extends_child = parent_is_left;
          pe.null_extends_parent = !parent_is_left;
          break;
        case JoinOperator::RightOuter:
          pe.null_extends_child = !parent_is_left;
          pe.null_extends_parent = parent_is_left;
          break;
        case JoinOperator::FullOuter:
          pe.null_extends_child = true;
          pe.null_extends_parent = true;
          break;
        case JoinOperator::Semi:
        case JoinOperator::Anti:
          if (!parent_is_left) {
            raise(ErrorCategory::Spec, "UnsupportedOperatorCombination",
                  "the preserved side of " + e.name() + " must point away from the main table");
          }
          pe.filter_only = true;
          pe.anti = e.op == JoinOperator::Anti;
          break;
      }
      placed.insert(pe.child);
      plan.bfs_tables.push_back(pe.child);
      queue.push_back(pe.child);

      // Merge any parallel edge between the same pair into a composite key.
      for (size_t j = 0; j < rewrite.tree_edges.size(); ++j) {
        if (used[j]) continue;
        const JoinEdge& o = rewrite.tree_edges[j];
        bool same = (o.left.table == pe.parent && o.right.table == pe.child) ||
                    (o.right.table == pe.parent && o.left.table == pe.child);
        if (!same) continue;
        if (o.op != JoinOperator::Inner || o.cmp != Comparison::Eq ||
            pe.op != JoinOperator::Inner || pe.cmp != Comparison::Eq) {
          raise(ErrorCategory::Spec, "UnsupportedOperatorCombination",
                "parallel edges between '" + pe.parent + "' and '" + pe.child +
                    "' must all be inner equi-joins");
        }
        used[j] = true;
        pe.columns.push_back(o.left.table == pe.parent
                                 ? std::make_pair(o.left.column, o.right.column)
                                 : std::make_pair(o.right.column, o.left.column));
      }
      plan.edges.push_back(std::move(pe));
    }
  }

  // Reachability: semi/anti subtrees never materialize.
  std::deque<std::string> rq{plan.main};
  plan.reachable.push_back(plan.main);
  while (!rq.empty()) {
    std::string cur = rq.front();
    rq.pop_front();
    for (const auto& e : plan.edges) {
      if (e.parent != cur || e.filter_only) continue;
      plan.reachable.push_back(e.child);
      rq.push_back(e.child);
    }
  }

  // A residual predicate can only be checked on materialized rows.
  for (const auto& r : plan.residuals) {
    if (!plan.is_reachable(r.left.table) || !plan.is_reachable(r.right.table)) {
      raise(ErrorCategory::Spec, "UnsupportedOperatorCombination",
            "cycle rewriting produced a selection over the filtered table '" +
                (plan.is_reachable(r.left.table) ? r.right.table : r.left.table) + "'");
    }
  }

  for (const auto& t : plan.tables) {
    plan.pass_budget[t.name] =
        t.name == plan.main ? 1 : (plan.is_reachable(t.name) ? 2 : 1);
  }
  return plan;
}

}  // namespace joinsample
