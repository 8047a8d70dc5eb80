#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "joinsample/ingest.hpp"
#include "joinsample/model.hpp"

namespace joinsample {

// Join key of a row on an edge: the cell value, or a composite of cells joined
// with a unit separator. Empty cells are NULL and satisfy no join condition,
// so rows with a NULL key are invisible to the edge.
std::optional<std::string> edge_key_values(const std::vector<std::string>& values,
                                           const std::vector<int>& columns);
std::optional<std::string> edge_key(const Row& row, const std::vector<int>& columns);

// Per-edge hash index from join value to the aggregated weight of the child
// subtree hanging below that value. Absent values fall back to a per-operator
// default, which realizes the algorithm's -infinity sentinel without storing
// it: inner/semi default to 0, outer edges to w(∅_child), anti to 1.
class JoinIndex {
 public:
  JoinIndex() = default;

  void configure(const PlanEdge& edge, double child_null_weight);

  // Aggregation during the child scan; zero contributions still mark the
  // value as present.
  void add(const std::string& key, double contribution);

  // Applies the operator mapping (semi/anti relabeling, ordered-comparison
  // cumulatives) after the scan finishes.
  void finalize();

  // Sum of weights of stored values y satisfying `y stored_cmp x`. This is the
  // ordered-comparison transform; finalize() applies it automatically for
  // theta edges using the edge's orientation.
  void transform_theta(Comparison stored_cmp);
  double theta_lookup(double x) const;

  // Weight contributed by the child subtree for a parent row whose join cells
  // form `key` (nullopt = NULL). When `stamp` is set, touched entries are
  // marked so unmatched weight can be reported afterwards.
  double lookup(const std::optional<std::string>& key, bool stamp = false);
  double lookup(const std::optional<std::string>& key) const;

  // total weight minus the value's own label (≠-join semantics).
  double lookup_neq(const std::string& value) const;

  double raw_label(const std::string& key) const;  // 0 if absent
  bool contains(const std::string& key) const;
  double default_label() const;
  double total_weight() const { return total_; }
  double matched_weight() const { return matched_; }
  size_t entry_count() const { return keys_.size(); }
  double child_null_weight() const { return child_null_weight_; }

  const PlanEdge& edge() const { return edge_; }
  bool is_theta() const { return theta_; }

  // Starts a fresh matched-tracking epoch (one per sampling run).
  void begin_epoch();

  struct Unmatched {
    std::vector<std::pair<std::string, double>> values;  // insertion order
    double total = 0.0;
  };
  // Stored values never looked up by a positive-weight parent row this epoch.
  Unmatched unmatched() const;

 private:
  size_t slot_of(const std::string& key) const;

  PlanEdge edge_;
  double child_null_weight_ = 0.0;
  bool theta_ = false;
  Comparison stored_cmp_ = Comparison::Eq;

  std::unordered_map<std::string, size_t> map_;
  std::vector<std::string> keys_;  // insertion order, for deterministic iteration
  std::vector<double> labels_;
  std::vector<uint64_t> stamps_;
  double total_ = 0.0;
  double matched_ = 0.0;
  uint64_t epoch_ = 1;
  bool finalized_ = false;

  std::vector<double> theta_values_;  // sorted distinct numeric values
  std::vector<double> theta_prefix_;  // prefix sums of their labels
};

// Binds a built child index to the columns of the parent table it is looked
// up with.
struct EdgeBinding {
  const PlanEdge* edge = nullptr;
  std::vector<int> parent_columns;
  JoinIndex* index = nullptr;
};

std::vector<int> resolve_columns(const TableRef& table,
                                 const std::vector<std::string>& names);

// One pass of Algorithm 1 for a single table: scans the child, aggregating
// w(ρ) times the product of grandchild lookups into the parent-edge index.
// Rows with weight 0 are skipped outright.
JoinIndex build_index(TableStream& stream, const CompiledWeights& weights,
                      const std::vector<EdgeBinding>& grandchild_edges,
                      const PlanEdge& edge, double child_null_weight);

// W(ρ) = w(ρ) · Π child-edge lookups. `stamp` marks matched entries on edges
// that can extend a null main row.
double group_weight(const Row& row, double row_weight,
                    std::vector<EdgeBinding>& child_edges, bool stamp);

// Weight of the synthetic ∅_main group: w(∅_main) times, per child edge, the
// unmatched stored weight. Zero unless every child edge permits a null parent
// (and at least one edge exists).
double null_main_weight(double main_null_weight,
                        const std::vector<EdgeBinding>& child_edges);

}  // namespace joinsample
