#include "joinsample/joinindex.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "joinsample/error.hpp"

namespace joinsample {

namespace {
constexpr char kKeySeparator = '\x1f';

double parse_theta_value(const std::string& s, const char* what) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    raise(ErrorCategory::Data, "OrderedComparisonOnNonNumeric",
          std::string(what) + " '" + s + "' is not numeric");
  }
  return v;
}
}  // namespace

std::optional<std::string> edge_key_values(const std::vector<std::string>& values,
                                           const std::vector<int>& columns) {
  std::string key;
  for (size_t i = 0; i < columns.size(); ++i) {
    const std::string& cell = values[static_cast<size_t>(columns[i])];
    if (cell.empty()) return std::nullopt;  // NULL never joins
    if (i) key.push_back(kKeySeparator);
    key += cell;
  }
  return key;
}

std::optional<std::string> edge_key(const Row& row, const std::vector<int>& columns) {
  return edge_key_values(row.values, columns);
}

std::vector<int> resolve_columns(const TableRef& table,
                                 const std::vector<std::string>& names) {
  std::vector<int> out;
  out.reserve(names.size());
  for (const auto& n : names) {
    int idx = table.column_index(n);
    if (idx < 0) {
      raise(ErrorCategory::Internal, "UnknownColumn",
            "column '" + n + "' missing from table '" + table.name + "'");
    }
    out.push_back(idx);
  }
  return out;
}

void JoinIndex::configure(const PlanEdge& edge, double child_null_weight) {
  edge_ = edge;
  child_null_weight_ = child_null_weight;
  theta_ = edge.cmp == Comparison::Lt || edge.cmp == Comparison::Le ||
           edge.cmp == Comparison::Ge || edge.cmp == Comparison::Gt;
}

size_t JoinIndex::slot_of(const std::string& key) const {
  auto it = map_.find(key);
  return it == map_.end() ? keys_.size() : it->second;
}

void JoinIndex::add(const std::string& key, double contribution) {
  auto [it, inserted] = map_.try_emplace(key, keys_.size());
  if (inserted) {
    keys_.push_back(key);
    labels_.push_back(0.0);
    stamps_.push_back(0);
  }
  labels_[it->second] += contribution;
}

void JoinIndex::finalize() {
  if (edge_.filter_only) {
    // Semi: present-and-alive values get 1. Anti: the complement, default 1.
    for (auto& l : labels_) {
      bool alive = l > 0.0;
      l = edge_.anti ? (alive ? 0.0 : 1.0) : (alive ? 1.0 : 0.0);
    }
  }
  total_ = 0.0;
  for (double l : labels_) total_ += l;
  if (!std::isfinite(total_)) {
    raise(ErrorCategory::Data, "NonFiniteWeight",
          "index totals for edge into '" + edge_.child + "' overflowed");
  }
  if (theta_) {
    // Condition is parent_x cmp child_y; stored values are child-side, so the
    // stored-side comparison is the flip.
    transform_theta(flip_comparison(edge_.cmp));
  }
  finalized_ = true;
}

void JoinIndex::transform_theta(Comparison stored_cmp) {
  theta_ = true;
  stored_cmp_ = stored_cmp;
  std::vector<std::pair<double, double>> pairs;
  pairs.reserve(keys_.size());
  for (size_t i = 0; i < keys_.size(); ++i) {
    pairs.emplace_back(parse_theta_value(keys_[i], "join value"), labels_[i]);
  }
  std::sort(pairs.begin(), pairs.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  theta_values_.clear();
  theta_prefix_.clear();
  double run = 0.0;
  for (const auto& [v, l] : pairs) {
    if (theta_values_.empty() || theta_values_.back() != v) {
      theta_values_.push_back(v);
      theta_prefix_.push_back(run);
    }
    run += l;
  }
  theta_prefix_.push_back(run);  // theta_prefix_[i] = Σ labels of values < values[i]
  total_ = run;
}

double JoinIndex::theta_lookup(double x) const {
  // Σ labels(y) over stored y with y stored_cmp x.
  auto prefix_below = [&](bool inclusive) {
    auto it = inclusive
                  ? std::upper_bound(theta_values_.begin(), theta_values_.end(), x)
                  : std::lower_bound(theta_values_.begin(), theta_values_.end(), x);
    return theta_prefix_[static_cast<size_t>(it - theta_values_.begin())];
  };
  switch (stored_cmp_) {
    case Comparison::Lt: return prefix_below(false);
    case Comparison::Le: return prefix_below(true);
    case Comparison::Gt: return total_ - prefix_below(true);
    case Comparison::Ge: return total_ - prefix_below(false);
    default:
      raise(ErrorCategory::Internal, "BadComparison", "theta lookup on non-ordered edge");
  }
}

double JoinIndex::lookup(const std::optional<std::string>& key, bool stamp) {
  if (edge_.cmp == Comparison::Eq) {
    if (key) {
      size_t slot = slot_of(*key);
      if (slot != keys_.size()) {
        if (stamp && stamps_[slot] != epoch_) {
          stamps_[slot] = epoch_;
          matched_ += labels_[slot];
        }
        return labels_[slot];
      }
    }
    // Absent (or NULL) value: unmatched-row semantics.
    if (edge_.filter_only) return edge_.anti ? 1.0 : 0.0;
    return edge_.null_extends_child ? child_null_weight_ : 0.0;
  }
  if (!key) return 0.0;  // NULL satisfies no comparison
  if (edge_.cmp == Comparison::Neq) return lookup_neq(*key);
  return theta_lookup(parse_theta_value(*key, "join value"));
}

double JoinIndex::lookup(const std::optional<std::string>& key) const {
  return const_cast<JoinIndex*>(this)->lookup(key, false);
}

double JoinIndex::lookup_neq(const std::string& value) const {
  return total_ - raw_label(value);
}

double JoinIndex::raw_label(const std::string& key) const {
  size_t slot = slot_of(key);
  return slot == keys_.size() ? 0.0 : labels_[slot];
}

bool JoinIndex::contains(const std::string& key) const {
  return slot_of(key) != keys_.size();
}

double JoinIndex::default_label() const {
  if (edge_.filter_only) return edge_.anti ? 1.0 : 0.0;
  return edge_.null_extends_child ? child_null_weight_ : 0.0;
}

void JoinIndex::begin_epoch() {
  ++epoch_;
  matched_ = 0.0;
}

JoinIndex::Unmatched JoinIndex::unmatched() const {
  Unmatched out;
  for (size_t i = 0; i < keys_.size(); ++i) {
    if (stamps_[i] == epoch_) continue;
    out.values.emplace_back(keys_[i], labels_[i]);
    out.total += labels_[i];
  }
  return out;
}

JoinIndex build_index(TableStream& stream, const CompiledWeights& weights,
                      const std::vector<EdgeBinding>& grandchild_edges,
                      const PlanEdge& edge, double child_null_weight) {
  JoinIndex index;
  index.configure(edge, child_null_weight);
  const TableRef& child = stream.table();
  std::vector<std::string> child_cols;
  for (const auto& [pc, cc] : edge.columns) child_cols.push_back(cc);
  std::vector<int> key_columns = resolve_columns(child, child_cols);

  std::vector<EdgeBinding> bindings = grandchild_edges;
  Row row;
  while (stream.next(row)) {
    double w = weights.eval(row);
    if (w == 0.0) continue;  // selections: skipped outright
    double contribution = group_weight(row, w, bindings, /*stamp=*/false);
    auto key = edge_key(row, key_columns);
    if (!key) continue;  // NULL join value never matches
    index.add(*key, contribution);
  }
  index.finalize();
  return index;
}

double group_weight(const Row& row, double row_weight,
                    std::vector<EdgeBinding>& child_edges, bool stamp) {
  if (row_weight == 0.0) return 0.0;
  double w = row_weight;
  for (auto& b : child_edges) {
    auto key = edge_key(row, b.parent_columns);
    w *= b.index->lookup(key, stamp);
    // When stamping, every edge must still record the row's connection even
    // after the product has collapsed to zero.
    if (w == 0.0 && !stamp) return 0.0;
  }
  if (!std::isfinite(w)) {
    raise(ErrorCategory::Data, "NonFiniteWeight",
          "group weight overflowed at row " + std::to_string(row.ordinal));
  }
  return w;
}

double null_main_weight(double main_null_weight,
                        const std::vector<EdgeBinding>& child_edges) {
  if (child_edges.empty() || main_null_weight <= 0.0) return 0.0;
  double w = main_null_weight;
  for (const auto& b : child_edges) {
    if (!b.edge->null_extends_parent) return 0.0;
    w *= b.index->unmatched().total;
    if (w == 0.0) return 0.0;
  }
  return w;
}

}  // namespace joinsample
