#include "joinsample/oracle.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <deque>
#include <set>

#include "joinsample/error.hpp"
#include "joinsample/multinomial.hpp"
#include "joinsample/rng.hpp"

namespace joinsample {

namespace {

std::string pack_ordinals(const std::vector<uint64_t>& ords) {
  std::string out(ords.size() * sizeof(uint64_t), '\0');
  std::memcpy(out.data(), ords.data(), out.size());
  return out;
}

double parse_numeric(const std::string& s, const char* what) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    raise(ErrorCategory::Data, "OrderedComparisonOnNonNumeric",
          std::string(what) + " '" + s + "' is not numeric");
  }
  return v;
}

struct Option {
  double weight = 0.0;
  std::vector<std::pair<size_t, uint64_t>> slots;  // (reachable slot, ordinal)
};

struct Side {
  bool aggregate_only = false;
  std::unordered_map<std::string, std::vector<Option>> options;  // live only
  std::unordered_map<std::string, double> live;  // present keys -> live weight
  std::vector<std::string> key_order;
  double live_total = 0.0;
  std::vector<std::pair<double, std::string>> numeric;  // built on demand
  bool numeric_built = false;

  void build_numeric() {
    if (numeric_built) return;
    numeric_built = true;
    for (const auto& k : key_order) {
      numeric.emplace_back(parse_numeric(k, "join value"), k);
    }
    std::sort(numeric.begin(), numeric.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
  }
};

class Enumerator {
 public:
  Enumerator(const ValidatedPlan& plan, const WeightSpec& weights, const Dataset& data,
             uint64_t guard)
      : plan_(plan), data_(data), guard_(guard) {
    for (const auto& t : plan_.tables) {
      weights_.emplace(t.name, CompiledWeights(t, weights));
    }
    for (size_t i = 0; i < plan_.reachable.size(); ++i) slot_index_[plan_.reachable[i]] = i;
  }

  EnumeratedJoin run() {
    // Sides for the main table's child edges, depth first.
    std::map<size_t, Side> sides;
    for (size_t e = 0; e < plan_.edges.size(); ++e) {
      if (plan_.edges[e].parent != plan_.main) continue;
      sides[e] = compute_side(e, plan_.edges[e].filter_only);
    }

    EnumeratedJoin join;
    join.tables = plan_.reachable;

    const TableData& main = data_.at(plan_.main);
    const auto& mw = weights_.at(plan_.main);
    std::map<size_t, std::set<std::string>> matched;  // per equi edge

    // Planning pass: count the trees each main row will spawn before
    // materializing anything, so oversized joins trip the guard cheaply.
    double planned = 0.0;
    for (const Row& row : main.rows) {
      double w = mw.eval(row);
      if (w == 0.0) continue;
      for (auto& [e, side] : sides) {
        if (plan_.edges[e].null_extends_parent && plan_.edges[e].cmp == Comparison::Eq) {
          auto key = row_key(plan_.main, row, e, /*parent_side=*/true);
          if (key && side.live.count(*key)) matched[e].insert(*key);
        }
      }
      const size_t mark = scratch_.size();
      double combos = 1.0;
      for (auto& [e, side] : sides) {
        auto selection = select_options(plan_.main, row, e, side);
        if (selection.dead) {
          combos = 0.0;
          break;
        }
        if (selection.list) combos *= static_cast<double>(selection.list->size());
      }
      planned += combos;
      scratch_.resize(mark);
    }

    // ∅_main group: every child edge must tolerate a null parent.
    bool null_main_ok = !sides.empty() && plan_.table(plan_.main)->null_weight > 0.0;
    for (const auto& [e, side] : sides) {
      if (!plan_.edges[e].null_extends_parent) null_main_ok = false;
    }
    std::vector<std::vector<Option>> null_main_lists;
    if (null_main_ok) {
      null_main_lists.reserve(sides.size());
      double combos = 1.0;
      for (auto& [e, side] : sides) {
        std::vector<Option> unmatched;
        for (const auto& key : side.key_order) {
          if (matched[e].count(key)) continue;
          auto it = side.options.find(key);
          if (it == side.options.end()) continue;
          for (const auto& o : it->second) unmatched.push_back(o);
        }
        combos *= static_cast<double>(unmatched.size());
        null_main_lists.push_back(std::move(unmatched));
      }
      if (combos == 0.0) null_main_lists.clear();
      planned += combos;
    }

    if (planned > static_cast<double>(guard_)) {
      raise(ErrorCategory::SizeGuard, "SizeGuardExceeded",
            "estimated join size " + std::to_string(planned) + " exceeds the guard of " +
                std::to_string(guard_));
    }

    // Emission pass.
    for (const Row& row : main.rows) {
      double w = mw.eval(row);
      if (w == 0.0) continue;
      const size_t mark = scratch_.size();
      bool dead = false;
      std::vector<const std::vector<Option>*> lists;
      for (auto& [e, side] : sides) {
        auto selection = select_options(plan_.main, row, e, side);
        if (selection.dead) {
          dead = true;
          break;
        }
        if (selection.list) lists.push_back(selection.list);
      }
      if (!dead) {
        std::vector<uint64_t> base(plan_.reachable.size(), kNullOrdinal);
        base[0] = row.ordinal;
        emit_cartesian(join, base, w, lists);
      }
      scratch_.resize(mark);
    }
    if (!null_main_lists.empty()) {
      std::vector<const std::vector<Option>*> lists;
      for (const auto& s : null_main_lists) lists.push_back(&s);
      std::vector<uint64_t> base(plan_.reachable.size(), kNullOrdinal);
      emit_cartesian(join, base, plan_.table(plan_.main)->null_weight, lists);
    }

    // Residual cyclic predicates.
    if (!plan_.residuals.empty()) {
      std::vector<EnumeratedTree> kept;
      for (auto& t : join.trees) {
        if (residuals_hold(t)) kept.push_back(std::move(t));
      }
      join.trees = std::move(kept);
    }

    std::sort(join.trees.begin(), join.trees.end(),
              [](const EnumeratedTree& a, const EnumeratedTree& b) {
                return a.ordinals < b.ordinals;
              });
    join.total_weight = 0.0;
    for (size_t i = 0; i < join.trees.size(); ++i) {
      join.total_weight += join.trees[i].weight;
      join.lookup[pack_ordinals(join.trees[i].ordinals)] = i;
    }
    return join;
  }

 private:
  struct Selection {
    bool dead = false;
    const std::vector<Option>* list = nullptr;  // null = filter edge (no slot)
  };

  std::optional<std::string> row_key(const std::string& table, const Row& row,
                                     size_t edge_index, bool parent_side) {
    const PlanEdge& edge = plan_.edges[edge_index];
    const TableRef* ref = plan_.table(table);
    std::vector<std::string> names;
    for (const auto& [pc, cc] : edge.columns) names.push_back(parent_side ? pc : cc);
    return edge_key(row, resolve_columns(*ref, names));
  }

  // Options contributed by edge `e` for a parent row. Synthesized option
  // lists live in scratch_; callers roll scratch_ back once the row is done.
  Selection select_options(const std::string& parent, const Row& row, size_t e,
                           Side& side) {
    const PlanEdge& edge = plan_.edges[e];
    auto key = row_key(parent, row, e, /*parent_side=*/true);
    Selection sel;
    if (edge.filter_only) {
      bool alive = false;
      if (key) {
        auto it = side.live.find(*key);
        alive = it != side.live.end() && it->second > 0.0;
      }
      sel.dead = edge.anti ? alive : !alive;
      return sel;
    }
    if (edge.cmp == Comparison::Eq) {
      if (key && side.live.count(*key)) {
        auto it = side.options.find(*key);
        if (it == side.options.end() || it->second.empty()) {
          sel.dead = true;  // present but downstream-dead
        } else {
          sel.list = &it->second;
        }
        return sel;
      }
      const double null_w = plan_.table(edge.child)->null_weight;
      if (edge.null_extends_child && null_w > 0.0) {
        scratch_.push_back({Option{null_w, {}}});
        sel.list = &scratch_.back();
        return sel;
      }
      sel.dead = true;
      return sel;
    }
    // Ordered / ≠ comparisons collect matches across keys.
    if (!key) {
      sel.dead = true;
      return sel;
    }
    std::vector<Option> collected;
    if (edge.cmp == Comparison::Neq) {
      for (const auto& k : side.key_order) {
        if (k == *key) continue;
        auto it = side.options.find(k);
        if (it == side.options.end()) continue;
        for (const auto& o : it->second) collected.push_back(o);
      }
    } else {
      const double x = parse_numeric(*key, "join value");
      side.build_numeric();
      for (const auto& [y, k] : side.numeric) {
        if (!compare_doubles(x, edge.cmp, y)) continue;
        auto it = side.options.find(k);
        if (it == side.options.end()) continue;
        for (const auto& o : it->second) collected.push_back(o);
      }
    }
    if (collected.empty()) {
      sel.dead = true;
      return sel;
    }
    scratch_.push_back(std::move(collected));
    sel.list = &scratch_.back();
    return sel;
  }

  void emit_cartesian(EnumeratedJoin& join, const std::vector<uint64_t>& base,
                      double weight, const std::vector<const std::vector<Option>*>& lists) {
    double combos = 1.0;
    for (const auto* l : lists) combos *= static_cast<double>(l->size());
    if (static_cast<double>(join.trees.size()) + combos > static_cast<double>(guard_)) {
      raise(ErrorCategory::SizeGuard, "SizeGuardExceeded",
            "enumerated join exceeds the size guard");
    }
    std::vector<uint64_t> ords = base;
    emit_recursive(join, ords, weight, lists, 0);
  }

  void emit_recursive(EnumeratedJoin& join, std::vector<uint64_t>& ords, double weight,
                      const std::vector<const std::vector<Option>*>& lists, size_t depth) {
    if (depth == lists.size()) {
      if (weight <= 0.0) return;
      EnumeratedTree t;
      t.ordinals = ords;
      t.weight = weight;
      join.trees.push_back(std::move(t));
      return;
    }
    for (const Option& o : *lists[depth]) {
      for (const auto& [slot, ordinal] : o.slots) ords[slot] = ordinal;
      emit_recursive(join, ords, weight * o.weight, lists, depth + 1);
      for (const auto& [slot, ordinal] : o.slots) ords[slot] = kNullOrdinal;
    }
  }

  Side compute_side(size_t edge_index, bool aggregate_only) {
    const PlanEdge& edge = plan_.edges[edge_index];
    const std::string& child = edge.child;

    std::map<size_t, Side> below;
    for (size_t f = 0; f < plan_.edges.size(); ++f) {
      if (plan_.edges[f].parent != child) continue;
      below[f] = compute_side(f, aggregate_only || plan_.edges[f].filter_only);
    }

    Side side;
    side.aggregate_only = aggregate_only;
    const TableData& data = data_.at(child);
    const auto& cw = weights_.at(child);
    const TableRef* ref = plan_.table(child);
    std::vector<std::string> cnames;
    for (const auto& [pc, cc] : edge.columns) cnames.push_back(cc);
    std::vector<int> ccols = resolve_columns(*ref, cnames);

    for (const Row& row : data.rows) {
      double w = cw.eval(row);
      if (w == 0.0) continue;
      auto key = edge_key(row, ccols);
      if (!key) continue;
      if (!side.live.count(*key)) {
        side.live[*key] = 0.0;
        side.key_order.push_back(*key);
      }
      if (aggregate_only) {
        double factor = w;
        bool dead = false;
        for (auto& [f, fside] : below) {
          double fv = aggregate_lookup(child, row, f, fside);
          factor *= fv;
          if (factor == 0.0) {
            dead = true;
            break;
          }
        }
        if (!dead) side.live[*key] += factor;
        continue;
      }
      const size_t mark = scratch_.size();
      bool dead = false;
      std::vector<const std::vector<Option>*> lists;
      for (auto& [f, fside] : below) {
        auto selection = select_options(child, row, f, fside);
        if (selection.dead) {
          dead = true;
          break;
        }
        if (selection.list) lists.push_back(selection.list);
      }
      if (!dead) {
        Option base;
        base.weight = w;
        base.slots.emplace_back(slot_index_.at(child), row.ordinal);
        std::vector<Option> expanded{base};
        for (const auto* l : lists) {
          std::vector<Option> next;
          next.reserve(expanded.size() * l->size());
          for (const auto& a : expanded) {
            for (const auto& b : *l) {
              Option o = a;
              o.weight *= b.weight;
              o.slots.insert(o.slots.end(), b.slots.begin(), b.slots.end());
              next.push_back(std::move(o));
            }
          }
          expanded = std::move(next);
          if (expanded.size() > guard_) {
            raise(ErrorCategory::SizeGuard, "SizeGuardExceeded",
                  "intermediate option set exceeds the size guard");
          }
        }
        auto& bucket = side.options[*key];
        for (auto& o : expanded) {
          if (o.weight <= 0.0) continue;
          side.live[*key] += o.weight;
          bucket.push_back(std::move(o));
        }
      }
      scratch_.resize(mark);
    }
    for (const auto& [k, v] : side.live) side.live_total += v;
    return side;
  }

  // Aggregated live weight an edge contributes for a parent row (used under
  // filter subtrees where options never materialize).
  double aggregate_lookup(const std::string& parent, const Row& row, size_t e, Side& side) {
    const PlanEdge& edge = plan_.edges[e];
    auto key = row_key(parent, row, e, /*parent_side=*/true);
    if (edge.filter_only) {
      bool alive = false;
      if (key) {
        auto it = side.live.find(*key);
        alive = it != side.live.end() && it->second > 0.0;
      }
      return (edge.anti ? !alive : alive) ? 1.0 : 0.0;
    }
    if (edge.cmp == Comparison::Eq) {
      if (key) {
        auto it = side.live.find(*key);
        if (it != side.live.end()) return it->second;
      }
      const double null_w = plan_.table(edge.child)->null_weight;
      return edge.null_extends_child ? null_w : 0.0;
    }
    if (!key) return 0.0;
    if (edge.cmp == Comparison::Neq) {
      auto it = side.live.find(*key);
      return side.live_total - (it == side.live.end() ? 0.0 : it->second);
    }
    const double x = parse_numeric(*key, "join value");
    side.build_numeric();
    double sum = 0.0;
    for (const auto& [y, k] : side.numeric) {
      if (compare_doubles(x, edge.cmp, y)) sum += side.live.at(k);
    }
    return sum;
  }

  bool residuals_hold(const EnumeratedTree& tree) const {
    for (const auto& r : plan_.residuals) {
      auto li = slot_index_.find(r.left.table);
      auto ri = slot_index_.find(r.right.table);
      if (li == slot_index_.end() || ri == slot_index_.end()) return false;
      uint64_t lo = tree.ordinals[li->second];
      uint64_t ro = tree.ordinals[ri->second];
      if (lo == kNullOrdinal || ro == kNullOrdinal) return false;
      const TableRef* lt = plan_.table(r.left.table);
      const TableRef* rt = plan_.table(r.right.table);
      const std::string& lv =
          data_.at(r.left.table).rows[lo].values[static_cast<size_t>(lt->column_index(r.left.column))];
      const std::string& rv =
          data_.at(r.right.table).rows[ro].values[static_cast<size_t>(rt->column_index(r.right.column))];
      if (lv.empty() || rv.empty()) return false;
      bool ok;
      switch (r.cmp) {
        case Comparison::Eq: ok = lv == rv; break;
        case Comparison::Neq: ok = lv != rv; break;
        default:
          ok = compare_doubles(parse_numeric(lv, "residual value"), r.cmp,
                               parse_numeric(rv, "residual value"));
          break;
      }
      if (!ok) return false;
    }
    return true;
  }

  const ValidatedPlan& plan_;
  const Dataset& data_;
  uint64_t guard_;
  std::map<std::string, CompiledWeights> weights_;
  std::map<std::string, size_t> slot_index_;
  std::deque<std::vector<Option>> scratch_;
};

}  // namespace

Dataset load_dataset(const std::vector<TableRef>& tables) {
  Dataset data;
  for (const auto& t : tables) {
    TableData td;
    td.ref = t;
    TableStream stream(t, nullptr);
    Row row;
    while (stream.next(row)) td.rows.push_back(row);
    data[t.name] = std::move(td);
  }
  return data;
}

size_t EnumeratedJoin::index_of(const std::vector<uint64_t>& ordinals) const {
  auto it = lookup.find(pack_ordinals(ordinals));
  return it == lookup.end() ? npos : it->second;
}

std::vector<double> EnumeratedJoin::probabilities() const {
  std::vector<double> p;
  p.reserve(trees.size());
  for (const auto& t : trees) p.push_back(t.weight / total_weight);
  return p;
}

EnumeratedJoin enumerate_join(const ValidatedPlan& plan, const WeightSpec& weights,
                              const Dataset& data, uint64_t size_guard) {
  Enumerator e(plan, weights, data, size_guard);
  return e.run();
}

EnumeratedJoin enumerate_join(const JoinQuery& query, uint64_t size_guard) {
  ValidatedPlan plan = validate(query, make_edge_stats_provider(query));
  Dataset data = load_dataset(plan.tables);
  return enumerate_join(plan, query.weights, data, size_guard);
}

std::vector<size_t> exact_multinomial(const EnumeratedJoin& join, size_t n, uint64_t seed) {
  if (!(join.total_weight > 0.0) || join.trees.empty()) {
    raise(ErrorCategory::Data, "ZeroTotalWeight", "enumerated join has no weight");
  }
  std::vector<double> cumulative;
  cumulative.reserve(join.trees.size());
  double run = 0.0;
  for (const auto& t : join.trees) {
    run += t.weight;
    cumulative.push_back(run);
  }
  CounterRng rng(seed);
  std::vector<size_t> out;
  out.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    const double target = rng.next_unit() * run;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
    if (it == cumulative.end()) --it;
    out.push_back(static_cast<size_t>(it - cumulative.begin()));
  }
  return out;
}

std::vector<size_t> map_sample(const SampleSet& sample, const EnumeratedJoin& join) {
  std::vector<size_t> out;
  out.reserve(sample.trees.size());
  for (const auto& tree : sample.trees) {
    size_t idx = join.index_of(tree.ordinals());
    if (idx == EnumeratedJoin::npos) {
      raise(ErrorCategory::Internal, "ForeignTree",
            "sampler emitted a row absent from the enumerated join");
    }
    out.push_back(idx);
  }
  return out;
}

ChiSquareResult compare_distributions(const std::vector<size_t>& draws,
                                      const EnumeratedJoin& join) {
  std::vector<uint64_t> observed(join.trees.size(), 0);
  for (size_t d : draws) {
    if (d >= observed.size()) {
      raise(ErrorCategory::Internal, "ForeignTree", "draw index out of range");
    }
    ++observed[d];
  }
  std::vector<double> expected;
  expected.reserve(join.trees.size());
  const double n = static_cast<double>(draws.size());
  for (const auto& t : join.trees) expected.push_back(n * t.weight / join.total_weight);
  return chi_square_gof(observed, expected);
}

ChiSquareResult compare_distributions(const SampleSet& sample, const EnumeratedJoin& join) {
  return compare_distributions(map_sample(sample, join), join);
}

}  // namespace joinsample
