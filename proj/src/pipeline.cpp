#include "joinsample/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <set>

#include "joinsample/error.hpp"

namespace joinsample {

namespace {

double parse_numeric(const std::string& s, const char* what) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    raise(ErrorCategory::Data, "OrderedComparisonOnNonNumeric",
          std::string(what) + " '" + s + "' is not numeric");
  }
  return v;
}

uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

int log2_exact(uint64_t u) {
  int b = -1;
  for (int i = 0; i < 64; ++i) {
    if (u == (1ULL << i)) b = i;
  }
  return b;
}

class MultiplyShiftMapper {
 public:
  MultiplyShiftMapper(uint64_t seed, uint64_t universe) : seed_(seed) {
    bits_ = log2_exact(universe);
    if (bits_ < 1) {
      raise(ErrorCategory::Spec, "InvalidUniverse",
            "hash universe must be a power of two >= 2");
    }
  }
  std::string operator()(const std::string& value) const {
    return std::to_string(multiply_shift_bucket(value, seed_, bits_));
  }

 private:
  uint64_t seed_;
  int bits_ = 0;
};

struct Pending {
  double u = 0.0;
  uint32_t tree = 0;
  double x = 0.0;  // parsed parent value (theta only)
  std::string key;  // parent key (neq only)
  double cum = 0.0;
  bool resolved = false;
  uint64_t last_ordinal = kNullOrdinal;
  std::vector<std::string> last_values;
};

struct Bucket {
  std::vector<std::pair<double, uint32_t>> waiting;  // sorted by u
  size_t next = 0;
  double cum = 0.0;
  uint64_t last_ordinal = kNullOrdinal;
  std::vector<std::string> last_values;
};

}  // namespace

double hashed_oversample_factor(double max_table_rows, double universe, double tables) {
  return 2.0 * std::pow(max_table_rows / universe, tables - 1.0);
}

uint64_t multiply_shift_bucket(const std::string& value, uint64_t seed, int bits) {
  // FNV alone leaves its upper bits poorly mixed for short keys; finalize
  // before the multiply-shift so the top `bits` behave universally.
  uint64_t h = fnv1a64(value);
  h = (h ^ (h >> 30)) * 0xBF58476D1CE4E5B9ULL;
  h = (h ^ (h >> 27)) * 0x94D049BB133111EBULL;
  h ^= h >> 31;
  return ((seed | 1ULL) * h) >> (64 - bits);
}

Sampler::Sampler(JoinQuery query, RunOptions options)
    : query_(std::move(query)), options_(std::move(options)) {
  EdgeStatsProvider stats = make_edge_stats_provider(query_);
  plan_ = validate(query_, stats, &warnings_);
  for (const auto& t : plan_.tables) {
    weights_.emplace(t.name, CompiledWeights(t, query_.weights));
  }
  for (size_t i = 0; i < plan_.reachable.size(); ++i) {
    slot_index_[plan_.reachable[i]] = i;
  }
}

Sampler::StreamState Sampler::build_indexes(PassRegistry& registry,
                                            const KeyMapper& mapper) {
  StreamState state;
  state.indexes.resize(plan_.edges.size());
  for (const auto& t : plan_.tables) registry.register_table(t.name);

  // Leaf-to-root: children before parents.
  for (size_t bi = plan_.bfs_tables.size(); bi-- > 1;) {
    const std::string& child_name = plan_.bfs_tables[bi];
    size_t edge_index = plan_.edges.size();
    for (size_t e = 0; e < plan_.edges.size(); ++e) {
      if (plan_.edges[e].child == child_name) edge_index = e;
    }
    if (edge_index == plan_.edges.size()) {
      raise(ErrorCategory::Internal, "PlanShape", "table without a parent edge");
    }
    const PlanEdge& edge = plan_.edges[edge_index];
    const TableRef* child = plan_.table(child_name);
    TableStream stream(*child, &registry);

    std::vector<EdgeBinding> grandchildren;
    for (size_t e = 0; e < plan_.edges.size(); ++e) {
      const PlanEdge& ge = plan_.edges[e];
      if (ge.parent != child_name) continue;
      EdgeBinding b;
      b.edge = &plan_.edges[e];
      std::vector<std::string> names;
      for (const auto& [pc, cc] : ge.columns) names.push_back(pc);
      b.parent_columns = resolve_columns(*child, names);
      b.index = state.indexes[e].get();
      grandchildren.push_back(b);
    }

    auto index = std::make_unique<JoinIndex>();
    if (mapper && edge.cmp == Comparison::Eq) {
      // Aggregate under hashed join values.
      index->configure(edge, child->null_weight);
      const auto& weights = weights_.at(child_name);
      std::vector<std::string> ccols;
      for (const auto& [pc, cc] : edge.columns) ccols.push_back(cc);
      std::vector<int> key_columns = resolve_columns(*child, ccols);
      Row row;
      uint64_t rows_seen = 0;
      while (stream.next(row)) {
        ++rows_seen;
        double w = weights.eval(row);
        if (w == 0.0) continue;
        double contribution = group_weight(row, w, grandchildren, false);
        auto key = edge_key(row, key_columns);
        if (!key) continue;
        index->add(mapper(*key), contribution);
      }
      index->finalize();
      state.row_counts[child_name] = rows_seen;
    } else {
      *index = build_index(stream, weights_.at(child_name), grandchildren, edge,
                           child->null_weight);
    }
    state.index_entries += index->entry_count();
    state.indexes[edge_index] = std::move(index);
  }

  for (const auto& name : plan_.bfs_tables) {
    std::vector<EdgeBinding> bindings;
    const TableRef* table = plan_.table(name);
    for (size_t e = 0; e < plan_.edges.size(); ++e) {
      const PlanEdge& ge = plan_.edges[e];
      if (ge.parent != name) continue;
      EdgeBinding b;
      b.edge = &plan_.edges[e];
      std::vector<std::string> names;
      for (const auto& [pc, cc] : ge.columns) names.push_back(pc);
      b.parent_columns = resolve_columns(*table, names);
      b.index = state.indexes[e].get();
      bindings.push_back(b);
    }
    state.bindings[name] = std::move(bindings);
  }
  return state;
}

std::vector<ResultTree> Sampler::run_batch(StreamState& state, PassRegistry& registry,
                                           uint64_t n_draws, CounterRng rng,
                                           bool first_batch, const KeyMapper& mapper) {
  const TableRef* main = plan_.table(plan_.main);
  auto& main_bindings = state.bindings[plan_.main];
  const auto& main_weights = weights_.at(plan_.main);

  OnlineMultinomial<MainItem> sampler(n_draws, rng.fork(1), options_.reservoir_mode);
  {
    TableStream stream(*main, &registry);
    Row row;
    while (stream.next(row)) {
      double w = main_weights.eval(row);
      if (w == 0.0) continue;
      double group;
      if (mapper) {
        // Hashed plans are inner equi-joins whose indexes are keyed by hash
        // bucket, so lookups go through the mapper.
        group = w;
        for (auto& b : main_bindings) {
          auto key = edge_key(row, b.parent_columns);
          group *= b.index->lookup(key ? std::optional<std::string>(mapper(*key))
                                       : std::nullopt);
          if (group == 0.0) break;
        }
      } else {
        group = group_weight(row, w, main_bindings, first_batch);
      }
      if (group > 0.0) {
        MainItem item;
        item.ordinal = row.ordinal;
        item.values = row.values;
        sampler.offer(item, group);
      }
    }
  }

  if (first_batch && !state.unmatched_ready) {
    state.unmatched_ready = true;
    state.null_main_group = 0.0;
    bool all_null_parent = !main_bindings.empty();
    for (const auto& b : main_bindings) {
      if (!b.edge->null_extends_parent) all_null_parent = false;
    }
    if (all_null_parent && main->null_weight > 0.0) {
      double group = main->null_weight;
      std::map<size_t, JoinIndex::Unmatched> lists;
      for (const auto& b : main_bindings) {
        size_t e = 0;
        for (; e < plan_.edges.size(); ++e) {
          if (&plan_.edges[e] == b.edge) break;
        }
        auto um = state.indexes[e]->unmatched();
        group *= um.total;
        lists[e] = std::move(um);
      }
      if (group > 0.0) {
        state.null_main_group = group;
        state.main_unmatched = std::move(lists);
      }
    }
  }
  if (state.null_main_group > 0.0) {
    MainItem null_item;
    null_item.ordinal = kNullOrdinal;
    sampler.offer(null_item, state.null_main_group);
  }

  std::vector<MainItem> draws;
  try {
    draws = sampler.draw_all();
  } catch (const Error& e) {
    if (e.code() == "EmptyPopulation") {
      raise(ErrorCategory::Data, "ZeroTotalWeight",
            "join is empty or all weights are zero");
    }
    throw;
  }

  std::vector<ResultTree> trees(draws.size());
  for (size_t i = 0; i < draws.size(); ++i) {
    trees[i].slots.resize(plan_.reachable.size());
    if (draws[i].ordinal == kNullOrdinal) {
      trees[i].main_null = true;
    } else {
      TreeSlot& slot = trees[i].slots[0];
      slot.is_null = false;
      slot.ordinal = draws[i].ordinal;
      slot.values = std::move(draws[i].values);
    }
  }

  CounterRng extension_rng = rng.fork(2);
  for (size_t e = 0; e < plan_.edges.size(); ++e) {
    const PlanEdge& edge = plan_.edges[e];
    if (edge.filter_only) continue;
    if (!plan_.is_reachable(edge.parent)) continue;
    resolve_edge(state, registry, e, trees, extension_rng, mapper);
  }
  return trees;
}

void Sampler::resolve_edge(StreamState& state, PassRegistry& registry,
                           size_t edge_index, std::vector<ResultTree>& trees,
                           CounterRng& rng, const KeyMapper& mapper) {
  const PlanEdge& edge = plan_.edges[edge_index];
  JoinIndex& index = *state.indexes[edge_index];
  const TableRef* parent_table = plan_.table(edge.parent);
  const TableRef* child_table = plan_.table(edge.child);
  const size_t parent_slot = slot_index_.at(edge.parent);
  const size_t child_slot = slot_index_.at(edge.child);

  std::vector<std::string> pnames, cnames;
  for (const auto& [pc, cc] : edge.columns) {
    pnames.push_back(pc);
    cnames.push_back(cc);
  }
  const std::vector<int> parent_cols = resolve_columns(*parent_table, pnames);
  const std::vector<int> child_cols = resolve_columns(*child_table, cnames);

  const bool is_equi = edge.cmp == Comparison::Eq;
  const bool is_neq = edge.cmp == Comparison::Neq;
  const bool is_theta = !is_equi && !is_neq;
  const Comparison stored_cmp = flip_comparison(edge.cmp);

  std::unordered_map<std::string, Bucket> buckets;     // equi
  std::vector<Pending> pendings;                       // theta / neq
  size_t open = 0;

  for (uint32_t t = 0; t < trees.size(); ++t) {
    ResultTree& tree = trees[t];
    if (tree.main_null && edge.parent == plan_.main) {
      // Extend the ∅_main group with an unmatched child row.
      auto it = state.main_unmatched.find(edge_index);
      if (it == state.main_unmatched.end()) {
        raise(ErrorCategory::Internal, "NullMainState", "missing unmatched list");
      }
      const auto& um = it->second;
      const double target = rng.next_unit() * um.total;
      double cum = 0.0;
      const std::pair<std::string, double>* picked = nullptr;
      for (const auto& kv : um.values) {
        cum += kv.second;
        if (cum > target) {
          picked = &kv;
          break;
        }
      }
      if (!picked) {
        for (auto rit = um.values.rbegin(); rit != um.values.rend(); ++rit) {
          if (rit->second > 0.0) {
            picked = &*rit;
            break;
          }
        }
      }
      if (!picked) {
        raise(ErrorCategory::Internal, "NullMainState", "empty unmatched band");
      }
      const double u = rng.next_unit() * picked->second;
      buckets[picked->first].waiting.emplace_back(u, t);
      ++open;
      continue;
    }
    const TreeSlot& pslot = tree.slots[parent_slot];
    if (pslot.is_null) continue;  // NULL propagates down the subtree

    auto key = edge_key_values(pslot.values, parent_cols);
    if (is_equi) {
      std::optional<std::string> mapped =
          key ? std::optional<std::string>(mapper ? mapper(*key) : *key) : std::nullopt;
      if (!mapped || !index.contains(*mapped)) {
        if (!edge.null_extends_child || !(index.child_null_weight() > 0.0)) {
          raise(ErrorCategory::Internal, "UnresolvedDraw",
                "sampled row has no continuation on edge into '" + edge.child + "'");
        }
        // Unmatched under outer semantics: the u-draw falls in the w(∅) band.
        rng.next_unit();
        tree.slots[child_slot].is_null = true;
        continue;
      }
      const double label = index.raw_label(*mapped);
      const double u = rng.next_unit() * label;
      buckets[*mapped].waiting.emplace_back(u, t);
      ++open;
    } else if (is_neq) {
      if (!key) {
        raise(ErrorCategory::Internal, "UnresolvedDraw",
              "sampled row has a NULL join value on a ≠ edge");
      }
      const double label = index.lookup_neq(*key);
      Pending p;
      p.u = rng.next_unit() * label;
      p.tree = t;
      p.key = *key;
      pendings.push_back(std::move(p));
      ++open;
    } else {
      if (!key) {
        raise(ErrorCategory::Internal, "UnresolvedDraw",
              "sampled row has a NULL join value on an ordered edge");
      }
      const double x = parse_numeric(*key, "join value");
      const double label = index.theta_lookup(x);
      Pending p;
      p.u = rng.next_unit() * label;
      p.tree = t;
      p.x = x;
      pendings.push_back(std::move(p));
      ++open;
    }
  }

  if (open == 0) return;  // scan skipped entirely

  for (auto& [key, bucket] : buckets) {
    std::sort(bucket.waiting.begin(), bucket.waiting.end());
  }
  // Theta pendings sorted by parent value so each row touches a contiguous range.
  if (is_theta) {
    std::sort(pendings.begin(), pendings.end(),
              [](const Pending& a, const Pending& b) { return a.x < b.x; });
  }

  auto& child_bindings = state.bindings[edge.child];
  const auto& child_weights = weights_.at(edge.child);

  TableStream stream(*child_table, &registry);
  Row row;
  while (stream.next(row)) {
    double w = child_weights.eval(row);
    if (w == 0.0) continue;
    auto ckey = edge_key(row, child_cols);
    if (!ckey) continue;
    double contribution = group_weight(row, w, child_bindings, false);
    if (is_equi) {
      auto it = buckets.find(mapper ? mapper(*ckey) : *ckey);
      if (it == buckets.end()) continue;
      Bucket& bucket = it->second;
      bucket.cum += contribution;
      if (contribution > 0.0) {
        bucket.last_ordinal = row.ordinal;
        bucket.last_values = row.values;
      }
      while (bucket.next < bucket.waiting.size() &&
             bucket.waiting[bucket.next].first < bucket.cum) {
        TreeSlot& slot = trees[bucket.waiting[bucket.next].second].slots[child_slot];
        slot.is_null = false;
        slot.ordinal = row.ordinal;
        slot.values = row.values;
        ++bucket.next;
        --open;
      }
    } else if (is_neq) {
      for (auto& p : pendings) {
        if (p.resolved || p.key == *ckey) continue;
        p.cum += contribution;
        if (contribution > 0.0) {
          p.last_ordinal = row.ordinal;
          p.last_values = row.values;
        }
        if (p.cum > p.u) {
          p.resolved = true;
          TreeSlot& slot = trees[p.tree].slots[child_slot];
          slot.is_null = false;
          slot.ordinal = row.ordinal;
          slot.values = row.values;
          --open;
        }
      }
    } else {
      const double y = parse_numeric(*ckey, "join value");
      // Stored y qualifies pendings whose x satisfies y stored_cmp x; with
      // pendings sorted by x that is a prefix or suffix.
      size_t lo = 0, hi = pendings.size();
      auto x_less_than = [&](double v) {
        return static_cast<size_t>(
            std::lower_bound(pendings.begin(), pendings.end(), v,
                             [](const Pending& p, double val) { return p.x < val; }) -
            pendings.begin());
      };
      auto x_at_most = [&](double v) {
        return static_cast<size_t>(
            std::upper_bound(pendings.begin(), pendings.end(), v,
                             [](double val, const Pending& p) { return val < p.x; }) -
            pendings.begin());
      };
      switch (stored_cmp) {
        case Comparison::Lt: lo = x_at_most(y); break;        // y < x
        case Comparison::Le: lo = x_less_than(y); break;      // y <= x
        case Comparison::Gt: hi = x_less_than(y); break;      // y > x
        case Comparison::Ge: hi = x_at_most(y); break;        // y >= x
        default: break;
      }
      for (size_t i = lo; i < hi; ++i) {
        Pending& p = pendings[i];
        if (p.resolved) continue;
        p.cum += contribution;
        if (contribution > 0.0) {
          p.last_ordinal = row.ordinal;
          p.last_values = row.values;
        }
        if (p.cum > p.u) {
          p.resolved = true;
          TreeSlot& slot = trees[p.tree].slots[child_slot];
          slot.is_null = false;
          slot.ordinal = row.ordinal;
          slot.values = row.values;
          --open;
        }
      }
    }
  }

  if (open == 0) return;

  // Leftovers within rounding tolerance resolve to their last contributor.
  auto settle = [&](double u, double cum, uint64_t last_ordinal,
                    const std::vector<std::string>& last_values, uint32_t t) {
    if (last_ordinal == kNullOrdinal || u - cum > 1e-9 * std::max(1.0, cum)) {
      raise(ErrorCategory::Data, "UnresolvedDraw",
            "cumulative on edge into '" + edge.child + "' fell short of a draw");
    }
    TreeSlot& slot = trees[t].slots[child_slot];
    slot.is_null = false;
    slot.ordinal = last_ordinal;
    slot.values = last_values;
    --open;
  };
  for (auto& [key, bucket] : buckets) {
    for (size_t i = bucket.next; i < bucket.waiting.size(); ++i) {
      settle(bucket.waiting[i].first, bucket.cum, bucket.last_ordinal,
             bucket.last_values, bucket.waiting[i].second);
    }
  }
  for (auto& p : pendings) {
    if (!p.resolved) settle(p.u, p.cum, p.last_ordinal, p.last_values, p.tree);
  }
  if (open != 0) {
    raise(ErrorCategory::Internal, "UnresolvedDraw", "pending draws left after settling");
  }
}

SampleSet Sampler::finish(std::vector<ResultTree> trees, RunReport report) const {
  // Realized tree weight: the product of slotted row weights, with each
  // direct NULL band contributing its table's null weight once.
  for (auto& tree : trees) {
    double w = tree.main_null ? plan_.table(plan_.main)->null_weight : 0.0;
    if (!tree.main_null) {
      Row view;
      view.ordinal = tree.slots[0].ordinal;
      view.values = tree.slots[0].values;
      w = weights_.at(plan_.main).eval(view);
    }
    for (const auto& edge : plan_.edges) {
      if (edge.filter_only || !plan_.is_reachable(edge.parent)) continue;
      const TreeSlot& ps = tree.slots[slot_index_.at(edge.parent)];
      const TreeSlot& cs = tree.slots[slot_index_.at(edge.child)];
      if (cs.is_null) {
        const bool direct_null = tree.main_null && edge.parent == plan_.main
                                     ? false  // null-main children are always real
                                     : !ps.is_null;
        if (direct_null) w *= plan_.table(edge.child)->null_weight;
        continue;
      }
      Row view;
      view.ordinal = cs.ordinal;
      view.values = cs.values;
      w *= weights_.at(edge.child).eval(view);
    }
    tree.weight = w;
  }
  SampleSet out;
  out.tables = plan_.reachable;
  out.trees = std::move(trees);
  out.report = std::move(report);
  return out;
}

void Sampler::check_stream_contract(const PassRegistry& registry) const {
  if (registry.passes(plan_.main) != 1) {
    raise(ErrorCategory::Internal, "PassContract",
          "main table scanned " + std::to_string(registry.passes(plan_.main)) +
              " times (expected 1)");
  }
  for (const auto& t : plan_.tables) {
    if (t.name == plan_.main) continue;
    if (registry.passes(t.name) > 2) {
      raise(ErrorCategory::Internal, "PassContract",
            "table '" + t.name + "' scanned " + std::to_string(registry.passes(t.name)) +
                " times (expected <= 2)");
    }
  }
}

bool Sampler::residuals_hold(const ResultTree& tree) const {
  for (const auto& r : plan_.residuals) {
    auto li = slot_index_.find(r.left.table);
    auto ri = slot_index_.find(r.right.table);
    if (li == slot_index_.end() || ri == slot_index_.end()) return false;
    const TreeSlot& ls = tree.slots[li->second];
    const TreeSlot& rs = tree.slots[ri->second];
    if (ls.is_null || rs.is_null) return false;
    const TableRef* lt = plan_.table(r.left.table);
    const TableRef* rt = plan_.table(r.right.table);
    const std::string& lv = ls.values[static_cast<size_t>(lt->column_index(r.left.column))];
    const std::string& rv = rs.values[static_cast<size_t>(rt->column_index(r.right.column))];
    if (lv.empty() || rv.empty()) return false;  // NULL satisfies nothing
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

Sampler::GroupWeightSummary Sampler::compute_group_weights() {
  if (!plan_.residuals.empty()) {
    raise(ErrorCategory::Spec, "UnsupportedOperatorCombination",
          "group weights are defined for acyclic plans");
  }
  PassRegistry registry;
  StreamState state = build_indexes(registry, nullptr);
  GroupWeightSummary out;
  auto& bindings = state.bindings[plan_.main];
  const auto& mw = weights_.at(plan_.main);
  const TableRef* main = plan_.table(plan_.main);
  {
    TableStream stream(*main, &registry);
    Row row;
    while (stream.next(row)) {
      double w = mw.eval(row);
      if (w == 0.0) continue;
      double group = group_weight(row, w, bindings, true);
      out.per_row[row.ordinal] = group;
      out.total += group;
    }
  }
  bool all_null_parent = !bindings.empty();
  for (const auto& b : bindings) {
    if (!b.edge->null_extends_parent) all_null_parent = false;
  }
  if (all_null_parent && main->null_weight > 0.0) {
    double group = main->null_weight;
    for (const auto& b : bindings) group *= b.index->unmatched().total;
    out.null_group = group;
    out.total += group;
  }
  return out;
}

SampleSet Sampler::stream_sample(uint64_t n, uint64_t seed) {
  if (!plan_.residuals.empty()) {
    raise(ErrorCategory::Spec, "UnsupportedOperatorCombination",
          "stream sampler requires an acyclic plan; use the cyclic wrapper");
  }
  auto start = std::chrono::steady_clock::now();
  PassRegistry registry;
  StreamState state = build_indexes(registry, nullptr);
  auto trees = run_batch(state, registry, n, CounterRng(seed), true, nullptr);
  check_stream_contract(registry);

  RunReport report;
  report.method = "stream";
  report.seed = seed;
  report.passes = registry.snapshot();
  report.peak_index_entries = state.index_entries;
  report.wall_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - start)
                       .count();
  return finish(std::move(trees), std::move(report));
}

SampleSet Sampler::cyclic_sample(uint64_t n, uint64_t seed) {
  if (plan_.residuals.empty()) {
    raise(ErrorCategory::Spec, "UnsupportedOperatorCombination",
          "cyclic sampler requires residual predicates");
  }
  auto start = std::chrono::steady_clock::now();
  PassRegistry registry;
  StreamState state = build_indexes(registry, nullptr);

  std::vector<ResultTree> kept;
  kept.reserve(n);
  uint64_t proposed = 0, accepted = 0;
  int round = 0;
  CounterRng rng(seed);
  while (kept.size() < n) {
    if (round >= options_.cyclic_max_rounds) {
      raise(ErrorCategory::Statistical, "AcceptanceStall",
            "cyclic rejection exceeded " + std::to_string(options_.cyclic_max_rounds) +
                " rounds (acceptance " +
                std::to_string(proposed ? double(accepted) / double(proposed) : 0.0) + ")");
    }
    ++round;
    auto batch = run_batch(state, registry, n, rng.fork(3000 + static_cast<uint64_t>(round)),
                           round == 1, nullptr);
    for (auto& tree : batch) {
      ++proposed;
      if (residuals_hold(tree)) {
        ++accepted;
        if (kept.size() < n) kept.push_back(std::move(tree));
      }
    }
    if (round >= options_.cyclic_stall_check_rounds &&
        static_cast<double>(accepted) <
            options_.cyclic_acceptance_floor * static_cast<double>(proposed)) {
      raise(ErrorCategory::Statistical, "AcceptanceStall",
            "cyclic rejection acceptance rate " +
                std::to_string(proposed ? double(accepted) / double(proposed) : 0.0) +
                " below floor after " + std::to_string(round) + " rounds");
    }
  }

  RunReport report;
  report.method = "cyclic";
  report.seed = seed;
  report.passes = registry.snapshot();
  report.peak_index_entries = state.index_entries;
  report.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(proposed);
  report.rounds = static_cast<uint64_t>(round);
  report.wall_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - start)
                       .count();
  return finish(std::move(kept), std::move(report));
}

SampleSet Sampler::hashed_join_sample(uint64_t n, uint64_t seed) {
  if (!plan_.residuals.empty()) {
    raise(ErrorCategory::Spec, "UnsupportedOperatorCombination",
          "hashed join sampler requires an acyclic plan");
  }
  for (const auto& e : plan_.edges) {
    if (e.op != JoinOperator::Inner || e.cmp != Comparison::Eq) {
      raise(ErrorCategory::Spec, "UnsupportedOperatorCombination",
            "hashed join sampler supports inner equi-joins only");
    }
  }
  auto start = std::chrono::steady_clock::now();
  PassRegistry registry;

  std::vector<std::vector<int>> parent_cols(plan_.edges.size());
  std::vector<std::vector<int>> child_cols(plan_.edges.size());
  for (size_t e = 0; e < plan_.edges.size(); ++e) {
    std::vector<std::string> pn, cn;
    for (const auto& [pc, cc] : plan_.edges[e].columns) {
      pn.push_back(pc);
      cn.push_back(cc);
    }
    parent_cols[e] = resolve_columns(*plan_.table(plan_.edges[e].parent), pn);
    child_cols[e] = resolve_columns(*plan_.table(plan_.edges[e].child), cn);
  }

  std::vector<ResultTree> kept;
  kept.reserve(n);
  uint64_t proposed = 0, purged = 0;
  uint64_t peak_entries = 0;
  int round = 0;
  CounterRng rng(seed);
  for (; round < options_.hashed.max_retry_rounds && kept.size() < n; ++round) {
    const uint64_t hash_seed = rng.fork(1000 + static_cast<uint64_t>(round)).next_u64();
    MultiplyShiftMapper mapper(hash_seed, options_.hashed.universe);
    StreamState state = build_indexes(registry, mapper);
    peak_entries = std::max(peak_entries, state.index_entries);

    double f = options_.hashed.oversample;
    if (f <= 0.0) {
      double m = 1.0;
      for (const auto& [name, count] : state.row_counts) {
        m = std::max(m, static_cast<double>(count));
      }
      f = std::max(1.0, hashed_oversample_factor(
                            m, static_cast<double>(options_.hashed.universe),
                            static_cast<double>(plan_.tables.size())));
    }
    const uint64_t remaining = n - kept.size();
    uint64_t requested = static_cast<uint64_t>(std::ceil(f * static_cast<double>(remaining)));
    requested = std::max(requested, remaining);
    requested = std::min(requested, options_.hashed.max_batch_draws);

    auto batch = run_batch(state, registry, requested,
                           rng.fork(2000 + static_cast<uint64_t>(round)), true, mapper);
    for (auto& tree : batch) {
      ++proposed;
      bool valid = true;
      for (size_t e = 0; e < plan_.edges.size() && valid; ++e) {
        const TreeSlot& ps = tree.slots[slot_index_.at(plan_.edges[e].parent)];
        const TreeSlot& cs = tree.slots[slot_index_.at(plan_.edges[e].child)];
        for (size_t c = 0; c < parent_cols[e].size(); ++c) {
          if (ps.values[static_cast<size_t>(parent_cols[e][c])] !=
              cs.values[static_cast<size_t>(child_cols[e][c])]) {
            valid = false;
            break;
          }
        }
      }
      if (!valid) {
        ++purged;
      } else if (kept.size() < n) {
        kept.push_back(std::move(tree));
      }
    }
  }
  if (kept.size() < n) {
    raise(ErrorCategory::Statistical, "RetryBudgetExceeded",
          "hashed join sampler collected " + std::to_string(kept.size()) + "/" +
              std::to_string(n) + " samples in " + std::to_string(round) + " rounds");
  }

  RunReport report;
  report.method = "hashed";
  report.seed = seed;
  report.passes = registry.snapshot();
  report.peak_index_entries = peak_entries;
  report.purge_rate = proposed ? static_cast<double>(purged) / static_cast<double>(proposed) : 0.0;
  report.rounds = static_cast<uint64_t>(round);
  report.wall_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - start)
                       .count();
  return finish(std::move(kept), std::move(report));
}

SampleSet Sampler::fk_economic_sample(uint64_t n, uint64_t seed) {
  if (!plan_.residuals.empty()) {
    raise(ErrorCategory::Spec, "UnsupportedOperatorCombination",
          "foreign-key sampler requires an acyclic plan");
  }
  for (const auto& e : plan_.edges) {
    if (e.op != JoinOperator::Inner || e.cmp != Comparison::Eq) {
      raise(ErrorCategory::Spec, "UnsupportedOperatorCombination",
            "foreign-key sampler supports inner equi-joins only");
    }
  }
  auto start = std::chrono::steady_clock::now();
  PassRegistry registry;
  for (const auto& t : plan_.tables) registry.register_table(t.name);

  // Per edge: unique child row per join value, verified during the build scan.
  struct FkEntry {
    uint64_t ordinal;
    std::vector<std::string> values;
    double weight;
  };
  std::vector<std::unordered_map<std::string, FkEntry>> fk_maps(plan_.edges.size());
  std::vector<std::vector<int>> parent_cols(plan_.edges.size());
  double bound = 1.0;
  for (size_t e = 0; e < plan_.edges.size(); ++e) {
    const PlanEdge& edge = plan_.edges[e];
    const TableRef* child = plan_.table(edge.child);
    const TableRef* parent = plan_.table(edge.parent);
    std::vector<std::string> pn, cn;
    for (const auto& [pc, cc] : edge.columns) {
      pn.push_back(pc);
      cn.push_back(cc);
    }
    parent_cols[e] = resolve_columns(*parent, pn);
    std::vector<int> ccols = resolve_columns(*child, cn);

    TableStream stream(*child, &registry);
    Row row;
    double max_w = 0.0;
    const auto& cw = weights_.at(edge.child);
    while (stream.next(row)) {
      double w = cw.eval(row);
      max_w = std::max(max_w, w);
      auto key = edge_key(row, ccols);
      if (!key) continue;
      auto [it, inserted] = fk_maps[e].try_emplace(*key, FkEntry{row.ordinal, row.values, w});
      if (!inserted) {
        raise(ErrorCategory::Data, "KeyViolation",
              "table '" + edge.child + "' has more than one row with join value '" + *key +
                  "'");
      }
    }
    if (!(max_w > 0.0)) {
      raise(ErrorCategory::Data, "ZeroTotalWeight",
            "table '" + edge.child + "' carries no positive weight");
    }
    bound *= max_w;
  }

  const TableRef* main = plan_.table(plan_.main);
  const auto& main_weights = weights_.at(plan_.main);
  const uint64_t per_round =
      static_cast<uint64_t>(options_.fk_oversample) * std::max<uint64_t>(n, 1);

  std::vector<ResultTree> kept;
  kept.reserve(n);
  uint64_t tested = 0, accepted = 0;
  double main_max_w = 0.0;
  CounterRng rng(seed);
  int round = 0;
  for (; round < options_.fk_max_rounds && kept.size() < n; ++round) {
    OnlineMultinomial<MainItem> uniform(per_round, rng.fork(10 + static_cast<uint64_t>(round)),
                                        options_.reservoir_mode);
    {
      TableStream stream(*main, &registry);
      Row row;
      while (stream.next(row)) {
        if (round == 0) main_max_w = std::max(main_max_w, main_weights.eval(row));
        MainItem item;
        item.ordinal = row.ordinal;
        item.values = row.values;
        uniform.offer(item, 1.0);
      }
    }
    if (!(main_max_w > 0.0)) {
      raise(ErrorCategory::Data, "ZeroTotalWeight", "main table carries no positive weight");
    }
    const double total_bound = bound * main_max_w;

    CounterRng accept_rng = rng.fork(20 + static_cast<uint64_t>(round));
    for (auto& candidate : uniform.draw_all()) {
      if (kept.size() >= n) break;
      ++tested;
      ResultTree tree;
      tree.slots.resize(plan_.reachable.size());
      tree.slots[0].is_null = false;
      tree.slots[0].ordinal = candidate.ordinal;
      tree.slots[0].values = candidate.values;
      Row view;
      view.ordinal = candidate.ordinal;
      view.values = candidate.values;
      double weight = main_weights.eval(view);
      for (size_t e = 0; e < plan_.edges.size(); ++e) {
        const PlanEdge& edge = plan_.edges[e];
        const TreeSlot& ps = tree.slots[slot_index_.at(edge.parent)];
        auto key = edge_key_values(ps.values, parent_cols[e]);
        auto it = key ? fk_maps[e].find(*key) : fk_maps[e].end();
        if (it == fk_maps[e].end()) {
          raise(ErrorCategory::Data, "KeyViolation",
                "main-side row has no continuation in '" + edge.child + "'");
        }
        TreeSlot& cs = tree.slots[slot_index_.at(edge.child)];
        cs.is_null = false;
        cs.ordinal = it->second.ordinal;
        cs.values = it->second.values;
        weight *= it->second.weight;
      }
      if (accept_rng.next_unit() * total_bound < weight) {
        ++accepted;
        kept.push_back(std::move(tree));
      }
    }
  }
  if (kept.size() < n) {
    raise(ErrorCategory::Statistical, "AcceptanceStall",
          "foreign-key rejection accepted " + std::to_string(kept.size()) + "/" +
              std::to_string(n) + " after " + std::to_string(round) + " rounds (rate " +
              std::to_string(tested ? double(accepted) / double(tested) : 0.0) + ")");
  }

  RunReport report;
  report.method = "economic";
  report.seed = seed;
  report.passes = registry.snapshot();
  report.peak_index_entries = 0;
  for (const auto& m : fk_maps) report.peak_index_entries += m.size();
  report.acceptance_rate = tested ? static_cast<double>(accepted) / static_cast<double>(tested) : 0.0;
  report.rounds = static_cast<uint64_t>(round);
  report.wall_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - start)
                       .count();
  return finish(std::move(kept), std::move(report));
}

Method Sampler::select_method(uint64_t n) {
  if (!plan_.residuals.empty()) return Method::Stream;  // run() wraps cyclically

  bool all_inner_equi = true;
  for (const auto& e : plan_.edges) {
    if (e.op != JoinOperator::Inner || e.cmp != Comparison::Eq) all_inner_equi = false;
  }
  if (!all_inner_equi || plan_.edges.empty()) return Method::Stream;

  // One statistics pass per table: FK shape, distinct counts, weight skew.
  bool fk_shaped = true;
  uint64_t max_distinct = 0;
  double skew = 1.0;
  std::vector<std::unordered_map<std::string, uint64_t>> key_sets(plan_.edges.size());
  for (size_t e = 0; e < plan_.edges.size(); ++e) {
    const PlanEdge& edge = plan_.edges[e];
    const TableRef* child = plan_.table(edge.child);
    std::vector<std::string> cn;
    for (const auto& [pc, cc] : edge.columns) cn.push_back(cc);
    std::vector<int> ccols = resolve_columns(*child, cn);
    TableStream stream(*child, nullptr);
    Row row;
    double max_w = 0.0, sum_w = 0.0;
    uint64_t rows = 0;
    const auto& cw = weights_.at(edge.child);
    while (stream.next(row)) {
      ++rows;
      double w = cw.eval(row);
      max_w = std::max(max_w, w);
      sum_w += w;
      auto key = edge_key(row, ccols);
      if (!key) continue;
      if (++key_sets[e][*key] > 1) fk_shaped = false;
    }
    max_distinct = std::max<uint64_t>(max_distinct, key_sets[e].size());
    if (rows == 0 || !(sum_w > 0.0)) {
      fk_shaped = false;
    } else {
      skew *= max_w / (sum_w / static_cast<double>(rows));
    }
  }
  {
    const TableRef* main = plan_.table(plan_.main);
    TableStream stream(*main, nullptr);
    Row row;
    double max_w = 0.0, sum_w = 0.0;
    uint64_t rows = 0;
    const auto& mw = weights_.at(plan_.main);
    std::vector<std::vector<int>> pcols;
    for (size_t e = 0; e < plan_.edges.size(); ++e) {
      if (plan_.edges[e].parent != plan_.main) {
        pcols.emplace_back();
        continue;
      }
      std::vector<std::string> pn;
      for (const auto& [pc, cc] : plan_.edges[e].columns) pn.push_back(pc);
      pcols.push_back(resolve_columns(*main, pn));
    }
    while (stream.next(row)) {
      ++rows;
      double w = mw.eval(row);
      max_w = std::max(max_w, w);
      sum_w += w;
      for (size_t e = 0; e < plan_.edges.size() && fk_shaped; ++e) {
        if (plan_.edges[e].parent != plan_.main) continue;
        auto key = edge_key(row, pcols[e]);
        if (!key || !key_sets[e].count(*key)) fk_shaped = false;
      }
    }
    if (rows == 0 || !(sum_w > 0.0)) {
      fk_shaped = false;
    } else {
      skew *= max_w / (sum_w / static_cast<double>(rows));
    }
  }

  if (fk_shaped && skew <= 4.0) return Method::Economic;
  if (max_distinct >= 100000 && n <= max_distinct / 100) return Method::Hashed;
  return Method::Stream;
}

SampleSet Sampler::run(uint64_t n, uint64_t seed) {
  Method method = options_.method.value_or(query_.method);
  if (method == Method::Auto) {
    if (!plan_.residuals.empty()) return cyclic_sample(n, seed);
    method = select_method(n);
  }
  switch (method) {
    case Method::Stream:
      if (!plan_.residuals.empty()) return cyclic_sample(n, seed);
      return stream_sample(n, seed);
    case Method::Hashed:
      return hashed_join_sample(n, seed);
    case Method::Economic: {
      if (!plan_.residuals.empty()) {
        JoinQuery simplified =
            simplify_join_graph(query_, options_.simplify_budget, options_.temp_dir);
        if (simplified.tables.size() < query_.tables.size()) {
          RunOptions inner_options = options_;
          inner_options.method = Method::Economic;
          Sampler inner(simplified, inner_options);
          SampleSet out = inner.run(n, seed);
          out.report.fallback = "simplified";
          return out;
        }
        return cyclic_sample(n, seed);
      }
      bool fk_possible = !plan_.edges.empty();
      for (const auto& e : plan_.edges) {
        if (e.op != JoinOperator::Inner || e.cmp != Comparison::Eq) fk_possible = false;
      }
      if (fk_possible) {
        try {
          return fk_economic_sample(n, seed);
        } catch (const Error& err) {
          if (err.code() == "KeyViolation") {
            // Not actually foreign-key shaped: general acyclic joins go
            // through the hashed technique.
            return hashed_join_sample(n, seed);
          }
          if (err.code() != "AcceptanceStall") throw;
          // Rejection rate too high: switch to the stream sampler.
          SampleSet out = stream_sample(n, seed);
          out.report.method = "economic";
          out.report.fallback = "stream";
          return out;
        }
      }
      return hashed_join_sample(n, seed);
    }
    case Method::Auto:
      break;
  }
  raise(ErrorCategory::Internal, "MethodDispatch", "unreachable method state");
}

// ---------------------------------------------------------------------------

namespace {

struct PairCount {
  uint64_t left_rows = 0;
  uint64_t right_rows = 0;
  double join_size = 0.0;
};

PairCount count_two_way(const JoinQuery& query, const JoinEdge& edge) {
  PairCount out;
  const TableRef* left = query.table(edge.left.table);
  const TableRef* right = query.table(edge.right.table);
  std::unordered_map<std::string, uint64_t> left_counts;
  {
    TableStream stream(*left, nullptr);
    Row row;
    int col = left->column_index(edge.left.column);
    while (stream.next(row)) {
      ++out.left_rows;
      const std::string& v = row.values[static_cast<size_t>(col)];
      if (!v.empty()) ++left_counts[v];
    }
  }
  {
    TableStream stream(*right, nullptr);
    Row row;
    int col = right->column_index(edge.right.column);
    while (stream.next(row)) {
      ++out.right_rows;
      const std::string& v = row.values[static_cast<size_t>(col)];
      if (v.empty()) continue;
      auto it = left_counts.find(v);
      if (it != left_counts.end()) out.join_size += static_cast<double>(it->second);
    }
  }
  return out;
}

}  // namespace

EdgeStatsProvider make_edge_stats_provider(const JoinQuery& query) {
  auto cache = std::make_shared<std::map<std::string, EdgeStatistics>>();
  JoinQuery snapshot = query;
  return [cache, snapshot](const JoinEdge& edge) -> EdgeStatistics {
    auto it = cache->find(edge.name());
    if (it != cache->end()) return it->second;
    EdgeStatistics stats;
    if (edge.cmp == Comparison::Eq) {
      PairCount pc = count_two_way(snapshot, edge);
      stats.known = true;
      stats.join_size = pc.join_size;
      stats.left_rows = static_cast<double>(pc.left_rows);
      stats.right_rows = static_cast<double>(pc.right_rows);
    }
    (*cache)[edge.name()] = stats;
    return stats;
  };
}

JoinQuery simplify_join_graph(const JoinQuery& query, double budget,
                              const std::string& temp_dir) {
  namespace fs = std::filesystem;
  JoinQuery work = query;
  fs::path dir = temp_dir.empty() ? fs::temp_directory_path() : fs::path(temp_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    raise(ErrorCategory::Data, "TempStorageError",
          "cannot create temp directory '" + dir.string() + "'");
  }

  auto incident_all_inner = [&](const std::string& table) {
    for (const auto& e : work.edges) {
      if ((e.left.table == table || e.right.table == table) &&
          e.op != JoinOperator::Inner) {
        return false;
      }
    }
    return true;
  };

  int merge_counter = 0;
  for (;;) {
    int best = -1;
    double best_ratio = 0.0;
    PairCount best_counts;
    for (size_t i = 0; i < work.edges.size(); ++i) {
      const JoinEdge& e = work.edges[i];
      if (e.op != JoinOperator::Inner || e.cmp != Comparison::Eq) continue;
      if (!incident_all_inner(e.left.table) || !incident_all_inner(e.right.table)) continue;
      PairCount pc = count_two_way(work, e);
      double denom = std::max<double>(1.0, std::max(pc.left_rows, pc.right_rows));
      double ratio = pc.join_size / denom;
      if (ratio > budget) continue;
      if (best < 0 || ratio < best_ratio ||
          (ratio == best_ratio && e.name() < work.edges[static_cast<size_t>(best)].name())) {
        best = static_cast<int>(i);
        best_ratio = ratio;
        best_counts = pc;
      }
    }
    if (best < 0) break;

    const JoinEdge merge_edge = work.edges[static_cast<size_t>(best)];
    const TableRef left = *work.table(merge_edge.left.table);
    const TableRef right = *work.table(merge_edge.right.table);

    // Sibling conditions between the same pair become row filters.
    struct Filter {
      int lcol, rcol;
      Comparison cmp;
    };
    std::vector<Filter> filters;
    std::vector<size_t> dropped_edges{static_cast<size_t>(best)};
    for (size_t i = 0; i < work.edges.size(); ++i) {
      if (i == static_cast<size_t>(best)) continue;
      const JoinEdge& e = work.edges[i];
      bool fwd = e.left.table == left.name && e.right.table == right.name;
      bool rev = e.left.table == right.name && e.right.table == left.name;
      if (!fwd && !rev) continue;
      Filter f;
      if (fwd) {
        f.lcol = left.column_index(e.left.column);
        f.rcol = right.column_index(e.right.column);
        f.cmp = e.cmp;
      } else {
        f.lcol = left.column_index(e.right.column);
        f.rcol = right.column_index(e.left.column);
        f.cmp = flip_comparison(e.cmp);
      }
      filters.push_back(f);
      dropped_edges.push_back(i);
    }

    // Merged schema: left columns then right columns, prefixing on collision.
    TableRef merged;
    merged.name = left.name + "__" + right.name;
    while (work.table(merged.name)) merged.name += "_";
    merged.null_weight = left.null_weight * right.null_weight;
    merged.delimiter = ',';
    std::map<std::pair<std::string, std::string>, std::string> rename;
    std::set<std::string> taken;
    auto add_column = [&](const std::string& table, const std::string& col) {
      std::string name = taken.count(col) ? table + "__" + col : col;
      while (taken.count(name)) name += "_";
      taken.insert(name);
      merged.columns.push_back(name);
      rename[{table, col}] = name;
    };
    for (const auto& c : left.columns) add_column(left.name, c);
    for (const auto& c : right.columns) add_column(right.name, c);
    merged.path =
        (dir / (merged.name + "_" + std::to_string(merge_counter++) + ".csv")).string();

    // Materialize: load the right side grouped by key, stream the left.
    {
      std::unordered_map<std::string, std::vector<std::vector<std::string>>> right_rows;
      {
        TableStream stream(right, nullptr);
        Row row;
        int col = right.column_index(merge_edge.right.column);
        while (stream.next(row)) {
          const std::string& v = row.values[static_cast<size_t>(col)];
          if (v.empty()) continue;
          right_rows[v].push_back(row.values);
        }
      }
      std::ofstream out(merged.path, std::ios::binary);
      if (!out) {
        raise(ErrorCategory::Data, "TempStorageError",
              "cannot write merged table '" + merged.path + "'");
      }
      out << format_delimited_line(merged.columns, merged.delimiter) << "\n";
      TableStream stream(left, nullptr);
      Row row;
      int col = left.column_index(merge_edge.left.column);
      std::vector<std::string> fields(merged.columns.size());
      while (stream.next(row)) {
        const std::string& v = row.values[static_cast<size_t>(col)];
        if (v.empty()) continue;
        auto it = right_rows.find(v);
        if (it == right_rows.end()) continue;
        for (const auto& rvals : it->second) {
          bool ok = true;
          for (const auto& f : filters) {
            const std::string& lv = row.values[static_cast<size_t>(f.lcol)];
            const std::string& rv = rvals[static_cast<size_t>(f.rcol)];
            if (lv.empty() || rv.empty()) {
              ok = false;
              break;
            }
            switch (f.cmp) {
              case Comparison::Eq: ok = lv == rv; break;
              case Comparison::Neq: ok = lv != rv; break;
              default:
                ok = compare_doubles(parse_numeric(lv, "merge filter"), f.cmp,
                                     parse_numeric(rv, "merge filter"));
                break;
            }
            if (!ok) break;
          }
          if (!ok) continue;
          size_t k = 0;
          for (const auto& cell : row.values) fields[k++] = cell;
          for (const auto& cell : rvals) fields[k++] = cell;
          out << format_delimited_line(fields, merged.delimiter) << "\n";
        }
      }
      if (!out) {
        raise(ErrorCategory::Data, "TempStorageError",
              "write failure on merged table '" + merged.path + "'");
      }
    }

    // Rewrite the query against the merged table.
    JoinQuery next;
    next.main = (work.main == left.name || work.main == right.name) ? merged.name : work.main;
    next.sample_size = work.sample_size;
    next.seed = work.seed;
    next.method = work.method;
    for (const auto& t : work.tables) {
      if (t.name == left.name || t.name == right.name) continue;
      next.tables.push_back(t);
    }
    next.tables.push_back(merged);
    auto remap = [&](ColumnRef r) {
      if (r.table == left.name || r.table == right.name) {
        return ColumnRef{merged.name, rename.at({r.table, r.column})};
      }
      return r;
    };
    for (size_t i = 0; i < work.edges.size(); ++i) {
      if (std::find(dropped_edges.begin(), dropped_edges.end(), i) != dropped_edges.end()) {
        continue;
      }
      JoinEdge e = work.edges[i];
      e.left = remap(e.left);
      e.right = remap(e.right);
      next.edges.push_back(e);
    }
    for (const auto& [key, expr] : work.weights.exprs) {
      ColumnRef r = remap({key.first, key.second});
      next.weights.set(r.table, r.column, expr);
    }
    work = std::move(next);
  }
  return work;
}

}  // namespace joinsample
