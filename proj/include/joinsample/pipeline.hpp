#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "joinsample/ingest.hpp"
#include "joinsample/joinindex.hpp"
#include "joinsample/model.hpp"
#include "joinsample/multinomial.hpp"
#include "joinsample/rng.hpp"

namespace joinsample {

constexpr uint64_t kNullOrdinal = ~0ULL;

struct TreeSlot {
  bool is_null = true;
  uint64_t ordinal = 0;
  std::vector<std::string> values;
};

// One sampled join row: one slot per reachable table (plan.reachable order);
// main_null marks the synthetic null-main group.
struct ResultTree {
  bool main_null = false;
  double weight = 0.0;  // realized product weight of the tree
  std::vector<TreeSlot> slots;

  std::vector<uint64_t> ordinals() const {
    std::vector<uint64_t> out;
    out.reserve(slots.size());
    for (const auto& s : slots) out.push_back(s.is_null ? kNullOrdinal : s.ordinal);
    return out;
  }
};

struct RunReport {
  std::string method;
  std::map<std::string, uint64_t> passes;
  uint64_t peak_index_entries = 0;
  double acceptance_rate = -1.0;  // fk rejection / cyclic keep rate; <0 = n/a
  double purge_rate = -1.0;       // hashed superfluous fraction; <0 = n/a
  uint64_t rounds = 1;
  double wall_ms = 0.0;
  uint64_t seed = 0;
  std::string fallback;  // strategy the sampler fell back to, if any
};

struct SampleSet {
  std::vector<std::string> tables;  // reachable tables, main first
  std::vector<ResultTree> trees;
  RunReport report;
};

struct HashedJoinConfig {
  uint64_t universe = 1ULL << 16;  // power of two
  double oversample = 0.0;         // 0 = heuristic 2(m/u)^(k-1)
  int max_retry_rounds = 8;
  uint64_t max_batch_draws = 1ULL << 22;  // memory cap on one round's request
};

// Oversampling heuristic for the hash-relaxed superset.
double hashed_oversample_factor(double max_table_rows, double universe, double tables);

// 64-bit multiply-shift reduction of a join value to one of 2^bits buckets.
uint64_t multiply_shift_bucket(const std::string& value, uint64_t seed, int bits);

struct RunOptions {
  std::optional<Method> method;  // overrides the query's method
  HashedJoinConfig hashed;
  std::string temp_dir;  // merged-table spill location; empty = system temp
  int fk_oversample = 10;
  int fk_max_rounds = 3;
  int cyclic_stall_check_rounds = 3;
  double cyclic_acceptance_floor = 1e-4;
  int cyclic_max_rounds = 1000;
  double simplify_budget = 1.1;
  ReservoirMode reservoir_mode = ReservoirMode::ExponentialJumps;
};

// Exact two-way join sizes via one hash-count pass per edge; used for cycle
// break-edge selection.
EdgeStatsProvider make_edge_stats_provider(const JoinQuery& query);

// Greedily pre-joins adjacent tables whose pairwise join is at most
// budget × the larger input, materializing merged tables as delimited files
// under temp_dir. May turn a cyclic graph acyclic. Only inner equi-joins whose
// endpoints touch no outer/semi/anti edge are merged.
JoinQuery simplify_join_graph(const JoinQuery& query, double budget,
                              const std::string& temp_dir);

class Sampler {
 public:
  explicit Sampler(JoinQuery query, RunOptions options = {});

  const ValidatedPlan& plan() const { return plan_; }
  const JoinQuery& query() const { return query_; }
  const ValidationWarnings& warnings() const { return warnings_; }

  // Dispatches on the configured method ('auto' gathers statistics first).
  SampleSet run(uint64_t n, uint64_t seed);

  SampleSet stream_sample(uint64_t n, uint64_t seed);
  SampleSet fk_economic_sample(uint64_t n, uint64_t seed);
  SampleSet hashed_join_sample(uint64_t n, uint64_t seed);
  SampleSet cyclic_sample(uint64_t n, uint64_t seed);

  Method select_method(uint64_t n);

  // Group weights W(ρ) for every positive-weight main row plus the ∅_main
  // group, computed through the index machinery (acyclic plans only). This is
  // the surface the brute-force oracle cross-checks.
  struct GroupWeightSummary {
    std::map<uint64_t, double> per_row;  // main ordinal -> W(ρ)
    double null_group = 0.0;
    double total = 0.0;
  };
  GroupWeightSummary compute_group_weights();

 private:
  struct MainItem {
    uint64_t ordinal = 0;  // kNullOrdinal = ∅_main
    std::vector<std::string> values;
  };

  struct StreamState {
    std::vector<std::unique_ptr<JoinIndex>> indexes;  // plan.edges order
    // Child-edge bindings per table name (parent side).
    std::map<std::string, std::vector<EdgeBinding>> bindings;
    std::map<std::string, uint64_t> row_counts;  // non-main tables, from the build pass
    double null_main_group = 0.0;
    std::map<size_t, JoinIndex::Unmatched> main_unmatched;  // by edge position
    bool unmatched_ready = false;
    uint64_t index_entries = 0;
  };

  using KeyMapper = std::function<std::string(const std::string&)>;

  StreamState build_indexes(PassRegistry& registry, const KeyMapper& mapper);
  std::vector<ResultTree> run_batch(StreamState& state, PassRegistry& registry,
                                    uint64_t n_draws, CounterRng rng,
                                    bool first_batch, const KeyMapper& mapper);
  void resolve_edge(StreamState& state, PassRegistry& registry, size_t edge_index,
                    std::vector<ResultTree>& trees, CounterRng& rng,
                    const KeyMapper& mapper);
  SampleSet finish(std::vector<ResultTree> trees, RunReport report) const;
  void check_stream_contract(const PassRegistry& registry) const;
  bool residuals_hold(const ResultTree& tree) const;

  JoinQuery query_;
  RunOptions options_;
  ValidationWarnings warnings_;
  ValidatedPlan plan_;
  std::map<std::string, CompiledWeights> weights_;
  std::map<std::string, size_t> slot_index_;  // reachable table -> slot
};

}  // namespace joinsample
