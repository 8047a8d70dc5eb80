#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "joinsample/ingest.hpp"
#include "joinsample/model.hpp"
#include "joinsample/pipeline.hpp"
#include "joinsample/stats.hpp"

namespace joinsample {

struct TableData {
  TableRef ref;
  std::vector<Row> rows;
};
using Dataset = std::map<std::string, TableData>;

Dataset load_dataset(const std::vector<TableRef>& tables);

struct EnumeratedTree {
  std::vector<uint64_t> ordinals;  // plan.reachable order; kNullOrdinal = NULL / ∅_main
  double weight = 0.0;
};

// Full join enumeration with exact product weights, in canonical order
// (lexicographic by reachable-table row ordinals, NULLs last).
struct EnumeratedJoin {
  std::vector<std::string> tables;
  std::vector<EnumeratedTree> trees;
  double total_weight = 0.0;

  static constexpr size_t npos = ~size_t{0};
  size_t index_of(const std::vector<uint64_t>& ordinals) const;
  std::vector<double> probabilities() const;

  std::unordered_map<std::string, size_t> lookup;
};

// Nested evaluation honoring inner/outer/semi/anti joins, ordered and ≠
// comparisons, the trivial null rule, and residual cyclic predicates.
// Deliberately independent of the index machinery it cross-checks.
EnumeratedJoin enumerate_join(const ValidatedPlan& plan, const WeightSpec& weights,
                              const Dataset& data, uint64_t size_guard = 10000000);

EnumeratedJoin enumerate_join(const JoinQuery& query, uint64_t size_guard = 10000000);

// n independent inversion draws over the enumerated weights; returns tree
// indices.
std::vector<size_t> exact_multinomial(const EnumeratedJoin& join, size_t n, uint64_t seed);

// Maps sampled trees onto enumerated indices; a tree absent from the
// enumeration means the sampler emitted a non-join row.
std::vector<size_t> map_sample(const SampleSet& sample, const EnumeratedJoin& join);

// Pearson chi-square of a sample against the enumerated distribution,
// pooling categories with expected count below 5.
ChiSquareResult compare_distributions(const std::vector<size_t>& draws,
                                      const EnumeratedJoin& join);
ChiSquareResult compare_distributions(const SampleSet& sample, const EnumeratedJoin& join);

}  // namespace joinsample
