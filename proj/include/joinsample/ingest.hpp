#pragma once

#include <atomic>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "joinsample/model.hpp"

namespace joinsample {

struct Row {
  uint64_t ordinal = 0;
  std::vector<std::string> values;
  bool is_null_row = false;  // synthetic ∅_T row
};

// Completed sequential scans per table. Registration happens up front; the
// counters themselves are atomic so distinct tables can be streamed from
// distinct threads.
class PassRegistry {
 public:
  void register_table(const std::string& name);
  void increment(const std::string& name);
  uint64_t passes(const std::string& name) const;
  std::map<std::string, uint64_t> snapshot() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::unique_ptr<std::atomic<uint64_t>>> counts_;
};

// Sequential reader over an RFC-4180-style delimited file with a header row.
// Yields rows in file order exactly once; the pass counter increments when the
// stream is exhausted. Quoted fields may contain the delimiter and doubled
// quotes; embedded newlines are not supported.
class TableStream {
 public:
  TableStream(const TableRef& table, PassRegistry* registry);
  ~TableStream();

  TableStream(const TableStream&) = delete;
  TableStream& operator=(const TableStream&) = delete;

  bool next(Row& row);
  const TableRef& table() const { return table_; }

 private:
  bool fill();
  bool read_line(std::string& line);

  TableRef table_;
  PassRegistry* registry_;
  std::ifstream file_;
  std::vector<char> buffer_;
  size_t pos_ = 0;
  size_t end_ = 0;
  uint64_t line_number_ = 0;
  uint64_t next_ordinal_ = 0;
  bool exhausted_ = false;
};

// Read buffering honors JOINSAMPLE_BUFFER_BYTES (default 1 MiB).
size_t read_buffer_bytes();

std::vector<std::string> parse_delimited_line(const std::string& line, char delimiter);
std::string format_delimited_line(const std::vector<std::string>& fields, char delimiter);

// Column-weight lookup files are two-column delimited files (value, weight)
// with a header row; values absent from the mapping weigh 0.
std::shared_ptr<const std::unordered_map<std::string, double>> load_weight_lookup(
    const std::string& path, char delimiter = ',');

// Per-table compiled weight expressions. A row's weight is the product over
// columns; the synthetic null row weighs table.null_weight.
class CompiledWeights {
 public:
  CompiledWeights() = default;
  CompiledWeights(const TableRef& table, const WeightSpec& spec);

  double eval(const Row& row) const;
  bool all_default() const { return slots_.empty(); }

 private:
  std::string table_name_;
  double null_weight_ = 1.0;
  size_t column_count_ = 0;
  struct Slot {
    int column = -1;
    WeightExpr expr;
  };
  std::vector<Slot> slots_;
};

}  // namespace joinsample
