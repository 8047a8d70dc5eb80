#include "joinsample/ingest.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>

#include "joinsample/error.hpp"

namespace joinsample {

void PassRegistry::register_table(const std::string& name) {
  std::lock_guard<std::mutex> lock(mutex_);
  auto& slot = counts_[name];
  if (!slot) slot = std::make_unique<std::atomic<uint64_t>>(0);
}

void PassRegistry::increment(const std::string& name) {
  std::lock_guard<std::mutex> lock(mutex_);
  auto& slot = counts_[name];
  if (!slot) slot = std::make_unique<std::atomic<uint64_t>>(0);
  slot->fetch_add(1, std::memory_order_relaxed);
}

uint64_t PassRegistry::passes(const std::string& name) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = counts_.find(name);
  return it == counts_.end() ? 0 : it->second->load(std::memory_order_relaxed);
}

std::map<std::string, uint64_t> PassRegistry::snapshot() const {
  std::lock_guard<std::mutex> lock(mutex_);
  std::map<std::string, uint64_t> out;
  for (const auto& [name, count] : counts_) {
    out[name] = count->load(std::memory_order_relaxed);
  }
  return out;
}

size_t read_buffer_bytes() {
  if (const char* env = std::getenv("JOINSAMPLE_BUFFER_BYTES")) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(env, &end, 10);
    if (end && *end == '\0' && v >= 16) return static_cast<size_t>(v);
  }
  return 1ULL << 20;
}

std::vector<std::string> parse_delimited_line(const std::string& line, char delimiter) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  size_t i = 0;
  const size_t n = line.size();
  while (i <= n) {
    if (i == n) {
      fields.push_back(field);
      break;
    }
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < n && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"' && field.empty()) {
      quoted = true;
    } else if (c == delimiter) {
      fields.push_back(field);
      field.clear();
    } else {
      field.push_back(c);
    }
    ++i;
  }
  return fields;
}

std::string format_delimited_line(const std::vector<std::string>& fields, char delimiter) {
  std::string out;
  for (size_t i = 0; i < fields.size(); ++i) {
    if (i) out.push_back(delimiter);
    const std::string& f = fields[i];
    if (f.find(delimiter) != std::string::npos || f.find('"') != std::string::npos) {
      out.push_back('"');
      for (char c : f) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
      }
      out.push_back('"');
    } else {
      out += f;
    }
  }
  return out;
}

TableStream::TableStream(const TableRef& table, PassRegistry* registry)
    : table_(table), registry_(registry), buffer_(read_buffer_bytes()) {
  file_.open(table.path, std::ios::binary);
  if (!file_) {
    raise(ErrorCategory::Data, "IoError", "cannot open '" + table.path + "'");
  }
  std::string header;
  if (!read_line(header)) {
    raise(ErrorCategory::Data, "SchemaMismatch", "'" + table.path + "' is missing a header row");
  }
  auto names = parse_delimited_line(header, table_.delimiter);
  if (names != table_.columns) {
    raise(ErrorCategory::Data, "SchemaMismatch",
          "header of '" + table.path + "' does not match the declared columns of table '" +
              table_.name + "'");
  }
}

TableStream::~TableStream() = default;

bool TableStream::fill() {
  if (!file_) return false;
  file_.read(buffer_.data(), static_cast<std::streamsize>(buffer_.size()));
  end_ = static_cast<size_t>(file_.gcount());
  pos_ = 0;
  return end_ > 0;
}

bool TableStream::read_line(std::string& line) {
  line.clear();
  bool any = false;
  for (;;) {
    if (pos_ == end_ && !fill()) break;
    any = true;
    size_t start = pos_;
    while (pos_ < end_ && buffer_[pos_] != '\n') ++pos_;
    line.append(buffer_.data() + start, pos_ - start);
    if (pos_ < end_) {
      ++pos_;  // consume '\n'
      break;
    }
  }
  if (!any) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  ++line_number_;
  return true;
}

bool TableStream::next(Row& row) {
  std::string line;
  for (;;) {
    if (exhausted_) return false;
    if (!read_line(line)) {
      exhausted_ = true;
      if (registry_) registry_->increment(table_.name);
      return false;
    }
    if (line.empty()) continue;  // tolerate blank lines
    auto fields = parse_delimited_line(line, table_.delimiter);
    if (fields.size() != table_.columns.size()) {
      raise(ErrorCategory::Data, "SchemaMismatch",
            "'" + table_.path + "' line " + std::to_string(line_number_) + ": expected " +
                std::to_string(table_.columns.size()) + " fields, found " +
                std::to_string(fields.size()));
    }
    row.ordinal = next_ordinal_++;
    row.values = std::move(fields);
    row.is_null_row = false;
    return true;
  }
}

std::shared_ptr<const std::unordered_map<std::string, double>> load_weight_lookup(
    const std::string& path, char delimiter) {
  TableRef ref;
  ref.name = path;
  ref.path = path;
  ref.delimiter = delimiter;
  std::ifstream file(path, std::ios::binary);
  if (!file) {
    raise(ErrorCategory::Data, "IoError", "cannot open weight lookup '" + path + "'");
  }
  auto mapping = std::make_shared<std::unordered_map<std::string, double>>();
  std::string line;
  uint64_t line_number = 0;
  while (std::getline(file, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line_number == 1) continue;  // header
    auto fields = parse_delimited_line(line, delimiter);
    if (fields.size() != 2) {
      raise(ErrorCategory::Data, "SchemaMismatch",
            "weight lookup '" + path + "' line " + std::to_string(line_number) +
                ": expected 2 fields");
    }
    double w = 0.0;
    auto [p, ec] = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), w);
    if (ec != std::errc() || p != fields[1].data() + fields[1].size()) {
      raise(ErrorCategory::Data, "InvalidNumeric",
            "weight lookup '" + path + "' line " + std::to_string(line_number) +
                ": unparseable weight '" + fields[1] + "'");
    }
    (*mapping)[fields[0]] = w;
  }
  return mapping;
}

namespace {

double parse_numeric_cell(const std::string& cell, const std::string& context) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || p != cell.data() + cell.size()) {
    raise(ErrorCategory::Data, "InvalidNumeric",
          context + ": cell '" + cell + "' is not numeric");
  }
  return v;
}

}  // namespace

CompiledWeights::CompiledWeights(const TableRef& table, const WeightSpec& spec)
    : table_name_(table.name),
      null_weight_(table.null_weight),
      column_count_(table.columns.size()) {
  for (size_t i = 0; i < table.columns.size(); ++i) {
    const WeightExpr* e = spec.find(table.name, table.columns[i]);
    if (!e) continue;
    Slot slot;
    slot.column = static_cast<int>(i);
    slot.expr = *e;
    if (auto* lookup = std::get_if<WeightLookup>(&slot.expr)) {
      if (!lookup->mapping) lookup->mapping = load_weight_lookup(lookup->path);
    }
    slots_.push_back(std::move(slot));
  }
}

double CompiledWeights::eval(const Row& row) const {
  if (row.is_null_row) return null_weight_;
  if (row.values.size() != column_count_) {
    raise(ErrorCategory::Internal, "SchemaMismatch",
          "row of '" + table_name_ + "' has the wrong arity");
  }
  double w = 1.0;
  for (const auto& slot : slots_) {
    const std::string& cell = row.values[static_cast<size_t>(slot.column)];
    const std::string context = table_name_ + " row " + std::to_string(row.ordinal);
    double f = 1.0;
    if (const auto* c = std::get_if<WeightConstant>(&slot.expr)) {
      f = c->value;
    } else if (std::get_if<WeightIdentity>(&slot.expr)) {
      f = parse_numeric_cell(cell, context);
    } else if (const auto* lin = std::get_if<WeightLinear>(&slot.expr)) {
      f = lin->a * parse_numeric_cell(cell, context) + lin->b;
    } else if (const auto* pw = std::get_if<WeightPower>(&slot.expr)) {
      double x = parse_numeric_cell(cell, context);
      f = std::pow(pw->base, pw->negate_exponent ? -x : x);
    } else if (const auto* lk = std::get_if<WeightLookup>(&slot.expr)) {
      auto it = lk->mapping->find(cell);
      f = it == lk->mapping->end() ? 0.0 : it->second;
    } else if (const auto* pred = std::get_if<WeightPredicate>(&slot.expr)) {
      bool hit;
      if (pred->cmp == Comparison::Eq) {
        hit = cell == pred->constant;
      } else if (pred->cmp == Comparison::Neq) {
        hit = cell != pred->constant;
      } else {
        hit = compare_doubles(parse_numeric_cell(cell, context), pred->cmp,
                              parse_numeric_cell(pred->constant, "weight predicate"));
      }
      f = hit ? 1.0 : 0.0;
    }
    if (f < 0.0) {
      raise(ErrorCategory::Data, "NegativeWeight",
            context + ": weight factor " + std::to_string(f) + " is negative");
    }
    w *= f;
  }
  if (!std::isfinite(w)) {
    raise(ErrorCategory::Data, "NonFiniteWeight",
          table_name_ + " row " + std::to_string(row.ordinal) + ": weight is not finite");
  }
  return w;
}

}  // namespace joinsample
