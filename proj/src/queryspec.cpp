#include "joinsample/queryspec.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "joinsample/error.hpp"

namespace joinsample {

namespace {

using nlohmann::json;

[[noreturn]] void spec_error(const std::string& message) {
  raise(ErrorCategory::Spec, "SpecParse", message);
}

std::string resolve_path(const std::string& path, const std::string& base_dir) {
  namespace fs = std::filesystem;
  fs::path p(path);
  if (p.is_absolute() || base_dir.empty()) return path;
  return (fs::path(base_dir) / p).string();
}

ColumnRef parse_column_ref(const std::string& text) {
  auto dot = text.rfind('.');
  if (dot == std::string::npos || dot == 0 || dot + 1 == text.size()) {
    spec_error("column reference '" + text + "' must look like table.column");
  }
  return {text.substr(0, dot), text.substr(dot + 1)};
}

WeightExpr parse_weight_expr(const json& v, const std::string& base_dir) {
  if (v.is_string() && v.get<std::string>() == "identity") return WeightIdentity{};
  if (v.is_number()) return WeightConstant{v.get<double>()};
  if (!v.is_object()) spec_error("weight expression must be an object, number or \"identity\"");
  if (v.contains("constant")) return WeightConstant{v.at("constant").get<double>()};
  if (v.contains("identity")) return WeightIdentity{};
  if (v.contains("linear")) {
    const auto& arr = v.at("linear");
    if (!arr.is_array() || arr.size() != 2) spec_error("linear weight expects [a, b]");
    return WeightLinear{arr[0].get<double>(), arr[1].get<double>()};
  }
  if (v.contains("power")) {
    WeightPower p;
    p.base = v.at("power").get<double>();
    p.negate_exponent = v.value("negate", false);
    return p;
  }
  if (v.contains("lookup")) {
    WeightLookup l;
    l.path = resolve_path(v.at("lookup").get<std::string>(), base_dir);
    return l;
  }
  if (v.contains("predicate")) {
    const auto& p = v.at("predicate");
    WeightPredicate w;
    w.cmp = parse_comparison(p.at("cmp").get<std::string>());
    if (p.at("value").is_string()) {
      w.constant = p.at("value").get<std::string>();
    } else {
      std::ostringstream os;
      os << p.at("value");
      w.constant = os.str();
    }
    return w;
  }
  spec_error("unknown weight expression: " + v.dump());
}

}  // namespace

JoinQuery parse_query_spec(const std::string& json_text, const std::string& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    spec_error(std::string("invalid JSON: ") + e.what());
  }
  try {
    JoinQuery q;
    if (!doc.contains("tables") || !doc["tables"].is_array() || doc["tables"].empty()) {
      spec_error("spec needs a nonempty 'tables' array");
    }
    for (const auto& t : doc["tables"]) {
      TableRef ref;
      ref.name = t.at("name").get<std::string>();
      ref.path = resolve_path(t.at("path").get<std::string>(), base_dir);
      for (const auto& c : t.at("columns")) ref.columns.push_back(c.get<std::string>());
      ref.null_weight = t.value("null_weight", 1.0);
      std::string delim = t.value("delimiter", std::string(","));
      if (delim.size() != 1) spec_error("delimiter must be a single character");
      ref.delimiter = delim[0];
      q.tables.push_back(std::move(ref));
    }
    for (const auto& j : doc.value("joins", json::array())) {
      JoinEdge e;
      e.left = parse_column_ref(j.at("left").get<std::string>());
      e.right = parse_column_ref(j.at("right").get<std::string>());
      e.op = parse_join_operator(j.value("op", std::string("inner")));
      e.cmp = parse_comparison(j.value("cmp", std::string("=")));
      q.edges.push_back(std::move(e));
    }
    q.main = doc.at("main").get<std::string>();
    if (doc.contains("weights")) {
      for (const auto& [key, value] : doc["weights"].items()) {
        ColumnRef ref = parse_column_ref(key);
        q.weights.set(ref.table, ref.column, parse_weight_expr(value, base_dir));
      }
    }
    if (doc.contains("sample")) {
      const auto& s = doc["sample"];
      q.sample_size = s.value("n", uint64_t{1});
      q.seed = s.value("seed", uint64_t{0});
    }
    q.method = parse_method(doc.value("method", std::string("auto")));
    return q;
  } catch (const json::exception& e) {
    spec_error(std::string("malformed spec: ") + e.what());
  }
}

JoinQuery load_query_spec(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) {
    raise(ErrorCategory::Spec, "SpecParse", "cannot open spec file '" + path + "'");
  }
  std::ostringstream buffer;
  buffer << file.rdbuf();
  return parse_query_spec(buffer.str(),
                          std::filesystem::path(path).parent_path().string());
}

}  // namespace joinsample
