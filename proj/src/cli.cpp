#include "joinsample/cli.hpp"

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "joinsample/error.hpp"
#include "joinsample/gof.hpp"
#include "joinsample/oracle.hpp"
#include "joinsample/pipeline.hpp"
#include "joinsample/queryspec.hpp"

namespace joinsample {

namespace {

using nlohmann::json;

struct CommonFlags {
  std::string spec_path;
  std::optional<uint64_t> n;
  std::optional<uint64_t> seed;
  std::string method;
  uint64_t universe = 1ULL << 16;
  double oversample = 0.0;
  std::string temp_dir;
  std::string report_path;
  std::string output_path;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("spec", flags.spec_path, "query specification file")->required();
  cmd->add_option("--n", flags.n, "sample size override");
  cmd->add_option("--seed", flags.seed, "seed override");
  cmd->add_option("--method", flags.method, "stream|economic|hashed|auto");
  cmd->add_option("--universe", flags.universe, "hashed-join universe (power of two)");
  cmd->add_option("--oversample", flags.oversample, "hashed-join oversample factor");
  cmd->add_option("--temp-dir", flags.temp_dir, "directory for merged temporary tables");
  cmd->add_option("--report", flags.report_path, "write the run report to a file");
  cmd->add_option("--output", flags.output_path, "write results to a file (default stdout)");
}

std::ostream& open_output(std::ofstream& file, const std::string& path) {
  if (path.empty()) return std::cout;
  file.open(path, std::ios::binary);
  if (!file) {
    raise(ErrorCategory::Data, "IoError", "cannot write '" + path + "'");
  }
  return file;
}

JoinQuery load_with_overrides(const CommonFlags& flags) {
  JoinQuery q = load_query_spec(flags.spec_path);
  if (flags.n) q.sample_size = *flags.n;
  if (flags.seed) q.seed = *flags.seed;
  if (!flags.method.empty()) q.method = parse_method(flags.method);
  return q;
}

RunOptions options_from(const CommonFlags& flags) {
  RunOptions opts;
  opts.hashed.universe = flags.universe;
  opts.hashed.oversample = flags.oversample;
  opts.temp_dir = flags.temp_dir;
  return opts;
}

json report_to_json(const RunReport& r) {
  json j;
  j["method"] = r.method;
  j["seed"] = r.seed;
  j["passes"] = r.passes;
  j["peak_index_entries"] = r.peak_index_entries;
  j["rounds"] = r.rounds;
  j["wall_ms"] = r.wall_ms;
  if (r.acceptance_rate >= 0.0) j["acceptance_rate"] = r.acceptance_rate;
  if (r.purge_rate >= 0.0) j["purge_rate"] = r.purge_rate;
  if (!r.fallback.empty()) j["fallback"] = r.fallback;
  return j;
}

void emit_report(const RunReport& report, const std::string& path) {
  json j = report_to_json(report);
  if (path.empty()) {
    std::cerr << j.dump() << "\n";
    return;
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) {
    raise(ErrorCategory::Data, "IoError", "cannot write report '" + path + "'");
  }
  file << j.dump(2) << "\n";
}

void print_warnings(const Sampler& sampler) {
  for (const auto& w : sampler.warnings().messages) {
    std::cerr << "warning: " << w << "\n";
  }
}

std::vector<std::string> sample_header(const ValidatedPlan& plan) {
  std::vector<std::string> out{"draw_id"};
  for (const auto& t : plan.reachable) {
    for (const auto& c : plan.table(t)->columns) out.push_back(t + "." + c);
  }
  return out;
}

int cmd_sample(const CommonFlags& flags) {
  JoinQuery query = load_with_overrides(flags);
  Sampler sampler(query, options_from(flags));
  print_warnings(sampler);
  SampleSet sample = sampler.run(query.sample_size, query.seed);

  std::ofstream file;
  std::ostream& out = open_output(file, flags.output_path);
  const auto& plan = sampler.plan();
  auto header = sample_header(plan);
  for (size_t i = 0; i < header.size(); ++i) out << (i ? "\t" : "") << header[i];
  out << "\n";
  for (size_t d = 0; d < sample.trees.size(); ++d) {
    out << d;
    const ResultTree& tree = sample.trees[d];
    for (size_t s = 0; s < sample.tables.size(); ++s) {
      const TableRef* ref = plan.table(sample.tables[s]);
      const TreeSlot& slot = tree.slots[s];
      for (size_t c = 0; c < ref->columns.size(); ++c) {
        out << "\t" << (slot.is_null ? "" : slot.values[c]);
      }
    }
    out << "\n";
  }
  out.flush();
  emit_report(sample.report, flags.report_path);
  return 0;
}

int cmd_oracle(const CommonFlags& flags) {
  JoinQuery query = load_with_overrides(flags);
  ValidatedPlan plan = validate(query, make_edge_stats_provider(query));
  Dataset data = load_dataset(plan.tables);
  EnumeratedJoin join = enumerate_join(plan, query.weights, data);

  std::ofstream file;
  std::ostream& out = open_output(file, flags.output_path);
  auto header = sample_header(plan);
  header[0] = "tree_id";
  header.push_back("weight");
  header.push_back("probability");
  for (size_t i = 0; i < header.size(); ++i) out << (i ? "\t" : "") << header[i];
  out << "\n";
  char buf[64];
  for (size_t i = 0; i < join.trees.size(); ++i) {
    out << i;
    const auto& tree = join.trees[i];
    for (size_t s = 0; s < join.tables.size(); ++s) {
      const TableData& td = data.at(join.tables[s]);
      const uint64_t ord = tree.ordinals[s];
      for (size_t c = 0; c < td.ref.columns.size(); ++c) {
        out << "\t";
        if (ord != kNullOrdinal) out << td.rows[ord].values[c];
      }
    }
    std::snprintf(buf, sizeof buf, "%.17g", tree.weight);
    out << "\t" << buf;
    std::snprintf(buf, sizeof buf, "%.17g", tree.weight / join.total_weight);
    out << "\t" << buf << "\n";
  }
  out.flush();
  if (join.trees.empty()) {
    std::cerr << "warning: join result is empty\n";
  }
  return 0;
}

int cmd_validate(const CommonFlags& flags, int runs, double alpha, bool corrupt) {
  JoinQuery query = load_with_overrides(flags);
  Sampler sampler(query, options_from(flags));
  print_warnings(sampler);
  Dataset data = load_dataset(sampler.plan().tables);
  EnumeratedJoin join = enumerate_join(sampler.plan(), query.weights, data);
  if (join.trees.empty()) {
    raise(ErrorCategory::Data, "ZeroTotalWeight", "join result is empty");
  }
  ReferenceCdf reference(join.probabilities());

  // Power-check mode: a deliberately wrong sampler with squared probabilities.
  EnumeratedJoin corrupted;
  if (corrupt) {
    corrupted = join;
    corrupted.total_weight = 0.0;
    for (auto& t : corrupted.trees) {
      t.weight = t.weight * t.weight;
      corrupted.total_weight += t.weight;
    }
  }

  std::ofstream file;
  std::ostream& out = open_output(file, flags.output_path);
  size_t passes = 0;
  for (int r = 0; r < runs; ++r) {
    const uint64_t run_seed = query.seed + static_cast<uint64_t>(r);
    std::vector<size_t> draws;
    if (corrupt) {
      draws = exact_multinomial(corrupted, query.sample_size, run_seed);
    } else {
      SampleSet sample = sampler.run(query.sample_size, run_seed);
      draws = map_sample(sample, join);
    }
    CounterRng conv_rng(CounterRng(run_seed).fork(777).next_u64());
    auto values = continuous_convert(draws, join.trees.size(), conv_rng);
    const double d = ks_statistic(values, reference);
    KsReport report = make_ks_report(d, query.sample_size);
    const bool pass = d < ks_critical(alpha, query.sample_size);
    if (pass) ++passes;
    json j;
    j["run"] = r;
    j["seed"] = run_seed;
    j["n"] = report.n;
    j["d"] = report.d;
    j["critical"] = {{"0.10", report.critical_010},
                     {"0.05", report.critical_005},
                     {"0.01", report.critical_001}};
    j["pass"] = {{"0.10", report.pass_010},
                 {"0.05", report.pass_005},
                 {"0.01", report.pass_001}};
    j["pass_at_alpha"] = pass;
    out << j.dump() << "\n";
  }
  json summary;
  summary["runs"] = runs;
  summary["alpha"] = alpha;
  summary["pass_fraction"] = static_cast<double>(passes) / static_cast<double>(runs);
  out << summary.dump() << "\n";
  out.flush();
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"weighted random sampling over join queries"};
  app.require_subcommand(1);

  CommonFlags sample_flags, oracle_flags, validate_flags;
  int runs = 1;
  double alpha = 0.01;
  bool corrupt = false;

  CLI::App* sample = app.add_subcommand("sample", "draw a weighted join sample");
  add_common(sample, sample_flags);
  CLI::App* oracle = app.add_subcommand("oracle", "enumerate the join exactly");
  add_common(oracle, oracle_flags);
  CLI::App* validate = app.add_subcommand("validate", "KS goodness-of-fit validation");
  add_common(validate, validate_flags);
  validate->add_option("--validate-runs", runs, "number of validation runs")
      ->check(CLI::PositiveNumber);
  validate->add_option("--alpha", alpha, "significance level for the pass fraction")
      ->check(CLI::Range(1e-12, 0.999999));
  validate->add_flag("--corrupt", corrupt, "sample from a deliberately wrong distribution")
      ->group("");  // hidden: power checks only

  try {
    std::vector<const char*> cargs;
    cargs.push_back("joinsample");
    for (const auto& a : args) cargs.push_back(a.c_str());
    app.parse(static_cast<int>(cargs.size()), const_cast<char**>(cargs.data()));
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (sample->parsed()) return cmd_sample(sample_flags);
    if (oracle->parsed()) return cmd_oracle(oracle_flags);
    if (validate->parsed()) return cmd_validate(validate_flags, runs, alpha, corrupt);
  } catch (const Error& e) {
    json j;
    j["error"] = e.code();
    j["category"] = to_string(e.category());
    j["message"] = e.what();
    std::cerr << j.dump() << "\n";
    switch (e.category()) {
      case ErrorCategory::Spec: return 2;
      case ErrorCategory::Data: return 3;
      case ErrorCategory::Statistical: return 4;
      case ErrorCategory::SizeGuard: return 5;
      case ErrorCategory::Internal: return 1;
    }
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "{\"error\":\"Unhandled\",\"message\":\"" << e.what() << "\"}\n";
    return 1;
  }
  return 2;
}

}  // namespace joinsample
