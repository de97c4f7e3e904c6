#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "rescbf/io.hpp"

namespace rescbf::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kOutputRootEnv = "RESCBF_OUTPUT_ROOT";

struct CommonOptions {
  std::string config_path;
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  std::string out_dir;
  int stride = 10;
};

fs::path output_root() {
  const char* env = std::getenv(kOutputRootEnv);
  return (env && *env) ? fs::path(env) : fs::path("rescbf-out");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

KeyValues parse_overrides(const std::vector<std::string>& overrides) {
  KeyValues kv;
  for (const auto& item : overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ConfigError("override", "expected key=value, got '" + item + "'");
    kv[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return kv;
}

// Config file (or the preset), then --scenario, then --seed, then overrides.
WorldConfig resolve_config(const CommonOptions& opt) {
  WorldConfig cfg;
  std::optional<Scenario> scenario;
  if (!opt.scenario.empty()) {
    scenario = parse_scenario(opt.scenario);
    if (!scenario) throw ConfigError("scenario", "unknown scenario '" + opt.scenario + "'");
  }
  if (!opt.config_path.empty())
    cfg = parse_config(read_file(opt.config_path));
  else
    cfg = scenario_config(scenario.value_or(Scenario::kNominal), cfg.seed);
  if (scenario) cfg.attack.connectivity_bias = scenario_bias(*scenario);
  if (opt.seed) cfg.seed = *opt.seed;
  cfg = apply_key_values(cfg, parse_overrides(opt.overrides));
  cfg.validate();
  return cfg;
}

std::string format_number(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

std::string bias_label(double bias) {
  for (Scenario s : {Scenario::kNominal, Scenario::kUnderstate, Scenario::kOverstate})
    if (scenario_bias(s) == bias) return std::string(to_string(s));
  return "eps" + format_number(bias);
}

bool run_passed(const RunSummary& s) {
  return s.verdict.converged && s.verdict.safety_held && s.violation_events == 0;
}

void print_summary(std::ostream& out, const RunSummary& s, const fs::path& dir) {
  out << "output: " << dir.string() << '\n'
      << "f_prime: " << s.f_prime << '\n'
      << "converged: " << (s.verdict.converged ? "true" : "false") << '\n'
      << "safety_held: " << (s.verdict.safety_held ? "true" : "false") << '\n'
      << "final_spread: " << s.verdict.final_spread << '\n'
      << "min_h_normal: " << s.min_h_normal << '\n'
      << "min_pairwise_distance: " << s.min_distance << '\n'
      << "min_degree_normal: " << s.min_degree_normal << '\n'
      << "violation_events: " << s.violation_events << '\n'
      << "infeasible_qp_events: " << s.infeasible_events << '\n';
}

int cmd_run(const CommonOptions& opt, std::ostream& out) {
  const WorldConfig cfg = resolve_config(opt);
  const fs::path dir = opt.out_dir.empty()
                           ? output_root() / (bias_label(cfg.attack.connectivity_bias) + "-seed" + std::to_string(cfg.seed))
                           : fs::path(opt.out_dir);
  const ScenarioResult result = run_scenario(cfg);
  const RunSummary summary = summarize(cfg, result);
  write_run_outputs(dir, cfg, result, summary, opt.config_path, opt.stride);
  print_summary(out, summary, dir);
  return run_passed(summary) ? kExitOk : kExitFailure;
}

std::string format_nodes(const std::vector<int>& nodes) {
  std::string s = "{";
  for (std::size_t k = 0; k < nodes.size(); ++k) s += (k ? ", " : "") + std::to_string(nodes[k]);
  return s + "}";
}

struct RobustnessOptions {
  std::string edge_file;
  std::optional<int> r;
  std::optional<int> s;
  bool lemma1 = false;
  int cap = kDefaultRobustnessCap;
};

int cmd_check_robustness(const RobustnessOptions& opt, std::ostream& out, std::ostream& err) {
  std::ifstream in(opt.edge_file);
  if (!in) {
    err << "error: cannot read '" << opt.edge_file << "'\n";
    return kExitInvalid;
  }
  GraphSnapshot g(0, {});
  try {
    g = read_edge_list(in);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
  out << "nodes: " << g.size() << ", edges: " << g.edges().size() << '\n';

  if (opt.lemma1) {
    const auto bound = lemma1_bound(g);
    if (!bound) {
      out << "lemma1: degree condition not met (min degree " << g.min_degree() << ")\n";
      return kExitFailure;
    }
    out << "lemma1 bound: r = " << *bound << '\n';
    if (*bound < 1) {
      out << "bound is vacuous, nothing to confirm\n";
      return kExitOk;
    }
    for (int s = 1; s <= g.size(); ++s) {
      const auto res = is_rs_robust(g, *bound, s, opt.cap);
      if (!res) {
        out << "refuted at s = " << s << ": witness S1 = " << format_nodes(res.witness_s1)
            << ", S2 = " << format_nodes(res.witness_s2) << '\n';
        return kExitFailure;
      }
    }
    out << "confirmed: (" << *bound << ",s)-robust for 1 <= s <= " << g.size() << '\n';
    return kExitOk;
  }

  if (!opt.r || !opt.s) {
    err << "error: --r and --s are required unless --lemma1 is given\n";
    return kExitInvalid;
  }
  if (*opt.r < 0 || *opt.s < 0) {
    err << "error: r and s must be >= 0\n";
    return kExitInvalid;
  }
  const auto res = is_rs_robust(g, *opt.r, *opt.s, opt.cap);
  if (res) {
    out << "robust\n";
    return kExitOk;
  }
  out << "not robust\nwitness: S1 = " << format_nodes(res.witness_s1) << ", S2 = " << format_nodes(res.witness_s2)
      << '\n';
  return kExitFailure;
}

// --- sweep ----------------------------------------------------------------

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

double parse_double(const std::string& field, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || !std::isfinite(v)) throw ConfigError(field, "expected a number, got '" + text + "'");
  return v;
}

std::uint64_t parse_seed(const std::string& text) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.front() == '-') throw ConfigError("seeds", "expected a seed, got '" + text + "'");
  return v;
}

// "1-10" ranges and comma lists.
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& part : split_commas(text)) {
    const auto dash = part.find('-', 1);
    if (dash == std::string::npos) {
      seeds.push_back(parse_seed(part));
      continue;
    }
    const auto lo = parse_seed(part.substr(0, dash));
    const auto hi = parse_seed(part.substr(dash + 1));
    if (hi < lo) throw ConfigError("seeds", "empty range '" + part + "'");
    for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
  }
  return seeds;
}

struct SweepOptions {
  CommonOptions common;
  std::optional<std::string> seeds;
  std::optional<std::string> scenarios;
  std::optional<std::string> epsilon;
  std::optional<std::string> gamma;
  int jobs = 0;
};

struct Cell {
  std::uint64_t seed;
  std::string label;
  double epsilon;
  double gamma;
  WorldConfig cfg;
  fs::path dir;
};

struct CellOutcome {
  int exit_code = kExitFailure;
  std::optional<RunSummary> summary;
  std::string message;
};

std::vector<Cell> build_grid(const SweepOptions& opt, const WorldConfig& base, const fs::path& root) {
  if (!opt.seeds && !opt.scenarios && !opt.epsilon && !opt.gamma)
    throw ConfigError("grid", "empty grid: give at least one of --seeds, --scenarios, --epsilon, --gamma");

  std::vector<std::uint64_t> seeds{base.seed};
  if (opt.seeds) seeds = parse_seeds(*opt.seeds);

  std::vector<std::pair<std::string, double>> biases;
  if (opt.scenarios) {
    for (const auto& name : split_commas(*opt.scenarios)) {
      const auto s = parse_scenario(name);
      if (!s) throw ConfigError("scenarios", "unknown scenario '" + name + "'");
      biases.emplace_back(std::string(to_string(*s)), scenario_bias(*s));
    }
  }
  if (opt.epsilon)
    for (const auto& v : split_commas(*opt.epsilon)) {
      const double eps = parse_double("epsilon", v);
      biases.emplace_back(bias_label(eps), eps);
    }
  if (!opt.scenarios && !opt.epsilon)
    biases.emplace_back(bias_label(base.attack.connectivity_bias), base.attack.connectivity_bias);

  std::vector<double> gammas{base.weights.gamma};
  if (opt.gamma) {
    gammas.clear();
    for (const auto& v : split_commas(*opt.gamma)) gammas.push_back(parse_double("gamma", v));
  }

  if (seeds.empty()) throw ConfigError("seeds", "empty grid axis");
  if (biases.empty()) throw ConfigError(opt.scenarios ? "scenarios" : "epsilon", "empty grid axis");
  if (gammas.empty()) throw ConfigError("gamma", "empty grid axis");

  std::vector<Cell> cells;
  for (auto seed : seeds)
    for (const auto& [label, eps] : biases)
      for (double gamma : gammas) {
        WorldConfig cfg = base;
        cfg.seed = seed;
        cfg.attack.connectivity_bias = eps;
        cfg.weights.gamma = gamma;
        cfg.validate();
        std::string name = "seed" + std::to_string(seed) + "_" + label;
        if (opt.gamma) name += "_gamma" + format_number(gamma);
        cells.push_back({seed, label, eps, gamma, std::move(cfg), root / name});
      }
  return cells;
}

CellOutcome run_cell(const Cell& cell, const std::string& config_path, int stride) {
  CellOutcome outcome;
  try {
    const ScenarioResult result = run_scenario(cell.cfg);
    RunSummary summary = summarize(cell.cfg, result);
    write_run_outputs(cell.dir, cell.cfg, result, summary, config_path, stride);
    outcome.exit_code = run_passed(summary) ? kExitOk : kExitFailure;
    outcome.summary = std::move(summary);
  } catch (const ConfigError& e) {
    outcome.exit_code = kExitInvalid;
    outcome.message = e.what();
  } catch (const std::exception& e) {
    outcome.exit_code = kExitFailure;
    outcome.message = e.what();
  }
  return outcome;
}

std::vector<std::string> aggregate_columns() {
  return {"cell",          "seed",           "scenario",          "epsilon",           "gamma",
          "exit_code",     "converged",      "safety_held",       "final_spread",      "min_h_normal",
          "min_h_malicious", "min_distance", "min_degree_normal", "mean_distance_final", "violation_events",
          "infeasible_events", "ordering_monotone"};
}

// Per (seed, gamma): does the final mean pairwise distance increase with epsilon?
std::map<std::pair<std::uint64_t, double>, std::optional<bool>> ordering_by_group(
    const std::vector<Cell>& cells, const std::vector<CellOutcome>& outcomes) {
  std::map<std::pair<std::uint64_t, double>, std::vector<std::pair<double, double>>> groups;
  std::map<std::pair<std::uint64_t, double>, bool> complete;
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const auto key = std::make_pair(cells[k].seed, cells[k].gamma);
    complete.try_emplace(key, true);
    if (!outcomes[k].summary) {
      complete[key] = false;
      continue;
    }
    groups[key].emplace_back(cells[k].epsilon, outcomes[k].summary->mean_distance_final);
  }
  std::map<std::pair<std::uint64_t, double>, std::optional<bool>> result;
  for (const auto& [key, ok] : complete) {
    auto values = groups[key];
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end(),
                             [](const auto& a, const auto& b) { return a.first == b.first; }),
                 values.end());
    if (!ok || values.size() < 2) {
      result[key] = std::nullopt;
      continue;
    }
    bool monotone = true;
    for (std::size_t k = 1; k < values.size(); ++k) monotone = monotone && values[k - 1].second < values[k].second;
    result[key] = monotone;
  }
  return result;
}

void write_aggregate(const fs::path& path, const std::vector<Cell>& cells, const std::vector<CellOutcome>& outcomes) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const auto cols = aggregate_columns();
  for (std::size_t k = 0; k < cols.size(); ++k) out << (k ? "," : "") << cols[k];
  out << '\n';
  const auto ordering = ordering_by_group(cells, outcomes);
  out.precision(17);
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const auto& c = cells[k];
    const auto& o = outcomes[k];
    out << c.dir.filename().string() << ',' << c.seed << ',' << c.label << ',' << c.epsilon << ',' << c.gamma << ','
        << o.exit_code << ',';
    if (o.summary) {
      const auto& s = *o.summary;
      out << s.verdict.converged << ',' << s.verdict.safety_held << ',' << s.verdict.final_spread << ','
          << s.min_h_normal << ',' << s.min_h_malicious << ',' << s.min_distance << ',' << s.min_degree_normal << ','
          << s.mean_distance_final << ',' << s.violation_events << ',' << s.infeasible_events << ',';
    } else {
      out << ",,,,,,,,,,";
    }
    const auto& ord = ordering.at({c.seed, c.gamma});
    if (ord) out << (*ord ? 1 : 0);
    out << '\n';
  }
}

int cmd_sweep(const SweepOptions& opt, std::ostream& out, std::ostream& err) {
  const WorldConfig base = resolve_config(opt.common);
  const fs::path root = opt.common.out_dir.empty() ? output_root() / "sweep" : fs::path(opt.common.out_dir);
  const std::vector<Cell> cells = build_grid(opt, base, root);
  fs::create_directories(root);

  std::vector<CellOutcome> outcomes(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex io;
  auto worker = [&] {
    for (std::size_t k = next++; k < cells.size(); k = next++) {
      outcomes[k] = run_cell(cells[k], opt.common.config_path, opt.common.stride);
      std::lock_guard lock(io);
      out << "[" << (k + 1) << "/" << cells.size() << "] " << cells[k].dir.filename().string() << ": exit "
          << outcomes[k].exit_code;
      if (!outcomes[k].message.empty()) out << " (" << outcomes[k].message << ")";
      out << '\n';
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t jobs = std::min<std::size_t>(cells.size(), opt.jobs > 0 ? static_cast<std::size_t>(opt.jobs) : hw);
  {
    std::vector<std::jthread> pool;
    for (std::size_t k = 1; k < jobs; ++k) pool.emplace_back(worker);
    worker();
  }

  write_aggregate(root / "aggregate.csv", cells, outcomes);
  out << "aggregate: " << (root / "aggregate.csv").string() << '\n';

  int code = kExitOk;
  for (const auto& o : outcomes) {
    if (o.exit_code == kExitInvalid) code = kExitInvalid;
    else if (o.exit_code != kExitOk && code == kExitOk) code = o.exit_code;
  }
  if (code != kExitOk) err << "sweep: some cells failed\n";
  return code;
}

void add_common(CLI::App* cmd, CommonOptions& opt) {
  cmd->add_option("--config", opt.config_path, "Config file (JSON or key = value lines)");
  cmd->add_option("--scenario", opt.scenario, "nominal | understate | overstate");
  cmd->add_option("--seed", opt.seed, "Random seed");
  cmd->add_option("--override", opt.overrides, "key=value, repeatable")->allow_extra_args(false);
  cmd->add_option("--out", opt.out_dir, std::string("Output directory (default under $") + kOutputRootEnv + ")");
  cmd->add_option("--stride", opt.stride, "Write every k-th step to the step CSVs")
      ->check(CLI::PositiveNumber);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Resilient consensus with CBF-based connectivity maintenance", "rescbf"};
  app.require_subcommand(1);

  CommonOptions run_opt;
  auto* run = app.add_subcommand("run", "Run one scenario and write its artifacts");
  add_common(run, run_opt);

  RobustnessOptions rob_opt;
  auto* rob = app.add_subcommand("check-robustness", "Exhaustive (r,s)-robustness check of an edge list");
  rob->add_option("edges", rob_opt.edge_file, "Edge list: `i j` per line, 0-based, # comments")->required();
  rob->add_option("--r", rob_opt.r, "r");
  rob->add_option("--s", rob_opt.s, "s");
  rob->add_flag("--lemma1", rob_opt.lemma1, "Print the degree-based bound and confirm it by enumeration");
  rob->add_option("--cap", rob_opt.cap, "Largest n to enumerate")->check(CLI::Range(1, 24));

  SweepOptions sweep_opt;
  auto* sweep = app.add_subcommand("sweep", "Run a grid of seeds, attack biases and gammas");
  add_common(sweep, sweep_opt.common);
  sweep->add_option("--seeds", sweep_opt.seeds, "Seed list, e.g. 1-10 or 1,4,7");
  sweep->add_option("--scenarios", sweep_opt.scenarios, "Scenario list, e.g. nominal,understate,overstate");
  sweep->add_option("--epsilon", sweep_opt.epsilon, "Attack bias list, e.g. -2.5,0,3.5");
  sweep->add_option("--gamma", sweep_opt.gamma, "CBF gain list");
  sweep->add_option("--jobs", sweep_opt.jobs, "Worker threads (default: hardware concurrency)");

  auto* version = app.add_subcommand("version", "Print the tool version");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*version) {
      out << "rescbf " << tool_version() << '\n';
      return kExitOk;
    }
    if (*run) return cmd_run(run_opt, out);
    if (*rob) return cmd_check_robustness(rob_opt, out, err);
    if (*sweep) return cmd_sweep(sweep_opt, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const CapacityError& e) {
    err << "error: " << e.what() << '\n';
    return kExitOversized;
  } catch (const std::exception& e) {
    err << "fatal: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitInvalid;
}

}  // namespace rescbf::cli
