#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "rescbf/sim.hpp"

namespace rescbf {

/// Flat `section.key -> value` view of a config file.
using KeyValues = std::map<std::string, std::string>;

/// Accepts either a JSON object (nested objects flatten to dotted keys, arrays to
/// comma lists) or TOML-like `key = value` lines with optional `[section]` headers
/// and `#` comments.
KeyValues parse_key_values(std::string_view text);

/// Keys that must be present when a config file is given.
const std::vector<std::string>& required_config_keys();

/// Builds a config on top of `base`. Unknown keys and unparsable values raise
/// ConfigError naming the key. Derived fields (q1 when not given, consensus.F,
/// adjacency n and R) follow n, F and R.
WorldConfig apply_key_values(WorldConfig base, const KeyValues& kv);

/// Parses `text` as a complete config; every required key must be present.
WorldConfig parse_config(std::string_view text);

/// `key = value` text that parse_config maps back to an identical config.
std::string serialize_config(const WorldConfig& cfg);

/// Git blob hash (SHA-1 of "blob <len>\0" + content), lowercase hex.
std::string git_blob_hash(std::string_view content);

// --- outputs --------------------------------------------------------------

struct RunSummary {
  ConsensusVerdict verdict;
  int f_prime = 0;
  double min_h_normal = 0.0;
  double min_h_malicious = 0.0;
  double min_distance = 0.0;
  int min_degree_all = 0;
  int min_degree_normal = 0;
  double mean_distance_final = 0.0;  // time-averaged over the final 2 s
  long infeasible_events = 0;
  long violation_events = 0;         // normal h_i < 0 or distance < delta_d
  std::vector<double> spread_history;
};

RunSummary summarize(const WorldConfig& cfg, const ScenarioResult& result);

// CSV column sets; kept stable and covered by tests.
std::vector<std::string> trajectory_columns(int m);
std::vector<std::string> controller_columns(int m);
std::vector<std::string> consensus_columns();
std::vector<std::string> event_columns();

void write_trajectory_csv(std::ostream& out, const WorldConfig& cfg, const TrajectoryLog& log,
                          int stride = 1);
void write_controller_csv(std::ostream& out, const WorldConfig& cfg, const TrajectoryLog& log,
                          int stride = 1);
void write_consensus_csv(std::ostream& out, const WorldConfig& cfg, const TrajectoryLog& log);
void write_events_csv(std::ostream& out, const TrajectoryLog& log);
/// Figure panels: time plus one column per robot.
void write_h_traces_csv(std::ostream& out, const WorldConfig& cfg, const TrajectoryLog& log,
                        int stride = 1);
void write_consensus_traces_csv(std::ostream& out, const WorldConfig& cfg, const TrajectoryLog& log);
void write_summary_json(std::ostream& out, const RunSummary& summary);

struct RunManifest {
  std::string config_path;
  std::uint64_t seed = 0;
  std::string output_dir;
  std::string config_hash;
  std::string tool_version;
  int f_prime = 0;
  std::vector<std::string> files;
};

void write_manifest_json(std::ostream& out, const RunManifest& manifest);

/// Writes every artifact of a run into `dir` and returns the manifest.
RunManifest write_run_outputs(const std::filesystem::path& dir, const WorldConfig& cfg,
                              const ScenarioResult& result, const RunSummary& summary,
                              const std::string& config_path, int stride);

std::string_view tool_version();

}  // namespace rescbf
