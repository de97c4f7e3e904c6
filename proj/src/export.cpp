#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "rescbf/io.hpp"

namespace rescbf {

std::string_view tool_version() { return "0.3.0"; }

namespace {

// Shortest representation that parses back to the same double.
struct Num {
  double v;
};

std::ostream& operator<<(std::ostream& out, Num n) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), n.v);
  return out.write(buf, res.ptr - buf);
}

void write_header(std::ostream& out, const std::vector<std::string>& cols) {
  for (std::size_t k = 0; k < cols.size(); ++k) out << (k ? "," : "") << cols[k];
  out << '\n';
}

const char* role_name(const RoleAssignment& roles, int i) {
  return roles.is_malicious(i) ? "malicious" : "normal";
}

nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

RunSummary summarize(const WorldConfig& cfg, const ScenarioResult& result) {
  const auto roles = cfg.roles();
  const auto& log = result.log;
  RunSummary s;
  s.verdict = result.verdict;
  s.f_prime = cfg.f_prime();
  s.min_h_normal = min_h(log, roles, false);
  s.min_h_malicious = roles.malicious().empty() ? std::numeric_limits<double>::infinity()
                                                : min_h(log, roles, true);
  s.min_distance = std::numeric_limits<double>::infinity();
  for (const auto& r : log.steps) {
    s.min_distance = std::min(s.min_distance, r.min_distance);
    bool violated = r.min_distance < cfg.delta_d;
    for (int i : roles.normal()) violated = violated || r.h[static_cast<std::size_t>(i)] < 0.0;
    if (violated) ++s.violation_events;
  }
  s.min_degree_all = min_degree(log, roles, false);
  s.min_degree_normal = min_degree(log, roles, true);
  s.mean_distance_final = average_spread_after(log, std::max(0.0, cfg.t_end - 2.0));
  s.infeasible_events = log.infeasible_count();
  for (const auto& rec : log.consensus) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (int i : roles.normal()) {
      lo = std::min(lo, rec.y[static_cast<std::size_t>(i)]);
      hi = std::max(hi, rec.y[static_cast<std::size_t>(i)]);
    }
    s.spread_history.push_back(hi - lo);
  }
  return s;
}

std::vector<std::string> trajectory_columns(int m) {
  std::vector<std::string> cols{"step", "time", "robot", "role"};
  for (int k = 0; k < m; ++k) cols.push_back("x" + std::to_string(k));
  for (int k = 0; k < m; ++k) cols.push_back("u" + std::to_string(k));
  for (const char* c : {"degree", "h", "h_hat", "phi", "min_distance"}) cols.emplace_back(c);
  return cols;
}

std::vector<std::string> controller_columns(int m) {
  std::vector<std::string> cols{"step", "time", "robot", "phi"};
  for (int k = 0; k < m; ++k) cols.push_back("H" + std::to_string(k));
  for (int k = 0; k < m; ++k) cols.push_back("u_des" + std::to_string(k));
  for (int k = 0; k < m; ++k) cols.push_back("u" + std::to_string(k));
  return cols;
}

std::vector<std::string> consensus_columns() { return {"step", "node", "value", "role", "removed_count"}; }

std::vector<std::string> event_columns() { return {"step", "robot", "kind", "phi"}; }

void write_trajectory_csv(std::ostream& out, const WorldConfig& cfg, const TrajectoryLog& log, int stride) {
  const auto roles = cfg.roles();
  write_header(out, trajectory_columns(cfg.m));
  for (std::size_t s = 0; s < log.steps.size(); s += static_cast<std::size_t>(stride)) {
    const auto& r = log.steps[s];
    for (int i = 0; i < cfg.n; ++i) {
      const auto si = static_cast<std::size_t>(i);
      out << s << ',' << Num{r.time} << ',' << i << ',' << role_name(roles, i);
      for (int k = 0; k < cfg.m; ++k) out << ',' << Num{r.positions(k, i)};
      for (int k = 0; k < cfg.m; ++k) out << ',' << Num{r.inputs(k, i)};
      out << ',' << r.degree[si] << ',' << Num{r.h[si]} << ',' << Num{r.h_hat[si]} << ','
          << Num{r.phi[si]} << ',' << Num{r.min_distance} << '\n';
    }
  }
}

void write_controller_csv(std::ostream& out, const WorldConfig& cfg, const TrajectoryLog& log, int stride) {
  write_header(out, controller_columns(cfg.m));
  for (std::size_t s = 0; s < log.steps.size(); s += static_cast<std::size_t>(stride)) {
    const auto& r = log.steps[s];
    for (int i = 0; i < cfg.n; ++i) {
      out << s << ',' << Num{r.time} << ',' << i << ',' << Num{r.phi[static_cast<std::size_t>(i)]};
      for (int k = 0; k < cfg.m; ++k) out << ',' << Num{r.normals(k, i)};
      for (int k = 0; k < cfg.m; ++k) out << ',' << Num{r.desired(k, i)};
      for (int k = 0; k < cfg.m; ++k) out << ',' << Num{r.inputs(k, i)};
      out << '\n';
    }
  }
}

void write_consensus_csv(std::ostream& out, const WorldConfig& cfg, const TrajectoryLog& log) {
  const auto roles = cfg.roles();
  write_header(out, consensus_columns());
  for (std::size_t p = 0; p < log.consensus.size(); ++p) {
    const auto& r = log.consensus[p];
    for (int i = 0; i < cfg.n; ++i)
      out << p << ',' << i << ',' << Num{r.y[static_cast<std::size_t>(i)]} << ',' << role_name(roles, i) << ','
          << r.removed_count[static_cast<std::size_t>(i)] << '\n';
  }
}

void write_events_csv(std::ostream& out, const TrajectoryLog& log) {
  write_header(out, event_columns());
  for (const auto& e : log.events)
    out << e.step << ',' << e.robot << ','
        << (e.kind == EventKind::kInfeasibleQp ? "infeasible_qp" : "void_constraint") << ',' << Num{e.phi}
        << '\n';
}

void write_h_traces_csv(std::ostream& out, const WorldConfig& cfg, const TrajectoryLog& log, int stride) {
  out << "time";
  for (int i = 0; i < cfg.n; ++i) out << ",h_" << i;
  out << '\n';
  for (std::size_t s = 0; s < log.steps.size(); s += static_cast<std::size_t>(stride)) {
    out << Num{log.steps[s].time};
    for (double h : log.steps[s].h) out << ',' << Num{h};
    out << '\n';
  }
}

void write_consensus_traces_csv(std::ostream& out, const WorldConfig& cfg, const TrajectoryLog& log) {
  out << "time";
  for (int i = 0; i < cfg.n; ++i) out << ",y_" << i;
  out << '\n';
  for (const auto& r : log.consensus) {
    out << Num{r.time};
    for (double y : r.y) out << ',' << Num{y};
    out << '\n';
  }
}

void write_summary_json(std::ostream& out, const RunSummary& s) {
  nlohmann::json j;
  j["verdict"] = {
      {"converged", s.verdict.converged},
      {"safety_held", s.verdict.safety_held},
      {"final_spread", s.verdict.final_spread},
      {"limit_estimate", s.verdict.limit_estimate ? nlohmann::json(*s.verdict.limit_estimate) : nlohmann::json(nullptr)},
      {"violation_step", s.verdict.violation_step ? nlohmann::json(*s.verdict.violation_step) : nlohmann::json(nullptr)},
      {"envelope", {s.verdict.envelope_lo, s.verdict.envelope_hi}},
  };
  j["f_prime"] = s.f_prime;
  j["min_h"] = {{"normal", finite_or_null(s.min_h_normal)}, {"malicious", finite_or_null(s.min_h_malicious)}};
  j["min_pairwise_distance"] = finite_or_null(s.min_distance);
  j["min_degree"] = {{"all", s.min_degree_all}, {"normal", s.min_degree_normal}};
  j["mean_pairwise_distance_final_2s"] = s.mean_distance_final;
  j["infeasible_qp_events"] = s.infeasible_events;
  j["violation_events"] = s.violation_events;
  j["spread_history"] = s.spread_history;
  out << j.dump(2) << '\n';
}

void write_manifest_json(std::ostream& out, const RunManifest& m) {
  nlohmann::json j;
  j["config_path"] = m.config_path;
  j["seed"] = m.seed;
  j["output_dir"] = m.output_dir;
  j["config_hash"] = m.config_hash;
  j["tool_version"] = m.tool_version;
  j["f_prime"] = m.f_prime;
  j["files"] = m.files;
  out << j.dump(2) << '\n';
}

RunManifest write_run_outputs(const std::filesystem::path& dir, const WorldConfig& cfg,
                              const ScenarioResult& result, const RunSummary& summary,
                              const std::string& config_path, int stride) {
  std::filesystem::create_directories(dir);
  RunManifest manifest;
  manifest.config_path = config_path;
  manifest.seed = cfg.seed;
  manifest.output_dir = dir.string();
  manifest.tool_version = std::string(tool_version());
  manifest.f_prime = cfg.f_prime();

  auto emit = [&](const char* name, auto&& writer) {
    std::ofstream out(dir / name);
    if (!out) throw std::runtime_error(std::string("cannot write ") + (dir / name).string());
    writer(out);
    manifest.files.emplace_back(name);
  };
  const std::string config_text = serialize_config(cfg);
  manifest.config_hash = git_blob_hash(config_text);
  emit("config.txt", [&](std::ostream& o) { o << config_text; });
  emit("trajectory.csv", [&](std::ostream& o) { write_trajectory_csv(o, cfg, result.log, stride); });
  emit("controller.csv", [&](std::ostream& o) { write_controller_csv(o, cfg, result.log, stride); });
  emit("consensus.csv", [&](std::ostream& o) { write_consensus_csv(o, cfg, result.log); });
  emit("events.csv", [&](std::ostream& o) { write_events_csv(o, result.log); });
  emit("fig3_h.csv", [&](std::ostream& o) { write_h_traces_csv(o, cfg, result.log, stride); });
  emit("fig3_consensus.csv", [&](std::ostream& o) { write_consensus_traces_csv(o, cfg, result.log); });
  emit("summary.json", [&](std::ostream& o) { write_summary_json(o, summary); });
  manifest.files.emplace_back("manifest.json");
  std::ofstream mout(dir / "manifest.json");
  write_manifest_json(mout, manifest);
  return manifest;
}

}  // namespace rescbf
