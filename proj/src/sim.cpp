#include "rescbf/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace rescbf {

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::kNominal: return "nominal";
    case Scenario::kUnderstate: return "understate";
    case Scenario::kOverstate: return "overstate";
  }
  return "nominal";
}

std::optional<Scenario> parse_scenario(std::string_view name) {
  if (name == "nominal") return Scenario::kNominal;
  if (name == "understate" || name == "understating") return Scenario::kUnderstate;
  if (name == "overstate" || name == "overstating") return Scenario::kOverstate;
  return std::nullopt;
}

double scenario_bias(Scenario s) {
  switch (s) {
    case Scenario::kNominal: return 0.0;
    case Scenario::kUnderstate: return -2.5;
    case Scenario::kOverstate: return 3.5;
  }
  return 0.0;
}

WorldConfig scenario_config(Scenario s, std::uint64_t seed) {
  WorldConfig cfg;
  cfg.attack.connectivity_bias = scenario_bias(s);
  cfg.seed = seed;
  return cfg;
}

namespace {

int ratio_steps(double tau, double dt) { return static_cast<int>(std::lround(tau / dt)); }

bool is_multiple(double tau, double dt) {
  const double k = tau / dt;
  return std::abs(k - std::round(k)) < 1e-9 * std::max(1.0, k);
}

}  // namespace

double WorldConfig::bias(int i) const {
  return std::find(malicious.begin(), malicious.end(), i) != malicious.end()
             ? attack.connectivity_bias
             : 0.0;
}

int WorldConfig::steps_per_tau1() const { return ratio_steps(tau1, dt); }
int WorldConfig::steps_per_tau2() const { return ratio_steps(tau2, dt); }
long WorldConfig::total_steps() const { return std::lround(t_end / dt); }

void WorldConfig::validate() const {
  if (n < 2) throw ConfigError("n", "must be >= 2");
  if (F < 0 || F > (n - 1) / 2) throw ConfigError("F", "must lie in [0, floor((n-1)/2)]");
  if (m < 2) throw ConfigError("m", "must be >= 2");
  if (!(R > 0)) throw ConfigError("R", "must be positive");
  if (!(delta_d > 0) || delta_d >= R) throw ConfigError("delta_d", "must lie in (0, R)");
  if (adjacency.n != n) throw ConfigError("adjacency.n", "must equal n");
  if (adjacency.R != R) throw ConfigError("adjacency.R", "must equal R");
  try {
    adjacency.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("adjacency.q1", e.what());
  }
  if (!(weights.w_r > 0)) throw ConfigError("cbf.w_r", "must be positive");
  if (!(weights.w_c > 0)) throw ConfigError("cbf.w_c", "must be positive");
  if (!(weights.gamma > 0)) throw ConfigError("cbf.gamma", "must be positive");
  if (box.dim() != m) throw ConfigError("box", "dimension must equal m");
  try {
    box.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("box", e.what());
  }
  if (!(dt > 0)) throw ConfigError("dt", "must be positive");
  if (!(tau1 >= dt)) throw ConfigError("tau1", "must be >= dt");
  if (!(tau2 >= tau1)) throw ConfigError("tau2", "must be >= tau1");
  if (!is_multiple(tau1, dt)) throw ConfigError("tau1", "must be an integer multiple of dt");
  if (!is_multiple(tau2, dt)) throw ConfigError("tau2", "must be an integer multiple of dt");
  if (!(t_end > 0)) throw ConfigError("t_end", "must be positive");
  if (!is_multiple(t_end, dt)) throw ConfigError("t_end", "must be an integer multiple of dt");
  try {
    (void)roles();
  } catch (const std::invalid_argument& e) {
    throw ConfigError("malicious", e.what());
  }
  if (consensus.F != F) throw ConfigError("consensus.F", "must equal F");
  if (!(consensus.y_hi >= consensus.y_lo)) throw ConfigError("consensus.y_lo", "empty interval");
  if (!(consensus.tolerance > 0)) throw ConfigError("consensus.tolerance", "must be positive");
  if (!(init.radius > 0)) throw ConfigError("init.radius", "must be positive");
  if (!(init.min_separation > delta_d)) throw ConfigError("init.min_separation", "must exceed delta_d");
  if (init.max_attempts < 1) throw ConfigError("init.max_attempts", "must be >= 1");
}

Vecd desired_velocity(int label, const Vecd& x) {
  Vecd target = Vecd::Zero(x.size());
  const double sign = (label % 2 == 0) ? 1.0 : -1.0;
  if (label <= 5)
    target(0) = sign * 100.0;
  else
    target(1) = sign * 100.0;
  Vecd v = target - x;
  const double norm = v.norm();
  if (norm == 0.0) return Vecd::Zero(x.size());
  return v / norm;
}

namespace {

LocalView<double> make_view(int i, const PointSetd& x, const GraphSnapshot& g,
                            const std::vector<double>& held_c, double self_c,
                            const WorldConfig& cfg) {
  LocalView<double> view;
  view.self_id = i;
  view.self_position = x.col(i);
  view.self_connectivity = self_c;
  view.f_prime = cfg.f_prime();
  view.delta_d = cfg.delta_d;
  view.params = cfg.adjacency;
  view.weights = cfg.weights;
  view.neighbors.reserve(g.neighbors(i).size());
  for (int j : g.neighbors(i))
    view.neighbors.push_back({j, x.col(j), held_c[static_cast<std::size_t>(j)]});
  return view;
}

std::vector<double> broadcast_levels(const PointSetd& x, const GraphSnapshot& g,
                                     const WorldConfig& cfg, bool with_bias) {
  std::vector<double> c(static_cast<std::size_t>(cfg.n));
  for (int i = 0; i < cfg.n; ++i)
    c[static_cast<std::size_t>(i)] =
        connectivity_level(i, g, x, cfg.adjacency) + (with_bias ? cfg.bias(i) : 0.0);
  return c;
}

enum class InitFailure { kNone, kDegree, kSeparation, kPhi, kPlacement };

InitFailure check_formation(const PointSetd& x, const WorldConfig& cfg) {
  const GraphSnapshot g = build_graph(x, cfg.R);
  if (g.min_degree() < cfg.f_prime()) return InitFailure::kDegree;
  if (min_pairwise_distance(x) <= cfg.delta_d) return InitFailure::kSeparation;
  for (bool with_bias : {false, true}) {
    const auto c = broadcast_levels(x, g, cfg, with_bias);
    for (int i = 0; i < cfg.n; ++i)
      if (!(local_phi(make_view(i, x, g, c, c[static_cast<std::size_t>(i)], cfg)) > 0))
        return InitFailure::kPhi;
  }
  return InitFailure::kNone;
}

double unit_draw(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag)};
  return std::mt19937_64(seq);
}

}  // namespace

PointSetd initialize_formation(const WorldConfig& cfg, std::mt19937_64& rng) {
  constexpr int kPlacementTries = 1000;
  InitFailure last = InitFailure::kNone;
  const double sep2 = cfg.init.min_separation * cfg.init.min_separation;
  for (int attempt = 0; attempt < cfg.init.max_attempts; ++attempt) {
    PointSetd x = PointSetd::Zero(cfg.m, cfg.n);
    bool placed_all = true;
    for (int i = 0; i < cfg.n && placed_all; ++i) {
      bool placed = false;
      for (int t = 0; t < kPlacementTries && !placed; ++t) {
        // uniform in the disc of the first two axes
        const double r = cfg.init.radius * std::sqrt(unit_draw(rng));
        const double theta = 2.0 * M_PI * unit_draw(rng);
        Vecd p = Vecd::Zero(cfg.m);
        p(0) = r * std::cos(theta);
        p(1) = r * std::sin(theta);
        placed = true;
        for (int j = 0; j < i && placed; ++j)
          if ((x.col(j) - p).squaredNorm() <= sep2) placed = false;
        if (placed) x.col(i) = p;
      }
      placed_all = placed;
    }
    if (!placed_all) {
      last = InitFailure::kPlacement;
      continue;
    }
    last = check_formation(x, cfg);
    if (last == InitFailure::kNone) return x;
  }
  switch (last) {
    case InitFailure::kDegree:
      throw ConfigError("init", "sampling budget exhausted: some robot has fewer than F' neighbors");
    case InitFailure::kSeparation:
      throw ConfigError("init", "sampling budget exhausted: pairwise distance <= delta_d");
    case InitFailure::kPhi:
      throw ConfigError("init", "sampling budget exhausted: some phi_i <= 0");
    default:
      throw ConfigError("init", "sampling budget exhausted: could not place robots at min_separation");
  }
}

WorldState initial_state(const WorldConfig& cfg) {
  cfg.validate();
  WorldState s;
  auto init_rng = stream(cfg.seed, 0x1417);
  s.positions = initialize_formation(cfg, init_rng);
  s.consensus_rng = stream(cfg.seed, 0xc0de);
  s.y.resize(static_cast<std::size_t>(cfg.n));
  for (auto& v : s.y) v = malicious_broadcast(s.consensus_rng, cfg.consensus);
  s.broadcast_c = broadcast_levels(s.positions, build_graph(s.positions, cfg.R), cfg, true);
  return s;
}

void step_world(WorldState& state, const WorldConfig& cfg, TrajectoryLog* log) {
  const int n = cfg.n;
  const auto roles = cfg.roles();
  const GraphSnapshot g = build_graph(state.positions, cfg.R);
  const int fp = cfg.f_prime();

  if (state.step % cfg.steps_per_tau1() == 0)
    state.broadcast_c = broadcast_levels(state.positions, g, cfg, true);

  if (state.step % cfg.steps_per_tau2() == 0) {
    ConsensusRecord rec;
    rec.step = state.step;
    rec.time = state.time;
    rec.removed_count.assign(static_cast<std::size_t>(n), 0);
    for (int i : roles.malicious())
      if (cfg.attack.consensus == ConsensusBehavior::kUniformRandom)
        state.y[static_cast<std::size_t>(i)] = malicious_broadcast(state.consensus_rng, cfg.consensus);
    rec.y = state.y;
    std::vector<double> next = state.y;
    for (int i = 0; i < n; ++i) {
      if (roles.is_malicious(i) && cfg.attack.consensus == ConsensusBehavior::kUniformRandom) continue;
      std::vector<NeighborValue<double>> nbv;
      for (int j : g.neighbors(i)) nbv.push_back({j, state.y[static_cast<std::size_t>(j)]});
      auto res = wmsr_step<double>(state.y[static_cast<std::size_t>(i)], nbv, cfg.consensus.F);
      next[static_cast<std::size_t>(i)] = res.value;
      rec.removed_count[static_cast<std::size_t>(i)] = static_cast<int>(res.removed.size());
    }
    rec.min_normal_degree = degree_stats(g, roles).min_normal;
    state.y = std::move(next);
    if (log) log->consensus.push_back(std::move(rec));
  }

  StepRecord rec;
  PointSetd u = PointSetd::Zero(cfg.m, n);
  if (log) {
    rec.time = state.time;
    rec.positions = state.positions;
    rec.desired = PointSetd::Zero(cfg.m, n);
    rec.normals = PointSetd::Zero(cfg.m, n);
    rec.degree.resize(static_cast<std::size_t>(n));
    rec.h.resize(static_cast<std::size_t>(n));
    rec.h_hat.resize(static_cast<std::size_t>(n));
    rec.phi.resize(static_cast<std::size_t>(n));
    rec.min_distance = min_pairwise_distance(state.positions);
  }
  for (int i = 0; i < n; ++i) {
    const auto si = static_cast<std::size_t>(i);
    const double self_c = cfg.instantaneous_self_connectivity
                              ? connectivity_level(i, g, state.positions, cfg.adjacency) + cfg.bias(i)
                              : state.broadcast_c[si];
    const auto view = make_view(i, state.positions, g, state.broadcast_c, self_c, cfg);
    const Vecd u_des = cfg.desired == DesiredController::kFourWay
                           ? desired_velocity(i + 1, state.positions.col(i))
                           : Vecd::Zero(cfg.m);
    const auto out = cbf_qp_controller(view, u_des, cfg.box);
    u.col(i) = cfg.box.clamp(out.u);
    if (out.status != QpStatus::kOptimal && log)
      log->events.push_back({state.step, i,
                             out.status == QpStatus::kInfeasible ? EventKind::kInfeasibleQp
                                                                 : EventKind::kVoidConstraint,
                             out.phi});
    if (log) {
      rec.desired.col(i) = u_des;
      rec.normals.col(i) = out.row.normal;
      rec.degree[si] = g.degree(i);
      rec.h[si] = degree_cbf(view);
      rec.h_hat[si] = hat_h(state.broadcast_c[si], fp);
      rec.phi[si] = out.phi;
    }
  }
  if (log) {
    rec.inputs = u;
    log->steps.push_back(std::move(rec));
  }

  state.positions += cfg.dt * u;
  if (!state.positions.allFinite())
    throw IntegrationError("non-finite position at step " + std::to_string(state.step));
  ++state.step;
  state.time = static_cast<double>(state.step) * cfg.dt;
}

long TrajectoryLog::infeasible_count() const {
  return std::count_if(events.begin(), events.end(),
                       [](const ControlEvent& e) { return e.kind == EventKind::kInfeasibleQp; });
}

std::vector<std::vector<double>> TrajectoryLog::consensus_history() const {
  std::vector<std::vector<double>> out;
  out.reserve(consensus.size());
  for (const auto& r : consensus) out.push_back(r.y);
  return out;
}

ScenarioResult run_scenario(const WorldConfig& cfg) {
  WorldState state = initial_state(cfg);
  ScenarioResult result;
  const long total = cfg.total_steps();
  result.log.steps.reserve(static_cast<std::size_t>(total + 1));
  for (long s = 0; s <= total; ++s) step_world(state, cfg, &result.log);
  const auto history = result.log.consensus_history();
  result.verdict = check_resilient_consensus(history, cfg.roles(), cfg.consensus.tolerance);
  return result;
}

double mean_pairwise_distance(const PointSetd& x) {
  const auto n = x.cols();
  double sum = 0.0;
  long count = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j, ++count) sum += (x.col(i) - x.col(j)).norm();
  return count ? sum / static_cast<double>(count) : 0.0;
}

double min_pairwise_distance(const PointSetd& x) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < x.cols(); ++i)
    for (Eigen::Index j = i + 1; j < x.cols(); ++j) best = std::min(best, (x.col(i) - x.col(j)).norm());
  return best;
}

double average_spread_after(const TrajectoryLog& log, double t_from) {
  double sum = 0.0;
  long count = 0;
  for (const auto& r : log.steps) {
    if (r.time + 1e-12 < t_from) continue;
    sum += mean_pairwise_distance(r.positions);
    ++count;
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

double min_h(const TrajectoryLog& log, const RoleAssignment& roles, bool malicious) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : log.steps)
    for (int i = 0; i < roles.size(); ++i)
      if (roles.is_malicious(i) == malicious) best = std::min(best, r.h[static_cast<std::size_t>(i)]);
  return best;
}

int min_degree(const TrajectoryLog& log, const RoleAssignment& roles, bool normal_only) {
  int best = std::numeric_limits<int>::max();
  for (const auto& r : log.steps)
    for (int i = 0; i < roles.size(); ++i)
      if (!normal_only || !roles.is_malicious(i)) best = std::min(best, r.degree[static_cast<std::size_t>(i)]);
  return best;
}

}  // namespace rescbf
