#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "rescbf/consensus.hpp"
#include "rescbf/control.hpp"
#include "rescbf/graph.hpp"

namespace rescbf {

enum class ConsensusBehavior { kFollowWmsr, kUniformRandom };

/// c_i = sum_j a_ij + connectivity_bias, broadcast every tau1.
struct AttackModel {
  double connectivity_bias = 0.0;
  ConsensusBehavior consensus = ConsensusBehavior::kUniformRandom;
};

enum class Scenario { kNominal, kUnderstate, kOverstate };

std::string_view to_string(Scenario s);
/// Accepts nominal / understate / understating / overstate / overstating.
std::optional<Scenario> parse_scenario(std::string_view name);
double scenario_bias(Scenario s);

enum class DesiredController { kFourWay, kZero };

struct InitConfig {
  double radius = 1.4;          // sampling disc radius
  double min_separation = 0.6;  // sequential-addition spacing
  int max_attempts = 20000;     // whole-formation restarts
};

struct WorldConfig {
  int n = 11;
  int F = 2;
  int m = 2;
  double R = 3.0;
  double delta_d = 0.3;
  AdjacencyParamsd adjacency = AdjacencyParamsd::defaults(11, 3.0);
  CbfWeights<double> weights{2.0, 10.0, 1.0};
  InputBox<double> box = InputBox<double>::symmetric(2, 1.5);
  double tau1 = 0.005;
  double tau2 = 0.1;
  double dt = 0.001;
  double t_end = 10.0;
  std::vector<int> malicious{2, 7};
  AttackModel attack;  // shared by every malicious robot
  DesiredController desired = DesiredController::kFourWay;
  std::uint64_t seed = 1;
  ConsensusConfig consensus{2};
  bool instantaneous_self_connectivity = false;
  InitConfig init;

  int f_prime() const { return required_degree_threshold(n, F); }
  RoleAssignment roles() const { return RoleAssignment(n, F, malicious); }
  double bias(int i) const;
  int steps_per_tau1() const;
  int steps_per_tau2() const;
  long total_steps() const;
  /// Throws ConfigError naming the first invalid field.
  void validate() const;
};

/// Scenario preset with the attack bias set and everything else at defaults.
WorldConfig scenario_config(Scenario s, std::uint64_t seed);

/// Unit vector toward (-1)^label (100, 0) for labels 1..5, (-1)^label (0, 100)
/// otherwise; zero at the target. `label` is 1-based; extra axes stay zero.
Vecd desired_velocity(int label, const Vecd& x);

struct WorldState {
  long step = 0;
  double time = 0.0;
  PointSetd positions;
  std::vector<double> broadcast_c;  // held between tau1 ticks
  std::vector<double> y;            // consensus values
  std::mt19937_64 consensus_rng;
};

/// Rejection-samples a formation in a disc until every robot has at least F'
/// neighbors, all pairwise distances exceed delta_d, and phi_i > 0 for all i with
/// both truthful and attacked connectivity broadcasts.
PointSetd initialize_formation(const WorldConfig& cfg, std::mt19937_64& rng);

WorldState initial_state(const WorldConfig& cfg);

enum class EventKind { kInfeasibleQp, kVoidConstraint };

struct ControlEvent {
  long step;
  int robot;
  EventKind kind;
  double phi;
};

struct StepRecord {
  double time = 0.0;
  PointSetd positions;
  PointSetd inputs;
  PointSetd desired;
  PointSetd normals;  // H_i per robot
  std::vector<int> degree;
  std::vector<double> h;      // true degree barrier
  std::vector<double> h_hat;  // from held broadcasts
  std::vector<double> phi;
  double min_distance = 0.0;
};

struct ConsensusRecord {
  long step = 0;
  double time = 0.0;
  std::vector<double> y;
  std::vector<int> removed_count;
  int min_normal_degree = 0;
};

struct TrajectoryLog {
  std::vector<StepRecord> steps;
  std::vector<ConsensusRecord> consensus;
  std::vector<ControlEvent> events;

  long infeasible_count() const;
  std::vector<std::vector<double>> consensus_history() const;
};

/// Advance one dt: tau1 broadcasts, tau2 consensus tick, per-robot CBF-QP, Euler step.
/// Appends to `log` when given. Throws IntegrationError on non-finite state.
void step_world(WorldState& state, const WorldConfig& cfg, TrajectoryLog* log = nullptr);

struct ScenarioResult {
  TrajectoryLog log;
  ConsensusVerdict verdict;
};

ScenarioResult run_scenario(const WorldConfig& cfg);

// Summary statistics used by the CLI and acceptance checks.
double mean_pairwise_distance(const PointSetd& positions);
double min_pairwise_distance(const PointSetd& positions);
/// Time average of the mean pairwise distance over records with time >= t_from.
double average_spread_after(const TrajectoryLog& log, double t_from);
double min_h(const TrajectoryLog& log, const RoleAssignment& roles, bool malicious);
int min_degree(const TrajectoryLog& log, const RoleAssignment& roles, bool normal_only);

}  // namespace rescbf
