// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "control_fixtures.hpp"
#include "oracles.hpp"
#include "rescbf/consensus.hpp"
#include "rescbf/io.hpp"
#include "rescbf/sim.hpp"

using namespace rescbf;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& what, const std::string& detail) {
  std::printf("criterion %d: %s  %s (%s)\n", id, pass ? "PASS" : "FAIL", what.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void degree_threshold() {
  const int fp = required_degree_threshold(11, 2);
  report(1, fp == 7, "degree threshold F' for n=11, F=2", fmt("F' = %d", fp));
}

void robustness_bound() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> dens(0.55, 1.0);
  int graphs = 0;
  int mismatches = 0;
  int refuted = 0;
  while (graphs < 500) {
    const int n = 4 + static_cast<int>(rng() % 5);
    const GraphSnapshot g = oracle::random_graph(n, dens(rng), rng);
    const auto r = lemma1_bound(g);
    if (!r || *r < 1) continue;
    ++graphs;
    for (int s = 1; s <= n; ++s) {
      const bool lib = is_rs_robust(g, *r, s).robust;
      const bool ref = oracle::rs_robust(g, *r, s);
      if (lib != ref) ++mismatches;
      if (!ref) ++refuted;
    }
  }
  report(2, mismatches == 0 && refuted == 0, "degree-based robustness bound holds for every s",
         fmt("%d graphs, %d refutations, %d oracle mismatches", graphs, refuted, mismatches));
}

void decomposition() {
  std::mt19937_64 rng(202);
  int checked = 0;
  int bad = 0;
  double worst = 0.0;
  while (checked < 1000) {
    fixtures::Scene s = fixtures::random_scene(rng, 5 + static_cast<int>(rng() % 7), 2);
    if (!s.degree_condition()) continue;
    fixtures::perturb_broadcasts(s, rng);
    ++checked;
    double sum = 0.0;
    for (int i = 0; i < s.n(); ++i) sum += local_phi(s.view(i));
    const double phi = fixtures::phi_by_definition(s);
    worst = std::min(worst, phi - sum);
    if (phi < sum - 1e-12) ++bad;
  }
  report(3, bad == 0, "composed barrier bounds the sum of local barriers",
         fmt("%d configurations, %d violations, min phi - sum = %.3g", checked, bad, worst));
}

void gradients() {
  std::mt19937_64 rng(303);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const fixtures::Scene s = fixtures::random_scene(rng, 5 + static_cast<int>(rng() % 7), 2);
    const int i = static_cast<int>(rng() % s.n());
    const Eigen::VectorXd H = constraint_row(s.view(i)).normal;
    const Eigen::VectorXd Hfd = fixtures::fd_gradient(s, i, 1e-5);
    const double rel = Hfd.norm() > 0 ? (H - Hfd).norm() / Hfd.norm() : (H - Hfd).norm();
    worst = std::max(worst, rel);
  }
  report(4, worst <= 1e-5, "constraint normal matches finite differences", fmt("100 states, max rel err %.3g", worst));
}

void qp() {
  std::mt19937_64 rng(404);
  int mismatches = 0;
  int nondeterministic = 0;
  int infeasible = 0;
  double worst = 0.0;
  for (int t = 0; t < 10000; ++t) {
    const auto q = fixtures::random_qp(rng);
    const InputBox<double> box{q.lo, q.hi};
    const ConstraintRow<double> row{q.H, q.rhs};
    const auto sol = solve_box_qp(Eigen::VectorXd(q.u_des), row, box);
    if (solve_box_qp(Eigen::VectorXd(q.u_des), row, box).u != sol.u) ++nondeterministic;
    const auto ref = oracle::kkt_qp(q);
    if (!ref) {
      ++infeasible;
      if (sol.status != QpStatus::kInfeasible) ++mismatches;
      continue;
    }
    const double err = (sol.u - *ref).norm();
    worst = std::max(worst, err);
    if (sol.status != QpStatus::kOptimal || err > 1e-6) ++mismatches;
  }
  report(5, mismatches == 0 && nondeterministic == 0, "QP agrees with the KKT oracle and is deterministic",
         fmt("10000 instances (%d infeasible), max err %.3g, %d mismatches", infeasible, worst, mismatches));
}

struct Cell {
  Scenario scenario;
  int seed;
  RunSummary summary;
};

void scenarios() {
  const auto start = std::chrono::steady_clock::now();
  std::vector<Cell> cells;
  for (int seed = 1; seed <= 10; ++seed)
    for (Scenario sc : {Scenario::kNominal, Scenario::kUnderstate, Scenario::kOverstate}) {
      const WorldConfig cfg = scenario_config(sc, static_cast<std::uint64_t>(seed));
      cells.push_back({sc, seed, summarize(cfg, run_scenario(cfg))});
    }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  int unsafe = 0;
  int close = 0;
  int verdict_bad = 0;
  int nominal_degree = 1 << 30;
  double min_h = 1e300;
  double min_d = 1e300;
  for (const auto& c : cells) {
    min_h = std::min(min_h, c.summary.min_h_normal);
    min_d = std::min(min_d, c.summary.min_distance);
    if (c.summary.min_h_normal < 0.0) ++unsafe;
    if (c.summary.min_distance < 0.3) ++close;
    if (!c.summary.verdict.converged || !c.summary.verdict.safety_held) ++verdict_bad;
    if (c.scenario == Scenario::kNominal) nominal_degree = std::min(nominal_degree, c.summary.min_degree_normal);
  }
  report(6, unsafe == 0 && close == 0 && verdict_bad == 0 && nominal_degree >= 7 && seconds < 300.0,
         "30 scenario runs stay safe and reach resilient consensus",
         fmt("min normal h %.4f, min distance %.4f, %d bad verdicts, nominal min degree %d, %.1f s", min_h, min_d,
             verdict_bad, nominal_degree, seconds));

  int ordered = 0;
  for (int seed = 1; seed <= 10; ++seed) {
    double d[3] = {};
    for (const auto& c : cells)
      if (c.seed == seed) d[static_cast<int>(c.scenario)] = c.summary.mean_distance_final;
    const double nom = d[static_cast<int>(Scenario::kNominal)];
    const double und = d[static_cast<int>(Scenario::kUnderstate)];
    const double ovr = d[static_cast<int>(Scenario::kOverstate)];
    if (und < nom && nom < ovr) ++ordered;
  }
  report(7, ordered >= 8, "understate < nominal < overstate in final mean pairwise distance",
         fmt("%d of 10 seeds ordered", ordered));

  int witnessed = 0;
  for (const auto& c : cells)
    if (c.scenario == Scenario::kOverstate && c.summary.min_h_malicious < 0.0 && c.summary.min_h_normal >= 0.0)
      ++witnessed;
  report(8, witnessed >= 1, "overstating robots lose their own degree while normal robots keep theirs",
         fmt("%d of 10 overstate seeds", witnessed));
}

void wmsr() {
  using NV = NeighborValue<double>;
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> val(-500.0, 500.0);
  int bad = 0;
  for (int t = 0; t < 10000; ++t) {
    const int k = static_cast<int>(rng() % 12);
    const int F = static_cast<int>(rng() % 4);
    const bool ties = rng() % 2 == 0;
    std::vector<NV> nb;
    std::vector<double> raw;
    for (int j = 0; j < k; ++j) {
      nb.push_back({j, ties ? std::round(val(rng) / 100.0) : val(rng)});
      raw.push_back(nb.back().value);
    }
    const double y = ties ? std::round(val(rng) / 100.0) : val(rng);
    const auto r = wmsr_step<double>(y, nb, F);
    const auto kept = oracle::wmsr_kept(y, raw, F);

    bool ok = r.value >= *std::min_element(kept.begin(), kept.end()) &&
              r.value <= *std::max_element(kept.begin(), kept.end());
    int large = 0;
    int small = 0;
    for (int id : r.removed) {
      const double v = raw[static_cast<std::size_t>(id)];
      if (v > y) ++large;
      else if (v < y) ++small;
      else ok = false;
    }
    ok = ok && large <= F && small <= F && r.removed.size() + kept.size() == raw.size() + 1;
    double sum = 0.0;
    for (double v : kept) sum += v;
    const double mean = sum / static_cast<double>(kept.size());
    ok = ok && std::abs(r.value - mean) <= 1e-12 * std::max(1.0, std::abs(mean));
    ok = ok && 1.0 / static_cast<double>(kept.size()) >= 1.0 / static_cast<double>(k + 1);
    auto shuffled = nb;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    ok = ok && wmsr_step<double>(y, shuffled, F).value == r.value;
    if (!ok) ++bad;
  }
  report(9, bad == 0, "W-MSR safety, removal cardinality, weight floor and permutation invariance",
         fmt("10000 inputs, %d failures", bad));
}

}  // namespace

int main() {
  degree_threshold();
  robustness_bound();
  decomposition();
  gradients();
  qp();
  scenarios();
  wmsr();
  std::printf("%s: %d of 9 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
