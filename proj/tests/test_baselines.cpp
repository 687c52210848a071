#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "helpers.hpp"
#include "icdc/baselines.hpp"

using namespace icdc;
using namespace icdc_test;

namespace {

double makespan_of(const PmspInstance& p, const SolutionMatrix& X) {
  return -score(Problem{p}, X);
}

double exhaustive_pmsp_opt(const PmspInstance& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& X : all_assignments(p.num_jobs, p.num_machines))
    best = std::min(best, makespan_of(p, X));
  return best;
}

double tour_len(const AtspInstance& a, const SolutionMatrix& X) {
  return -score(Problem{a}, X);
}

}  // namespace

TEST_CASE("sjf on one machine and on the 2x2 separable case") {
  PmspInstance one;
  one.num_jobs = 3;
  one.num_machines = 1;
  one.proc = Matrix(3, 1);
  one.proc << 0.2, 0.5, 0.3;
  SolutionMatrix X = sjf(one);
  CHECK(is_feasible(Problem{one}, X));
  CHECK(makespan_of(one, X) == doctest::Approx(1.0).epsilon(1e-12));

  PmspInstance p;
  p.num_jobs = 2;
  p.num_machines = 2;
  p.proc = Matrix(2, 2);
  p.proc << 1, 10, 10, 1;
  SolutionMatrix Y = sjf(p);
  CHECK(Y(0, 0) == 1);
  CHECK(Y(1, 1) == 1);
  CHECK(makespan_of(p, Y) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sjf outputs are always feasible") {
  for (int seed = 0; seed < 1000; ++seed) {
    PmspInstance p = generate_pmsp(1 + seed % 7, 1 + seed % 4, seed);
    CHECK(is_feasible(Problem{p}, sjf(p)));
  }
}

TEST_CASE("GA: elitism over the SJF seed and exhaustive optimality") {
  int optimal_hits = 0;
  for (int seed = 0; seed < 5; ++seed) {
    PmspInstance p = generate_pmsp(4, 2, 100 + seed);
    Rng rng(seed);
    GaConfig cfg;
    SolutionMatrix X = genetic_algorithm(p, cfg, rng);
    CHECK(is_feasible(Problem{p}, X));
    CHECK(makespan_of(p, X) <= makespan_of(p, sjf(p)) + 1e-12);
    if (makespan_of(p, X) <= exhaustive_pmsp_opt(p) + 1e-12) ++optimal_hits;
  }
  CHECK(optimal_hits >= 4);

  // zero iterations: best of the initial population, still <= SJF
  PmspInstance p = generate_pmsp(5, 3, 11);
  GaConfig cfg;
  cfg.iterations = 0;
  Rng rng(2);
  SolutionMatrix X = genetic_algorithm(p, cfg, rng);
  CHECK(makespan_of(p, X) <= makespan_of(p, sjf(p)) + 1e-12);

  GaConfig bad;
  bad.mutation_rate = 1.5;
  CHECK_THROWS(genetic_algorithm(p, bad, rng));
}

TEST_CASE("PSO: SJF dominance, exhaustive optimality, feasibility") {
  int optimal_hits = 0;
  for (int seed = 0; seed < 5; ++seed) {
    PmspInstance p = generate_pmsp(4, 2, 200 + seed);
    Rng rng(seed);
    PsoConfig cfg;
    SolutionMatrix X = particle_swarm(p, cfg, rng);
    CHECK(is_feasible(Problem{p}, X));
    CHECK(makespan_of(p, X) <= makespan_of(p, sjf(p)) + 1e-12);
    if (makespan_of(p, X) <= exhaustive_pmsp_opt(p) + 1e-12) ++optimal_hits;
  }
  CHECK(optimal_hits >= 4);

  PsoConfig bad;
  bad.inertia = 1.0;
  Rng rng(1);
  PmspInstance p = generate_pmsp(3, 2, 1);
  CHECK_THROWS(particle_swarm(p, bad, rng));
}

TEST_CASE("tour constructions on the fixed 3x3 matrix with a hand trace") {
  AtspInstance a;
  a.n = 3;
  a.dist = Matrix(3, 3);
  a.dist << 0, 1, 4, 2, 0, 1, 1, 3, 0;
  // NN from city 0: nearest is 1 (d=1), then 2, back to 0: cycle 0-1-2-0
  SolutionMatrix nn = nearest_neighbor(a);
  CHECK(nn(0, 1) == 1);
  CHECK(nn(1, 2) == 1);
  CHECK(nn(2, 0) == 1);
  // both cycles exist; each method must return one of them
  auto cycles = all_cycles(3);
  for (const SolutionMatrix& X :
       {nearest_neighbor(a), nearest_insertion(a), furthest_insertion(a)}) {
    CHECK(std::count(cycles.begin(), cycles.end(), X) == 1);
  }
}

TEST_CASE("tour constructions feasible and bounded by Held-Karp") {
  for (int seed = 0; seed < 50; ++seed) {
    AtspInstance a = generate_tmat_atsp(10, 300 + seed);
    double opt = held_karp(a).second;
    for (const SolutionMatrix& X :
         {nearest_neighbor(a), nearest_insertion(a), furthest_insertion(a)}) {
      CHECK(is_feasible(Problem{a}, X));
      CHECK(tour_len(a, X) >= opt - 1e-9);
    }
  }
}

TEST_CASE("held_karp hand example and factorial oracle") {
  AtspInstance a;
  a.n = 3;
  a.dist = Matrix(3, 3);
  a.dist << 0, 1, 4, 2, 0, 1, 1, 3, 0;
  auto [X, len] = held_karp(a);
  CHECK(len == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(tour_len(a, X) == doctest::Approx(3.0).epsilon(1e-12));

  // brute-force permutation enumeration, n = 7, 20 random instances
  for (int seed = 0; seed < 20; ++seed) {
    AtspInstance b = generate_tmat_atsp(7, 400 + seed);
    double brute = std::numeric_limits<double>::infinity();
    for (const auto& C : all_cycles(7))
      brute = std::min(brute, tour_len(b, C));
    auto [Y, hk] = held_karp(b);
    CHECK(hk == doctest::Approx(brute).epsilon(1e-9));
    CHECK(is_feasible(Problem{b}, Y));
    CHECK(tour_len(b, Y) == doctest::Approx(hk).epsilon(1e-9));
  }

  // symmetric instance: a tour and its reversal have equal length
  AtspInstance s = generate_tmat_atsp(6, 5);
  s.dist = ((s.dist + Matrix(s.dist.transpose())) / 2).eval();
  auto [Xs, ls] = held_karp(s);
  SolutionMatrix rev(6, 6);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) rev(j, i) = Xs(i, j);
  CHECK(is_feasible(Problem{s}, rev));
  CHECK(tour_len(s, rev) == doctest::Approx(ls).epsilon(1e-9));

  CHECK_THROWS_AS(held_karp(generate_tmat_atsp(17, 0)),
                  std::invalid_argument);
}

TEST_CASE("pmsp_exact trivial, exhaustive and bounding properties") {
  PmspInstance one = generate_pmsp(1, 4, 3);
  auto [X1, ms1] = pmsp_exact(one);
  CHECK(ms1 == doctest::Approx(one.proc.row(0).minCoeff()).epsilon(1e-12));
  CHECK(is_feasible(Problem{one}, X1));

  for (int seed = 0; seed < 20; ++seed) {
    PmspInstance p = generate_pmsp(4, 2, 500 + seed);
    auto [X, ms] = pmsp_exact(p);
    CHECK(ms == doctest::Approx(exhaustive_pmsp_opt(p)).epsilon(1e-12));
    CHECK(is_feasible(Problem{p}, X));
  }

  for (int seed = 0; seed < 100; ++seed) {
    PmspInstance p = generate_pmsp(2 + seed % 6, 2 + seed % 3, 600 + seed);
    CHECK(pmsp_exact(p).second <= makespan_of(p, sjf(p)) + 1e-12);
  }
}

TEST_CASE("exact oracles lower-bound every heuristic") {
  for (int seed = 0; seed < 30; ++seed) {
    PmspInstance p = generate_pmsp(6, 3, 700 + seed);
    double opt = pmsp_exact(p).second;
    Rng rng(seed);
    GaConfig ga;
    ga.iterations = 50;
    PsoConfig pso;
    pso.iterations = 50;
    CHECK(makespan_of(p, sjf(p)) >= opt - 1e-12);
    CHECK(makespan_of(p, genetic_algorithm(p, ga, rng)) >= opt - 1e-12);
    CHECK(makespan_of(p, particle_swarm(p, pso, rng)) >= opt - 1e-12);
  }
}
