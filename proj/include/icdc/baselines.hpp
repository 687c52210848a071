#ifndef ICDC_BASELINES_HPP
#define ICDC_BASELINES_HPP

#include <utility>

#include "icdc/problems.hpp"

namespace icdc {

struct GaConfig {
  int population = 25;
  double mutation_rate = 0.3;
  double crossover_rate = 0.3;
  int iterations = 1000;
  bool sjf_seed = true;

  void validate() const {
    require(population >= 2, "GaConfig: population must be >= 2");
    require(mutation_rate >= 0.0 && mutation_rate <= 1.0 &&
                crossover_rate >= 0.0 && crossover_rate <= 1.0,
            "GaConfig: rates must lie in [0,1]");
    require(iterations >= 0, "GaConfig: negative iterations");
  }
};

struct PsoConfig {
  int particles = 25;
  double inertia = 0.7;
  double cognitive = 1.5;
  double social = 1.5;
  int iterations = 1000;
  bool sjf_seed = true;

  void validate() const {
    require(particles >= 2, "PsoConfig: particles must be >= 2");
    require(inertia > 0.0 && inertia < 1.0,
            "PsoConfig: inertia must lie in (0,1)");
    require(iterations >= 0, "PsoConfig: negative iterations");
  }
};

/// Shortest-job-first greedy: repeatedly assigns, among unscheduled jobs,
/// the one with the smallest processing time on the machine that frees
/// earliest; ties broken by job then machine index.
SolutionMatrix sjf(const PmspInstance& inst);

SolutionMatrix genetic_algorithm(const PmspInstance& inst, const GaConfig& cfg,
                                 Rng& rng);

SolutionMatrix particle_swarm(const PmspInstance& inst, const PsoConfig& cfg,
                              Rng& rng);

// classic ATSP tour constructions (asymmetric costs, start city 0)
SolutionMatrix nearest_neighbor(const AtspInstance& inst);
SolutionMatrix nearest_insertion(const AtspInstance& inst);
SolutionMatrix furthest_insertion(const AtspInstance& inst);

/// Exact ATSP via bitmask dynamic programming on an arbitrary cost matrix;
/// 2 <= n <= 16. Returns the optimal cycle and its length.
std::pair<SolutionMatrix, double> held_karp_on_matrix(const Matrix& dist);
std::pair<SolutionMatrix, double> held_karp(const AtspInstance& inst);

/// Exact minimum makespan by branch and bound; requires M^J <= 1e7 or
/// J <= 20.
std::pair<SolutionMatrix, double> pmsp_exact(const PmspInstance& inst);

}  // namespace icdc

#endif
