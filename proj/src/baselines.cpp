#include "icdc/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace icdc {

namespace {

using Assignment = std::vector<int>;  // machine index per job

double makespan(const PmspInstance& inst, const Assignment& a) {
  std::vector<double> load(inst.num_machines, 0.0);
  for (int j = 0; j < inst.num_jobs; ++j) load[a[j]] += inst.proc(j, a[j]);
  return *std::max_element(load.begin(), load.end());
}

SolutionMatrix to_solution(const PmspInstance& inst, const Assignment& a) {
  SolutionMatrix X(inst.num_jobs, inst.num_machines);
  for (int j = 0; j < inst.num_jobs; ++j) X(j, a[j]) = 1;
  return X;
}

Assignment sjf_assignment(const PmspInstance& inst) {
  const int J = inst.num_jobs, M = inst.num_machines;
  std::vector<double> free_at(M, 0.0);
  std::vector<bool> done(J, false);
  Assignment a(J, 0);
  for (int step = 0; step < J; ++step) {
    // machine that frees earliest, ties by machine index
    int m = 0;
    for (int k = 1; k < M; ++k)
      if (free_at[k] < free_at[m]) m = k;
    // shortest remaining job on that machine, ties by job index
    int best = -1;
    for (int j = 0; j < J; ++j)
      if (!done[j] && (best < 0 || inst.proc(j, m) < inst.proc(best, m)))
        best = j;
    done[best] = true;
    a[best] = m;
    free_at[m] += inst.proc(best, m);
  }
  return a;
}

SolutionMatrix tour_to_solution(const std::vector<int>& tour) {
  const int n = int(tour.size());
  SolutionMatrix X(n, n);
  for (int k = 0; k < n; ++k) X(tour[k], tour[(k + 1) % n]) = 1;
  return X;
}

}  // namespace

SolutionMatrix sjf(const PmspInstance& inst) {
  return to_solution(inst, sjf_assignment(inst));
}

SolutionMatrix genetic_algorithm(const PmspInstance& inst, const GaConfig& cfg,
                                 Rng& rng) {
  cfg.validate();
  const int J = inst.num_jobs, M = inst.num_machines;
  std::uniform_int_distribution<int> mdist(0, M - 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  std::vector<Assignment> pop(cfg.population);
  for (auto& c : pop) {
    c.resize(J);
    for (int j = 0; j < J; ++j) c[j] = mdist(rng);
  }
  if (cfg.sjf_seed) pop[0] = sjf_assignment(inst);

  auto fitness = [&](const Assignment& c) { return makespan(inst, c); };
  std::vector<double> fit(pop.size());
  for (size_t i = 0; i < pop.size(); ++i) fit[i] = fitness(pop[i]);

  Assignment best = pop[0];
  double best_fit = fit[0];
  auto track = [&](const Assignment& c, double f) {
    if (f < best_fit) {
      best_fit = f;
      best = c;
    }
  };
  for (size_t i = 1; i < pop.size(); ++i) track(pop[i], fit[i]);

  std::uniform_int_distribution<int> pdist(0, cfg.population - 1);
  for (int it = 0; it < cfg.iterations; ++it) {
    std::vector<Assignment> next(pop.size());
    std::vector<double> next_fit(pop.size());
    // elitism: carry over the best-ever individual
    next[0] = best;
    next_fit[0] = best_fit;
    for (size_t i = 1; i < pop.size(); ++i) {
      // binary tournament parents
      auto parent = [&]() -> const Assignment& {
        int a = pdist(rng), b = pdist(rng);
        return fit[a] <= fit[b] ? pop[a] : pop[b];
      };
      const Assignment& pa = parent();
      const Assignment& pb = parent();
      Assignment child = pa;
      if (u(rng) < cfg.crossover_rate)
        for (int j = 0; j < J; ++j)
          if (u(rng) < 0.5) child[j] = pb[j];
      for (int j = 0; j < J; ++j)
        if (u(rng) < cfg.mutation_rate) child[j] = mdist(rng);
      next_fit[i] = fitness(child);
      track(child, next_fit[i]);
      next[i] = std::move(child);
    }
    pop = std::move(next);
    fit = std::move(next_fit);
  }
  return to_solution(inst, best);
}

SolutionMatrix particle_swarm(const PmspInstance& inst, const PsoConfig& cfg,
                              Rng& rng) {
  cfg.validate();
  const int J = inst.num_jobs, M = inst.num_machines;
  std::uniform_real_distribution<double> u(0.0, 1.0);

  auto decode = [&](const Matrix& x) {
    Assignment a(J);
    for (int j = 0; j < J; ++j) {
      int m = 0;
      for (int k = 1; k < M; ++k)
        if (x(j, k) > x(j, m)) m = k;
      a[j] = m;
    }
    return a;
  };

  std::vector<Matrix> pos(cfg.particles), vel(cfg.particles),
      pbest(cfg.particles);
  std::vector<double> pbest_fit(cfg.particles);
  Matrix gbest;
  double gbest_fit = std::numeric_limits<double>::infinity();
  Assignment gbest_a;

  for (int i = 0; i < cfg.particles; ++i) {
    pos[i] = Matrix::NullaryExpr(J, M, [&] { return u(rng); });
    vel[i] = Matrix::Zero(J, M);
  }
  if (cfg.sjf_seed) {
    Assignment s = sjf_assignment(inst);
    pos[0].setZero();
    for (int j = 0; j < J; ++j) pos[0](j, s[j]) = 1.0;
  }
  for (int i = 0; i < cfg.particles; ++i) {
    pbest[i] = pos[i];
    Assignment a = decode(pos[i]);
    pbest_fit[i] = makespan(inst, a);
    if (pbest_fit[i] < gbest_fit) {
      gbest_fit = pbest_fit[i];
      gbest = pos[i];
      gbest_a = a;
    }
  }

  for (int it = 0; it < cfg.iterations; ++it) {
    for (int i = 0; i < cfg.particles; ++i) {
      double r1 = u(rng), r2 = u(rng);
      vel[i] = cfg.inertia * vel[i] +
               cfg.cognitive * r1 * (pbest[i] - pos[i]) +
               cfg.social * r2 * (gbest - pos[i]);
      pos[i] += vel[i];
      Assignment a = decode(pos[i]);
      double f = makespan(inst, a);
      if (f < pbest_fit[i]) {
        pbest_fit[i] = f;
        pbest[i] = pos[i];
        if (f < gbest_fit) {
          gbest_fit = f;
          gbest = pos[i];
          gbest_a = a;
        }
      }
    }
  }
  return to_solution(inst, gbest_a);
}

SolutionMatrix nearest_neighbor(const AtspInstance& inst) {
  const int n = inst.n;
  require(n >= 2, "nearest_neighbor: need n >= 2");
  std::vector<bool> used(n, false);
  std::vector<int> tour{0};
  used[0] = true;
  while (int(tour.size()) < n) {
    int cur = tour.back(), best = -1;
    for (int j = 0; j < n; ++j)
      if (!used[j] && (best < 0 || inst.dist(cur, j) < inst.dist(cur, best)))
        best = j;
    used[best] = true;
    tour.push_back(best);
  }
  return tour_to_solution(tour);
}

namespace {

/// Grows a subtour by cheapest insertion of the city picked by `select`
/// (distance from the subtour: min over members of min(d(i,c), d(c,i))).
template <typename Select>
SolutionMatrix insertion_tour(const AtspInstance& inst, Select select) {
  const int n = inst.n;
  require(n >= 2, "insertion: need n >= 2");
  std::vector<bool> used(n, false);
  std::vector<int> tour{0};
  used[0] = true;
  while (int(tour.size()) < n) {
    int pick = -1;
    double pick_d = 0.0;
    for (int c = 0; c < n; ++c) {
      if (used[c]) continue;
      double d = std::numeric_limits<double>::infinity();
      for (int i : tour)
        d = std::min({d, inst.dist(i, c), inst.dist(c, i)});
      if (pick < 0 || select(d, pick_d)) {
        pick = c;
        pick_d = d;
      }
    }
    // cheapest insertion position for the picked city
    int bestk = 0;
    double best_inc = std::numeric_limits<double>::infinity();
    const int m = int(tour.size());
    for (int k = 0; k < m; ++k) {
      int a = tour[k], b = tour[(k + 1) % m];
      double inc = inst.dist(a, pick) + inst.dist(pick, b) -
                   (m > 1 ? inst.dist(a, b) : 0.0);
      if (inc < best_inc) {
        best_inc = inc;
        bestk = k;
      }
    }
    used[pick] = true;
    tour.insert(tour.begin() + bestk + 1, pick);
  }
  return tour_to_solution(tour);
}

}  // namespace

SolutionMatrix nearest_insertion(const AtspInstance& inst) {
  return insertion_tour(inst, [](double d, double cur) { return d < cur; });
}

SolutionMatrix furthest_insertion(const AtspInstance& inst) {
  return insertion_tour(inst, [](double d, double cur) { return d > cur; });
}

std::pair<SolutionMatrix, double> held_karp_on_matrix(const Matrix& dist) {
  const int n = int(dist.rows());
  require(dist.cols() == n, "held_karp: square matrix required");
  if (n < 2 || n > 16)
    throw std::invalid_argument("held_karp: unsupported size n=" +
                                std::to_string(n) + " (need 2 <= n <= 16)");
  const double inf = std::numeric_limits<double>::infinity();
  const int full = 1 << n;
  // dp[mask][j]: cheapest path 0 -> ... -> j visiting exactly `mask`
  std::vector<std::vector<double>> dp(full, std::vector<double>(n, inf));
  std::vector<std::vector<int>> par(full, std::vector<int>(n, -1));
  dp[1][0] = 0.0;
  for (int mask = 1; mask < full; ++mask) {
    if (!(mask & 1)) continue;
    for (int j = 0; j < n; ++j) {
      if (!(mask & (1 << j)) || dp[mask][j] == inf) continue;
      for (int k = 0; k < n; ++k) {
        if (mask & (1 << k)) continue;
        int nm = mask | (1 << k);
        double cand = dp[mask][j] + dist(j, k);
        if (cand < dp[nm][k]) {
          dp[nm][k] = cand;
          par[nm][k] = j;
        }
      }
    }
  }
  int last = -1;
  double best = inf;
  for (int j = 1; j < n; ++j) {
    double cand = dp[full - 1][j] + dist(j, 0);
    if (cand < best) {
      best = cand;
      last = j;
    }
  }
  std::vector<int> tour(n);
  int mask = full - 1, j = last;
  for (int k = n - 1; k >= 0; --k) {
    tour[k] = j;
    int pj = par[mask][j];
    mask &= ~(1 << j);
    j = pj;
  }
  return {tour_to_solution(tour), best};
}

std::pair<SolutionMatrix, double> held_karp(const AtspInstance& inst) {
  return held_karp_on_matrix(inst.dist);
}

std::pair<SolutionMatrix, double> pmsp_exact(const PmspInstance& inst) {
  const int J = inst.num_jobs, M = inst.num_machines;
  if (std::pow(double(M), double(J)) > 1e7 && J > 20)
    throw std::invalid_argument(
        "pmsp_exact: unsupported size J=" + std::to_string(J) +
        " M=" + std::to_string(M));

  Assignment cur(J, 0), best = sjf_assignment(inst);
  double best_ms = makespan(inst, best);
  std::vector<double> load(M, 0.0);

  // depth-first over jobs, pruning branches whose max load already
  // reaches the incumbent
  auto rec = [&](auto&& self, int j) -> void {
    if (j == J) {
      double ms = *std::max_element(load.begin(), load.end());
      if (ms < best_ms) {
        best_ms = ms;
        best = cur;
      }
      return;
    }
    for (int m = 0; m < M; ++m) {
      load[m] += inst.proc(j, m);
      if (load[m] < best_ms) {
        cur[j] = m;
        self(self, j + 1);
      }
      load[m] -= inst.proc(j, m);
    }
  };
  rec(rec, 0);
  return {to_solution(inst, best), best_ms};
}

}  // namespace icdc
