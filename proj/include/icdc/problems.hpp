#ifndef ICDC_PROBLEMS_HPP
#define ICDC_PROBLEMS_HPP

#include <array>
#include <iosfwd>
#include <variant>

#include "icdc/common.hpp"

namespace icdc {

/// Asymmetric TSP instance: n cities, nonnegative cost matrix.
struct AtspInstance {
  int n = 0;
  Matrix dist;      // n x n, zero diagonal, positive off-diagonal
  bool tmat = false;  // triangle-tightened
  std::uint64_t seed = 0;
};

/// Unrelated parallel machine scheduling: J jobs, M machines.
struct PmspInstance {
  int num_jobs = 0;
  int num_machines = 0;
  Matrix proc;  // J x M, positive processing times
  std::uint64_t seed = 0;
};

/// Navigation variant: travel time derived from coordinates, reciprocal
/// speed and traffic.
struct NavInstance {
  int n = 0;
  Matrix coords;       // n x 2
  Matrix speed_recip;  // n x n, positive
  Matrix traffic;      // n x n
  std::uint64_t seed = 0;
};

using Problem = std::variant<AtspInstance, PmspInstance, NavInstance>;

enum class ProblemKind { Atsp, Pmsp, Nav };

ProblemKind kind_of(const Problem& p);
const char* kind_name(ProblemKind k);

/// Solution matrix shape (|A|, |B|) for a problem.
std::pair<int, int> solution_shape(const Problem& p);

// ---- generators (deterministic per seed) ----

AtspInstance generate_tmat_atsp(int n, std::uint64_t seed);
PmspInstance generate_pmsp(int J, int M, std::uint64_t seed);
NavInstance generate_nav(int n, std::uint64_t seed);

/// Derived travel-time matrix T^a[i][j] = ||r_i - r_j||^2 * S[i][j] + F[i][j].
Matrix nav_to_time_matrix(const NavInstance& inst);

/// Relation matrix D used for scoring (dist / proc / travel time).
Matrix relation_matrix(const Problem& p);

// ---- scoring ----

bool is_feasible(const Problem& p, const SolutionMatrix& X);

/// score of a feasible solution; caller must gate on is_feasible.
double score(const Problem& p, const SolutionMatrix& X);

/// score when feasible, else the infeasible sentinel.
Reward reward(const Problem& p, const SolutionMatrix& X);

/// Uniform sample from the feasible set.
SolutionMatrix feasible_prior_sample(const Problem& p, Rng& rng);

/// Prior marginal [P(x=0), P(x=1)] of the corruption process.
enum class PmspQbarMode { ExactMarginal, PaperLiteral };
std::array<double, 2> qbar(const Problem& p,
                           PmspQbarMode mode = PmspQbarMode::ExactMarginal);

// ---- serialization (JSON, one object per line in dataset files) ----

std::string to_json(const Problem& p);
Problem problem_from_json(const std::string& line);

std::string to_json(const SolutionMatrix& X);
SolutionMatrix solution_from_json(const std::string& line);

void save_problems(const std::vector<Problem>& ps, const std::string& path);
std::vector<Problem> load_problems(const std::string& path);

}  // namespace icdc

#endif
