#ifndef ICDC_DIFFUSION_HPP
#define ICDC_DIFFUSION_HPP

#include <array>
#include <vector>

#include "icdc/common.hpp"

namespace icdc {

/// Floor applied to probabilities before any division.
constexpr double kProbFloor = 1e-30;

enum class ScheduleKind { Cosine, LinearAlphaBar };

/// Categorical corruption schedule over 2-state variables.
/// Q_t = alpha_t * I + (1 - alpha_t) * 1 qbar^T.
struct NoiseSchedule {
  int T = 0;
  std::vector<double> alphas;     // alpha_t, index t-1
  std::vector<double> alpha_cum;  // cumulative product, index t-1
  std::array<double, 2> qbar{0.5, 0.5};

  /// Cumulative retention over steps {a..b} (1-based, inclusive),
  /// i.e. alpha_cum[b] / alpha_cum[a-1]. a > b yields 1 (empty product).
  double alpha_range(int a, int b) const;
};

using TransitionMatrix = Eigen::Matrix2d;

/// Per-element categorical distributions over {0,1}; rows*cols x 2,
/// flattened row-major over the solution matrix.
struct ElementDistribution {
  int rows = 0, cols = 0;
  Matrix p;  // (rows*cols) x 2, each row sums to 1

  double at(int i, int j, int v) const { return p(i * cols + j, v); }
};

NoiseSchedule build_schedule(int T, const std::array<double, 2>& qbar,
                             ScheduleKind kind = ScheduleKind::Cosine);

TransitionMatrix q_step_matrix(const NoiseSchedule& sched, int t);
TransitionMatrix q_cum_matrix(const NoiseSchedule& sched, int t);

/// Transition over steps {a..b}: closed form with alpha_range(a, b).
TransitionMatrix q_range_matrix(const NoiseSchedule& sched, int a, int b);

/// Sample X_t ~ q(X_t | X_0), elementwise.
SolutionMatrix forward_sample(const SolutionMatrix& X0, int t,
                              const NoiseSchedule& sched, Rng& rng);

/// Exact Bayes posterior q(X_{t-1} | X_t, X_0), elementwise; t >= 2.
ElementDistribution posterior(const SolutionMatrix& Xt,
                              const SolutionMatrix& X0, int t,
                              const NoiseSchedule& sched);

/// p(X_{t-s} | X_t) mixing q(X_{t-s}, X_t | X_0 = v) with softmax(x0_logits).
/// x0_logits is (rows*cols) x 2. s = 1 recovers the one-step reverse kernel.
ElementDistribution reverse_step_dist(const Matrix& x0_logits,
                                      const SolutionMatrix& Xt, int t, int s,
                                      const NoiseSchedule& sched);

/// Sample elementwise from a per-element distribution.
SolutionMatrix sample_elementwise(const ElementDistribution& dist, Rng& rng);

}  // namespace icdc

#endif
