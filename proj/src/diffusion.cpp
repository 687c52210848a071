#include "icdc/diffusion.hpp"

#include <cmath>

namespace icdc {

double NoiseSchedule::alpha_range(int a, int b) const {
  if (a > b) return 1.0;
  double num = alpha_cum[b - 1];
  double den = (a >= 2) ? alpha_cum[a - 2] : 1.0;
  return num / std::max(den, kProbFloor);
}

NoiseSchedule build_schedule(int T, const std::array<double, 2>& qb,
                             ScheduleKind kind) {
  require(T >= 1, "build_schedule: T must be >= 1");
  NoiseSchedule s;
  s.T = T;
  s.qbar = qb;
  s.alphas.resize(T);
  s.alpha_cum.resize(T);
  auto abar = [&](int t) -> double {
    if (kind == ScheduleKind::Cosine) {
      const double off = 0.008;
      double f = std::cos((double(t) / T + off) / (1.0 + off) * M_PI / 2.0);
      double f0 = std::cos(off / (1.0 + off) * M_PI / 2.0);
      return (f * f) / (f0 * f0);
    }
    // linear in alpha-bar, from 1 at t=0 down to ~0 at t=T
    return 1.0 - double(t) / (T + 1.0);
  };
  double prev = 1.0;
  for (int t = 1; t <= T; ++t) {
    double cur = abar(t);
    s.alpha_cum[t - 1] = cur;
    s.alphas[t - 1] = cur / prev;
    prev = cur;
  }
  return s;
}

static TransitionMatrix affine_matrix(double a, const std::array<double, 2>& qb) {
  TransitionMatrix m;
  m << a + (1 - a) * qb[0], (1 - a) * qb[1],
       (1 - a) * qb[0], a + (1 - a) * qb[1];
  return m;
}

TransitionMatrix q_step_matrix(const NoiseSchedule& sched, int t) {
  require(t >= 1 && t <= sched.T, "q_step_matrix: t out of range");
  return affine_matrix(sched.alphas[t - 1], sched.qbar);
}

TransitionMatrix q_cum_matrix(const NoiseSchedule& sched, int t) {
  require(t >= 1 && t <= sched.T, "q_cum_matrix: t out of range");
  return affine_matrix(sched.alpha_cum[t - 1], sched.qbar);
}

TransitionMatrix q_range_matrix(const NoiseSchedule& sched, int a, int b) {
  require(a >= 1 && b <= sched.T, "q_range_matrix: range out of bounds");
  return affine_matrix(sched.alpha_range(a, b), sched.qbar);
}

SolutionMatrix forward_sample(const SolutionMatrix& X0, int t,
                              const NoiseSchedule& sched, Rng& rng) {
  TransitionMatrix q = q_cum_matrix(sched, t);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SolutionMatrix Xt(X0.rows(), X0.cols());
  for (int i = 0; i < X0.rows(); ++i)
    for (int j = 0; j < X0.cols(); ++j)
      Xt(i, j) = (u(rng) < q(X0(i, j), 1)) ? 1 : 0;
  return Xt;
}

ElementDistribution posterior(const SolutionMatrix& Xt,
                              const SolutionMatrix& X0, int t,
                              const NoiseSchedule& sched) {
  require(t >= 2, "posterior: t must be >= 2 (t = 1 collapses to X0)");
  TransitionMatrix Qt = q_step_matrix(sched, t);
  TransitionMatrix Qprev = q_cum_matrix(sched, t - 1);
  ElementDistribution out;
  out.rows = X0.rows();
  out.cols = X0.cols();
  out.p.resize(out.rows * out.cols, 2);
  for (int i = 0; i < out.rows; ++i)
    for (int j = 0; j < out.cols; ++j) {
      int x0 = X0(i, j), xt = Xt(i, j);
      double p0 = Qt(0, xt) * Qprev(x0, 0);
      double p1 = Qt(1, xt) * Qprev(x0, 1);
      double z = std::max(p0 + p1, kProbFloor);
      out.p(i * out.cols + j, 0) = p0 / z;
      out.p(i * out.cols + j, 1) = p1 / z;
    }
  return out;
}

ElementDistribution reverse_step_dist(const Matrix& x0_logits,
                                      const SolutionMatrix& Xt, int t, int s,
                                      const NoiseSchedule& sched) {
  require(s >= 1 && s <= t && t <= sched.T,
          "reverse_step_dist: need 1 <= s <= t <= T");
  const int rows = Xt.rows(), cols = Xt.cols();
  require(x0_logits.rows() == rows * cols && x0_logits.cols() == 2,
          "reverse_step_dist: logits shape mismatch");
  // q(X_t | X_{t-s}) over steps {t-s+1..t}; q(X_{t-s} | X_0) over {1..t-s}.
  TransitionMatrix Qfwd = q_range_matrix(sched, t - s + 1, t);
  TransitionMatrix Qpast = (t - s >= 1) ? q_cum_matrix(sched, t - s)
                                        : TransitionMatrix::Identity();
  ElementDistribution out;
  out.rows = rows;
  out.cols = cols;
  out.p.resize(rows * cols, 2);
  for (int e = 0; e < rows * cols; ++e) {
    double m = std::max(x0_logits(e, 0), x0_logits(e, 1));
    double w0 = std::exp(x0_logits(e, 0) - m);
    double w1 = std::exp(x0_logits(e, 1) - m);
    double z = w0 + w1;
    double pv0 = w0 / z, pv1 = w1 / z;
    int xt = Xt(e / cols, e % cols);
    double u0 = Qfwd(0, xt) * (pv0 * Qpast(0, 0) + pv1 * Qpast(1, 0));
    double u1 = Qfwd(1, xt) * (pv0 * Qpast(0, 1) + pv1 * Qpast(1, 1));
    double zz = std::max(u0 + u1, kProbFloor);
    out.p(e, 0) = u0 / zz;
    out.p(e, 1) = u1 / zz;
  }
  return out;
}

SolutionMatrix sample_elementwise(const ElementDistribution& dist, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SolutionMatrix X(dist.rows, dist.cols);
  for (int i = 0; i < dist.rows; ++i)
    for (int j = 0; j < dist.cols; ++j)
      X(i, j) = (u(rng) < dist.p(i * dist.cols + j, 1)) ? 1 : 0;
  return X;
}

}  // namespace icdc
