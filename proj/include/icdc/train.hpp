#ifndef ICDC_TRAIN_HPP
#define ICDC_TRAIN_HPP

#include <deque>
#include <functional>
#include <limits>
#include <memory>
#include <optional>

#include "icdc/decode.hpp"

namespace icdc {

/// Finite-sample surrogate target: feasible solutions with their rewards,
/// sampled with probability proportional to exp((R - max R) / kappa).
class ReplayBuffer {
 public:
  struct Entry {
    std::shared_ptr<const Problem> problem;
    SolutionMatrix X0;
    double reward = 0.0;
  };

  ReplayBuffer(size_t capacity, double kappa = 1.0)
      : capacity_(capacity), kappa_(kappa) {
    require(capacity >= 1 && kappa > 0.0, "ReplayBuffer: bad capacity/kappa");
  }

  /// Appends a feasible entry (FIFO eviction); silently rejects
  /// infeasible X0 and counts the rejection.
  void push(std::shared_ptr<const Problem> p, SolutionMatrix X0);

  std::vector<const Entry*> sample(int batch, Rng& rng) const;

  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  long rejected() const { return rejected_; }
  long pushed() const { return pushed_; }
  const Entry& at(size_t i) const { return entries_[i]; }

 private:
  size_t capacity_;
  double kappa_;
  std::deque<Entry> entries_;
  long rejected_ = 0;
  long pushed_ = 0;
};

struct TrainConfig {
  double lr = 4e-4;
  double lr_final = 0.0;  // > 0 enables linear lr decay across epochs
  int T = 10;
  double alpha = 0.5;       // target mix ratio
  double lambda1 = 1e-3;    // prediction-loss weight
  double lambda2 = 1e-6;    // constraint-loss weight
  int M = 30;               // cloning steps per improvement step
  int N = 64;               // rollouts per improvement batch
  int group_instances = 4;  // distinct instances per improvement batch
  double tau = 1.0;         // Gumbel-softmax temperature
  double kappa = 1.0;       // buffer sampling temperature
  int batch_size = 32;
  int epochs = 100;  // outer iterations (M cloning + 1 improvement each)
  std::uint64_t seed = 0;
  size_t buffer_capacity = 0;  // 0 -> 10 * N / alpha
  int workers = 0;             // 0 = hardware default, 1 = serial
  int checkpoint_every = 0;    // epochs between checkpoints (0 = final only)
  ScheduleKind schedule = ScheduleKind::Cosine;

  void validate() const;
};

// ---- Adam optimizer ----
struct Adam {
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::vector<Matrix> m, v;
  long t = 0;

  void step(ParamStore& params, const std::vector<Matrix>& grads, double lr);
};

// ---- differentiable loss nodes (frozen noise passed in) ----

/// KL(q(X_{t-1}|X_t,X0) || p_theta(X_{t-1}|X_t,c)) summed over elements;
/// t >= 2. `logits` is the model's x0-logit node for this (Xt, t).
int loss_vb_node(Forward& f, int logits, const SolutionMatrix& X0,
                 const SolutionMatrix& Xt, int t, const NoiseSchedule& sched);

/// Cross-entropy -log p_theta(X0 | X_t, c) summed over elements.
int loss_prd_node(Forward& f, int logits, const SolutionMatrix& X0);

/// Gumbel-softmax constraint penalty; `gumbel` is (E x 2) noise.
int loss_cst_node(Forward& f, int logits, const Problem& p, double tau,
                  const Matrix& gumbel);

// ---- value-level loss ops (draw X_t internally) ----
double loss_vb(const Model& m, const Problem& p, const SolutionMatrix& X0,
               int t, const NoiseSchedule& sched, Rng& rng);
double loss_prd(const Model& m, const Problem& p, const SolutionMatrix& X0,
                int t, const NoiseSchedule& sched, Rng& rng);
double loss_cst(const Model& m, const Problem& p, const SolutionMatrix& X0,
                int t, const NoiseSchedule& sched, double tau, Rng& rng);

Matrix sample_gumbel(int rows, int cols, Rng& rng);

struct ClnReport {
  double loss_vb = 0.0, loss_prd = 0.0, loss_cst = 0.0, total = 0.0;
};

ClnReport cloning_step(Model& model, Adam& opt, const ReplayBuffer& buf,
                       const TrainConfig& cfg, const NoiseSchedule& sched,
                       Rng& rng);

struct ImpReport {
  double mean_reward = 0.0;
  double best_reward = 0.0;
  double mean_gap = std::numeric_limits<double>::quiet_NaN();
};

/// One REINFORCE step over cfg.N rollouts drawn from `pool`; the shared
/// baseline is the mean reward among rollouts of the same instance.
/// `oracle_best` (optional, per pool index) enables gap logging.
ImpReport improvement_step(Model& model, Adam& opt,
                           const std::vector<std::shared_ptr<const Problem>>& pool,
                           ReplayBuffer& buf, const TrainConfig& cfg,
                           const NoiseSchedule& sched, Rng& rng,
                           const std::vector<double>* oracle_best = nullptr);

/// Alternating training loop; writes metrics.csv and checkpoints under
/// run_dir when non-empty.
Model train(const std::vector<Problem>& pool, const ModelConfig& mcfg,
            const TrainConfig& cfg, const std::string& run_dir = "");

}  // namespace icdc

#endif
