#include "icdc/train.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "icdc/baselines.hpp"
#include "icdc/parallel.hpp"

namespace icdc {

// ---- replay buffer ----

void ReplayBuffer::push(std::shared_ptr<const Problem> p, SolutionMatrix X0) {
  ++pushed_;
  Reward r = reward(*p, X0);
  if (!r.feasible) {
    ++rejected_;
    return;
  }
  entries_.push_back(Entry{std::move(p), std::move(X0), r.score});
  while (entries_.size() > capacity_) entries_.pop_front();
}

std::vector<const ReplayBuffer::Entry*> ReplayBuffer::sample(int batch,
                                                             Rng& rng) const {
  if (entries_.empty())
    throw std::runtime_error("ReplayBuffer::sample: buffer is empty");
  double rmax = -std::numeric_limits<double>::infinity();
  for (const auto& e : entries_) rmax = std::max(rmax, e.reward);
  std::vector<double> w(entries_.size());
  for (size_t i = 0; i < entries_.size(); ++i)
    w[i] = std::exp((entries_[i].reward - rmax) / kappa_);
  std::discrete_distribution<size_t> pick(w.begin(), w.end());
  std::vector<const Entry*> out;
  out.reserve(batch);
  for (int i = 0; i < batch; ++i) out.push_back(&entries_[pick(rng)]);
  return out;
}

void TrainConfig::validate() const {
  require(lr > 0, "TrainConfig: lr must be > 0");
  require(lr_final >= 0, "TrainConfig: lr_final must be >= 0");
  require(T >= 1, "TrainConfig: T must be >= 1");
  require(alpha > 0 && alpha <= 1, "TrainConfig: alpha in (0,1]");
  require(lambda1 >= 0 && lambda2 >= 0, "TrainConfig: lambdas must be >= 0");
  require(M >= 1 && N >= 1, "TrainConfig: M, N must be >= 1");
  require(tau > 0, "TrainConfig: tau must be > 0");
  require(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
}

// ---- Adam ----

void Adam::step(ParamStore& params, const std::vector<Matrix>& grads,
                double lr) {
  if (m.empty()) {
    m.resize(params.values.size());
    v.resize(params.values.size());
    for (size_t i = 0; i < params.values.size(); ++i) {
      m[i] = Matrix::Zero(params.values[i].rows(), params.values[i].cols());
      v[i] = m[i];
    }
  }
  ++t;
  const double bc1 = 1.0 - std::pow(beta1, double(t));
  const double bc2 = 1.0 - std::pow(beta2, double(t));
  for (size_t i = 0; i < params.values.size(); ++i) {
    if (grads[i].size() == 0) continue;
    m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
    v[i] = beta2 * v[i].array().matrix() +
           (1.0 - beta2) * grads[i].cwiseProduct(grads[i]);
    Matrix mhat = m[i] / bc1;
    Matrix vhat = v[i] / bc2;
    params.values[i].array() -=
        lr * mhat.array() / (vhat.array().sqrt() + eps);
  }
}

// ---- losses ----

int loss_vb_node(Forward& f, int logits, const SolutionMatrix& X0,
                 const SolutionMatrix& Xt, int t, const NoiseSchedule& sched) {
  require(t >= 2, "loss_vb: t must be >= 2");
  ad::Tape& tp = f.tape;
  const int rows = X0.rows(), cols = X0.cols(), E = rows * cols;

  ElementDistribution q = posterior(Xt, X0, t, sched);

  // p_theta(X_{t-1}|X_t) from the x0 logits, on the tape.
  TransitionMatrix Qt = q_step_matrix(sched, t);
  TransitionMatrix Qprev = q_cum_matrix(sched, t - 1);
  Matrix fwd_w(E, 2);  // q(X_t = xt | X_{t-1} = k)
  for (int e = 0; e < E; ++e) {
    int xt = Xt(e / cols, e % cols);
    fwd_w(e, 0) = Qt(0, xt);
    fwd_w(e, 1) = Qt(1, xt);
  }
  int p0 = tp.softmax_rows(logits);
  int mix = tp.matmul(p0, tp.constant(Qprev));  // (E x 2): sum_v p0_v Qprev(v,k)
  int un = tp.cmul(mix, tp.constant(fwd_w));
  int rs = tp.add_scalar(tp.row_sums(un), kProbFloor);
  int p = tp.cdiv(un, tp.broadcast_cols(rs, 2));

  // KL(q || p) = sum q log q - sum q log p; the first term is constant.
  double qlogq = 0.0;
  for (int e = 0; e < E; ++e)
    for (int k = 0; k < 2; ++k)
      if (q.p(e, k) > 0) qlogq += q.p(e, k) * std::log(q.p(e, k));
  int cross = tp.sum(tp.cmul(tp.constant(q.p), tp.log(p)));
  return tp.add_scalar(tp.scale(cross, -1.0), qlogq);
}

int loss_prd_node(Forward& f, int logits, const SolutionMatrix& X0) {
  ad::Tape& tp = f.tape;
  const int cols = X0.cols(), E = X0.rows() * X0.cols();
  int ls = tp.log_softmax_rows(logits);
  std::vector<std::pair<int, int>> idx;
  idx.reserve(E);
  for (int e = 0; e < E; ++e) idx.emplace_back(e, X0(e / cols, e % cols));
  return tp.scale(tp.sum(tp.gather_entries(ls, std::move(idx))), -1.0);
}

int loss_cst_node(Forward& f, int logits, const Problem& p, double tau,
                  const Matrix& gumbel) {
  ad::Tape& tp = f.tape;
  auto [rows, cols] = solution_shape(p);
  int noisy = tp.scale(tp.add(logits, tp.constant(gumbel)), 1.0 / tau);
  int gs = tp.softmax_rows(noisy);
  int ones_ch = tp.reshape_rowmajor(tp.slice_cols(gs, 1, 1), rows, cols);
  int row_pen = tp.sum(
      tp.square(tp.add_scalar(tp.row_sums(ones_ch), -1.0)));
  if (kind_of(p) == ProblemKind::Pmsp) return row_pen;
  int col_pen = tp.sum(
      tp.square(tp.add_scalar(tp.col_sums(ones_ch), -1.0)));
  return tp.add(row_pen, col_pen);
}

Matrix sample_gumbel(int rows, int cols, Rng& rng) {
  std::uniform_real_distribution<double> u(
      std::numeric_limits<double>::min(), 1.0);
  Matrix g(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) g(i, j) = -std::log(-std::log(u(rng)));
  return g;
}

namespace {

struct LossForward {
  std::unique_ptr<Forward> f;
  int logits = -1;
  SolutionMatrix Xt;
};

LossForward forward_at(const Model& m, const Problem& p,
                       const SolutionMatrix& X0, int t,
                       const NoiseSchedule& sched, Rng& rng) {
  LossForward lf;
  lf.Xt = forward_sample(X0, t, sched, rng);
  lf.f = std::make_unique<Forward>(m, /*training=*/true);
  EmbeddingNodes emb = encode_problem(*lf.f, p);
  lf.logits = denoise(*lf.f, emb, lf.Xt, t);
  return lf;
}

}  // namespace

double loss_vb(const Model& m, const Problem& p, const SolutionMatrix& X0,
               int t, const NoiseSchedule& sched, Rng& rng) {
  LossForward lf = forward_at(m, p, X0, t, sched, rng);
  return lf.f->tape.val(
      loss_vb_node(*lf.f, lf.logits, X0, lf.Xt, t, sched))(0, 0);
}

double loss_prd(const Model& m, const Problem& p, const SolutionMatrix& X0,
                int t, const NoiseSchedule& sched, Rng& rng) {
  LossForward lf = forward_at(m, p, X0, t, sched, rng);
  return lf.f->tape.val(loss_prd_node(*lf.f, lf.logits, X0))(0, 0);
}

double loss_cst(const Model& m, const Problem& p, const SolutionMatrix& X0,
                int t, const NoiseSchedule& sched, double tau, Rng& rng) {
  LossForward lf = forward_at(m, p, X0, t, sched, rng);
  Matrix g = sample_gumbel(X0.rows() * X0.cols(), 2, rng);
  return lf.f->tape.val(loss_cst_node(*lf.f, lf.logits, p, tau, g))(0, 0);
}

// ---- cloning ----

ClnReport cloning_step(Model& model, Adam& opt, const ReplayBuffer& buf,
                       const TrainConfig& cfg, const NoiseSchedule& sched,
                       Rng& rng) {
  auto batch = buf.sample(cfg.batch_size, rng);
  const int B = int(batch.size());

  std::vector<std::uint64_t> seeds(B);
  for (auto& s : seeds) s = rng();

  std::vector<std::vector<Matrix>> item_grads(
      B, std::vector<Matrix>(model.params.values.size()));
  std::vector<StatsCapture> item_caps;
  item_caps.reserve(B);
  for (int i = 0; i < B; ++i) item_caps.emplace_back(model.stats.size());
  std::vector<std::array<double, 3>> item_losses(B);

  parallel_for(B, cfg.workers, [&](int i) {
    Rng lrng(seeds[i]);
    const auto& e = *batch[i];
    std::uniform_int_distribution<int> tdist(1, cfg.T);
    int t = tdist(lrng);
    SolutionMatrix Xt = forward_sample(e.X0, t, sched, lrng);

    Forward f(model, /*training=*/true);
    f.capture = &item_caps[i];
    EmbeddingNodes emb = encode_problem(f, *e.problem);
    int logits = denoise(f, emb, Xt, t);

    // t = 1: the VB term collapses into the prediction loss.
    int vb = (t >= 2) ? loss_vb_node(f, logits, e.X0, Xt, t, sched)
                      : f.tape.constant(Matrix::Zero(1, 1));
    int prd = loss_prd_node(f, logits, e.X0);
    Matrix g = sample_gumbel(e.X0.rows() * e.X0.cols(), 2, lrng);
    int cst = loss_cst_node(f, logits, *e.problem, cfg.tau, g);

    int total = f.tape.add(
        vb, f.tape.add(f.tape.scale(prd, cfg.lambda1),
                       f.tape.scale(cst, cfg.lambda2)));
    item_losses[i] = {f.tape.val(vb)(0, 0), f.tape.val(prd)(0, 0),
                      f.tape.val(cst)(0, 0)};
    f.tape.backward(total, 1.0 / double(B));
    f.tape.collect_param_grads(item_grads[i]);
  });

  // deterministic reductions in item order
  std::vector<Matrix> grads(model.params.values.size());
  StatsCapture cap(model.stats.size());
  ClnReport rep;
  for (int i = 0; i < B; ++i) {
    for (size_t k = 0; k < grads.size(); ++k) {
      if (item_grads[i][k].size() == 0) continue;
      if (grads[k].size() == 0)
        grads[k] = item_grads[i][k];
      else
        grads[k] += item_grads[i][k];
    }
    for (size_t s = 0; s < cap.per_slot.size(); ++s)
      for (auto& mv : item_caps[i].per_slot[s])
        cap.per_slot[s].push_back(std::move(mv));
    rep.loss_vb += item_losses[i][0] / B;
    rep.loss_prd += item_losses[i][1] / B;
    rep.loss_cst += item_losses[i][2] / B;
  }
  rep.total = rep.loss_vb + cfg.lambda1 * rep.loss_prd +
              cfg.lambda2 * rep.loss_cst;
  apply_captured_stats(model, cap);
  opt.step(model.params, grads, cfg.lr);
  return rep;
}

// ---- improvement ----

ImpReport improvement_step(
    Model& model, Adam& opt,
    const std::vector<std::shared_ptr<const Problem>>& pool,
    ReplayBuffer& buf, const TrainConfig& cfg, const NoiseSchedule& sched,
    Rng& rng, const std::vector<double>* oracle_best) {
  require(cfg.N >= 2, "improvement_step: N must be >= 2");
  require(!pool.empty(), "improvement_step: empty instance pool");

  const int groups = std::max(1, std::min(cfg.group_instances, cfg.N / 2));
  const int reps = cfg.N / groups;
  const int N = groups * reps;

  std::uniform_int_distribution<size_t> pdist(0, pool.size() - 1);
  std::vector<size_t> inst_idx(groups);
  for (auto& ix : inst_idx) ix = pdist(rng);
  std::vector<std::uint64_t> seeds(N);
  for (auto& s : seeds) s = rng();

  struct Rollout {
    Generation gen;
    double reward = 0.0;
    int logprob_node = -1;
  };
  std::vector<Rollout> rolls(N);

  GenOptions gopt;
  gopt.stride = 1;
  gopt.mode = DecodeMode::Sample;
  gopt.training = true;
  gopt.keep_tape = true;

  parallel_for(N, cfg.workers, [&](int i) {
    Rng lrng(seeds[i]);
    const Problem& p = *pool[inst_idx[i / reps]];
    rolls[i].gen = full_reverse_generate(p, model, sched, lrng, gopt);
    rolls[i].reward = reward(p, rolls[i].gen.result.solution).score;
    rolls[i].logprob_node = logprob_on_tape(
        rolls[i].gen.fwd->tape, rolls[i].gen.logits_node,
        rolls[i].gen.result.trace);
  });

  // shared baseline per instance group
  std::vector<double> baseline(groups, 0.0);
  for (int g = 0; g < groups; ++g) {
    for (int r = 0; r < reps; ++r) baseline[g] += rolls[g * reps + r].reward;
    baseline[g] /= reps;
  }

  std::vector<std::vector<Matrix>> item_grads(
      N, std::vector<Matrix>(model.params.values.size()));
  parallel_for(N, cfg.workers, [&](int i) {
    double adv = rolls[i].reward - baseline[i / reps];
    // grad(L_IMP) = -(1/N) sum adv * grad(logprob)
    rolls[i].gen.fwd->tape.backward(rolls[i].logprob_node,
                                    -adv / double(N));
    rolls[i].gen.fwd->tape.collect_param_grads(item_grads[i]);
  });

  std::vector<Matrix> grads(model.params.values.size());
  ImpReport rep;
  rep.best_reward = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < N; ++i) {
    for (size_t k = 0; k < grads.size(); ++k) {
      if (item_grads[i][k].size() == 0) continue;
      if (grads[k].size() == 0)
        grads[k] = item_grads[i][k];
      else
        grads[k] += item_grads[i][k];
    }
    rep.mean_reward += rolls[i].reward / N;
    rep.best_reward = std::max(rep.best_reward, rolls[i].reward);
  }
  opt.step(model.params, grads, cfg.lr);

  if (oracle_best) {
    double gap = 0.0;
    int cnt = 0;
    for (int i = 0; i < N; ++i) {
      double best = (*oracle_best)[inst_idx[i / reps]];
      if (!std::isfinite(best) || best <= 0) continue;
      gap += (-rolls[i].reward - best) / best;
      ++cnt;
    }
    if (cnt > 0) rep.mean_gap = gap / cnt;
  }

  // store generations plus ((1 - alpha)/alpha) * N prior samples
  for (int i = 0; i < N; ++i)
    buf.push(pool[inst_idx[i / reps]],
             std::move(rolls[i].gen.result.solution));
  long n_prior = long(std::ceil((1.0 - cfg.alpha) / cfg.alpha * N));
  for (long k = 0; k < n_prior; ++k) {
    auto p = pool[pdist(rng)];
    buf.push(p, feasible_prior_sample(*p, rng));
  }
  return rep;
}

// ---- outer loop ----

Model train(const std::vector<Problem>& pool_in, const ModelConfig& mcfg,
            const TrainConfig& cfg, const std::string& run_dir) {
  cfg.validate();
  require(!pool_in.empty(), "train: empty instance pool");
  Rng rng(cfg.seed);
  Model model = init_model(mcfg, rng);

  std::vector<std::shared_ptr<const Problem>> pool;
  pool.reserve(pool_in.size());
  for (const auto& p : pool_in)
    pool.push_back(std::make_shared<const Problem>(p));

  auto qb = qbar(*pool[0], mcfg.qbar_mode);
  NoiseSchedule sched = build_schedule(cfg.T, qb, cfg.schedule);

  size_t cap = cfg.buffer_capacity
                   ? cfg.buffer_capacity
                   : size_t(std::ceil(10.0 * cfg.N / cfg.alpha));
  ReplayBuffer buf(cap, cfg.kappa);
  for (int i = 0; i < cfg.N; ++i) {
    auto p = pool[i % pool.size()];
    buf.push(p, feasible_prior_sample(*p, rng));
  }

  // oracle reference for gap logging, when the instances are small enough
  std::vector<double> oracle(pool.size(),
                             std::numeric_limits<double>::quiet_NaN());
  bool have_oracle = false;
  if (kind_of(*pool[0]) != ProblemKind::Pmsp) {
    auto [n, nc] = solution_shape(*pool[0]);
    (void)nc;
    if (n <= 12) {
      for (size_t i = 0; i < pool.size(); ++i)
        oracle[i] = held_karp_on_matrix(relation_matrix(*pool[i])).second;
      have_oracle = true;
    }
  }

  std::ofstream log;
  if (!run_dir.empty()) {
    std::filesystem::create_directories(run_dir);
    log.open(run_dir + "/metrics.csv");
    log << "step,phase,loss_vb,loss_prd,loss_cst,mean_reward,feasible_rate,"
           "wallclock,mean_gap\n";
  }

  Adam opt;
  auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         t0)
        .count();
  };
  auto frate = [&buf] {
    return buf.pushed() ? 1.0 - double(buf.rejected()) / buf.pushed() : 1.0;
  };

  long step = 0;
  TrainConfig ecfg = cfg;  // per-epoch copy so lr can decay
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.lr_final > 0.0 && cfg.epochs > 1) {
      double frac = double(epoch) / double(cfg.epochs - 1);
      ecfg.lr = cfg.lr + frac * (cfg.lr_final - cfg.lr);
    }
    for (int m = 0; m < cfg.M; ++m) {
      ClnReport r = cloning_step(model, opt, buf, ecfg, sched, rng);
      ++step;
      if (log)
        log << step << ",cloning," << r.loss_vb << "," << r.loss_prd << ","
            << r.loss_cst << ",," << frate() << "," << elapsed() << ",\n";
    }
    ImpReport r = improvement_step(model, opt, pool, buf, ecfg, sched, rng,
                                   have_oracle ? &oracle : nullptr);
    ++step;
    if (log) {
      log << step << ",improvement,,,," << r.mean_reward << "," << frate()
          << "," << elapsed() << ",";
      if (std::isfinite(r.mean_gap)) log << r.mean_gap;
      log << "\n";
      log.flush();
    }
    if (!run_dir.empty() && cfg.checkpoint_every > 0 &&
        (epoch + 1) % cfg.checkpoint_every == 0)
      save_checkpoint(model, run_dir + "/checkpoint_epoch" +
                                 std::to_string(epoch + 1) + ".json");
  }
  if (!run_dir.empty()) save_checkpoint(model, run_dir + "/checkpoint.json");
  return model;
}

}  // namespace icdc
