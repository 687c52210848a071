#include "icdc/decode.hpp"

#include <cassert>
#include <cmath>

namespace icdc {

SolutionMatrix sample_x0(const Matrix& x0_logits, int rows, int cols,
                         Rng& rng) {
  require(x0_logits.rows() == rows * cols && x0_logits.cols() == 2,
          "sample_x0: logits shape mismatch");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SolutionMatrix X(rows, cols);
  for (int e = 0; e < rows * cols; ++e) {
    double m = std::max(x0_logits(e, 0), x0_logits(e, 1));
    double p1 = std::exp(x0_logits(e, 1) - m);
    p1 /= p1 + std::exp(x0_logits(e, 0) - m);
    X(e / cols, e % cols) = (u(rng) < p1) ? 1 : 0;
  }
  return X;
}

namespace {

/// Softmax over the "1"-logits of the candidate entries.
std::vector<double> masked_probs(const Matrix& logits,
                                 const std::vector<int>& cand) {
  double m = -1e300;
  for (int e : cand) m = std::max(m, logits(e, 1));
  std::vector<double> p(cand.size());
  double z = 0.0;
  for (size_t k = 0; k < cand.size(); ++k) {
    p[k] = std::exp(logits(cand[k], 1) - m);
    z += p[k];
  }
  for (double& v : p) v /= z;
  return p;
}

int choose(const std::vector<double>& p, Rng& rng, DecodeMode mode) {
  if (mode == DecodeMode::Greedy) {
    int best = 0;
    for (size_t k = 1; k < p.size(); ++k)
      if (p[k] > p[best]) best = int(k);  // ties keep the lowest index
    return best;
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double r = u(rng), acc = 0.0;
  for (size_t k = 0; k < p.size(); ++k) {
    acc += p[k];
    if (r < acc) return int(k);
  }
  return int(p.size()) - 1;
}

/// Run the constrained decode; `pick` maps per-step probabilities to a
/// choice (used for both free decoding and teacher forcing).
template <typename Pick>
DecodeResult run_decode(const Problem& p, const Matrix& logits, Pick pick) {
  auto [rows, cols] = solution_shape(p);
  require(logits.rows() == rows * cols && logits.cols() == 2,
          "feasible_decode: logits shape mismatch");
  DecodeResult out;
  out.solution = SolutionMatrix(rows, cols);
  if (kind_of(p) == ProblemKind::Pmsp) {
    for (int j = 0; j < rows; ++j) {
      DecodeStep step;
      for (int m = 0; m < cols; ++m) step.candidates.push_back(j * cols + m);
      auto probs = masked_probs(logits, step.candidates);
      step.chosen = pick(step, probs);
      out.logprob += std::log(probs[step.chosen]);
      out.solution(j, step.chosen) = 1;
      out.trace.push_back(std::move(step));
    }
    return out;
  }
  // ATSP/NAV: walk the tour from city 0 over unvisited cities, closing
  // the cycle on the last step.
  const int n = rows;
  std::vector<bool> visited(n, false);
  visited[0] = true;
  int cur = 0;
  for (int stepno = 0; stepno < n; ++stepno) {
    DecodeStep step;
    if (stepno == n - 1) {
      step.candidates.push_back(cur * n + 0);
    } else {
      for (int j = 1; j < n; ++j)
        if (!visited[j]) step.candidates.push_back(cur * n + j);
    }
    assert(!step.candidates.empty());
    auto probs = masked_probs(logits, step.candidates);
    step.chosen = pick(step, probs);
    out.logprob += std::log(probs[step.chosen]);
    int next = step.candidates[step.chosen] % n;
    out.solution(cur, next) = 1;
    visited[next] = true;
    cur = next;
    out.trace.push_back(std::move(step));
  }
  return out;
}

}  // namespace

DecodeResult feasible_decode(const Problem& p, const Matrix& x0_logits,
                             Rng& rng, DecodeMode mode) {
  return run_decode(p, x0_logits,
                    [&](const DecodeStep&, const std::vector<double>& probs) {
                      return choose(probs, rng, mode);
                    });
}

double decode_path_logprob(const Problem& p, const Matrix& x0_logits,
                           const SolutionMatrix& X) {
  require(is_feasible(p, X), "decode_path_logprob: X must be feasible");
  const int cols = X.cols();
  DecodeResult r = run_decode(
      p, x0_logits,
      [&](const DecodeStep& step, const std::vector<double>&) {
        for (size_t k = 0; k < step.candidates.size(); ++k) {
          int e = step.candidates[k];
          if (X(e / cols, e % cols) == 1) return int(k);
        }
        throw std::logic_error("decode_path_logprob: no candidate matches X");
      });
  return r.logprob;
}

int logprob_on_tape(ad::Tape& tape, int logits_node,
                    const std::vector<DecodeStep>& trace) {
  int total = tape.constant(Matrix::Zero(1, 1));
  for (const auto& step : trace) {
    std::vector<std::pair<int, int>> idx;
    idx.reserve(step.candidates.size());
    for (int e : step.candidates) idx.emplace_back(e, 1);
    int gathered = tape.gather_entries(logits_node, idx);  // k x 1
    double m = tape.val(gathered).maxCoeff();
    int lse = tape.add_scalar(
        tape.log(tape.sum(tape.exp(tape.add_scalar(gathered, -m)))), m);
    int chosen = tape.gather_entries(logits_node,
                                     {{step.candidates[step.chosen], 1}});
    total = tape.add(total, tape.sub(chosen, lse));
  }
  return total;
}

Generation full_reverse_generate(const Problem& p, const Model& model,
                                 const NoiseSchedule& sched, Rng& rng,
                                 const GenOptions& opts) {
  require(opts.stride >= 1, "full_reverse_generate: stride must be >= 1");
  auto [rows, cols] = solution_shape(p);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto qb = qbar(p, model.cfg.qbar_mode);
  SolutionMatrix Xt(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) Xt(i, j) = (u(rng) < qb[1]) ? 1 : 0;

  int t = sched.T;
  if (t > opts.stride) {
    // Intermediate reverse steps; values only, the tape is discarded.
    Forward f(model, opts.training);
    EmbeddingNodes emb = encode_problem(f, p);
    while (t > opts.stride) {
      int logits = denoise(f, emb, Xt, t);
      ElementDistribution d =
          reverse_step_dist(f.tape.val(logits), Xt, t, opts.stride, sched);
      Xt = sample_elementwise(d, rng);
      t -= opts.stride;
    }
  }

  Generation gen;
  auto fwd = std::make_unique<Forward>(model, opts.training);
  EmbeddingNodes emb = encode_problem(*fwd, p);
  gen.logits_node = denoise(*fwd, emb, Xt, t);
  gen.result = feasible_decode(p, fwd->tape.val(gen.logits_node), rng,
                               opts.mode);
  if (opts.keep_tape) gen.fwd = std::move(fwd);
  return gen;
}

}  // namespace icdc
