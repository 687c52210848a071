#ifndef ICDC_DECODE_HPP
#define ICDC_DECODE_HPP

#include <memory>

#include "icdc/diffusion.hpp"
#include "icdc/nn.hpp"
#include "icdc/problems.hpp"

namespace icdc {

enum class DecodeMode { Sample, Greedy };

/// One masked categorical choice: candidate flat entries of the logits
/// matrix (channel 1) and the position chosen among them.
struct DecodeStep {
  std::vector<int> candidates;  // flat element indices e = i*cols + j
  int chosen = -1;              // position within candidates
};

struct DecodeResult {
  SolutionMatrix solution;
  double logprob = 0.0;  // exact log-likelihood of the masked choices
  bool feasible = true;
  std::vector<DecodeStep> trace;
};

/// Unconstrained elementwise sample from softmax(logits); may be infeasible.
SolutionMatrix sample_x0(const Matrix& x0_logits, int rows, int cols, Rng& rng);

/// Feasibility-enforced decode: PMSP job-by-job, ATSP/NAV along the tour
/// from city 0 with an unvisited mask. Output is always feasible.
DecodeResult feasible_decode(const Problem& p, const Matrix& x0_logits,
                             Rng& rng, DecodeMode mode);

/// Log-likelihood of a given feasible solution under the masked decode.
double decode_path_logprob(const Problem& p, const Matrix& x0_logits,
                           const SolutionMatrix& X);

/// Rebuild the decode log-probability as a differentiable scalar node from
/// a recorded trace; logits_node is the (E x 2) tape node.
int logprob_on_tape(ad::Tape& tape, int logits_node,
                    const std::vector<DecodeStep>& trace);

struct GenOptions {
  int stride = 1;
  DecodeMode mode = DecodeMode::Sample;
  bool training = false;   // BN batch statistics during forwards
  bool keep_tape = false;  // retain the final forward for REINFORCE
};

struct Generation {
  DecodeResult result;
  std::unique_ptr<Forward> fwd;  // set iff keep_tape
  int logits_node = -1;
};

/// Full reverse process: X_T ~ qbar elementwise, reduced-stride reverse
/// steps, feasibility-enforced decode from the final logits.
Generation full_reverse_generate(const Problem& p, const Model& model,
                                 const NoiseSchedule& sched, Rng& rng,
                                 const GenOptions& opts = {});

}  // namespace icdc

#endif
