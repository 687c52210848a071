#ifndef ICDC_NN_HPP
#define ICDC_NN_HPP

#include <string>
#include <vector>

#include "icdc/problems.hpp"
#include "icdc/tape.hpp"

namespace icdc {

/// Named parameter tensors; gradient buffers and the optimizer are keyed
/// by slot index.
struct ParamStore {
  std::vector<Matrix> values;
  std::vector<std::string> names;

  int add(std::string name, Matrix v) {
    names.push_back(std::move(name));
    values.push_back(std::move(v));
    return int(values.size()) - 1;
  }
  size_t total_scalars() const {
    size_t n = 0;
    for (const auto& m : values) n += size_t(m.size());
    return n;
  }
};

struct Linear {
  int W = -1, b = -1;
};
struct Mlp {
  Linear l1, l2;
};

/// Batch-norm unit: learnable affine plus a running-statistics slot.
struct BnUnit {
  int gamma = -1, beta = -1;
  int stat = -1;
};

struct BnRunning {
  Matrix mean, var;  // 1 x d
  long count = 0;
};

struct EncoderSide {
  int W_inter = -1, W_intra = -1, W_v = -1;
  Mlp score_mlp;  // (1 + D channels) -> 1
  Mlp ff;         // d -> d
  BnUnit bn1, bn2;
};
struct EncoderLayer {
  EncoderSide a, b;
};

struct DenoiserLayer {
  int U_a = -1, U_b = -1, V_a = -1, V_b = -1, P = -1, Q = -1, R = -1;
  Mlp mlp_x;  // d -> d
  Mlp mlp_t;  // d -> d on the sinusoidal timestep features
  BnUnit bn_x, bn_a, bn_b;
};

struct ModelConfig {
  int d = 32;
  int enc_layers = 3;
  int dec_layers = 3;
  int max_items = 64;  // one-hot vocabulary for index-embedded items
  ProblemKind family = ProblemKind::Atsp;
  int T = 10;  // diffusion horizon the checkpoint was trained with
  PmspQbarMode qbar_mode = PmspQbarMode::ExactMarginal;

  int d_channels() const { return family == ProblemKind::Nav ? 2 : 1; }
};

struct Model {
  ModelConfig cfg;
  ParamStore params;
  std::vector<BnRunning> stats;

  Linear emb_a;       // A-side input embedding
  Linear emb_b;       // B-side input embedding (nav only)
  int emb_b_table = -1;  // max_items x d index embedding (atsp/pmsp)
  int edge_table = -1;   // 2 x d embedding of X_t bits
  Linear out;            // d -> 2
  std::vector<EncoderLayer> enc;
  std::vector<DenoiserLayer> dec;
};

Model init_model(const ModelConfig& cfg, Rng& rng);

/// Batch-statistics capture for deterministic running-average updates:
/// forwards append (mean, var) per BN slot; apply_captured_stats folds the
/// averaged batch statistics into the model's running stats.
struct StatsCapture {
  std::vector<std::vector<std::pair<Matrix, Matrix>>> per_slot;
  explicit StatsCapture(size_t n_slots) : per_slot(n_slots) {}
};

void apply_captured_stats(Model& model, const StatsCapture& cap,
                          double momentum = 0.9);

/// One tape-backed forward evaluation.
struct Forward {
  ad::Tape tape;
  const Model* model = nullptr;
  bool training = true;      // BN uses batch statistics
  bool bn_identity = false;  // bypass BN entirely (degenerate-case tests)
  StatsCapture* capture = nullptr;

  std::vector<int> param_nodes;  // param slot -> node id (-1 = not used yet)

  explicit Forward(const Model& m, bool training_mode = true)
      : model(&m), training(training_mode),
        param_nodes(m.params.values.size(), -1) {}

  int leaf(int slot);  // memoized param leaf
};

struct EmbeddingNodes {
  int a = -1, b = -1;  // |A| x d, |B| x d
  int nA = 0, nB = 0;
};

/// Problem encoder: dual bipartite attention over (A, B, D).
EmbeddingNodes encode_problem(Forward& f, const Problem& p);

/// Denoiser: bipartite anisotropic GNN; returns x0 logits node (AB x 2).
int denoise(Forward& f, const EmbeddingNodes& emb, const SolutionMatrix& Xt,
            int t);

/// Convenience plain forward (no gradient use by the caller).
Matrix denoise_logits(const Model& m, const Problem& p,
                      const SolutionMatrix& Xt, int t, bool training = false);

Matrix timestep_features(int t, int d);

// ---- checkpoints ----
void save_checkpoint(const Model& m, const std::string& path);
Model load_checkpoint(const std::string& path);

}  // namespace icdc

#endif
