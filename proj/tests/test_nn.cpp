#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "helpers.hpp"
#include "icdc/nn.hpp"

using namespace icdc;
using namespace icdc_test;

namespace {

ModelConfig tiny_cfg(ProblemKind family = ProblemKind::Atsp, int d = 4) {
  ModelConfig cfg;
  cfg.d = d;
  cfg.enc_layers = 1;
  cfg.dec_layers = 1;
  cfg.max_items = 16;
  cfg.family = family;
  cfg.T = 10;
  return cfg;
}

Matrix forward_logits(const Model& m, const Problem& p,
                      const SolutionMatrix& Xt, int t, bool bn_identity) {
  Forward f(m, /*training=*/true);
  f.bn_identity = bn_identity;
  EmbeddingNodes emb = encode_problem(f, p);
  int logits = denoise(f, emb, Xt, t);
  return f.tape.val(logits);
}

}  // namespace

TEST_CASE("init_model is deterministic and finite") {
  ModelConfig cfg = tiny_cfg();
  Rng r1(42), r2(42);
  Model m1 = init_model(cfg, r1), m2 = init_model(cfg, r2);
  REQUIRE(m1.params.values.size() == m2.params.values.size());
  for (size_t i = 0; i < m1.params.values.size(); ++i)
    CHECK(m1.params.values[i] == m2.params.values[i]);

  Problem p{generate_tmat_atsp(8, 1)};
  Rng rng(0);
  SolutionMatrix Xt = feasible_prior_sample(p, rng);
  Matrix logits = denoise_logits(m1, p, Xt, 3, true);
  CHECK(logits.rows() == 64);
  CHECK(logits.cols() == 2);
  CHECK(logits.allFinite());
}

TEST_CASE("parameter count matches the analytic architecture count") {
  const int d = 8;
  ModelConfig cfg = tiny_cfg(ProblemKind::Atsp, d);
  Rng rng(0);
  Model m = init_model(cfg, rng);

  auto linear = [&](int in, int out) { return in * out + out; };
  auto mlp = [&](int in, int hidden, int out) {
    return linear(in, hidden) + linear(hidden, out);
  };
  auto bn = [&](int dim) { return 2 * dim; };  // gamma + beta
  // per encoder side: W_inter, W_intra, W_v (d x d, no bias), score MLP
  // (2 -> d -> 1), feedforward MLP (d -> d -> d), two BN units
  long enc_side = 3 * d * d + mlp(2, d, 1) + mlp(d, d, d) + 2 * bn(d);
  // per denoiser layer: U_a, U_b, V_a, V_b, P, Q, R (d x d, no bias),
  // MLP_x (d -> d -> d), MLP_t (d -> d -> d), three BN units
  long dec_layer = 7 * d * d + 2 * mlp(d, d, d) + 3 * bn(d);
  long expected = linear(1, d)            // A-side zero-vector embedding
                  + cfg.max_items * d     // B-side one-hot table
                  + 2 * d                 // edge-bit table
                  + linear(d, 2)          // output head
                  + cfg.enc_layers * 2 * enc_side + cfg.dec_layers * dec_layer;
  CHECK(long(m.params.total_scalars()) == expected);
}

TEST_CASE("zero weights with BN bypassed reduce to the residual path") {
  ModelConfig cfg = tiny_cfg();
  Rng rng(1);
  Model m = init_model(cfg, rng);
  Problem p{generate_tmat_atsp(5, 3)};

  // zero every parameter; the encoder layer becomes A' = A + 0 twice over
  for (auto& v : m.params.values) v.setZero();
  Forward f(m, true);
  f.bn_identity = true;
  EmbeddingNodes emb = encode_problem(f, p);
  // with zero embeddings the inputs are zero, so outputs must stay zero
  CHECK(f.tape.val(emb.a).cwiseAbs().maxCoeff() == 0.0);
  CHECK(f.tape.val(emb.b).cwiseAbs().maxCoeff() == 0.0);

  // non-zero input embeddings must survive the zero-weight layers intact
  Rng r2(2);
  Model m2 = init_model(cfg, r2);
  Matrix emb_b_backup = m2.params.values[m2.emb_b_table];
  for (size_t i = 0; i < m2.params.values.size(); ++i) m2.params.values[i].setZero();
  m2.params.values[m2.emb_b_table] = emb_b_backup;
  Forward f2(m2, true);
  f2.bn_identity = true;
  EmbeddingNodes emb2 = encode_problem(f2, p);
  Matrix want = emb_b_backup.topRows(5);
  CHECK((f2.tape.val(emb2.b) - want).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("denoiser output shape and timestep sensitivity") {
  for (int L : {1, 2, 3}) {
    ModelConfig cfg = tiny_cfg();
    cfg.d = 8;  // enough mlp_t hidden units that some relu stays live
    cfg.dec_layers = L;
    Rng rng(7);
    Model m = init_model(cfg, rng);
    Problem p{generate_pmsp(3, 2, 1)};
    Rng r(1);
    SolutionMatrix Xt = feasible_prior_sample(p, r);
    Matrix l1 = denoise_logits(m, p, Xt, 1, true);
    CHECK(l1.rows() == 6);
    CHECK(l1.cols() == 2);
    Matrix l2 = denoise_logits(m, p, Xt, 7, true);
    CHECK((l1 - l2).cwiseAbs().maxCoeff() > 1e-9);
  }
  CHECK_THROWS_AS(
      [] {
        ModelConfig cfg = tiny_cfg();
        Rng rng(7);
        Model m = init_model(cfg, rng);
        Problem p{generate_tmat_atsp(4, 1)};
        denoise_logits(m, p, SolutionMatrix(4, 4), 0, true);
      }(),
      std::invalid_argument);
}

TEST_CASE("all-zero weights with output bias give constant logits") {
  ModelConfig cfg = tiny_cfg();
  Rng rng(4);
  Model m = init_model(cfg, rng);
  for (auto& v : m.params.values) v.setZero();
  m.params.values[m.out.b](0, 0) = 0.7;
  m.params.values[m.out.b](0, 1) = -0.2;
  Problem p{generate_tmat_atsp(4, 1)};
  Rng r(1);
  SolutionMatrix Xt = feasible_prior_sample(p, r);
  Forward f(m, true);
  f.bn_identity = true;
  Matrix logits = f.tape.val(denoise(f, encode_problem(f, p), Xt, 2));
  for (int e = 0; e < 16; ++e) {
    CHECK(logits(e, 0) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(logits(e, 1) == doctest::Approx(-0.2).epsilon(1e-12));
  }
}

TEST_CASE("NAV B-side permutation equivariance, A-side invariance") {
  ModelConfig cfg = tiny_cfg(ProblemKind::Nav);
  Rng rng(9);
  Model m = init_model(cfg, rng);
  NavInstance v = generate_nav(5, 2);

  // permute B items: rows of coords on the B side and columns of both
  // relation channels
  std::vector<int> perm{2, 0, 4, 1, 3};
  NavInstance w = v;
  for (int j = 0; j < 5; ++j) {
    for (int i = 0; i < 5; ++i) {
      w.speed_recip(i, perm[j]) = v.speed_recip(i, j);
      w.traffic(i, perm[j]) = v.traffic(i, j);
    }
  }
  // NAV embeds the same coords on both sides, so a clean B-only
  // permutation needs distinct B coords; emulate it by comparing through
  // the encoder with the A side fixed. Instead, test full consistency:
  // permuting A and B together permutes both embeddings.
  NavInstance u;
  u.n = 5;
  u.coords = Matrix(5, 2);
  u.speed_recip = Matrix(5, 5);
  u.traffic = Matrix(5, 5);
  for (int i = 0; i < 5; ++i) {
    u.coords.row(perm[i]) = v.coords.row(i);
    for (int j = 0; j < 5; ++j) {
      u.speed_recip(perm[i], perm[j]) = v.speed_recip(i, j);
      u.traffic(perm[i], perm[j]) = v.traffic(i, j);
    }
  }
  Forward f1(m, true), f2(m, true);
  f1.bn_identity = f2.bn_identity = true;
  EmbeddingNodes e1 = encode_problem(f1, Problem{v});
  EmbeddingNodes e2 = encode_problem(f2, Problem{u});
  const Matrix& a1 = f1.tape.val(e1.a);
  const Matrix& a2 = f2.tape.val(e2.a);
  const Matrix& b1 = f1.tape.val(e1.b);
  const Matrix& b2 = f2.tape.val(e2.b);
  for (int i = 0; i < 5; ++i) {
    CHECK((a2.row(perm[i]) - a1.row(i)).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((b2.row(perm[i]) - b1.row(i)).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("full encoder+denoiser gradient matches finite differences") {
  ModelConfig cfg = tiny_cfg(ProblemKind::Atsp, 4);
  Rng rng(11);
  Model m = init_model(cfg, rng);
  // Zero-initialized biases put several relu inputs exactly at the kink
  // (the A-side raw input is all zeros); jitter to a generic point.
  Rng jr(99);
  std::uniform_real_distribution<double> jit(-0.05, 0.05);
  for (Matrix& v : m.params.values)
    for (Eigen::Index k = 0; k < v.size(); ++k) v.data()[k] += jit(jr);
  Problem p{generate_tmat_atsp(3, 5)};
  Rng r(2);
  SolutionMatrix Xt = feasible_prior_sample(p, r);
  Matrix w = Matrix::NullaryExpr(9, 2, [&] {
    return std::uniform_real_distribution<double>(-1, 1)(r);
  });

  auto loss_at = [&](const Model& model) {
    Forward f(model, /*training=*/true);
    EmbeddingNodes emb = encode_problem(f, p);
    int logits = denoise(f, emb, Xt, 3);
    return f.tape.val(f.tape.sum(f.tape.cmul(logits, f.tape.constant(w))))(0,
                                                                           0);
  };

  // analytic gradient
  Forward f(m, true);
  EmbeddingNodes emb = encode_problem(f, p);
  int logits = denoise(f, emb, Xt, 3);
  int loss = f.tape.sum(f.tape.cmul(logits, f.tape.constant(w)));
  f.tape.backward(loss);
  std::vector<Matrix> grads(m.params.values.size());
  f.tape.collect_param_grads(grads);

  // 100 random coordinates, central differences
  const double h = 1e-5;
  std::uniform_int_distribution<size_t> pick(0, m.params.values.size() - 1);
  int checked = 0, failures = 0;
  while (checked < 100) {
    size_t slot = pick(r);
    Matrix& v = m.params.values[slot];
    if (v.size() == 0) continue;
    int i = std::uniform_int_distribution<int>(0, int(v.rows()) - 1)(r);
    int j = std::uniform_int_distribution<int>(0, int(v.cols()) - 1)(r);
    double orig = v(i, j);
    v(i, j) = orig + h;
    double up = loss_at(m);
    v(i, j) = orig - h;
    double dn = loss_at(m);
    v(i, j) = orig;
    double fd = (up - dn) / (2 * h);
    double got = grads[slot].size() ? grads[slot](i, j) : 0.0;
    if (std::abs(got - fd) > 1e-4 * std::max(1.0, std::abs(fd))) ++failures;
    ++checked;
  }
  CHECK(failures == 0);
}

TEST_CASE("A-item permutation permutes logits rows (equivariance)") {
  ModelConfig cfg = tiny_cfg(ProblemKind::Pmsp);
  Rng rng(13);
  Model m = init_model(cfg, rng);
  PmspInstance p = generate_pmsp(4, 3, 8);
  Rng r(3);
  SolutionMatrix Xt = feasible_prior_sample(Problem{p}, r);

  std::vector<int> perm{3, 1, 0, 2};
  PmspInstance q = p;
  SolutionMatrix Yt(4, 3);
  for (int i = 0; i < 4; ++i) {
    q.proc.row(perm[i]) = p.proc.row(i);
    for (int j = 0; j < 3; ++j) Yt(perm[i], j) = Xt(i, j);
  }
  Matrix l1 = denoise_logits(m, Problem{p}, Xt, 2, true);
  Matrix l2 = denoise_logits(m, Problem{q}, Yt, 2, true);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j)
      for (int v = 0; v < 2; ++v)
        CHECK(l2(perm[i] * 3 + j, v) ==
              doctest::Approx(l1(i * 3 + j, v)).epsilon(1e-9));
}

TEST_CASE("checkpoint round trip and shape validation") {
  ModelConfig cfg = tiny_cfg();
  Rng rng(21);
  Model m = init_model(cfg, rng);
  Problem p{generate_tmat_atsp(5, 2)};
  Rng r(4);
  SolutionMatrix Xt = feasible_prior_sample(p, r);
  Matrix before = denoise_logits(m, p, Xt, 2, true);

  std::string path = "test_nn_ckpt.json";
  save_checkpoint(m, path);
  Model back = load_checkpoint(path);
  CHECK(back.cfg.d == cfg.d);
  Matrix after = denoise_logits(back, p, Xt, 2, true);
  CHECK((before - after).cwiseAbs().maxCoeff() == 0.0);
  std::remove(path.c_str());

  // mismatched shapes fail loudly
  save_checkpoint(m, path);
  {
    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    in.close();
    // corrupt the declared model width
    auto pos = text.find("\"d\":" + std::to_string(cfg.d));
    if (pos == std::string::npos)
      pos = text.find("\"d\": " + std::to_string(cfg.d));
    REQUIRE(pos != std::string::npos);
    text.replace(text.find(std::to_string(cfg.d), pos),
                 std::to_string(cfg.d).size(), "5");
    std::ofstream out(path);
    out << text;
  }
  CHECK_THROWS(load_checkpoint(path));
  std::remove(path.c_str());
}

TEST_CASE("timestep features are sinusoidal and distinct") {
  Matrix f1 = timestep_features(1, 8);
  Matrix f2 = timestep_features(2, 8);
  CHECK(f1.rows() == 1);
  CHECK(f1.cols() == 8);
  CHECK(f1.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
  CHECK((f1 - f2).cwiseAbs().maxCoeff() > 1e-9);
}
