#include "icdc/nn.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>

namespace icdc {

using ad::Tape;

// ---- init ----

namespace {

Matrix uniform_init(int r, int c, double scale, Rng& rng) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = u(rng);
  return m;
}

int add_weight(ParamStore& ps, const std::string& name, int r, int c,
               Rng& rng) {
  return ps.add(name, uniform_init(r, c, 1.0 / std::sqrt(double(r)), rng));
}

Linear add_linear(ParamStore& ps, const std::string& name, int in, int out,
                  Rng& rng) {
  Linear l;
  l.W = add_weight(ps, name + ".W", in, out, rng);
  l.b = ps.add(name + ".b", Matrix::Zero(1, out));
  return l;
}

Mlp add_mlp(ParamStore& ps, const std::string& name, int in, int hidden,
            int out, Rng& rng) {
  Mlp m;
  m.l1 = add_linear(ps, name + ".l1", in, hidden, rng);
  m.l2 = add_linear(ps, name + ".l2", hidden, out, rng);
  return m;
}

BnUnit add_bn(Model& model, const std::string& name, int d, ParamStore& ps) {
  BnUnit bn;
  bn.gamma = ps.add(name + ".gamma", Matrix::Ones(1, d));
  bn.beta = ps.add(name + ".beta", Matrix::Zero(1, d));
  bn.stat = int(model.stats.size());
  model.stats.push_back(BnRunning{Matrix::Zero(1, d), Matrix::Ones(1, d), 0});
  return bn;
}

}  // namespace

Model init_model(const ModelConfig& cfg, Rng& rng) {
  require(cfg.d >= 1 && cfg.enc_layers >= 1 && cfg.dec_layers >= 1,
          "init_model: d, L, L' must be >= 1");
  Model m;
  m.cfg = cfg;
  ParamStore& ps = m.params;
  const int d = cfg.d;
  const int score_in = 1 + cfg.d_channels();

  if (cfg.family == ProblemKind::Nav) {
    m.emb_a = add_linear(ps, "emb_a", 2, d, rng);
    m.emb_b = add_linear(ps, "emb_b", 2, d, rng);
  } else {
    m.emb_a = add_linear(ps, "emb_a", 1, d, rng);
    m.emb_b_table = add_weight(ps, "emb_b_table", cfg.max_items, d, rng);
  }
  m.edge_table = add_weight(ps, "edge_table", 2, d, rng);

  for (int l = 0; l < cfg.enc_layers; ++l) {
    EncoderLayer layer;
    for (int side = 0; side < 2; ++side) {
      std::string pre = "enc" + std::to_string(l) + (side ? ".b" : ".a");
      EncoderSide s;
      s.W_inter = add_weight(ps, pre + ".W_inter", d, d, rng);
      s.W_intra = add_weight(ps, pre + ".W_intra", d, d, rng);
      s.W_v = add_weight(ps, pre + ".W_v", d, d, rng);
      s.score_mlp = add_mlp(ps, pre + ".score", score_in, d, 1, rng);
      s.ff = add_mlp(ps, pre + ".ff", d, d, d, rng);
      s.bn1 = add_bn(m, pre + ".bn1", d, ps);
      s.bn2 = add_bn(m, pre + ".bn2", d, ps);
      (side ? layer.b : layer.a) = s;
    }
    m.enc.push_back(layer);
  }

  for (int l = 0; l < cfg.dec_layers; ++l) {
    std::string pre = "dec" + std::to_string(l);
    DenoiserLayer dl;
    dl.U_a = add_weight(ps, pre + ".U_a", d, d, rng);
    dl.U_b = add_weight(ps, pre + ".U_b", d, d, rng);
    dl.V_a = add_weight(ps, pre + ".V_a", d, d, rng);
    dl.V_b = add_weight(ps, pre + ".V_b", d, d, rng);
    dl.P = add_weight(ps, pre + ".P", d, d, rng);
    dl.Q = add_weight(ps, pre + ".Q", d, d, rng);
    dl.R = add_weight(ps, pre + ".R", d, d, rng);
    dl.mlp_x = add_mlp(ps, pre + ".mlp_x", d, d, d, rng);
    dl.mlp_t = add_mlp(ps, pre + ".mlp_t", d, d, d, rng);
    dl.bn_x = add_bn(m, pre + ".bn_x", d, ps);
    dl.bn_a = add_bn(m, pre + ".bn_a", d, ps);
    dl.bn_b = add_bn(m, pre + ".bn_b", d, ps);
    m.dec.push_back(dl);
  }

  m.out = add_linear(ps, "out", d, 2, rng);
  return m;
}

void apply_captured_stats(Model& model, const StatsCapture& cap,
                          double momentum) {
  for (size_t s = 0; s < cap.per_slot.size(); ++s) {
    const auto& items = cap.per_slot[s];
    if (items.empty()) continue;
    Matrix mean = Matrix::Zero(1, items[0].first.cols());
    Matrix var = Matrix::Zero(1, items[0].second.cols());
    for (const auto& [m, v] : items) {
      mean += m;
      var += v;
    }
    mean /= double(items.size());
    var /= double(items.size());
    BnRunning& r = model.stats[s];
    if (r.count == 0) {
      r.mean = mean;
      r.var = var;
    } else {
      r.mean = momentum * r.mean + (1.0 - momentum) * mean;
      r.var = momentum * r.var + (1.0 - momentum) * var;
    }
    r.count += long(items.size());
  }
}

int Forward::leaf(int slot) {
  if (param_nodes[slot] < 0)
    param_nodes[slot] = tape.param(model->params.values[slot], slot);
  return param_nodes[slot];
}

namespace {

int apply_linear(Forward& f, const Linear& lin, int x) {
  Tape& t = f.tape;
  int y = t.matmul(x, f.leaf(lin.W));
  return t.add(y, t.broadcast_rows(f.leaf(lin.b), int(t.val(y).rows())));
}

int apply_mlp(Forward& f, const Mlp& m, int x) {
  return apply_linear(f, m.l2, f.tape.relu(apply_linear(f, m.l1, x)));
}

int apply_bn(Forward& f, const BnUnit& bn, int x) {
  if (f.bn_identity) return x;
  Tape& t = f.tape;
  const BnRunning& r = f.model->stats[bn.stat];
  if (f.training || r.count == 0) {
    Matrix mean, var;
    int y = t.batchnorm_train(x, f.leaf(bn.gamma), f.leaf(bn.beta),
                              f.capture ? &mean : nullptr,
                              f.capture ? &var : nullptr);
    if (f.capture)
      f.capture->per_slot[bn.stat].emplace_back(std::move(mean),
                                                std::move(var));
    return y;
  }
  return t.batchnorm_infer(x, f.leaf(bn.gamma), f.leaf(bn.beta), r.mean,
                           r.var);
}

struct RawInputs {
  int a = -1, b = -1;               // feature nodes
  std::vector<Matrix> d_channels;   // |A| x |B| each
};

RawInputs raw_inputs(Forward& f, const Problem& p) {
  Tape& t = f.tape;
  const Model& m = *f.model;
  auto [nA, nB] = solution_shape(p);
  RawInputs r;
  if (m.cfg.family == ProblemKind::Nav) {
    const auto& nav = std::get<NavInstance>(p);
    int coords = t.constant(nav.coords);
    r.a = apply_linear(f, m.emb_a, coords);
    r.b = apply_linear(f, m.emb_b, coords);
    r.d_channels = {nav.speed_recip, nav.traffic};
  } else {
    int zeros = t.constant(Matrix::Zero(nA, 1));
    r.a = apply_linear(f, m.emb_a, zeros);
    require(nB <= m.cfg.max_items,
            "encode_problem: instance exceeds max_items embedding table");
    std::vector<int> idx(nB);
    for (int j = 0; j < nB; ++j) idx[j] = j;
    r.b = t.select_rows(f.leaf(m.emb_b_table), idx);
    r.d_channels = {relation_matrix(p)};
  }
  return r;
}

Matrix flatten_rowmajor(const Matrix& m) {
  Matrix out(m.rows() * m.cols(), 1);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      out(i * m.cols() + j, 0) = m(i, j);
  return out;
}

/// One attention-side update: inputs (X: this side, Y: other side,
/// D channels oriented |X| x |Y|); returns updated X features.
int encoder_side(Forward& f, const EncoderSide& s, int X, int Y,
                 const std::vector<Matrix>& d_ch) {
  Tape& t = f.tape;
  const int nX = int(t.val(X).rows());
  const int nY = int(t.val(Y).rows());
  int s_inter = t.softmax_rows(
      t.matmul(t.matmul(X, f.leaf(s.W_inter)), t.transpose(X)));
  int s_intra =
      t.relu(t.matmul(t.matmul(X, f.leaf(s.W_intra)), t.transpose(Y)));
  int mixed = t.matmul(s_inter, s_intra);  // nX x nY
  int score = t.reshape_rowmajor(mixed, nX * nY, 1);
  for (const Matrix& d : d_ch)
    score = t.concat_cols(score, t.constant(flatten_rowmajor(d)));
  int dtil = t.reshape_rowmajor(apply_mlp(f, s.score_mlp, score), nX, nY);
  int atten = t.softmax_rows(dtil);
  int upd = t.matmul(t.matmul(atten, Y), f.leaf(s.W_v));
  int xhat = apply_bn(f, s.bn1, t.add(X, upd));
  return apply_bn(f, s.bn2, t.add(xhat, apply_mlp(f, s.ff, xhat)));
}

}  // namespace

EmbeddingNodes encode_problem(Forward& f, const Problem& p) {
  Tape& t = f.tape;
  RawInputs in = raw_inputs(f, p);
  auto [nA, nB] = solution_shape(p);

  int A = in.a, B = in.b;
  for (const auto& layer : f.model->enc) {
    std::vector<Matrix> d_t;
    d_t.reserve(in.d_channels.size());
    for (const Matrix& d : in.d_channels) d_t.push_back(d.transpose());
    int Anew = encoder_side(f, layer.a, A, B, in.d_channels);
    int Bnew = encoder_side(f, layer.b, B, A, d_t);
    A = Anew;
    B = Bnew;
  }
  (void)t;
  return EmbeddingNodes{A, B, nA, nB};
}

Matrix timestep_features(int t, int d) {
  Matrix f(1, d);
  for (int k = 0; k < d; ++k) {
    double freq = std::pow(10000.0, -2.0 * double(k / 2) / double(d));
    f(0, k) = (k % 2 == 0) ? std::sin(t * freq) : std::cos(t * freq);
  }
  return f;
}

int denoise(Forward& f, const EmbeddingNodes& emb, const SolutionMatrix& Xt,
            int t_step) {
  Tape& t = f.tape;
  const Model& m = *f.model;
  const int nA = emb.nA, nB = emb.nB, E = nA * nB;
  require(Xt.rows() == nA && Xt.cols() == nB, "denoise: Xt shape mismatch");
  require(t_step >= 1 && t_step <= m.cfg.T, "denoise: t out of range");

  std::vector<int> bit_idx(E);
  for (int i = 0; i < nA; ++i)
    for (int j = 0; j < nB; ++j) bit_idx[i * nB + j] = Xt(i, j);
  int Xe = t.select_rows(f.leaf(m.edge_table), bit_idx);
  int Ha = emb.a, Hb = emb.b;
  int tfeat = t.constant(timestep_features(t_step, m.cfg.d));

  for (const auto& L : m.dec) {
    int xhat = t.add(t.matmul(Xe, f.leaf(L.P)),
                     t.add(t.repeat_rows(t.matmul(Ha, f.leaf(L.Q)), nB),
                           t.tile_rows(t.matmul(Hb, f.leaf(L.R)), nA)));
    int tvec = apply_mlp(f, L.mlp_t, tfeat);
    int Xnew = t.add(Xe, t.add(apply_mlp(f, L.mlp_x, apply_bn(f, L.bn_x, xhat)),
                               t.broadcast_rows(tvec, E)));
    int gate = t.sigmoid(xhat);
    int msg_a = t.sum_row_blocks(
        t.cmul(gate, t.tile_rows(t.matmul(Hb, f.leaf(L.V_b)), nA)), nB);
    int Hanew = t.add(
        Ha, t.relu(apply_bn(f, L.bn_a,
                            t.add(t.matmul(Ha, f.leaf(L.U_a)), msg_a))));
    int msg_b = t.sum_rows_mod(
        t.cmul(gate, t.repeat_rows(t.matmul(Ha, f.leaf(L.V_a)), nB)), nB);
    int Hbnew = t.add(
        Hb, t.relu(apply_bn(f, L.bn_b,
                            t.add(t.matmul(Hb, f.leaf(L.U_b)), msg_b))));
    Xe = Xnew;
    Ha = Hanew;
    Hb = Hbnew;
  }
  return apply_linear(f, m.out, Xe);  // E x 2
}

Matrix denoise_logits(const Model& m, const Problem& p,
                      const SolutionMatrix& Xt, int t, bool training) {
  Forward f(m, training);
  EmbeddingNodes emb = encode_problem(f, p);
  int logits = denoise(f, emb, Xt, t);
  return f.tape.val(logits);
}

// ---- checkpoints ----

using nlohmann::json;

static json matrix_json(const Matrix& m) {
  json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  json data = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(i, c));
  j["data"] = std::move(data);
  return j;
}

static Matrix matrix_unjson(const json& j) {
  int r = j.at("rows").get<int>(), c = j.at("cols").get<int>();
  const auto& data = j.at("data");
  if (int(data.size()) != r * c)
    throw std::runtime_error("checkpoint: tensor size mismatch");
  Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int k = 0; k < c; ++k) m(i, k) = data[i * c + k].get<double>();
  return m;
}

void save_checkpoint(const Model& m, const std::string& path) {
  json j;
  j["version"] = 1;
  j["d"] = m.cfg.d;
  j["enc_layers"] = m.cfg.enc_layers;
  j["dec_layers"] = m.cfg.dec_layers;
  j["max_items"] = m.cfg.max_items;
  j["family"] = kind_name(m.cfg.family);
  j["T"] = m.cfg.T;
  j["qbar_mode"] =
      m.cfg.qbar_mode == PmspQbarMode::ExactMarginal ? "exact" : "paper";
  json tensors = json::object();
  for (size_t i = 0; i < m.params.values.size(); ++i)
    tensors[m.params.names[i]] = matrix_json(m.params.values[i]);
  j["tensors"] = std::move(tensors);
  json stats = json::array();
  for (const auto& s : m.stats) {
    json e;
    e["mean"] = matrix_json(s.mean);
    e["var"] = matrix_json(s.var);
    e["count"] = s.count;
    stats.push_back(std::move(e));
  }
  j["bn_stats"] = std::move(stats);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out << j.dump();
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  json j;
  in >> j;
  if (j.value("version", 0) != 1)
    throw std::runtime_error("checkpoint: unsupported version");
  ModelConfig cfg;
  cfg.d = j.at("d").get<int>();
  cfg.enc_layers = j.at("enc_layers").get<int>();
  cfg.dec_layers = j.at("dec_layers").get<int>();
  cfg.max_items = j.at("max_items").get<int>();
  cfg.T = j.at("T").get<int>();
  std::string fam = j.at("family").get<std::string>();
  cfg.family = fam == "atsp"   ? ProblemKind::Atsp
               : fam == "pmsp" ? ProblemKind::Pmsp
                               : ProblemKind::Nav;
  cfg.qbar_mode = j.value("qbar_mode", std::string("exact")) == "paper"
                      ? PmspQbarMode::PaperLiteral
                      : PmspQbarMode::ExactMarginal;
  Rng rng(0);
  Model m = init_model(cfg, rng);
  const auto& tensors = j.at("tensors");
  for (size_t i = 0; i < m.params.values.size(); ++i) {
    const std::string& name = m.params.names[i];
    if (!tensors.contains(name))
      throw std::runtime_error("checkpoint: missing tensor " + name);
    Matrix v = matrix_unjson(tensors.at(name));
    if (v.rows() != m.params.values[i].rows() ||
        v.cols() != m.params.values[i].cols())
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    m.params.values[i] = std::move(v);
  }
  const auto& stats = j.at("bn_stats");
  if (stats.size() != m.stats.size())
    throw std::runtime_error("checkpoint: BN stat count mismatch");
  for (size_t i = 0; i < m.stats.size(); ++i) {
    m.stats[i].mean = matrix_unjson(stats[i].at("mean"));
    m.stats[i].var = matrix_unjson(stats[i].at("var"));
    m.stats[i].count = stats[i].at("count").get<long>();
  }
  return m;
}

}  // namespace icdc
