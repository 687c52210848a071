#include "icdc/tape.hpp"

#include <cmath>

namespace icdc::ad {

Tape::NodeId Tape::push(Matrix v, std::function<void()> back) {
  Node n;
  n.grad = Matrix::Zero(v.rows(), v.cols());
  n.val = std::move(v);
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return int(nodes_.size()) - 1;
}

Tape::NodeId Tape::constant(Matrix v) { return push(std::move(v)); }

Tape::NodeId Tape::param(const Matrix& v, int param_slot) {
  NodeId id = push(v);
  nodes_[id].param_slot = param_slot;
  return id;
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  NodeId out = push(nodes_[a].val + nodes_[b].val);
  nodes_[out].back = [this, a, b, out] {
    g(a) += g(out);
    g(b) += g(out);
  };
  return out;
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
  NodeId out = push(nodes_[a].val - nodes_[b].val);
  nodes_[out].back = [this, a, b, out] {
    g(a) += g(out);
    g(b) -= g(out);
  };
  return out;
}

Tape::NodeId Tape::cmul(NodeId a, NodeId b) {
  NodeId out = push(nodes_[a].val.cwiseProduct(nodes_[b].val));
  nodes_[out].back = [this, a, b, out] {
    g(a) += g(out).cwiseProduct(nodes_[b].val);
    g(b) += g(out).cwiseProduct(nodes_[a].val);
  };
  return out;
}

Tape::NodeId Tape::cdiv(NodeId a, NodeId b) {
  NodeId out = push(nodes_[a].val.cwiseQuotient(nodes_[b].val));
  nodes_[out].back = [this, a, b, out] {
    g(a) += g(out).cwiseQuotient(nodes_[b].val);
    g(b) -= g(out)
                .cwiseProduct(nodes_[out].val)
                .cwiseQuotient(nodes_[b].val);
  };
  return out;
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
  NodeId out = push(nodes_[a].val * nodes_[b].val);
  nodes_[out].back = [this, a, b, out] {
    g(a) += g(out) * nodes_[b].val.transpose();
    g(b) += nodes_[a].val.transpose() * g(out);
  };
  return out;
}

Tape::NodeId Tape::scale(NodeId a, double s) {
  NodeId out = push(nodes_[a].val * s);
  nodes_[out].back = [this, a, out, s] { g(a) += g(out) * s; };
  return out;
}

Tape::NodeId Tape::add_scalar(NodeId a, double s) {
  NodeId out = push(nodes_[a].val.array() + s);
  nodes_[out].back = [this, a, out] { g(a) += g(out); };
  return out;
}

Tape::NodeId Tape::relu(NodeId a) {
  NodeId out = push(nodes_[a].val.cwiseMax(0.0));
  nodes_[out].back = [this, a, out] {
    g(a) += g(out).cwiseProduct(
        (nodes_[a].val.array() > 0.0).cast<double>().matrix());
  };
  return out;
}

Tape::NodeId Tape::sigmoid(NodeId a) {
  Matrix y = (1.0 / (1.0 + (-nodes_[a].val.array()).exp())).matrix();
  NodeId out = push(std::move(y));
  nodes_[out].back = [this, a, out] {
    const auto& y = nodes_[out].val.array();
    g(a) += (g(out).array() * y * (1.0 - y)).matrix();
  };
  return out;
}

Tape::NodeId Tape::square(NodeId a) {
  NodeId out = push(nodes_[a].val.cwiseProduct(nodes_[a].val));
  nodes_[out].back = [this, a, out] {
    g(a) += 2.0 * g(out).cwiseProduct(nodes_[a].val);
  };
  return out;
}

Tape::NodeId Tape::log(NodeId a) {
  NodeId out = push(nodes_[a].val.array().max(1e-300).log().matrix());
  nodes_[out].back = [this, a, out] {
    g(a) += g(out).cwiseQuotient(nodes_[a].val.cwiseMax(1e-300));
  };
  return out;
}

Tape::NodeId Tape::exp(NodeId a) {
  NodeId out = push(nodes_[a].val.array().exp().matrix());
  nodes_[out].back = [this, a, out] {
    g(a) += g(out).cwiseProduct(nodes_[out].val);
  };
  return out;
}

Tape::NodeId Tape::softmax_rows(NodeId a) {
  const Matrix& x = nodes_[a].val;
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double m = x.row(i).maxCoeff();
    Eigen::RowVectorXd e = (x.row(i).array() - m).exp();
    y.row(i) = e / e.sum();
  }
  NodeId out = push(std::move(y));
  nodes_[out].back = [this, a, out] {
    const Matrix& y = nodes_[out].val;
    const Matrix& go = g(out);
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      double dot = go.row(i).dot(y.row(i));
      g(a).row(i) += (y.row(i).array() * (go.row(i).array() - dot)).matrix();
    }
  };
  return out;
}

Tape::NodeId Tape::log_softmax_rows(NodeId a) {
  const Matrix& x = nodes_[a].val;
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double m = x.row(i).maxCoeff();
    double lse = std::log((x.row(i).array() - m).exp().sum()) + m;
    y.row(i) = x.row(i).array() - lse;
  }
  NodeId out = push(std::move(y));
  nodes_[out].back = [this, a, out] {
    const Matrix& y = nodes_[out].val;
    const Matrix& go = g(out);
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      double rs = go.row(i).sum();
      g(a).row(i) += go.row(i) - rs * y.row(i).array().exp().matrix();
    }
  };
  return out;
}

Tape::NodeId Tape::transpose(NodeId a) {
  NodeId out = push(nodes_[a].val.transpose());
  nodes_[out].back = [this, a, out] { g(a) += g(out).transpose(); };
  return out;
}

Tape::NodeId Tape::sum(NodeId a) {
  Matrix s(1, 1);
  s(0, 0) = nodes_[a].val.sum();
  NodeId out = push(std::move(s));
  nodes_[out].back = [this, a, out] {
    g(a).array() += g(out)(0, 0);
  };
  return out;
}

Tape::NodeId Tape::row_sums(NodeId a) {
  NodeId out = push(nodes_[a].val.rowwise().sum());
  nodes_[out].back = [this, a, out] {
    g(a) += g(out) * Eigen::RowVectorXd::Ones(nodes_[a].val.cols());
  };
  return out;
}

Tape::NodeId Tape::col_sums(NodeId a) {
  NodeId out = push(Matrix(nodes_[a].val.colwise().sum()));
  nodes_[out].back = [this, a, out] {
    g(a) += Vector::Ones(nodes_[a].val.rows()) * g(out);
  };
  return out;
}

Tape::NodeId Tape::broadcast_rows(NodeId a, int n) {
  require(nodes_[a].val.rows() == 1, "broadcast_rows: expects 1 x m input");
  NodeId out = push(nodes_[a].val.replicate(n, 1));
  nodes_[out].back = [this, a, out] {
    g(a) += g(out).colwise().sum();
  };
  return out;
}

Tape::NodeId Tape::broadcast_cols(NodeId a, int m) {
  require(nodes_[a].val.cols() == 1, "broadcast_cols: expects n x 1 input");
  NodeId out = push(nodes_[a].val.replicate(1, m));
  nodes_[out].back = [this, a, out] {
    g(a) += g(out).rowwise().sum();
  };
  return out;
}

Tape::NodeId Tape::concat_cols(NodeId a, NodeId b) {
  const Matrix& A = nodes_[a].val;
  const Matrix& B = nodes_[b].val;
  require(A.rows() == B.rows(), "concat_cols: row mismatch");
  Matrix y(A.rows(), A.cols() + B.cols());
  y << A, B;
  NodeId out = push(std::move(y));
  const int ca = int(A.cols());
  nodes_[out].back = [this, a, b, out, ca] {
    g(a) += g(out).leftCols(ca);
    g(b) += g(out).rightCols(g(out).cols() - ca);
  };
  return out;
}

Tape::NodeId Tape::slice_cols(NodeId a, int c0, int len) {
  NodeId out = push(nodes_[a].val.middleCols(c0, len));
  nodes_[out].back = [this, a, out, c0, len] {
    g(a).middleCols(c0, len) += g(out);
  };
  return out;
}

Tape::NodeId Tape::reshape_rowmajor(NodeId a, int r, int c) {
  const Matrix& x = nodes_[a].val;
  require(int(x.size()) == r * c, "reshape_rowmajor: size mismatch");
  const int oc = int(x.cols());
  Matrix y(r, c);
  for (int k = 0; k < r * c; ++k) y(k / c, k % c) = x(k / oc, k % oc);
  NodeId out = push(std::move(y));
  nodes_[out].back = [this, a, out, c, oc] {
    const Matrix& go = g(out);
    for (int k = 0; k < int(go.size()); ++k)
      g(a)(k / oc, k % oc) += go(k / c, k % c);
  };
  return out;
}

Tape::NodeId Tape::select_rows(NodeId a, std::vector<int> idx) {
  const Matrix& x = nodes_[a].val;
  Matrix y(idx.size(), x.cols());
  for (size_t i = 0; i < idx.size(); ++i) y.row(i) = x.row(idx[i]);
  NodeId out = push(std::move(y));
  nodes_[out].back = [this, a, out, idx = std::move(idx)] {
    for (size_t i = 0; i < idx.size(); ++i)
      g(a).row(idx[i]) += g(out).row(i);
  };
  return out;
}

Tape::NodeId Tape::gather_entries(NodeId a,
                                  std::vector<std::pair<int, int>> idx) {
  Matrix y(idx.size(), 1);
  for (size_t i = 0; i < idx.size(); ++i)
    y(i, 0) = nodes_[a].val(idx[i].first, idx[i].second);
  NodeId out = push(std::move(y));
  nodes_[out].back = [this, a, out, idx = std::move(idx)] {
    for (size_t i = 0; i < idx.size(); ++i)
      g(a)(idx[i].first, idx[i].second) += g(out)(i, 0);
  };
  return out;
}

Tape::NodeId Tape::repeat_rows(NodeId a, int times) {
  const Matrix& x = nodes_[a].val;
  Matrix y(x.rows() * times, x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (int k = 0; k < times; ++k) y.row(i * times + k) = x.row(i);
  NodeId out = push(std::move(y));
  nodes_[out].back = [this, a, out, times] {
    const Matrix& go = g(out);
    for (Eigen::Index i = 0; i < nodes_[a].val.rows(); ++i)
      for (int k = 0; k < times; ++k) g(a).row(i) += go.row(i * times + k);
  };
  return out;
}

Tape::NodeId Tape::tile_rows(NodeId a, int times) {
  NodeId out = push(nodes_[a].val.replicate(times, 1));
  nodes_[out].back = [this, a, out, times] {
    const Matrix& go = g(out);
    const Eigen::Index r = nodes_[a].val.rows();
    for (int k = 0; k < times; ++k) g(a) += go.middleRows(k * r, r);
  };
  return out;
}

Tape::NodeId Tape::sum_row_blocks(NodeId a, int block) {
  const Matrix& x = nodes_[a].val;
  require(x.rows() % block == 0, "sum_row_blocks: rows not divisible");
  const Eigen::Index n = x.rows() / block;
  Matrix y = Matrix::Zero(n, x.cols());
  for (Eigen::Index i = 0; i < n; ++i)
    for (int k = 0; k < block; ++k) y.row(i) += x.row(i * block + k);
  NodeId out = push(std::move(y));
  nodes_[out].back = [this, a, out, block] {
    const Matrix& go = g(out);
    for (Eigen::Index i = 0; i < go.rows(); ++i)
      for (int k = 0; k < block; ++k) g(a).row(i * block + k) += go.row(i);
  };
  return out;
}

Tape::NodeId Tape::sum_rows_mod(NodeId a, int mod) {
  const Matrix& x = nodes_[a].val;
  require(x.rows() % mod == 0, "sum_rows_mod: rows not divisible");
  const Eigen::Index n = x.rows() / mod;
  Matrix y = Matrix::Zero(mod, x.cols());
  for (Eigen::Index i = 0; i < n; ++i)
    for (int j = 0; j < mod; ++j) y.row(j) += x.row(i * mod + j);
  NodeId out = push(std::move(y));
  nodes_[out].back = [this, a, out, mod] {
    const Matrix& go = g(out);
    const Eigen::Index n = nodes_[a].val.rows() / mod;
    for (Eigen::Index i = 0; i < n; ++i)
      for (int j = 0; j < mod; ++j) g(a).row(i * mod + j) += go.row(j);
  };
  return out;
}

Tape::NodeId Tape::batchnorm_train(NodeId x, NodeId gamma, NodeId beta,
                                   Matrix* save_mean, Matrix* save_var) {
  const Matrix& X = nodes_[x].val;
  const double n = double(X.rows());
  Eigen::RowVectorXd mu = X.colwise().mean();
  Eigen::RowVectorXd var =
      ((X.rowwise() - mu).array().square().colwise().sum() / n).matrix();
  Eigen::RowVectorXd istd = (var.array() + kBnEps).rsqrt().matrix();
  Matrix xhat = (X.rowwise() - mu).array().rowwise() * istd.array();
  Matrix y = (xhat.array().rowwise() * nodes_[gamma].val.row(0).array())
                 .rowwise() +
             nodes_[beta].val.row(0).array();
  if (save_mean) *save_mean = mu;
  if (save_var) *save_var = var;
  NodeId out = push(std::move(y));
  // keep xhat and istd for the backward pass
  nodes_[out].back = [this, x, gamma, beta, out, xhat = std::move(xhat),
                      istd = std::move(istd)] {
    const Matrix& go = g(out);
    const double n = double(go.rows());
    Eigen::RowVectorXd dgamma = (go.array() * xhat.array()).colwise().sum();
    Eigen::RowVectorXd dbeta = go.colwise().sum();
    g(gamma).row(0) += dgamma;
    g(beta).row(0) += dbeta;
    // dL/dx = gamma*istd * (go - mean(go) - xhat * mean(go .* xhat))
    Eigen::RowVectorXd mgo = go.colwise().mean();
    Eigen::RowVectorXd mgx = (go.array() * xhat.array()).colwise().sum() / n;
    Matrix dx = go;
    dx.array().rowwise() -= mgo.array();
    dx.array() -= xhat.array().rowwise() * mgx.array();
    dx.array().rowwise() *=
        (nodes_[gamma].val.row(0).array() * istd.array());
    g(x) += dx;
  };
  return out;
}

Tape::NodeId Tape::batchnorm_infer(NodeId x, NodeId gamma, NodeId beta,
                                   const Matrix& mean, const Matrix& var) {
  const Matrix& X = nodes_[x].val;
  Eigen::RowVectorXd istd = (var.row(0).array() + kBnEps).rsqrt().matrix();
  Matrix xhat = (X.rowwise() - mean.row(0)).array().rowwise() * istd.array();
  Matrix y = (xhat.array().rowwise() * nodes_[gamma].val.row(0).array())
                 .rowwise() +
             nodes_[beta].val.row(0).array();
  NodeId out = push(std::move(y));
  nodes_[out].back = [this, x, gamma, beta, out, xhat = std::move(xhat),
                      istd = std::move(istd)] {
    const Matrix& go = g(out);
    g(gamma).row(0) += (go.array() * xhat.array()).colwise().sum().matrix();
    g(beta).row(0) += go.colwise().sum();
    Matrix dx = go.array().rowwise() *
                (nodes_[gamma].val.row(0).array() * istd.array());
    g(x) += dx;
  };
  return out;
}

void Tape::backward(NodeId loss, double seed) {
  require(nodes_[loss].val.size() == 1, "backward: loss must be scalar");
  nodes_[loss].grad(0, 0) += seed;
  for (int i = loss; i >= 0; --i)
    if (nodes_[i].back) nodes_[i].back();
}

void Tape::collect_param_grads(std::vector<Matrix>& grads) const {
  for (const auto& n : nodes_) {
    if (n.param_slot < 0) continue;
    if (grads[n.param_slot].size() == 0)
      grads[n.param_slot] = Matrix::Zero(n.val.rows(), n.val.cols());
    grads[n.param_slot] += n.grad;
  }
}

void Tape::clear() { nodes_.clear(); }

}  // namespace icdc::ad
