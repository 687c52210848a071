#ifndef ICDC_TAPE_HPP
#define ICDC_TAPE_HPP

#include <functional>
#include <utility>
#include <vector>

#include "icdc/common.hpp"

namespace icdc::ad {

/// Reverse-mode autodiff over dense matrices. A Tape owns one forward
/// evaluation; backward() runs the recorded adjoints in reverse order.
/// Node handles are plain indices into the tape.
class Tape {
 public:
  using NodeId = int;

  NodeId constant(Matrix v);
  /// Leaf tied to an external parameter slot; collect_param_grads sums
  /// its adjoint into that slot.
  NodeId param(const Matrix& v, int param_slot);

  const Matrix& val(NodeId i) const { return nodes_[i].val; }
  const Matrix& grad(NodeId i) const { return nodes_[i].grad; }

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId cmul(NodeId a, NodeId b);
  NodeId cdiv(NodeId a, NodeId b);
  NodeId matmul(NodeId a, NodeId b);
  NodeId scale(NodeId a, double s);
  NodeId add_scalar(NodeId a, double s);
  NodeId relu(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId square(NodeId a);
  NodeId log(NodeId a);
  NodeId exp(NodeId a);
  NodeId softmax_rows(NodeId a);
  NodeId log_softmax_rows(NodeId a);
  NodeId transpose(NodeId a);
  NodeId sum(NodeId a);                    // -> 1x1
  NodeId row_sums(NodeId a);               // -> n x 1
  NodeId col_sums(NodeId a);               // -> 1 x m
  NodeId broadcast_rows(NodeId a, int n);  // 1 x m -> n x m
  NodeId broadcast_cols(NodeId a, int m);  // n x 1 -> n x m
  NodeId concat_cols(NodeId a, NodeId b);
  NodeId slice_cols(NodeId a, int c0, int len);
  NodeId reshape_rowmajor(NodeId a, int r, int c);
  NodeId select_rows(NodeId a, std::vector<int> idx);
  NodeId gather_entries(NodeId a, std::vector<std::pair<int, int>> idx);
  NodeId repeat_rows(NodeId a, int times);  // row i -> rows i*times..i*times+times-1
  NodeId tile_rows(NodeId a, int times);    // stack whole matrix `times` times
  NodeId sum_row_blocks(NodeId a, int block);  // (n*block) x d -> n x d
  NodeId sum_rows_mod(NodeId a, int mod);      // out(j) = sum_i in(i*mod + j)

  /// Column-wise batch norm using the batch (row) statistics; biased
  /// variance. If save_mean/save_var are given, the batch statistics are
  /// written there for running-average capture.
  NodeId batchnorm_train(NodeId x, NodeId gamma, NodeId beta,
                         Matrix* save_mean = nullptr,
                         Matrix* save_var = nullptr);
  /// Column-wise batch norm with fixed (running) statistics.
  NodeId batchnorm_infer(NodeId x, NodeId gamma, NodeId beta,
                         const Matrix& mean, const Matrix& var);

  /// Seed d(loss)/d(loss) = seed and propagate. `loss` must be 1x1.
  void backward(NodeId loss, double seed = 1.0);

  /// Add each param leaf's adjoint into grads[param_slot].
  void collect_param_grads(std::vector<Matrix>& grads) const;

  void clear();
  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix val;
    Matrix grad;
    std::function<void()> back;  // empty for leaves
    int param_slot = -1;
  };
  std::vector<Node> nodes_;

  NodeId push(Matrix v, std::function<void()> back = {});
  Matrix& g(NodeId i) { return nodes_[i].grad; }
};

constexpr double kBnEps = 1e-5;

}  // namespace icdc::ad

#endif
