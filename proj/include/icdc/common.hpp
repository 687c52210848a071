#ifndef ICDC_COMMON_HPP
#define ICDC_COMMON_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace icdc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

/// Binary |A|x|B| solution matrix X.
struct SolutionMatrix {
  Eigen::MatrixXi bits;

  SolutionMatrix() = default;
  SolutionMatrix(int rows, int cols) : bits(Eigen::MatrixXi::Zero(rows, cols)) {}

  int rows() const { return static_cast<int>(bits.rows()); }
  int cols() const { return static_cast<int>(bits.cols()); }
  int operator()(int i, int j) const { return bits(i, j); }
  int& operator()(int i, int j) { return bits(i, j); }

  bool operator==(const SolutionMatrix& o) const { return bits == o.bits; }
};

/// Reward of a solution. Infeasible solutions carry no finite score; the
/// flag stands in for the -inf sentinel and compares below any finite value.
struct Reward {
  bool feasible = false;
  double score = 0.0;  // meaningful only when feasible

  bool operator<(const Reward& o) const {
    if (feasible != o.feasible) return !feasible;
    return score < o.score;
  }
  bool operator>(const Reward& o) const { return o < *this; }
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace icdc

#endif
