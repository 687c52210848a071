#ifndef ICDC_TESTS_HELPERS_HPP
#define ICDC_TESTS_HELPERS_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "icdc/problems.hpp"

namespace icdc_test {

using icdc::Matrix;
using icdc::SolutionMatrix;

/// Chi-square statistic against expected counts.
inline double chi_square(const std::vector<long>& observed,
                         const std::vector<double>& expected) {
  double s = 0.0;
  for (size_t i = 0; i < observed.size(); ++i) {
    double d = observed[i] - expected[i];
    s += d * d / expected[i];
  }
  return s;
}

/// 0.99-quantile of the chi-square distribution (p > 0.01 acceptance) for
/// the small dfs the tests use.
inline double chi2_crit_99(int df) {
  static const double table[] = {0.0,    6.635,  9.210,  11.345, 13.277,
                                 15.086, 16.812, 18.475, 20.090, 21.666,
                                 23.209};
  return table[df];
}

/// All Hamiltonian cycles of n cities rooted at city 0, as solution
/// matrices; there are (n-1)! of them.
inline std::vector<SolutionMatrix> all_cycles(int n) {
  std::vector<int> rest(n - 1);
  std::iota(rest.begin(), rest.end(), 1);
  std::vector<SolutionMatrix> out;
  do {
    SolutionMatrix X(n, n);
    int prev = 0;
    for (int c : rest) {
      X(prev, c) = 1;
      prev = c;
    }
    X(prev, 0) = 1;
    out.push_back(X);
  } while (std::next_permutation(rest.begin(), rest.end()));
  return out;
}

/// All one-machine-per-job PMSP assignments (M^J of them).
inline std::vector<SolutionMatrix> all_assignments(int J, int M) {
  std::vector<SolutionMatrix> out;
  std::vector<int> a(J, 0);
  while (true) {
    SolutionMatrix X(J, M);
    for (int j = 0; j < J; ++j) X(j, a[j]) = 1;
    out.push_back(X);
    int j = 0;
    while (j < J && ++a[j] == M) a[j++] = 0;
    if (j == J) break;
  }
  return out;
}

inline double rel_err(double got, double want) {
  double den = std::max(std::abs(want), 1e-12);
  return std::abs(got - want) / den;
}

}  // namespace icdc_test

#endif
