#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <set>

#include "helpers.hpp"

using namespace icdc;
using namespace icdc_test;

TEST_CASE("generate_tmat_atsp basics") {
  AtspInstance a = generate_tmat_atsp(2, 3);
  CHECK(a.dist(0, 0) == 0.0);
  CHECK(a.dist(1, 1) == 0.0);
  CHECK(a.dist(0, 1) > 0.0);
  CHECK(a.dist(1, 0) > 0.0);
  CHECK(a.tmat);
  CHECK_THROWS_AS(generate_tmat_atsp(1, 0), std::invalid_argument);
}

TEST_CASE("tmat triangle inequality holds on every ordered triple") {
  AtspInstance a = generate_tmat_atsp(5, 7);
  for (int i = 0; i < 5; ++i)
    for (int k = 0; k < 5; ++k)
      for (int j = 0; j < 5; ++j) {
        if (i == j || i == k || k == j) continue;
        CHECK(a.dist(i, j) <= a.dist(i, k) + a.dist(k, j) + 1e-15);
      }
}

TEST_CASE("generators are deterministic per seed") {
  CHECK(generate_tmat_atsp(5, 7).dist == generate_tmat_atsp(5, 7).dist);
  CHECK(generate_pmsp(3, 2, 1).proc == generate_pmsp(3, 2, 1).proc);
  NavInstance v1 = generate_nav(3, 2), v2 = generate_nav(3, 2);
  CHECK(v1.coords == v2.coords);
  CHECK(v1.speed_recip == v2.speed_recip);
  CHECK(v1.traffic == v2.traffic);
}

TEST_CASE("generate_pmsp ranges and mean") {
  PmspInstance p = generate_pmsp(3, 2, 1);
  CHECK(p.proc.rows() == 3);
  CHECK(p.proc.cols() == 2);
  CHECK(p.proc.minCoeff() > 0.0);
  CHECK(p.proc.maxCoeff() <= 1.0);
  CHECK_THROWS_AS(generate_pmsp(0, 2, 1), std::invalid_argument);
  CHECK_THROWS_AS(generate_pmsp(2, 0, 1), std::invalid_argument);

  PmspInstance big = generate_pmsp(20, 4, 0);
  CHECK(big.proc.mean() == doctest::Approx(0.5).epsilon(0.1));
  CHECK(std::abs(big.proc.mean() - 0.5) < 0.05);
}

TEST_CASE("generate_nav shapes, ranges and self travel time") {
  NavInstance v = generate_nav(3, 2);
  CHECK(v.coords.rows() == 3);
  CHECK(v.coords.cols() == 2);
  CHECK(v.speed_recip.rows() == 3);
  CHECK(v.traffic.cols() == 3);
  for (const Matrix* m : {&v.coords, &v.speed_recip, &v.traffic}) {
    CHECK(m->minCoeff() >= 0.0);
    CHECK(m->maxCoeff() <= 1.0);
  }
  CHECK_THROWS_AS(generate_nav(1, 0), std::invalid_argument);

  NavInstance w = generate_nav(4, 9);
  Matrix T = nav_to_time_matrix(w);
  for (int i = 0; i < 4; ++i) CHECK(T(i, i) == w.traffic(i, i));
}

TEST_CASE("nav_to_time_matrix matches scalar recomputation") {
  // hand value
  NavInstance v;
  v.n = 2;
  v.coords = Matrix::Zero(2, 2);
  v.coords(1, 0) = 1.0;
  v.speed_recip = Matrix::Constant(2, 2, 2.0);
  v.traffic = Matrix::Constant(2, 2, 0.5);
  CHECK(nav_to_time_matrix(v)(0, 1) == doctest::Approx(2.5).epsilon(1e-15));

  // equal coords -> T = F
  NavInstance u = generate_nav(5, 11);
  u.coords.setConstant(0.3);
  CHECK((nav_to_time_matrix(u) - u.traffic).cwiseAbs().maxCoeff() == 0.0);

  // scalar-loop oracle, exact equality
  NavInstance r = generate_nav(6, 13);
  Matrix T = nav_to_time_matrix(r);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) {
      double dx = r.coords(i, 0) - r.coords(j, 0);
      double dy = r.coords(i, 1) - r.coords(j, 1);
      double want = (dx * dx + dy * dy) * r.speed_recip(i, j) + r.traffic(i, j);
      CHECK(T(i, j) == want);
    }
}

TEST_CASE("score hand examples") {
  PmspInstance p;
  p.num_jobs = 3;
  p.num_machines = 2;
  p.proc = Matrix(3, 2);
  p.proc << 1, 5, 2, 5, 3, 5;
  SolutionMatrix X(3, 2);
  X(0, 0) = X(1, 0) = X(2, 0) = 1;
  CHECK(score(Problem{p}, X) == doctest::Approx(-6.0).epsilon(1e-15));

  AtspInstance a;
  a.n = 3;
  a.dist = Matrix(3, 3);
  a.dist << 0, 1, 4, 2, 0, 1, 1, 3, 0;
  SolutionMatrix tour(3, 3);
  tour(0, 1) = tour(1, 2) = tour(2, 0) = 1;
  CHECK(score(Problem{a}, tour) == doctest::Approx(-3.0).epsilon(1e-15));
}

TEST_CASE("score equals edge-walk oracle on random tours") {
  AtspInstance a = generate_tmat_atsp(6, 21);
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    SolutionMatrix X = feasible_prior_sample(Problem{a}, rng);
    // walk the tour and add edges
    double len = 0.0;
    int cur = 0;
    for (int k = 0; k < 6; ++k) {
      int nxt = -1;
      for (int j = 0; j < 6; ++j)
        if (X(cur, j)) nxt = j;
      len += a.dist(cur, nxt);
      cur = nxt;
    }
    CHECK(score(Problem{a}, X) == doctest::Approx(-len).epsilon(1e-12));
  }
}

TEST_CASE("reward sentinel and comparisons") {
  AtspInstance a = generate_tmat_atsp(4, 2);
  SolutionMatrix X(4, 4);  // all zeros: a row of zeros is not a cycle
  Reward r = reward(Problem{a}, X);
  CHECK(!r.feasible);

  PmspInstance p = generate_pmsp(2, 2, 3);
  SolutionMatrix Y(2, 2);
  Y(0, 0) = Y(0, 1) = Y(1, 0) = 1;  // job 0 on two machines
  CHECK(!reward(Problem{p}, Y).feasible);

  SolutionMatrix Z(2, 2);
  Z(0, 0) = Z(1, 1) = 1;
  Reward rz = reward(Problem{p}, Z);
  CHECK(rz.feasible);
  CHECK(rz.score == score(Problem{p}, Z));
  CHECK(r < rz);  // infeasible below any finite score
  Reward terrible{true, -1e300};
  CHECK(r < terrible);
}

TEST_CASE("is_feasible ATSP examples") {
  AtspInstance a = generate_tmat_atsp(4, 2);
  SolutionMatrix shift(4, 4);
  for (int i = 0; i < 4; ++i) shift(i, (i + 1) % 4) = 1;
  CHECK(is_feasible(Problem{a}, shift));

  SolutionMatrix two_cycles(4, 4);
  two_cycles(0, 1) = two_cycles(1, 0) = 1;
  two_cycles(2, 3) = two_cycles(3, 2) = 1;
  CHECK(!is_feasible(Problem{a}, two_cycles));

  SolutionMatrix wrong(3, 3);
  CHECK_THROWS_AS(is_feasible(Problem{a}, wrong), std::invalid_argument);
}

TEST_CASE("PMSP feasibility: exhaustive 3x2 enumeration finds 8 of 64") {
  PmspInstance p = generate_pmsp(3, 2, 0);
  int feasible = 0;
  for (int bits = 0; bits < 64; ++bits) {
    SolutionMatrix X(3, 2);
    for (int e = 0; e < 6; ++e)
      X(e / 2, e % 2) = (bits >> e) & 1;
    if (is_feasible(Problem{p}, X)) ++feasible;
  }
  CHECK(feasible == 8);
}

TEST_CASE("ATSP feasibility agrees with cycle-enumeration oracle (n<=6)") {
  // all permutation matrices (row/col-sum-1 candidates) for n = 5
  const int n = 5;
  AtspInstance a = generate_tmat_atsp(n, 4);
  std::set<std::string> cycles;
  for (const auto& X : all_cycles(n)) {
    std::string key;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) key += char('0' + X(i, j));
    cycles.insert(key);
  }
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  int agree = 0, total = 0;
  do {
    SolutionMatrix X(n, n);
    for (int i = 0; i < n; ++i) X(i, perm[i]) = 1;
    std::string key;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) key += char('0' + X(i, j));
    bool oracle = cycles.count(key) > 0;
    if (is_feasible(Problem{a}, X) == oracle) ++agree;
    ++total;
  } while (std::next_permutation(perm.begin(), perm.end()));
  CHECK(total == 120);
  CHECK(agree == total);
}

TEST_CASE("feasible_prior_sample always feasible and uniform") {
  Rng rng(77);
  AtspInstance a = generate_tmat_atsp(4, 1);
  PmspInstance p = generate_pmsp(2, 2, 1);
  NavInstance v = generate_nav(5, 1);
  for (int i = 0; i < 2000; ++i) {
    CHECK(is_feasible(Problem{a}, feasible_prior_sample(Problem{a}, rng)));
    CHECK(is_feasible(Problem{p}, feasible_prior_sample(Problem{p}, rng)));
    CHECK(is_feasible(Problem{v}, feasible_prior_sample(Problem{v}, rng)));
  }

  // ATSP n=4: 6 cycles, chi-square at p > 0.01
  auto cycles = all_cycles(4);
  std::vector<long> counts(6, 0);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    SolutionMatrix X = feasible_prior_sample(Problem{a}, rng);
    for (size_t c = 0; c < cycles.size(); ++c)
      if (X == cycles[c]) ++counts[c];
  }
  CHECK(std::accumulate(counts.begin(), counts.end(), 0L) == draws);
  std::vector<double> expected(6, draws / 6.0);
  CHECK(chi_square(counts, expected) < chi2_crit_99(5));

  // PMSP 2x2: 4 assignments roughly uniform
  auto assigns = all_assignments(2, 2);
  std::vector<long> ac(4, 0);
  for (int i = 0; i < draws; ++i) {
    SolutionMatrix X = feasible_prior_sample(Problem{p}, rng);
    for (size_t c = 0; c < assigns.size(); ++c)
      if (X == assigns[c]) ++ac[c];
  }
  std::vector<double> aexp(4, draws / 4.0);
  CHECK(chi_square(ac, aexp) < chi2_crit_99(3));
}

TEST_CASE("qbar values") {
  AtspInstance a = generate_tmat_atsp(20, 0);
  auto q = qbar(Problem{a});
  CHECK(q[0] == doctest::Approx(0.95).epsilon(1e-12));
  CHECK(q[1] == doctest::Approx(0.05).epsilon(1e-12));

  PmspInstance p = generate_pmsp(20, 4, 0);
  auto qe = qbar(Problem{p}, PmspQbarMode::ExactMarginal);
  CHECK(qe[0] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(qe[1] == doctest::Approx(0.25).epsilon(1e-12));
  auto ql = qbar(Problem{p}, PmspQbarMode::PaperLiteral);
  CHECK(ql[0] == doctest::Approx(0.95).epsilon(1e-12));
  CHECK(ql[1] == doctest::Approx(0.05).epsilon(1e-12));

  NavInstance v = generate_nav(8, 0);
  auto qn = qbar(Problem{v});
  CHECK(qn[0] + qn[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(qn[1] == doctest::Approx(1.0 / 8).epsilon(1e-12));
}

TEST_CASE("serialization round trips are bit exact") {
  std::string path = "test_problems_roundtrip.jsonl";
  std::vector<Problem> ps{Problem{generate_tmat_atsp(10, 5)},
                          Problem{generate_pmsp(4, 3, 6)},
                          Problem{generate_nav(5, 7)}};
  save_problems(ps, path);
  auto back = load_problems(path);
  REQUIRE(back.size() == 3);
  CHECK(std::get<AtspInstance>(back[0]).dist ==
        std::get<AtspInstance>(ps[0]).dist);
  CHECK(std::get<PmspInstance>(back[1]).proc ==
        std::get<PmspInstance>(ps[1]).proc);
  const auto& v0 = std::get<NavInstance>(ps[2]);
  const auto& v1 = std::get<NavInstance>(back[2]);
  CHECK(v0.coords == v1.coords);
  CHECK(nav_to_time_matrix(v0) == nav_to_time_matrix(v1));
  std::remove(path.c_str());

  SolutionMatrix X(2, 3);
  X(0, 1) = X(1, 2) = 1;
  CHECK(solution_from_json(to_json(X)) == X);
}

TEST_CASE("malformed dataset files report the line") {
  std::string path = "test_problems_bad.jsonl";
  {
    std::ofstream out(path);
    out << to_json(Problem{generate_tmat_atsp(3, 1)}) << "\n";
    out << "{\"kind\":\"atsp\",\"seed\":0,\"dist\":[[0.0,1.0],[1.0]]}\n";
  }
  bool threw = false;
  try {
    load_problems(path);
  } catch (const std::exception& e) {
    threw = true;
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
  CHECK(threw);
  std::remove(path.c_str());
}
