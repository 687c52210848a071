#include "icdc/problems.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <sstream>

namespace icdc {

using nlohmann::json;

ProblemKind kind_of(const Problem& p) {
  if (std::holds_alternative<AtspInstance>(p)) return ProblemKind::Atsp;
  if (std::holds_alternative<PmspInstance>(p)) return ProblemKind::Pmsp;
  return ProblemKind::Nav;
}

const char* kind_name(ProblemKind k) {
  switch (k) {
    case ProblemKind::Atsp: return "atsp";
    case ProblemKind::Pmsp: return "pmsp";
    case ProblemKind::Nav: return "nav";
  }
  return "?";
}

std::pair<int, int> solution_shape(const Problem& p) {
  if (const auto* a = std::get_if<AtspInstance>(&p)) return {a->n, a->n};
  if (const auto* m = std::get_if<PmspInstance>(&p))
    return {m->num_jobs, m->num_machines};
  const auto& v = std::get<NavInstance>(p);
  return {v.n, v.n};
}

AtspInstance generate_tmat_atsp(int n, std::uint64_t seed) {
  require(n >= 2, "generate_tmat_atsp: n must be >= 2");
  Rng rng(seed);
  std::uniform_int_distribution<int> d(1, 1000000);
  Matrix dist(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) dist(i, j) = (i == j) ? 0.0 : double(d(rng));
  // Tighten to the triangle-inequality fixpoint. Integer entries keep the
  // fixpoint test exact.
  bool changed = true;
  while (changed) {
    changed = false;
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          if (i == j) continue;
          double via = dist(i, k) + dist(k, j);
          if (via < dist(i, j)) {
            dist(i, j) = via;
            changed = true;
          }
        }
  }
  dist /= 1e6;
  return AtspInstance{n, std::move(dist), true, seed};
}

PmspInstance generate_pmsp(int J, int M, std::uint64_t seed) {
  require(J >= 1 && M >= 1, "generate_pmsp: J and M must be >= 1");
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix proc(J, M);
  for (int j = 0; j < J; ++j)
    for (int m = 0; m < M; ++m) {
      // uniform on (0, 1]
      proc(j, m) = 1.0 - u(rng);
      if (proc(j, m) <= 0.0) proc(j, m) = 1.0;
    }
  return PmspInstance{J, M, std::move(proc), seed};
}

NavInstance generate_nav(int n, std::uint64_t seed) {
  require(n >= 2, "generate_nav: n must be >= 2");
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix coords(n, 2), sr(n, n), tr(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 2; ++j) coords(i, j) = u(rng);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) sr(i, j) = u(rng);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) tr(i, j) = u(rng);
  return NavInstance{n, std::move(coords), std::move(sr), std::move(tr), seed};
}

Matrix nav_to_time_matrix(const NavInstance& inst) {
  const int n = inst.n;
  Matrix t(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double dx = inst.coords(i, 0) - inst.coords(j, 0);
      double dy = inst.coords(i, 1) - inst.coords(j, 1);
      t(i, j) = (dx * dx + dy * dy) * inst.speed_recip(i, j) + inst.traffic(i, j);
    }
  return t;
}

Matrix relation_matrix(const Problem& p) {
  if (const auto* a = std::get_if<AtspInstance>(&p)) return a->dist;
  if (const auto* m = std::get_if<PmspInstance>(&p)) return m->proc;
  return nav_to_time_matrix(std::get<NavInstance>(p));
}

static bool is_hamiltonian_cycle(const SolutionMatrix& X, int n) {
  for (int i = 0; i < n; ++i) {
    int rs = 0, cs = 0;
    for (int j = 0; j < n; ++j) {
      rs += X(i, j);
      cs += X(j, i);
    }
    if (rs != 1 || cs != 1) return false;
  }
  // Follow successors from city 0; must return after exactly n steps.
  int cur = 0;
  for (int step = 0; step < n; ++step) {
    int nxt = -1;
    for (int j = 0; j < n; ++j)
      if (X(cur, j)) { nxt = j; break; }
    if (nxt < 0) return false;
    cur = nxt;
    if (cur == 0) return step == n - 1;
  }
  return false;
}

bool is_feasible(const Problem& p, const SolutionMatrix& X) {
  auto [r, c] = solution_shape(p);
  require(X.rows() == r && X.cols() == c, "is_feasible: shape mismatch");
  if (kind_of(p) == ProblemKind::Pmsp) {
    for (int j = 0; j < r; ++j) {
      int rs = 0;
      for (int m = 0; m < c; ++m) rs += X(j, m);
      if (rs != 1) return false;
    }
    return true;
  }
  return is_hamiltonian_cycle(X, r);
}

double score(const Problem& p, const SolutionMatrix& X) {
  Matrix d = relation_matrix(p);
  if (kind_of(p) == ProblemKind::Pmsp) {
    double makespan = 0.0;
    for (int m = 0; m < d.cols(); ++m) {
      double load = 0.0;
      for (int j = 0; j < d.rows(); ++j)
        if (X(j, m)) load += d(j, m);
      makespan = std::max(makespan, load);
    }
    return -makespan;
  }
  double total = 0.0;
  for (int i = 0; i < d.rows(); ++i)
    for (int j = 0; j < d.cols(); ++j)
      if (X(i, j)) total += d(i, j);
  return -total;
}

Reward reward(const Problem& p, const SolutionMatrix& X) {
  if (!is_feasible(p, X)) return Reward{false, 0.0};
  return Reward{true, score(p, X)};
}

SolutionMatrix feasible_prior_sample(const Problem& p, Rng& rng) {
  auto [r, c] = solution_shape(p);
  SolutionMatrix X(r, c);
  if (kind_of(p) == ProblemKind::Pmsp) {
    std::uniform_int_distribution<int> pick(0, c - 1);
    for (int j = 0; j < r; ++j) X(j, pick(rng)) = 1;
    return X;
  }
  // Random Hamiltonian cycle: city 0 followed by a permutation of 1..n-1.
  std::vector<int> order(r - 1);
  std::iota(order.begin(), order.end(), 1);
  std::shuffle(order.begin(), order.end(), rng);
  int cur = 0;
  for (int nxt : order) {
    X(cur, nxt) = 1;
    cur = nxt;
  }
  X(cur, 0) = 1;
  return X;
}

std::array<double, 2> qbar(const Problem& p, PmspQbarMode mode) {
  if (kind_of(p) == ProblemKind::Pmsp) {
    const auto& m = std::get<PmspInstance>(p);
    double denom = (mode == PmspQbarMode::ExactMarginal)
                       ? double(m.num_machines)
                       : double(m.num_jobs);
    return {1.0 - 1.0 / denom, 1.0 / denom};
  }
  auto [n, unused] = solution_shape(p);
  (void)unused;
  return {1.0 - 1.0 / double(n), 1.0 / double(n)};
}

// ---- serialization ----

static json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

static Matrix matrix_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw std::runtime_error(std::string("parse error: ") + what +
                             " is not a 2-d array");
  const size_t cols = j[0].size();
  Matrix m(j.size(), cols);
  for (size_t i = 0; i < j.size(); ++i) {
    if (j[i].size() != cols)
      throw std::runtime_error(std::string("parse error: ragged matrix in ") +
                               what);
    for (size_t c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
  }
  return m;
}

std::string to_json(const Problem& p) {
  json j;
  if (const auto* a = std::get_if<AtspInstance>(&p)) {
    j["kind"] = "atsp";
    j["seed"] = a->seed;
    j["n"] = a->n;
    j["tmat"] = a->tmat;
    j["dist"] = matrix_to_json(a->dist);
  } else if (const auto* m = std::get_if<PmspInstance>(&p)) {
    j["kind"] = "pmsp";
    j["seed"] = m->seed;
    j["num_jobs"] = m->num_jobs;
    j["num_machines"] = m->num_machines;
    j["proc"] = matrix_to_json(m->proc);
  } else {
    const auto& v = std::get<NavInstance>(p);
    j["kind"] = "nav";
    j["seed"] = v.seed;
    j["n"] = v.n;
    j["coords"] = matrix_to_json(v.coords);
    j["speed_recip"] = matrix_to_json(v.speed_recip);
    j["traffic"] = matrix_to_json(v.traffic);
  }
  return j.dump();
}

Problem problem_from_json(const std::string& line) {
  json j = json::parse(line);
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "atsp") {
    AtspInstance a;
    a.seed = j.value("seed", std::uint64_t(0));
    a.n = j.at("n").get<int>();
    a.tmat = j.value("tmat", false);
    a.dist = matrix_from_json(j.at("dist"), "dist");
    if (a.dist.rows() != a.n || a.dist.cols() != a.n)
      throw std::runtime_error("parse error: dist shape != n x n");
    return a;
  }
  if (kind == "pmsp") {
    PmspInstance m;
    m.seed = j.value("seed", std::uint64_t(0));
    m.num_jobs = j.at("num_jobs").get<int>();
    m.num_machines = j.at("num_machines").get<int>();
    m.proc = matrix_from_json(j.at("proc"), "proc");
    if (m.proc.rows() != m.num_jobs || m.proc.cols() != m.num_machines)
      throw std::runtime_error("parse error: proc shape != J x M");
    return m;
  }
  if (kind == "nav") {
    NavInstance v;
    v.seed = j.value("seed", std::uint64_t(0));
    v.n = j.at("n").get<int>();
    v.coords = matrix_from_json(j.at("coords"), "coords");
    v.speed_recip = matrix_from_json(j.at("speed_recip"), "speed_recip");
    v.traffic = matrix_from_json(j.at("traffic"), "traffic");
    if (v.coords.rows() != v.n || v.coords.cols() != 2 ||
        v.speed_recip.rows() != v.n || v.speed_recip.cols() != v.n ||
        v.traffic.rows() != v.n || v.traffic.cols() != v.n)
      throw std::runtime_error("parse error: nav matrix shape mismatch");
    return v;
  }
  throw std::runtime_error("parse error: unknown kind '" + kind + "'");
}

std::string to_json(const SolutionMatrix& X) {
  json j;
  j["rows"] = X.rows();
  j["cols"] = X.cols();
  json bits = json::array();
  for (int i = 0; i < X.rows(); ++i)
    for (int c = 0; c < X.cols(); ++c) bits.push_back(X(i, c));
  j["bits"] = std::move(bits);
  return j.dump();
}

SolutionMatrix solution_from_json(const std::string& line) {
  json j = json::parse(line);
  int r = j.at("rows").get<int>();
  int c = j.at("cols").get<int>();
  const auto& bits = j.at("bits");
  if (int(bits.size()) != r * c)
    throw std::runtime_error("parse error: bits length != rows*cols");
  SolutionMatrix X(r, c);
  for (int i = 0; i < r; ++i)
    for (int k = 0; k < c; ++k) {
      int b = bits[i * c + k].get<int>();
      if (b != 0 && b != 1) throw std::runtime_error("parse error: non-binary bit");
      X(i, k) = b;
    }
  return X;
}

void save_problems(const std::vector<Problem>& ps, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path);
  for (const auto& p : ps) out << to_json(p) << "\n";
}

std::vector<Problem> load_problems(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for read: " + path);
  std::vector<Problem> ps;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      ps.push_back(problem_from_json(line));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " +
                               e.what());
    }
  }
  return ps;
}

}  // namespace icdc
