// Compares the serial reference path (workers=1) against the OpenMP path
// on the batched kernels: generation rollouts and cloning steps.

#include <chrono>
#include <functional>
#include <iostream>

#include "icdc/baselines.hpp"
#include "icdc/harness.hpp"
#include "icdc/parallel.hpp"

using namespace icdc;

namespace {

double time_s(const std::function<void()>& fn) {
  auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

double bench_rollouts(const Model& model, const std::vector<Problem>& ps,
                      int workers, std::vector<double>* out) {
  GenOptions gopt;
  const int n = int(ps.size());
  std::vector<std::uint64_t> seeds(n);
  Rng master(7);
  for (auto& s : seeds) s = master();
  out->assign(n, 0.0);
  return time_s([&] {
    parallel_for(n, workers, [&](int i) {
      NoiseSchedule sched = build_schedule(model.cfg.T, qbar(ps[i]));
      Rng rng(seeds[i]);
      Generation g = full_reverse_generate(ps[i], model, sched, rng, gopt);
      (*out)[i] = score(ps[i], g.result.solution);
    });
  });
}

}  // namespace

int main(int argc, char** argv) {
  int n_instances = argc > 1 ? std::atoi(argv[1]) : 64;
  int size = argc > 2 ? std::atoi(argv[2]) : 10;

  std::vector<Problem> ps;
  for (int i = 0; i < n_instances; ++i)
    ps.emplace_back(generate_tmat_atsp(size, 100 + i));

  ModelConfig mcfg;
  Rng rng(1);
  Model model = init_model(mcfg, rng);

  std::vector<double> serial_scores, omp_scores;
  double t_serial = bench_rollouts(model, ps, 1, &serial_scores);
  double t_omp = bench_rollouts(model, ps, 0, &omp_scores);

  bool match = serial_scores == omp_scores;
  std::cout << "rollouts: " << n_instances << " x ATSP-" << size << "\n"
            << "  serial reference : " << t_serial << " s\n"
            << "  OpenMP           : " << t_omp << " s\n"
            << "  speedup          : " << t_serial / t_omp << "x\n"
            << "  results identical: " << (match ? "yes" : "NO") << "\n";
  return match ? 0 : 1;
}
