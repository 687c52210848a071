// Command-line front end: generate / train / eval / sweep-generalize / report.

#include <CLI11.hpp>
#include <iostream>

#include "icdc/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"IC/DC: self-supervised diffusion solver for matrix-form "
               "combinatorial optimization"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  int workers = 0;
  int stride = 1;
  int samples = 1;
  std::string out;

  // generate
  auto* gen = app.add_subcommand("generate", "Write a JSON-lines dataset");
  std::string g_kind = "atsp";
  std::vector<int> g_sizes{8};
  int g_count = 100;
  gen->add_option("--kind", g_kind, "atsp | pmsp | nav");
  gen->add_option("--size", g_sizes,
                  "instance size: n (atsp/nav) or J M (pmsp)");
  gen->add_option("--count", g_count, "number of instances");
  gen->add_option("--seed", seed, "base RNG seed");
  gen->add_option("--out", out, "output path")->required();

  // train
  auto* tr = app.add_subcommand("train", "Run training from a config file");
  std::string t_config;
  std::int64_t t_seed = -1;
  tr->add_option("--config", t_config, "JSON config path")->required();
  tr->add_option("--out", out, "run directory")->required();
  tr->add_option("--seed", t_seed, "override config seed");
  tr->add_option("--workers", workers, "worker threads (1 = serial)");

  // eval
  auto* ev = app.add_subcommand("eval", "Best-of-n evaluation over a dataset");
  std::string e_ckpt, e_data;
  std::vector<std::string> e_methods;
  ev->add_option("--checkpoint", e_ckpt, "model checkpoint (JSON)");
  ev->add_option("--dataset", e_data, "JSON-lines dataset")->required();
  ev->add_option("--methods", e_methods,
                 "model sjf ga pso nn ni fi held_karp pmsp_exact");
  ev->add_option("--samples", samples, "samples per instance (model)");
  ev->add_option("--stride", stride, "reverse-step stride");
  ev->add_option("--seed", seed, "RNG seed");
  ev->add_option("--workers", workers, "worker threads (1 = serial)");
  ev->add_option("--out", out, "run directory")->required();

  // sweep-generalize
  auto* sw = app.add_subcommand("sweep-generalize",
                                "Evaluate one checkpoint across sizes");
  std::string s_ckpt, s_kind = "atsp";
  std::vector<int> s_sizes;
  int s_count = 20;
  sw->add_option("--checkpoint", s_ckpt, "model checkpoint")->required();
  sw->add_option("--kind", s_kind, "atsp | pmsp | nav");
  sw->add_option("--sizes", s_sizes, "instance sizes")->required();
  sw->add_option("--count", s_count, "instances per size");
  sw->add_option("--samples", samples, "samples per instance");
  sw->add_option("--stride", stride, "reverse-step stride");
  sw->add_option("--seed", seed, "RNG seed");
  sw->add_option("--workers", workers, "worker threads (1 = serial)");
  sw->add_option("--out", out, "run directory")->required();

  // report
  auto* rp = app.add_subcommand("report", "Render CSVs to markdown + SVG");
  std::vector<std::string> r_csvs;
  rp->add_option("--csv", r_csvs, "input CSV files")->required();
  rp->add_option("--out", out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      icdc::cmd_generate(g_kind, g_sizes, g_count, seed, out);
      std::cout << "wrote " << g_count << " instances to " << out << "\n";
    } else if (*tr) {
      icdc::cmd_train(t_config, out, workers, t_seed);
      std::cout << "training complete; outputs in " << out << "\n";
    } else if (*ev) {
      icdc::EvalOptions opts;
      opts.n_samples = samples;
      opts.stride = stride;
      opts.seed = seed;
      opts.workers = workers;
      opts.methods = e_methods;
      icdc::EvalReport rep = icdc::cmd_eval(e_ckpt, e_data, opts, out);
      std::cout << rep.to_markdown();
    } else if (*sw) {
      icdc::EvalOptions opts;
      opts.n_samples = samples;
      opts.stride = stride;
      opts.seed = seed;
      opts.workers = workers;
      icdc::EvalReport rep =
          icdc::cmd_sweep_generalize(s_ckpt, s_kind, s_sizes, s_count, opts,
                                     out);
      std::cout << rep.to_markdown();
    } else if (*rp) {
      icdc::cmd_report(r_csvs, out);
      std::cout << "report written to " << out << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
