#include "icdc/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <set>
#include <sstream>

#include "icdc/baselines.hpp"
#include "icdc/parallel.hpp"

namespace icdc {

using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

double now_s() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << text;
}

ProblemKind kind_from_string(const std::string& s) {
  if (s == "atsp") return ProblemKind::Atsp;
  if (s == "pmsp") return ProblemKind::Pmsp;
  if (s == "nav") return ProblemKind::Nav;
  throw std::invalid_argument("unknown problem kind: " + s);
}

std::vector<Problem> generate_many(const std::string& kind,
                                   const std::vector<int>& sizes, int count,
                                   std::uint64_t seed) {
  ProblemKind k = kind_from_string(kind);
  std::vector<Problem> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    std::uint64_t s = seed + std::uint64_t(i);
    if (k == ProblemKind::Atsp) {
      require(sizes.size() == 1 && sizes[0] >= 2, "atsp needs one size >= 2");
      out.emplace_back(generate_tmat_atsp(sizes[0], s));
    } else if (k == ProblemKind::Pmsp) {
      require(sizes.size() == 2 && sizes[0] >= 1 && sizes[1] >= 1,
              "pmsp needs sizes J M");
      out.emplace_back(generate_pmsp(sizes[0], sizes[1], s));
    } else {
      require(sizes.size() == 1 && sizes[0] >= 2, "nav needs one size >= 2");
      out.emplace_back(generate_nav(sizes[0], s));
    }
  }
  return out;
}

/// Exact minimum objective, or NaN when the instance is out of oracle reach.
double exact_objective(const Problem& p) {
  try {
    if (kind_of(p) == ProblemKind::Pmsp)
      return pmsp_exact(std::get<PmspInstance>(p)).second;
    return held_karp_on_matrix(relation_matrix(p)).second;
  } catch (const std::invalid_argument&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

struct MethodResult {
  std::vector<double> objective;  // per instance; NaN on failure
  double wallclock = 0.0;
  std::string error;  // first per-instance failure, if any
};

MethodResult run_baseline(const std::string& method,
                          const std::vector<Problem>& ps,
                          const EvalOptions& opts) {
  const int n = int(ps.size());
  MethodResult r;
  r.objective.assign(n, 0.0);
  std::vector<double> secs(n, 0.0);
  std::vector<std::string> errs(n);
  std::vector<std::uint64_t> seeds(n);
  for (int i = 0; i < n; ++i) seeds[i] = opts.seed * 1000003ull + i;

  parallel_for(n, opts.workers, [&](int i) {
    double t0 = now_s();
    const Problem& p = ps[i];
    double obj = std::numeric_limits<double>::quiet_NaN();
    try {
    if (method == "held_karp" || method == "pmsp_exact" ||
        method == "exact") {
      obj = exact_objective(p);
      if (!std::isfinite(obj))
        throw std::invalid_argument("exact oracle: unsupported instance size");
    } else if (method == "sjf") {
      obj = -score(p, sjf(std::get<PmspInstance>(p)));
    } else if (method == "ga") {
      Rng rng(seeds[i]);
      obj = -score(p, genetic_algorithm(std::get<PmspInstance>(p), GaConfig{},
                                        rng));
    } else if (method == "pso") {
      Rng rng(seeds[i]);
      obj = -score(p, particle_swarm(std::get<PmspInstance>(p), PsoConfig{},
                                     rng));
    } else {
      AtspInstance a;
      if (auto* ap = std::get_if<AtspInstance>(&p)) {
        a = *ap;
      } else if (auto* np = std::get_if<NavInstance>(&p)) {
        a.n = np->n;
        a.dist = nav_to_time_matrix(*np);
      } else {
        throw std::invalid_argument("method " + method +
                                    " needs a routing instance");
      }
      SolutionMatrix X;
      if (method == "nn")
        X = nearest_neighbor(a);
      else if (method == "ni")
        X = nearest_insertion(a);
      else if (method == "fi")
        X = furthest_insertion(a);
      else
        throw std::invalid_argument("unknown method: " + method);
      obj = -score(p, X);
    }
    } catch (const std::exception& e) {
      errs[i] = e.what();
    }
    r.objective[i] = obj;
    secs[i] = now_s() - t0;
  });
  for (double s : secs) r.wallclock += s;
  for (const auto& e : errs)
    if (!e.empty()) {
      r.error = e;
      break;
    }
  return r;
}

MethodResult run_model(const Model& model, const std::vector<Problem>& ps,
                       const EvalOptions& opts) {
  const int n = int(ps.size());
  MethodResult r;
  r.objective.assign(n, 0.0);
  std::vector<double> secs(n, 0.0);
  std::vector<std::uint64_t> seeds(size_t(n) * opts.n_samples);
  {
    Rng master(opts.seed);
    for (auto& s : seeds) s = master();
  }
  GenOptions gopt;
  gopt.stride = opts.stride;
  gopt.mode = DecodeMode::Sample;
  // normalize with the instance's own batch statistics; the running
  // averages mix statistics across training instances and degrade
  // generation quality noticeably
  gopt.training = true;

  parallel_for(n, opts.workers, [&](int i) {
    double t0 = now_s();
    const Problem& p = ps[i];
    NoiseSchedule sched = build_schedule(model.cfg.T, qbar(p, model.cfg.qbar_mode));
    double best = std::numeric_limits<double>::infinity();
    for (int s = 0; s < opts.n_samples; ++s) {
      Rng rng(seeds[size_t(i) * opts.n_samples + s]);
      Generation g = full_reverse_generate(p, model, sched, rng, gopt);
      best = std::min(best, -score(p, g.result.solution));
    }
    r.objective[i] = best;
    secs[i] = now_s() - t0;
  });
  for (double s : secs) r.wallclock += s;
  return r;
}

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(prec);
  os << v;
  return os.str();
}

}  // namespace

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os << "method,mean_objective,gap_pct,gap_ref,wallclock,samples\n";
  for (const auto& r : rows)
    os << r.method << "," << fmt(r.mean_objective, 6) << ","
       << fmt(r.gap_pct, 4) << ","
       << (r.gap_vs_exact ? "exact" : "best_of_report") << ","
       << fmt(r.wallclock, 4) << "," << r.samples << "\n";
  return os.str();
}

std::string EvalReport::to_markdown() const {
  auto sorted = rows;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const EvalRow& a, const EvalRow& b) {
                     return a.gap_pct < b.gap_pct;
                   });
  std::ostringstream os;
  os << "| Method | Objective | Gap % | Time (s) | n |\n";
  os << "|---|---|---|---|---|\n";
  bool flagged = false;
  for (const auto& r : sorted) {
    os << "| " << r.method << (r.gap_vs_exact ? "" : "*") << " | "
       << fmt(r.mean_objective) << " | " << fmt(r.gap_pct, 2) << " | "
       << fmt(r.wallclock, 2) << " | " << r.samples << " |\n";
    flagged = flagged || !r.gap_vs_exact;
  }
  os << "\nInstances: " << num_instances << "\n";
  if (flagged) os << "\n\\* gap measured against the best method in this "
                     "report (no exact reference at this size).\n";
  return os.str();
}

void cmd_generate(const std::string& kind, const std::vector<int>& sizes,
                  int count, std::uint64_t seed, const std::string& out_path) {
  require(count >= 1, "cmd_generate: count must be >= 1");
  auto ps = generate_many(kind, sizes, count, seed);
  save_problems(ps, out_path);
}

TrainFileConfig parse_train_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config parse error: ") +
                                e.what());
  }
  require(j.is_object(), "config must be a JSON object");

  static const std::set<std::string> known{
      "family",     "d",          "enc_layers",   "dec_layers",
      "max_items",  "T",          "qbar_mode",    "lr",
      "lr_final",
      "alpha",      "lambda1",    "lambda2",      "M",
      "N",          "group_instances", "tau",     "kappa",
      "batch_size", "epochs",     "seed",         "buffer_capacity",
      "workers",    "checkpoint_every", "dataset", "instances",
      "sizes"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw std::invalid_argument("config: unknown key \"" + it.key() + "\"");
  if (!j.contains("family"))
    throw std::invalid_argument("config: missing required key \"family\"");

  TrainFileConfig c;
  c.kind = j.at("family").get<std::string>();
  c.model.family = kind_from_string(c.kind);
  auto geti = [&](const char* k, int& dst) {
    if (j.contains(k)) dst = j.at(k).get<int>();
  };
  auto getd = [&](const char* k, double& dst) {
    if (j.contains(k)) dst = j.at(k).get<double>();
  };
  geti("d", c.model.d);
  geti("enc_layers", c.model.enc_layers);
  geti("dec_layers", c.model.dec_layers);
  geti("max_items", c.model.max_items);
  geti("T", c.model.T);
  c.train.T = c.model.T;
  if (j.contains("qbar_mode")) {
    std::string m = j.at("qbar_mode").get<std::string>();
    if (m == "exact")
      c.model.qbar_mode = PmspQbarMode::ExactMarginal;
    else if (m == "paper")
      c.model.qbar_mode = PmspQbarMode::PaperLiteral;
    else
      throw std::invalid_argument("config: qbar_mode must be exact|paper");
  }
  getd("lr", c.train.lr);
  getd("lr_final", c.train.lr_final);
  getd("alpha", c.train.alpha);
  getd("lambda1", c.train.lambda1);
  getd("lambda2", c.train.lambda2);
  geti("M", c.train.M);
  geti("N", c.train.N);
  geti("group_instances", c.train.group_instances);
  getd("tau", c.train.tau);
  getd("kappa", c.train.kappa);
  geti("batch_size", c.train.batch_size);
  geti("epochs", c.train.epochs);
  if (j.contains("seed")) c.train.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("buffer_capacity"))
    c.train.buffer_capacity = j.at("buffer_capacity").get<size_t>();
  geti("workers", c.train.workers);
  geti("checkpoint_every", c.train.checkpoint_every);
  if (j.contains("dataset")) c.dataset = j.at("dataset").get<std::string>();
  geti("instances", c.instances);
  if (j.contains("sizes")) c.sizes = j.at("sizes").get<std::vector<int>>();
  return c;
}

void write_manifest(const std::string& run_dir, const std::string& config_text,
                    std::uint64_t seed) {
  std::filesystem::create_directories(run_dir);
  json m;
  m["config_hash"] = fnv1a_hex(config_text);
  m["seed"] = seed;
  m["version"] = kVersion;
  write_file(run_dir + "/manifest.json", m.dump(2) + "\n");
}

void cmd_train(const std::string& config_path, const std::string& run_dir,
               int workers_override, std::int64_t seed_override) {
  std::string text = read_file(config_path);
  TrainFileConfig c = parse_train_config(text);
  if (workers_override >= 0) c.train.workers = workers_override;
  if (seed_override >= 0) c.train.seed = std::uint64_t(seed_override);
  write_manifest(run_dir, text, c.train.seed);
  std::filesystem::copy_file(
      config_path, run_dir + "/config.json",
      std::filesystem::copy_options::overwrite_existing);

  std::vector<Problem> pool =
      c.dataset.empty()
          ? generate_many(c.kind, c.sizes, c.instances, c.train.seed)
          : load_problems(c.dataset);
  require(!pool.empty(), "cmd_train: empty instance pool");
  train(pool, c.model, c.train, run_dir);
}

EvalReport cmd_eval(const std::string& checkpoint_path,
                    const std::string& dataset_path, const EvalOptions& opts,
                    const std::string& run_dir) {
  std::vector<Problem> ps = load_problems(dataset_path);
  require(!ps.empty(), "cmd_eval: empty dataset");
  const int n = int(ps.size());

  std::vector<std::string> methods = opts.methods;
  if (methods.empty() && !checkpoint_path.empty()) methods = {"model"};
  require(!methods.empty(), "cmd_eval: nothing to evaluate");

  // exact reference per instance when oracle reach permits
  std::vector<double> ref(n);
  bool exact_ref = true;
  for (int i = 0; i < n && exact_ref; ++i) {
    ref[i] = exact_objective(ps[i]);
    exact_ref = std::isfinite(ref[i]);
  }

  std::map<std::string, MethodResult> results;
  for (const auto& m : methods) {
    if (m == "model") {
      Model model = load_checkpoint(checkpoint_path);
      results[m] = run_model(model, ps, opts);
    } else {
      results[m] = run_baseline(m, ps, opts);
    }
  }

  if (!exact_ref) {
    for (int i = 0; i < n; ++i) {
      ref[i] = std::numeric_limits<double>::infinity();
      for (const auto& m : methods) {
        double v = results[m].objective[i];
        if (std::isfinite(v)) ref[i] = std::min(ref[i], v);
      }
    }
  }

  EvalReport rep;
  rep.num_instances = n;
  for (const auto& m : methods) {
    EvalRow row;
    row.method = m;
    row.samples = (m == "model") ? opts.n_samples : 1;
    row.gap_vs_exact = exact_ref;
    row.wallclock = results[m].wallclock;
    if (!results[m].error.empty()) {
      // failed rows are reported, not fatal
      row.method += " [error: " + results[m].error + "]";
      row.mean_objective = std::numeric_limits<double>::quiet_NaN();
      row.gap_pct = std::numeric_limits<double>::quiet_NaN();
    } else {
      double gap = 0.0;
      for (int i = 0; i < n; ++i) {
        row.mean_objective += results[m].objective[i] / n;
        gap += (results[m].objective[i] - ref[i]) / ref[i];
      }
      row.gap_pct = 100.0 * gap / n;
    }
    rep.rows.push_back(row);
  }

  if (!run_dir.empty()) {
    write_manifest(run_dir, dataset_path + "|" + checkpoint_path, opts.seed);
    write_file(run_dir + "/report.csv", rep.to_csv());
    write_file(run_dir + "/report.md", rep.to_markdown());
  }
  return rep;
}

EvalReport cmd_sweep_generalize(const std::string& checkpoint_path,
                                const std::string& kind,
                                const std::vector<int>& sizes,
                                int count_per_size, const EvalOptions& opts,
                                const std::string& run_dir) {
  require(!sizes.empty(), "cmd_sweep_generalize: empty size list");
  Model model = load_checkpoint(checkpoint_path);

  EvalReport rep;
  std::ostringstream csv;
  csv << "size,mean_objective,gap_pct,gap_ref,wallclock,samples\n";
  for (int sz : sizes) {
    std::vector<int> dims =
        kind == "pmsp" ? std::vector<int>{sz, 3} : std::vector<int>{sz};
    auto ps = generate_many(kind, dims, count_per_size,
                            opts.seed + std::uint64_t(sz) * 7919);
    MethodResult mr = run_model(model, ps, opts);
    std::vector<double> ref(ps.size());
    bool exact_ref = true;
    for (size_t i = 0; i < ps.size(); ++i) {
      ref[i] = exact_objective(ps[i]);
      exact_ref = exact_ref && std::isfinite(ref[i]);
    }
    EvalRow row;
    row.method = "model(n=" + std::to_string(sz) + ")";
    row.samples = opts.n_samples;
    row.gap_vs_exact = exact_ref;
    row.wallclock = mr.wallclock;
    double gap = 0.0;
    for (size_t i = 0; i < ps.size(); ++i) {
      row.mean_objective += mr.objective[i] / double(ps.size());
      if (exact_ref) gap += (mr.objective[i] - ref[i]) / ref[i];
    }
    row.gap_pct = exact_ref ? 100.0 * gap / double(ps.size())
                            : std::numeric_limits<double>::quiet_NaN();
    rep.rows.push_back(row);
    rep.num_instances += count_per_size;
    csv << sz << "," << fmt(row.mean_objective, 6) << ","
        << fmt(row.gap_pct, 4) << ","
        << (exact_ref ? "exact" : "none") << "," << fmt(row.wallclock, 4)
        << "," << row.samples << "\n";
  }
  if (!run_dir.empty()) {
    write_manifest(run_dir, checkpoint_path + "|sweep", opts.seed);
    write_file(run_dir + "/sweep.csv", csv.str());
    write_file(run_dir + "/sweep.md", rep.to_markdown());
  }
  return rep;
}

// ---- report rendering ----

namespace {

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return int(i);
    return -1;
  }
};

Csv read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open CSV: " + path);
  Csv c;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (ss.eof() && !line.empty() && line.back() == ',') cells.push_back("");
    if (first) {
      c.header = cells;
      first = false;
    } else {
      cells.resize(c.header.size());
      c.rows.push_back(cells);
    }
  }
  return c;
}

/// Minimal line plot: one polyline over (x, y) pairs with axis labels.
std::string svg_line_plot(const std::vector<double>& xs,
                          const std::vector<double>& ys,
                          const std::string& xlabel,
                          const std::string& ylabel) {
  const double W = 480, H = 320, L = 60, R = 20, Tm = 20, B = 50;
  double xmin = *std::min_element(xs.begin(), xs.end());
  double xmax = *std::max_element(xs.begin(), xs.end());
  double ymin = *std::min_element(ys.begin(), ys.end());
  double ymax = *std::max_element(ys.begin(), ys.end());
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  auto X = [&](double x) {
    return L + (x - xmin) / (xmax - xmin) * (W - L - R);
  };
  auto Y = [&](double y) {
    return H - B - (y - ymin) / (ymax - ymin) * (H - Tm - B);
  };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
     << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R
     << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << Tm << "\" x2=\"" << L
     << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  os << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" "
        "points=\"";
  for (size_t i = 0; i < xs.size(); ++i)
    os << X(xs[i]) << "," << Y(ys[i]) << " ";
  os << "\"/>\n";
  for (size_t i = 0; i < xs.size(); ++i) {
    os << "<circle cx=\"" << X(xs[i]) << "\" cy=\"" << Y(ys[i])
       << "\" r=\"3\" fill=\"steelblue\"/>\n";
    os << "<text x=\"" << X(xs[i]) << "\" y=\"" << H - B + 18
       << "\" font-size=\"10\" text-anchor=\"middle\">" << fmt(xs[i], 0)
       << "</text>\n";
    os << "<text x=\"" << X(xs[i]) + 4 << "\" y=\"" << Y(ys[i]) - 6
       << "\" font-size=\"10\">" << fmt(ys[i], 2) << "</text>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10
     << "\" font-size=\"12\" text-anchor=\"middle\">" << xlabel
     << "</text>\n";
  os << "<text x=\"14\" y=\"" << (Tm + H - B) / 2
     << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
     << (Tm + H - B) / 2 << ")\">" << ylabel << "</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace

void cmd_report(const std::vector<std::string>& csv_paths,
                const std::string& out_dir) {
  require(!csv_paths.empty(), "cmd_report: no input CSVs");
  std::filesystem::create_directories(out_dir);

  std::ostringstream md;
  md << "# Evaluation report\n";
  int plot_idx = 0;
  for (const auto& path : csv_paths) {
    Csv c = read_csv(path);
    int gap = c.col("gap_pct");
    if (gap < 0)
      throw std::invalid_argument("report: CSV " + path +
                                  " is missing required column \"gap_pct\"");
    // table sorted by gap ascending
    std::stable_sort(c.rows.begin(), c.rows.end(),
                     [gap](const auto& a, const auto& b) {
                       return std::atof(a[gap].c_str()) <
                              std::atof(b[gap].c_str());
                     });
    md << "\n## " << std::filesystem::path(path).filename().string() << "\n\n";
    md << "|";
    for (const auto& h : c.header) md << " " << h << " |";
    md << "\n|";
    for (size_t i = 0; i < c.header.size(); ++i) md << "---|";
    md << "\n";
    for (const auto& r : c.rows) {
      md << "|";
      for (const auto& cell : r) md << " " << cell << " |";
      md << "\n";
    }

    auto numeric_col = [&](int idx) {
      std::vector<double> v;
      for (const auto& r : c.rows) v.push_back(std::atof(r[idx].c_str()));
      return v;
    };
    int size_c = c.col("size"), stride_c = c.col("stride"),
        wall_c = c.col("wallclock");
    if (size_c >= 0 && !c.rows.empty()) {
      std::string f = out_dir + "/gap_vs_size_" + std::to_string(plot_idx) +
                      ".svg";
      write_file(f, svg_line_plot(numeric_col(size_c), numeric_col(gap),
                                  "instance size", "gap %"));
      md << "\n![gap vs size](" << std::filesystem::path(f).filename().string()
         << ")\n";
    }
    if (stride_c >= 0 && !c.rows.empty()) {
      std::string f1 = out_dir + "/gap_vs_stride_" +
                       std::to_string(plot_idx) + ".svg";
      write_file(f1, svg_line_plot(numeric_col(stride_c), numeric_col(gap),
                                   "stride", "gap %"));
      md << "\n![gap vs stride]("
         << std::filesystem::path(f1).filename().string() << ")\n";
      if (wall_c >= 0) {
        std::string f2 = out_dir + "/time_vs_stride_" +
                         std::to_string(plot_idx) + ".svg";
        write_file(f2, svg_line_plot(numeric_col(stride_c),
                                     numeric_col(wall_c), "stride",
                                     "wallclock (s)"));
        md << "\n![time vs stride]("
           << std::filesystem::path(f2).filename().string() << ")\n";
      }
    }
    ++plot_idx;
  }
  write_file(out_dir + "/report.md", md.str());
}

}  // namespace icdc
