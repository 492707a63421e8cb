// motcli: k-sample inference on finitely supported measures via
// multimarginal optimal transport. Subcommands: mot, test, cr, power,
// simulate. Results are emitted as a single JSON document; identical
// inputs, config, and seed produce byte-identical documents at any
// --jobs level.

#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mot/inference.hpp"
#include "mot/io.hpp"
#include "mot/mot.hpp"
#include "mot/synthetic.hpp"

namespace {

using mot::Json;

struct CommonOpts {
  std::string samples_path;
  std::string measures_path;
  std::string support_path;
  std::string out_path;
  std::string plot_path;
  double alpha = 0.05;
  std::string method = "derivative";
  std::uint64_t replicates = 300;
  std::uint64_t permutations = 199;
  double subsample_exponent = 0.5;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::uint64_t memory_budget = mot::kDefaultTensorBudget;
  bool coupled = false;
  std::string cr_mode = "standard";
  std::string null_cov = "first";
  std::string lp_mode = "auto";
  bool timing = false;
};

void add_io_flags(CLI::App* cmd, CommonOpts& o, bool needs_data) {
  if (needs_data) {
    cmd->add_option("--samples", o.samples_path, "samples file (group,x1,...,xd)");
    cmd->add_option("--measures", o.measures_path, "measures file (JSON)");
    cmd->add_option("--support", o.support_path, "declared support file (x1,...,xd)");
  }
  cmd->add_option("--out", o.out_path, "write the result document here (default stdout)");
  cmd->add_option("--plot-data", o.plot_path, "write plot-ready tabular data here");
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--jobs", o.jobs, "replicate parallelism cap");
  cmd->add_option("--memory-budget", o.memory_budget, "dense tensor budget (entries)");
  cmd->add_option("--lp-mode", o.lp_mode, "dense|lazy|auto solver override")
      ->check(CLI::IsMember({"auto", "dense", "lazy"}));
  cmd->add_flag("--timing", o.timing, "include wall-clock timing in the document");
}

mot::MotOptions mot_options(const CommonOpts& o) {
  mot::MotOptions opts;
  opts.budget = o.memory_budget;
  if (o.lp_mode == "dense") opts.mode = mot::SolveMode::dense;
  else if (o.lp_mode == "lazy") opts.mode = mot::SolveMode::lazy;
  return opts;
}

mot::BootstrapConfig bootstrap_config(const CommonOpts& o) {
  mot::BootstrapConfig cfg;
  cfg.replicates = o.replicates;
  cfg.subsample_exponent = o.subsample_exponent;
  cfg.seed = o.seed;
  cfg.coupled = o.coupled;
  cfg.jobs = o.jobs;
  cfg.cov_source = o.null_cov == "pooled" ? mot::NullCovSource::pooled_all
                                          : mot::NullCovSource::first_group;
  return cfg;
}

mot::IngestResult ingest(const CommonOpts& o) {
  const bool has_samples = !o.samples_path.empty();
  const bool has_measures = !o.measures_path.empty();
  if (has_samples == has_measures)
    mot::fail(mot::Errc::invalid_argument,
              "supply exactly one of --samples or --measures");
  if (has_measures && !o.support_path.empty())
    mot::fail(mot::Errc::invalid_argument,
              "--support applies to the samples format only");
  if (has_samples) {
    std::shared_ptr<const mot::SupportSpace> declared;
    if (!o.support_path.empty()) declared = mot::read_support_file(o.support_path);
    return mot::read_samples_file(o.samples_path, declared);
  }
  return mot::read_measures_file(o.measures_path);
}

Json config_json(const std::string& command, const CommonOpts& o) {
  Json j;
  j["command"] = command;
  if (!o.samples_path.empty()) j["samples"] = o.samples_path;
  if (!o.measures_path.empty()) j["measures"] = o.measures_path;
  if (!o.support_path.empty()) j["support_file"] = o.support_path;
  j["alpha"] = o.alpha;
  j["method"] = o.method;
  j["replicates"] = o.replicates;
  j["permutations"] = o.permutations;
  j["subsample_exponent"] = o.subsample_exponent;
  j["seed"] = o.seed;
  j["jobs"] = o.jobs;
  j["memory_budget"] = o.memory_budget;
  j["coupled"] = o.coupled;
  j["cr_mode"] = o.cr_mode;
  j["null_cov"] = o.null_cov;
  j["lp_mode"] = o.lp_mode;
  return j;
}

Json groups_json(const mot::IngestResult& in) {
  Json arr = Json::array();
  for (std::size_t i = 0; i < in.measures.size(); ++i) {
    Json g;
    g["name"] = in.group_names[i];
    if (in.measures[i].sample_size()) g["n"] = *in.measures[i].sample_size();
    arr.push_back(g);
  }
  return arr;
}

Json support_json(const mot::SupportSpace& sp) {
  Json j;
  j["N"] = sp.size();
  j["d"] = sp.dim();
  return j;
}

std::chrono::steady_clock::time_point g_started;

// Timing is opt-in: a wall-clock field breaks byte-reproducibility of
// the document, so it is attached only when --timing is given.
void emit(Json doc, const CommonOpts& o) {
  if (o.timing) {
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - g_started)
                        .count();
    doc["timing"]["elapsed_ms"] = ms;
  }
  const std::string text = doc.dump(2) + "\n";
  if (o.out_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(o.out_path, std::ios::binary);
    if (!out) mot::fail(mot::Errc::parse_error, "cannot write '" + o.out_path + "'");
    out << text;
  }
}

void write_plot_data(const std::string& path, const std::vector<double>& values) {
  if (path.empty() || values.empty()) return;
  std::ofstream out(path, std::ios::binary);
  if (!out) mot::fail(mot::Errc::parse_error, "cannot write '" + path + "'");
  out << "kind,x,y\n";
  char buf[64];
  for (int p = 1; p <= 99; ++p) {
    const double q = mot::empirical_quantile(values, p / 100.0);
    std::snprintf(buf, sizeof buf, "quantile,%.2f,%.17g\n", p / 100.0, q);
    out << buf;
  }
  double lo = values[0], hi = values[0];
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const int bins = 30;
  const double width = hi > lo ? (hi - lo) / bins : 1.0;
  std::vector<std::size_t> count(bins, 0);
  for (double v : values) {
    int b = static_cast<int>((v - lo) / width);
    if (b >= bins) b = bins - 1;
    if (b < 0) b = 0;
    count[b] += 1;
  }
  for (int b = 0; b < bins; ++b) {
    std::snprintf(buf, sizeof buf, "hist,%.17g,%zu\n", lo + (b + 0.5) * width, count[b]);
    out << buf;
  }
}

std::vector<std::uint64_t> parse_u64_grid(const std::string& csv, const char* what) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stoull(tok));
    } catch (const std::exception&) {
      mot::fail(mot::Errc::invalid_argument, std::string(what) + ": bad entry '" + tok + "'");
    }
  }
  if (out.empty()) mot::fail(mot::Errc::invalid_argument, std::string(what) + " is empty");
  return out;
}

std::vector<double> parse_double_grid(const std::string& csv, const char* what) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      mot::fail(mot::Errc::invalid_argument, std::string(what) + ": bad entry '" + tok + "'");
    }
  }
  if (out.empty()) mot::fail(mot::Errc::invalid_argument, std::string(what) + " is empty");
  return out;
}

mot::TestMethod parse_method(const std::string& m) {
  if (m == "derivative") return mot::TestMethod::derivative;
  if (m == "mn") return mot::TestMethod::mn_bootstrap;
  if (m == "ub0") return mot::TestMethod::ub0;
  if (m == "permutation") return mot::TestMethod::permutation;
  mot::fail(mot::Errc::invalid_argument, "unknown method '" + m + "'");
}

int run_mot(const CommonOpts& o) {
  const auto in = ingest(o);
  const auto data = in.collection();
  const auto sol = mot::solve_mot(data, mot_options(o));

  Json doc;
  doc["version"] = mot::kVersion;
  doc["config"] = config_json("mot", o);
  doc["groups"] = groups_json(in);
  doc["support"] = support_json(*in.support);
  Json res;
  res["mot_value"] = sol.value;
  res["lazy_mode"] = sol.lazy_mode;
  if (sol.coupling) {
    const mot::TupleIndexer ix{sol.coupling->N, sol.coupling->k};
    Json top = Json::array();
    std::vector<std::pair<double, std::uint64_t>> entries;
    for (std::uint64_t t = 0; t < sol.coupling->pi.size(); ++t)
      if (sol.coupling->pi[t] > 1e-12) entries.push_back({sol.coupling->pi[t], t});
    std::stable_sort(entries.begin(), entries.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    if (entries.size() > 16) entries.resize(16);
    for (const auto& [mass, t] : entries) {
      Json e;
      e["tuple"] = ix.digits(t);
      e["mass"] = mass;
      top.push_back(e);
    }
    res["coupling_top"] = top;
    Json bary = Json::array();
    for (const auto& [pt, mass] : mot::barycenter_pushforward(*sol.coupling, *in.support)) {
      Json e;
      e["point"] = pt;
      e["mass"] = mass;
      bary.push_back(e);
    }
    res["barycenter_pushforward"] = bary;
  }
  Json stats;
  stats["iterations"] = sol.stats.iterations;
  stats["rows_generated"] = sol.stats.rows_generated;
  doc["results"] = res;
  doc["solver"] = stats;
  emit(doc, o);
  return 0;
}

int run_test(const CommonOpts& o) {
  const auto in = ingest(o);
  const auto method = parse_method(o.method);
  const auto opts = mot_options(o);
  mot::TestResult res;
  if (method == mot::TestMethod::permutation) {
    if (!in.raw)
      mot::fail(mot::Errc::invalid_argument,
                "--method permutation needs the samples input format");
    res = mot::permutation_test(*in.raw, o.permutations, o.alpha, o.seed, opts, o.jobs);
  } else {
    res = mot::test_h0(in.collection(), o.alpha, method, bootstrap_config(o), opts);
  }

  Json doc;
  doc["version"] = mot::kVersion;
  doc["config"] = config_json("test", o);
  doc["groups"] = groups_json(in);
  doc["support"] = support_json(*in.support);
  Json r;
  r["mot_value"] = res.mot_value;
  r["rho_n"] = res.rho_n;
  r["statistic"] = res.statistic;
  r["cutoff"] = res.cutoff;
  r["p_value"] = res.p_value;
  r["decision"] = res.reject ? "reject" : "retain";
  r["method"] = mot::method_name(res.method);
  r["replicates"] = mot::replicate_summary(res.replicate_values, res.replicate_failures);
  if (o.coupled && method == mot::TestMethod::ub0) {
    // Paired derivative draws share the replicate streams; report how
    // often the relaxation failed to dominate (expected: never).
    const auto x0 = mot::derivative_bootstrap_null(in.collection(), bootstrap_config(o), opts);
    std::size_t violations = 0;
    const std::size_t n = std::min(x0.values.size(), res.replicate_values.size());
    for (std::size_t i = 0; i < n; ++i)
      if (res.replicate_values[i] < x0.values[i] - 1e-8) ++violations;
    r["coupled_dominance_violations"] = violations;
  }
  doc["results"] = r;
  emit(doc, o);
  write_plot_data(o.plot_path, res.replicate_values);
  return 0;
}

int run_cr(const CommonOpts& o) {
  const auto in = ingest(o);
  const auto opts = mot_options(o);
  const auto data = in.collection();
  const auto mode = o.cr_mode == "literal" ? mot::CrMode::literal : mot::CrMode::standard;
  const auto cfg = bootstrap_config(o);
  const double mot_hat = mot::solve_mot(data, opts).value;
  const auto draws = mot::mn_bootstrap(data, cfg, mot::Hypothesis::Ha, mot_hat, opts);
  const auto ri = mot::rate(data.sizes());
  const double q_lo = mot::empirical_quantile(draws.values, o.alpha / 2.0);
  const double q_hi = mot::empirical_quantile(draws.values, 1.0 - o.alpha / 2.0);
  mot::ConfidenceInterval ci;
  ci.level = 1.0 - o.alpha;
  if (mode == mot::CrMode::standard) {
    ci.lower = std::max(0.0, mot_hat - q_hi / ri.rho_n);
    ci.upper = std::max(0.0, mot_hat - q_lo / ri.rho_n);
  } else {
    ci.literal_scaling = true;
    ci.lower = mot_hat / ri.rho_n - q_hi;
    ci.upper = mot_hat / ri.rho_n - q_lo;
  }

  Json doc;
  doc["version"] = mot::kVersion;
  doc["config"] = config_json("cr", o);
  doc["groups"] = groups_json(in);
  doc["support"] = support_json(*in.support);
  Json r;
  r["mot_value"] = mot_hat;
  r["rho_n"] = ri.rho_n;
  Json cij;
  cij["lower"] = ci.lower;
  cij["upper"] = ci.upper;
  cij["level"] = ci.level;
  cij["mode"] = ci.literal_scaling ? "literal" : "standard";
  r["confidence_interval"] = cij;
  r["replicates"] = mot::replicate_summary(draws.values, draws.failures);
  doc["results"] = r;
  emit(doc, o);
  write_plot_data(o.plot_path, draws.values);
  return 0;
}

int run_power(const CommonOpts& o, double ctilde_flag, const std::string& n_grid,
              const std::string& delta_grid) {
  double c_tilde = ctilde_flag;
  std::string source = "flag";
  std::optional<mot::IngestResult> in;
  if (!(c_tilde > 0.0)) {
    std::shared_ptr<const mot::SupportSpace> sp;
    if (!o.support_path.empty() && o.samples_path.empty() && o.measures_path.empty()) {
      sp = mot::read_support_file(o.support_path);
    } else {
      in = ingest(o);
      sp = in->support;
    }
    c_tilde = mot::dual_range(*sp);
    source = "dual_range";
  }
  std::vector<double> deltas;
  if (!delta_grid.empty()) {
    deltas = parse_double_grid(delta_grid, "--delta-grid");
  } else if (in && in->measures.size() == 2) {
    deltas.push_back(mot::w2_squared(in->measures[0], in->measures[1]));
  } else {
    mot::fail(mot::Errc::invalid_argument,
              "supply --delta-grid, or two groups to infer the effect size");
  }
  const auto ns = parse_u64_grid(n_grid, "--n-grid");

  Json doc;
  doc["version"] = mot::kVersion;
  doc["config"] = config_json("power", o);
  Json r;
  r["c_tilde"] = c_tilde;
  r["c_tilde_source"] = source;
  Json pts = Json::array();
  for (double delta : deltas) {
    for (std::uint64_t n : ns) {
      Json p;
      p["n"] = n;
      p["delta"] = delta;
      p["bound"] = mot::power_lower_bound(c_tilde, n, delta, o.alpha);
      pts.push_back(p);
    }
  }
  r["points"] = pts;
  doc["results"] = r;
  emit(doc, o);
  return 0;
}

int run_simulate(const CommonOpts& o, const std::string& family_name, std::size_t k,
                 const std::string& n_grid, std::uint64_t trials, double separation) {
  mot::SyntheticFamily family;
  if (family_name == "clustered") family = mot::SyntheticFamily::clustered;
  else if (family_name == "sparse") family = mot::SyntheticFamily::sparse;
  else if (family_name == "null") family = mot::SyntheticFamily::null_family;
  else mot::fail(mot::Errc::invalid_argument, "unknown family '" + family_name + "'");

  std::shared_ptr<const mot::SupportSpace> sp =
      o.support_path.empty() ? mot::experiment3d_support()
                             : mot::read_support_file(o.support_path);
  const auto [mu_a, mu_b] = mot::tilted_pair(sp, separation);
  const auto truth = mot::family_truth(family, mu_a, mu_b, k);
  const auto opts = mot_options(o);
  const auto method = parse_method(o.method);
  if (method == mot::TestMethod::permutation)
    mot::fail(mot::Errc::invalid_argument, "simulate supports asymptotic methods only");

  double truth_mot = 0.0;
  if (family == mot::SyntheticFamily::clustered)
    truth_mot = mot::reference_mot(mot::AlternativeFamily::clustered, mu_a, mu_b, k);
  else if (family == mot::SyntheticFamily::sparse)
    truth_mot = mot::reference_mot(mot::AlternativeFamily::sparse, mu_a, mu_b, k);

  const auto ns = parse_u64_grid(n_grid, "--n-grid");
  Json rows = Json::array();
  for (std::size_t ni = 0; ni < ns.size(); ++ni) {
    const std::uint64_t n = ns[ni];
    std::uint64_t rejections = 0;
    for (std::uint64_t t = 0; t < trials; ++t) {
      const std::uint64_t trial_seed = mot::derive_seed(o.seed, ni * trials + t);
      const auto data = mot::sample_collection(truth, n, mot::derive_seed(trial_seed, 1));
      auto cfg = bootstrap_config(o);
      cfg.seed = mot::derive_seed(trial_seed, 2);
      const auto res = mot::test_h0(data, o.alpha, method, cfg, opts);
      if (res.reject) ++rejections;
    }
    Json row;
    row["n"] = n;
    row["trials"] = trials;
    row["rejections"] = rejections;
    row["rate"] = static_cast<double>(rejections) / static_cast<double>(trials);
    rows.push_back(row);
  }

  Json doc;
  doc["version"] = mot::kVersion;
  doc["config"] = config_json("simulate", o);
  Json r;
  r["family"] = family_name;
  r["k"] = k;
  r["separation"] = separation;
  r["truth_mot"] = truth_mot;
  r["w2_squared_ab"] = mot::w2_squared(mu_a, mu_b);
  r["support"] = support_json(*sp);
  r["rows"] = rows;
  doc["results"] = r;
  emit(doc, o);
  if (!o.plot_path.empty()) {
    std::ofstream outp(o.plot_path, std::ios::binary);
    if (!outp) mot::fail(mot::Errc::parse_error, "cannot write '" + o.plot_path + "'");
    outp << "n,trials,rejections,rate\n";
    for (const auto& row : rows)
      outp << row["n"] << "," << row["trials"] << "," << row["rejections"] << ","
           << row["rate"] << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"k-sample inference via multimarginal optimal transport"};
  app.require_subcommand(1);
  CommonOpts o;

  auto* cmd_mot = app.add_subcommand("mot", "MOT value, multicoupling, and barycenter diagnostic");
  add_io_flags(cmd_mot, o, true);

  auto* cmd_test = app.add_subcommand("test", "test H0: all k measures equal");
  add_io_flags(cmd_test, o, true);
  cmd_test->add_option("--alpha", o.alpha, "test level");
  cmd_test->add_option("--method", o.method, "derivative|mn|ub0|permutation")
      ->check(CLI::IsMember({"derivative", "mn", "ub0", "permutation"}));
  cmd_test->add_option("--replicates", o.replicates, "bootstrap replicates B");
  cmd_test->add_option("--permutations", o.permutations, "permutation count R");
  cmd_test->add_option("--subsample-exponent", o.subsample_exponent, "p with m = n^p");
  cmd_test->add_flag("--coupled", o.coupled, "emit paired-draw dominance diagnostics");
  cmd_test->add_option("--null-cov", o.null_cov, "first|pooled derivative covariance source")
      ->check(CLI::IsMember({"first", "pooled"}));

  auto* cmd_cr = app.add_subcommand("cr", "confidence region for the MOT value");
  add_io_flags(cmd_cr, o, true);
  cmd_cr->add_option("--alpha", o.alpha, "1 - confidence level");
  cmd_cr->add_option("--replicates", o.replicates, "bootstrap replicates B");
  cmd_cr->add_option("--subsample-exponent", o.subsample_exponent, "p with m = n^p");
  cmd_cr->add_option("--cr-mode", o.cr_mode, "standard|literal quantile scaling")
      ->check(CLI::IsMember({"standard", "literal"}));

  auto* cmd_power = app.add_subcommand("power", "two-sample power lower bound grid");
  add_io_flags(cmd_power, o, true);
  double ctilde_flag = 0.0;
  std::string n_grid = "100,200,400,800";
  std::string delta_grid;
  cmd_power->add_option("--alpha", o.alpha, "test level");
  cmd_power->add_option("--ctilde", ctilde_flag, "dual-range constant (else computed)");
  cmd_power->add_option("--n-grid", n_grid, "comma-separated sample sizes");
  cmd_power->add_option("--delta-grid", delta_grid, "comma-separated effect sizes (W2^2)");

  auto* cmd_sim = app.add_subcommand("simulate", "empirical level/power on synthetic families");
  add_io_flags(cmd_sim, o, true);
  std::string family = "clustered";
  std::size_t k = 4;
  std::string sim_n_grid = "100,300,500";
  std::uint64_t trials = 100;
  double separation = 2.0;
  cmd_sim->add_option("--family", family, "clustered|sparse|null");
  cmd_sim->add_option("--k", k, "number of measures");
  cmd_sim->add_option("--n-grid", sim_n_grid, "comma-separated sample sizes");
  cmd_sim->add_option("--trials", trials, "Monte-Carlo trials per grid point");
  cmd_sim->add_option("--separation", separation, "tilt between the two base measures");
  cmd_sim->add_option("--alpha", o.alpha, "test level");
  cmd_sim->add_option("--method", o.method, "derivative|mn|ub0");
  cmd_sim->add_option("--replicates", o.replicates, "bootstrap replicates B");
  cmd_sim->add_option("--subsample-exponent", o.subsample_exponent, "p with m = n^p");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    Json err;
    err["error"]["kind"] = "InvalidArgument";
    err["error"]["message"] = e.what();
    std::cout << err.dump(2) << "\n";
    return 2;
  }

  g_started = std::chrono::steady_clock::now();
  try {
    if (cmd_mot->parsed()) return run_mot(o);
    if (cmd_test->parsed()) return run_test(o);
    if (cmd_cr->parsed()) return run_cr(o);
    if (cmd_power->parsed()) return run_power(o, ctilde_flag, n_grid, delta_grid);
    if (cmd_sim->parsed()) return run_simulate(o, family, k, sim_n_grid, trials, separation);
    return 0;
  } catch (const mot::Error& e) {
    Json err;
    err["error"]["kind"] = mot::errc_name(e.kind());
    err["error"]["message"] = e.what();
    std::cout << err.dump(2) << "\n";
    return e.is_solver_failure() ? 3 : 2;
  } catch (const std::exception& e) {
    Json err;
    err["error"]["kind"] = "InternalError";
    err["error"]["message"] = e.what();
    std::cout << err.dump(2) << "\n";
    return 3;
  }
}
