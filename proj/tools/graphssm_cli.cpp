// graphssm command-line entry point: gen, verify, metrics, run, bench.
// Exit codes: 0 success, 1 check failure, 2 usage or input error.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "graphssm/graphssm.hpp"

namespace {

using namespace graphssm;

constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kUsage = 2;

const std::map<std::string, LaplacianKind> kLaplacians{{"sym", LaplacianKind::Symmetric},
                                                       {"rw", LaplacianKind::RandomWalk}};
const std::map<std::string, SsmVariant> kVariants{
    {"s4", SsmVariant::S4}, {"s5", SsmVariant::S5}, {"s6", SsmVariant::S6}};
const std::map<std::string, InitKind> kInits{
    {"hippo", InitKind::S4dReal}, {"const", InitKind::S4dConst}, {"random", InitKind::Random}};
const std::map<std::string, MixMechanism> kMechanisms{
    {"ordinary", MixMechanism::Ordinary}, {"feature", MixMechanism::FeatureMix}, {"repr", MixMechanism::ReprMix}};
const std::map<std::string, MixerKind> kMixers{{"conv1d", MixerKind::Conv1D}, {"interp", MixerKind::Interp}};
const std::map<std::string, GnnFlavor> kFlavors{{"gcn", GnnFlavor::GcnLike}, {"sage", GnnFlavor::SageMeanLike}};
const std::map<std::string, Activation> kActivations{
    {"identity", Activation::Identity}, {"relu", Activation::Relu}, {"tanh", Activation::Tanh}};
const std::map<std::string, ScanBackend> kBackends{{"sequential", ScanBackend::Sequential},
                                                   {"parallel", ScanBackend::Parallel}};

/// Enum option shown as {a,b,...} with the default by name.
template <class T>
CLI::Option* add_choice(CLI::App& app, const std::string& name, T& target, const std::map<std::string, T>& table,
                        const std::string& help) {
  std::string names;
  std::string current;
  for (const auto& [key, value] : table) {
    names += (names.empty() ? "" : ",") + key;
    if (value == target) current = key;
  }
  return app.add_option(name, target, help)
      ->transform(CLI::CheckedTransformer(table, CLI::ignore_case).description(""))
      ->type_name("{" + names + "}")
      ->default_str(current);
}

void add_task_options(CLI::App& app, TaskConfig& task) {
  app.add_option("--v", task.num_nodes, "Number of nodes")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--l", task.num_steps, "Number of snapshots")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--d", task.feature_dim, "Feature width")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--c", task.num_classes, "Number of classes")->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--drift", task.drift_rate, "Centroid rotation and edge rewiring rate per step")
      ->capture_default_str();
  app.add_option("--noise", task.noise, "Feature noise standard deviation")->capture_default_str();
  app.add_option("--degree", task.mean_degree, "Mean node degree")->capture_default_str();
  app.add_option("--homophily", task.homophily, "Share of intra-community edges")->capture_default_str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw FormatError("failed writing '" + path + "'");
}

// ---------------------------------------------------------------- gen

struct GenArgs {
  std::uint64_t seed{1};
  TaskConfig task;
  std::string out;
  std::string labels;
};

int cmd_gen(const GenArgs& a) {
  const SyntheticTask task = gen_synthetic(a.seed, a.task);
  std::ostringstream seq;
  io::write_sequence(seq, task.sequence);
  write_file(a.out, seq.str());
  std::ostringstream lab;
  io::write_labels(lab, task.labels);
  write_file(a.labels.empty() ? a.out + ".labels" : a.labels, lab.str());
  std::cout << "wrote " << a.out << " (" << task.sequence.size() << " snapshots, " << task.sequence.num_nodes()
            << " nodes)\n";
  return kOk;
}

// ---------------------------------------------------------------- verify

int cmd_verify(const verify::VerifyConfig& cfg) {
  std::vector<verify::CheckResult> results{verify::check_projection(cfg), verify::check_zoh(cfg),
                                           verify::check_lambda(cfg)};
  const bool has_zero = std::find(cfg.alphas.begin(), cfg.alphas.end(), 0.0) != cfg.alphas.end();
  if (has_zero) results.push_back(verify::check_reduction(cfg));
  bool ok = true;
  for (const auto& r : results) {
    std::cout << verify::format_line(r) << '\n';
    ok = ok && r.pass;
  }
  std::cout << (ok ? "PASS" : "FAIL") << " verify checks=" << results.size() << '\n';
  return ok ? kOk : kCheckFailed;
}

// ---------------------------------------------------------------- metrics

int cmd_metrics(const std::string& input) {
  const SnapshotSequence seq = io::load_sequence(input);
  require(seq.size() >= 2, "metrics need at least two snapshots");
  const TemporalContinuity tc = temporal_continuity(seq);
  std::printf("tc_structure=%.6f\ntc_feature=%.6f\n", tc.structure, tc.feature);
  return kOk;
}

// ---------------------------------------------------------------- run

struct RunArgs {
  RunConfig cfg;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> inits{"hippo"};
  std::string out;
  std::string save_params;
};

int cmd_run(RunArgs a) {
  a.cfg.seeds = a.seeds;
  a.cfg.inits.clear();
  for (const auto& name : a.inits) a.cfg.inits.push_back(kInits.at(name));
  const auto rows = run_pipeline(a.cfg);
  std::ostringstream csv;
  write_results_csv(csv, rows);
  if (a.out.empty()) {
    std::cout << csv.str();
  } else {
    write_file(a.out, csv.str());
  }
  if (!a.save_params.empty()) {
    ModelConfig mc = a.cfg.model;
    mc.input_dim = a.cfg.task.feature_dim;
    mc.seq_len = a.cfg.task.num_steps;
    mc.init = a.cfg.inits.front();
    std::ostringstream pf;
    io::write_params(pf, model_to_params(build_model(mc, Rng(a.seeds.front()).split("model"))));
    write_file(a.save_params, pf.str());
  }
  std::map<std::string, std::pair<double, double>> sum;
  std::map<std::string, int> count;
  for (const auto& r : rows) {
    const std::string key = r.variant + "/" + r.init;
    sum[key].first += r.micro_f1;
    sum[key].second += r.macro_f1;
    ++count[key];
  }
  std::FILE* table = a.out.empty() ? stderr : stdout;
  std::fprintf(table, "%-14s %6s %9s %9s\n", "model", "seeds", "micro_f1", "macro_f1");
  for (const auto& [key, s] : sum) {
    const double n = count[key];
    std::fprintf(table, "%-14s %6d %9.4f %9.4f\n", key.c_str(), count[key], s.first / n, s.second / n);
  }
  return kOk;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  std::uint64_t seed{1};
  std::size_t min_log{10};
  std::size_t max_log{16};
  std::size_t lanes{256};
  std::size_t chunk{256};
  std::size_t repeats{3};
  std::size_t threads{0};
  std::vector<std::string> backends{"sequential", "parallel"};
  std::string out;
};

int cmd_bench(const BenchArgs& a) {
  require(a.min_log <= a.max_log && a.max_log <= 24, "bench needs min-log <= max-log <= 24");
  std::ostringstream csv;
  csv << "L,lanes,backend,ns_per_element\n";
  Rng rng = Rng(a.seed).split("bench");
  for (std::size_t k = a.min_log; k <= a.max_log; ++k) {
    const auto steps = static_cast<Eigen::Index>(1) << k;
    const auto lanes = static_cast<Eigen::Index>(a.lanes);
    RecurrenceInputs inp{rng.uniform_matrix(lanes, steps, 0.5, 1.0), rng.uniform_matrix(lanes, steps, -1.0, 1.0),
                         Vector::Zero(lanes)};
    for (const auto& name : a.backends) {
      const ScanOptions opts{kBackends.at(name), a.chunk, a.threads};
      const BenchRow row = bench_scan(inp, opts, a.repeats);
      csv << row.steps << ',' << row.lanes << ',' << to_string(row.backend) << ','
          << io::detail::format_double(row.ns_per_element) << '\n';
    }
  }
  if (a.out.empty()) {
    std::cout << csv.str();
  } else {
    write_file(a.out, csv.str());
  }
  return kOk;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Flat key=value file: '#' starts a comment, lists are "[a, b]" or
/// whitespace separated. Options given on the command line win.
void apply_config(CLI::App& sub, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": expected key=value");
    }
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    std::string value = trim(line.substr(eq + 1));
    CLI::Option* opt = key.empty() || key == "config" ? nullptr : sub.get_option_no_throw("--" + key);
    if (opt == nullptr) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    if (opt->count() > 0) continue;
    if (!value.empty() && value.front() == '[' && value.back() == ']') {
      value = value.substr(1, value.size() - 2);
      std::replace(value.begin(), value.end(), ',', ' ');
    }
    std::istringstream tokens(value);
    std::vector<std::string> parts;
    for (std::string tok; tokens >> tok;) parts.push_back(tok);
    if (parts.empty()) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": empty value for '" + key + "'");
    }
    try {
      for (const auto& part : parts) opt->add_result(part);
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::string one_line(std::string s) {
  for (char& ch : s) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph state-space models: oracles, layers and a synthetic benchmark harness.", "graphssm"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::simple);

  GenArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "Generate a synthetic temporal-graph task");
  std::string gen_config;
  gen_cmd->add_option("--config", gen_config, "Read key=value options from a file (flags override)");
  gen_cmd->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
  add_task_options(*gen_cmd, gen.task);
  gen_cmd->add_option("--out", gen.out, "Output snapshot-sequence file")->required();
  gen_cmd->add_option("--labels", gen.labels, "Output labels file (default: <out>.labels)");

  verify::VerifyConfig vcfg;
  CLI::App* verify_cmd = app.add_subcommand("verify", "Run the oracle-agreement checks");
  std::string verify_config;
  verify_cmd->add_option("--config", verify_config, "Read key=value options from a file (flags override)");
  verify_cmd->add_option("--seed", vcfg.seed, "Random seed")->capture_default_str();
  verify_cmd->add_option("--instances", vcfg.instances, "Random instances per oracle check")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  verify_cmd->add_option("--schedules", vcfg.schedules, "Random schedules for the weight check")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  verify_cmd->add_option("--alpha", vcfg.alphas, "Balancing constants cycled over instances")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  add_choice(*verify_cmd, "--laplacian", vcfg.laplacian, kLaplacians, "Laplacian kind");
  verify_cmd->add_option("--ode-steps", vcfg.ode_steps, "RK4 steps per unit of integration time")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  verify_cmd->add_option("--quadrature", vcfg.quadrature, "Quadrature intervals of the projection oracle")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  verify_cmd->add_option("--max-nodes", vcfg.max_nodes, "Largest node count")
      ->capture_default_str()
      ->check(CLI::Range(2, 64));
  verify_cmd->add_option("--max-order", vcfg.max_order, "Largest approximation order")
      ->capture_default_str()
      ->check(CLI::Range(1, 64));
  verify_cmd->add_option("--max-mutations", vcfg.max_mutations, "Largest number of mutations")
      ->capture_default_str()
      ->check(CLI::Range(0, 64));

  std::string metrics_input;
  CLI::App* metrics_cmd = app.add_subcommand("metrics", "Print temporal-continuity metrics of a sequence file");
  metrics_cmd->add_option("input", metrics_input, "Snapshot-sequence file")->required();

  RunArgs run;
  run.seeds = {1};
  CLI::App* run_cmd = app.add_subcommand("run", "Train readouts on frozen features and report F1 scores");
  std::string run_config;
  run_cmd->add_option("--config", run_config, "Read key=value options from a file (flags override)");
  run_cmd->add_option("--seed,--seeds", run.seeds, "Seeds, one task and model per seed")->capture_default_str();
  add_task_options(*run_cmd, run.cfg.task);
  add_choice(*run_cmd, "--variant", run.cfg.model.variant, kVariants, "SSM layer variant");
  run_cmd->add_option("--init", run.inits, "State-matrix initializations")
      ->check(CLI::IsMember({"hippo", "const", "random"}).description(""))
      ->type_name("{hippo,const,random}")
      ->capture_default_str();
  add_choice(*run_cmd, "--mechanism", run.cfg.model.mechanism, kMechanisms, "Mixing mechanism of the first block");
  add_choice(*run_cmd, "--mixer", run.cfg.model.mixer, kMixers, "Mixing module");
  run_cmd->add_flag("!--mix-all-blocks", run.cfg.model.mix_first_layer_only,
                    "Apply the mixing mechanism in every block instead of the first only");
  add_choice(*run_cmd, "--gnn", run.cfg.model.flavor, kFlavors, "GNN aggregation");
  run_cmd->add_option("--self-mix", run.cfg.model.self_mix, "Neighbor share in the GNN aggregation")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  add_choice(*run_cmd, "--activation", run.cfg.model.activation, kActivations, "Block activation");
  run_cmd->add_option("--blocks", run.cfg.model.num_blocks, "Number of blocks")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--hidden", run.cfg.model.hidden_dim, "Hidden width")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--state", run.cfg.model.state_dim, "State width")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--lr", run.cfg.readout.lr, "Readout learning rate")->capture_default_str();
  run_cmd->add_option("--epochs", run.cfg.readout.epochs, "Readout epochs")->capture_default_str();
  run_cmd->add_option("--l2", run.cfg.readout.l2, "Readout weight decay")->capture_default_str();
  run_cmd->add_flag("!--no-static", run.cfg.include_static, "Skip the static last-snapshot baseline");
  add_choice(*run_cmd, "--backend", run.cfg.scan.backend, kBackends, "Recurrence backend");
  run_cmd->add_option("--chunk", run.cfg.scan.chunk, "Parallel scan chunk length")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--threads", run.cfg.scan.threads, "Worker threads (0 = auto)")->capture_default_str();
  run_cmd->add_option("--out", run.out, "Results CSV (default: standard output)");
  run_cmd->add_option("--save-params", run.save_params, "Write the first seed's model checkpoint here");

  BenchArgs bench;
  CLI::App* bench_cmd = app.add_subcommand("bench", "Time the recurrence backends over sequence lengths");
  std::string bench_config;
  bench_cmd->add_option("--config", bench_config, "Read key=value options from a file (flags override)");
  bench_cmd->add_option("--seed", bench.seed, "Random seed")->capture_default_str();
  bench_cmd->add_option("--min-log", bench.min_log, "Smallest length as a power of two")->capture_default_str();
  bench_cmd->add_option("--max-log", bench.max_log, "Largest length as a power of two")->capture_default_str();
  bench_cmd->add_option("--lanes", bench.lanes, "Independent recurrence lanes")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--chunk", bench.chunk, "Parallel scan chunk length")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--repeats", bench.repeats, "Timed repetitions (best is kept)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--threads", bench.threads, "Worker threads (0 = auto)")->capture_default_str();
  bench_cmd->add_option("--backend", bench.backends, "Backends to time")
      ->check(CLI::IsMember({"sequential", "parallel"}).description(""))
      ->type_name("{sequential,parallel}")
      ->capture_default_str();
  bench_cmd->add_option("--out", bench.out, "Output CSV (default: standard output)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << one_line(e.what()) << '\n';
    return kUsage;
  }

  try {
    for (auto [cmd, path] : {std::pair{gen_cmd, &gen_config}, std::pair{verify_cmd, &verify_config},
                             std::pair{run_cmd, &run_config}, std::pair{bench_cmd, &bench_config}}) {
      if (*cmd && !path->empty()) apply_config(*cmd, *path);
    }
    if (*gen_cmd) return cmd_gen(gen);
    if (*verify_cmd) return cmd_verify(vcfg);
    if (*metrics_cmd) return cmd_metrics(metrics_input);
    if (*run_cmd) return cmd_run(run);
    if (*bench_cmd) return cmd_bench(bench);
  } catch (const FormatError& e) {
    std::cerr << "error: input: " << one_line(e.what()) << '\n';
    return kUsage;
  } catch (const InvalidInput& e) {
    std::cerr << "error: input: " << one_line(e.what()) << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << one_line(e.what()) << '\n';
    return kCheckFailed;
  }
  return kUsage;
}
