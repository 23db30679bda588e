// trustsim command-line front end. Every command writes its artifacts into
// --out together with manifest.json (resolved config, seeds, SHA-256 hashes).

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "trustsim/trustsim.hpp"

namespace fs = std::filesystem;
using namespace trustsim;
using ojson = nlohmann::ordered_json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kValidation = 2, kRuntime = 3 };

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorKind::IoError, "sha256 failed");
  std::ostringstream o;
  for (unsigned int i = 0; i < len; ++i) o << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return o.str();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + p.string());
  std::ostringstream o;
  o << in.rdbuf();
  return o.str();
}

nlohmann::json read_json(const fs::path& p) {
  try {
    return nlohmann::json::parse(read_file(p));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::ParseError, p.string() + ": " + e.what());
  }
}

// Collects artifacts written under the run directory.
class RunDir {
 public:
  explicit RunDir(fs::path root) : root_(std::move(root)) {
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec) throw Error(ErrorKind::IoError, "cannot create " + root_.string() + ": " + ec.message());
  }

  void write(const std::string& name, const std::string& bytes) {
    std::ofstream out(root_ / name, std::ios::binary);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + (root_ / name).string());
    out << bytes;
    artifacts_.push_back({{"path", name}, {"bytes", bytes.size()}, {"sha256", sha256_hex(bytes)}});
  }
  void write_json(const std::string& name, const ojson& j) { write(name, j.dump(2) + "\n"); }

  void finish(const std::string& command, ojson config, ojson seeds, ojson inputs) {
    ojson m;
    m["tool"] = "trustsim";
    m["command"] = command;
    m["config"] = std::move(config);
    m["seeds"] = std::move(seeds);
    m["inputs"] = std::move(inputs);
    m["artifacts"] = artifacts_;
    std::ofstream out(root_ / "manifest.json", std::ios::binary);
    out << m.dump(2) << "\n";
  }

 private:
  fs::path root_;
  ojson artifacts_ = ojson::array();
};

ojson input_entry(const fs::path& p) {
  return {{"path", p.string()}, {"sha256", sha256_hex(read_file(p))}};
}

CorpusFormat parse_format_or_throw(const std::string& s) {
  if (auto f = parse_format(s)) return *f;
  throw Error(ErrorKind::InvalidConfig, "unknown format " + s);
}

std::string extension(CorpusFormat f) { return f == CorpusFormat::Jsonl ? ".jsonl" : ".csv"; }

template <class F>
std::string to_bytes(F&& write) {
  std::ostringstream o;
  write(o);
  return o.str();
}

// A fitted model directory as written by `fit`.
struct Model {
  BehaviorTable table;
  TraitDistributions traits;
  LinearTrustClassifier classifier;
  ojson inputs = ojson::array();
};

Model load_model(const fs::path& dir) {
  const fs::path t = dir / "behavior_table.json", d = dir / "trait_distributions.json", c = dir / "trust_classifier.json";
  Model m{behavior_table_from_json(read_json(t)), trait_distributions_from_json(read_json(d)),
          linear_classifier_from_json(read_json(c))};
  m.inputs = {input_entry(t), input_entry(d), input_entry(c)};
  return m;
}

struct Options {
  std::string corpus;
  std::string model;
  std::string simulated;
  std::string mode = "task-step";
  std::string format = "csv";
  std::string score_policy = "clamp";
  std::string out;
  std::uint64_t seed = 0;
  int fallback_threshold = BehaviorTable::kDefaultFallbackThreshold;
  std::size_t dialogs = 308;
  bool no_drift = false;
  double train_fraction = 0.8;
  long long episodes = 5000;
  double score_weight = 0.5;
  double trust_weight = 0.5;
  double alpha = QLearningParams{}.alpha;
  double gamma = QLearningParams{}.gamma;
  double epsilon = QLearningParams{}.epsilon;
};

TableMode mode_or_throw(const std::string& s) {
  if (auto m = parse_mode(s)) return *m;
  throw Error(ErrorKind::InvalidConfig, "unknown mode " + s);
}

SimConfig sim_config(const Options& o) {
  SimConfig c;
  if (o.score_policy == "snap") c.score_policy = ScorePolicy::SnapToOption;
  else if (o.score_policy != "clamp") throw Error(ErrorKind::InvalidConfig, "unknown score policy " + o.score_policy);
  return c;
}

Corpus load_input_corpus(const std::string& path) { return load_corpus(path, format_from_extension(path)); }

void cmd_gen_corpus(const Options& o) {
  GeneratorConfig cfg;
  cfg.dialogs = o.dialogs;
  cfg.behavior.step_drift = !o.no_drift;
  const CorpusFormat fmt = parse_format_or_throw(o.format);
  const auto sc = generate_synthetic_corpus(cfg, o.seed);
  RunDir run(o.out);
  run.write("corpus" + extension(fmt), to_bytes([&](std::ostream& s) { write_corpus(s, sc.corpus, fmt); }));
  run.write_json("generator_config.json", to_json(cfg));
  run.write_json("ground_truth.json", generator_ground_truth(cfg, o.seed));
  run.finish("gen-corpus", {{"dialogs", o.dialogs}, {"step_drift", !o.no_drift}, {"format", o.format}},
             {{"seed", o.seed}}, ojson::array());
}

void cmd_fit(const Options& o) {
  const TableMode mode = mode_or_throw(o.mode);
  const Corpus c = load_input_corpus(o.corpus);
  const auto table = build_table(c, mode, o.fallback_threshold);
  TrainingConfig tc;
  tc.seed = o.seed;
  const auto clf = train_classifier(c, tc);
  const auto summary = table_summary(table);
  ojson js;
  js["mode"] = to_string(summary.mode);
  js["fallback_threshold"] = summary.fallback_threshold;
  js["possible_keys"] = summary.possible_keys;
  js["observed_keys"] = summary.observed_keys;
  js["fallback_keys"] = summary.fallback_keys;
  js["fallback_coverage"] = summary.fallback_coverage;

  RunDir run(o.out);
  run.write_json("behavior_table.json", to_json(table));
  run.write_json("trait_distributions.json", to_json(fit_trait_distributions(c)));
  run.write_json("trust_classifier.json", to_json(clf));
  run.write_json("table_summary.json", js);
  run.write_json("classifier_train_metrics.json", to_json(evaluate_classifier(clf, c)));
  run.finish("fit", {{"mode", o.mode}, {"fallback_threshold", o.fallback_threshold}}, {{"seed", o.seed}},
             ojson::array({input_entry(o.corpus)}));
}

void cmd_simulate(const Options& o) {
  const Model m = load_model(o.model);
  const CorpusFormat fmt = parse_format_or_throw(o.format);
  const SimConfig sc = sim_config(o);
  ojson inputs = m.inputs;
  SimulatedLog log;
  if (!o.corpus.empty()) {
    log = replay_conditions(load_input_corpus(o.corpus), m.table, RandomStream(o.seed), sc);
    inputs.push_back(input_entry(o.corpus));
  } else {
    log = simulate_population(m.table, m.traits, o.dialogs, RandomStream(o.seed), sc);
  }
  RunDir run(o.out);
  run.write("simulated" + extension(fmt), to_bytes([&](std::ostream& s) { write_simulated_log(s, log, fmt); }));
  run.finish("simulate",
             {{"mode", to_string(m.table.mode())}, {"replay", !o.corpus.empty()},
              {"dialogs", log.dialogs.size()}, {"score_policy", o.score_policy}, {"format", o.format},
              {"fallback_rate", fallback_rate(log)}},
             {{"seed", o.seed}}, inputs);
}

void cmd_evaluate(const Options& o) {
  const Corpus ref = load_input_corpus(o.corpus);
  const SimulatedLog log = load_simulated_log(o.simulated, format_from_extension(o.simulated));
  const auto rep = evaluate_simulator(ref, log, o.mode);
  RunDir run(o.out);
  run.write("fidelity.csv", render_csv(rep));
  run.write("fidelity.txt", render_table(rep));
  run.write_json("fidelity.json", to_json(rep));
  run.finish("evaluate", {{"label", o.mode}}, ojson::object(),
             ojson::array({input_entry(o.corpus), input_entry(o.simulated)}));
  std::cout << render_table(rep);
}

void cmd_compare(const Options& o) {
  const Corpus c = load_input_corpus(o.corpus);
  CompareConfig cfg;
  cfg.train_fraction = o.train_fraction;
  cfg.fallback_threshold = o.fallback_threshold;
  cfg.sim = sim_config(o);
  const auto mc = compare_modes(c, o.seed, cfg);
  ojson j;
  j["train_dialogs"] = mc.train_dialogs;
  j["test_dialogs"] = mc.test_dialogs;
  j["complexity"] = to_json(mc.complexity);
  j["task_step"] = to_json(mc.task_step);
  RunDir run(o.out);
  run.write("comparison.csv", render_csv(mc));
  run.write("comparison.txt", render_table(mc));
  run.write_json("comparison.json", j);
  run.finish("compare",
             {{"train_fraction", o.train_fraction}, {"fallback_threshold", o.fallback_threshold},
              {"score_policy", o.score_policy}},
             {{"seed", o.seed}}, ojson::array({input_entry(o.corpus)}));
  std::cout << render_table(mc);
}

void cmd_train_rl(const Options& o) {
  const Model m = load_model(o.model);
  const RewardConfig rc{o.score_weight, o.trust_weight};
  ProactiveDialogEnv env(m.table, m.traits, m.classifier, rc, sim_config(o));
  QLearningParams hp;
  hp.alpha = o.alpha;
  hp.gamma = o.gamma;
  hp.epsilon = o.epsilon;
  hp.seed = o.seed;
  const auto pol = train_tabular_policy(env, o.episodes, hp);

  std::ostringstream returns;
  returns << "episode,return\n";
  for (std::size_t e = 0; e < pol.episode_returns.size(); ++e) returns << e << ',' << pol.episode_returns[e] << '\n';
  std::ostringstream traj;
  const RandomStream eval_rng = RandomStream(o.seed).substream("greedy-rollout");
  for (std::size_t e = 0; e < 5; ++e)
    write_trajectory_jsonl(traj, e, rollout(env, eval_rng.substream(e), [&](const EnvState& s) { return pol.greedy(s); }));

  RunDir run(o.out);
  run.write_json("policy.json", to_json(pol));
  run.write("episode_returns.csv", returns.str());
  run.write("greedy_trajectories.jsonl", traj.str());
  run.finish("train-rl",
             {{"mode", to_string(m.table.mode())}, {"episodes", o.episodes}, {"score_weight", o.score_weight},
              {"trust_weight", o.trust_weight}, {"alpha", o.alpha}, {"gamma", o.gamma}, {"epsilon", o.epsilon}},
             {{"seed", o.seed}}, m.inputs);
}

void print_error(std::string_view kind, const std::string& message, const std::optional<std::string>& field = {},
                 std::optional<std::size_t> row = {}) {
  ojson j;
  j["error"] = kind;
  j["message"] = message;
  if (field) j["field"] = *field;
  if (row) j["row"] = *row;
  std::cerr << j.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Corpus-based, trust-aware user simulator for proactive dialog agents"};
  app.set_config("--config", "", "TOML/INI file with option defaults; command-line flags override it");
  app.require_subcommand(1);
  Options o;

  auto out = [&](CLI::App* s) { s->add_option("--out", o.out, "Run directory")->required(); };
  auto seed = [&](CLI::App* s) { s->add_option("--seed", o.seed, "Root seed")->required(); };
  auto corpus = [&](CLI::App* s) {
    return s->add_option("--corpus", o.corpus, "Corpus file (.csv or .jsonl)")->check(CLI::ExistingFile);
  };
  auto format = [&](CLI::App* s) {
    s->add_option("--format", o.format, "Output format")->check(CLI::IsMember({"csv", "jsonl"}))->capture_default_str();
  };
  auto threshold = [&](CLI::App* s) {
    s->add_option("--fallback-threshold", o.fallback_threshold, "Minimum trait-specific cell size")
        ->capture_default_str();
  };
  auto policy = [&](CLI::App* s) {
    s->add_option("--score-policy", o.score_policy, "Simulated score handling")
        ->check(CLI::IsMember({"clamp", "snap"}))
        ->capture_default_str();
  };
  auto model = [&](CLI::App* s) {
    s->add_option("--model", o.model, "Directory written by `fit`")->required()->check(CLI::ExistingDirectory);
  };

  auto* gen = app.add_subcommand("gen-corpus", "Generate a synthetic annotated corpus");
  seed(gen);
  out(gen);
  format(gen);
  gen->add_option("--dialogs", o.dialogs, "Number of dialogs")->capture_default_str();
  gen->add_flag("--no-drift", o.no_drift, "Disable within-complexity step drift");

  auto* fit = app.add_subcommand("fit", "Build the behavior table, trait model and trust classifier");
  corpus(fit)->required();
  fit->add_option("--mode", o.mode, "Table conditioning")
      ->check(CLI::IsMember({"complexity", "task-step"}))
      ->capture_default_str();
  threshold(fit);
  seed(fit);
  out(fit);

  auto* sim = app.add_subcommand("simulate", "Simulate dialogs from a fitted model");
  model(sim);
  corpus(sim);
  sim->add_option("--dialogs", o.dialogs, "Dialogs to sample when no --corpus is replayed")->capture_default_str();
  seed(sim);
  format(sim);
  policy(sim);
  out(sim);

  auto* ev = app.add_subcommand("evaluate", "Score a simulated log against its reference corpus");
  corpus(ev)->required();
  ev->add_option("--simulated", o.simulated, "Simulated log (.csv or .jsonl)")->required()->check(CLI::ExistingFile);
  ev->add_option("--label", o.mode, "Label for the report")->capture_default_str();
  out(ev);

  auto* cmp = app.add_subcommand("compare", "Compare complexity and task-step conditioning on a held-out split");
  corpus(cmp)->required();
  cmp->add_option("--train-fraction", o.train_fraction, "Share of dialogs used for fitting")->capture_default_str();
  threshold(cmp);
  policy(cmp);
  seed(cmp);
  out(cmp);

  auto* rl = app.add_subcommand("train-rl", "Train a tabular Q-learning agent against the simulator");
  model(rl);
  rl->add_option("--episodes", o.episodes, "Training episodes")->capture_default_str();
  rl->add_option("--score-weight", o.score_weight, "Reward weight of the game score")->capture_default_str();
  rl->add_option("--trust-weight", o.trust_weight, "Reward weight of the predicted trust")->capture_default_str();
  rl->add_option("--alpha", o.alpha, "Learning rate")->capture_default_str();
  rl->add_option("--gamma", o.gamma, "Discount")->capture_default_str();
  rl->add_option("--epsilon", o.epsilon, "Exploration rate")->capture_default_str();
  policy(rl);
  seed(rl);
  out(rl);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("UsageError", e.what());
    return kUsage;
  }

  try {
    if (*gen) cmd_gen_corpus(o);
    else if (*fit) cmd_fit(o);
    else if (*sim) cmd_simulate(o);
    else if (*ev) cmd_evaluate(o);
    else if (*cmp) cmd_compare(o);
    else if (*rl) cmd_train_rl(o);
  } catch (const Error& e) {
    print_error(to_string(e.kind()), e.what(), e.field(), e.row());
    return is_validation_error(e.kind()) ? kValidation : kRuntime;
  } catch (const std::exception& e) {
    print_error("RuntimeError", e.what());
    return kRuntime;
  }
  return kOk;
}
