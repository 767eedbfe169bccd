#include "grounding/cli.h"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "grounding/checkpoint.h"
#include "grounding/config.h"
#include "grounding/corpus_io.h"
#include "grounding/errors.h"
#include "grounding/gradcheck.h"
#include "grounding/inference.h"
#include "grounding/scene.h"
#include "grounding/scene_synth.h"
#include "grounding/trainer.h"
#include "grounding/triad_parser.h"

namespace grounding::cli {
namespace {

namespace fs = std::filesystem;

constexpr const char *kModelFile = "model.ckpt";
constexpr const char *kLogFile = "train.log.jsonl";
constexpr const char *kConfigFile = "config.toml";

std::ifstream OpenInput(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

fs::path CheckpointPath(const std::string &path) {
  if (fs::is_directory(path)) return fs::path(path) / kModelFile;
  return path;
}

EmbeddingTable LoadEmbeddingFile(const std::string &path, std::size_t dimension) {
  std::ifstream in = OpenInput(path);
  return LoadEmbeddings(in, dimension);
}

std::vector<Scene> LoadScenes(const std::string &path) {
  std::ifstream in = OpenInput(path);
  return ReadScenes(in);
}

std::vector<LabeledScene> LoadLabeledScenes(const std::string &path) {
  std::ifstream in = OpenInput(path);
  return ReadLabeledScenes(in);
}

// Config file settings followed by flag overrides, so flags win.
struct ConfigFlags {
  std::string file;
  std::string preset;
  KeyValues overrides;

  void Add(CLI::App *app) {
    app->add_option("--config", file, "key = value configuration file");
    app->add_option("--preset", preset, "desk | paper");
    app->add_option_function<std::vector<std::string>>(
           "--set",
           [this](const std::vector<std::string> &items) {
             for (const std::string &item : items) {
               const auto eq = item.find('=');
               if (eq == std::string::npos) throw ConfigError("--set expects key=value: " + item);
               overrides.emplace_back(item.substr(0, eq), item.substr(eq + 1));
             }
           },
           "override one config key (key=value), repeatable")
        ->take_all();
  }

  void Override(const std::string &key, const std::string &value) {
    overrides.emplace_back(key, value);
  }

  RunConfig Resolve() const {
    KeyValues settings;
    if (!preset.empty()) settings.emplace_back("preset", preset);
    if (!file.empty()) {
      std::ifstream in = OpenInput(file);
      try {
        const KeyValues from_file = ParseKeyValues(in);
        settings.insert(settings.end(), from_file.begin(), from_file.end());
      } catch (const ParseError &e) {
        throw ConfigError(file + ": " + e.what());
      }
    }
    settings.insert(settings.end(), overrides.begin(), overrides.end());
    return ResolveConfig(settings);
  }
};

template <typename T>
void OverrideIfSet(ConfigFlags &flags, const CLI::Option *opt, const std::string &key,
                   const T &value) {
  if (opt->count() == 0) return;
  std::ostringstream text;
  text << std::setprecision(17) << value;
  flags.Override(key, text.str());
}

int CmdParse(const std::string &in_path, const std::string &out_path, std::ostream &out) {
  std::ifstream in = OpenInput(in_path);
  const std::vector<DependencyParse> parses = ReadParses(in);
  std::vector<ParsedQuery> queries;
  queries.reserve(parses.size());
  std::size_t triads = 0;
  for (const DependencyParse &p : parses) {
    queries.push_back(ExtractTriads(p));
    triads += queries.back().triads.size();
  }
  std::ostringstream text;
  WriteTriads(text, queries);
  if (out_path.empty() || out_path == "-") {
    out << text.str();
  } else {
    WriteFileAtomically(out_path, text.str());
    out << queries.size() << " queries, " << triads << " triads\n";
  }
  return 0;
}

struct GenFlags {
  std::string out;
  std::string embeddings_out;
  std::size_t count = 500;
  std::uint64_t seed = 1;
  std::uint64_t embedding_seed = 7;
  std::size_t embedding_dim = 16;
  SceneConfig scene;
};

int CmdGenScenes(const GenFlags &f, std::ostream &out) {
  const SceneVocabulary vocab = SceneVocabulary::Default();
  const std::vector<LabeledScene> scenes = GenerateScenes(vocab, f.scene, f.count, f.seed);
  std::ostringstream text;
  WriteScenes(text, scenes);
  WriteFileAtomically(f.out, text.str());
  std::size_t queries = 0;
  for (const LabeledScene &s : scenes) queries += s.scene.queries.size();
  out << scenes.size() << " scenes, " << queries << " queries -> " << f.out << '\n';
  if (!f.embeddings_out.empty()) {
    std::ostringstream emb;
    WriteEmbeddings(emb, SyntheticEmbeddings(vocab, f.embedding_dim, f.embedding_seed));
    WriteFileAtomically(f.embeddings_out, emb.str());
    out << "embeddings (" << f.embedding_dim << "-d) -> " << f.embeddings_out << '\n';
  }
  return 0;
}

struct TrainFlags {
  std::string scenes;
  std::string embeddings;
  std::string out;
  std::string variant;
  ConfigFlags config;
};

int CmdTrain(const TrainFlags &f, std::ostream &out) {
  const RunConfig run = f.config.Resolve();
  const TrainConfig config = f.variant.empty() ? run.train : VariantConfig(run.train, f.variant);
  const EmbeddingTable table = LoadEmbeddingFile(f.embeddings, config.arch.embedding_dim);
  const std::vector<Scene> scenes = LoadScenes(f.scenes);
  fs::create_directories(f.out);
  const fs::path dir(f.out);

  TrainHooks hooks;
  hooks.on_checkpoint = [&](const ModelParams &params, std::size_t step) {
    SaveCheckpoint(params, dir / ("step-" + std::to_string(step) + ".ckpt"));
  };
  TrainResult result;
  try {
    result = Train(scenes, table, config, hooks);
  } catch (const TrainingAborted &e) {
    SaveCheckpoint(e.last_good(), dir / "last-good.ckpt");
    throw;
  }
  SaveCheckpoint(result.params, dir / kModelFile);
  std::ostringstream log;
  WriteLog(log, result.log);
  WriteFileAtomically(dir / kLogFile, log.str());
  RunConfig effective = run;
  effective.train = config;
  WriteFileAtomically(dir / kConfigFile, FormatConfig(effective));

  const std::size_t tail = std::min<std::size_t>(result.log.size(), 100);
  double recent = 0.0;
  for (std::size_t k = result.log.size() - tail; k < result.log.size(); ++k) {
    recent += result.log[k].loss;
  }
  out << result.log.size() << " steps, mean loss of last " << tail << ": "
      << (tail > 0 ? recent / static_cast<double>(tail) : 0.0) << " -> "
      << (dir / kModelFile).string() << '\n';
  return 0;
}

struct EvalFlags {
  std::string scenes;
  std::string embeddings;
  std::string ckpt;
  std::string report;
  bool single = false;
  std::uint64_t seed = 0;
  ScoreWeights weights;
};

int CmdEval(const EvalFlags &f, std::ostream &out) {
  const ModelParams params = LoadCheckpoint(CheckpointPath(f.ckpt));
  const EmbeddingTable table = LoadEmbeddingFile(f.embeddings, params.arch.embedding_dim);
  const std::vector<LabeledScene> scenes = LoadLabeledScenes(f.scenes);
  EvalOptions options;
  options.weights = f.weights;
  options.single_triad = f.single;
  options.seed = f.seed;
  const EvalReport report = Evaluate(params, scenes, table, options);
  if (!f.report.empty()) {
    std::ostringstream text;
    WriteReport(text, report);
    WriteFileAtomically(f.report, text.str());
  }
  out << "accuracy " << report.summary.accuracy() << " (" << report.summary.correct << "/"
      << report.summary.queries << ")\n";
  return 0;
}

struct GroundFlags {
  std::string scenes;
  std::string embeddings;
  std::string ckpt;
  std::string scene_id;
  std::string query_id;
  ScoreWeights weights;
};

int CmdGround(const GroundFlags &f, std::ostream &out) {
  const ModelParams params = LoadCheckpoint(CheckpointPath(f.ckpt));
  const EmbeddingTable table = LoadEmbeddingFile(f.embeddings, params.arch.embedding_dim);
  const std::vector<Scene> scenes = LoadScenes(f.scenes);
  const Scene *scene = nullptr;
  for (const Scene &s : scenes) {
    if (s.scene_id == f.scene_id) scene = &s;
  }
  if (scene == nullptr) throw DomainError("no scene '" + f.scene_id + "' in " + f.scenes);
  const ParsedQuery *query = nullptr;
  for (const ParsedQuery &q : scene->queries) {
    if (q.query_id == f.query_id) query = &q;
  }
  if (query == nullptr) {
    throw DomainError("no query '" + f.query_id + "' in scene '" + f.scene_id + "'");
  }
  const SceneTensors tensors = BuildSceneTensors(*scene, params.arch);
  const Grounding g = Ground(params, tensors, table, query->triads, f.weights);
  const Box &box = scene->proposals[g.chosen].box;
  out << "chosen " << g.chosen << " box " << box.x_tl << ' ' << box.y_tl << ' ' << box.x_br
      << ' ' << box.y_br << " score " << g.scores[g.chosen] << '\n';
  out << "proposal";
  for (const DiscriminativeTriad &t : query->triads) {
    out << "\t(" << t.target << "," << t.reference << "," << t.discriminative << ")";
  }
  out << "\ttotal\n";
  for (std::size_t i = 0; i < g.scores.size(); ++i) {
    out << i;
    for (const std::vector<double> &row : g.per_triad) out << '\t' << row[i];
    out << '\t' << g.scores[i] << (i == g.chosen ? "\t*" : "") << '\n';
  }
  out << "references";
  for (std::size_t r : g.chosen_references) out << '\t' << r;
  out << '\n';
  return 0;
}

struct AblateFlags {
  std::string train_scenes;
  std::string test_scenes;
  std::string embeddings;
  std::string out;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::vector<std::string> variants;
  ConfigFlags config;
};

int CmdAblate(const AblateFlags &f, std::ostream &out) {
  const RunConfig run = f.config.Resolve();
  const EmbeddingTable table = LoadEmbeddingFile(f.embeddings, run.train.arch.embedding_dim);
  const std::vector<Scene> train = LoadScenes(f.train_scenes);
  const std::vector<LabeledScene> test = LoadLabeledScenes(f.test_scenes);
  AblationOptions options;
  if (!f.variants.empty()) options.variants = f.variants;
  options.seeds = f.seeds;
  options.weights = run.weights;
  options.on_row = [&](const AblationRow &row) {
    out << row.variant << " seed " << row.seed << " accuracy " << row.accuracy << '\n';
    out.flush();
  };
  const AblationReport report = Ablate(train, test, table, run.train, options);
  std::ostringstream text;
  WriteAblation(text, report, options.variants);
  if (f.out.empty()) {
    out << text.str();
  } else {
    WriteFileAtomically(f.out, text.str());
  }
  return 0;
}

int CmdGradcheck(std::uint64_t seed, const std::string &mode, std::ostream &out) {
  std::vector<AggregationMode> modes;
  if (mode == "both") {
    modes = {AggregationMode::kSoft, AggregationMode::kHard};
  } else {
    modes = {ParseAggregationMode(mode)};
  }
  double worst = 0.0;
  for (AggregationMode m : modes) {
    GradCheckOptions options;
    options.seed = seed;
    options.mode = m;
    const GradCheckResult r = GradientCheck(options);
    out << ToString(m) << ": max relative error " << r.max_relative_error << " at " << r.worst
        << ", " << r.checked << " coordinates, " << r.skipped_at_kinks << " at kinks\n";
    worst = std::max(worst, r.max_relative_error);
  }
  out << "max relative error " << worst << '\n';
  return 0;
}

std::string VersionText() {
  return std::string("grounding ") + kEngineVersion + " (checkpoint format " +
         std::to_string(kCheckpointVersion) + ", scenes format " +
         std::to_string(kScenesFormatVersion) + ")";
}

}  // namespace

int Run(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
  CLI::App app{"Weakly supervised referring expression grounding", "grounding"};
  app.set_version_flag("--version", VersionText());
  app.require_subcommand(1);

  std::string parse_in, parse_out;
  CLI::App *parse = app.add_subcommand("parse", "extract triads from CoNLL-U parses");
  parse->add_option("--in", parse_in, "CoNLL-U input")->required();
  parse->add_option("--out", parse_out, "triad TSV output (stdout when omitted)");

  GenFlags gen;
  CLI::App *gen_cmd = app.add_subcommand("gen-scenes", "generate synthetic labeled scenes");
  gen_cmd->add_option("--out", gen.out, "scene JSON-lines output")->required();
  gen_cmd->add_option("--count", gen.count, "number of scenes")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "generator seed")->capture_default_str();
  gen_cmd->add_option("--proposals", gen.scene.num_proposals, "proposals per scene")
      ->capture_default_str();
  gen_cmd->add_option("--d-v", gen.scene.visual_dim, "visual feature width")
      ->capture_default_str();
  gen_cmd->add_option("--noise", gen.scene.noise, "feature noise sigma")->capture_default_str();
  gen_cmd->add_option("--queries", gen.scene.queries_per_scene, "queries per scene")
      ->capture_default_str();
  gen_cmd->add_option("--embeddings-out", gen.embeddings_out,
                      "also write synthetic embeddings for the vocabulary");
  gen_cmd->add_option("--d-l", gen.embedding_dim, "embedding width")->capture_default_str();
  gen_cmd->add_option("--embedding-seed", gen.embedding_seed, "embedding seed")
      ->capture_default_str();

  TrainFlags train;
  std::uint64_t train_seed = 0;
  std::size_t train_epochs = 0;
  std::string train_mode;
  CLI::App *train_cmd = app.add_subcommand("train", "train a model without grounding labels");
  train_cmd->add_option("--scenes", train.scenes, "scene JSON-lines")->required();
  train_cmd->add_option("--emb", train.embeddings, "embedding text file")->required();
  train_cmd->add_option("--out", train.out, "output directory")->required();
  train_cmd->add_option("--variant", train.variant,
                        "train as an ablation variant instead of the configured model");
  train.config.Add(train_cmd);
  const CLI::Option *train_seed_opt = train_cmd->add_option("--seed", train_seed, "training seed");
  const CLI::Option *train_epochs_opt = train_cmd->add_option("--epochs", train_epochs, "epochs");
  const CLI::Option *train_mode_opt = train_cmd->add_option("--mode", train_mode, "soft | hard");

  EvalFlags eval;
  CLI::App *eval_cmd = app.add_subcommand("eval", "accuracy on labeled scenes");
  eval_cmd->add_option("--scenes", eval.scenes, "labeled scene JSON-lines")->required();
  eval_cmd->add_option("--emb", eval.embeddings, "embedding text file")->required();
  eval_cmd->add_option("--ckpt", eval.ckpt, "checkpoint file or training directory")
      ->required();
  eval_cmd->add_option("--report", eval.report, "per-query JSON-lines report");
  eval_cmd->add_flag("--single", eval.single, "score each query with one random triad");
  eval_cmd->add_option("--seed", eval.seed, "seed for --single")->capture_default_str();
  eval_cmd->add_option("--alpha", eval.weights.alpha)->capture_default_str();
  eval_cmd->add_option("--beta", eval.weights.beta)->capture_default_str();
  eval_cmd->add_option("--gamma", eval.weights.gamma)->capture_default_str();

  GroundFlags ground;
  CLI::App *ground_cmd = app.add_subcommand("ground", "ground one query and print the scores");
  ground_cmd->add_option("--scene", ground.scenes, "scene JSON-lines")->required();
  ground_cmd->add_option("--scene-id", ground.scene_id, "scene to use")->required();
  ground_cmd->add_option("--query-id", ground.query_id, "query within the scene")->required();
  ground_cmd->add_option("--emb", ground.embeddings, "embedding text file")->required();
  ground_cmd->add_option("--ckpt", ground.ckpt, "checkpoint file or training directory")
      ->required();
  ground_cmd->add_option("--alpha", ground.weights.alpha)->capture_default_str();
  ground_cmd->add_option("--beta", ground.weights.beta)->capture_default_str();
  ground_cmd->add_option("--gamma", ground.weights.gamma)->capture_default_str();

  AblateFlags ablate;
  CLI::App *ablate_cmd = app.add_subcommand("ablate", "train and evaluate every variant");
  ablate_cmd->add_option("--train-scenes", ablate.train_scenes, "training scenes")->required();
  ablate_cmd->add_option("--test-scenes", ablate.test_scenes, "labeled held-out scenes")
      ->required();
  ablate_cmd->add_option("--emb", ablate.embeddings, "embedding text file")->required();
  ablate_cmd->add_option("--out", ablate.out, "TSV table (stdout when omitted)");
  ablate_cmd->add_option("--seeds", ablate.seeds, "training seeds")->delimiter(',');
  ablate_cmd->add_option("--variants", ablate.variants, "subset of variants")->delimiter(',');
  ablate.config.Add(ablate_cmd);

  std::uint64_t grad_seed = 1;
  std::string grad_mode = "both";
  CLI::App *grad_cmd = app.add_subcommand("gradcheck", "finite-difference gradient check");
  grad_cmd->add_option("--seed", grad_seed, "problem seed")->capture_default_str();
  grad_cmd->add_option("--mode", grad_mode, "soft | hard | both")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion &e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError &e) {
    err << "error: " << e.what() << '\n' << app.help();
    return e.get_exit_code() != 0 ? e.get_exit_code() : 1;
  } catch (const ConfigError &e) {
    err << "error: " << e.what() << '\n';
    return kExitBadConfig;
  }

  try {
    if (parse->parsed()) return CmdParse(parse_in, parse_out, out);
    if (gen_cmd->parsed()) return CmdGenScenes(gen, out);
    if (train_cmd->parsed()) {
      OverrideIfSet(train.config, train_seed_opt, "seed", train_seed);
      OverrideIfSet(train.config, train_epochs_opt, "epochs", train_epochs);
      OverrideIfSet(train.config, train_mode_opt, "mode", train_mode);
      return CmdTrain(train, out);
    }
    if (eval_cmd->parsed()) return CmdEval(eval, out);
    if (ground_cmd->parsed()) return CmdGround(ground, out);
    if (ablate_cmd->parsed()) return CmdAblate(ablate, out);
    if (grad_cmd->parsed()) return CmdGradcheck(grad_seed, grad_mode, out);
  } catch (const IoError &e) {
    err << "error: " << e.what() << '\n';
    return kExitMissingFile;
  } catch (const ConfigError &e) {
    err << "error: " << e.what() << '\n';
    return kExitBadConfig;
  } catch (const InvariantError &e) {
    err << "error: invariant breach: " << e.what() << '\n';
    return kExitInvariant;
  } catch (const ContractError &e) {
    err << "error: invariant breach: " << e.what() << '\n';
    return kExitInvariant;
  } catch (const ShapeError &e) {
    err << "error: invariant breach: " << e.what() << '\n';
    return kExitInvariant;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  err << app.help();
  return 1;
}

}  // namespace grounding::cli
