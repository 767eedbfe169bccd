#include "grounding/trainer.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include <json.hpp>

#include "grounding/adam.h"
#include "grounding/errors.h"
#include "grounding/inference.h"
#include "grounding/seeding.h"

namespace grounding {
namespace {

// Sub-generator streams derived from the run seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kOrderStream = 2;
constexpr std::uint64_t kGumbelStream = 3;
constexpr std::uint64_t kProjectionStream = 4;

struct Item {
  std::size_t scene;
  std::size_t query;
  std::size_t triad;
};

ForwardOptions MakeForwardOptions(const TrainConfig &config,
                                  const std::array<Tensor, 3> &projections,
                                  std::mt19937_64 *gumbel) {
  ForwardOptions o;
  o.mode = config.mode;
  o.tau = config.tau;
  o.unit_loss = config.unit_loss;
  o.reconstruct = config.reconstruct;
  o.projections = &projections;
  o.gumbel = config.gumbel ? gumbel : nullptr;
  return o;
}

}  // namespace

TrainResult Train(std::span<const Scene> scenes, const EmbeddingTable &table,
                  const TrainConfig &config, const TrainHooks &hooks) {
  config.Validate();
  std::vector<Item> items;
  std::vector<SceneTensors> tensors;
  tensors.reserve(scenes.size());
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    tensors.push_back(BuildSceneTensors(scenes[s], config.arch));
    for (std::size_t q = 0; q < scenes[s].queries.size(); ++q) {
      const std::size_t m = scenes[s].queries[q].triads.size();
      for (std::size_t k = 0; k < m; ++k) items.push_back({s, q, k});
    }
  }
  if (items.empty()) throw ContractError("training set has no triads");

  TrainResult result;
  result.params = InitParams(config.arch, table, MixSeed(config.seed, kInitStream));
  const std::array<Tensor, 3> projections =
      FeatureProjections(config.arch, MixSeed(config.seed, kProjectionStream));
  std::mt19937_64 order_rng(MixSeed(config.seed, kOrderStream));
  std::mt19937_64 gumbel_rng(MixSeed(config.seed, kGumbelStream));
  const ForwardOptions options = MakeForwardOptions(config, projections, &gumbel_rng);

  std::vector<Tensor *> params = result.params.Tensors();
  std::vector<const Tensor *> const_params(params.begin(), params.end());
  AdamState adam(config.adam, const_params);

  const std::size_t steps_per_epoch = (items.size() + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps =
      config.iterations > 0 ? config.iterations : config.epochs * steps_per_epoch;

  std::vector<std::size_t> order(items.size());
  std::size_t cursor = order.size();
  std::vector<Tensor> grads(params.size());

  for (std::size_t step = 1; step <= total_steps; ++step) {
    for (std::size_t p = 0; p < params.size(); ++p) grads[p] = Tensor(params[p]->shape());
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < config.batch_size; ++b) {
      if (cursor == order.size()) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), order_rng);
        cursor = 0;
      }
      const Item &item = items[order[cursor++]];
      const Scene &scene = scenes[item.scene];
      const DiscriminativeTriad &triad = scene.queries[item.query].triads[item.triad];
      try {
        tensor::Tape tape;
        const ModelVars vars = BindParams(tape, result.params, true);
        const UnitVars units = BindUnits(tape, vars, table, triad);
        Var visual = tape.Constant(tensors[item.scene].visual);
        Var pairs = tape.Constant(tensors[item.scene].pairs);
        const TriadForward fwd = ForwardTriad(tape, vars, units, visual, pairs, options);
        const double loss = fwd.loss.value()[0];
        if (!std::isfinite(loss)) throw NumericError("loss is not finite");
        tape.Backward(fwd.loss);
        for (std::size_t p = 0; p < params.size(); ++p) {
          const Tensor g = tape.grad(vars.all[p]);
          for (std::size_t e = 0; e < g.size(); ++e) grads[p][e] += g[e];
        }
        loss_sum += loss;
      } catch (const NumericError &e) {
        throw TrainingAborted("training aborted at step " + std::to_string(step) + " (" +
                                  scene.scene_id + "/" + scene.queries[item.query].query_id +
                                  "): " + e.what(),
                              result.params, step);
      }
    }
    const double inv = 1.0 / static_cast<double>(config.batch_size);
    for (Tensor &g : grads) {
      for (double &v : g.values()) v *= inv;
    }
    try {
      AdamStep(params, grads, adam);
    } catch (const NumericError &e) {
      throw TrainingAborted("training aborted at step " + std::to_string(step) + ": " +
                                e.what(),
                            result.params, step);
    }
    LogEntry entry{step, loss_sum * inv, config.variant};
    if (hooks.on_step) hooks.on_step(entry);
    result.log.push_back(std::move(entry));
    if (config.checkpoint_every > 0 && step % config.checkpoint_every == 0 &&
        hooks.on_checkpoint) {
      hooks.on_checkpoint(result.params, step);
    }
  }
  return result;
}

double EvaluateTriadLoss(const ModelParams &params, const Scene &scene,
                         const EmbeddingTable &table, const DiscriminativeTriad &triad,
                         const TrainConfig &config) {
  const SceneTensors tensors = BuildSceneTensors(scene, params.arch);
  const std::array<Tensor, 3> projections =
      FeatureProjections(params.arch, MixSeed(config.seed, kProjectionStream));
  ForwardOptions options = MakeForwardOptions(config, projections, nullptr);
  options.gumbel = nullptr;
  tensor::Tape tape;
  const ModelVars vars = BindParams(tape, params, false);
  const UnitVars units = BindUnits(tape, vars, table, triad);
  const TriadForward fwd = ForwardTriad(tape, vars, units, tape.Constant(tensors.visual),
                                        tape.Constant(tensors.pairs), options);
  return fwd.loss.value()[0];
}

void WriteLog(std::ostream &out, std::span<const LogEntry> log) {
  for (const LogEntry &e : log) {
    out << nlohmann::json{{"step", e.step}, {"loss", e.loss}, {"variant", e.variant}}.dump()
        << '\n';
  }
}

TrainConfig VariantConfig(const TrainConfig &base, const std::string &variant) {
  TrainConfig c = base;
  c.variant = variant;
  c.mode = AggregationMode::kHard;
  c.unit_loss = {true, true, true};
  c.reconstruct = true;
  if (variant == "Ours" || variant == "Single") return c;
  if (variant == "Soft") {
    c.mode = AggregationMode::kSoft;
  } else if (variant == "w/o Recon") {
    c.reconstruct = false;
  } else if (variant == "w/o L^t") {
    c.unit_loss[0] = false;
  } else if (variant == "w/o L^r") {
    c.unit_loss[1] = false;
  } else if (variant == "w/o L^d") {
    c.unit_loss[2] = false;
  } else {
    throw ConfigError("unknown ablation variant '" + variant + "'");
  }
  return c;
}

double AblationReport::Mean(const std::string &variant) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const AblationRow &r : rows) {
    if (r.variant != variant) continue;
    sum += r.accuracy;
    ++n;
  }
  if (n == 0) throw DomainError("no ablation rows for variant '" + variant + "'");
  return sum / static_cast<double>(n);
}

AblationReport Ablate(std::span<const Scene> train, std::span<const LabeledScene> test,
                      const EmbeddingTable &table, const TrainConfig &base,
                      const AblationOptions &options) {
  for (const std::string &v : options.variants) VariantConfig(base, v);
  const bool wants_single = std::find(options.variants.begin(), options.variants.end(),
                                      "Single") != options.variants.end();
  AblationReport report;
  auto emit = [&](AblationRow row) {
    if (options.on_row) options.on_row(row);
    report.rows.push_back(std::move(row));
  };
  for (std::uint64_t seed : options.seeds) {
    for (const std::string &variant : options.variants) {
      if (variant == "Single") continue;
      TrainConfig config = VariantConfig(base, variant);
      config.seed = seed;
      const TrainResult trained = Train(train, table, config);
      EvalOptions eval;
      eval.weights = options.weights;
      emit({variant, seed, Evaluate(trained.params, test, table, eval).summary.accuracy()});
      if (variant == "Ours" && wants_single) {
        eval.single_triad = true;
        eval.seed = seed;
        emit({"Single", seed, Evaluate(trained.params, test, table, eval).summary.accuracy()});
      }
    }
    if (wants_single && std::find(options.variants.begin(), options.variants.end(), "Ours") ==
                            options.variants.end()) {
      TrainConfig config = VariantConfig(base, "Single");
      config.seed = seed;
      const TrainResult trained = Train(train, table, config);
      EvalOptions eval;
      eval.weights = options.weights;
      eval.single_triad = true;
      eval.seed = seed;
      emit({"Single", seed, Evaluate(trained.params, test, table, eval).summary.accuracy()});
    }
  }
  return report;
}

void WriteAblation(std::ostream &out, const AblationReport &report,
                   std::span<const std::string> variants) {
  for (const AblationRow &r : report.rows) {
    out << nlohmann::json{{"variant", r.variant}, {"seed", r.seed}, {"accuracy", r.accuracy}}
               .dump()
        << '\n';
  }
  for (const std::string &v : variants) {
    out << nlohmann::json{{"variant", v}, {"mean_accuracy", report.Mean(v)}}.dump() << '\n';
  }
}

}  // namespace grounding
