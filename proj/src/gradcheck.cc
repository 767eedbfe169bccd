#include "grounding/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "grounding/corpus_io.h"
#include "grounding/seeding.h"

namespace grounding {
namespace {

struct Problem {
  Scene scene;
  EmbeddingTable table;
  std::vector<DiscriminativeTriad> triads;
};

Problem MakeProblem(const GradCheckOptions &o) {
  std::mt19937_64 rng(MixSeed(o.seed, 0));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Problem p{Scene{}, EmbeddingTable(o.embedding_dim, MixSeed(o.seed, 1)), {}};
  p.scene.scene_id = "gradcheck";
  p.scene.width = 100;
  p.scene.height = 80;
  for (std::size_t i = 0; i < o.proposals; ++i) {
    Proposal prop;
    prop.box.x_tl = 60 * unit(rng);
    prop.box.y_tl = 50 * unit(rng);
    prop.box.x_br = prop.box.x_tl + 5 + 30 * unit(rng);
    prop.box.y_br = prop.box.y_tl + 5 + 25 * unit(rng);
    prop.spatial = ComputeSpatialFeature(prop.box, p.scene.width, p.scene.height);
    for (std::size_t c = 0; c < o.visual_dim; ++c) prop.visual.push_back(gauss(rng));
    p.scene.proposals.push_back(std::move(prop));
  }
  for (const char *word : {"cat", "table", "on"}) {
    std::vector<double> row(o.embedding_dim);
    for (double &v : row) v = gauss(rng);
    p.table.Set(word, std::move(row));
  }
  p.triads = {{"cat", "table", "on", 1}, {"cat", "cat", "SELF", 2}};
  return p;
}

struct Evaluation {
  double loss = 0.0;
  std::vector<bool> active;  // sign of every ReLU input element
};

Evaluation Evaluate(const ModelParams &params, const Problem &problem,
                    const SceneTensors &tensors, const ForwardOptions &options) {
  tensor::Tape tape;
  const ModelVars vars = BindParams(tape, params, false);
  double total = 0.0;
  for (const DiscriminativeTriad &t : problem.triads) {
    const UnitVars units = BindUnits(tape, vars, problem.table, t);
    total += ForwardTriad(tape, vars, units, tape.Constant(tensors.visual),
                          tape.Constant(tensors.pairs), options)
                 .loss.value()[0];
  }
  Evaluation out{total, {}};
  for (std::size_t id : tape.relu_inputs()) {
    for (double v : tape.value_ref(id).values()) out.active.push_back(v > 0.0);
  }
  return out;
}

}  // namespace

GradCheckResult GradientCheck(const GradCheckOptions &o) {
  const Problem problem = MakeProblem(o);
  Architecture arch;
  arch.visual_dim = o.visual_dim;
  arch.embedding_dim = o.embedding_dim;
  arch.hidden_attention = o.hidden_attention;
  arch.hidden_reconstruction = o.hidden_reconstruction;
  ModelParams params = InitParams(arch, problem.table, MixSeed(o.seed, 2));
  const SceneTensors tensors = BuildSceneTensors(problem.scene, arch);
  ForwardOptions options;
  options.mode = o.mode;
  options.tau = o.tau;

  // Analytic gradient: both triads' losses summed on one tape.
  std::vector<Tensor> analytic;
  {
    tensor::Tape tape;
    const ModelVars vars = BindParams(tape, params, true);
    Var total;
    bool first = true;
    for (const DiscriminativeTriad &t : problem.triads) {
      const UnitVars units = BindUnits(tape, vars, problem.table, t);
      Var loss = ForwardTriad(tape, vars, units, tape.Constant(tensors.visual),
                              tape.Constant(tensors.pairs), options)
                     .loss;
      total = first ? loss : tensor::Add(total, loss);
      first = false;
    }
    tape.Backward(total);
    for (Var v : vars.all) analytic.push_back(tape.grad(v));
  }

  GradCheckResult result;
  const std::vector<std::string> names = ModelParams::TensorNames();
  std::vector<Tensor *> tensors_list = params.Tensors();
  for (std::size_t p = 0; p < tensors_list.size(); ++p) {
    Tensor &t = *tensors_list[p];
    for (std::size_t e = 0; e < t.size(); ++e) {
      const double saved = t[e];
      t[e] = saved + o.step;
      const Evaluation up = Evaluate(params, problem, tensors, options);
      t[e] = saved - o.step;
      const Evaluation down = Evaluate(params, problem, tensors, options);
      t[e] = saved;
      if (up.active != down.active) {
        ++result.skipped_at_kinks;
        continue;
      }
      const double numeric = (up.loss - down.loss) / (2.0 * o.step);
      const double a = analytic[p][e];
      const double abs_err = std::abs(a - numeric);
      const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), o.floor});
      result.max_absolute_error = std::max(result.max_absolute_error, abs_err);
      if (rel > result.max_relative_error || result.checked == 0) {
        result.max_relative_error = rel;
        result.worst = names[p] + "[" + std::to_string(e) + "]";
      }
      ++result.checked;
    }
  }
  return result;
}

}  // namespace grounding
