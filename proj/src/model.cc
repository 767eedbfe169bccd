#include "grounding/model.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>

#include "grounding/errors.h"

namespace grounding {
namespace {

constexpr const char *kUnitNames[3] = {"target", "reference", "discriminative"};

std::size_t SpecialRow(std::string_view word) {
  if (word == EmbeddingTable::kSelf) return 0;
  if (word == EmbeddingTable::kUnknown) return 1;
  return 2;
}

Tensor UniformTensor(tensor::Shape shape, double bound, std::mt19937_64 &rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double &v : t.values()) v = dist(rng);
  return t;
}

Mlp InitMlp(std::size_t in, std::size_t hidden, std::size_t out, std::mt19937_64 &rng) {
  const double b1 = 1.0 / std::sqrt(static_cast<double>(in));
  const double b2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  Mlp m;
  m.w1 = UniformTensor({in, hidden}, b1, rng);
  m.b1 = UniformTensor({1, hidden}, b1, rng);
  m.w2 = UniformTensor({hidden, out}, b2, rng);
  m.b2 = UniformTensor({1, out}, b2, rng);
  return m;
}

void CheckMlp(const Mlp &m, std::size_t in, std::size_t hidden, std::size_t out,
              const std::string &name) {
  auto check = [&](const Tensor &t, tensor::Shape want, const char *part) {
    if (t.shape() != want) {
      throw ShapeError(name + "." + part + ": expected " + tensor::ShapeString(want) +
                       ", got " + tensor::ShapeString(t.shape()));
    }
    if (!t.AllFinite()) throw NumericError(name + "." + part + ": non-finite value");
  };
  check(m.w1, {in, hidden}, "w1");
  check(m.b1, {1, hidden}, "b1");
  check(m.w2, {hidden, out}, "w2");
  check(m.b2, {1, out}, "b2");
}

std::vector<double> DenseLayer(std::span<const double> in, const Tensor &w, const Tensor &b,
                               bool relu) {
  if (in.size() != w.rows()) {
    throw ShapeError("dense layer: input of length " + std::to_string(in.size()) +
                     " for weights " + tensor::ShapeString(w.shape()));
  }
  std::vector<double> out(b.values().begin(), b.values().end());
  for (std::size_t p = 0; p < in.size(); ++p) {
    if (in[p] == 0.0) continue;
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += in[p] * w.at(p, j);
  }
  if (relu) {
    for (double &v : out) v = std::max(v, 0.0);
  }
  return out;
}

std::vector<double> PlainMlp(std::span<const double> in, const Mlp &theta) {
  const std::vector<double> h = DenseLayer(in, theta.w1, theta.b1, true);
  return DenseLayer(h, theta.w2, theta.b2, false);
}

double PlainAttention(std::span<const double> feature, std::span<const double> unit,
                      const Mlp &theta) {
  std::vector<double> x;
  x.reserve(feature.size() + unit.size());
  for (double v : feature) x.push_back(std::max(v, 0.0));
  for (double v : unit) x.push_back(std::max(v, 0.0));
  const std::vector<double> out = PlainMlp(x, theta);
  if (out.size() != 1) throw ShapeError("attention head must produce one score");
  return out[0];
}

void NormalizeRow(std::vector<double> &row) {
  double s = 0.0;
  for (double v : row) s += v * v;
  if (s <= 0.0) return;
  const double inv = 1.0 / std::sqrt(s);
  for (double &v : row) v *= inv;
}

double Temperature(AggregationMode mode, double tau) {
  if (mode == AggregationMode::kSoft) return 1.0;
  if (!(tau > 0.0)) throw DomainError("temperature must be positive");
  return tau;
}

MlpVars BindMlp(tensor::Tape &tape, const Mlp &m, bool trainable, std::vector<Var> &all) {
  auto bind = [&](const Tensor &t) {
    Var v = trainable ? tape.Parameter(t) : tape.Constant(t);
    all.push_back(v);
    return v;
  };
  MlpVars out;
  out.w1 = bind(m.w1);
  out.b1 = bind(m.b1);
  out.w2 = bind(m.w2);
  out.b2 = bind(m.b2);
  return out;
}

}  // namespace

std::string ToString(AggregationMode mode) {
  return mode == AggregationMode::kSoft ? "soft" : "hard";
}

AggregationMode ParseAggregationMode(const std::string &text) {
  if (text == "soft") return AggregationMode::kSoft;
  if (text == "hard") return AggregationMode::kHard;
  throw ConfigError("unknown aggregation mode '" + text + "' (expected soft or hard)");
}

void Architecture::Validate() const {
  if (visual_dim == 0 || embedding_dim == 0 || hidden_attention == 0 ||
      hidden_reconstruction == 0) {
    throw ConfigError("architecture sizes must be positive");
  }
}

std::vector<Tensor *> ModelParams::Tensors() {
  std::vector<Tensor *> out;
  for (Mlp &m : attention) out.insert(out.end(), {&m.w1, &m.b1, &m.w2, &m.b2});
  for (Mlp &m : reconstruction) out.insert(out.end(), {&m.w1, &m.b1, &m.w2, &m.b2});
  out.push_back(&special_rows);
  return out;
}

std::vector<const Tensor *> ModelParams::Tensors() const {
  std::vector<const Tensor *> out;
  for (const Mlp &m : attention) out.insert(out.end(), {&m.w1, &m.b1, &m.w2, &m.b2});
  for (const Mlp &m : reconstruction) out.insert(out.end(), {&m.w1, &m.b1, &m.w2, &m.b2});
  out.push_back(&special_rows);
  return out;
}

std::vector<std::string> ModelParams::TensorNames() {
  std::vector<std::string> out;
  for (const char *group : {"attend", "rebuild"}) {
    for (const char *unit : kUnitNames) {
      for (const char *part : {"w1", "b1", "w2", "b2"}) {
        out.push_back(std::string(group) + "." + unit + "." + part);
      }
    }
  }
  out.push_back("special_rows");
  return out;
}

std::size_t ModelParams::ParameterCount() const {
  std::size_t n = 0;
  for (const Tensor *t : Tensors()) n += t->size();
  return n;
}

ModelParams InitParams(const Architecture &arch, const EmbeddingTable &table,
                       std::uint64_t seed) {
  arch.Validate();
  if (table.dimension() != arch.embedding_dim) {
    throw ShapeError("embedding table has dimension " + std::to_string(table.dimension()) +
                     ", architecture expects " + std::to_string(arch.embedding_dim));
  }
  std::mt19937_64 rng(seed);
  ModelParams p;
  p.arch = arch;
  for (Unit u : kUnits) {
    p.attention[static_cast<int>(u)] =
        InitMlp(arch.input_dim(u) + arch.embedding_dim, arch.hidden_attention, 1, rng);
  }
  for (Unit u : kUnits) {
    p.reconstruction[static_cast<int>(u)] =
        InitMlp(arch.input_dim(u), arch.hidden_reconstruction, arch.embedding_dim, rng);
  }
  p.special_rows = Tensor({3, arch.embedding_dim});
  const std::string_view specials[3] = {EmbeddingTable::kSelf, EmbeddingTable::kUnknown,
                                        EmbeddingTable::kOov};
  for (std::size_t r = 0; r < 3; ++r) {
    std::span<const double> row = table.Lookup(specials[r]);
    for (std::size_t c = 0; c < arch.embedding_dim; ++c) p.special_rows.at(r, c) = row[c];
  }
  return p;
}

void ValidateParams(const ModelParams &params) {
  const Architecture &a = params.arch;
  a.Validate();
  for (Unit u : kUnits) {
    const int k = static_cast<int>(u);
    CheckMlp(params.attention[k], a.input_dim(u) + a.embedding_dim, a.hidden_attention, 1,
             std::string("attend.") + kUnitNames[k]);
    CheckMlp(params.reconstruction[k], a.input_dim(u), a.hidden_reconstruction,
             a.embedding_dim, std::string("rebuild.") + kUnitNames[k]);
  }
  if (params.special_rows.shape() != tensor::Shape{3, a.embedding_dim}) {
    throw ShapeError("special_rows: expected " +
                     tensor::ShapeString({3, a.embedding_dim}) + ", got " +
                     tensor::ShapeString(params.special_rows.shape()));
  }
  if (!params.special_rows.AllFinite()) throw NumericError("special_rows: non-finite value");
}

SceneTensors BuildSceneTensors(const Scene &scene, const Architecture &arch) {
  ValidateScene(scene);
  const std::size_t n = scene.proposals.size();
  const std::size_t dv = arch.visual_dim;
  if (scene.visual_dim() != dv) {
    throw ShapeError("scene " + scene.scene_id + " has visual features of length " +
                     std::to_string(scene.visual_dim()) + ", model expects " +
                     std::to_string(dv));
  }
  std::vector<std::vector<double>> visual(n);
  for (std::size_t i = 0; i < n; ++i) {
    visual[i] = scene.proposals[i].visual;
    if (arch.normalize_visual) NormalizeRow(visual[i]);
  }
  SceneTensors out;
  out.count = n;
  out.visual = Tensor({n, dv});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < dv; ++c) out.visual.at(i, c) = visual[i][c];
  }
  const std::size_t width = arch.pair_dim();
  out.pairs = Tensor({n * n, width});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double *row = &out.pairs.at(i * n + j, 0);
      std::size_t c = 0;
      for (double v : visual[i]) row[c++] = v;
      for (double v : scene.proposals[i].spatial) row[c++] = v;
      for (double v : visual[j]) row[c++] = v;
      for (double v : scene.proposals[j].spatial) row[c++] = v;
    }
  }
  return out;
}

double TargetAttention(std::span<const double> visual, std::span<const double> unit,
                       const Mlp &theta) {
  return PlainAttention(visual, unit, theta);
}

double ReferenceAttention(std::span<const double> visual, std::span<const double> unit,
                          const Mlp &theta) {
  return PlainAttention(visual, unit, theta);
}

double DiscriminativeAttention(std::span<const double> pair, std::span<const double> unit,
                               const Mlp &theta) {
  return PlainAttention(pair, unit, theta);
}

std::vector<double> AggregationWeights(std::span<const double> scores,
                                       AggregationMode mode, double tau) {
  return tensor::SoftmaxValues(scores, Temperature(mode, tau));
}

std::vector<double> AggregateFeatures(std::span<const double> scores, const Tensor &features,
                                      AggregationMode mode, double tau) {
  if (scores.size() != features.rows()) {
    throw ShapeError("aggregate: " + std::to_string(scores.size()) + " scores for " +
                     std::to_string(features.rows()) + " feature rows");
  }
  const std::vector<double> w = AggregationWeights(scores, mode, tau);
  std::vector<double> out(features.cols(), 0.0);
  for (std::size_t r = 0; r < w.size(); ++r) {
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += w[r] * features.at(r, c);
  }
  return out;
}

std::vector<double> Reconstruct(std::span<const double> feature, const Mlp &theta) {
  return PlainMlp(feature, theta);
}

double TriadLoss(const UnitEmbeddings &rebuilt, const UnitEmbeddings &original) {
  auto dist = [](const std::vector<double> &a, const std::vector<double> &b) {
    if (a.size() != b.size()) throw ShapeError("triad loss: embedding length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
  };
  return dist(rebuilt.target, original.target) +
         dist(rebuilt.reference, original.reference) +
         dist(rebuilt.discriminative, original.discriminative);
}

ModelVars BindParams(tensor::Tape &tape, const ModelParams &params, bool trainable) {
  ModelVars vars;
  for (int k = 0; k < 3; ++k) {
    vars.attention[k] = BindMlp(tape, params.attention[k], trainable, vars.all);
  }
  for (int k = 0; k < 3; ++k) {
    vars.reconstruction[k] = BindMlp(tape, params.reconstruction[k], trainable, vars.all);
  }
  vars.special_rows =
      trainable ? tape.Parameter(params.special_rows) : tape.Constant(params.special_rows);
  vars.all.push_back(vars.special_rows);
  return vars;
}

UnitVars BindUnits(tensor::Tape &tape, const ModelVars &vars, const EmbeddingTable &table,
                   const DiscriminativeTriad &triad) {
  auto bind = [&](const std::string &word) {
    if (EmbeddingTable::IsSpecial(word) || !table.contains(word)) {
      return tensor::SelectRow(vars.special_rows, SpecialRow(word));
    }
    std::span<const double> row = table.Lookup(word);
    return tape.Constant(Tensor::Row({row.begin(), row.end()}));
  };
  UnitVars u;
  u.embedding[0] = bind(triad.target);
  u.embedding[1] = bind(triad.reference);
  u.embedding[2] = bind(triad.discriminative);
  return u;
}

Var ApplyMlp(const MlpVars &theta, Var input) {
  Var h = tensor::Relu(tensor::AddBias(tensor::MatMul(input, theta.w1), theta.b1));
  return tensor::AddBias(tensor::MatMul(h, theta.w2), theta.b2);
}

Var AttentionScores(const MlpVars &theta, Var features, Var unit) {
  const std::size_t rows = features.value().rows();
  Var x = tensor::Relu(tensor::ConcatCols(features, tensor::RepeatRows(unit, rows)));
  return ApplyMlp(theta, x);
}

Var Aggregate(Var scores, Var features, double temperature) {
  const std::size_t rows = scores.value().size();
  Var w = tensor::Reshape(tensor::Softmax(scores, temperature), {1, rows});
  return tensor::MatMul(w, features);
}

TriadForward ForwardTriad(tensor::Tape &tape, const ModelVars &vars, const UnitVars &units,
                          Var visual, Var pairs, const ForwardOptions &options) {
  const double temperature = Temperature(options.mode, options.tau);
  if (!options.reconstruct && options.projections == nullptr) {
    throw ContractError("forward without reconstruction needs feature projections");
  }
  TriadForward out;
  bool any = false;
  for (int k = 0; k < 3; ++k) {
    Var features = k == 2 ? pairs : visual;
    Var scores = AttentionScores(vars.attention[k], features, units.embedding[k]);
    out.scores[k] = scores;
    Var noisy = scores;
    if (options.mode == AggregationMode::kHard && options.gumbel != nullptr) {
      std::uniform_real_distribution<double> uniform(0.0, 1.0);
      Tensor noise(scores.value().shape());
      for (double &g : noise.values()) {
        double u = uniform(*options.gumbel);
        u = std::min(std::max(u, 1e-12), 1.0 - 1e-12);
        g = -std::log(-std::log(u));
      }
      noisy = tensor::Add(scores, tape.Constant(std::move(noise)));
    }
    out.aggregated[k] = Aggregate(noisy, features, temperature);
    out.rebuilt[k] = options.reconstruct
                         ? ApplyMlp(vars.reconstruction[k], out.aggregated[k])
                         : tensor::MatMul(out.aggregated[k],
                                          tape.Constant((*options.projections)[k]));
    if (!options.unit_loss[k]) continue;
    Var term = tensor::L2Sq(out.rebuilt[k], units.embedding[k]);
    out.loss = any ? tensor::Add(out.loss, term) : term;
    any = true;
  }
  if (!any) throw ConfigError("at least one unit loss must be enabled");
  return out;
}

std::array<Tensor, 3> FeatureProjections(const Architecture &arch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::array<Tensor, 3> out;
  for (Unit u : kUnits) {
    const std::size_t width = arch.input_dim(u);
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(width)));
    Tensor t({width, arch.embedding_dim});
    for (double &v : t.values()) v = dist(rng);
    out[static_cast<int>(u)] = std::move(t);
  }
  return out;
}

AttentionTensors ScoreTriad(const ModelParams &params, const SceneTensors &scene,
                            const EmbeddingTable &table, const DiscriminativeTriad &triad) {
  tensor::Tape tape;
  const ModelVars vars = BindParams(tape, params, false);
  const UnitVars units = BindUnits(tape, vars, table, triad);
  Var visual = tape.Constant(scene.visual);
  Var pairs = tape.Constant(scene.pairs);
  AttentionTensors out;
  const Tensor t = AttentionScores(vars.attention[0], visual, units.embedding[0]).value();
  const Tensor r = AttentionScores(vars.attention[1], visual, units.embedding[1]).value();
  const Tensor d = AttentionScores(vars.attention[2], pairs, units.embedding[2]).value();
  out.target.assign(t.values().begin(), t.values().end());
  out.reference.assign(r.values().begin(), r.values().end());
  out.discriminative = Tensor({scene.count, scene.count}, d.data());
  return out;
}

}  // namespace grounding
