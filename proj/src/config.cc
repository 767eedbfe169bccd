#include "grounding/config.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include "grounding/errors.h"

namespace grounding {
namespace {

std::string Trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string Unquote(const std::string &s) {
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

double ToDouble(const std::string &key, const std::string &value) {
  double out = 0.0;
  const char *end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out)) {
    throw ConfigError(key + ": expected a number, got '" + value + "'");
  }
  return out;
}

std::uint64_t ToUnsigned(const std::string &key, const std::string &value) {
  std::uint64_t out = 0;
  const char *end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + value + "'");
  }
  return out;
}

bool ToBool(const std::string &key, const std::string &value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError(key + ": expected true or false, got '" + value + "'");
}

}  // namespace

void TrainConfig::Validate() const {
  arch.Validate();
  if (mode == AggregationMode::kHard && !(tau > 0.0)) {
    throw ConfigError("tau must be positive");
  }
  if (epochs == 0 && iterations == 0) throw ConfigError("epochs or iterations must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(adam.learning_rate > 0.0)) throw ConfigError("lr must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("beta1 and beta2 must lie in [0, 1)");
  }
  if (!(adam.epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (!unit_loss[0] && !unit_loss[1] && !unit_loss[2]) {
    throw ConfigError("at least one unit loss must be enabled");
  }
}

RunConfig DeskPreset() {
  RunConfig c;
  c.train.adam.learning_rate = 1e-3;
  return c;
}

RunConfig PaperPreset() {
  RunConfig c;
  c.train.adam.learning_rate = 1.3e-5;
  c.train.iterations = 150000;
  return c;
}

RunConfig PresetByName(const std::string &name) {
  if (name == "desk") return DeskPreset();
  if (name == "paper") return PaperPreset();
  throw ConfigError("unknown preset '" + name + "' (expected desk or paper)");
}

KeyValues ParseKeyValues(std::istream &in) {
  KeyValues out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = Trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("unterminated section header", number);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", number);
    std::string key = Trim(line.substr(0, eq));
    std::string value = Unquote(Trim(line.substr(eq + 1)));
    if (key.empty()) throw ParseError("empty key", number);
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

void ApplySettings(const KeyValues &settings, RunConfig &config) {
  TrainConfig &t = config.train;
  for (const auto &[key, value] : settings) {
    if (key == "preset") {
      const RunConfig base = PresetByName(value);
      t.adam.learning_rate = base.train.adam.learning_rate;
      t.iterations = base.train.iterations;
    } else if (key == "d_v") {
      t.arch.visual_dim = ToUnsigned(key, value);
    } else if (key == "d_l") {
      t.arch.embedding_dim = ToUnsigned(key, value);
    } else if (key == "hidden_attn") {
      t.arch.hidden_attention = ToUnsigned(key, value);
    } else if (key == "hidden_recon") {
      t.arch.hidden_reconstruction = ToUnsigned(key, value);
    } else if (key == "normalize_visual") {
      t.arch.normalize_visual = ToBool(key, value);
    } else if (key == "mode") {
      t.mode = ParseAggregationMode(value);
    } else if (key == "tau") {
      t.tau = ToDouble(key, value);
    } else if (key == "gumbel") {
      t.gumbel = ToBool(key, value);
    } else if (key == "epochs") {
      t.epochs = ToUnsigned(key, value);
    } else if (key == "iterations") {
      t.iterations = ToUnsigned(key, value);
    } else if (key == "batch_size") {
      t.batch_size = ToUnsigned(key, value);
    } else if (key == "checkpoint_every") {
      t.checkpoint_every = ToUnsigned(key, value);
    } else if (key == "seed") {
      t.seed = ToUnsigned(key, value);
    } else if (key == "lr") {
      t.adam.learning_rate = ToDouble(key, value);
    } else if (key == "beta1") {
      t.adam.beta1 = ToDouble(key, value);
    } else if (key == "beta2") {
      t.adam.beta2 = ToDouble(key, value);
    } else if (key == "epsilon") {
      t.adam.epsilon = ToDouble(key, value);
    } else if (key == "loss_target") {
      t.unit_loss[0] = ToBool(key, value);
    } else if (key == "loss_reference") {
      t.unit_loss[1] = ToBool(key, value);
    } else if (key == "loss_discriminative") {
      t.unit_loss[2] = ToBool(key, value);
    } else if (key == "reconstruct") {
      t.reconstruct = ToBool(key, value);
    } else if (key == "alpha") {
      config.weights.alpha = ToDouble(key, value);
    } else if (key == "beta") {
      config.weights.beta = ToDouble(key, value);
    } else if (key == "gamma") {
      config.weights.gamma = ToDouble(key, value);
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
}

RunConfig LoadConfig(std::istream &in) { return ResolveConfig(ParseKeyValues(in)); }

RunConfig ResolveConfig(const KeyValues &settings) {
  RunConfig config = DeskPreset();
  KeyValues rest;
  for (const auto &kv : settings) {
    if (kv.first == "preset") {
      config = PresetByName(kv.second);
    } else {
      rest.push_back(kv);
    }
  }
  ApplySettings(rest, config);
  config.train.Validate();
  return config;
}

RunConfig LoadConfigFile(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  try {
    return LoadConfig(in);
  } catch (const ParseError &e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string FormatConfig(const RunConfig &config) {
  const TrainConfig &t = config.train;
  std::ostringstream out;
  out.precision(17);
  auto b = [](bool v) { return v ? "true" : "false"; };
  out << "d_v = " << t.arch.visual_dim << '\n'
      << "d_l = " << t.arch.embedding_dim << '\n'
      << "hidden_attn = " << t.arch.hidden_attention << '\n'
      << "hidden_recon = " << t.arch.hidden_reconstruction << '\n'
      << "normalize_visual = " << b(t.arch.normalize_visual) << '\n'
      << "mode = " << ToString(t.mode) << '\n'
      << "tau = " << t.tau << '\n'
      << "gumbel = " << b(t.gumbel) << '\n'
      << "epochs = " << t.epochs << '\n'
      << "iterations = " << t.iterations << '\n'
      << "batch_size = " << t.batch_size << '\n'
      << "checkpoint_every = " << t.checkpoint_every << '\n'
      << "seed = " << t.seed << '\n'
      << "lr = " << t.adam.learning_rate << '\n'
      << "beta1 = " << t.adam.beta1 << '\n'
      << "beta2 = " << t.adam.beta2 << '\n'
      << "epsilon = " << t.adam.epsilon << '\n'
      << "loss_target = " << b(t.unit_loss[0]) << '\n'
      << "loss_reference = " << b(t.unit_loss[1]) << '\n'
      << "loss_discriminative = " << b(t.unit_loss[2]) << '\n'
      << "reconstruct = " << b(t.reconstruct) << '\n'
      << "alpha = " << config.weights.alpha << '\n'
      << "beta = " << config.weights.beta << '\n'
      << "gamma = " << config.weights.gamma << '\n';
  return out.str();
}

}  // namespace grounding
