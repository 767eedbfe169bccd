#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "grounding/checkpoint.h"
#include "grounding/cli.h"

namespace fs = std::filesystem;
using grounding::ReadFile;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result RunCli(std::vector<std::string> args) {
  args.insert(args.begin(), "grounding");
  std::vector<const char *> argv;
  for (const std::string &a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = grounding::cli::Run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path Scratch(const std::string &name) {
  const fs::path dir = fs::temp_directory_path() / ("grounding-cli-" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::size_t CountLines(const std::string &text) {
  std::size_t n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

const std::string kFixtures = GROUNDING_FIXTURES;

}  // namespace

TEST_CASE("parse writes one row per triad") {
  const fs::path dir = Scratch("parse");
  const std::string out = (dir / "t.tsv").string();
  const Result r = RunCli({"parse", "--in", kFixtures + "/table1.conllu", "--out", out});
  CHECK(r.code == 0);
  CHECK(CountLines(ReadFile(out)) == 11);
  const Result again = RunCli({"parse", "--in", kFixtures + "/table1.conllu", "--out", out});
  CHECK(again.code == 0);
  CHECK(CountLines(ReadFile(out)) == 11);
}

TEST_CASE("usage errors") {
  const Result bogus = RunCli({"frobnicate"});
  CHECK(bogus.code != 0);
  CHECK(bogus.err.find("parse") != std::string::npos);
  CHECK(RunCli({}).code != 0);
  CHECK(RunCli({"parse", "--in", "x", "--bogus-flag"}).code != 0);
  CHECK(RunCli({"parse"}).code != 0);
}

TEST_CASE("every subcommand documents its flags") {
  for (const char *cmd : {"parse", "gen-scenes", "train", "eval", "ground", "ablate", "gradcheck"}) {
    const Result r = RunCli({cmd, "--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("--") != std::string::npos);
  }
  const Result v = RunCli({"--version"});
  CHECK(v.code == 0);
  CHECK(v.out.find("checkpoint format") != std::string::npos);
}

TEST_CASE("exit codes") {
  const fs::path dir = Scratch("codes");
  CHECK(RunCli({"parse", "--in", (dir / "missing.conllu").string()}).code ==
        grounding::cli::kExitMissingFile);

  const std::string scenes = (dir / "s.jsonl").string();
  const std::string emb = (dir / "e.txt").string();
  REQUIRE(RunCli({"gen-scenes", "--out", scenes, "--count", "4", "--embeddings-out", emb}).code == 0);

  {
    std::ofstream bad(dir / "bad.toml");
    bad << "tau = -1\n";
  }
  const Result cfg = RunCli({"train", "--scenes", scenes, "--emb", emb, "--out",
                             (dir / "run").string(), "--config", (dir / "bad.toml").string()});
  CHECK(cfg.code == grounding::cli::kExitBadConfig);
  CHECK(CountLines(cfg.err) == 1);
  CHECK(RunCli({"train", "--scenes", scenes, "--emb", emb, "--out", (dir / "run").string(),
                "--set", "unknown_key=1"})
            .code == grounding::cli::kExitBadConfig);

  REQUIRE(RunCli({"train", "--scenes", scenes, "--emb", emb, "--out", (dir / "run").string(),
                  "--set", "iterations=5"})
              .code == 0);
  { std::ofstream empty(dir / "empty.jsonl"); }
  CHECK(RunCli({"eval", "--scenes", (dir / "empty.jsonl").string(), "--emb", emb, "--ckpt",
                (dir / "run").string()})
            .code == grounding::cli::kExitInvariant);
}

TEST_CASE("train, eval and ground end to end") {
  const fs::path dir = Scratch("e2e");
  const std::string scenes = (dir / "train.jsonl").string();
  const std::string test = (dir / "test.jsonl").string();
  const std::string emb = (dir / "e.txt").string();
  REQUIRE(RunCli({"gen-scenes", "--out", scenes, "--count", "20", "--seed", "3",
                  "--embeddings-out", emb})
              .code == 0);
  REQUIRE(RunCli({"gen-scenes", "--out", test, "--count", "5", "--seed", "900"}).code == 0);

  for (const char *run : {"a", "b"}) {
    const Result r = RunCli({"train", "--scenes", scenes, "--emb", emb, "--out",
                             (dir / run).string(), "--config", kFixtures + "/desk.toml",
                             "--seed", "4", "--set", "iterations=40", "--set",
                             "checkpoint_every=20"});
    REQUIRE(r.code == 0);
    CHECK(fs::exists(dir / run / "step-20.ckpt"));
    CHECK(CountLines(ReadFile(dir / run / "train.log.jsonl")) == 40);
  }
  CHECK(ReadFile(dir / "a" / "model.ckpt") == ReadFile(dir / "b" / "model.ckpt"));
  CHECK(ReadFile(dir / "a" / "config.toml").find("seed = 4") != std::string::npos);

  for (const char *run : {"a", "b"}) {
    const Result r = RunCli({"eval", "--scenes", test, "--emb", emb, "--ckpt",
                             (dir / run).string(), "--report",
                             (dir / (std::string(run) + ".jsonl")).string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("accuracy") != std::string::npos);
  }
  const std::string report = ReadFile(dir / "a.jsonl");
  CHECK(report == ReadFile(dir / "b.jsonl"));
  CHECK(CountLines(report) == 11);

  const Result g = RunCli({"ground", "--scene", test, "--scene-id", "s900-0", "--query-id",
                           "s900-0-q1", "--emb", emb, "--ckpt", (dir / "a").string()});
  CHECK(g.code == 0);
  CHECK(g.out.rfind("chosen ", 0) == 0);
  CHECK(g.out.find("references") != std::string::npos);
}

TEST_CASE("gradcheck reports a small error") {
  const Result r = RunCli({"gradcheck", "--seed", "1", "--mode", "hard"});
  REQUIRE(r.code == 0);
  const auto at = r.out.rfind("max relative error ");
  REQUIRE(at != std::string::npos);
  CHECK(std::stod(r.out.substr(at + 19)) < 1e-4);
}
