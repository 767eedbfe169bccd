#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "grounding/checkpoint.h"
#include "grounding/errors.h"
#include "grounding/model.h"

using namespace grounding;
namespace fs = std::filesystem;

namespace {

ModelParams Params(std::uint64_t seed) {
  return InitParams(Architecture{6, 5, 7, 4, true}, EmbeddingTable(5, seed), seed);
}

fs::path TempPath(const std::string &name) {
  return fs::temp_directory_path() / ("grounding-ckpt-" + name);
}

}  // namespace

TEST_CASE("checkpoints round-trip bit for bit") {
  const ModelParams p = Params(3);
  const fs::path path = TempPath("roundtrip.ckpt");
  SaveCheckpoint(p, path);
  const ModelParams q = LoadCheckpoint(path);
  CHECK(q == p);
  CHECK(q.arch.normalize_visual);
  const auto a = p.Tensors();
  const auto b = q.Tensors();
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(std::memcmp(a[k]->data().data(), b[k]->data().data(),
                      a[k]->size() * sizeof(double)) == 0);
  }
  CHECK_FALSE(fs::exists(path.string() + ".tmp"));
  fs::remove(path);
}

TEST_CASE("serialisation is deterministic") {
  CHECK(SerializeCheckpoint(Params(4)) == SerializeCheckpoint(Params(4)));
  CHECK(SerializeCheckpoint(Params(4)) != SerializeCheckpoint(Params(5)));
}

TEST_CASE("a different version is refused") {
  std::string bytes = SerializeCheckpoint(Params(1));
  bytes[4] = static_cast<char>(kCheckpointVersion + 1);
  CHECK_THROWS_AS(DeserializeCheckpoint(bytes), VersionError);
}

TEST_CASE("damaged files are refused") {
  const std::string bytes = SerializeCheckpoint(Params(1));
  SUBCASE("truncated") {
    for (std::size_t keep : {std::size_t{0}, std::size_t{3}, std::size_t{20}, bytes.size() / 2,
                             bytes.size() - 1}) {
      CHECK_THROWS_AS(DeserializeCheckpoint(bytes.substr(0, keep)), CorruptionError);
    }
  }
  SUBCASE("bad magic") {
    std::string b = bytes;
    b[0] = 'X';
    CHECK_THROWS_AS(DeserializeCheckpoint(b), CorruptionError);
  }
  SUBCASE("flipped payload byte") {
    std::string b = bytes;
    b[b.size() / 2] ^= 0x10;
    CHECK_THROWS_AS(DeserializeCheckpoint(b), CorruptionError);
  }
  SUBCASE("trailing bytes") {
    CHECK_THROWS_AS(DeserializeCheckpoint(bytes + "x"), CorruptionError);
  }
}

TEST_CASE("a missing file is an io error") {
  CHECK_THROWS_AS(LoadCheckpoint(TempPath("does-not-exist.ckpt")), IoError);
}

TEST_CASE("a failed save leaves the previous file intact") {
  const fs::path dir = TempPath("atomic");
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path target = dir / "model.ckpt";
  SaveCheckpoint(Params(1), target);
  const std::string before = ReadFile(target);
  // A directory squatting on the temp name makes the write fail.
  fs::create_directories(target.string() + ".tmp");
  CHECK_THROWS(SaveCheckpoint(Params(2), target));
  CHECK(ReadFile(target) == before);
  fs::remove_all(dir);
}
