#include "grounding/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "grounding/errors.h"

namespace grounding {
namespace {

constexpr char kMagic[4] = {'T', 'G', 'C', 'K'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

std::uint64_t Fnv1a(const char *data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  template <typename T>
  void Put(T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void PutBytes(const std::string &s) { out_ += s; }
  std::string &str() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(const std::string &bytes, std::size_t end) : bytes_(bytes), end_(end) {}
  template <typename T>
  T Get(const char *what) {
    T value;
    std::memcpy(&value, Take(sizeof(T), what), sizeof(T));
    return value;
  }
  const char *Take(std::size_t n, const char *what) {
    if (n > end_ - pos_) {
      throw CorruptionError(std::string("checkpoint truncated while reading ") + what);
    }
    const char *p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool done() const { return pos_ == end_; }

 private:
  const std::string &bytes_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string SerializeCheckpoint(const ModelParams &params) {
  ValidateParams(params);
  Writer w;
  w.PutBytes(std::string(kMagic, 4));
  w.Put<std::uint32_t>(kCheckpointVersion);
  const Architecture &a = params.arch;
  w.Put<std::uint64_t>(a.visual_dim);
  w.Put<std::uint64_t>(a.embedding_dim);
  w.Put<std::uint64_t>(a.hidden_attention);
  w.Put<std::uint64_t>(a.hidden_reconstruction);
  w.Put<std::uint8_t>(a.normalize_visual ? 1 : 0);
  const std::vector<std::string> names = ModelParams::TensorNames();
  const std::vector<const Tensor *> tensors = params.Tensors();
  w.Put<std::uint32_t>(static_cast<std::uint32_t>(tensors.size()));
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    w.Put<std::uint32_t>(static_cast<std::uint32_t>(names[k].size()));
    w.PutBytes(names[k]);
    const tensor::Shape &shape = tensors[k]->shape();
    w.Put<std::uint32_t>(static_cast<std::uint32_t>(shape.size()));
    for (std::size_t d : shape) w.Put<std::uint64_t>(d);
    for (double v : tensors[k]->values()) w.Put<double>(v);
  }
  w.Put<std::uint64_t>(Fnv1a(w.str().data(), w.str().size()));
  return std::move(w.str());
}

ModelParams DeserializeCheckpoint(const std::string &bytes) {
  if (bytes.size() < 8 + sizeof(std::uint64_t)) {
    throw CorruptionError("checkpoint truncated: only " + std::to_string(bytes.size()) +
                          " bytes");
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CorruptionError("not a checkpoint file (bad magic)");
  }
  Reader header(bytes, bytes.size());
  header.Take(4, "magic");
  const auto version = header.Get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint format version " + std::to_string(version) +
                       " is not supported (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  }
  const std::size_t body = bytes.size() - sizeof(std::uint64_t);
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body, sizeof(stored));

  Reader r(bytes, body);
  r.Take(8, "header");
  ModelParams params;
  Architecture &a = params.arch;
  a.visual_dim = r.Get<std::uint64_t>("architecture");
  a.embedding_dim = r.Get<std::uint64_t>("architecture");
  a.hidden_attention = r.Get<std::uint64_t>("architecture");
  a.hidden_reconstruction = r.Get<std::uint64_t>("architecture");
  a.normalize_visual = r.Get<std::uint8_t>("architecture") != 0;
  const std::vector<std::string> names = ModelParams::TensorNames();
  std::vector<Tensor *> tensors = params.Tensors();
  const auto count = r.Get<std::uint32_t>("tensor count");
  if (count != tensors.size()) {
    throw CorruptionError("checkpoint holds " + std::to_string(count) + " tensors, expected " +
                          std::to_string(tensors.size()));
  }
  for (std::size_t k = 0; k < tensors.size(); ++k) {
    const auto len = r.Get<std::uint32_t>("tensor name");
    const std::string name(r.Take(len, "tensor name"), len);
    if (name != names[k]) {
      throw CorruptionError("unexpected tensor '" + name + "', expected '" + names[k] + "'");
    }
    const auto rank = r.Get<std::uint32_t>("tensor rank");
    if (rank != 2) throw CorruptionError("tensor " + name + " has rank " + std::to_string(rank));
    tensor::Shape shape(rank);
    std::size_t n = 1;
    for (std::size_t &d : shape) {
      d = r.Get<std::uint64_t>("tensor shape");
      if (d != 0 && n > (body / sizeof(double)) / d) {
        throw CorruptionError("tensor " + name + " is larger than the file");
      }
      n *= d;
    }
    std::vector<double> data(n);
    if (n > 0) std::memcpy(data.data(), r.Take(n * sizeof(double), name.c_str()), n * sizeof(double));
    *tensors[k] = Tensor(std::move(shape), std::move(data));
  }
  if (!r.done()) throw CorruptionError("checkpoint has unexpected trailing bytes");
  if (Fnv1a(bytes.data(), body) != stored) throw CorruptionError("checkpoint checksum mismatch");
  try {
    ValidateParams(params);
  } catch (const Error &e) {
    throw CorruptionError(std::string("checkpoint contents invalid: ") + e.what());
  }
  return params;
}

void WriteFileAtomically(const std::filesystem::path &path, const std::string &contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move file into place at " + path.string());
  }
}

std::string ReadFile(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void SaveCheckpoint(const ModelParams &params, const std::filesystem::path &path) {
  WriteFileAtomically(path, SerializeCheckpoint(params));
}

ModelParams LoadCheckpoint(const std::filesystem::path &path) {
  return DeserializeCheckpoint(ReadFile(path));
}

}  // namespace grounding
