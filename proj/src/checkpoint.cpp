#include <bit>
#include <cstring>
#include <fstream>

#include "subsense/encoder.hpp"
#include "subsense/error.hpp"

namespace subsense::encoder {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload is written in host order; little-endian hosts only");

namespace {

constexpr char kMagic[8] = {'S', 'U', 'B', 'S', 'E', 'N', 'S', 'E'};

template <class T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw SchemaError("checkpoint truncated");
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const EncoderParams& params,
                     const ModelConfig& config) {
  params.check_shapes(config);
  nlohmann::json tensors = nlohmann::json::array();
  std::uint64_t offset = 0;
  params.for_each([&](const std::string& name, const Matrix& m) {
    tensors.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(m.size());
  });
  const nlohmann::json manifest = {{"format", "subsense-checkpoint"},
                                   {"version", kCheckpointVersion},
                                   {"config", to_json(config)},
                                   {"tensors", tensors},
                                   {"total_values", offset}};
  const std::string text = manifest.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ResourceError("cannot write checkpoint: " + path.string());
  out.write(kMagic, sizeof kMagic);
  write_pod(out, kCheckpointVersion);
  write_pod(out, static_cast<std::uint64_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  // Row-major payload so the file layout does not depend on Eigen storage.
  params.for_each([&](const std::string&, const Matrix& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) write_pod(out, m(r, c));
  });
  if (!out) throw ResourceError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ResourceError("cannot read checkpoint: " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw SchemaError("not a subsense checkpoint: " + path.string());
  }
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw SchemaError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto len = read_pod<std::uint64_t>(in);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw SchemaError("checkpoint manifest truncated");

  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("checkpoint manifest: ") + e.what());
  }
  Checkpoint ck;
  ck.config = model_config_from_json(manifest.at("config"));
  ck.config.validate();
  ck.params = EncoderParams::zeros(ck.config);
  const auto& tensors = manifest.at("tensors");
  std::size_t i = 0;
  ck.params.for_each([&](const std::string& name, Matrix& m) {
    if (i >= tensors.size()) throw SchemaError("checkpoint missing tensor " + name);
    const auto& t = tensors[i++];
    if (t.at("name").get<std::string>() != name || t.at("rows").get<Eigen::Index>() != m.rows() ||
        t.at("cols").get<Eigen::Index>() != m.cols()) {
      throw SchemaError("checkpoint tensor table mismatch at " + name);
    }
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = read_pod<double>(in);
  });
  if (i != tensors.size()) throw SchemaError("checkpoint has unexpected extra tensors");
  return ck;
}

}  // namespace subsense::encoder
