#include "gandetect/errors.hpp"
#include "gandetect/network.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace gandetect {

namespace {

constexpr char kMagic[8] = {'G', 'D', 'C', 'K', 'P', 'T', '0', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u64(std::ostream& os, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(bytes, 8);
}

void put_string(std::ostream& os, const std::string& s) {
  put_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char bytes[8];
  if (!is.read(reinterpret_cast<char*>(bytes), 8)) throw LoadError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

std::string get_string(std::istream& is, std::uint64_t limit) {
  const std::uint64_t n = get_u64(is);
  if (n > limit) throw LoadError("checkpoint string length out of range");
  std::string s(n, '\0');
  if (!is.read(s.data(), static_cast<std::streamsize>(n))) throw LoadError("checkpoint truncated");
  return s;
}

}  // namespace

void save_checkpoint(const DetectorNetwork& net, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write checkpoint " + path.string());
  nlohmann::json header = {{"detector", net.config()}, {"head", to_string(net.head())}};
  os.write(kMagic, sizeof kMagic);
  put_u64(os, kVersion);
  put_string(os, header.dump());
  put_u64(os, net.parameters().size());
  for (const auto& [name, p] : net.parameters()) {
    put_string(os, name);
    put_u64(os, p.value.shape().size());
    for (Index d : p.value.shape()) put_u64(os, static_cast<std::uint64_t>(d));
    put_u64(os, p.trainable ? 1 : 0);
    for (Index i = 0; i < p.value.size(); ++i) put_u64(os, std::bit_cast<std::uint64_t>(p.value[i]));
  }
  if (!os) throw IoError("failed writing checkpoint " + path.string());
}

DetectorNetwork load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw LoadError("checkpoint not found: " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || !std::equal(magic, magic + 8, kMagic)) {
    throw LoadError("not a detector checkpoint: " + path.string());
  }
  if (const auto version = get_u64(is); version != kVersion) {
    throw LoadError("unsupported checkpoint version " + std::to_string(version));
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(get_string(is, 1 << 20));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("checkpoint header is malformed: ") + e.what());
  }
  const auto config = header.at("detector").get<DetectorConfig>();
  const HeadKind head = head_kind_from_string(header.at("head").get<std::string>());

  std::map<std::string, Parameter> params;
  const std::uint64_t count = get_u64(is);
  for (std::uint64_t k = 0; k < count; ++k) {
    std::string name = get_string(is, 4096);
    const std::uint64_t rank = get_u64(is);
    if (rank == 0 || rank > 8) throw LoadError("parameter '" + name + "' has invalid rank");
    Shape shape;
    for (std::uint64_t r = 0; r < rank; ++r) shape.push_back(static_cast<Index>(get_u64(is)));
    const bool trainable = get_u64(is) != 0;
    Tensor value(shape);
    for (Index i = 0; i < value.size(); ++i) value[i] = std::bit_cast<double>(get_u64(is));
    params.emplace(name, Parameter(name, std::move(value), trainable));
  }
  return assemble_detector(config, head, std::move(params));
}

}  // namespace gandetect
