#include "slim/model_io.hpp"

#include "slim/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace slim {

namespace {

constexpr char kMagic[8] = {'S', 'L', 'I', 'M', 'M', 'O', 'D', 'L'};

static_assert(std::endian::native == std::endian::little, "model files assume a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw IoError("model file " + path.string() + " is truncated");
  return v;
}

std::string get_string(std::istream& in, std::uint32_t len, const std::filesystem::path& path) {
  std::string s(len, '\0');
  if (!in.read(s.data(), len)) throw IoError("model file " + path.string() + " is truncated");
  return s;
}

}  // namespace

void save_model(const ModelState& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write model file " + path.string());
  std::ostringstream header;
  header.precision(17);
  header << "hops=" << model.substructure.hops << '\n'
         << "variant=" << to_string(model.substructure.variant) << '\n'
         << "layer_decay=" << model.substructure.layer_decay << '\n'
         << "activation=" << to_string(model.activation) << '\n'
         << "node_types=" << model.node_types << '\n'
         << "class_count=" << model.class_count << '\n'
         << "dof=" << model.landmarks.dof << '\n'
         << "with_density=" << (model.layout.with_density ? 1 : 0) << '\n'
         << "with_means=" << (model.layout.with_means ? 1 : 0) << '\n';
  const std::string h = header.str();
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kModelFormatVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(h.size()));
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  auto params = const_cast<ModelState&>(model).parameters();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(p.value->rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(p.value->cols()));
    out.write(reinterpret_cast<const char*>(p.value->data()),
              static_cast<std::streamsize>(p.value->size() * static_cast<Index>(sizeof(double))));
  }
  if (!out) throw IoError("failed while writing model file " + path.string());
}

ModelState load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read model file " + path.string());
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw IoError(path.string() + " is not a model file");
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kModelFormatVersion) {
    throw IoError("model file " + path.string() + " has format version " + std::to_string(version) + ", expected " +
                  std::to_string(kModelFormatVersion));
  }
  std::map<std::string, std::string> header;
  {
    std::istringstream hs(get_string(in, get<std::uint32_t>(in, path), path));
    std::string line;
    while (std::getline(hs, line)) {
      const auto eq = line.find('=');
      if (eq != std::string::npos) header[line.substr(0, eq)] = line.substr(eq + 1);
    }
  }
  auto field = [&](const std::string& key) {
    auto it = header.find(key);
    if (it == header.end()) throw IoError("model file " + path.string() + " lacks header field " + key);
    return it->second;
  };
  ModelState m;
  try {
    m.substructure.hops = std::stoi(field("hops"));
    m.substructure.variant = parse_variant(field("variant"));
    m.substructure.layer_decay = std::stod(field("layer_decay"));
    m.activation = parse_activation(field("activation"));
    m.node_types = std::stoi(field("node_types"));
    m.class_count = std::stoi(field("class_count"));
    m.landmarks.dof = std::stod(field("dof"));
    m.layout.with_density = field("with_density") == "1";
    m.layout.with_means = field("with_means") == "1";
  } catch (const std::logic_error&) {
    throw IoError("model file " + path.string() + " has a malformed header");
  }
  const auto count = get<std::uint32_t>(in, path);
  std::map<std::string, Mat*> slots;
  for (auto& p : m.parameters()) slots[p.name] = p.value;
  if (count != slots.size()) throw IoError("model file " + path.string() + " has an unexpected parameter count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = get_string(in, get<std::uint32_t>(in, path), path);
    const auto rows = get<std::uint64_t>(in, path);
    const auto cols = get<std::uint64_t>(in, path);
    auto it = slots.find(name);
    if (it == slots.end()) throw IoError("model file " + path.string() + " has unknown parameter " + name);
    Mat& target = *it->second;
    target.resize(static_cast<Index>(rows), static_cast<Index>(cols));
    if (!in.read(reinterpret_cast<char*>(target.data()),
                 static_cast<std::streamsize>(target.size() * static_cast<Index>(sizeof(double))))) {
      throw IoError("model file " + path.string() + " is truncated");
    }
  }
  return m;
}

}  // namespace slim
