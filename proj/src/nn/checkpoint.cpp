#include "qtrack/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace qtrack::nn {

static constexpr char kMagic[4] = {'Q', 'T', 'K', '1'};
static constexpr std::uint32_t kVersion = 1;

template <typename T>
static void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
static T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

static void put_string(std::ostream& os, const std::string& s) {
  put<std::uint64_t>(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

static std::string get_string(std::istream& is) {
  auto n = get<std::uint64_t>(is);
  if (n > (1ull << 30)) throw std::runtime_error("checkpoint: implausible string length");
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return s;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint: cannot open " + path);
  os.write(kMagic, 4);
  put<std::uint32_t>(os, kVersion);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(ck.nets.size()));
  for (const auto& [name, net] : ck.nets) {
    put_string(os, name);
    put<std::uint32_t>(os, static_cast<std::uint32_t>(net.spec.widths.size()));
    for (int w : net.spec.widths) put<std::int32_t>(os, w);
    put<std::uint8_t>(os, static_cast<std::uint8_t>(net.spec.activation));
    put<std::uint8_t>(os, static_cast<std::uint8_t>(net.spec.output));
    put<double>(os, net.spec.output_scale);
    put<std::uint64_t>(os, static_cast<std::uint64_t>(net.theta.size()));
    os.write(reinterpret_cast<const char*>(net.theta.data()),
             static_cast<std::streamsize>(net.theta.size() * sizeof(double)));
  }
  put_string(os, ck.metadata_json);
  if (!os) throw std::runtime_error("checkpoint: write failed for " + path);

  nlohmann::json side;
  side["format_version"] = kVersion;
  side["metadata"] = nlohmann::json::parse(ck.metadata_json);
  for (const auto& [name, net] : ck.nets) {
    side["nets"][name] = {{"widths", net.spec.widths},
                          {"activation", net.spec.activation == Activation::Tanh ? "tanh" : "relu"},
                          {"output", net.spec.output == OutputTransform::Identity ? "identity"
                                                                                  : "scaled_tanh"},
                          {"output_scale", net.spec.output_scale},
                          {"param_count", net.theta.size()}};
  }
  std::ofstream js(path + ".json", std::ios::trunc);
  if (!js) throw std::runtime_error("checkpoint: cannot open " + path + ".json");
  js << side.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  const auto version = get<std::uint32_t>(is);
  if (version != kVersion) throw std::runtime_error("checkpoint: unsupported version");

  Checkpoint ck;
  const auto n_nets = get<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < n_nets; ++i) {
    std::string name = get_string(is);
    NetSnapshot net;
    const auto n_widths = get<std::uint32_t>(is);
    net.spec.widths.resize(n_widths);
    for (auto& w : net.spec.widths) w = get<std::int32_t>(is);
    net.spec.activation = static_cast<Activation>(get<std::uint8_t>(is));
    net.spec.output = static_cast<OutputTransform>(get<std::uint8_t>(is));
    net.spec.output_scale = get<double>(is);
    const auto n_params = get<std::uint64_t>(is);
    net.spec.validate();
    if (n_params != static_cast<std::uint64_t>(net.spec.param_count()))
      throw std::runtime_error("checkpoint: parameter count does not match spec");
    net.theta.resize(static_cast<Eigen::Index>(n_params));
    is.read(reinterpret_cast<char*>(net.theta.data()),
            static_cast<std::streamsize>(n_params * sizeof(double)));
    if (!is) throw std::runtime_error("checkpoint: truncated parameter data");
    ck.nets.emplace(std::move(name), std::move(net));
  }
  ck.metadata_json = get_string(is);
  return ck;
}

}  // namespace qtrack::nn
