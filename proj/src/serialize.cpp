#include "lipflow/serialize.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace lipflow::netdisc {

static_assert(std::endian::native == std::endian::little, "binary checkpoints assume little-endian");

namespace {

constexpr std::string_view kMagic = "LIPFNET1";

nlohmann::json lipschitz_to_json(double L) {
  if (std::isinf(L)) return "inf";
  return L;
}

double lipschitz_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
    throw IoError("checkpoint: bad lipschitz value");
  }
  return j.get<double>();
}

nlohmann::json header(const DiscriminatorNet& net) {
  nlohmann::json j;
  j["format"] = "lipflow.net";
  j["version"] = 1;
  j["lipschitz"] = lipschitz_to_json(net.lipschitz_bound());
  j["activation"] = std::string(to_string(net.activation()));
  j["smooth_eps"] = net.smooth_eps();
  j["sn_method"] = net.sn_method() == SpectralMethod::exact ? "exact" : "power";
  j["sn_power_iters"] = net.sn_power_iters();
  nlohmann::json shapes = nlohmann::json::array();
  for (const auto& layer : net.layers())
    shapes.push_back({layer.weight.rows(), layer.weight.cols()});
  j["shapes"] = shapes;
  return j;
}

DiscriminatorNet assemble(const nlohmann::json& h, std::vector<LayerParams> layers, double nu) {
  if (h.value("format", "") != "lipflow.net") throw IoError("checkpoint: not a lipflow network");
  auto net = DiscriminatorNet::from_layers(std::move(layers), lipschitz_from_json(h.at("lipschitz")),
                                           activation_from_string(h.at("activation").get<std::string>()),
                                           h.at("smooth_eps").get<double>());
  net.set_spectral_method(h.value("sn_method", "exact") == "exact" ? SpectralMethod::exact
                                                                    : SpectralMethod::power,
                          h.value("sn_power_iters", 1));
  net.set_nu(nu);
  return net;
}

}  // namespace

std::string_view to_string(Activation a) noexcept {
  return a == Activation::relu ? "relu" : "smooth_relu";
}

Activation activation_from_string(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "smooth_relu") return Activation::smooth_relu;
  throw InvalidArgument("unknown activation '" + std::string(s) + "'");
}

nlohmann::json to_json(const DiscriminatorNet& net) {
  nlohmann::json j = header(net);
  j["nu"] = net.nu();
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : net.layers()) {
    nlohmann::json lj;
    lj["shape"] = {layer.weight.rows(), layer.weight.cols()};
    std::vector<double> w;
    w.reserve(layer.weight.size());
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) w.push_back(layer.weight(r, c));
    lj["weight"] = w;
    lj["bias"] = std::vector<double>(layer.bias.data(), layer.bias.data() + layer.bias.size());
    lj["sn_state"] =
        std::vector<double>(layer.sn_state.data(), layer.sn_state.data() + layer.sn_state.size());
    layers.push_back(std::move(lj));
  }
  j["layers"] = layers;
  return j;
}

DiscriminatorNet net_from_json(const nlohmann::json& j) {
  try {
    std::vector<LayerParams> layers;
    for (const auto& lj : j.at("layers")) {
      const auto rows = lj.at("shape").at(0).get<Eigen::Index>();
      const auto cols = lj.at("shape").at(1).get<Eigen::Index>();
      const auto w = lj.at("weight").get<std::vector<double>>();
      const auto b = lj.at("bias").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(w.size()) != rows * cols)
        throw IoError("checkpoint: weight length does not match shape");
      LayerParams layer;
      layer.weight.resize(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) layer.weight(r, c) = w[r * cols + c];
      layer.bias = Eigen::Map<const Vector>(b.data(), static_cast<Eigen::Index>(b.size()));
      if (lj.contains("sn_state")) {
        const auto s = lj.at("sn_state").get<std::vector<double>>();
        layer.sn_state = Eigen::Map<const Vector>(s.data(), static_cast<Eigen::Index>(s.size()));
      }
      layers.push_back(std::move(layer));
    }
    return assemble(j, std::move(layers), j.at("nu").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint: malformed JSON network: ") + e.what());
  }
}

std::string to_blob(const DiscriminatorNet& net) {
  const std::string head = header(net).dump();
  std::string out;
  out.append(kMagic);
  const std::uint64_t len = head.size();
  out.append(reinterpret_cast<const char*>(&len), sizeof len);
  out.append(head);
  auto put = [&out](double v) { out.append(reinterpret_cast<const char*>(&v), sizeof v); };
  for (const auto& layer : net.layers()) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) put(layer.weight(r, c));
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) put(layer.bias(i));
    const std::uint64_t sn = static_cast<std::uint64_t>(layer.sn_state.size());
    out.append(reinterpret_cast<const char*>(&sn), sizeof sn);
    for (Eigen::Index i = 0; i < layer.sn_state.size(); ++i) put(layer.sn_state(i));
  }
  put(net.nu());
  return out;
}

DiscriminatorNet net_from_blob(std::string_view blob) {
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (pos + n > blob.size()) throw IoError("checkpoint: truncated binary network");
  };
  need(kMagic.size());
  if (blob.substr(0, kMagic.size()) != kMagic) throw IoError("checkpoint: bad magic");
  pos += kMagic.size();
  std::uint64_t len = 0;
  need(sizeof len);
  std::memcpy(&len, blob.data() + pos, sizeof len);
  pos += sizeof len;
  need(len);
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(blob.substr(pos, len));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint: bad header: ") + e.what());
  }
  pos += len;
  auto get = [&]() {
    need(sizeof(double));
    double v;
    std::memcpy(&v, blob.data() + pos, sizeof v);
    pos += sizeof v;
    return v;
  };
  std::vector<LayerParams> layers;
  for (const auto& shape : h.at("shapes")) {
    const auto rows = shape.at(0).get<Eigen::Index>();
    const auto cols = shape.at(1).get<Eigen::Index>();
    LayerParams layer;
    layer.weight.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) layer.weight(r, c) = get();
    layer.bias.resize(cols);
    for (Eigen::Index i = 0; i < cols; ++i) layer.bias(i) = get();
    std::uint64_t sn = 0;
    need(sizeof sn);
    std::memcpy(&sn, blob.data() + pos, sizeof sn);
    pos += sizeof sn;
    layer.sn_state.resize(static_cast<Eigen::Index>(sn));
    for (Eigen::Index i = 0; i < layer.sn_state.size(); ++i) layer.sn_state(i) = get();
    layers.push_back(std::move(layer));
  }
  const double nu = get();
  if (pos != blob.size()) throw IoError("checkpoint: trailing bytes in binary network");
  return assemble(h, std::move(layers), nu);
}

void save_net(const DiscriminatorNet& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  const std::string blob = to_blob(net);
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

DiscriminatorNet load_net(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (blob.size() > 0 && blob.front() == '{') return net_from_json(nlohmann::json::parse(blob));
  return net_from_blob(blob);
}

}  // namespace lipflow::netdisc
