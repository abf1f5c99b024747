#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "lipflow/netdisc.hpp"

namespace lipflow::netdisc {

std::string_view to_string(Activation a) noexcept;
Activation activation_from_string(std::string_view s);

/// Self-describing JSON checkpoint: layer shapes, row-major weights, biases,
/// power-iteration state, nu, L (the string "inf" when unconstrained),
/// activation kind and smoothing width. Doubles round-trip exactly.
nlohmann::json to_json(const DiscriminatorNet& net);
DiscriminatorNet net_from_json(const nlohmann::json& j);

/// Binary checkpoint: "LIPFNET1", u64 header length, JSON header without the
/// numeric arrays, then little-endian float64 payload in header order.
std::string to_blob(const DiscriminatorNet& net);
DiscriminatorNet net_from_blob(std::string_view blob);

void save_net(const DiscriminatorNet& net, const std::filesystem::path& path);
DiscriminatorNet load_net(const std::filesystem::path& path);

}  // namespace lipflow::netdisc
