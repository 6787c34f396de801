#pragma once

// Checkpoint: "SSRPNET", u64 config digest, then every tensor as float32 in
// declaration order (trainable values, running statistics, momentum
// buffers). A JSON sidecar carries epoch, seed and the config.

#include <string>

#include <nlohmann/json.hpp>

#include "ssrp/binary_io.hpp"
#include "ssrp/error.hpp"
#include "ssrp/nn/network.hpp"

namespace ssrp::nn {

inline std::uint64_t config_digest(const NetworkConfig& cfg) {
  return io::fnv1a_text(nlohmann::json(cfg).dump());
}

template <typename T>
std::vector<char> encode_checkpoint(const Network<T>& net) {
  io::BinaryWriter w;
  w.bytes("SSRPNET");
  w.u64(config_digest(net.config()));
  const auto& p = net.params();
  for (const auto& t : p.trainable)
    for (T v : t.value) w.f32(static_cast<float>(v));
  for (const auto& t : p.buffers)
    for (T v : t.value) w.f32(static_cast<float>(v));
  for (const auto& t : p.trainable)
    for (T v : t.velocity) w.f32(static_cast<float>(v));
  return w.buffer();
}

template <typename T>
Network<T> decode_checkpoint(std::span<const char> bytes, const NetworkConfig& cfg) {
  io::BinaryReader rd(bytes);
  if (rd.remaining() < 15 || rd.bytes(7) != "SSRPNET") fail(ErrorKind::kDecode, "not an SSRPNET checkpoint");
  if (rd.u64() != config_digest(cfg)) fail(ErrorKind::kValidation, "checkpoint was written for a different config");
  auto params = init_params<T>(cfg, 0);
  for (auto& t : params.trainable)
    for (T& v : t.value) v = static_cast<T>(rd.f32());
  for (auto& t : params.buffers)
    for (T& v : t.value) v = static_cast<T>(rd.f32());
  for (auto& t : params.trainable)
    for (T& v : t.velocity) v = static_cast<T>(rd.f32());
  if (!rd.at_end()) fail(ErrorKind::kDecode, "trailing bytes in checkpoint");
  return Network<T>(cfg, std::move(params));
}

template <typename T>
void save_checkpoint(const Network<T>& net, std::size_t epoch, std::uint64_t seed, const std::string& bin_path,
                     const std::string& json_path) {
  auto bytes = encode_checkpoint(net);
  io::write_text(bin_path, std::string_view(bytes.data(), bytes.size()));
  nlohmann::json meta = {{"epoch", epoch},
                         {"seed", seed},
                         {"config", net.config()},
                         {"config_digest", io::hex64(config_digest(net.config()))}};
  io::write_text(json_path, meta.dump(2) + "\n");
}

template <typename T>
Network<T> load_checkpoint(const std::string& bin_path, const std::string& json_path) {
  auto meta = nlohmann::json::parse(io::read_text(json_path));
  NetworkConfig cfg = meta.at("config").get<NetworkConfig>();
  return decode_checkpoint<T>(io::read_file(bin_path), cfg);
}

}  // namespace ssrp::nn
