// SPDX-License-Identifier: Apache-2.0
#include "sasa/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace sasa {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian; big-endian hosts need byte swaps");

namespace {
constexpr char kMagic[8] = {'S', 'A', 'S', 'A', 'C', 'K', 'P', 'T'};
}

const MatrixD* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, m] : tensors) {
    if (n == name) return &m;
  }
  return nullptr;
}

void Checkpoint::save(const std::string& path) const {
  nlohmann::json header;
  header["version"] = kVersion;
  header["step"] = step;
  header["epoch"] = epoch;
  header["config"] = config;
  header["vocab"] = vocab;
  nlohmann::json dir = nlohmann::json::array();
  for (const auto& [name, m] : tensors) {
    dir.push_back({{"name", name},
                   {"rows", static_cast<long>(m.rows())},
                   {"cols", static_cast<long>(m.cols())}});
  }
  header["tensors"] = dir;
  const std::string hs = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write " + path);
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t hlen = hs.size();
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto& [name, m] : tensors) {
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(sizeof(double) * m.size()));
  }
  if (!out) fail("write failed for " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    fail(path + ": not a checkpoint file");
  }
  std::uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  if (!in || hlen == 0 || hlen > (1ull << 30)) fail(path + ": corrupt header length");
  std::string hs(hlen, '\0');
  in.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!in) fail(path + ": truncated header");

  nlohmann::json header = nlohmann::json::parse(hs, nullptr, false);
  if (header.is_discarded()) fail(path + ": corrupt header json");
  if (header.at("version").get<int>() != kVersion) {
    fail(path + ": unsupported checkpoint version " +
         std::to_string(header.at("version").get<int>()));
  }

  Checkpoint ckpt;
  ckpt.step = header.at("step").get<long>();
  ckpt.epoch = header.at("epoch").get<int>();
  ckpt.config = header.at("config");
  ckpt.vocab = header.at("vocab").get<std::vector<std::string>>();
  for (const auto& entry : header.at("tensors")) {
    const auto name = entry.at("name").get<std::string>();
    const long rows = entry.at("rows").get<long>();
    const long cols = entry.at("cols").get<long>();
    if (rows <= 0 || cols <= 0) fail(path + ": corrupt tensor shape for " + name);
    MatrixD m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
    if (!in) fail(path + ": truncated tensor data for " + name);
    ckpt.tensors.emplace_back(name, std::move(m));
  }
  return ckpt;
}

}  // namespace sasa
