// Copyright (c) 2026 Taxel Contributors
// SPDX-License-Identifier: Apache-2.0

#include "taxel/checkpoint.hpp"

#include <cstdint>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace taxel::nn {

namespace {

nlohmann::json read_header(std::ifstream& in, const std::string& path) {
  std::uint32_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof header_len);
  if (!in) throw std::runtime_error("checkpoint: truncated header length in " + path);
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw std::runtime_error("checkpoint: truncated header in " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(header);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("checkpoint: malformed header in " + path + ": " + e.what());
  }
  if (j.value("format_version", -1) != kCheckpointFormatVersion)
    throw std::runtime_error("checkpoint: unsupported format version in " + path);
  return j;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& store,
                     const std::string& description) {
  nlohmann::json tensors = nlohmann::json::array();
  for (const ParamStore::Entry& e : store.entries())
    tensors.push_back({{"name", e.name}, {"shape", e.shape}, {"offset", e.offset}});
  const nlohmann::json header{{"format_version", kCheckpointFormatVersion},
                              {"description", description},
                              {"tensors", tensors}};
  const std::string header_str = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
  const std::uint32_t header_len = static_cast<std::uint32_t>(header_str.size());
  out.write(reinterpret_cast<const char*>(&header_len), sizeof header_len);
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  const std::span<const double> flat = store.flat_values();
  out.write(reinterpret_cast<const char*>(flat.data()),
            static_cast<std::streamsize>(flat.size() * sizeof(double)));
  if (!out) throw std::runtime_error("checkpoint: short write to " + path);
}

void load_checkpoint(const std::string& path, ParamStore& store) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  const nlohmann::json j = read_header(in, path);

  const auto& tensors = j.at("tensors");
  if (tensors.size() != store.entries().size())
    throw std::runtime_error("checkpoint: " + path + " holds " +
                             std::to_string(tensors.size()) + " tensors, model expects " +
                             std::to_string(store.entries().size()));

  std::size_t blob_len = 0;
  for (const auto& t : tensors)
    blob_len += shape_size(t.at("shape").get<std::vector<int>>());
  std::vector<double> blob(blob_len);
  in.read(reinterpret_cast<char*>(blob.data()),
          static_cast<std::streamsize>(blob.size() * sizeof(double)));
  if (!in) throw std::runtime_error("checkpoint: truncated tensor data in " + path);

  for (std::size_t i = 0; i < store.entries().size(); ++i) {
    const ParamStore::Entry& e = store.entries()[i];
    const nlohmann::json* found = nullptr;
    for (const auto& t : tensors)
      if (t.at("name").get<std::string>() == e.name) {
        found = &t;
        break;
      }
    if (!found) throw std::runtime_error("checkpoint: " + path + " lacks tensor " + e.name);
    if (found->at("shape").get<std::vector<int>>() != e.shape)
      throw std::runtime_error("checkpoint: shape mismatch for " + e.name + " in " + path);
    const std::size_t offset = found->at("offset").get<std::size_t>();
    if (offset + e.size > blob.size())
      throw std::runtime_error("checkpoint: offset out of range for " + e.name + " in " + path);
    std::span<double> dst = store.values(i);
    std::copy_n(blob.data() + offset, e.size, dst.data());
  }
}

std::string checkpoint_description(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
  return read_header(in, path).value("description", "");
}

}  // namespace taxel::nn
