// Copyright 2026 The LSAN Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lsan/checkpoint.h"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "lsan/error.h"

namespace lsan {
namespace {

constexpr std::string_view kMagic = "LSAN-CHECKPOINT 1";

std::string DimsToString(const Shape& shape) {
  std::string out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) out += 'x';
    out += std::to_string(shape[i]);
  }
  return out;
}

void AppendLittleEndian(float value, std::string& out) {
  const auto bits = std::bit_cast<std::uint32_t>(value);
  for (int shift = 0; shift < 32; shift += 8) {
    out.push_back(static_cast<char>((bits >> shift) & 0xFFu));
  }
}

float ReadLittleEndian(const unsigned char* bytes) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) {
    bits |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
  }
  return std::bit_cast<float>(bits);
}

[[noreturn]] void Corrupt(const std::filesystem::path& path,
                          const std::string& why) {
  throw IoError("checkpoint " + path.string() + ": " + why);
}

}  // namespace

void SaveCheckpoint(const LsanModel<float>& model,
                    const std::filesystem::path& path,
                    std::string_view config_hash) {
  std::ostringstream manifest;
  manifest << kMagic << '\n';
  manifest << "config_hash " << (config_hash.empty() ? "-" : config_hash)
           << '\n';
  for (const auto& [key, value] : model.config().ToKeyValues()) {
    manifest << "model " << key << '=' << value << '\n';
  }
  std::string payload;
  for (const auto& p : model.parameters()) {
    manifest << "tensor " << p.name << " f32 " << DimsToString(p.tensor.shape())
             << ' ' << payload.size() << '\n';
    for (float v : p.tensor.values()) AppendLittleEndian(v, payload);
  }
  manifest << "payload " << payload.size() << '\n' << "end\n";

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  const std::string header = manifest.str();
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

LoadedCheckpoint LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    Corrupt(path, "missing '" + std::string(kMagic) + "' header");
  }
  std::string config_hash;
  std::map<std::string, std::string> model_kv;
  struct Entry {
    std::string name;
    std::string dims;
    std::size_t offset;
  };
  std::vector<Entry> entries;
  std::size_t payload_bytes = 0;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line == "end") {
      ended = true;
      break;
    }
    std::istringstream fields(line);
    std::string tag;
    fields >> tag;
    if (tag == "config_hash") {
      fields >> config_hash;
      if (config_hash == "-") config_hash.clear();
    } else if (tag == "model") {
      std::string kv;
      fields >> kv;
      const auto eq = kv.find('=');
      if (eq == std::string::npos) Corrupt(path, "bad model line: " + line);
      model_kv[kv.substr(0, eq)] = kv.substr(eq + 1);
    } else if (tag == "tensor") {
      Entry e;
      std::string dtype;
      if (!(fields >> e.name >> dtype >> e.dims >> e.offset) ||
          dtype != "f32") {
        Corrupt(path, "bad tensor line: " + line);
      }
      entries.push_back(std::move(e));
    } else if (tag == "payload") {
      fields >> payload_bytes;
    } else {
      Corrupt(path, "unexpected manifest line: " + line);
    }
  }
  if (!ended) Corrupt(path, "manifest is not terminated by 'end'");

  std::vector<unsigned char> payload(payload_bytes);
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(payload_bytes));
  if (static_cast<std::size_t>(in.gcount()) != payload_bytes) {
    Corrupt(path, "payload is truncated");
  }

  ModelConfig config;
  try {
    config = ModelConfig::FromKeyValues(model_kv);
  } catch (const ConfigError& e) {
    Corrupt(path, e.what());
  }
  LoadedCheckpoint loaded{LsanModel<float>(config), config_hash};
  auto params = loaded.model.mutable_parameters();
  if (params.size() != entries.size()) {
    Corrupt(path, "stores " + std::to_string(entries.size()) +
                      " tensors, model expects " +
                      std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Entry& e = entries[i];
    auto& p = params[i];
    if (e.name != p.name || e.dims != DimsToString(p.tensor.shape())) {
      Corrupt(path, "tensor " + e.name + " [" + e.dims + "] does not match " +
                        p.name + " [" + DimsToString(p.tensor.shape()) + "]");
    }
    const std::size_t bytes = p.tensor.size() * 4;
    if (e.offset + bytes > payload.size()) {
      Corrupt(path, "tensor " + e.name + " runs past the payload");
    }
    auto values = p.tensor.mutable_values();
    for (std::size_t k = 0; k < values.size(); ++k) {
      values[k] = ReadLittleEndian(payload.data() + e.offset + 4 * k);
    }
  }
  return loaded;
}

template <typename To, typename From>
void CopyParameters(const LsanModel<From>& from, LsanModel<To>& to) {
  auto src = from.parameters();
  auto dst = to.mutable_parameters();
  if (src.size() != dst.size()) {
    throw ContractError("models have different parameter sets");
  }
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i].name != dst[i].name ||
        src[i].tensor.shape() != dst[i].tensor.shape()) {
      throw ContractError("parameter " + src[i].name + " does not match " +
                          dst[i].name);
    }
    auto out = dst[i].tensor.mutable_values();
    auto in = src[i].tensor.values();
    for (std::size_t k = 0; k < out.size(); ++k) {
      out[k] = static_cast<To>(in[k]);
    }
  }
}

template void CopyParameters(const LsanModel<float>&, LsanModel<float>&);
template void CopyParameters(const LsanModel<float>&, LsanModel<double>&);
template void CopyParameters(const LsanModel<double>&, LsanModel<float>&);
template void CopyParameters(const LsanModel<double>&, LsanModel<double>&);

}  // namespace lsan
