// Copyright 2026 The hlmtc Authors.
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

#include "hlmtc/archive.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hlmtc/error.hpp"

namespace hlmtc {
namespace {

constexpr const char* kMagic = "hlmtc-archive";
constexpr const char* kDtype = "float64-le";

std::uint64_t to_little_endian(std::uint64_t bits) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t out = 0;
    for (int i = 0; i < 8; ++i) out = (out << 8) | ((bits >> (8 * i)) & 0xffu);
    return out;
  }
  return bits;
}

}  // namespace

const Tensor& Archive::array(const std::string& name) const {
  for (const auto& [n, t] : arrays) {
    if (n == name) return t;
  }
  fail(Errc::kFormat, "archive has no array named '" + name + "'");
}

void write_archive(const std::filesystem::path& path, const Archive& archive) {
  nlohmann::json manifest;
  manifest["format_version"] = kArchiveFormatVersion;
  manifest["meta"] = archive.meta;
  manifest["arrays"] = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, tensor] : archive.arrays) {
    manifest["arrays"].push_back({{"name", name},
                                  {"shape", tensor.shape()},
                                  {"dtype", kDtype},
                                  {"offset", offset},
                                  {"count", tensor.size()}});
    offset += tensor.size() * sizeof(double);
  }

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::kIo, "cannot open '" + path.string() + "' for writing");
  out << kMagic << ' ' << kArchiveFormatVersion << '\n' << manifest.dump() << '\n';
  std::vector<char> buffer;
  for (const auto& [name, tensor] : archive.arrays) {
    buffer.resize(tensor.size() * sizeof(double));
    for (std::size_t i = 0; i < tensor.size(); ++i) {
      const std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(tensor[i]));
      std::memcpy(buffer.data() + i * sizeof(double), &bits, sizeof(bits));
    }
    out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  }
  if (!out) fail(Errc::kIo, "write failed for '" + path.string() + "'");
}

Archive read_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::kIo, "cannot open archive '" + path.string() + "'");
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string magic;
  int version = 0;
  hs >> magic >> version;
  if (magic != kMagic) fail(Errc::kFormat, "'" + path.string() + "' is not an hlmtc archive");
  if (version != kArchiveFormatVersion) {
    fail(Errc::kFormat, "unsupported archive version " + std::to_string(version));
  }
  std::string manifest_line;
  std::getline(in, manifest_line);
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(manifest_line);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::kFormat, std::string("archive manifest: ") + e.what());
  }

  Archive archive;
  archive.meta = manifest.value("meta", nlohmann::json::object());
  const auto payload_start = in.tellg();
  std::vector<char> buffer;
  for (const auto& entry : manifest.at("arrays")) {
    if (entry.at("dtype").get<std::string>() != kDtype) {
      fail(Errc::kFormat, "unsupported dtype " + entry.at("dtype").dump());
    }
    const Shape shape = entry.at("shape").get<Shape>();
    const auto count = entry.at("count").get<std::size_t>();
    const auto offset = entry.at("offset").get<std::uint64_t>();
    if (shape_size(shape) != count) fail(Errc::kFormat, "array count/shape mismatch");
    in.seekg(payload_start + static_cast<std::streamoff>(offset));
    buffer.resize(count * sizeof(double));
    in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    if (!in) fail(Errc::kFormat, "truncated archive '" + path.string() + "'");
    std::vector<double> data(count);
    for (std::size_t i = 0; i < count; ++i) {
      std::uint64_t bits = 0;
      std::memcpy(&bits, buffer.data() + i * sizeof(double), sizeof(bits));
      data[i] = std::bit_cast<double>(to_little_endian(bits));
    }
    archive.arrays.emplace_back(entry.at("name").get<std::string>(),
                                Tensor(shape, std::move(data)));
  }
  return archive;
}

}  // namespace hlmtc
