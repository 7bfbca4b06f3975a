// SPDX-License-Identifier: Apache-2.0
#include "locs/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace locs {
namespace {

constexpr char kMagic[8] = {'L', 'O', 'C', 'S', 'C', 'K', 'P', 'T'};
constexpr int kVersion = 1;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFFu));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xFFu));
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint32_t get_u32(const char* p) {
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[k])) << (8 * k);
  return v;
}

std::uint64_t get_u64(const char* p) {
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[k])) << (8 * k);
  return v;
}

double get_f64(const char* p) { return std::bit_cast<double>(get_u64(p)); }

std::uint32_t crc32_of(const char* data, std::size_t size) {
  uLong crc = crc32(0L, Z_NULL, 0);
  while (size > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    size -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

void write_checkpoint(const std::filesystem::path& path, const ParameterStore& params,
                      const nlohmann::json& meta) {
  std::string payload;
  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& e : params.entries()) {
    manifest.push_back({{"name", e.name}, {"shape", e.value.shape()}, {"trainable", e.trainable}});
    for (double v : e.value.data()) put_f64(payload, v);
  }
  nlohmann::json header = {{"format", "locs-checkpoint"},
                           {"version", kVersion},
                           {"meta", meta},
                           {"parameters", manifest},
                           {"payload_bytes", payload.size()},
                           {"payload_crc32", crc32_of(payload.data(), payload.size())}};
  const std::string text = header.dump();

  std::string out(kMagic, sizeof kMagic);
  put_u64(out, text.size());
  out += text;
  out += payload;

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw FormatError("short write to " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw FormatError(path.string() + ": not a checkpoint (bad magic)");
  }
  const std::uint64_t header_len = get_u64(bytes.data() + 8);
  if (header_len > bytes.size() - 16) throw FormatError(path.string() + ": truncated header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": malformed header: " + e.what());
  }
  if (header.value("format", "") != "locs-checkpoint" || header.value("version", 0) != kVersion) {
    throw FormatError(path.string() + ": unsupported checkpoint format");
  }

  const std::size_t offset = 16 + header_len;
  const std::size_t payload_bytes = header.at("payload_bytes").get<std::size_t>();
  if (bytes.size() - offset != payload_bytes) {
    throw FormatError(path.string() + ": payload is " + std::to_string(bytes.size() - offset) +
                      " bytes, header declares " + std::to_string(payload_bytes));
  }
  if (crc32_of(bytes.data() + offset, payload_bytes) !=
      header.at("payload_crc32").get<std::uint32_t>()) {
    throw FormatError(path.string() + ": payload checksum mismatch");
  }

  Checkpoint ck;
  ck.meta = header.at("meta");
  std::size_t pos = offset;
  for (const auto& item : header.at("parameters")) {
    Shape shape = item.at("shape").get<Shape>();
    const std::size_t n = element_count(shape);
    if (pos + 8 * n > bytes.size()) throw FormatError(path.string() + ": manifest exceeds payload");
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) data[i] = get_f64(bytes.data() + pos + 8 * i);
    pos += 8 * n;
    ck.params.add(item.at("name").get<std::string>(), Tensor(std::move(shape), std::move(data)),
                  item.at("trainable").get<bool>());
  }
  if (pos != bytes.size()) throw FormatError(path.string() + ": manifest does not cover payload");
  return ck;
}

void load_parameters(ParameterStore& target, const ParameterStore& source) {
  for (auto& e : target.entries()) {
    const auto& src = source.entry(source.find(e.name));
    if (src.value.shape() != e.value.shape()) {
      throw FormatError("parameter " + e.name + " has shape " + to_string(src.value.shape()) +
                        ", model expects " + to_string(e.value.shape()));
    }
    e.value = src.value;
  }
}

}  // namespace locs
