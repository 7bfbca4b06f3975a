// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "locs/params.hpp"

namespace locs {

/// Raised for unreadable, truncated or corrupted files.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parameter file layout:
///
///   bytes 0..7   magic "LOCSCKPT"
///   bytes 8..15  little-endian u64 header length H
///   next H bytes UTF-8 JSON header: {"format", "version", "meta",
///                "parameters": [{name, shape, trainable}...],
///                "payload_bytes", "payload_crc32"}
///   remainder    little-endian f64 blocks in manifest order
struct Checkpoint {
  nlohmann::json meta;
  ParameterStore params;
};

void write_checkpoint(const std::filesystem::path& path, const ParameterStore& params,
                      const nlohmann::json& meta);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Copies values from `source` into `target` by name; shapes must match and
/// every target entry must be present.
void load_parameters(ParameterStore& target, const ParameterStore& source);

// Little-endian helpers shared with the dataset format.
void put_u32(std::string& out, std::uint32_t v);
void put_u64(std::string& out, std::uint64_t v);
void put_f64(std::string& out, double v);
std::uint32_t get_u32(const char* p);
std::uint64_t get_u64(const char* p);
double get_f64(const char* p);
std::uint32_t crc32_of(const char* data, std::size_t size);

}  // namespace locs
