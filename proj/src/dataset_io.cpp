// SPDX-License-Identifier: Apache-2.0
#include <cstring>
#include <fstream>
#include <iterator>

#include "locs/checkpoint.hpp"
#include "locs/simulate.hpp"

namespace locs {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kPrefix = 12;  // u64 length + u32 crc

void write_blob(const fs::path& path, const std::string& payload) {
  std::string out;
  out.reserve(payload.size() + kPrefix);
  put_u64(out, payload.size());
  put_u32(out, crc32_of(payload.data(), payload.size()));
  out += payload;
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw FormatError("cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw FormatError("short write to " + path.string());
}

std::string read_blob(const fs::path& path, std::size_t expected_bytes) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (bytes.size() < kPrefix) throw FormatError(path.string() + ": truncated length prefix");
  const std::uint64_t len = get_u64(bytes.data());
  const std::uint32_t crc = get_u32(bytes.data() + 8);
  if (len != expected_bytes) {
    throw FormatError(path.string() + ": payload length " + std::to_string(len) +
                      " does not match metadata (" + std::to_string(expected_bytes) + " bytes)");
  }
  if (bytes.size() - kPrefix != len) {
    throw FormatError(path.string() + ": file holds " + std::to_string(bytes.size() - kPrefix) +
                      " payload bytes, prefix declares " + std::to_string(len));
  }
  if (crc32_of(bytes.data() + kPrefix, len) != crc) {
    throw FormatError(path.string() + ": payload checksum mismatch");
  }
  return bytes.substr(kPrefix);
}

std::string encode_f64(const std::vector<double>& v) {
  std::string out;
  out.reserve(v.size() * 8);
  for (double x : v) put_f64(out, x);
  return out;
}

std::vector<double> decode_f64(const std::string& s) {
  std::vector<double> v(s.size() / 8);
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = get_f64(s.data() + 8 * k);
  return v;
}

}  // namespace

nlohmann::json meta_to_json(const DatasetMeta& m) {
  nlohmann::json layout = nlohmann::json::array();
  const char* axes[] = {"x", "y", "z"};
  for (const char* part : {"p", "u"})
    for (int d = 0; d < m.dim; ++d) layout.push_back(std::string(part) + "_" + axes[d]);
  return {{"format", "locs-dataset"},
          {"version", 1},
          {"kind", m.kind},
          {"split", m.split},
          {"dim", m.dim},
          {"scenes", m.scenes},
          {"steps", m.steps},
          {"nodes", m.nodes},
          {"dt", m.dt},
          {"stride", m.stride},
          {"seed", m.seed},
          {"has_charges", m.has_charges},
          {"feature_layout", layout},
          {"config", m.config}};
}

DatasetMeta meta_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "locs-dataset" || j.at("version") != 1) {
      throw FormatError("unsupported dataset format");
    }
    DatasetMeta m;
    m.kind = j.at("kind").get<std::string>();
    m.split = j.at("split").get<std::string>();
    m.dim = j.at("dim").get<int>();
    m.scenes = j.at("scenes").get<std::size_t>();
    m.steps = j.at("steps").get<std::size_t>();
    m.nodes = j.at("nodes").get<std::size_t>();
    m.dt = j.at("dt").get<double>();
    m.stride = j.at("stride").get<std::size_t>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.has_charges = j.at("has_charges").get<bool>();
    m.config = j.value("config", nlohmann::json::object());
    if (m.dim != 2 && m.dim != 3) throw FormatError("dataset dimension must be 2 or 3");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed dataset metadata: ") + e.what());
  }
}

void write_dataset(const DatasetBundle& bundle, const fs::path& dir) {
  bundle.validate();
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "meta.json", std::ios::trunc);
    if (!f) throw FormatError("cannot write " + (dir / "meta.json").string());
    f << meta_to_json(bundle.meta).dump(2) << "\n";
  }
  write_blob(dir / "trajectories.bin", encode_f64(bundle.trajectories));
  write_blob(dir / "edges.bin",
             std::string(reinterpret_cast<const char*>(bundle.edges.data()), bundle.edges.size()));
  if (bundle.meta.has_charges) {
    write_blob(dir / "charges.bin", encode_f64(bundle.charges));
  } else {
    fs::remove(dir / "charges.bin");
  }
}

DatasetMeta read_dataset_meta(const fs::path& dir) {
  std::ifstream f(dir / "meta.json");
  if (!f) throw FormatError("cannot open " + (dir / "meta.json").string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError((dir / "meta.json").string() + ": malformed header: " + e.what());
  }
  return meta_from_json(j);
}

DatasetBundle read_dataset(const fs::path& dir) {
  DatasetBundle b;
  b.meta = read_dataset_meta(dir);
  const std::size_t cells = b.meta.scenes * b.meta.steps * b.meta.nodes;
  b.trajectories = decode_f64(read_blob(dir / "trajectories.bin", cells * 2 * b.meta.dim * 8));
  const std::string e = read_blob(dir / "edges.bin", cells * b.meta.nodes);
  b.edges.assign(e.begin(), e.end());
  if (b.meta.has_charges) {
    b.charges = decode_f64(read_blob(dir / "charges.bin", b.meta.scenes * b.meta.nodes * 8));
  }
  b.validate();
  return b;
}

}  // namespace locs
