#include "latentsteg/latent_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <system_error>

#include <unistd.h>

#include "latentsteg/error.hpp"

namespace lsteg {

namespace fs = std::filesystem;

const char* version_string() noexcept { return LATENTSTEG_VERSION; }

fs::path manifest_path(const fs::path& latent) {
  fs::path p = latent;
  p += ".json";
  return p;
}

std::vector<std::uint8_t> encode_f32le(std::span<const double> values) {
  std::vector<std::uint8_t> out(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(values[i]));
    for (int b = 0; b < 4; ++b) out[4 * i + b] = static_cast<std::uint8_t>(bits >> (8 * b));
  }
  return out;
}

std::vector<double> decode_f32le(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % 4 != 0)
    throw Error(ErrorCode::Io, "float32 payload length is not a multiple of 4");
  std::vector<double> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[4 * i + b]) << (8 * b);
    out[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return out;
}

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::Io, "failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::Io, "cannot move file into place at " + path.string());
  }
}

void write_file_atomic(const fs::path& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                                    text.size()));
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

nlohmann::json latent_manifest(const LatentVector& x) {
  nlohmann::json m{{"shape", {x.shape().channels, x.shape().dim, x.shape().dim}},
                   {"dtype", "f32le"},
                   {"compute_dtype", "f64"},
                   {"role", to_string(x.role())},
                   {"provenance", to_string(x.provenance())},
                   {"version", version_string()}};
  if (!x.key_fingerprint().empty()) m["key_fingerprint"] = x.key_fingerprint();
  if (x.scale_s()) m["scale_s"] = *x.scale_s();
  return m;
}

void write_latent(const fs::path& path, const LatentVector& x) {
  write_file_atomic(path, encode_f32le(x.values()));
  write_file_atomic(manifest_path(path), latent_manifest(x).dump(2) + "\n");
}

LatentVector read_latent(const fs::path& path) {
  nlohmann::json m;
  try {
    const auto raw = read_file(manifest_path(path));
    m = nlohmann::json::parse(raw.begin(), raw.end());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Io, "malformed latent manifest for " + path.string() + ": " + e.what());
  }
  Shape shape;
  std::string role, provenance;
  try {
    if (m.at("dtype").get<std::string>() != "f32le")
      throw Error(ErrorCode::Io, "unsupported latent dtype in " + path.string());
    const auto dims = m.at("shape").get<std::vector<int>>();
    if (dims.size() != 3 || dims[1] != dims[2])
      throw Error(ErrorCode::Io, "latent shape must be (c, d, d)");
    shape = {dims[0], dims[1]};
    role = m.at("role").get<std::string>();
    provenance = m.at("provenance").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Io, "incomplete latent manifest for " + path.string() + ": " + e.what());
  }
  const auto bytes = read_file(path);
  if (bytes.size() != shape.size() * 4)
    throw Error(ErrorCode::Io, "latent file " + path.string() + " has " +
                                   std::to_string(bytes.size()) + " bytes, expected " +
                                   std::to_string(shape.size() * 4));
  LatentVector x(shape, decode_f32le(bytes), parse_role(role), parse_provenance(provenance));
  if (m.contains("key_fingerprint")) x.set_key_fingerprint(m["key_fingerprint"].get<std::string>());
  if (m.contains("scale_s")) x.set_scale_s(m["scale_s"].get<double>());
  return x;
}

}  // namespace lsteg
