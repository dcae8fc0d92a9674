#pragma once

// Latent files: raw little-endian IEEE-754 float32, row-major over
// (channel, row, col), with a JSON sidecar manifest at "<path>.json":
//
//   {"shape": [4, 64, 64], "dtype": "f32le", "compute_dtype": "f64",
//    "role": "seed", "provenance": "stego-ss", "key_fingerprint": "...",
//    "scale_s": 127.9, "version": "..."}
//
// "key_fingerprint" and "scale_s" are omitted when unknown.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "latentsteg/embedding.hpp"

namespace lsteg {

std::filesystem::path manifest_path(const std::filesystem::path& latent);

nlohmann::json latent_manifest(const LatentVector& x);

/// Writes the payload and manifest, each via temp file + rename.
void write_latent(const std::filesystem::path& path, const LatentVector& x);
LatentVector read_latent(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_f32le(std::span<const double> values);
std::vector<double> decode_f32le(std::span<const std::uint8_t> bytes);

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

const char* version_string() noexcept;

}  // namespace lsteg
