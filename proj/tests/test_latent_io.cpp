#include <cmath>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "doctest.h"
#include "json.hpp"
#include "latentsteg/carriers.hpp"
#include "latentsteg/embedding.hpp"
#include "latentsteg/error.hpp"
#include "latentsteg/latent_io.hpp"
#include "latentsteg/rng.hpp"

using namespace lsteg;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("lsteg-io-" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream(p, std::ios::binary) << s;
}

}  // namespace

TEST_CASE("f32 little-endian encoding") {
  const std::vector<double> v{1.0, -2.0, 0.0};
  const auto b = encode_f32le(v);
  REQUIRE(b.size() == 12);
  CHECK(b[0] == 0x00);
  CHECK(b[1] == 0x00);
  CHECK(b[2] == 0x80);
  CHECK(b[3] == 0x3F);
  CHECK(b[7] == 0xC0);
  CHECK(decode_f32le(b) == v);
  CHECK_THROWS_AS(decode_f32le(std::vector<std::uint8_t>(5, 0)), Error);
}

TEST_CASE("latent files round trip at float precision with metadata") {
  TempDir tmp;
  const auto q = derive_carrier_matrix(SecretKey::from_seed(1));
  Rng rng(2);
  const auto m = Message::random(rng);
  const auto x = embed_scaled_ss(m, q, rng).latent;
  const fs::path p = tmp.path / "x.lat";
  write_latent(p, x);
  CHECK(fs::file_size(p) == kLatentSize * 4);
  CHECK(fs::exists(manifest_path(p)));

  const auto y = read_latent(p);
  CHECK(y.provenance() == Provenance::StegoScaled);
  CHECK(y.role() == LatentRole::Seed);
  CHECK(y.key_fingerprint() == q.key_fingerprint());
  CHECK(y.scale_s().value() == x.scale_s().value());
  for (std::size_t i = 0; i < kLatentSize; ++i)
    REQUIRE(y.values()[i] == static_cast<double>(static_cast<float>(x.values()[i])));
  CHECK(decode(y, q).message == m);

  // a second write of the same latent is byte-identical
  const fs::path p2 = tmp.path / "x2.lat";
  write_latent(p2, y);
  CHECK(read_file(p) == read_file(p2));
}

TEST_CASE("manifest contents") {
  Rng rng(3);
  const auto j = latent_manifest(sample_cover(rng));
  CHECK(j["shape"] == nlohmann::json::array({4, 64, 64}));
  CHECK(j["dtype"] == "f32le");
  CHECK(j["role"] == "seed");
  CHECK(j["provenance"] == "cover");
  CHECK(j.contains("version"));
}

TEST_CASE("malformed latent files are rejected") {
  TempDir tmp;
  Rng rng(4);
  const fs::path p = tmp.path / "c.lat";
  write_latent(p, sample_cover(rng));
  auto manifest = nlohmann::json::parse(std::ifstream(manifest_path(p)));

  CHECK_THROWS_AS(read_latent(tmp.path / "missing.lat"), Error);

  auto bad = manifest;
  bad["dtype"] = "f16";
  write_text(manifest_path(p), bad.dump());
  CHECK_THROWS_AS(read_latent(p), Error);

  bad = manifest;
  bad["shape"] = {4, 32, 32};
  write_text(manifest_path(p), bad.dump());
  CHECK_THROWS_AS(read_latent(p), Error);

  write_text(manifest_path(p), "{oops");
  CHECK_THROWS_AS(read_latent(p), Error);

  write_text(manifest_path(p), manifest.dump());
  CHECK_NOTHROW(read_latent(p));
  write_text(p, "short");
  try {
    read_latent(p);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Io);
  }
}

TEST_CASE("atomic writes leave no temporaries") {
  TempDir tmp;
  write_file_atomic(tmp.path / "a.txt", std::string("hello"));
  std::size_t count = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(tmp.path)) ++count;
  CHECK(count == 1);
  CHECK_THROWS_AS(write_file_atomic(tmp.path / "no" / "such" / "dir.txt", std::string("x")), Error);
}
