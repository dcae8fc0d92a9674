#include "latentsteg/carriers.hpp"

#include <cmath>
#include <cstdio>

#include <openssl/evp.h>

#include "latentsteg/error.hpp"
#include "latentsteg/rng.hpp"

namespace lsteg {

namespace {

std::array<std::uint8_t, 32> sha256(std::span<const std::uint8_t> data) {
  std::array<std::uint8_t, 32> out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(),
                 nullptr) != 1 ||
      len != out.size())
    throw Error(ErrorCode::InvalidArgument, "SHA-256 digest failed");
  return out;
}

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

SecretKey::SecretKey(std::vector<std::uint8_t> bytes) : bytes_(std::move(bytes)) {
  if (bytes_.size() < kMinBytes)
    throw Error(ErrorCode::InvalidArgument,
                "secret key needs at least 16 bytes, got " +
                    std::to_string(bytes_.size()));
  digest_ = sha256(bytes_);
}

SecretKey SecretKey::from_hex(std::string_view hex) {
  if (hex.starts_with("0x") || hex.starts_with("0X")) hex.remove_prefix(2);
  if (hex.size() % 2 != 0)
    throw Error(ErrorCode::InvalidArgument, "hex key has odd length");
  std::vector<std::uint8_t> bytes(hex.size() / 2);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const int hi = hex_value(hex[2 * i]);
    const int lo = hex_value(hex[2 * i + 1]);
    if (hi < 0 || lo < 0)
      throw Error(ErrorCode::InvalidArgument, "hex key has a non-hex digit");
    bytes[i] = static_cast<std::uint8_t>(hi * 16 + lo);
  }
  return SecretKey(std::move(bytes));
}

SecretKey SecretKey::from_seed(std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0x6B6579 /* "key" */}));
  std::vector<std::uint8_t> bytes(32);
  for (std::size_t w = 0; w < 4; ++w) {
    const std::uint64_t v = rng.next();
    for (std::size_t b = 0; b < 8; ++b)
      bytes[w * 8 + b] = static_cast<std::uint8_t>(v >> (8 * b));
  }
  return SecretKey(std::move(bytes));
}

std::string SecretKey::to_hex() const {
  std::string out;
  out.reserve(bytes_.size() * 2);
  char buf[3];
  for (auto b : bytes_) {
    std::snprintf(buf, sizeof buf, "%02x", b);
    out += buf;
  }
  return out;
}

std::string SecretKey::fingerprint() const {
  std::string out;
  char buf[3];
  for (std::size_t i = 0; i < 8; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest_[i]);
    out += buf;
  }
  return out;
}

CarrierMatrix::CarrierMatrix(Eigen::MatrixXd q, std::string key_fingerprint)
    : q_(std::move(q)), fingerprint_(std::move(key_fingerprint)) {
  if (q_.rows() != q_.cols() || q_.rows() < 2)
    throw Error(ErrorCode::DimensionMismatch, "carrier matrix must be square, d >= 2");
}

void modified_gram_schmidt(Eigen::MatrixXd& a) {
  const Eigen::Index d = a.cols();
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index k = 0; k < j; ++k) {
      double dot = 0.0;
      for (Eigen::Index r = 0; r < a.rows(); ++r) dot += a(r, k) * a(r, j);
      for (Eigen::Index r = 0; r < a.rows(); ++r) a(r, j) -= dot * a(r, k);
    }
    double sq = 0.0;
    for (Eigen::Index r = 0; r < a.rows(); ++r) sq += a(r, j) * a(r, j);
    const double norm = std::sqrt(sq);
    if (!(norm >= 1e-12))
      throw Error(ErrorCode::DegenerateBasis,
                  "column " + std::to_string(j) + " collapsed during Gram-Schmidt");
    for (Eigen::Index r = 0; r < a.rows(); ++r) a(r, j) /= norm;
  }
}

CarrierMatrix derive_carrier_matrix(const SecretKey& key, int d) {
  if (d < 2) throw Error(ErrorCode::InvalidArgument, "carrier dimension must be >= 2");
  Rng rng(std::span<const std::uint8_t, 32>(key.digest()));
  Eigen::MatrixXd a(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) a(r, c) = rng.normal();
  modified_gram_schmidt(a);
  return CarrierMatrix(std::move(a), key.fingerprint());
}

Eigen::MatrixXd carrier(const CarrierMatrix& q, int i, int j) {
  const int d = q.dim();
  if (i < 0 || j < 0 || i >= d || j >= d)
    throw Error(ErrorCode::InvalidArgument, "carrier index out of range");
  return q.matrix().col(i) * q.matrix().col(j).transpose();
}

}  // namespace lsteg
