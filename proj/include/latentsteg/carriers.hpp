#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace lsteg {

/// Shared secret between sender and receiver. At least 16 bytes.
class SecretKey {
 public:
  static constexpr std::size_t kMinBytes = 16;

  explicit SecretKey(std::vector<std::uint8_t> bytes);
  static SecretKey from_hex(std::string_view hex);
  /// Key bytes derived deterministically from a 64-bit seed (32 bytes).
  static SecretKey from_seed(std::uint64_t seed);

  std::span<const std::uint8_t> bytes() const noexcept { return bytes_; }
  std::string to_hex() const;
  /// SHA-256 over the key bytes.
  const std::array<std::uint8_t, 32>& digest() const noexcept { return digest_; }
  /// First 16 hex digits of the digest; safe to publish.
  std::string fingerprint() const;

  friend bool operator==(const SecretKey& a, const SecretKey& b) {
    return a.bytes_ == b.bytes_;
  }

 private:
  std::vector<std::uint8_t> bytes_;
  std::array<std::uint8_t, 32> digest_{};
};

/// Key-derived d x d orthonormal matrix whose columns span the carriers.
class CarrierMatrix {
 public:
  CarrierMatrix(Eigen::MatrixXd q, std::string key_fingerprint);

  const Eigen::MatrixXd& matrix() const noexcept { return q_; }
  int dim() const noexcept { return static_cast<int>(q_.rows()); }
  const std::string& key_fingerprint() const noexcept { return fingerprint_; }

 private:
  Eigen::MatrixXd q_;
  std::string fingerprint_;
};

/// Fills a d x d matrix row-major with standard normals from an Rng seeded by
/// the key digest, then orthonormalizes the columns with modified
/// Gram-Schmidt. Throws DegenerateBasis when a column collapses below 1e-12
/// before normalization; the caller decides whether to pick another key.
CarrierMatrix derive_carrier_matrix(const SecretKey& key, int d = 64);

/// Orthonormalizes the columns of `a` in place (modified Gram-Schmidt).
void modified_gram_schmidt(Eigen::MatrixXd& a);

/// Rank-1 carrier q_i q_j^T.
Eigen::MatrixXd carrier(const CarrierMatrix& q, int i, int j);

}  // namespace lsteg
