#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "latentsteg/carriers.hpp"

namespace lsteg {

class Rng;

inline constexpr int kLatentChannels = 4;
inline constexpr int kLatentDim = 64;
inline constexpr std::size_t kLatentSize =
    static_cast<std::size_t>(kLatentChannels) * kLatentDim * kLatentDim;

/// Channel count and side length of a (c, d, d) tensor.
struct Shape {
  int channels = kLatentChannels;
  int dim = kLatentDim;

  std::size_t size() const noexcept {
    return static_cast<std::size_t>(channels) * dim * dim;
  }
  friend bool operator==(const Shape&, const Shape&) = default;
};

/// +-1 payload of shape (c, d, d), stored row-major over (channel, row, col).
class Message {
 public:
  Message(Shape shape, std::vector<std::int8_t> bits);

  static Message random(Rng& rng, Shape shape = {});
  /// 8 bits per byte, MSB first, bit 1 <-> +1.
  static Message unpack(std::span<const std::uint8_t> bytes, Shape shape = {});
  std::vector<std::uint8_t> pack() const;

  Shape shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return bits_.size(); }
  std::span<const std::int8_t> bits() const noexcept { return bits_; }
  Message negated() const;

  friend bool operator==(const Message&, const Message&) = default;

 private:
  Shape shape_;
  std::vector<std::int8_t> bits_;
};

enum class LatentRole { Seed, Inverted };
enum class Provenance { Cover, StegoSs, StegoScaled };

std::string_view to_string(LatentRole r) noexcept;
std::string_view to_string(Provenance p) noexcept;
LatentRole parse_role(std::string_view s);
Provenance parse_provenance(std::string_view s);

/// Real-valued latent of shape (c, d, d), the seed X or the inverted Y.
class LatentVector {
 public:
  LatentVector(Shape shape, std::vector<double> values, LatentRole role,
               Provenance provenance);

  Shape shape() const noexcept { return shape_; }
  std::span<const double> values() const noexcept { return values_; }
  LatentRole role() const noexcept { return role_; }
  Provenance provenance() const noexcept { return provenance_; }
  double frobenius_norm() const noexcept;

  const std::string& key_fingerprint() const noexcept { return fingerprint_; }
  std::optional<double> scale_s() const noexcept { return scale_s_; }

  LatentVector with_role(LatentRole role) const;
  LatentVector with_values(std::vector<double> values) const;
  void set_key_fingerprint(std::string fp) { fingerprint_ = std::move(fp); }
  void set_scale_s(std::optional<double> s) { scale_s_ = s; }

 private:
  Shape shape_;
  std::vector<double> values_;
  LatentRole role_;
  Provenance provenance_;
  std::string fingerprint_;
  std::optional<double> scale_s_;
};

/// X ~ N(0, I_n): a cover seed.
LatentVector sample_cover(Rng& rng, Shape shape = {});

/// Q P Q^T for one channel; P may hold any real values.
Eigen::MatrixXd modulate(const Eigen::MatrixXd& payload, const CarrierMatrix& q);
/// Q^T Y Q for one channel.
Eigen::MatrixXd demodulate(const Eigen::MatrixXd& latent, const CarrierMatrix& q);

/// Per channel X_k = Q M_k Q^T.
LatentVector embed_ss(const Message& m, const CarrierMatrix& q);

struct ScaledEmbedding {
  LatentVector latent;
  double s;
};

/// Draws s ~ chi_n and returns (s / sqrt(n)) Q M Q^T, so ||X||_F = s.
ScaledEmbedding embed_scaled_ss(const Message& m, const CarrierMatrix& q, Rng& rng);
/// Same with a caller-supplied norm s > 0.
ScaledEmbedding embed_scaled_ss(const Message& m, const CarrierMatrix& q, double s);

struct Decoded {
  Message message;
  /// Raw Q^T Y Q coefficients, same layout as the message.
  std::vector<double> projection;
};

/// sign(Q^T Y_k Q) per channel; a zero coefficient decodes to +1.
Decoded decode(const LatentVector& y, const CarrierMatrix& q);

}  // namespace lsteg
