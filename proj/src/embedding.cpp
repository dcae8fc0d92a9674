#include "latentsteg/embedding.hpp"

#include <cmath>

#include "latentsteg/error.hpp"
#include "latentsteg/rng.hpp"
#include "latentsteg/statmodel.hpp"

namespace lsteg {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_shape(Shape shape) {
  if (shape.channels < 1 || shape.dim < 2)
    throw Error(ErrorCode::DimensionMismatch, "latent shape must be (c>=1, d>=2, d)");
}

void check_carrier(Shape shape, const CarrierMatrix& q) {
  if (shape.dim != q.dim())
    throw Error(ErrorCode::DimensionMismatch,
                "payload side " + std::to_string(shape.dim) +
                    " does not match carrier dimension " + std::to_string(q.dim()));
}

// Applies Q X Q^T (forward) or Q^T X Q (inverse) to every channel.
std::vector<double> sandwich(Shape shape, const double* in, const CarrierMatrix& q,
                             bool inverse) {
  const int d = shape.dim;
  const std::size_t plane = static_cast<std::size_t>(d) * d;
  std::vector<double> out(shape.size());
  const Eigen::MatrixXd& Q = q.matrix();
  RowMajor tmp(d, d);
  for (int k = 0; k < shape.channels; ++k) {
    Eigen::Map<const RowMajor> x(in + k * plane, d, d);
    Eigen::Map<RowMajor> y(out.data() + k * plane, d, d);
    if (inverse) {
      tmp.noalias() = Q.transpose() * x;
      y.noalias() = tmp * Q;
    } else {
      tmp.noalias() = Q * x;
      y.noalias() = tmp * Q.transpose();
    }
  }
  return out;
}

}  // namespace

// Message ------------------------------------------------------------------

Message::Message(Shape shape, std::vector<std::int8_t> bits)
    : shape_(shape), bits_(std::move(bits)) {
  check_shape(shape_);
  if (bits_.size() != shape_.size())
    throw Error(ErrorCode::DimensionMismatch, "message size does not match its shape");
  for (auto b : bits_)
    if (b != 1 && b != -1)
      throw Error(ErrorCode::InvalidArgument, "message entries must be -1 or +1");
}

Message Message::random(Rng& rng, Shape shape) {
  check_shape(shape);
  std::vector<std::int8_t> bits(shape.size());
  std::size_t i = 0;
  while (i < bits.size()) {
    std::uint64_t word = rng.next();
    for (int b = 0; b < 64 && i < bits.size(); ++b, ++i, word >>= 1)
      bits[i] = (word & 1U) ? 1 : -1;
  }
  return Message(shape, std::move(bits));
}

Message Message::unpack(std::span<const std::uint8_t> bytes, Shape shape) {
  check_shape(shape);
  const std::size_t n = shape.size();
  if (bytes.size() * 8 != n)
    throw Error(ErrorCode::DimensionMismatch,
                "packed message must be exactly " + std::to_string((n + 7) / 8) +
                    " bytes, got " + std::to_string(bytes.size()));
  std::vector<std::int8_t> bits(n);
  for (std::size_t i = 0; i < n; ++i)
    bits[i] = ((bytes[i / 8] >> (7 - i % 8)) & 1U) ? 1 : -1;
  return Message(shape, std::move(bits));
}

std::vector<std::uint8_t> Message::pack() const {
  std::vector<std::uint8_t> out((bits_.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits_.size(); ++i)
    if (bits_[i] > 0) out[i / 8] |= static_cast<std::uint8_t>(1U << (7 - i % 8));
  return out;
}

Message Message::negated() const {
  std::vector<std::int8_t> bits(bits_.size());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = static_cast<std::int8_t>(-bits_[i]);
  return Message(shape_, std::move(bits));
}

// LatentVector ---------------------------------------------------------------

std::string_view to_string(LatentRole r) noexcept {
  return r == LatentRole::Seed ? "seed" : "inverted";
}

std::string_view to_string(Provenance p) noexcept {
  switch (p) {
    case Provenance::Cover: return "cover";
    case Provenance::StegoSs: return "stego-ss";
    case Provenance::StegoScaled: return "stego-scaled";
  }
  return "cover";
}

LatentRole parse_role(std::string_view s) {
  if (s == "seed") return LatentRole::Seed;
  if (s == "inverted") return LatentRole::Inverted;
  throw Error(ErrorCode::Config, "unknown latent role '" + std::string(s) + "'");
}

Provenance parse_provenance(std::string_view s) {
  if (s == "cover") return Provenance::Cover;
  if (s == "stego-ss") return Provenance::StegoSs;
  if (s == "stego-scaled") return Provenance::StegoScaled;
  throw Error(ErrorCode::Config, "unknown provenance '" + std::string(s) + "'");
}

LatentVector::LatentVector(Shape shape, std::vector<double> values, LatentRole role,
                           Provenance provenance)
    : shape_(shape), values_(std::move(values)), role_(role), provenance_(provenance) {
  check_shape(shape_);
  if (values_.size() != shape_.size())
    throw Error(ErrorCode::DimensionMismatch, "latent size does not match its shape");
}

double LatentVector::frobenius_norm() const noexcept {
  double sq = 0.0;
  for (double v : values_) sq += v * v;
  return std::sqrt(sq);
}

LatentVector LatentVector::with_role(LatentRole role) const {
  LatentVector out = *this;
  out.role_ = role;
  return out;
}

LatentVector LatentVector::with_values(std::vector<double> values) const {
  LatentVector out(shape_, std::move(values), role_, provenance_);
  out.fingerprint_ = fingerprint_;
  out.scale_s_ = scale_s_;
  return out;
}

LatentVector sample_cover(Rng& rng, Shape shape) {
  check_shape(shape);
  std::vector<double> v(shape.size());
  for (double& x : v) x = rng.normal();
  return LatentVector(shape, std::move(v), LatentRole::Seed, Provenance::Cover);
}

// Modulation -----------------------------------------------------------------

Eigen::MatrixXd modulate(const Eigen::MatrixXd& payload, const CarrierMatrix& q) {
  if (payload.rows() != q.dim() || payload.cols() != q.dim())
    throw Error(ErrorCode::DimensionMismatch, "payload does not match carrier dimension");
  return q.matrix() * payload * q.matrix().transpose();
}

Eigen::MatrixXd demodulate(const Eigen::MatrixXd& latent, const CarrierMatrix& q) {
  if (latent.rows() != q.dim() || latent.cols() != q.dim())
    throw Error(ErrorCode::DimensionMismatch, "latent does not match carrier dimension");
  return q.matrix().transpose() * latent * q.matrix();
}

LatentVector embed_ss(const Message& m, const CarrierMatrix& q) {
  check_carrier(m.shape(), q);
  std::vector<double> payload(m.bits().begin(), m.bits().end());
  LatentVector x(m.shape(), sandwich(m.shape(), payload.data(), q, false),
                 LatentRole::Seed, Provenance::StegoSs);
  x.set_key_fingerprint(q.key_fingerprint());
  return x;
}

ScaledEmbedding embed_scaled_ss(const Message& m, const CarrierMatrix& q, Rng& rng) {
  check_carrier(m.shape(), q);
  return embed_scaled_ss(m, q, sample_chi(m.size(), rng));
}

ScaledEmbedding embed_scaled_ss(const Message& m, const CarrierMatrix& q, double s) {
  if (!(s > 0.0) || !std::isfinite(s))
    throw Error(ErrorCode::InvalidArgument, "scale s must be a positive finite number");
  LatentVector base = embed_ss(m, q);
  const double factor = s / std::sqrt(static_cast<double>(m.size()));
  std::vector<double> v(base.values().begin(), base.values().end());
  for (double& x : v) x *= factor;
  LatentVector x(m.shape(), std::move(v), LatentRole::Seed, Provenance::StegoScaled);
  x.set_key_fingerprint(q.key_fingerprint());
  x.set_scale_s(s);
  return {std::move(x), s};
}

Decoded decode(const LatentVector& y, const CarrierMatrix& q) {
  check_carrier(y.shape(), q);
  std::vector<double> proj = sandwich(y.shape(), y.values().data(), q, true);
  std::vector<std::int8_t> bits(proj.size());
  for (std::size_t i = 0; i < proj.size(); ++i) bits[i] = proj[i] < 0.0 ? -1 : 1;
  return {Message(y.shape(), std::move(bits)), std::move(proj)};
}

}  // namespace lsteg
