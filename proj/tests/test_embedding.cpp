#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "latentsteg/carriers.hpp"
#include "latentsteg/embedding.hpp"
#include "latentsteg/error.hpp"
#include "latentsteg/rng.hpp"
#include "latentsteg/statmodel.hpp"

using namespace lsteg;

namespace {

const CarrierMatrix& test_q() {
  static const CarrierMatrix q = derive_carrier_matrix(SecretKey::from_seed(11));
  return q;
}

}  // namespace

TEST_CASE("message packing is MSB first with bit 1 mapped to +1") {
  std::vector<std::uint8_t> bytes(kLatentSize / 8, 0);
  bytes[0] = 0x80;
  bytes[1] = 0x01;
  const auto m = Message::unpack(bytes);
  CHECK(m.size() == kLatentSize);
  CHECK(m.bits()[0] == 1);
  for (int i = 1; i < 15; ++i) CHECK(m.bits()[static_cast<std::size_t>(i)] == -1);
  CHECK(m.bits()[15] == 1);
  CHECK(m.pack() == bytes);
  CHECK_THROWS_AS(Message::unpack(std::vector<std::uint8_t>(10, 0)), Error);
}

TEST_CASE("random messages are balanced and round-trip through packing") {
  Rng rng(1);
  const auto m = Message::random(rng);
  long sum = 0;
  for (auto b : m.bits()) {
    REQUIRE((b == 1 || b == -1));
    sum += b;
  }
  CHECK(std::abs(sum) < 600);
  CHECK(Message::unpack(m.pack()) == m);
  CHECK(m.negated().negated() == m);
}

TEST_CASE("spread-spectrum seeds have norm sqrt(n)") {
  Rng rng(2);
  for (int t = 0; t < 10; ++t) {
    const auto x = embed_ss(Message::random(rng), test_q());
    CHECK(std::abs(x.frobenius_norm() - 128.0) / 128.0 < 1e-6);
    CHECK(x.provenance() == Provenance::StegoSs);
    CHECK(x.role() == LatentRole::Seed);
    CHECK(x.key_fingerprint() == test_q().key_fingerprint());
  }
}

TEST_CASE("decode inverts embed for both encoders") {
  Rng rng(3);
  for (int t = 0; t < 5; ++t) {
    const auto m = Message::random(rng);
    CHECK(decode(embed_ss(m, test_q()), test_q()).message == m);
    const auto scaled = embed_scaled_ss(m, test_q(), rng);
    CHECK(decode(scaled.latent, test_q()).message == m);
    CHECK(scaled.latent.frobenius_norm() == doctest::Approx(scaled.s).epsilon(1e-12));
    CHECK(scaled.latent.scale_s().value() == scaled.s);
  }
}

TEST_CASE("projection of an SS seed is the message itself") {
  Rng rng(4);
  const auto m = Message::random(rng);
  const auto d = decode(embed_ss(m, test_q()), test_q());
  double worst = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i)
    worst = std::max(worst, std::abs(d.projection[i] - m.bits()[i]));
  CHECK(worst < 1e-10);
}

TEST_CASE("sign of zero decodes as +1") {
  LatentVector zero(Shape{}, std::vector<double>(kLatentSize, 0.0), LatentRole::Inverted,
                    Provenance::Cover);
  const auto d = decode(zero, test_q());
  for (auto b : d.message.bits()) REQUIRE(b == 1);
}

TEST_CASE("a different key does not decode") {
  Rng rng(5);
  const auto m = Message::random(rng);
  const auto other = derive_carrier_matrix(SecretKey::from_seed(12));
  const auto d = decode(embed_ss(m, test_q()), other).message;
  std::size_t same = 0;
  for (std::size_t i = 0; i < m.size(); ++i) same += d.bits()[i] == m.bits()[i];
  const double acc = static_cast<double>(same) / static_cast<double>(m.size());
  CHECK(acc > 0.45);
  CHECK(acc < 0.55);
}

TEST_CASE("modulation is linear and demodulation is its inverse") {
  Rng rng(6);
  Eigen::MatrixXd a(64, 64), b(64, 64);
  for (int i = 0; i < 64; ++i)
    for (int j = 0; j < 64; ++j) {
      a(i, j) = rng.normal();
      b(i, j) = rng.normal();
    }
  const auto& q = test_q();
  const Eigen::MatrixXd lhs = modulate(2.0 * a - 3.0 * b, q);
  const Eigen::MatrixXd rhs = 2.0 * modulate(a, q) - 3.0 * modulate(b, q);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((demodulate(modulate(a, q), q) - a).cwiseAbs().maxCoeff() < 1e-10);
  // modulate(a) = sum_ij a_ij q_i q_j^T
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(64, 64);
  for (int i = 0; i < 64; ++i)
    for (int j = 0; j < 64; ++j) sum += a(i, j) * carrier(q, i, j);
  CHECK((sum - modulate(a, q)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("cover seeds have chi-distributed norms") {
  Rng rng(7);
  const int n = 400;
  double s1 = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double r = sample_cover(rng).frobenius_norm();
    s1 += r;
    s2 += r * r;
  }
  const double mean = s1 / n;
  CHECK(std::abs(mean - chi_mean(kLatentSize)) < 0.15);
  CHECK(s2 / n - mean * mean == doctest::Approx(0.5).epsilon(0.25));
}

TEST_CASE("scaled embedding rejects a non-positive scale") {
  Rng rng(8);
  const auto m = Message::random(rng);
  CHECK_THROWS_AS(embed_scaled_ss(m, test_q(), 0.0), Error);
  CHECK_THROWS_AS(embed_scaled_ss(m, test_q(), -1.0), Error);
}

TEST_CASE("dimension mismatch between latent and carriers") {
  const auto q8 = derive_carrier_matrix(SecretKey::from_seed(1), 8);
  Rng rng(9);
  CHECK_THROWS_AS(embed_ss(Message::random(rng), q8), Error);
}
