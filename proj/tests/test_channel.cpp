#include <cmath>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "latentsteg/carriers.hpp"
#include "latentsteg/channel.hpp"
#include "latentsteg/embedding.hpp"
#include "latentsteg/error.hpp"
#include "latentsteg/rng.hpp"

using namespace lsteg;

namespace {

struct Moments {
  double mean, var;
};

Moments moments(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  const double m = s / static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, ss / static_cast<double>(v.size())};
}

LatentVector latent_with_norm(double r) {
  std::vector<double> v(kLatentSize, 0.0);
  v[0] = r;
  return {Shape{}, v, LatentRole::Seed, Provenance::StegoSs};
}

}  // namespace

TEST_CASE("identity configurations leave the latent untouched") {
  Rng rng(1);
  const auto x = sample_cover(rng);
  ChannelConfig nm;
  nm.shrink_gamma = 1.0;
  Rng r1(5);
  const auto y = apply_norm_model_channel(x, nm, r1);
  CHECK(std::equal(x.values().begin(), x.values().end(), y.values().begin()));
  CHECK(y.role() == LatentRole::Inverted);
  CHECK(y.provenance() == x.provenance());

  ChannelConfig iso;
  iso.mode = ChannelMode::Isotropic;
  iso.shrink_gamma = 1.0;
  Rng r2(5);
  const auto z = apply_isotropic_channel(x, iso, r2);
  CHECK(std::equal(x.values().begin(), x.values().end(), z.values().begin()));
}

TEST_CASE("norm-model channel only rescales") {
  Rng rng(2);
  const auto x = sample_cover(rng);
  ChannelConfig cfg;
  cfg.sigma2_alpha = 4.91;
  Rng r(3);
  const auto y = apply_norm_model_channel(x, cfg, r);
  const double k = y.values()[0] / x.values()[0];
  for (std::size_t i = 0; i < kLatentSize; i += 97)
    CHECK(y.values()[i] == doctest::Approx(k * x.values()[i]).epsilon(1e-12));
}

TEST_CASE("norm-model stego and cover norm moments") {
  ChannelConfig cfg;
  cfg.sigma2_alpha = 4.91;
  const int n = 20000;
  std::vector<double> stego(n), cover(n);
  Rng rng(4), cov(5);
  for (int i = 0; i < n; ++i) {
    stego[static_cast<std::size_t>(i)] = norm_model_target(128.0, cfg, rng);
    cover[static_cast<std::size_t>(i)] = norm_model_target(cov.chi(kLatentSize), cfg, rng);
  }
  const auto s = moments(stego);
  const auto c = moments(cover);
  CHECK(std::abs(s.mean - 122.5) < 0.1);
  CHECK(s.var == doctest::Approx(4.91).epsilon(0.10));
  const double g = cfg.shrink_gamma;
  CHECK(c.var == doctest::Approx(g * g * 0.5 + 4.91).epsilon(0.10));
  CHECK(std::abs(c.mean - 122.5) < 0.1);
}

TEST_CASE("negative norm targets are redrawn and then clamped") {
  ChannelConfig cfg;
  cfg.shrink_gamma = 1.0;
  cfg.sigma2_alpha = 1e6;
  int clamped = 0;
  for (std::uint64_t s = 0; s < 2000; ++s) {
    Rng rng(s);
    const double t = norm_model_target(1.0, cfg, rng);
    REQUIRE(t > 0.0);
    clamped += t == 1e-6;
  }
  // P(two negatives in a row) ~ 1/4
  CHECK(clamped > 400);
  CHECK(clamped < 600);
  Rng rng(1);
  auto y = apply_norm_model_channel(latent_with_norm(1.0), cfg, rng);
  CHECK(y.frobenius_norm() > 0.0);
}

TEST_CASE("isotropic noise statistics") {
  ChannelConfig cfg;
  cfg.mode = ChannelMode::Isotropic;
  cfg.noise_std = 0.5;
  cfg.shrink_gamma = 0.9;
  const LatentVector zero(Shape{}, std::vector<double>(kLatentSize, 0.0), LatentRole::Seed,
                          Provenance::Cover);
  Rng rng(6);
  const auto y = apply_isotropic_channel(zero, cfg, rng);
  const auto m = moments(std::vector<double>(y.values().begin(), y.values().end()));
  CHECK(std::abs(m.mean) < 0.01);
  CHECK(m.var == doctest::Approx(0.81 * 0.25).epsilon(0.05));
}

TEST_CASE("isotropic cover/stego norm-variance gap follows gamma^2 / (2 (1 + sigma^2))") {
  // Exact second-order expansion of the norm of X + sigma N for |X|^2 ~ chi2_n
  // versus |X| = sqrt(n).
  const auto q = derive_carrier_matrix(SecretKey::from_seed(3));
  for (double sigma : {0.25, 0.51}) {
    CAPTURE(sigma);
    ChannelConfig cfg;
    cfg.mode = ChannelMode::Isotropic;
    cfg.noise_std = sigma;
    cfg.shrink_gamma = 0.95;
    const int n = 5000;
    std::vector<double> cover(n), stego(n);
    for (int i = 0; i < n; ++i) {
      Rng rng(derive_seed(77, {static_cast<std::uint64_t>(i)}));
      const auto x0 = sample_cover(rng);
      const auto x1 = embed_ss(Message::random(rng), q);
      cover[static_cast<std::size_t>(i)] = apply_isotropic_channel(x0, cfg, rng).frobenius_norm();
      stego[static_cast<std::size_t>(i)] = apply_isotropic_channel(x1, cfg, rng).frobenius_norm();
    }
    const double g2 = cfg.shrink_gamma * cfg.shrink_gamma;
    const double s2 = sigma * sigma;
    const auto c = moments(cover);
    const auto s = moments(stego);
    CHECK(c.var == doctest::Approx(g2 * (1.0 + s2) / 2.0).epsilon(0.06));
    CHECK(s.var == doctest::Approx(g2 * (s2 + s2 * s2 / 2.0) / (1.0 + s2)).epsilon(0.06));
    CHECK(c.var - s.var == doctest::Approx(g2 / (2.0 * (1.0 + s2))).epsilon(0.25));
  }
}

TEST_CASE("decoded accuracy falls as isotropic noise grows") {
  const auto q = derive_carrier_matrix(SecretKey::from_seed(4));
  Rng mrng(8);
  const auto m = Message::random(mrng);
  const auto x = embed_ss(m, q);
  double prev = 1.1;
  for (double sigma : {0.0, 0.5, 1.0, 2.0}) {
    ChannelConfig cfg;
    cfg.mode = ChannelMode::Isotropic;
    cfg.noise_std = sigma;
    Rng rng(9);
    const auto d = decode(apply_isotropic_channel(x, cfg, rng), q).message;
    std::size_t same = 0;
    for (std::size_t i = 0; i < m.size(); ++i) same += d.bits()[i] == m.bits()[i];
    const double acc = static_cast<double>(same) / static_cast<double>(m.size());
    // per-bit error rate is Phi(-1/sigma)
    const double expected = sigma == 0.0 ? 1.0 : 1.0 - 0.5 * std::erfc(1.0 / (sigma * std::sqrt(2.0)));
    CHECK(acc == doctest::Approx(expected).epsilon(0.015));
    CHECK(acc < prev);
    prev = acc;
  }
}

TEST_CASE("config validation and JSON round trip") {
  ChannelConfig cfg;
  cfg.mode = ChannelMode::Isotropic;
  cfg.noise_std = 0.3;
  cfg.prompt = "a cat";
  cfg.seed = 99;
  CHECK(ChannelConfig::from_json(cfg.to_json()) == cfg);

  auto j = cfg.to_json();
  j["bogus"] = 1;
  CHECK_THROWS_AS(ChannelConfig::from_json(j), Error);
  CHECK_THROWS_AS(ChannelConfig::from_json(nlohmann::json{{"mode", "warp"}}), Error);
  CHECK_THROWS_AS(ChannelConfig::from_json(nlohmann::json{{"sigma2_alpha", -1.0}}), Error);
  CHECK_THROWS_AS(ChannelConfig::from_json(nlohmann::json{{"shrink_gamma", 0.0}}), Error);
  CHECK_THROWS_AS(ChannelConfig::from_json(nlohmann::json{{"steps", 0}}), Error);
  CHECK_THROWS_AS(ChannelConfig::from_json(nlohmann::json{{"noise_std", "x"}}), Error);
  CHECK_THROWS_AS(ChannelConfig::from_json(nlohmann::json::array()), Error);

  ChannelConfig wrong;
  Rng rng(1);
  CHECK_THROWS_AS(apply_isotropic_channel(latent_with_norm(1.0), wrong, rng), Error);
}

TEST_CASE("simulated channel reseeds per call") {
  ChannelConfig cfg;
  cfg.sigma2_alpha = 2.0;
  SimulatedChannel ch(cfg);
  const auto x = latent_with_norm(100.0);
  CHECK(ch.apply(x, 1).values()[0] == ch.apply(x, 1).values()[0]);
  CHECK(ch.apply(x, 1).values()[0] != ch.apply(x, 2).values()[0]);
  ChannelConfig ext;
  ext.mode = ChannelMode::External;
  CHECK_THROWS_AS(make_channel(ext), Error);
}
