#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "latentsteg/embedding.hpp"

namespace lsteg {

class Rng;

enum class ChannelMode { NormModel, Isotropic, External };

std::string_view to_string(ChannelMode m) noexcept;
ChannelMode parse_channel_mode(std::string_view s);

inline constexpr double kDefaultShrink = 122.5 / 128.0;

/// Hyperparameters of the latent-to-latent channel Y = f(X, alpha).
struct ChannelConfig {
  ChannelMode mode = ChannelMode::NormModel;
  /// Variance of the Gaussian norm distortion (norm-model mode).
  double sigma2_alpha = 0.0;
  /// Multiplicative norm attenuation; 122.5 / 128 unless calibrated.
  double shrink_gamma = kDefaultShrink;
  /// Per-component noise standard deviation (isotropic mode).
  double noise_std = 0.0;
  // Recorded in metadata and forwarded to external channels only.
  int steps = 20;
  bool prompt_known = true;
  double guidance = 5.0;
  std::optional<std::string> prompt;
  std::uint64_t seed = 0;
  /// Per-request timeout for external channels.
  int timeout_ms = 600000;

  /// Throws Error(Config) on a negative variance, non-positive shrink, etc.
  void validate() const;

  nlohmann::json to_json() const;
  static ChannelConfig from_json(const nlohmann::json& j);

  friend bool operator==(const ChannelConfig&, const ChannelConfig&) = default;
};

/// gamma * r + eps with eps ~ N(0, sigma2_alpha). A negative result is
/// re-drawn once and then clamped to 1e-6.
double norm_model_target(double r, const ChannelConfig& cfg, Rng& rng);

/// Keeps the direction of X and sets its norm to norm_model_target(||X||).
LatentVector apply_norm_model_channel(const LatentVector& x, const ChannelConfig& cfg,
                                      Rng& rng);

/// Y = gamma * (X + N), N iid N(0, noise_std^2).
LatentVector apply_isotropic_channel(const LatentVector& x, const ChannelConfig& cfg,
                                     Rng& rng);

/// A channel usable from the experiment runner. `seed` fully determines the
/// randomness of one application.
class LatentChannel {
 public:
  virtual ~LatentChannel() = default;
  virtual LatentVector apply(const LatentVector& x, std::uint64_t seed) = 0;
  /// False when requests must be issued one at a time.
  virtual bool concurrent() const noexcept { return true; }
  virtual const ChannelConfig& config() const noexcept = 0;
};

class SimulatedChannel final : public LatentChannel {
 public:
  explicit SimulatedChannel(ChannelConfig cfg);
  LatentVector apply(const LatentVector& x, std::uint64_t seed) override;
  const ChannelConfig& config() const noexcept override { return cfg_; }

 private:
  ChannelConfig cfg_;
};

/// Simulated channel for norm-model / isotropic configs, or an ExternalChannel
/// speaking the JSON-lines protocol when `exec_command` is set.
std::unique_ptr<LatentChannel> make_channel(const ChannelConfig& cfg,
                                            const std::optional<std::string>& exec_command = {});

}  // namespace lsteg
