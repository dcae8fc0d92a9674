#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "latentsteg/channel.hpp"

namespace lsteg {

/// Norm statistics to reproduce with the norm-model channel. `var_stego`
/// fixes sigma2_alpha. The shrink is then taken from `shrink_gamma` if set,
/// else fitted to `var_cover`, else to `mean`, else left at the default.
/// Two knobs cannot hit mean and both variances at once; when `var_cover` is
/// given, `mean` is reported but not fitted.
struct NormTargets {
  std::optional<double> mean;
  std::optional<double> var_cover;
  double var_stego = 0.0;
  std::optional<double> shrink_gamma;
};

/// Decoded bit accuracy to reproduce with the isotropic channel.
struct AccuracyTarget {
  double bit_accuracy = 1.0;
};

using CalibrationTargets = std::variant<NormTargets, AccuracyTarget>;

CalibrationTargets parse_calibration_targets(const nlohmann::json& j);

struct CalibrationOptions {
  std::uint64_t seed = 0x5EED;
  /// Monte-Carlo norm pairs per evaluation (norm-model).
  std::size_t samples = 100000;
  /// Whole latents decoded per evaluation (isotropic); 8 latents = 131072 bits.
  std::size_t latents = 8;
  int max_steps = 60;
  /// Starting point for fields the calibration does not touch.
  ChannelConfig base{};
};

struct CalibrationResult {
  ChannelConfig config;
  /// Simulated statistics at the returned config.
  nlohmann::json achieved;
  int evaluations = 0;
  std::vector<std::string> notes;
};

/// Solves for (shrink_gamma, sigma2_alpha) or noise_std by bisection on
/// Monte-Carlo estimates drawn with common random numbers, so every estimate
/// is a deterministic monotone function of the knob being solved.
/// Throws Unattainable or NoConvergence.
CalibrationResult calibrate_channel(const CalibrationTargets& targets, ChannelMode mode,
                                    const CalibrationOptions& opts = {});

}  // namespace lsteg
