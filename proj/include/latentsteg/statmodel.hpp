#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace lsteg {

class Rng;
struct ChannelConfig;

enum class NormLabel { Cover, Stego, Unknown };

std::string_view to_string(NormLabel l) noexcept;

/// One observed Frobenius norm, r_X or r_Y.
struct NormSample {
  double value = 0.0;
  NormLabel label = NormLabel::Unknown;
};

inline constexpr double kVarianceFloor = 1e-12;

/// Maximum-likelihood Gaussian fit of a norm population.
struct GaussianFit {
  double mu_hat = 0.0;
  double sigma2_hat = 1.0;
  std::uint64_t count = 0;

  friend bool operator==(const GaussianFit&, const GaussianFit&) = default;
};

/// One draw of chi_n, as sqrt(Gamma(n/2, 2)).
double sample_chi(std::uint64_t n, Rng& rng);

/// E[chi_n] = sqrt(2) Gamma((n+1)/2) / Gamma(n/2).
double chi_mean(std::uint64_t n);
/// Var[chi_n] = n - E[chi_n]^2.
double chi_variance(std::uint64_t n);

/// Mean and variance of a Gaussian; variance 0 stands for a Dirac mass.
struct NormalDescriptor {
  double mean = 0.0;
  double variance = 0.0;
};

struct HypothesisModels {
  NormalDescriptor cover;  // H0
  NormalDescriptor stego;  // H1
};

/// Norm laws after the norm-model channel with shrink g and distortion s2:
///   H0: N(g sqrt(n), g^2/2 + s2)    H1: N(g sqrt(n), s2)
HypothesisModels hypothesis_models(std::uint64_t n, const ChannelConfig& cfg);

/// mu = sample mean, sigma2 = max(biased variance, kVarianceFloor).
GaussianFit fit_gaussian(std::span<const double> values);
GaussianFit fit_gaussian(std::span<const NormSample> samples);

double log_density(double x, const GaussianFit& fit) noexcept;

}  // namespace lsteg
