#include "latentsteg/statmodel.hpp"

#include <cmath>
#include <numbers>
#include <vector>

#include "latentsteg/channel.hpp"
#include "latentsteg/error.hpp"
#include "latentsteg/rng.hpp"

namespace lsteg {

std::string_view to_string(NormLabel l) noexcept {
  switch (l) {
    case NormLabel::Cover: return "cover";
    case NormLabel::Stego: return "stego";
    case NormLabel::Unknown: return "unknown";
  }
  return "unknown";
}

double sample_chi(std::uint64_t n, Rng& rng) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "chi distribution needs n >= 1");
  return rng.chi(n);
}

double chi_mean(std::uint64_t n) {
  const double h = 0.5 * static_cast<double>(n);
  return std::numbers::sqrt2 * std::exp(std::lgamma(h + 0.5) - std::lgamma(h));
}

double chi_variance(std::uint64_t n) {
  const double m = chi_mean(n);
  return static_cast<double>(n) - m * m;
}

HypothesisModels hypothesis_models(std::uint64_t n, const ChannelConfig& cfg) {
  if (cfg.mode != ChannelMode::NormModel)
    throw Error(ErrorCode::Config, "hypothesis models are defined for the norm-model channel");
  cfg.validate();
  const double g = cfg.shrink_gamma;
  const double mean = g * std::sqrt(static_cast<double>(n));
  return {{mean, 0.5 * g * g + cfg.sigma2_alpha}, {mean, cfg.sigma2_alpha}};
}

GaussianFit fit_gaussian(std::span<const double> values) {
  if (values.size() < 2)
    throw Error(ErrorCode::InvalidArgument, "a Gaussian fit needs at least 2 samples");
  const double count = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "norms must be finite");
    sum += v;
  }
  const double mu = sum / count;
  double ss = 0.0;
  for (double v : values) ss += (v - mu) * (v - mu);
  return {mu, std::max(ss / count, kVarianceFloor), values.size()};
}

GaussianFit fit_gaussian(std::span<const NormSample> samples) {
  std::vector<double> v;
  v.reserve(samples.size());
  for (const auto& s : samples) v.push_back(s.value);
  return fit_gaussian(v);
}

double log_density(double x, const GaussianFit& fit) noexcept {
  const double d = x - fit.mu_hat;
  return -0.5 * std::log(2.0 * std::numbers::pi * fit.sigma2_hat) -
         d * d / (2.0 * fit.sigma2_hat);
}

}  // namespace lsteg
