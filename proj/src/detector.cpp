#include "latentsteg/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "latentsteg/error.hpp"

namespace lsteg {

namespace {

constexpr double kQuantum = 0x1.0p-32;
constexpr double kTermLimit = 0x1.0p20;

std::int64_t to_fixed(double log_ratio) noexcept {
  if (std::isnan(log_ratio)) return 0;
  const double clamped = std::clamp(log_ratio, -kTermLimit, kTermLimit);
  return std::llround(clamped / kQuantum);
}

double from_fixed(std::int64_t v) noexcept { return static_cast<double>(v) * kQuantum; }

double raw_log_ratio(double r, const GaussianFit& cover_fit, const GaussianFit& stego_fit) noexcept {
  return log_density(r, stego_fit) - log_density(r, cover_fit);
}

}  // namespace

bool LrtScore::decision_at(double tau) const noexcept {
  return log_lambda > std::log(tau);
}

LrtScore lrt_single(double r, const GaussianFit& cover_fit, const GaussianFit& stego_fit) noexcept {
  return {from_fixed(to_fixed(raw_log_ratio(r, cover_fit, stego_fit)))};
}

LrtScore lrt_single(const NormSample& r, const GaussianFit& cover_fit,
                    const GaussianFit& stego_fit) noexcept {
  return lrt_single(r.value, cover_fit, stego_fit);
}

LrtScore lrt_pooled(std::span<const double> batch, const GaussianFit& cover_fit,
                    const GaussianFit& stego_fit) {
  if (batch.empty()) throw Error(ErrorCode::InvalidArgument, "cannot score an empty batch");
  std::int64_t sum = 0;
  for (double r : batch) sum += to_fixed(raw_log_ratio(r, cover_fit, stego_fit));
  return {from_fixed(sum)};
}

LrtScore lrt_pooled(std::span<const NormSample> batch, const GaussianFit& cover_fit,
                    const GaussianFit& stego_fit) {
  if (batch.empty()) throw Error(ErrorCode::InvalidArgument, "cannot score an empty batch");
  std::int64_t sum = 0;
  for (const auto& r : batch) sum += to_fixed(raw_log_ratio(r.value, cover_fit, stego_fit));
  return {from_fixed(sum)};
}

}  // namespace lsteg
