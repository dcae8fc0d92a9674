#pragma once

#include <span>

#include "latentsteg/statmodel.hpp"

namespace lsteg {

/// Log of the stego-to-cover likelihood ratio.
///
/// Per-sample log ratios are rounded to a multiple of 2^-32 (and saturated at
/// +-2^20) and accumulated in 64-bit integers, so pooling is associative: the
/// score of A u B equals score(A) + score(B) bit for bit while
/// |log_lambda| < 2^21.
struct LrtScore {
  double log_lambda = 0.0;

  /// Stego iff log_lambda > log(tau); a tie decides cover.
  bool decision_at(double tau) const noexcept;
};

/// log N(r; fit1) - log N(r; fit0).
LrtScore lrt_single(double r, const GaussianFit& cover_fit, const GaussianFit& stego_fit) noexcept;
LrtScore lrt_single(const NormSample& r, const GaussianFit& cover_fit,
                    const GaussianFit& stego_fit) noexcept;

/// Sum of per-sample log ratios over a batch assumed to share one class.
LrtScore lrt_pooled(std::span<const double> batch, const GaussianFit& cover_fit,
                    const GaussianFit& stego_fit);
LrtScore lrt_pooled(std::span<const NormSample> batch, const GaussianFit& cover_fit,
                    const GaussianFit& stego_fit);

}  // namespace lsteg
