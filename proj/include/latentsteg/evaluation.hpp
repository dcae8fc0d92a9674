#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "latentsteg/channel.hpp"
#include "latentsteg/embedding.hpp"
#include "latentsteg/statmodel.hpp"

namespace lsteg {

enum class Encoder { Ss, ScaledSs };

std::string_view to_string(Encoder e) noexcept;
Encoder parse_encoder(std::string_view s);

struct ExperimentConfig {
  std::size_t n_pairs = 20000;
  Encoder encoder = Encoder::Ss;
  ChannelConfig channel{};
  int folds = 20;
  std::size_t fit_size = 1000;
  std::vector<std::size_t> batch_sizes{1, 10, 100};
  double tau = 1.0;
  std::uint64_t master_seed = 0;
  /// Hex secret key; derived from master_seed when absent.
  std::optional<std::string> key_hex;
  std::size_t histogram_bins = 60;

  void validate() const;
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
};

/// Everything recorded for one prompt: a cover and a stego latent pushed
/// through the same channel parameterization.
struct PairRecord {
  std::size_t index = 0;
  double cover_norm = 0.0;
  double stego_norm = 0.0;
  /// Correctly decoded stego bits; only meaningful when Corpus::decoded.
  std::uint32_t bits_correct = 0;
};

struct Corpus {
  std::vector<PairRecord> pairs;
  bool decoded = false;
  std::size_t bits_per_message = kLatentSize;
};

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

/// Pair i draws its cover seed, message, chi scale and channel randomness
/// from sub-streams of master_seed indexed by i, so the corpus is identical
/// for any worker count. Stego latents are decoded when the channel perturbs
/// directions (isotropic or external).
Corpus generate_corpus(const ExperimentConfig& cfg, LatentChannel& channel,
                       unsigned threads = 0, const ProgressFn& progress = {});
Corpus generate_corpus(const ExperimentConfig& cfg, unsigned threads = 0);

struct PeResult {
  double pe = 0.5;
  /// Operating points for thresholds -inf, every distinct score, +inf.
  std::vector<double> p_fa;
  std::vector<double> p_md;
};

/// min over thresholds t of (P_FA(t) + P_MD(t)) / 2, deciding stego iff
/// score > t. scores0 are cover scores, scores1 stego scores.
PeResult compute_pe(std::span<const double> scores0, std::span<const double> scores1);

/// Average of P_FA and P_MD at the fixed rule score > log(tau).
double pe_at_threshold(std::span<const double> scores0, std::span<const double> scores1,
                       double log_tau);

double compute_bit_accuracy(std::span<const Message> decoded, std::span<const Message> truth);

struct FoldResult {
  int fold = 0;
  GaussianFit cover_fit;
  GaussianFit stego_fit;
  std::vector<double> pe_optimal;  // per batch size, config order
  std::vector<double> pe_at_tau;
};

struct BatchSummary {
  std::size_t batch_size = 1;
  std::size_t batches_per_class = 0;
  double pe_optimal = 0.5;  // mean over folds
  double pe_optimal_std = 0.0;
  double pe_at_tau = 0.5;
  std::vector<double> per_fold_optimal;
  std::vector<double> per_fold_at_tau;
  /// Operating-point curve of fold 0.
  std::vector<double> p_fa_curve;
  std::vector<double> p_md_curve;
};

struct NormStats {
  double mean = 0.0;
  double variance = 0.0;
  std::size_t count = 0;
};

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::uint64_t> cover;
  std::vector<std::uint64_t> stego;
};

struct ErrorReport {
  ExperimentConfig config;
  std::vector<BatchSummary> pe_by_batch;
  std::vector<FoldResult> folds;
  NormStats cover_norms;
  NormStats stego_norms;
  std::optional<HypothesisModels> model;
  std::optional<double> bit_accuracy;
  std::uint64_t bits_total = 0;
  Histogram histogram;
};

/// Cross-validation over pair indices: fold k fits on the first fit_size
/// pairs with index % folds == k and scores every other pair, in same-class
/// non-overlapping batches of a fold-seeded shuffle (leftovers dropped).
ErrorReport run_cv(const Corpus& corpus, const ExperimentConfig& cfg);

}  // namespace lsteg
