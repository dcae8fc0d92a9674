#include "latentsteg/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "latentsteg/carriers.hpp"
#include "latentsteg/detector.hpp"
#include "latentsteg/error.hpp"
#include "latentsteg/rng.hpp"

namespace lsteg {

namespace {

// Sub-stream tags under master_seed.
enum : std::uint64_t {
  kStreamCover = 1,
  kStreamMessage = 2,
  kStreamScale = 3,
  kStreamChannel = 4,
  kStreamShuffle = 5,
};

NormStats stats_of(const std::vector<double>& v) {
  NormStats s;
  s.count = v.size();
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.variance = ss / static_cast<double>(v.size());
  return s;
}

void shuffle(std::vector<double>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

std::vector<double> batch_scores(const std::vector<double>& pool, std::size_t b,
                                 const GaussianFit& f0, const GaussianFit& f1) {
  const std::size_t count = pool.size() / b;
  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k)
    out[k] = lrt_pooled(std::span(pool).subspan(k * b, b), f0, f1).log_lambda;
  return out;
}

Histogram histogram_of(const std::vector<PairRecord>& pairs, std::size_t bins) {
  Histogram h;
  h.cover.assign(bins, 0);
  h.stego.assign(bins, 0);
  if (pairs.empty()) return h;
  h.lo = std::numeric_limits<double>::infinity();
  h.hi = -h.lo;
  for (const auto& p : pairs) {
    h.lo = std::min({h.lo, p.cover_norm, p.stego_norm});
    h.hi = std::max({h.hi, p.cover_norm, p.stego_norm});
  }
  const double width = h.hi > h.lo ? (h.hi - h.lo) / static_cast<double>(bins) : 1.0;
  auto bin = [&](double x) {
    const auto k = static_cast<std::size_t>(std::max(0.0, std::floor((x - h.lo) / width)));
    return std::min(k, bins - 1);
  };
  for (const auto& p : pairs) {
    ++h.cover[bin(p.cover_norm)];
    ++h.stego[bin(p.stego_norm)];
  }
  return h;
}

}  // namespace

std::string_view to_string(Encoder e) noexcept {
  return e == Encoder::Ss ? "ss" : "scaled-ss";
}

Encoder parse_encoder(std::string_view s) {
  if (s == "ss") return Encoder::Ss;
  if (s == "scaled-ss") return Encoder::ScaledSs;
  throw Error(ErrorCode::Config, "unknown encoder '" + std::string(s) + "'");
}

// Config ---------------------------------------------------------------------

void ExperimentConfig::validate() const {
  channel.validate();
  if (n_pairs < 2) throw Error(ErrorCode::Config, "n_pairs must be >= 2");
  if (folds < 2) throw Error(ErrorCode::Config, "folds must be >= 2");
  if (fit_size < 2) throw Error(ErrorCode::Config, "fit_size must be >= 2");
  if (fit_size >= n_pairs) throw Error(ErrorCode::Config, "fit_size must be < n_pairs");
  if (batch_sizes.empty()) throw Error(ErrorCode::Config, "batch_sizes must not be empty");
  for (auto b : batch_sizes)
    if (b < 1) throw Error(ErrorCode::Config, "batch sizes must be >= 1");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw Error(ErrorCode::Config, "tau must be > 0");
  if (histogram_bins < 1) throw Error(ErrorCode::Config, "histogram_bins must be >= 1");
  if (key_hex) (void)SecretKey::from_hex(*key_hex);
  // Every fold must be able to supply fit_size pairs.
  const std::size_t smallest_fold = n_pairs / static_cast<std::size_t>(folds);
  if (smallest_fold < fit_size)
    throw Error(ErrorCode::Config, "fold arithmetic infeasible: " + std::to_string(folds) +
                                       " folds of " + std::to_string(n_pairs) +
                                       " pairs cannot each supply " +
                                       std::to_string(fit_size) + " fitting pairs");
  const std::size_t held_out = n_pairs - fit_size;
  for (auto b : batch_sizes)
    if (b > held_out)
      throw Error(ErrorCode::Config, "batch size " + std::to_string(b) +
                                         " exceeds the held-out pool of " +
                                         std::to_string(held_out));
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j{{"n_pairs", n_pairs},
                   {"encoder", to_string(encoder)},
                   {"channel", channel.to_json()},
                   {"folds", folds},
                   {"fit_size", fit_size},
                   {"batch_sizes", batch_sizes},
                   {"tau", tau},
                   {"master_seed", master_seed},
                   {"histogram_bins", histogram_bins}};
  j["key_hex"] = key_hex ? nlohmann::json(*key_hex) : nlohmann::json(nullptr);
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::Config, "experiment config must be a JSON object");
  static const char* const known[] = {"n_pairs", "encoder", "channel",     "folds",
                                      "fit_size", "batch_sizes", "tau", "master_seed",
                                      "key_hex", "histogram_bins"};
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw Error(ErrorCode::Config, "unknown experiment config field '" + key + "'");
  }
  ExperimentConfig c;
  try {
    c.n_pairs = j.value("n_pairs", c.n_pairs);
    if (j.contains("encoder")) c.encoder = parse_encoder(j.at("encoder").get<std::string>());
    if (j.contains("channel")) c.channel = ChannelConfig::from_json(j.at("channel"));
    c.folds = j.value("folds", c.folds);
    c.fit_size = j.value("fit_size", c.fit_size);
    if (j.contains("batch_sizes"))
      c.batch_sizes = j.at("batch_sizes").get<std::vector<std::size_t>>();
    c.tau = j.value("tau", c.tau);
    c.master_seed = j.value("master_seed", c.master_seed);
    if (j.contains("key_hex") && !j.at("key_hex").is_null())
      c.key_hex = j.at("key_hex").get<std::string>();
    c.histogram_bins = j.value("histogram_bins", c.histogram_bins);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Config, std::string("experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

// Corpus ---------------------------------------------------------------------

Corpus generate_corpus(const ExperimentConfig& cfg, LatentChannel& channel, unsigned threads,
                       const ProgressFn& progress) {
  cfg.validate();
  const SecretKey key =
      cfg.key_hex ? SecretKey::from_hex(*cfg.key_hex) : SecretKey::from_seed(cfg.master_seed);
  const CarrierMatrix q = derive_carrier_matrix(key, kLatentDim);
  const ChannelMode mode = channel.config().mode;

  Corpus corpus;
  corpus.decoded = mode != ChannelMode::NormModel;
  corpus.pairs.resize(cfg.n_pairs);

  auto run_pair = [&](std::size_t i) {
    Rng cover_rng(derive_seed(cfg.master_seed, {kStreamCover, i}));
    const LatentVector cover = sample_cover(cover_rng);

    Rng msg_rng(derive_seed(cfg.master_seed, {kStreamMessage, i}));
    const Message m = Message::random(msg_rng);
    LatentVector stego = [&] {
      if (cfg.encoder == Encoder::Ss) return embed_ss(m, q);
      Rng s_rng(derive_seed(cfg.master_seed, {kStreamScale, i}));
      return embed_scaled_ss(m, q, s_rng).latent;
    }();

    const std::uint64_t pair_seed = derive_seed(cfg.master_seed, {kStreamChannel, i});
    const LatentVector y0 = channel.apply(cover, derive_seed(pair_seed, {0}));
    const LatentVector y1 = channel.apply(stego, derive_seed(pair_seed, {1}));

    PairRecord& rec = corpus.pairs[i];
    rec.index = i;
    rec.cover_norm = y0.frobenius_norm();
    rec.stego_norm = y1.frobenius_norm();
    if (corpus.decoded) {
      const Decoded d = decode(y1, q);
      std::uint32_t correct = 0;
      const auto a = d.message.bits();
      const auto b = m.bits();
      for (std::size_t k = 0; k < a.size(); ++k) correct += a[k] == b[k];
      rec.bits_correct = correct;
    }
  };

  auto wrapped = [&](std::size_t i) {
    try {
      run_pair(i);
    } catch (const Error& e) {
      throw Error(e.code(), "pair " + std::to_string(i) + ": " + e.what());
    }
  };

  unsigned workers = threads ? threads : std::max(1U, std::thread::hardware_concurrency());
  if (!channel.concurrent()) workers = 1;
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, cfg.n_pairs));

  if (workers <= 1) {
    for (std::size_t i = 0; i < cfg.n_pairs; ++i) {
      wrapped(i);
      if (progress) progress(i + 1, cfg.n_pairs);
    }
    return corpus;
  }

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex mu;
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= cfg.n_pairs || failed.load()) return;
          try {
            wrapped(i);
          } catch (...) {
            std::lock_guard lock(mu);
            if (!first_error) first_error = std::current_exception();
            failed = true;
            return;
          }
          const std::size_t d = done.fetch_add(1) + 1;
          if (progress) {
            std::lock_guard lock(mu);
            progress(d, cfg.n_pairs);
          }
        }
      });
    }
  }
  if (first_error) std::rethrow_exception(first_error);
  return corpus;
}

Corpus generate_corpus(const ExperimentConfig& cfg, unsigned threads) {
  SimulatedChannel channel(cfg.channel);
  return generate_corpus(cfg, channel, threads);
}

// Metrics --------------------------------------------------------------------

PeResult compute_pe(std::span<const double> scores0, std::span<const double> scores1) {
  if (scores0.empty() || scores1.empty())
    throw Error(ErrorCode::InvalidArgument, "P_E needs scores from both classes");
  std::vector<double> a(scores0.begin(), scores0.end());
  std::vector<double> b(scores1.begin(), scores1.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double n0 = static_cast<double>(a.size());
  const double n1 = static_cast<double>(b.size());

  PeResult r;
  // Threshold -inf: everything is called stego.
  r.p_fa.push_back(1.0);
  r.p_md.push_back(0.0);
  r.pe = 0.5;
  std::size_t i = 0, j = 0;  // counts of cover / stego scores <= t
  while (i < a.size() || j < b.size()) {
    double t;
    if (j >= b.size() || (i < a.size() && a[i] <= b[j]))
      t = a[i];
    else
      t = b[j];
    while (i < a.size() && a[i] <= t) ++i;
    while (j < b.size() && b[j] <= t) ++j;
    const double fa = static_cast<double>(a.size() - i) / n0;
    const double md = static_cast<double>(j) / n1;
    r.p_fa.push_back(fa);
    r.p_md.push_back(md);
    r.pe = std::min(r.pe, 0.5 * (fa + md));
  }
  // Threshold +inf: nothing is called stego.
  r.p_fa.push_back(0.0);
  r.p_md.push_back(1.0);
  return r;
}

double pe_at_threshold(std::span<const double> scores0, std::span<const double> scores1,
                       double log_tau) {
  if (scores0.empty() || scores1.empty())
    throw Error(ErrorCode::InvalidArgument, "P_E needs scores from both classes");
  std::size_t fa = 0, md = 0;
  for (double s : scores0) fa += s > log_tau;
  for (double s : scores1) md += !(s > log_tau);
  return 0.5 * (static_cast<double>(fa) / static_cast<double>(scores0.size()) +
                static_cast<double>(md) / static_cast<double>(scores1.size()));
}

double compute_bit_accuracy(std::span<const Message> decoded, std::span<const Message> truth) {
  if (decoded.size() != truth.size())
    throw Error(ErrorCode::DimensionMismatch, "decoded and reference message counts differ");
  std::uint64_t correct = 0, total = 0;
  for (std::size_t k = 0; k < decoded.size(); ++k) {
    if (decoded[k].shape() != truth[k].shape())
      throw Error(ErrorCode::DimensionMismatch, "message shapes differ");
    const auto a = decoded[k].bits();
    const auto b = truth[k].bits();
    for (std::size_t i = 0; i < a.size(); ++i) correct += a[i] == b[i];
    total += a.size();
  }
  if (total == 0) throw Error(ErrorCode::InvalidArgument, "no bits to compare");
  return static_cast<double>(correct) / static_cast<double>(total);
}

// Cross-validation -------------------------------------------------------------

ErrorReport run_cv(const Corpus& corpus, const ExperimentConfig& cfg) {
  cfg.validate();
  if (corpus.pairs.size() != cfg.n_pairs)
    throw Error(ErrorCode::Config, "corpus holds " + std::to_string(corpus.pairs.size()) +
                                       " pairs, config expects " + std::to_string(cfg.n_pairs));

  // Work by pair index, never by storage position.
  std::vector<PairRecord> pairs = corpus.pairs;
  std::sort(pairs.begin(), pairs.end(),
            [](const PairRecord& x, const PairRecord& y) { return x.index < y.index; });
  for (std::size_t k = 0; k < pairs.size(); ++k)
    if (pairs[k].index != k)
      throw Error(ErrorCode::Config, "corpus pair indices must be 0..n_pairs-1");

  ErrorReport rep;
  rep.config = cfg;
  const auto folds = static_cast<std::size_t>(cfg.folds);
  const double log_tau = std::log(cfg.tau);

  for (auto b : cfg.batch_sizes) {
    BatchSummary s;
    s.batch_size = b;
    rep.pe_by_batch.push_back(s);
  }

  for (std::size_t k = 0; k < folds; ++k) {
    std::vector<double> fit0, fit1, pool0, pool1;
    std::size_t taken = 0;
    for (const auto& p : pairs) {
      if (p.index % folds == k && taken < cfg.fit_size) {
        fit0.push_back(p.cover_norm);
        fit1.push_back(p.stego_norm);
        ++taken;
      } else {
        pool0.push_back(p.cover_norm);
        pool1.push_back(p.stego_norm);
      }
    }
    if (taken < cfg.fit_size)
      throw Error(ErrorCode::Config, "fold arithmetic infeasible for fold " + std::to_string(k));

    FoldResult fr;
    fr.fold = static_cast<int>(k);
    fr.cover_fit = fit_gaussian(fit0);
    fr.stego_fit = fit_gaussian(fit1);

    Rng r0(derive_seed(cfg.master_seed, {kStreamShuffle, k, 0}));
    Rng r1(derive_seed(cfg.master_seed, {kStreamShuffle, k, 1}));
    shuffle(pool0, r0);
    shuffle(pool1, r1);

    for (std::size_t bi = 0; bi < cfg.batch_sizes.size(); ++bi) {
      const std::size_t b = cfg.batch_sizes[bi];
      const auto s0 = batch_scores(pool0, b, fr.cover_fit, fr.stego_fit);
      const auto s1 = batch_scores(pool1, b, fr.cover_fit, fr.stego_fit);
      PeResult pe = compute_pe(s0, s1);
      const double at_tau = pe_at_threshold(s0, s1, log_tau);
      fr.pe_optimal.push_back(pe.pe);
      fr.pe_at_tau.push_back(at_tau);
      BatchSummary& sum = rep.pe_by_batch[bi];
      sum.batches_per_class = std::min(s0.size(), s1.size());
      sum.per_fold_optimal.push_back(pe.pe);
      sum.per_fold_at_tau.push_back(at_tau);
      if (k == 0) {
        sum.p_fa_curve = std::move(pe.p_fa);
        sum.p_md_curve = std::move(pe.p_md);
      }
    }
    rep.folds.push_back(std::move(fr));
  }

  for (auto& s : rep.pe_by_batch) {
    const auto opt = stats_of(s.per_fold_optimal);
    s.pe_optimal = opt.mean;
    s.pe_optimal_std = std::sqrt(opt.variance);
    s.pe_at_tau = stats_of(s.per_fold_at_tau).mean;
  }

  std::vector<double> c, st;
  c.reserve(pairs.size());
  st.reserve(pairs.size());
  std::uint64_t correct = 0;
  for (const auto& p : pairs) {
    c.push_back(p.cover_norm);
    st.push_back(p.stego_norm);
    correct += p.bits_correct;
  }
  rep.cover_norms = stats_of(c);
  rep.stego_norms = stats_of(st);
  if (cfg.channel.mode == ChannelMode::NormModel)
    rep.model = hypothesis_models(kLatentSize, cfg.channel);
  if (corpus.decoded) {
    rep.bits_total = static_cast<std::uint64_t>(pairs.size()) * corpus.bits_per_message;
    rep.bit_accuracy = static_cast<double>(correct) / static_cast<double>(rep.bits_total);
  }
  rep.histogram = histogram_of(pairs, cfg.histogram_bins);
  return rep;
}

}  // namespace lsteg
