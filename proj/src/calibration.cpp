#include "latentsteg/calibration.hpp"

#include <cmath>
#include <functional>

#include "latentsteg/carriers.hpp"
#include "latentsteg/embedding.hpp"
#include "latentsteg/error.hpp"
#include "latentsteg/rng.hpp"
#include "latentsteg/statmodel.hpp"

namespace lsteg {

namespace {

constexpr double kHitTolerance = 0.02;

struct Moments {
  double mean = 0.0;
  double var = 0.0;
};

Moments moments(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  const double m = s / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, ss / static_cast<double>(v.size())};
}

struct NormSim {
  Moments cover, stego;
};

// Every call replays the same random numbers, so the estimates move
// monotonically with the knobs. Both classes share the channel noise draws,
// which keeps the cover/stego variance gap free of that noise's sampling error.
NormSim simulate_norms(const ChannelConfig& cfg, const CalibrationOptions& opts) {
  const std::uint64_t n = kLatentSize;
  const double stego_norm = std::sqrt(static_cast<double>(n));
  Rng rx(derive_seed(opts.seed, {1}));
  Rng rc(derive_seed(opts.seed, {2}));
  Rng rs(derive_seed(opts.seed, {2}));
  std::vector<double> cover(opts.samples), stego(opts.samples);
  for (std::size_t i = 0; i < opts.samples; ++i) {
    cover[i] = norm_model_target(sample_chi(n, rx), cfg, rc);
    stego[i] = norm_model_target(stego_norm, cfg, rs);
  }
  return {moments(cover), moments(stego)};
}

// Finds x in [lo, hi] with f(x) = target for increasing f. `hi` is doubled
// until it brackets the target.
double bisect_increasing(const std::function<double(double)>& f, double target, double lo,
                         double hi, int max_steps, int& evaluations, const char* what) {
  int expand = 0;
  while (f(hi) < target) {
    ++evaluations;
    hi *= 2.0;
    if (++expand > 200) throw Error(ErrorCode::Unattainable, std::string("cannot bracket ") + what);
  }
  double mid = hi;
  double value = f(mid);
  for (int step = 0; step < max_steps; ++step) {
    mid = 0.5 * (lo + hi);
    value = f(mid);
    ++evaluations;
    if (value == target) break;
    (value < target ? lo : hi) = mid;
    if (hi - lo <= 1e-12 * std::max(1.0, hi)) break;
  }
  const double scale = std::max(std::abs(target), 1e-9);
  if (std::abs(value - target) > kHitTolerance * scale)
    throw Error(ErrorCode::NoConvergence,
                std::string("bisection on ") + what + " did not reach the target after " +
                    std::to_string(max_steps) + " steps");
  return mid;
}

CalibrationResult calibrate_norm(const NormTargets& t, const CalibrationOptions& opts) {
  if (!(t.var_stego >= 0.0) || !std::isfinite(t.var_stego))
    throw Error(ErrorCode::Unattainable, "var_stego must be finite and >= 0");
  if (t.var_cover && !(*t.var_cover > t.var_stego))
    throw Error(ErrorCode::Unattainable,
                "the norm-model channel needs var_cover > var_stego");
  if (t.mean && !(*t.mean > 0.0)) throw Error(ErrorCode::Unattainable, "mean must be > 0");
  if (t.shrink_gamma && !(*t.shrink_gamma > 0.0))
    throw Error(ErrorCode::Unattainable, "shrink_gamma must be > 0");

  CalibrationResult res;
  ChannelConfig cfg = opts.base;
  cfg.mode = ChannelMode::NormModel;
  cfg.noise_std = 0.0;
  if (t.shrink_gamma) cfg.shrink_gamma = *t.shrink_gamma;

  // The stego norm before the channel is constant, so its spread is the
  // distortion alone and sigma2 can be solved first.
  if (t.var_stego == 0.0) {
    cfg.sigma2_alpha = 0.0;
  } else {
    cfg.sigma2_alpha = bisect_increasing(
        [&](double s2) {
          ChannelConfig c = cfg;
          c.sigma2_alpha = s2;
          return simulate_norms(c, opts).stego.var;
        },
        t.var_stego, 0.0, std::max(1.0, 2.0 * t.var_stego), opts.max_steps, res.evaluations,
        "sigma2_alpha");
  }

  if (!t.shrink_gamma && t.var_cover) {
    cfg.shrink_gamma = bisect_increasing(
        [&](double g) {
          ChannelConfig c = cfg;
          c.shrink_gamma = g;
          return simulate_norms(c, opts).cover.var;
        },
        *t.var_cover, 1e-9, 2.0, opts.max_steps, res.evaluations, "shrink_gamma");
    if (t.mean) res.notes.push_back("mean target not fitted: shrink_gamma is set by var_cover");
  } else if (!t.shrink_gamma && t.mean) {
    cfg.shrink_gamma = bisect_increasing(
        [&](double g) {
          ChannelConfig c = cfg;
          c.shrink_gamma = g;
          return simulate_norms(c, opts).stego.mean;
        },
        *t.mean, 1e-9, 2.0, opts.max_steps, res.evaluations, "shrink_gamma");
  } else if (t.shrink_gamma && t.var_cover) {
    res.notes.push_back("var_cover target not fitted: shrink_gamma was given");
  }

  cfg.validate();
  const NormSim sim = simulate_norms(cfg, opts);
  ++res.evaluations;
  res.config = cfg;
  res.achieved = {{"mean_cover", sim.cover.mean},
                  {"var_cover", sim.cover.var},
                  {"mean_stego", sim.stego.mean},
                  {"var_stego", sim.stego.var},
                  {"samples", opts.samples}};
  return res;
}

CalibrationResult calibrate_accuracy(const AccuracyTarget& t, const CalibrationOptions& opts) {
  if (!(t.bit_accuracy > 0.5 && t.bit_accuracy <= 1.0))
    throw Error(ErrorCode::Unattainable, "bit_accuracy must lie in (0.5, 1]");
  if (opts.latents == 0) throw Error(ErrorCode::InvalidArgument, "latents must be >= 1");

  CalibrationResult res;
  ChannelConfig cfg = opts.base;
  cfg.mode = ChannelMode::Isotropic;
  cfg.sigma2_alpha = 0.0;

  const CarrierMatrix q = derive_carrier_matrix(SecretKey::from_seed(opts.seed), kLatentDim);
  std::vector<Message> messages;
  std::vector<LatentVector> seeds;
  Rng mrng(derive_seed(opts.seed, {10}));
  for (std::size_t i = 0; i < opts.latents; ++i) {
    messages.push_back(Message::random(mrng));
    seeds.push_back(embed_ss(messages.back(), q));
  }

  auto accuracy = [&](double noise) {
    ChannelConfig c = cfg;
    c.noise_std = noise;
    std::uint64_t correct = 0, total = 0;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      Rng nrng(derive_seed(opts.seed, {11, i}));
      const Decoded d = decode(apply_isotropic_channel(seeds[i], c, nrng), q);
      const auto a = d.message.bits();
      const auto b = messages[i].bits();
      for (std::size_t k = 0; k < a.size(); ++k) correct += a[k] == b[k];
      total += a.size();
    }
    return static_cast<double>(correct) / static_cast<double>(total);
  };

  if (t.bit_accuracy >= accuracy(0.0)) {
    cfg.noise_std = 0.0;
  } else {
    // Error rate increases with the noise.
    cfg.noise_std = bisect_increasing([&](double s) { return 1.0 - accuracy(s); },
                                      1.0 - t.bit_accuracy, 0.0, 1.0, opts.max_steps,
                                      res.evaluations, "noise_std");
  }
  ++res.evaluations;
  res.config = cfg;
  res.achieved = {{"bit_accuracy", accuracy(cfg.noise_std)},
                  {"bits", opts.latents * kLatentSize}};
  return res;
}

}  // namespace

CalibrationTargets parse_calibration_targets(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::Config, "calibration targets must be a JSON object");
  try {
    if (j.contains("bit_accuracy")) {
      for (const auto& [k, _] : j.items())
        if (k != "bit_accuracy")
          throw Error(ErrorCode::Config, "bit_accuracy cannot be combined with '" + k + "'");
      return AccuracyTarget{j.at("bit_accuracy").get<double>()};
    }
    NormTargets t;
    for (const auto& [k, _] : j.items())
      if (k != "mean" && k != "var_cover" && k != "var_stego" && k != "shrink_gamma")
        throw Error(ErrorCode::Config, "unknown calibration target '" + k + "'");
    if (!j.contains("var_stego"))
      throw Error(ErrorCode::Config, "norm targets need var_stego");
    t.var_stego = j.at("var_stego").get<double>();
    if (j.contains("mean")) t.mean = j.at("mean").get<double>();
    if (j.contains("var_cover")) t.var_cover = j.at("var_cover").get<double>();
    if (j.contains("shrink_gamma")) t.shrink_gamma = j.at("shrink_gamma").get<double>();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Config, std::string("calibration targets: ") + e.what());
  }
}

CalibrationResult calibrate_channel(const CalibrationTargets& targets, ChannelMode mode,
                                    const CalibrationOptions& opts) {
  if (opts.samples < 2) throw Error(ErrorCode::InvalidArgument, "samples must be >= 2");
  if (const auto* nt = std::get_if<NormTargets>(&targets)) {
    if (mode != ChannelMode::NormModel)
      throw Error(ErrorCode::Config, "norm targets calibrate the norm-model channel");
    return calibrate_norm(*nt, opts);
  }
  if (mode != ChannelMode::Isotropic)
    throw Error(ErrorCode::Config, "bit-accuracy targets calibrate the isotropic channel");
  return calibrate_accuracy(std::get<AccuracyTarget>(targets), opts);
}

}  // namespace lsteg
