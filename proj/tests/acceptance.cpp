// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <unistd.h>
#include <vector>

#include "latentsteg/calibration.hpp"
#include "latentsteg/carriers.hpp"
#include "latentsteg/channel.hpp"
#include "latentsteg/detector.hpp"
#include "latentsteg/embedding.hpp"
#include "latentsteg/evaluation.hpp"
#include "latentsteg/latent_io.hpp"
#include "latentsteg/report.hpp"
#include "latentsteg/rng.hpp"
#include "latentsteg/statmodel.hpp"

using namespace lsteg;
namespace fs = std::filesystem;

namespace {

int failures = 0;

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

void report(bool ok, const char* name, const std::string& detail) {
  if (!ok) ++failures;
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* spec, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, spec, a);
  return buf;
}

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

double ks_against_normal(std::vector<double> v, double mean, double var) {
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double d = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double f = 0.5 * std::erfc(-(v[i] - mean) / std::sqrt(2.0 * var));
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

ChannelConfig identity_channel() {
  ChannelConfig c;
  c.mode = ChannelMode::Isotropic;
  c.noise_std = 0.0;
  c.shrink_gamma = 1.0;
  return c;
}

void round_trip() {
  Timer t;
  SimulatedChannel ch(identity_channel());
  std::size_t errors = 0, bits = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto key = SecretKey::from_seed(1000 + i);
    const auto q = derive_carrier_matrix(key);
    Rng rng(derive_seed(0xACCE, {1, i}));
    const auto m = Message::random(rng);
    for (const auto& x : {embed_ss(m, q), embed_scaled_ss(m, q, rng).latent}) {
      const auto d = decode(ch.apply(x, i), q).message;
      for (std::size_t k = 0; k < m.size(); ++k) errors += d.bits()[k] != m.bits()[k];
      bits += m.size();
    }
  }
  const double secs = t.seconds();
  report(errors == 0 && secs < 30.0, "round-trip",
         std::to_string(errors) + " bit errors over " + std::to_string(bits) +
             " bits (100 keys x {ss, scaled-ss}), " + fmt("%.1f s (limit 30 s)", secs));
}

void carrier_algebra() {
  double worst64 = 0.0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto q = derive_carrier_matrix(SecretKey::from_seed(2000 + i), 64);
    const Eigen::MatrixXd e = q.matrix().transpose() * q.matrix() - Eigen::MatrixXd::Identity(64, 64);
    worst64 = std::max(worst64, e.cwiseAbs().maxCoeff());
  }
  const auto q8 = derive_carrier_matrix(SecretKey::from_seed(7), 8);
  std::vector<Eigen::MatrixXd> a;
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) a.push_back(carrier(q8, i, j));
  double worst8 = 0.0;
  for (std::size_t u = 0; u < a.size(); ++u)
    for (std::size_t v = 0; v < a.size(); ++v) {
      const double ip = (a[u].array() * a[v].array()).sum();
      worst8 = std::max(worst8, std::abs(ip - (u == v ? 1.0 : 0.0)));
    }
  report(worst64 < 1e-10 && worst8 < 1e-10, "carrier-algebra",
         fmt("max |Q^T Q - I| = %.2e over 100 keys at d=64; ", worst64) +
             fmt("max carrier inner-product error = %.2e over 4096 pairs at d=8 (limit 1e-10)", worst8));
}

void norm_laws() {
  Timer t;
  const auto q = derive_carrier_matrix(SecretKey::from_seed(3000));
  double worst_rel = 0.0;
  const int draws = 100000;
  std::vector<double> cover(draws), scaled(draws);
  for (int i = 0; i < draws; ++i) {
    const auto ui = static_cast<std::uint64_t>(i);
    Rng cr(derive_seed(0xACCE, {2, ui}));
    cover[static_cast<std::size_t>(i)] = sample_cover(cr).frobenius_norm();
    Rng sr(derive_seed(0xACCE, {3, ui}));
    const auto m = Message::random(sr);
    scaled[static_cast<std::size_t>(i)] = embed_scaled_ss(m, q, sr).latent.frobenius_norm();
    if (i < 1000) worst_rel = std::max(worst_rel, std::abs(embed_ss(m, q).frobenius_norm() - 128.0) / 128.0);
  }
  const double mean = chi_mean(kLatentSize);
  const double ks_cover = ks_against_normal(cover, mean, 0.5);
  const double ks_scaled = ks_against_normal(scaled, mean, 0.5);
  report(worst_rel < 1e-6 && ks_cover < 0.01 && ks_scaled < 0.01, "norm-laws",
         fmt("SS seed norm max rel. deviation from 128 = %.2e (limit 1e-6); ", worst_rel) +
             fmt("KS vs N(chi mean, 1/2): cover %.4f, ", ks_cover) +
             fmt("scaled-ss %.4f (limit 0.01) over 100k draws each; ", ks_scaled) +
             fmt("%.1f s", t.seconds()));
}

void norm_model_moments() {
  Timer t;
  NormTargets targets;
  targets.mean = 122.5;
  targets.var_stego = 4.91;
  targets.shrink_gamma = 122.5 / 128.0;
  const auto cal = calibrate_channel(targets, ChannelMode::NormModel);
  ExperimentConfig cfg;
  cfg.channel = cal.config;
  const auto corpus = generate_corpus(cfg);
  std::vector<double> c, s;
  for (const auto& p : corpus.pairs) {
    c.push_back(p.cover_norm);
    s.push_back(p.stego_norm);
  }
  const auto mc = moments(c);
  const auto ms = moments(s);
  const double model = hypothesis_models(kLatentSize, cal.config).cover.variance;
  const double secs = t.seconds();
  const bool ok = std::abs(mc.var - model) <= 0.10 * model && std::abs(ms.var - 4.91) <= 0.10 * 4.91 &&
                  std::abs(mc.mean - 122.5) <= 0.1 && std::abs(ms.mean - 122.5) <= 0.1 && secs < 120.0;
  report(ok, "norm-model-moments",
         fmt("cover var %.3f", mc.var) + fmt(" vs model %.3f (+-10%%)", model) +
             fmt(" [reference empirical 5.50]; stego var %.3f (4.91 +-10%%); ", ms.var) +
             fmt("means cover %.3f", mc.mean) + fmt(" stego %.3f (122.5 +-0.1); ", ms.mean) +
             fmt("sigma2_alpha %.4f; ", cal.config.sigma2_alpha) + fmt("%.1f s (limit 120 s)", secs));
}

ChannelConfig variance_matched_channel() {
  NormTargets targets;
  targets.var_cover = 5.50;
  targets.var_stego = 4.91;
  return calibrate_channel(targets, ChannelMode::NormModel).config;
}

std::string pe_list(const ErrorReport& r) {
  std::string s = "{";
  for (std::size_t k = 0; k < r.pe_by_batch.size(); ++k)
    s += (k ? ", " : "") + fmt("%.1f", 100.0 * r.pe_by_batch[k].pe_optimal);
  return s + "}%";
}

void pe_ss_and_determinism(const ChannelConfig& channel) {
  Timer t;
  ExperimentConfig cfg;
  cfg.channel = channel;
  const auto rep = run_cv(generate_corpus(cfg), cfg);
  const double secs = t.seconds();
  const double expected[] = {0.485, 0.453, 0.334};
  bool within = rep.pe_by_batch.size() == 3;
  bool strict = true;
  for (std::size_t k = 0; within && k < 3; ++k) {
    within = within && std::abs(rep.pe_by_batch[k].pe_optimal - expected[k]) <= 0.03;
    if (k > 0) strict = strict && rep.pe_by_batch[k].pe_optimal < rep.pe_by_batch[k - 1].pe_optimal;
  }
  report(within && strict && secs < 600.0, "pe-ss-norm-model",
         "P_E at batch {1,10,100} = " + pe_list(rep) + " vs {48.5, 45.3, 33.4}% +-3; " +
             (strict ? "strictly decreasing; " : "NOT strictly decreasing; ") +
             fmt("channel shrink %.4f", channel.shrink_gamma) +
             fmt(" sigma2_alpha %.4f; ", channel.sigma2_alpha) +
             fmt("corpus norm var cover %.3f", rep.cover_norms.variance) +
             fmt(" stego %.3f; ", rep.stego_norms.variance) + fmt("%.1f s (limit 600 s)", secs));

  // Second run of the whole pipeline with a different worker count.
  const fs::path base = fs::temp_directory_path() / ("lsteg-accept-" + std::to_string(::getpid()));
  fs::remove_all(base);
  emit_report(rep, base / "a");
  emit_report(run_cv(generate_corpus(cfg, 2), cfg), base / "b");
  const auto ja = read_file(base / "a" / "report.json");
  const auto jb = read_file(base / "b" / "report.json");
  report(ja == jb, "determinism",
         "report.json from two runs of the same config (1 vs 2 worker threads) is " +
             std::string(ja == jb ? "byte-identical" : "DIFFERENT") + " (" +
             std::to_string(ja.size()) + " bytes)");
  fs::remove_all(base);
}

void fix_effectiveness(const ChannelConfig& channel) {
  ExperimentConfig cfg;
  cfg.channel = channel;
  cfg.encoder = Encoder::ScaledSs;
  const auto rep = run_cv(generate_corpus(cfg), cfg);
  bool ok = true;
  for (const auto& b : rep.pe_by_batch) ok = ok && b.pe_optimal >= 0.48;
  report(ok, "fix-scaled-ss", "P_E at batch {1,10,100} = " + pe_list(rep) + " (each >= 48%)");
}

void bit_accuracy() {
  Timer t;
  const double target = 0.9753;
  const auto cal = calibrate_channel(AccuracyTarget{target}, ChannelMode::Isotropic);
  double acc[2] = {0, 0};
  std::uint64_t bits = 0;
  for (int e = 0; e < 2; ++e) {
    ExperimentConfig cfg;
    cfg.n_pairs = 64;  // 64 x 16384 = 1,048,576 bits
    cfg.folds = 2;
    cfg.fit_size = 2;
    cfg.batch_sizes = {1};
    cfg.master_seed = 0xB17;
    cfg.channel = cal.config;
    cfg.encoder = e == 0 ? Encoder::Ss : Encoder::ScaledSs;
    const auto corpus = generate_corpus(cfg);
    std::uint64_t correct = 0;
    for (const auto& p : corpus.pairs) correct += p.bits_correct;
    bits = cfg.n_pairs * corpus.bits_per_message;
    acc[e] = static_cast<double>(correct) / static_cast<double>(bits);
  }
  const bool ok = std::abs(acc[0] - target) <= 0.005 && std::abs(acc[1] - target) <= 0.005 &&
                  std::abs(acc[0] - acc[1]) <= 0.005;
  report(ok, "bit-accuracy-isotropic",
         fmt("noise_std %.4f; ", cal.config.noise_std) + fmt("accuracy ss %.4f, ", acc[0]) +
             fmt("scaled-ss %.4f", acc[1]) + " over " + std::to_string(bits) +
             fmt(" bits each (target 0.9753 +-0.005, |ss - scaled| <= 0.005); %.1f s", t.seconds()));
}

void pe_oracle() {
  Rng rng(derive_seed(0xACCE, {4}));
  int mismatches = 0;
  for (int t = 0; t < 50; ++t) {
    std::vector<double> s0(1 + rng.below(20)), s1(1 + rng.below(20));
    for (auto& x : s0) x = std::round(3.0 * rng.normal()) / 2.0;
    for (auto& x : s1) x = std::round(3.0 * rng.normal() + 1.5) / 2.0;
    std::vector<double> ts{-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    ts.insert(ts.end(), s0.begin(), s0.end());
    ts.insert(ts.end(), s1.begin(), s1.end());
    double best = 1.0;
    for (double th : ts) {
      std::size_t fa = 0, md = 0;
      for (double s : s0) fa += s > th;
      for (double s : s1) md += !(s > th);
      best = std::min(best, 0.5 * (static_cast<double>(fa) / static_cast<double>(s0.size()) +
                                   static_cast<double>(md) / static_cast<double>(s1.size())));
    }
    mismatches += compute_pe(s0, s1).pe != best;
  }
  report(mismatches == 0, "pe-brute-force",
         std::to_string(mismatches) + " mismatches against an exhaustive threshold sweep on 50 score sets");
}

void lrt_algebra() {
  Rng rng(derive_seed(0xACCE, {5}));
  int add_fail = 0, anti_fail = 0;
  for (int t = 0; t < 1000; ++t) {
    const GaussianFit c{120.0 + 5.0 * rng.uniform(), 3.0 + 4.0 * rng.uniform(), 1000};
    const GaussianFit s{120.0 + 5.0 * rng.uniform(), 3.0 + 4.0 * rng.uniform(), 1000};
    std::vector<double> batch(2 + rng.below(199));
    for (auto& x : batch) x = 122.5 + 2.5 * rng.normal();
    const std::span<const double> all(batch);
    const std::size_t cut = 1 + rng.below(batch.size() - 1);
    const double whole = lrt_pooled(all, c, s).log_lambda;
    double singles = 0.0;
    for (std::size_t k = 0; k < batch.size(); ++k) singles += lrt_pooled(all.subspan(k, 1), c, s).log_lambda;
    add_fail += whole != lrt_pooled(all.first(cut), c, s).log_lambda +
                             lrt_pooled(all.subspan(cut), c, s).log_lambda ||
                whole != singles;
    anti_fail += lrt_pooled(all, s, c).log_lambda != -whole;
  }
  report(add_fail == 0 && anti_fail == 0, "lrt-algebra",
         std::to_string(add_fail) + " additivity and " + std::to_string(anti_fail) +
             " antisymmetry violations over 1000 random batches (exact equality)");
}

}  // namespace

int main() {
  std::printf("latentsteg %s acceptance\n", version_string());
  const std::vector<std::function<void()>> checks = {
      round_trip, carrier_algebra, norm_laws, norm_model_moments,
      [] {
        const auto ch = variance_matched_channel();
        pe_ss_and_determinism(ch);
        fix_effectiveness(ch);
      },
      bit_accuracy, pe_oracle, lrt_algebra};
  for (const auto& c : checks) {
    try {
      c();
    } catch (const std::exception& e) {
      report(false, "exception", e.what());
    }
  }
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
