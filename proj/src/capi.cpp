#include "latentsteg/latentsteg.h"

#include <cstring>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>

#include "latentsteg/calibration.hpp"
#include "latentsteg/carriers.hpp"
#include "latentsteg/channel.hpp"
#include "latentsteg/detector.hpp"
#include "latentsteg/embedding.hpp"
#include "latentsteg/error.hpp"
#include "latentsteg/evaluation.hpp"
#include "latentsteg/external_channel.hpp"
#include "latentsteg/latent_io.hpp"
#include "latentsteg/report.hpp"
#include "latentsteg/rng.hpp"
#include "latentsteg/statmodel.hpp"

struct lsteg_key {
  lsteg::SecretKey key;
};
struct lsteg_carriers {
  lsteg::CarrierMatrix q;
};
struct lsteg_message {
  lsteg::Message m;
};
struct lsteg_latent {
  lsteg::LatentVector x;
};
struct lsteg_channel {
  std::unique_ptr<lsteg::LatentChannel> impl;
};
struct lsteg_fits {
  lsteg::GaussianFit cover;
  lsteg::GaussianFit stego;
};

namespace {

namespace fs = std::filesystem;

thread_local std::string g_last_error;

lsteg_status to_status(lsteg::ErrorCode c) {
  switch (c) {
    case lsteg::ErrorCode::InvalidArgument: return LSTEG_ERR_INVALID_ARGUMENT;
    case lsteg::ErrorCode::DimensionMismatch: return LSTEG_ERR_DIMENSION;
    case lsteg::ErrorCode::DegenerateBasis: return LSTEG_ERR_DEGENERATE_BASIS;
    case lsteg::ErrorCode::Config: return LSTEG_ERR_CONFIG;
    case lsteg::ErrorCode::Io: return LSTEG_ERR_IO;
    case lsteg::ErrorCode::Channel: return LSTEG_ERR_CHANNEL;
    case lsteg::ErrorCode::Unattainable: return LSTEG_ERR_UNATTAINABLE;
    case lsteg::ErrorCode::NoConvergence: return LSTEG_ERR_NO_CONVERGENCE;
  }
  return LSTEG_ERR_INTERNAL;
}

template <class F>
lsteg_status guard(F&& f) noexcept {
  g_last_error.clear();
  try {
    f();
    return LSTEG_OK;
  } catch (const lsteg::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = std::string("malformed JSON: ") + e.what();
    return LSTEG_ERR_CONFIG;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return LSTEG_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return LSTEG_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return LSTEG_ERR_INTERNAL;
  }
}

template <class T>
void require(const T* p, const char* what) {
  if (!p) throw lsteg::Error(lsteg::ErrorCode::InvalidArgument, std::string(what) + " is NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

nlohmann::json parse_json(const char* text, const char* what) {
  require(text, what);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw lsteg::Error(lsteg::ErrorCode::Config, std::string(what) + " is not valid JSON: " + e.what());
  }
}

}  // namespace

extern "C" {

const char* lsteg_version(void) { return lsteg::version_string(); }

const char* lsteg_last_error(void) { return g_last_error.c_str(); }

const char* lsteg_status_name(lsteg_status status) {
  switch (status) {
    case LSTEG_OK: return "ok";
    case LSTEG_ERR_INVALID_ARGUMENT: return "invalid-argument";
    case LSTEG_ERR_DIMENSION: return "dimension-mismatch";
    case LSTEG_ERR_DEGENERATE_BASIS: return "degenerate-basis";
    case LSTEG_ERR_CONFIG: return "config";
    case LSTEG_ERR_IO: return "io";
    case LSTEG_ERR_CHANNEL: return "channel";
    case LSTEG_ERR_UNATTAINABLE: return "unattainable";
    case LSTEG_ERR_NO_CONVERGENCE: return "no-convergence";
    case LSTEG_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

void lsteg_string_free(char* s) { std::free(s); }

// Keys -------------------------------------------------------------------------

lsteg_status lsteg_key_from_bytes(const uint8_t* bytes, size_t len, lsteg_key** out) {
  return guard([&] {
    require(bytes, "bytes");
    require(out, "out");
    *out = new lsteg_key{lsteg::SecretKey(std::vector<std::uint8_t>(bytes, bytes + len))};
  });
}

lsteg_status lsteg_key_from_hex(const char* hex, lsteg_key** out) {
  return guard([&] {
    require(hex, "hex");
    require(out, "out");
    *out = new lsteg_key{lsteg::SecretKey::from_hex(hex)};
  });
}

lsteg_status lsteg_key_from_seed(uint64_t seed, lsteg_key** out) {
  return guard([&] {
    require(out, "out");
    *out = new lsteg_key{lsteg::SecretKey::from_seed(seed)};
  });
}

lsteg_status lsteg_key_generate(lsteg_key** out) {
  return guard([&] {
    require(out, "out");
    std::random_device rd;
    std::vector<std::uint8_t> bytes(32);
    for (std::size_t i = 0; i < bytes.size(); i += 4) {
      const auto v = rd();
      for (std::size_t b = 0; b < 4; ++b) bytes[i + b] = static_cast<std::uint8_t>(v >> (8 * b));
    }
    *out = new lsteg_key{lsteg::SecretKey(std::move(bytes))};
  });
}

lsteg_status lsteg_key_bytes(const lsteg_key* key, uint8_t* buf, size_t cap, size_t* len) {
  return guard([&] {
    require(key, "key");
    const auto bytes = key->key.bytes();
    if (len) *len = bytes.size();
    if (buf) {
      if (cap < bytes.size())
        throw lsteg::Error(lsteg::ErrorCode::InvalidArgument, "key buffer too small");
      std::memcpy(buf, bytes.data(), bytes.size());
    }
  });
}

lsteg_status lsteg_key_fingerprint(const lsteg_key* key, char* buf, size_t cap) {
  return guard([&] {
    require(key, "key");
    require(buf, "buf");
    const std::string fp = key->key.fingerprint();
    if (cap < fp.size() + 1)
      throw lsteg::Error(lsteg::ErrorCode::InvalidArgument, "fingerprint buffer too small");
    std::memcpy(buf, fp.c_str(), fp.size() + 1);
  });
}

void lsteg_key_free(lsteg_key* key) { delete key; }

// Carriers ---------------------------------------------------------------------

lsteg_status lsteg_carriers_derive(const lsteg_key* key, int dim, lsteg_carriers** out) {
  return guard([&] {
    require(key, "key");
    require(out, "out");
    *out = new lsteg_carriers{lsteg::derive_carrier_matrix(key->key, dim)};
  });
}

int lsteg_carriers_dim(const lsteg_carriers* q) { return q ? q->q.dim() : 0; }

lsteg_status lsteg_carriers_copy(const lsteg_carriers* q, double* out, size_t len) {
  return guard([&] {
    require(q, "carriers");
    require(out, "out");
    const auto d = static_cast<std::size_t>(q->q.dim());
    if (len < d * d) throw lsteg::Error(lsteg::ErrorCode::DimensionMismatch, "buffer too small");
    for (std::size_t r = 0; r < d; ++r)
      for (std::size_t c = 0; c < d; ++c)
        out[r * d + c] = q->q.matrix()(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  });
}

void lsteg_carriers_free(lsteg_carriers* q) { delete q; }

// Messages ---------------------------------------------------------------------

lsteg_status lsteg_message_random(uint64_t seed, lsteg_message** out) {
  return guard([&] {
    require(out, "out");
    lsteg::Rng rng(seed);
    *out = new lsteg_message{lsteg::Message::random(rng)};
  });
}

lsteg_status lsteg_message_unpack(const uint8_t* bytes, size_t len, lsteg_message** out) {
  return guard([&] {
    require(bytes, "bytes");
    require(out, "out");
    *out = new lsteg_message{lsteg::Message::unpack(std::span(bytes, len))};
  });
}

lsteg_status lsteg_message_pack(const lsteg_message* m, uint8_t* buf, size_t cap, size_t* len) {
  return guard([&] {
    require(m, "message");
    const auto packed = m->m.pack();
    if (len) *len = packed.size();
    if (buf) {
      if (cap < packed.size())
        throw lsteg::Error(lsteg::ErrorCode::InvalidArgument, "message buffer too small");
      std::memcpy(buf, packed.data(), packed.size());
    }
  });
}

size_t lsteg_message_size(const lsteg_message* m) { return m ? m->m.size() : 0; }

lsteg_status lsteg_message_compare(const lsteg_message* a, const lsteg_message* b,
                                   uint64_t* matching, uint64_t* total) {
  return guard([&] {
    require(a, "a");
    require(b, "b");
    if (a->m.shape() != b->m.shape())
      throw lsteg::Error(lsteg::ErrorCode::DimensionMismatch, "message shapes differ");
    const auto x = a->m.bits();
    const auto y = b->m.bits();
    std::uint64_t same = 0;
    for (std::size_t i = 0; i < x.size(); ++i) same += x[i] == y[i];
    if (matching) *matching = same;
    if (total) *total = x.size();
  });
}

void lsteg_message_free(lsteg_message* m) { delete m; }

// Latents ----------------------------------------------------------------------

lsteg_status lsteg_embed_ss(const lsteg_message* m, const lsteg_carriers* q, lsteg_latent** out) {
  return guard([&] {
    require(m, "message");
    require(q, "carriers");
    require(out, "out");
    *out = new lsteg_latent{lsteg::embed_ss(m->m, q->q)};
  });
}

lsteg_status lsteg_embed_scaled_ss(const lsteg_message* m, const lsteg_carriers* q, uint64_t seed,
                                   lsteg_latent** out, double* s) {
  return guard([&] {
    require(m, "message");
    require(q, "carriers");
    require(out, "out");
    lsteg::Rng rng(seed);
    auto e = lsteg::embed_scaled_ss(m->m, q->q, rng);
    if (s) *s = e.s;
    *out = new lsteg_latent{std::move(e.latent)};
  });
}

lsteg_status lsteg_decode(const lsteg_latent* y, const lsteg_carriers* q, lsteg_message** out,
                          double* projection, size_t len) {
  return guard([&] {
    require(y, "latent");
    require(q, "carriers");
    require(out, "out");
    auto d = lsteg::decode(y->x, q->q);
    if (projection) {
      if (len < d.projection.size())
        throw lsteg::Error(lsteg::ErrorCode::DimensionMismatch, "projection buffer too small");
      std::memcpy(projection, d.projection.data(), d.projection.size() * sizeof(double));
    }
    *out = new lsteg_message{std::move(d.message)};
  });
}

lsteg_status lsteg_latent_cover(uint64_t seed, lsteg_latent** out) {
  return guard([&] {
    require(out, "out");
    lsteg::Rng rng(seed);
    *out = new lsteg_latent{lsteg::sample_cover(rng)};
  });
}

lsteg_status lsteg_latent_from_values(const double* values, size_t len, lsteg_latent** out) {
  return guard([&] {
    require(values, "values");
    require(out, "out");
    *out = new lsteg_latent{lsteg::LatentVector(lsteg::Shape{}, std::vector<double>(values, values + len),
                                                lsteg::LatentRole::Seed, lsteg::Provenance::Cover)};
  });
}

size_t lsteg_latent_size(const lsteg_latent* x) { return x ? x->x.values().size() : 0; }

lsteg_status lsteg_latent_norm(const lsteg_latent* x, double* norm) {
  return guard([&] {
    require(x, "latent");
    require(norm, "norm");
    *norm = x->x.frobenius_norm();
  });
}

lsteg_status lsteg_latent_copy(const lsteg_latent* x, double* out, size_t len) {
  return guard([&] {
    require(x, "latent");
    require(out, "out");
    const auto v = x->x.values();
    if (len < v.size()) throw lsteg::Error(lsteg::ErrorCode::DimensionMismatch, "buffer too small");
    std::memcpy(out, v.data(), v.size() * sizeof(double));
  });
}

lsteg_status lsteg_latent_save(const lsteg_latent* x, const char* path) {
  return guard([&] {
    require(x, "latent");
    require(path, "path");
    lsteg::write_latent(path, x->x);
  });
}

lsteg_status lsteg_latent_load(const char* path, lsteg_latent** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new lsteg_latent{lsteg::read_latent(path)};
  });
}

lsteg_status lsteg_latent_manifest(const lsteg_latent* x, char** json) {
  return guard([&] {
    require(x, "latent");
    require(json, "json");
    *json = dup_string(lsteg::latent_manifest(x->x).dump());
  });
}

void lsteg_latent_free(lsteg_latent* x) { delete x; }

// Channel ----------------------------------------------------------------------

lsteg_status lsteg_channel_create(const char* config_json, const char* exec_command,
                                  lsteg_channel** out) {
  return guard([&] {
    require(out, "out");
    const auto cfg = lsteg::ChannelConfig::from_json(parse_json(config_json, "channel config"));
    std::optional<std::string> exec;
    if (exec_command) exec = exec_command;
    *out = new lsteg_channel{lsteg::make_channel(cfg, exec)};
  });
}

lsteg_status lsteg_channel_apply(lsteg_channel* ch, const lsteg_latent* x, uint64_t seed,
                                 lsteg_latent** out) {
  return guard([&] {
    require(ch, "channel");
    require(x, "latent");
    require(out, "out");
    *out = new lsteg_latent{ch->impl->apply(x->x, seed)};
  });
}

lsteg_status lsteg_channel_apply_file(lsteg_channel* ch, const char* in_path, const char* out_path,
                                      uint64_t seed) {
  return guard([&] {
    require(ch, "channel");
    require(in_path, "in_path");
    require(out_path, "out_path");
    if (auto* ext = dynamic_cast<lsteg::ExternalChannel*>(ch->impl.get())) {
      const fs::path produced = ext->apply_files(in_path, out_path, seed);
      if (fs::absolute(produced) != fs::absolute(out_path))
        throw lsteg::Error(lsteg::ErrorCode::Channel,
                           "channel adapter wrote " + produced.string() + " instead of " + out_path);
      (void)lsteg::read_latent(produced);
      return;
    }
    const auto x = lsteg::read_latent(in_path);
    lsteg::write_latent(out_path, ch->impl->apply(x, seed));
  });
}

lsteg_status lsteg_channel_config(const lsteg_channel* ch, char** json) {
  return guard([&] {
    require(ch, "channel");
    require(json, "json");
    *json = dup_string(ch->impl->config().to_json().dump());
  });
}

void lsteg_channel_free(lsteg_channel* ch) { delete ch; }

lsteg_status lsteg_calibrate(const char* targets_json, const char* mode, uint64_t seed,
                             char** result_json) {
  return guard([&] {
    require(mode, "mode");
    require(result_json, "result_json");
    const auto targets = lsteg::parse_calibration_targets(parse_json(targets_json, "targets"));
    lsteg::CalibrationOptions opts;
    opts.seed = seed;
    const auto res = lsteg::calibrate_channel(targets, lsteg::parse_channel_mode(mode), opts);
    nlohmann::json j{{"config", res.config.to_json()},
                     {"achieved", res.achieved},
                     {"evaluations", res.evaluations},
                     {"notes", res.notes}};
    *result_json = dup_string(j.dump());
  });
}

// Statistics -------------------------------------------------------------------

lsteg_status lsteg_fit_gaussian(const double* values, size_t n, double* mu, double* sigma2) {
  return guard([&] {
    require(values, "values");
    const auto f = lsteg::fit_gaussian(std::span(values, n));
    if (mu) *mu = f.mu_hat;
    if (sigma2) *sigma2 = f.sigma2_hat;
  });
}

lsteg_status lsteg_fits_from_json(const char* json, lsteg_fits** out) {
  return guard([&] {
    require(out, "out");
    const auto j = parse_json(json, "fits");
    if (!j.is_object() || !j.contains("cover") || !j.contains("stego"))
      throw lsteg::Error(lsteg::ErrorCode::Config, "fits need 'cover' and 'stego' objects");
    *out = new lsteg_fits{lsteg::fit_from_json(j["cover"]), lsteg::fit_from_json(j["stego"])};
  });
}

lsteg_status lsteg_fits_fit(const double* cover, size_t n_cover, const double* stego,
                            size_t n_stego, lsteg_fits** out) {
  return guard([&] {
    require(cover, "cover");
    require(stego, "stego");
    require(out, "out");
    *out = new lsteg_fits{lsteg::fit_gaussian(std::span(cover, n_cover)),
                          lsteg::fit_gaussian(std::span(stego, n_stego))};
  });
}

lsteg_status lsteg_fits_to_json(const lsteg_fits* fits, char** json) {
  return guard([&] {
    require(fits, "fits");
    require(json, "json");
    nlohmann::json j{{"cover", lsteg::fit_to_json(fits->cover)},
                     {"stego", lsteg::fit_to_json(fits->stego)},
                     {"version", lsteg::version_string()}};
    *json = dup_string(j.dump());
  });
}

void lsteg_fits_free(lsteg_fits* fits) { delete fits; }

lsteg_status lsteg_lrt_pooled(const lsteg_fits* fits, const double* norms, size_t n,
                              double* log_lambda) {
  return guard([&] {
    require(fits, "fits");
    require(norms, "norms");
    require(log_lambda, "log_lambda");
    *log_lambda = lsteg::lrt_pooled(std::span(norms, n), fits->cover, fits->stego).log_lambda;
  });
}

lsteg_status lsteg_compute_pe(const double* cover_scores, size_t n_cover,
                              const double* stego_scores, size_t n_stego, double* pe) {
  return guard([&] {
    require(cover_scores, "cover_scores");
    require(stego_scores, "stego_scores");
    require(pe, "pe");
    *pe = lsteg::compute_pe(std::span(cover_scores, n_cover), std::span(stego_scores, n_stego)).pe;
  });
}

// Experiments ------------------------------------------------------------------

lsteg_status lsteg_experiment_validate(const char* config_json) {
  return guard([&] { (void)lsteg::ExperimentConfig::from_json(parse_json(config_json, "config")); });
}

lsteg_status lsteg_experiment_run(const char* config_json, const char* out_dir,
                                  const char* exec_command, unsigned threads, char** summary_json) {
  return guard([&] {
    require(out_dir, "out_dir");
    auto cfg = lsteg::ExperimentConfig::from_json(parse_json(config_json, "config"));
    const fs::path dir(out_dir);

    lsteg::ErrorReport report;
    if (exec_command) {
      cfg.channel.mode = lsteg::ChannelMode::External;
      const fs::path work = dir / ".channel-work";
      std::error_code ec;
      fs::create_directories(dir, ec);
      struct RemoveWork {
        fs::path p;
        ~RemoveWork() {
          std::error_code e;
          fs::remove_all(p, e);
        }
      } cleanup{work};
      lsteg::ExternalChannel channel(exec_command, cfg.channel, work);
      report = lsteg::run_cv(lsteg::generate_corpus(cfg, channel, threads), cfg);
    } else {
      lsteg::SimulatedChannel channel(cfg.channel);
      report = lsteg::run_cv(lsteg::generate_corpus(cfg, channel, threads), cfg);
    }
    const auto files = lsteg::emit_report(report, dir);

    if (summary_json) {
      nlohmann::json s;
      s["version"] = lsteg::version_string();
      s["out"] = dir.string();
      for (const auto& f : files) s["files"].push_back(f.filename().string());
      for (const auto& b : report.pe_by_batch)
        s["pe"].push_back({{"batch_size", b.batch_size},
                           {"pe_optimal", b.pe_optimal},
                           {"pe_at_tau", b.pe_at_tau}});
      s["bit_accuracy"] = report.bit_accuracy ? nlohmann::json(*report.bit_accuracy)
                                              : nlohmann::json(nullptr);
      s["norms"] = {{"cover", {{"mean", report.cover_norms.mean}, {"variance", report.cover_norms.variance}}},
                    {"stego", {{"mean", report.stego_norms.mean}, {"variance", report.stego_norms.variance}}}};
      *summary_json = dup_string(s.dump());
    }
  });
}

}  // extern "C"
