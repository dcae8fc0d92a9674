#include "latentsteg/channel.hpp"

#include <cmath>

#include "latentsteg/error.hpp"
#include "latentsteg/external_channel.hpp"
#include "latentsteg/rng.hpp"

namespace lsteg {

std::string_view to_string(ChannelMode m) noexcept {
  switch (m) {
    case ChannelMode::NormModel: return "norm-model";
    case ChannelMode::Isotropic: return "isotropic";
    case ChannelMode::External: return "external";
  }
  return "norm-model";
}

ChannelMode parse_channel_mode(std::string_view s) {
  if (s == "norm-model") return ChannelMode::NormModel;
  if (s == "isotropic") return ChannelMode::Isotropic;
  if (s == "external") return ChannelMode::External;
  throw Error(ErrorCode::Config, "unknown channel mode '" + std::string(s) + "'");
}

void ChannelConfig::validate() const {
  if (!(sigma2_alpha >= 0.0) || !std::isfinite(sigma2_alpha))
    throw Error(ErrorCode::Config, "sigma2_alpha must be finite and >= 0");
  if (!(shrink_gamma > 0.0) || !std::isfinite(shrink_gamma))
    throw Error(ErrorCode::Config, "shrink_gamma must be finite and > 0");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std))
    throw Error(ErrorCode::Config, "noise_std must be finite and >= 0");
  if (steps < 1) throw Error(ErrorCode::Config, "steps must be >= 1");
  if (timeout_ms < 1) throw Error(ErrorCode::Config, "timeout_ms must be >= 1");
}

nlohmann::json ChannelConfig::to_json() const {
  nlohmann::json j{{"mode", to_string(mode)},
                   {"sigma2_alpha", sigma2_alpha},
                   {"shrink_gamma", shrink_gamma},
                   {"noise_std", noise_std},
                   {"steps", steps},
                   {"prompt_known", prompt_known},
                   {"guidance", guidance},
                   {"seed", seed},
                   {"timeout_ms", timeout_ms}};
  j["prompt"] = prompt ? nlohmann::json(*prompt) : nlohmann::json(nullptr);
  return j;
}

ChannelConfig ChannelConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::Config, "channel config must be a JSON object");
  static const char* const known[] = {"mode",   "sigma2_alpha", "shrink_gamma",
                                      "noise_std", "steps",     "prompt_known",
                                      "guidance", "prompt",     "seed",
                                      "timeout_ms"};
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw Error(ErrorCode::Config, "unknown channel config field '" + key + "'");
  }
  ChannelConfig c;
  try {
    if (j.contains("mode")) c.mode = parse_channel_mode(j.at("mode").get<std::string>());
    c.sigma2_alpha = j.value("sigma2_alpha", c.sigma2_alpha);
    c.shrink_gamma = j.value("shrink_gamma", c.shrink_gamma);
    c.noise_std = j.value("noise_std", c.noise_std);
    c.steps = j.value("steps", c.steps);
    c.prompt_known = j.value("prompt_known", c.prompt_known);
    c.guidance = j.value("guidance", c.guidance);
    c.seed = j.value("seed", c.seed);
    c.timeout_ms = j.value("timeout_ms", c.timeout_ms);
    if (j.contains("prompt") && !j.at("prompt").is_null())
      c.prompt = j.at("prompt").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Config, std::string("channel config: ") + e.what());
  }
  c.validate();
  return c;
}

double norm_model_target(double r, const ChannelConfig& cfg, Rng& rng) {
  const double sd = std::sqrt(cfg.sigma2_alpha);
  double target = cfg.shrink_gamma * r + sd * rng.normal();
  if (target < 0.0) target = cfg.shrink_gamma * r + sd * rng.normal();
  if (target < 0.0) target = 1e-6;
  return target;
}

LatentVector apply_norm_model_channel(const LatentVector& x, const ChannelConfig& cfg,
                                      Rng& rng) {
  if (cfg.mode != ChannelMode::NormModel)
    throw Error(ErrorCode::Config, "channel config is not in norm-model mode");
  cfg.validate();
  const double r = x.frobenius_norm();
  if (!(r > 0.0)) throw Error(ErrorCode::InvalidArgument, "cannot rescale a zero latent");
  const double factor = norm_model_target(r, cfg, rng) / r;
  std::vector<double> v(x.values().begin(), x.values().end());
  for (double& e : v) e *= factor;
  return x.with_values(std::move(v)).with_role(LatentRole::Inverted);
}

LatentVector apply_isotropic_channel(const LatentVector& x, const ChannelConfig& cfg,
                                     Rng& rng) {
  if (cfg.mode != ChannelMode::Isotropic)
    throw Error(ErrorCode::Config, "channel config is not in isotropic mode");
  cfg.validate();
  std::vector<double> v(x.values().begin(), x.values().end());
  for (double& e : v) e = cfg.shrink_gamma * (e + cfg.noise_std * rng.normal());
  return x.with_values(std::move(v)).with_role(LatentRole::Inverted);
}

SimulatedChannel::SimulatedChannel(ChannelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  if (cfg_.mode == ChannelMode::External)
    throw Error(ErrorCode::Config, "external channels need an adapter command");
}

LatentVector SimulatedChannel::apply(const LatentVector& x, std::uint64_t seed) {
  Rng rng(seed);
  return cfg_.mode == ChannelMode::NormModel ? apply_norm_model_channel(x, cfg_, rng)
                                             : apply_isotropic_channel(x, cfg_, rng);
}

std::unique_ptr<LatentChannel> make_channel(const ChannelConfig& cfg,
                                            const std::optional<std::string>& exec_command) {
  if (exec_command) {
    ChannelConfig ext = cfg;
    ext.mode = ChannelMode::External;
    return std::make_unique<ExternalChannel>(*exec_command, ext);
  }
  if (cfg.mode == ChannelMode::External)
    throw Error(ErrorCode::Config, "channel mode 'external' needs --channel-exec");
  return std::make_unique<SimulatedChannel>(cfg);
}

}  // namespace lsteg
