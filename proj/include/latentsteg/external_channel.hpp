#pragma once

// Black-box channel served by a separate process speaking JSON lines over its
// standard streams. Request, one line per latent:
//
//   {"op":"l2l","latent_in":PATH,"latent_out":PATH,"prompt":STR|null,
//    "guidance":REAL,"steps":INT,"seed":INT}
//
// Response, one line per request:
//
//   {"status":"ok"|"error","latent_out":PATH,"detail":STR}
//
// Requests are strictly sequential; the adapter never sees keys or messages.

#include <filesystem>
#include <string>

#include "json.hpp"
#include "latentsteg/channel.hpp"

namespace lsteg {

nlohmann::json make_l2l_request(const std::filesystem::path& latent_in,
                                const std::filesystem::path& latent_out,
                                const ChannelConfig& cfg, std::uint64_t seed);

/// Validates a response line; returns the latent_out path on "ok" and throws
/// Error(Channel) on an error status or a malformed line.
std::filesystem::path parse_l2l_response(const std::string& line);

class ExternalChannel final : public LatentChannel {
 public:
  /// Spawns `/bin/sh -c command`. Temporary latents live under `work_dir`
  /// (a fresh directory in the system temp dir when empty) and are removed
  /// after each request.
  ExternalChannel(std::string command, ChannelConfig cfg,
                  std::filesystem::path work_dir = {});
  ~ExternalChannel() override;

  ExternalChannel(const ExternalChannel&) = delete;
  ExternalChannel& operator=(const ExternalChannel&) = delete;

  LatentVector apply(const LatentVector& x, std::uint64_t seed) override;
  /// Runs one request on files already on disk; returns the reported output path.
  std::filesystem::path apply_files(const std::filesystem::path& latent_in,
                                    const std::filesystem::path& latent_out,
                                    std::uint64_t seed);

  bool concurrent() const noexcept override { return false; }
  const ChannelConfig& config() const noexcept override { return cfg_; }

 private:
  std::string round_trip(const std::string& request_line);
  void shutdown_child() noexcept;

  std::string command_;
  ChannelConfig cfg_;
  std::filesystem::path work_dir_;
  bool owns_work_dir_ = false;
  int fd_ = -1;
  int pid_ = -1;
  std::string pending_;
  std::uint64_t counter_ = 0;
};

}  // namespace lsteg
