#include "latentsteg/external_channel.hpp"

#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <optional>
#include <thread>

#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include "latentsteg/error.hpp"
#include "latentsteg/latent_io.hpp"

namespace lsteg {

namespace fs = std::filesystem;

nlohmann::json make_l2l_request(const fs::path& latent_in, const fs::path& latent_out,
                                const ChannelConfig& cfg, std::uint64_t seed) {
  return {{"op", "l2l"},
          {"latent_in", latent_in.string()},
          {"latent_out", latent_out.string()},
          {"prompt", cfg.prompt ? nlohmann::json(*cfg.prompt) : nlohmann::json(nullptr)},
          {"guidance", cfg.guidance},
          {"steps", cfg.steps},
          {"seed", seed}};
}

fs::path parse_l2l_response(const std::string& line) {
  nlohmann::json r;
  try {
    r = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::Channel, "malformed channel response: " + line);
  }
  if (!r.is_object() || !r.contains("status") || !r["status"].is_string())
    throw Error(ErrorCode::Channel, "channel response lacks a status: " + line);
  const std::string status = r["status"].get<std::string>();
  const std::string detail =
      r.contains("detail") && r["detail"].is_string() ? r["detail"].get<std::string>() : "";
  if (status == "error") throw Error(ErrorCode::Channel, "channel reported an error: " + detail);
  if (status != "ok") throw Error(ErrorCode::Channel, "unknown channel status '" + status + "'");
  if (!r.contains("latent_out") || !r["latent_out"].is_string())
    throw Error(ErrorCode::Channel, "channel response lacks latent_out: " + line);
  return r["latent_out"].get<std::string>();
}

ExternalChannel::ExternalChannel(std::string command, ChannelConfig cfg, fs::path work_dir)
    : command_(std::move(command)), cfg_(std::move(cfg)), work_dir_(std::move(work_dir)) {
  cfg_.validate();
  if (work_dir_.empty()) {
    std::string tmpl = (fs::temp_directory_path() / "latentsteg-XXXXXX").string();
    if (!::mkdtemp(tmpl.data()))
      throw Error(ErrorCode::Io, "cannot create a temporary channel directory");
    work_dir_ = tmpl;
    owns_work_dir_ = true;
  } else {
    std::error_code ec;
    fs::create_directories(work_dir_, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create " + work_dir_.string());
  }

  int sv[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0)
    throw Error(ErrorCode::Channel, "socketpair failed");
  const pid_t pid = ::fork();
  if (pid < 0) {
    ::close(sv[0]);
    ::close(sv[1]);
    throw Error(ErrorCode::Channel, "fork failed");
  }
  if (pid == 0) {
    ::dup2(sv[1], STDIN_FILENO);
    ::dup2(sv[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(sv[1]);
  fd_ = sv[0];
  pid_ = pid;
}

ExternalChannel::~ExternalChannel() {
  shutdown_child();
  if (owns_work_dir_) {
    std::error_code ec;
    fs::remove_all(work_dir_, ec);
  }
}

void ExternalChannel::shutdown_child() noexcept {
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_WR);
  }
  if (pid_ > 0) {
    int status = 0;
    bool exited = false;
    for (int i = 0; i < 200 && !exited; ++i) {
      exited = ::waitpid(pid_, &status, WNOHANG) == pid_;
      if (!exited) std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    if (!exited) {
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, &status, 0);
    }
    pid_ = -1;
  }
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

std::string ExternalChannel::round_trip(const std::string& request_line) {
  if (fd_ < 0) throw Error(ErrorCode::Channel, "channel adapter is not running");
  std::string out = request_line + "\n";
  std::size_t sent = 0;
  while (sent < out.size()) {
    const ssize_t w = ::send(fd_, out.data() + sent, out.size() - sent, MSG_NOSIGNAL);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::Channel, "channel adapter closed its input");
    }
    sent += static_cast<std::size_t>(w);
  }

  const auto deadline =
      std::chrono::steady_clock::now() + std::chrono::milliseconds(cfg_.timeout_ms);
  for (;;) {
    if (auto nl = pending_.find('\n'); nl != std::string::npos) {
      std::string line = pending_.substr(0, nl);
      pending_.erase(0, nl + 1);
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                          deadline - std::chrono::steady_clock::now())
                          .count();
    if (left <= 0) throw Error(ErrorCode::Channel, "channel adapter timed out");
    pollfd p{fd_, POLLIN, 0};
    const int rc = ::poll(&p, 1, static_cast<int>(left));
    if (rc < 0 && errno == EINTR) continue;
    if (rc < 0) throw Error(ErrorCode::Channel, "poll on channel adapter failed");
    if (rc == 0) throw Error(ErrorCode::Channel, "channel adapter timed out");
    char buf[4096];
    const ssize_t n = ::recv(fd_, buf, sizeof buf, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw Error(ErrorCode::Channel, "channel adapter exited without a response");
    pending_.append(buf, static_cast<std::size_t>(n));
  }
}

fs::path ExternalChannel::apply_files(const fs::path& latent_in, const fs::path& latent_out,
                                      std::uint64_t seed) {
  const auto line = round_trip(make_l2l_request(latent_in, latent_out, cfg_, seed).dump());
  return parse_l2l_response(line);
}

LatentVector ExternalChannel::apply(const LatentVector& x, std::uint64_t seed) {
  const std::string stem = "req" + std::to_string(counter_++);
  const fs::path in = work_dir_ / (stem + ".in.lat");
  const fs::path out = work_dir_ / (stem + ".out.lat");
  write_latent(in, x);
  struct Cleanup {
    fs::path a, b;
    ~Cleanup() {
      std::error_code ec;
      for (const auto& p : {a, b}) {
        fs::remove(p, ec);
        fs::remove(manifest_path(p), ec);
      }
    }
  } cleanup{in, out};
  const fs::path produced = apply_files(in, out, seed);
  std::optional<LatentVector> read;
  try {
    read = read_latent(produced);
  } catch (const Error& e) {
    throw Error(ErrorCode::Channel, std::string("channel output unreadable: ") + e.what());
  }
  const LatentVector& y = *read;
  if (y.shape() != x.shape())
    throw Error(ErrorCode::Channel, "channel adapter changed the latent shape");
  if (produced != out) {
    std::error_code ec;
    fs::remove(produced, ec);
    fs::remove(manifest_path(produced), ec);
  }
  return x.with_values(std::vector<double>(y.values().begin(), y.values().end()))
      .with_role(LatentRole::Inverted);
}

}  // namespace lsteg
