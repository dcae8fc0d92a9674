// latentsteg: command-line front end over the C API.
//
// Exit codes: 0 success, 1 I/O or internal failure, 2 usage or configuration
// error, 3 channel failure.

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "latentsteg/latentsteg.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitChannel = 3;

struct CliError {
  int code;
  std::string message;
};

int exit_code_for(lsteg_status s) {
  switch (s) {
    case LSTEG_OK: return kExitOk;
    case LSTEG_ERR_INVALID_ARGUMENT:
    case LSTEG_ERR_DIMENSION:
    case LSTEG_ERR_CONFIG:
    case LSTEG_ERR_UNATTAINABLE: return kExitUsage;
    case LSTEG_ERR_CHANNEL: return kExitChannel;
    default: return kExitFailure;
  }
}

void check(lsteg_status s, const std::string& context) {
  if (s != LSTEG_OK)
    throw CliError{exit_code_for(s), context + ": " + lsteg_last_error() + " [" +
                                         lsteg_status_name(s) + "]"};
}

void usage_error(const std::string& msg) { throw CliError{kExitUsage, msg}; }

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const noexcept { Free(p); }
};
using Key = std::unique_ptr<lsteg_key, Deleter<lsteg_key, lsteg_key_free>>;
using Carriers = std::unique_ptr<lsteg_carriers, Deleter<lsteg_carriers, lsteg_carriers_free>>;
using Message = std::unique_ptr<lsteg_message, Deleter<lsteg_message, lsteg_message_free>>;
using Latent = std::unique_ptr<lsteg_latent, Deleter<lsteg_latent, lsteg_latent_free>>;
using Channel = std::unique_ptr<lsteg_channel, Deleter<lsteg_channel, lsteg_channel_free>>;
using Fits = std::unique_ptr<lsteg_fits, Deleter<lsteg_fits, lsteg_fits_free>>;

std::string take_string(char* s) {
  std::string out = s ? s : "";
  lsteg_string_free(s);
  return out;
}

std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw CliError{kExitFailure, "cannot open " + p.string()};
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_text(const fs::path& p) {
  const auto b = read_bytes(p);
  return {b.begin(), b.end()};
}

void write_atomic(const fs::path& p, const std::string& data) {
  fs::path tmp = p;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CliError{kExitFailure, "cannot write " + p.string()};
    out << data;
    if (!out.flush()) throw CliError{kExitFailure, "cannot write " + p.string()};
  }
  std::error_code ec;
  fs::rename(tmp, p, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw CliError{kExitFailure, "cannot move " + tmp.string() + " into place"};
  }
}

json parse_json_file(const fs::path& p, const char* what) {
  const std::string text = read_text(p);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw CliError{kExitUsage, std::string(what) + " " + p.string() + " is not valid JSON: " + e.what()};
  }
}

// A key argument is either a readable file of raw bytes or a hex string.
Key load_key(const std::string& arg) {
  lsteg_key* k = nullptr;
  std::error_code ec;
  if (fs::is_regular_file(arg, ec)) {
    const auto bytes = read_bytes(arg);
    check(lsteg_key_from_bytes(bytes.data(), bytes.size(), &k), "key file " + arg);
  } else {
    check(lsteg_key_from_hex(arg.c_str(), &k), "key");
  }
  return Key(k);
}

std::string fingerprint(const lsteg_key* k) {
  char buf[32];
  check(lsteg_key_fingerprint(k, buf, sizeof buf), "fingerprint");
  return buf;
}

struct NormRow {
  double value;
  std::string label;
};

std::vector<NormRow> read_norms_csv(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw CliError{kExitFailure, "cannot open " + p.string()};
  std::vector<NormRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    const std::string first = line.substr(0, comma);
    std::string label = comma == std::string::npos ? "unknown" : line.substr(comma + 1);
    char* end = nullptr;
    const double v = std::strtod(first.c_str(), &end);
    if (end == first.c_str() || *end != '\0') {
      if (rows.empty() && lineno == 1) continue;  // header
      usage_error(p.string() + ":" + std::to_string(lineno) + ": not a number: " + first);
    }
    if (label.empty()) label = "unknown";
    rows.push_back({v, label});
  }
  return rows;
}

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Globals {
  bool quiet = false;
};

void emit(const Globals& g, json j) {
  j["version"] = lsteg_version();
  if (!g.quiet) std::cout << j.dump() << "\n";
}

// Subcommands -------------------------------------------------------------------

struct KeygenArgs {
  std::string out;
  std::optional<std::uint64_t> seed;
};

void run_keygen(const Globals& g, const KeygenArgs& a) {
  lsteg_key* raw = nullptr;
  if (a.seed)
    check(lsteg_key_from_seed(*a.seed, &raw), "keygen");
  else
    check(lsteg_key_generate(&raw), "keygen");
  Key k(raw);
  std::size_t len = 0;
  check(lsteg_key_bytes(k.get(), nullptr, 0, &len), "keygen");
  std::string bytes(len, '\0');
  check(lsteg_key_bytes(k.get(), reinterpret_cast<std::uint8_t*>(bytes.data()), len, &len), "keygen");
  write_atomic(a.out, bytes);
  emit(g, {{"command", "keygen"}, {"out", a.out}, {"bytes", len}, {"key_fingerprint", fingerprint(k.get())}});
}

struct EmbedArgs {
  std::string key, message_file, out;
  bool random_message = false;
  bool scaled = false;
  std::uint64_t seed = 0;
};

void run_embed(const Globals& g, const EmbedArgs& a) {
  if (a.random_message == !a.message_file.empty())
    usage_error("embed needs exactly one of --message-file or --random-message");
  Key k = load_key(a.key);
  lsteg_carriers* qraw = nullptr;
  check(lsteg_carriers_derive(k.get(), 64, &qraw), "carriers");
  Carriers q(qraw);

  lsteg_message* mraw = nullptr;
  if (a.random_message) {
    check(lsteg_message_random(a.seed, &mraw), "message");
  } else {
    const auto bytes = read_bytes(a.message_file);
    check(lsteg_message_unpack(bytes.data(), bytes.size(), &mraw), "message file " + a.message_file);
  }
  Message m(mraw);

  lsteg_latent* xraw = nullptr;
  double s = 0.0;
  if (a.scaled)
    check(lsteg_embed_scaled_ss(m.get(), q.get(), a.seed ^ 0x5CA1EDULL, &xraw, &s), "embed");
  else
    check(lsteg_embed_ss(m.get(), q.get(), &xraw), "embed");
  Latent x(xraw);
  check(lsteg_latent_save(x.get(), a.out.c_str()), "write " + a.out);
  double norm = 0.0;
  check(lsteg_latent_norm(x.get(), &norm), "norm");
  json j{{"command", "embed"},
         {"out", a.out},
         {"manifest", a.out + ".json"},
         {"norm", norm},
         {"encoder", a.scaled ? "scaled-ss" : "ss"},
         {"key_fingerprint", fingerprint(k.get())}};
  if (a.scaled) j["scale_s"] = s;
  emit(g, j);
}

struct DecodeArgs {
  std::string key, in, out, truth;
};

void run_decode(const Globals& g, const DecodeArgs& a) {
  Key k = load_key(a.key);
  lsteg_carriers* qraw = nullptr;
  check(lsteg_carriers_derive(k.get(), 64, &qraw), "carriers");
  Carriers q(qraw);
  lsteg_latent* yraw = nullptr;
  check(lsteg_latent_load(a.in.c_str(), &yraw), "read " + a.in);
  Latent y(yraw);
  lsteg_message* mraw = nullptr;
  check(lsteg_decode(y.get(), q.get(), &mraw, nullptr, 0), "decode");
  Message m(mraw);
  std::size_t len = 0;
  check(lsteg_message_pack(m.get(), nullptr, 0, &len), "pack");
  std::string packed(len, '\0');
  check(lsteg_message_pack(m.get(), reinterpret_cast<std::uint8_t*>(packed.data()), len, &len), "pack");
  write_atomic(a.out, packed);
  json j{{"command", "decode"}, {"out", a.out}, {"bits", lsteg_message_size(m.get())}};
  if (!a.truth.empty()) {
    const auto bytes = read_bytes(a.truth);
    lsteg_message* traw = nullptr;
    check(lsteg_message_unpack(bytes.data(), bytes.size(), &traw), "truth file");
    Message t(traw);
    std::uint64_t same = 0, total = 0;
    check(lsteg_message_compare(m.get(), t.get(), &same, &total), "compare");
    const double acc = static_cast<double>(same) / static_cast<double>(total);
    j["bit_accuracy"] = acc;
    j["bit_error"] = 1.0 - acc;
  }
  emit(g, j);
}

struct NormsArgs {
  std::vector<std::string> in;
  std::string label = "unknown";
  std::string out;
};

void run_norms(const Globals& g, const NormsArgs& a) {
  std::string csv = "norm,label\n";
  for (const auto& p : a.in) {
    lsteg_latent* raw = nullptr;
    check(lsteg_latent_load(p.c_str(), &raw), "read " + p);
    Latent x(raw);
    double n = 0.0;
    check(lsteg_latent_norm(x.get(), &n), "norm");
    csv += fmt17(n) + "," + a.label + "\n";
  }
  if (a.out.empty()) {
    std::cout << csv;
    return;
  }
  write_atomic(a.out, csv);
  emit(g, {{"command", "norms"}, {"out", a.out}, {"count", a.in.size()}});
}

struct FitArgs {
  std::string norms, out;
};

void run_fit(const Globals& g, const FitArgs& a) {
  std::vector<double> cover, stego;
  for (const auto& r : read_norms_csv(a.norms)) {
    if (r.label == "cover") cover.push_back(r.value);
    else if (r.label == "stego") stego.push_back(r.value);
  }
  lsteg_fits* raw = nullptr;
  check(lsteg_fits_fit(cover.data(), cover.size(), stego.data(), stego.size(), &raw),
        "fit (needs >= 2 rows labeled cover and >= 2 labeled stego)");
  Fits f(raw);
  char* text = nullptr;
  check(lsteg_fits_to_json(f.get(), &text), "fits");
  const json fits = json::parse(take_string(text));
  write_atomic(a.out, fits.dump(2) + "\n");
  emit(g, {{"command", "fit"}, {"out", a.out}, {"fits", fits}});
}

struct ChannelArgs {
  std::string in, config, out, exec;
  std::optional<std::uint64_t> seed;
};

void run_channel(const Globals& g, const ChannelArgs& a) {
  const json cfg = parse_json_file(a.config, "channel config");
  const std::string cfg_text = cfg.dump();
  lsteg_channel* raw = nullptr;
  check(lsteg_channel_create(cfg_text.c_str(), a.exec.empty() ? nullptr : a.exec.c_str(), &raw),
        "channel config");
  Channel ch(raw);
  const std::uint64_t seed = a.seed ? *a.seed : cfg.value("seed", std::uint64_t{0});
  check(lsteg_channel_apply_file(ch.get(), a.in.c_str(), a.out.c_str(), seed), "channel");
  lsteg_latent* yraw = nullptr;
  check(lsteg_latent_load(a.out.c_str(), &yraw), "read " + a.out);
  Latent y(yraw);
  double norm = 0.0;
  check(lsteg_latent_norm(y.get(), &norm), "norm");
  char* normalized = nullptr;
  check(lsteg_channel_config(ch.get(), &normalized), "channel config");
  emit(g, {{"command", "channel"},
           {"in", a.in},
           {"out", a.out},
           {"seed", seed},
           {"norm", norm},
           {"config", json::parse(take_string(normalized))}});
}

struct DetectArgs {
  std::string fits, norms, out;
  std::size_t batch_size = 1;
  double tau = 1.0;
};

void run_detect(const Globals& g, const DetectArgs& a) {
  if (a.batch_size < 1) usage_error("--batch-size must be >= 1");
  if (!(a.tau > 0.0)) usage_error("--tau must be > 0");
  const json fits_json = parse_json_file(a.fits, "fits");
  const std::string text = fits_json.dump();
  lsteg_fits* raw = nullptr;
  check(lsteg_fits_from_json(text.c_str(), &raw), "fits " + a.fits);
  Fits f(raw);

  // Batches never mix labels; rows keep file order within a label.
  std::vector<std::string> order;
  std::map<std::string, std::vector<double>> groups;
  for (const auto& r : read_norms_csv(a.norms)) {
    if (!groups.count(r.label)) order.push_back(r.label);
    groups[r.label].push_back(r.value);
  }
  const double log_tau = std::log(a.tau);
  std::string csv = "batch_id,label,size,log_lambda,decision\n";
  std::size_t batch_id = 0, stego_calls = 0;
  for (const auto& label : order) {
    const auto& v = groups[label];
    for (std::size_t start = 0; start < v.size(); start += a.batch_size) {
      const std::size_t n = std::min(a.batch_size, v.size() - start);
      double ll = 0.0;
      check(lsteg_lrt_pooled(f.get(), v.data() + start, n, &ll), "lrt");
      const bool stego = ll > log_tau;
      stego_calls += stego;
      csv += std::to_string(batch_id++) + "," + label + "," + std::to_string(n) + "," + fmt17(ll) +
             "," + (stego ? "stego" : "cover") + "\n";
    }
  }
  if (a.out.empty()) {
    std::cout << csv;
    return;
  }
  write_atomic(a.out, csv);
  emit(g, {{"command", "detect"},
           {"out", a.out},
           {"batches", batch_id},
           {"stego_decisions", stego_calls},
           {"tau", a.tau}});
}

struct ExperimentArgs {
  std::string config, out, exec;
  unsigned threads = 0;
};

void run_experiment(const Globals& g, const ExperimentArgs& a) {
  const json cfg = parse_json_file(a.config, "experiment config");
  const std::string text = cfg.dump();
  check(lsteg_experiment_validate(text.c_str()), "experiment config");
  char* summary = nullptr;
  check(lsteg_experiment_run(text.c_str(), a.out.c_str(), a.exec.empty() ? nullptr : a.exec.c_str(),
                             a.threads, &summary),
        "experiment");
  json j = json::parse(take_string(summary));
  j["command"] = "experiment";
  emit(g, j);
}

struct CalibrateArgs {
  std::string mode = "norm-model";
  std::string targets, out;
  std::optional<double> mean, var_cover, var_stego, shrink, bit_accuracy;
  std::uint64_t seed = 0x5EED;
};

void run_calibrate(const Globals& g, const CalibrateArgs& a) {
  json targets = json::object();
  if (!a.targets.empty()) targets = parse_json_file(a.targets, "targets");
  if (a.mean) targets["mean"] = *a.mean;
  if (a.var_cover) targets["var_cover"] = *a.var_cover;
  if (a.var_stego) targets["var_stego"] = *a.var_stego;
  if (a.shrink) targets["shrink_gamma"] = *a.shrink;
  if (a.bit_accuracy) targets["bit_accuracy"] = *a.bit_accuracy;
  if (targets.empty()) usage_error("calibrate needs targets (--targets or --var-stego / --bit-accuracy ...)");
  const std::string text = targets.dump();
  char* result = nullptr;
  check(lsteg_calibrate(text.c_str(), a.mode.c_str(), a.seed, &result), "calibrate");
  json j = json::parse(take_string(result));
  if (!a.out.empty()) write_atomic(a.out, j["config"].dump(2) + "\n");
  j["command"] = "calibrate";
  j["targets"] = targets;
  if (!a.out.empty()) j["out"] = a.out;
  emit(g, j);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spread-spectrum latent embedding, latent-channel simulation and pooled norm steganalysis"};
  app.set_version_flag("--version", std::string(lsteg_version()));
  app.require_subcommand(1);
  Globals g;
  app.add_flag("-q,--quiet", g.quiet, "Suppress JSON summaries on standard output");

  KeygenArgs keygen;
  auto* c_keygen = app.add_subcommand("keygen", "Write a new secret key (raw bytes)");
  c_keygen->add_option("--out", keygen.out, "Key file")->required();
  c_keygen->add_option("--seed", keygen.seed, "Derive the key from a seed instead of OS entropy");

  EmbedArgs embed;
  auto* c_embed = app.add_subcommand("embed", "Embed a message into a latent seed");
  c_embed->add_option("--key", embed.key, "Key file or hex string")->required();
  c_embed->add_option("--message-file", embed.message_file, "Packed message (2048 bytes)");
  c_embed->add_flag("--random-message", embed.random_message, "Embed a random message drawn from --seed");
  c_embed->add_flag("--scaled", embed.scaled, "Rescale the seed norm by a chi_n draw");
  c_embed->add_option("--seed", embed.seed, "Seed for the random message and the chi_n draw");
  c_embed->add_option("--out", embed.out, "Latent file")->required();

  DecodeArgs dec;
  auto* c_decode = app.add_subcommand("decode", "Decode a message from a latent");
  c_decode->add_option("--key", dec.key, "Key file or hex string")->required();
  c_decode->add_option("--in", dec.in, "Latent file")->required();
  c_decode->add_option("--out", dec.out, "Packed message output")->required();
  c_decode->add_option("--truth", dec.truth, "Reference message for bit accuracy");

  NormsArgs norms;
  auto* c_norms = app.add_subcommand("norms", "Frobenius norms of latent files as CSV");
  c_norms->add_option("--in", norms.in, "Latent files")->required()->expected(1, -1);
  c_norms->add_option("--label", norms.label, "Label column value (cover, stego, unknown)");
  c_norms->add_option("--out", norms.out, "CSV output (standard output when omitted)");

  FitArgs fit;
  auto* c_fit = app.add_subcommand("fit", "Fit cover/stego Gaussians to a labeled norm CSV");
  c_fit->add_option("--norms", fit.norms, "CSV of norm,label")->required();
  c_fit->add_option("--out", fit.out, "Fits JSON")->required();

  ChannelArgs chan;
  auto* c_channel = app.add_subcommand("channel", "Push a latent through the latent-to-latent channel");
  c_channel->add_option("--in", chan.in, "Input latent")->required();
  c_channel->add_option("--config", chan.config, "Channel config JSON")->required();
  c_channel->add_option("--out", chan.out, "Output latent")->required();
  c_channel->add_option("--seed", chan.seed, "Overrides the config seed");
  c_channel->add_option("--channel-exec", chan.exec, "Adapter command for an external channel");

  DetectArgs det;
  auto* c_detect = app.add_subcommand("detect", "Pooled likelihood-ratio test on norms");
  c_detect->add_option("--fits", det.fits, "Fits JSON {cover, stego}")->required();
  c_detect->add_option("--norms", det.norms, "CSV of norm[,label]")->required();
  c_detect->add_option("--batch-size", det.batch_size, "Norms per pooled decision")->capture_default_str();
  c_detect->add_option("--tau", det.tau, "Likelihood-ratio threshold")->capture_default_str();
  c_detect->add_option("--out", det.out, "CSV output (standard output when omitted)");

  ExperimentArgs exp;
  auto* c_exp = app.add_subcommand("experiment", "Run a cross-validated detection experiment");
  c_exp->add_option("--config", exp.config, "Experiment config JSON")->required();
  c_exp->add_option("--out", exp.out, "Output directory")->required();
  c_exp->add_option("--channel-exec", exp.exec, "Adapter command for an external channel");
  c_exp->add_option("--threads", exp.threads, "Worker threads (0 = one per core)");

  CalibrateArgs cal;
  auto* c_cal = app.add_subcommand("calibrate", "Fit channel knobs to target statistics");
  c_cal->add_option("--mode", cal.mode, "norm-model or isotropic")->capture_default_str();
  c_cal->add_option("--targets", cal.targets, "Targets JSON file");
  c_cal->add_option("--mean", cal.mean);
  c_cal->add_option("--var-cover", cal.var_cover);
  c_cal->add_option("--var-stego", cal.var_stego);
  c_cal->add_option("--shrink", cal.shrink);
  c_cal->add_option("--bit-accuracy", cal.bit_accuracy);
  c_cal->add_option("--seed", cal.seed, "Monte-Carlo seed");
  c_cal->add_option("--out", cal.out, "Write the calibrated channel config here");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*c_keygen) run_keygen(g, keygen);
    else if (*c_embed) run_embed(g, embed);
    else if (*c_decode) run_decode(g, dec);
    else if (*c_norms) run_norms(g, norms);
    else if (*c_fit) run_fit(g, fit);
    else if (*c_channel) run_channel(g, chan);
    else if (*c_detect) run_detect(g, det);
    else if (*c_exp) run_experiment(g, exp);
    else if (*c_cal) run_calibrate(g, cal);
  } catch (const CliError& e) {
    std::cerr << "latentsteg: " << e.message << "\n";
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "latentsteg: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}
