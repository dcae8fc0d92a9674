#include "latentsteg/report.hpp"

#include <cmath>
#include <cstdio>

#include "latentsteg/error.hpp"
#include "latentsteg/latent_io.hpp"

namespace lsteg {

namespace fs = std::filesystem;

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string full(double v) { return fmt("%.17g", v); }

double normal_cdf(double x, double mean, double var) {
  return 0.5 * std::erfc(-(x - mean) / std::sqrt(2.0 * var));
}

nlohmann::json descriptor_json(const NormalDescriptor& d) {
  return {{"mean", d.mean}, {"variance", d.variance}};
}

nlohmann::json stats_json(const NormStats& s) {
  return {{"mean", s.mean}, {"variance", s.variance}, {"count", s.count}};
}

}  // namespace

nlohmann::json fit_to_json(const GaussianFit& f) {
  return {{"mu", f.mu_hat}, {"sigma2", f.sigma2_hat}, {"count", f.count}};
}

GaussianFit fit_from_json(const nlohmann::json& j) {
  try {
    GaussianFit f{j.at("mu").get<double>(), j.at("sigma2").get<double>(),
                  j.value("count", std::uint64_t{2})};
    if (!std::isfinite(f.mu_hat) || !(f.sigma2_hat >= kVarianceFloor))
      throw Error(ErrorCode::Config, "fit needs a finite mu and sigma2 >= 1e-12");
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Config, std::string("malformed fit: ") + e.what());
  }
}

nlohmann::json report_to_json(const ErrorReport& r) {
  nlohmann::json j;
  j["version"] = version_string();
  j["config"] = r.config.to_json();
  j["norms"] = {{"cover", stats_json(r.cover_norms)}, {"stego", stats_json(r.stego_norms)}};
  j["model"] = r.model ? nlohmann::json{{"cover", descriptor_json(r.model->cover)},
                                        {"stego", descriptor_json(r.model->stego)}}
                       : nlohmann::json(nullptr);

  auto& batches = j["pe_by_batch"] = nlohmann::json::array();
  for (const auto& s : r.pe_by_batch) {
    batches.push_back({{"batch_size", s.batch_size},
                       {"batches_per_class", s.batches_per_class},
                       {"pe_optimal", s.pe_optimal},
                       {"pe_optimal_std", s.pe_optimal_std},
                       {"pe_at_tau", s.pe_at_tau},
                       {"per_fold_optimal", s.per_fold_optimal},
                       {"per_fold_at_tau", s.per_fold_at_tau},
                       {"p_fa_curve", s.p_fa_curve},
                       {"p_md_curve", s.p_md_curve}});
  }

  auto& folds = j["folds"] = nlohmann::json::array();
  for (const auto& f : r.folds) {
    folds.push_back({{"fold", f.fold},
                     {"cover_fit", fit_to_json(f.cover_fit)},
                     {"stego_fit", fit_to_json(f.stego_fit)},
                     {"pe_optimal", f.pe_optimal},
                     {"pe_at_tau", f.pe_at_tau}});
  }

  if (r.bit_accuracy) {
    j["bit_accuracy"] = *r.bit_accuracy;
    j["bit_error"] = 1.0 - *r.bit_accuracy;
  } else {
    j["bit_accuracy"] = nullptr;
    j["bit_error"] = nullptr;
  }
  j["bits_total"] = r.bits_total;
  j["histogram"] = {{"lo", r.histogram.lo},
                    {"hi", r.histogram.hi},
                    {"cover", r.histogram.cover},
                    {"stego", r.histogram.stego}};
  return j;
}

std::string pe_table_csv(const ErrorReport& r) {
  std::string out = "batch_size,steps,encoder,pe_optimal_pct,pe_at_tau_pct\n";
  for (const auto& s : r.pe_by_batch) {
    out += std::to_string(s.batch_size) + "," + std::to_string(r.config.channel.steps) + "," +
           std::string(to_string(r.config.encoder)) + "," + fmt("%.1f", 100.0 * s.pe_optimal) +
           "," + fmt("%.1f", 100.0 * s.pe_at_tau) + "\n";
  }
  return out;
}

std::string accuracy_table_csv(const ErrorReport& r) {
  std::string out = "encoder,prompt_known,bit_accuracy_pct,bit_error_pct,bits\n";
  out += std::string(to_string(r.config.encoder)) + "," +
         (r.config.channel.prompt_known ? "true" : "false") + ",";
  if (r.bit_accuracy)
    out += fmt("%.2f", 100.0 * *r.bit_accuracy) + "," + fmt("%.2f", 100.0 * (1.0 - *r.bit_accuracy));
  else
    out += "NA,NA";
  out += "," + std::to_string(r.bits_total) + "\n";
  return out;
}

std::string pe_vs_batch_csv(const ErrorReport& r) {
  std::string out = "batch_size,pe_optimal,pe_optimal_std,pe_at_tau\n";
  for (const auto& s : r.pe_by_batch)
    out += std::to_string(s.batch_size) + "," + full(s.pe_optimal) + "," +
           full(s.pe_optimal_std) + "," + full(s.pe_at_tau) + "\n";
  return out;
}

std::string histogram_csv(const ErrorReport& r, bool stego) {
  const auto& h = r.histogram;
  const auto& counts = stego ? h.stego : h.cover;
  const NormStats& st = stego ? r.stego_norms : r.cover_norms;
  const std::size_t bins = counts.size();
  const double width = h.hi > h.lo ? (h.hi - h.lo) / static_cast<double>(bins) : 1.0;
  const double var = std::max(st.variance, kVarianceFloor);
  std::string out = "bin_lo,bin_hi,count,fit_count\n";
  for (std::size_t k = 0; k < bins; ++k) {
    const double lo = h.lo + width * static_cast<double>(k);
    const double hi = k + 1 == bins ? std::max(h.hi, lo) : h.lo + width * static_cast<double>(k + 1);
    const double expected = static_cast<double>(st.count) *
                            (normal_cdf(hi, st.mean, var) - normal_cdf(lo, st.mean, var));
    out += full(lo) + "," + full(hi) + "," + std::to_string(counts[k]) + "," + full(expected) + "\n";
  }
  return out;
}

std::vector<fs::path> emit_report(const ErrorReport& r, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create output directory " + dir.string());
  const std::vector<std::pair<std::string, std::string>> files = {
      {"report.json", report_to_json(r).dump(2) + "\n"},
      {"pe_table.csv", pe_table_csv(r)},
      {"accuracy_table.csv", accuracy_table_csv(r)},
      {"hist_cover.csv", histogram_csv(r, false)},
      {"hist_stego.csv", histogram_csv(r, true)},
      {"pe_vs_batch.csv", pe_vs_batch_csv(r)},
  };
  std::vector<fs::path> written;
  for (const auto& [name, text] : files) {
    write_file_atomic(dir / name, text);
    written.push_back(dir / name);
  }
  return written;
}

}  // namespace lsteg
