#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "doctest.h"
#include "json.hpp"
#include "latentsteg/error.hpp"
#include "latentsteg/evaluation.hpp"
#include "latentsteg/report.hpp"

using namespace lsteg;
namespace fs = std::filesystem;

namespace {

ErrorReport sample_report(ChannelMode mode) {
  ExperimentConfig cfg;
  cfg.n_pairs = 300;
  cfg.folds = 3;
  cfg.fit_size = 40;
  cfg.batch_sizes = {1, 5};
  cfg.histogram_bins = 12;
  cfg.channel.mode = mode;
  cfg.channel.sigma2_alpha = 4.91;
  cfg.channel.noise_std = mode == ChannelMode::Isotropic ? 0.4 : 0.0;
  if (mode == ChannelMode::Isotropic) cfg.channel.sigma2_alpha = 0.0;
  return run_cv(generate_corpus(cfg, 1), cfg);
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("fit JSON round trip and validation") {
  const GaussianFit f{122.5, 5.5, 1000};
  CHECK(fit_from_json(fit_to_json(f)) == f);
  CHECK_THROWS_AS(fit_from_json(nlohmann::json{{"mu", 1.0}}), Error);
  CHECK_THROWS_AS(fit_from_json(nlohmann::json{{"mu", 1.0}, {"sigma2", 0.0}}), Error);
  CHECK_THROWS_AS(fit_from_json(nlohmann::json{{"mu", "a"}, {"sigma2", 1.0}}), Error);
}

TEST_CASE("P_E table layout") {
  const auto r = sample_report(ChannelMode::NormModel);
  const auto l = lines(pe_table_csv(r));
  REQUIRE(l.size() == 3);
  CHECK(l[0] == "batch_size,steps,encoder,pe_optimal_pct,pe_at_tau_pct");
  CHECK(l[1].rfind("1,20,ss,", 0) == 0);
  CHECK(l[2].rfind("5,20,ss,", 0) == 0);
}

TEST_CASE("accuracy table reports NA without decoding") {
  CHECK(lines(accuracy_table_csv(sample_report(ChannelMode::NormModel)))[1] == "ss,true,NA,NA,0");
  const auto l = lines(accuracy_table_csv(sample_report(ChannelMode::Isotropic)));
  CHECK(l[0] == "encoder,prompt_known,bit_accuracy_pct,bit_error_pct,bits");
  CHECK(l[1].find(",4915200") != std::string::npos);
}

TEST_CASE("histograms share bins and sum to the class size") {
  const auto r = sample_report(ChannelMode::NormModel);
  const auto c = lines(histogram_csv(r, false));
  const auto s = lines(histogram_csv(r, true));
  REQUIRE(c.size() == 13);
  REQUIRE(s.size() == 13);
  CHECK(c[0] == "bin_lo,bin_hi,count,fit_count");
  long total = 0;
  double expected = 0;
  for (std::size_t i = 1; i < c.size(); ++i) {
    CHECK(c[i].substr(0, c[i].find(',')) == s[i].substr(0, s[i].find(',')));
    std::istringstream in(c[i]);
    std::string lo, hi, n, fit;
    std::getline(in, lo, ',');
    std::getline(in, hi, ',');
    std::getline(in, n, ',');
    std::getline(in, fit, ',');
    total += std::stol(n);
    expected += std::stod(fit);
  }
  CHECK(total == 300);
  CHECK(expected <= 300.0 + 1e-9);
  CHECK(expected > 250.0);
}

TEST_CASE("report JSON fields") {
  const auto r = sample_report(ChannelMode::NormModel);
  const auto j = report_to_json(r);
  for (const char* k : {"version", "config", "norms", "model", "pe_by_batch", "folds",
                        "bit_accuracy", "bit_error", "bits_total", "histogram"})
    CHECK(j.contains(k));
  CHECK(j["folds"].size() == 3);
  CHECK(j["bit_accuracy"].is_null());
  CHECK(j["model"]["stego"]["variance"].get<double>() == doctest::Approx(4.91));
  CHECK(ExperimentConfig::from_json(j["config"]).to_json() == j["config"]);
}

TEST_CASE("emit_report writes every file into the directory") {
  const fs::path dir = fs::temp_directory_path() / ("lsteg-report-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  const auto written = emit_report(sample_report(ChannelMode::NormModel), dir);
  CHECK(written.size() == 6);
  for (const char* f : {"report.json", "pe_table.csv", "accuracy_table.csv", "hist_cover.csv",
                        "hist_stego.csv", "pe_vs_batch.csv"})
    CHECK(fs::exists(dir / f));
  std::size_t count = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++count;
  CHECK(count == 6);
  std::ifstream in(dir / "report.json");
  CHECK(nlohmann::json::parse(in).is_object());
  fs::remove_all(dir);
}
