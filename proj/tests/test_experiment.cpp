// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>

#include <catch2/catch.hpp>

#include "macfb/experiment.hpp"

using namespace macfb;

namespace {

Json tiny_config() {
  return Json{{"name", "tiny"},
              {"dims", {{"users", 2}, {"tx_antennas", 2}, {"rx_antennas", 2}}},
              {"channel", {{"model", "iid_rayleigh"}}},
              {"snr_grid_db", {0.0, 10.0}},
              {"bits_list", {1}},
              {"schemes", {"covariance", "no_feedback", "full_csi", "tdma"}},
              {"budget", {{"type", "sum"}}},
              {"training_size", 64},
              {"eval_draws", 128},
              {"seed", 20240915}};
}

}  // namespace

TEST_CASE("validate accepts a well-formed config") {
  const ValidationReport report = validate_config(tiny_config());
  CHECK(report.ok());
  CHECK(report.warnings.size() == 1);  // small eval_draws
}

TEST_CASE("validate reports missing and malformed fields with paths") {
  Json j = tiny_config();
  j.erase("dims");
  ValidationReport report = validate_config(j);
  REQUIRE_FALSE(report.ok());
  bool found = false;
  for (const auto& e : report.errors) found = found || e.find("dims") != std::string::npos;
  CHECK(found);

  j = tiny_config();
  j["snr_grid_db"] = {10.0, 0.0};
  report = validate_config(j);
  REQUIRE_FALSE(report.ok());
  found = false;
  for (const auto& e : report.errors) {
    found = found || e.find("strictly increasing") != std::string::npos;
  }
  CHECK(found);

  j = tiny_config();
  j["schemes"] = {"covariance", "mystery"};
  CHECK_FALSE(validate_config(j).ok());

  j = tiny_config();
  j["training_size"] = 10;
  CHECK_FALSE(validate_config(j).ok());

  j = tiny_config();
  j["extra_field"] = 1;
  CHECK_FALSE(validate_config(j).ok());

  j = tiny_config();
  j["budget"] = {{"type", "individual"}, {"fractions", {0.5, 0.25}}};
  CHECK_FALSE(validate_config(j).ok());  // fractions must sum to 1

  j = tiny_config();
  j["schemes"] = {"region2u"};
  CHECK_FALSE(validate_config(j).ok());  // region2u needs an individual budget
}

TEST_CASE("every shipped recipe validates") {
  namespace fs = std::filesystem;
  const fs::path dir = MACFB_RECIPE_DIR;
  REQUIRE(fs::exists(dir));
  std::size_t count = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".json") continue;
    std::ifstream in(entry.path());
    Json j;
    in >> j;
    const ValidationReport report = validate_config(j);
    INFO(entry.path().string());
    for (const auto& e : report.errors) FAIL_CHECK(e);
    CHECK(report.ok());
    ++count;
  }
  CHECK(count >= 7);  // fig4 ... fig10
}

TEST_CASE("run_experiment is deterministic and thread-count independent") {
  const Json cfg = tiny_config();
  const ResultTable a = run_experiment(cfg, 1);
  const ResultTable b = run_experiment(cfg, 2);
  const std::string csv_a = to_csv(a);
  CHECK(csv_a == to_csv(b));
  CHECK(to_json(a).dump() == to_json(b).dump());

  // row order follows the config: schemes, then bits, then SNR
  REQUIRE(a.rows.size() == 2 + 2 + 2 + 2);
  CHECK(a.rows[0].scheme == Scheme::Covariance);
  CHECK(a.rows[0].snr_db == 0.0);
  CHECK(a.rows[1].snr_db == 10.0);
  CHECK(a.rows[2].scheme == Scheme::NoFeedback);
  CHECK(csv_a.substr(0, 51) == "scheme,B,snr_db,mean_bits,stderr_bits,draws,seed\nco");
}

TEST_CASE("a different seed changes the Monte Carlo draw") {
  Json cfg = tiny_config();
  const ResultTable a = run_experiment(cfg, 2);
  cfg["seed"] = 999;
  const ResultTable b = run_experiment(cfg, 2);
  CHECK(a.rows[0].mean_bits != b.rows[0].mean_bits);
  CHECK(a.config_hash != b.config_hash);  // the echoed config differs
}

TEST_CASE("baselines sandwich the codebook on the tiny run") {
  const ResultTable t = run_experiment(tiny_config(), 2);
  // rows: covariance(2), no_feedback(2), full_csi(2), tdma(2)
  for (int i = 0; i < 2; ++i) {
    const ResultRow& cov = t.rows[static_cast<std::size_t>(i)];
    const ResultRow& nf = t.rows[static_cast<std::size_t>(2 + i)];
    const ResultRow& csi = t.rows[static_cast<std::size_t>(4 + i)];
    const double slack = 3.0 * std::sqrt(cov.stderr_bits * cov.stderr_bits +
                                         nf.stderr_bits * nf.stderr_bits);
    CHECK(cov.mean_bits >= nf.mean_bits - slack);
    CHECK(cov.mean_bits <= csi.mean_bits + 1e-3);
  }
}

TEST_CASE("region experiment emits nested regions and rows") {
  const Json cfg{{"name", "tiny_region"},
                 {"dims", {{"users", 2}, {"tx_antennas", 2}, {"rx_antennas", 2}}},
                 {"channel", {{"model", "iid_rayleigh"}}},
                 {"snr_grid_db", {6.0}},
                 {"bits_list", {1, 2}},
                 {"schemes", {"region2u"}},
                 {"budget", {{"type", "individual"}, {"fractions", {0.5, 0.5}}}},
                 {"training_size", 96},
                 {"eval_draws", 256},
                 {"seed", 7}};
  const ResultTable t = run_experiment(cfg, 2);
  REQUIRE(t.rows.size() == 2);
  REQUIRE(t.regions.size() == 2);
  CHECK(t.regions[0].bits == 1);
  CHECK(t.regions[1].bits == 2);
  CHECK(t.regions[0].region.polygon.vertices.size() >= 3);
  // the extended codebook keeps the base entries, so the region cannot shrink
  const double slack = 3.0 * (t.regions[0].region.max_stderr + t.regions[1].region.max_stderr);
  for (const auto& v : t.regions[0].region.polygon.vertices) {
    CHECK(t.regions[1].region.polygon.contains(v, slack));
  }
  const Json out = to_json(t);
  CHECK(out.contains("regions"));
}

TEST_CASE("kronecker config runs statistical and rotated grassmann schemes") {
  const Json cfg{{"name", "tiny_corr"},
                 {"dims", {{"users", 2}, {"tx_antennas", 2}, {"rx_antennas", 2}}},
                 {"channel", {{"model", "kronecker"}, {"tx_correlation_eigenvalues", {1.2, 0.8}}}},
                 {"snr_grid_db", {5.0}},
                 {"bits_list", {2}},
                 {"schemes", {"grassmann", "statistical_bf", "random_bf"}},
                 {"budget", {{"type", "sum"}}},
                 {"eval_draws", 300},
                 {"seed", 11},
                 {"grassmann", {{"training_size", 512}, {"rounds", 15}}}};
  const ResultTable t = run_experiment(cfg, 2);
  REQUIRE(t.rows.size() == 3);
  // selection over a 4-entry codebook beats the single statistical beam on average
  CHECK(t.rows[0].mean_bits > t.rows[1].mean_bits - 3.0 * t.rows[1].stderr_bits);
  for (const auto& row : t.rows) {
    CHECK(row.mean_bits > 0.0);
    CHECK(row.draws == 300);
  }
}

TEST_CASE("config_from_json rejects invalid configs with a message") {
  Json j = tiny_config();
  j["seed"] = "not-a-number";
  CHECK_THROWS_AS(config_from_json(j), ConfigError);
}

TEST_CASE("no-feedback-only run is checkable against the direct evaluation") {
  Json cfg = tiny_config();
  cfg["schemes"] = {"no_feedback"};
  cfg.erase("training_size");
  cfg.erase("bits_list");
  const ResultTable t = run_experiment(cfg, 2);
  REQUIRE(t.rows.size() == 2);

  // rebuild the shared evaluation stream and average the baseline directly
  const ChannelModel model = ChannelModel::iid_rayleigh({2, 2, 2});
  Rng rng(Rng::derive(cfg["seed"].get<std::uint64_t>(), {0xEFA1ULL}));
  std::vector<ChannelRealization> draws;
  for (int i = 0; i < 128; ++i) draws.push_back(sample(model, rng));
  for (std::size_t si = 0; si < 2; ++si) {
    const double power = snr_db_to_power(cfg["snr_grid_db"][si].get<double>());
    double total = 0.0;
    for (const auto& h : draws) total += no_feedback_rate(h, PowerBudget::sum(power), 1.0);
    CHECK(t.rows[si].mean_bits == Approx(total / 128.0).epsilon(1e-12));
  }
}

TEST_CASE("runs with different seeds agree within three standard errors") {
  Json cfg = tiny_config();
  cfg["schemes"] = {"no_feedback"};
  cfg.erase("training_size");
  cfg.erase("bits_list");
  cfg["eval_draws"] = 800;
  std::vector<std::uint64_t> seeds{101, 202, 303};
  std::vector<std::vector<ResultRow>> runs;
  for (std::uint64_t s : seeds) {
    cfg["seed"] = s;
    runs.push_back(run_experiment(cfg, 2).rows);
  }
  for (std::size_t a = 0; a < runs.size(); ++a) {
    for (std::size_t b = a + 1; b < runs.size(); ++b) {
      for (std::size_t i = 0; i < runs[a].size(); ++i) {
        const double gap = std::abs(runs[a][i].mean_bits - runs[b][i].mean_bits);
        const double se = std::sqrt(runs[a][i].stderr_bits * runs[a][i].stderr_bits +
                                    runs[b][i].stderr_bits * runs[b][i].stderr_bits);
        CHECK(gap <= 3.0 * se);
      }
    }
  }
}

TEST_CASE("kronecker correlation can be given as explicit matrices") {
  Json good{{"rows", 2},
            {"cols", 2},
            {"re", {1.2, 0.0, 0.0, 0.8}},
            {"im", {0.0, 0.0, 0.0, 0.0}}};
  Json cfg{{"name", "mat_corr"},
           {"dims", {{"users", 2}, {"tx_antennas", 2}, {"rx_antennas", 2}}},
           {"channel", {{"model", "kronecker"}, {"tx_correlation", {good, good}}}},
           {"snr_grid_db", {5.0}},
           {"bits_list", {1}},
           {"schemes", {"statistical_bf"}},
           {"budget", {{"type", "sum"}}},
           {"eval_draws", 100},
           {"seed", 5}};
  CHECK(validate_config(cfg).ok());
  const ResultTable t = run_experiment(cfg, 1);
  CHECK(t.rows.size() == 1);

  Json bad = cfg;
  bad["channel"]["tx_correlation"][1]["re"] = {2.0, 0.0, 0.0, 0.8};  // trace != Mt
  CHECK_FALSE(validate_config(bad).ok());

  Json skew = cfg;
  skew["channel"]["tx_correlation"][0]["im"] = {0.0, 0.5, 0.5, 0.0};  // not Hermitian
  CHECK_FALSE(validate_config(skew).ok());
}

TEST_CASE("grassmann power_split option is validated and parsed") {
  Json cfg = tiny_config();
  cfg["schemes"] = {"grassmann"};
  cfg.erase("training_size");
  cfg["grassmann"] = {{"power_split", "sideways"}};
  CHECK_FALSE(validate_config(cfg).ok());

  cfg["grassmann"]["power_split"] = "equal";
  REQUIRE(validate_config(cfg).ok());
  CHECK(config_from_json(cfg).grassmann_equal_power());
  cfg["grassmann"]["power_split"] = "random";
  CHECK_FALSE(config_from_json(cfg).grassmann_equal_power());
  cfg["grassmann"]["power_split"] = "auto";
  CHECK_FALSE(config_from_json(cfg).grassmann_equal_power());  // iid channel
}
