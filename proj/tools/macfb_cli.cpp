// SPDX-License-Identifier: Apache-2.0
//
// Batch CLI. `run` executes an experiment config and writes the CSV/JSON
// result tables, `validate` checks a config without running it, and `pack`
// designs the requested codebooks and emits them as JSON.
//
// Exit codes: 0 ok, 1 config error, 2 runtime failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "macfb/macfb.hpp"

namespace {

namespace fs = std::filesystem;

macfb::Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw macfb::ConfigError("cannot open config file: " + path);
  macfb::Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw macfb::ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return j;
}

std::string default_out_dir() {
  if (const char* env = std::getenv("MACFB_OUT_DIR"); env && *env) return env;
  return ".";
}

int cmd_validate(const std::string& config_path) {
  const macfb::Json j = load_json(config_path);
  const macfb::ValidationReport report = macfb::validate_config(j);
  for (const auto& w : report.warnings) std::cout << "warning: " << w << "\n";
  if (!report.ok()) {
    for (const auto& e : report.errors) std::cout << "error: " << e << "\n";
    std::cout << config_path << ": INVALID (" << report.errors.size() << " error(s))\n";
    return 1;
  }
  std::cout << config_path << ": ok\n";
  return 0;
}

int cmd_run(const std::string& config_path, const std::string& out_dir,
            std::optional<std::uint64_t> seed_override, int threads) {
  macfb::Json j = load_json(config_path);
  if (seed_override) j["seed"] = *seed_override;
  const macfb::ExperimentConfig cfg = macfb::config_from_json(j);

  fs::create_directories(out_dir);
  const macfb::ResultTable table = macfb::run_experiment(cfg, j, threads);

  const fs::path csv_path = fs::path(out_dir) / (cfg.output_prefix + ".csv");
  const fs::path json_path = fs::path(out_dir) / (cfg.output_prefix + ".json");
  macfb::write_text_file(csv_path.string(), macfb::to_csv(table));
  macfb::write_text_file(json_path.string(), macfb::to_json(table).dump(2) + "\n");

  std::cout << "wrote " << csv_path.string() << " (" << table.rows.size() << " rows)\n";
  std::cout << "wrote " << json_path.string() << "\n";
  return 0;
}

int cmd_pack(const std::string& config_path, const std::string& scheme_name,
             const std::string& out_dir, std::optional<std::uint64_t> seed_override, int threads) {
  (void)threads;
  macfb::Json j = load_json(config_path);
  if (seed_override) j["seed"] = *seed_override;
  const macfb::ExperimentConfig cfg = macfb::config_from_json(j);
  const auto scheme = macfb::scheme_from_name(scheme_name);
  if (!scheme || (*scheme != macfb::Scheme::Covariance && *scheme != macfb::Scheme::Eigenbeam &&
                  *scheme != macfb::Scheme::Grassmann)) {
    throw macfb::ConfigError("pack: scheme must be one of covariance, eigenbeam, grassmann");
  }
  if (cfg.bits_list.empty()) throw macfb::ConfigError("pack: config needs a bits_list");

  // designs are anchored at the first SNR point of the grid
  const double power = macfb::snr_db_to_power(cfg.snr_grid_db.front());
  const macfb::PowerBudget budget = cfg.budget.at_power(power, cfg.dims.users);
  const double sigma2 = 1.0;
  const macfb::ChannelModel model = cfg.channel.build(cfg.dims);

  macfb::TrainingSet training;
  training.sigma2 = sigma2;
  if (*scheme != macfb::Scheme::Grassmann) {
    macfb::Rng rng(macfb::Rng::derive(cfg.seed, {0x7121ULL}));
    training.draws.reserve(cfg.training_size);
    for (std::size_t i = 0; i < cfg.training_size; ++i) {
      training.draws.push_back(macfb::sample(model, rng));
    }
  }

  fs::create_directories(out_dir);
  for (std::size_t bi = 0; bi < cfg.bits_list.size(); ++bi) {
    const int bits = cfg.bits_list[bi];
    macfb::Json out;
    if (*scheme == macfb::Scheme::Covariance) {
      macfb::LloydOptions opts = cfg.design;
      opts.seed = macfb::Rng::derive(cfg.seed, {0xc0ULL, static_cast<std::uint64_t>(bits), 0});
      out = macfb::to_json(macfb::design_covariance(training, bits, budget, opts));
    } else if (*scheme == macfb::Scheme::Eigenbeam) {
      macfb::LloydOptions opts = cfg.design;
      opts.seed = macfb::Rng::derive(cfg.seed, {0xe1ULL, static_cast<std::uint64_t>(bits), 0});
      out = macfb::to_json(macfb::eigenbeam_design(training, bits, power, opts));
    } else {
      macfb::GrassmannOptions gopts = cfg.grassmann;
      gopts.seed = macfb::Rng::derive(cfg.seed, {0x6123ULL, static_cast<std::uint64_t>(bits)});
      macfb::DirectionCodebook dirs = macfb::grassmann_design(bits, cfg.dims.users, cfg.dims.tx, gopts);
      if (cfg.channel.kind == macfb::FadingKind::Kronecker) {
        dirs = macfb::rotate_codebook(
            dirs, macfb::statistical_beams(cfg.channel.correlations_or_identity(cfg.dims)));
      }
      // a serialized codebook needs concrete amplitudes: the equal split in
      // correlated mode, otherwise one frozen draw of the random split per entry
      macfb::Rng prng(macfb::Rng::derive(cfg.seed, {0x6124ULL, static_cast<std::uint64_t>(bits)}));
      std::vector<std::vector<double>> fractions;
      for (std::size_t q = 0; q < dirs.entries.size(); ++q) {
        if (cfg.grassmann_equal_power()) {
          fractions.emplace_back(static_cast<std::size_t>(cfg.dims.users), 1.0 / cfg.dims.users);
          continue;
        }
        std::vector<double> alpha = macfb::random_power(1.0, cfg.dims.users, prng);
        for (double& a : alpha) a = a * a;
        fractions.push_back(std::move(alpha));
      }
      macfb::BeamformingCodebook book =
          macfb::assemble_beamforming(dirs, fractions, power, cfg.dims);
      book.meta.seed = gopts.seed;
      out = macfb::to_json(book);
    }
    const fs::path path = fs::path(out_dir) / (cfg.output_prefix + "_" + scheme_name + "_b" +
                                               std::to_string(bits) + "_codebook.json");
    macfb::write_text_file(path.string(), out.dump(2) + "\n");
    std::cout << "wrote " << path.string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Limited-feedback MIMO MAC codebook design and sum-rate simulation"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = default_out_dir();
  std::string pack_scheme;
  std::optional<std::uint64_t> seed_override;
  int threads = 0;

  auto* run = app.add_subcommand("run", "Run an experiment config and write result tables");
  run->add_option("config", config_path, "experiment config (JSON)")->required();
  run->add_option("--out", out_dir, "output directory (default: $MACFB_OUT_DIR or .)");
  run->add_option("--seed", seed_override, "override the config seed");
  run->add_option("--threads", threads, "worker threads (default: hardware concurrency)");

  auto* validate = app.add_subcommand("validate", "Check a config without running it");
  validate->add_option("config", config_path, "experiment config (JSON)")->required();

  auto* pack = app.add_subcommand("pack", "Design codebooks only and emit them as JSON");
  pack->add_option("--scheme", pack_scheme, "covariance | eigenbeam | grassmann")->required();
  pack->add_option("config", config_path, "experiment config (JSON)")->required();
  pack->add_option("--out", out_dir, "output directory (default: $MACFB_OUT_DIR or .)");
  pack->add_option("--seed", seed_override, "override the config seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(run)) return cmd_run(config_path, out_dir, seed_override, threads);
    if (app.got_subcommand(validate)) return cmd_validate(config_path);
    if (app.got_subcommand(pack)) return cmd_pack(config_path, pack_scheme, out_dir, seed_override, threads);
  } catch (const macfb::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
