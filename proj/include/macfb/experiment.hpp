// SPDX-License-Identifier: Apache-2.0
//
// Batch experiment layer: declarative JSON configs, schema validation with
// field-path diagnostics, a deterministic worker-pool runner and the CSV /
// JSON result tables. SNR is P / sigma^2 with sigma^2 = 1, P = 10^(dB/10).

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "macfb/bf_codebook.hpp"
#include "macfb/cov_codebook.hpp"
#include "macfb/rates.hpp"
#include "macfb/serialize.hpp"

namespace macfb {

enum class Scheme {
  Covariance,
  Eigenbeam,
  Grassmann,
  RandomBf,
  StatisticalBf,
  FullCsi,
  NoFeedback,
  Tdma,
  Region2U,
};

inline const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::Covariance: return "covariance";
    case Scheme::Eigenbeam: return "eigenbeam";
    case Scheme::Grassmann: return "grassmann";
    case Scheme::RandomBf: return "random_bf";
    case Scheme::StatisticalBf: return "statistical_bf";
    case Scheme::FullCsi: return "full_csi";
    case Scheme::NoFeedback: return "no_feedback";
    case Scheme::Tdma: return "tdma";
    case Scheme::Region2U: return "region2u";
  }
  return "?";
}

inline std::optional<Scheme> scheme_from_name(const std::string& name) {
  for (Scheme s : {Scheme::Covariance, Scheme::Eigenbeam, Scheme::Grassmann, Scheme::RandomBf,
                   Scheme::StatisticalBf, Scheme::FullCsi, Scheme::NoFeedback, Scheme::Tdma,
                   Scheme::Region2U}) {
    if (name == scheme_name(s)) return s;
  }
  return std::nullopt;
}

inline bool scheme_uses_bits(Scheme s) {
  return s == Scheme::Covariance || s == Scheme::Eigenbeam || s == Scheme::Grassmann ||
         s == Scheme::RandomBf || s == Scheme::Region2U;
}

inline bool scheme_needs_training(Scheme s) {
  return s == Scheme::Covariance || s == Scheme::Eigenbeam || s == Scheme::Region2U;
}

/// Channel description as written in the config; the model is materialized
/// per run so the config stays plain data.
struct ChannelSpec {
  FadingKind kind = FadingKind::IidRayleigh;
  std::vector<CMatrix> tx_correlation;  // one per user for the Kronecker model

  ChannelModel build(const SystemDims& dims) const {
    if (kind == FadingKind::IidRayleigh) return ChannelModel::iid_rayleigh(dims);
    std::vector<HermitianPsd> corr;
    corr.reserve(tx_correlation.size());
    for (const auto& m : tx_correlation) corr.emplace_back(m);
    return ChannelModel::kronecker(dims, std::move(corr));
  }

  /// Per-user correlation matrices, identity under i.i.d. fading.
  std::vector<HermitianPsd> correlations_or_identity(const SystemDims& dims) const {
    std::vector<HermitianPsd> corr;
    corr.reserve(static_cast<std::size_t>(dims.users));
    if (kind == FadingKind::Kronecker) {
      for (const auto& m : tx_correlation) corr.emplace_back(m);
    } else {
      for (int k = 0; k < dims.users; ++k) {
        corr.emplace_back(CMatrix(CMatrix::Identity(dims.tx, dims.tx)));
      }
    }
    return corr;
  }
};

/// Budget description; concrete budgets are instantiated per SNR point.
struct BudgetSpec {
  PowerBudget::Kind kind = PowerBudget::Kind::Sum;
  std::vector<double> fractions;  // individual only, sums to 1

  PowerBudget at_power(double total, int users) const {
    if (kind == PowerBudget::Kind::Sum) return PowerBudget::sum(total);
    std::vector<double> caps(static_cast<std::size_t>(users));
    for (int k = 0; k < users; ++k) caps[static_cast<std::size_t>(k)] = fractions[static_cast<std::size_t>(k)] * total;
    return PowerBudget::individual(std::move(caps));
  }
};

/// Power split used by the Grassmannian beamforming scheme. `Auto` follows
/// the channel model: random splits under i.i.d. fading, the statistical
/// beamformer's equal split under a correlated (Kronecker) model, where the
/// rotated codebook acts as a drop-in improvement of statistical beamforming.
enum class GrassmannPower { Auto, Random, Equal };

struct ExperimentConfig {
  std::string name;
  SystemDims dims;
  ChannelSpec channel;
  std::vector<double> snr_grid_db;
  std::vector<int> bits_list;
  std::vector<Scheme> schemes;
  BudgetSpec budget;
  std::size_t training_size = 0;
  std::size_t eval_draws = 0;
  std::uint64_t seed = 0;
  std::string output_prefix;
  LloydOptions design;        // seed field is ignored; per-cell seeds are derived
  GrassmannOptions grassmann;  // ditto
  GrassmannPower grassmann_power = GrassmannPower::Auto;

  bool grassmann_equal_power() const {
    if (grassmann_power == GrassmannPower::Equal) return true;
    if (grassmann_power == GrassmannPower::Random) return false;
    return channel.kind == FadingKind::Kronecker;
  }
};

struct ValidationReport {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;

  bool ok() const { return errors.empty(); }
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

inline double snr_db_to_power(double snr_db) { return std::pow(10.0, snr_db / 10.0); }

// ---------------------------------------------------------------------------
// Config parsing and validation
// ---------------------------------------------------------------------------

namespace detail {

inline bool is_uint(const Json& j) { return j.is_number_unsigned() || (j.is_number_integer() && j.get<long long>() >= 0); }

}  // namespace detail

inline ValidationReport validate_config(const Json& j) {
  ValidationReport report;
  auto err = [&](const std::string& path, const std::string& msg) {
    report.errors.push_back(path + ": " + msg);
  };

  if (!j.is_object()) {
    err("(root)", "config must be a JSON object");
    return report;
  }

  static const std::set<std::string> known_keys = {
      "name",   "dims",          "channel",    "snr_grid_db", "bits_list", "schemes",
      "budget", "training_size", "eval_draws", "seed",        "output_prefix",
      "design", "grassmann"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known_keys.count(it.key())) err(it.key(), "unknown field");
  }

  if (!j.contains("name") || !j["name"].is_string() || j["name"].get<std::string>().empty()) {
    err("name", "required non-empty string");
  }

  int users = 0, tx = 0;
  if (!j.contains("dims") || !j["dims"].is_object()) {
    err("dims", "required object with users, tx_antennas, rx_antennas");
  } else {
    for (const char* f : {"users", "tx_antennas", "rx_antennas"}) {
      const std::string path = std::string("dims.") + f;
      if (!j["dims"].contains(f) || !detail::is_uint(j["dims"][f]) || j["dims"][f].get<long long>() < 1) {
        err(path, "required integer >= 1");
      }
    }
    if (report.errors.empty() || (j["dims"].contains("users") && j["dims"].contains("tx_antennas"))) {
      if (j["dims"].contains("users") && detail::is_uint(j["dims"]["users"])) users = j["dims"]["users"].get<int>();
      if (j["dims"].contains("tx_antennas") && detail::is_uint(j["dims"]["tx_antennas"])) tx = j["dims"]["tx_antennas"].get<int>();
    }
  }

  if (!j.contains("channel") || !j["channel"].is_object() || !j["channel"].contains("model")) {
    err("channel.model", "required; one of iid_rayleigh, kronecker");
  } else {
    const std::string model = j["channel"]["model"].is_string() ? j["channel"]["model"].get<std::string>() : "";
    if (model == "iid_rayleigh") {
      // nothing else to check
    } else if (model == "kronecker") {
      const bool has_eigs = j["channel"].contains("tx_correlation_eigenvalues");
      const bool has_mats = j["channel"].contains("tx_correlation");
      if (has_eigs == has_mats) {
        err("channel", "kronecker needs exactly one of tx_correlation_eigenvalues or tx_correlation");
      } else if (has_eigs) {
        const auto& eigs = j["channel"]["tx_correlation_eigenvalues"];
        if (!eigs.is_array() || static_cast<int>(eigs.size()) != tx) {
          err("channel.tx_correlation_eigenvalues", "must list one eigenvalue per transmit antenna");
        } else {
          double trace = 0.0;
          bool positive = true;
          for (const auto& e : eigs) {
            if (!e.is_number() || e.get<double>() <= 0.0) positive = false;
            else trace += e.get<double>();
          }
          if (!positive) err("channel.tx_correlation_eigenvalues", "eigenvalues must be positive numbers");
          else if (std::abs(trace - tx) > 1e-8 * std::max(1, tx)) {
            err("channel.tx_correlation_eigenvalues", "eigenvalues must sum to Mt (unit average entry power)");
          }
        }
      } else {
        const auto& mats = j["channel"]["tx_correlation"];
        if (!mats.is_array() || static_cast<int>(mats.size()) != users) {
          err("channel.tx_correlation", "must list one matrix per user");
        } else {
          for (std::size_t k = 0; k < mats.size(); ++k) {
            const std::string path = "channel.tx_correlation[" + std::to_string(k) + "]";
            try {
              const CMatrix m = detail::matrix_from_json(mats[k]);
              if (m.rows() != tx || m.cols() != tx) {
                err(path, "must be Mt x Mt");
                continue;
              }
              const HermitianPsd r(m);
              if (std::abs(r.trace() - tx) > 1e-8 * std::max(1, tx)) {
                err(path, "trace must equal Mt (unit average entry power)");
              }
            } catch (const std::exception& e) {
              err(path, e.what());
            }
          }
        }
      }
    } else {
      err("channel.model", "unknown model '" + model + "'");
    }
  }

  if (!j.contains("snr_grid_db") || !j["snr_grid_db"].is_array() || j["snr_grid_db"].empty()) {
    err("snr_grid_db", "required non-empty array");
  } else {
    double prev = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < j["snr_grid_db"].size(); ++i) {
      if (!j["snr_grid_db"][i].is_number()) {
        err("snr_grid_db[" + std::to_string(i) + "]", "must be a number");
        break;
      }
      const double v = j["snr_grid_db"][i].get<double>();
      if (v <= prev) {
        err("snr_grid_db", "grid must be strictly increasing");
        break;
      }
      prev = v;
    }
  }

  std::vector<Scheme> schemes;
  if (!j.contains("schemes") || !j["schemes"].is_array() || j["schemes"].empty()) {
    err("schemes", "required non-empty array");
  } else {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < j["schemes"].size(); ++i) {
      const std::string path = "schemes[" + std::to_string(i) + "]";
      if (!j["schemes"][i].is_string()) {
        err(path, "must be a string");
        continue;
      }
      const std::string name = j["schemes"][i].get<std::string>();
      const auto s = scheme_from_name(name);
      if (!s) {
        err(path, "unknown scheme '" + name + "'");
        continue;
      }
      if (!seen.insert(name).second) err(path, "duplicate scheme");
      schemes.push_back(*s);
    }
  }
  const bool any_bits = std::any_of(schemes.begin(), schemes.end(), scheme_uses_bits);
  const bool any_training = std::any_of(schemes.begin(), schemes.end(), scheme_needs_training);
  const bool has_region = std::any_of(schemes.begin(), schemes.end(),
                                      [](Scheme s) { return s == Scheme::Region2U; });
  const bool has_grassmann = std::any_of(schemes.begin(), schemes.end(), [](Scheme s) {
    return s == Scheme::Grassmann || s == Scheme::RandomBf;
  });

  int max_bits = 0;
  if (any_bits) {
    if (!j.contains("bits_list") || !j["bits_list"].is_array() || j["bits_list"].empty()) {
      err("bits_list", "required non-empty array for the requested schemes");
    } else {
      int prev = -1;
      bool ascending = true;
      for (std::size_t i = 0; i < j["bits_list"].size(); ++i) {
        const std::string path = "bits_list[" + std::to_string(i) + "]";
        if (!detail::is_uint(j["bits_list"][i]) || j["bits_list"][i].get<long long>() > 20) {
          err(path, "must be an integer in [0, 20]");
          continue;
        }
        const int b = j["bits_list"][i].get<int>();
        if (b <= prev) ascending = false;
        prev = b;
        max_bits = std::max(max_bits, b);
        if (has_grassmann && b < 1) err(path, "grassmann/random_bf need at least 1 bit");
      }
      if (has_region && !ascending) err("bits_list", "region2u requires strictly increasing bits");
    }
  }

  bool sum_budget = true;
  if (!j.contains("budget") || !j["budget"].is_object() || !j["budget"].contains("type")) {
    err("budget.type", "required; one of sum, individual");
  } else {
    const std::string type = j["budget"]["type"].is_string() ? j["budget"]["type"].get<std::string>() : "";
    if (type == "sum") {
      // total power comes from the SNR grid
    } else if (type == "individual") {
      sum_budget = false;
      if (!j["budget"].contains("fractions") || !j["budget"]["fractions"].is_array() ||
          static_cast<int>(j["budget"]["fractions"].size()) != users) {
        err("budget.fractions", "must list one positive fraction per user");
      } else {
        double total = 0.0;
        bool positive = true;
        for (const auto& f : j["budget"]["fractions"]) {
          if (!f.is_number() || f.get<double>() <= 0.0) positive = false;
          else total += f.get<double>();
        }
        if (!positive) err("budget.fractions", "fractions must be positive numbers");
        else if (std::abs(total - 1.0) > 1e-9) err("budget.fractions", "fractions must sum to 1");
      }
    } else {
      err("budget.type", "unknown budget type '" + type + "'");
    }
  }

  for (Scheme s : schemes) {
    if (s == Scheme::Tdma && !sum_budget) err("schemes", "tdma is defined for the sum budget only");
    if (s == Scheme::Region2U && users != 0 && users != 2) err("schemes", "region2u requires a two-user system");
    if (s == Scheme::Region2U && sum_budget) err("schemes", "region2u requires an individual budget");
  }

  if (any_training) {
    if (!j.contains("training_size") || !detail::is_uint(j["training_size"])) {
      err("training_size", "required integer for design-based schemes");
    } else {
      const long long need = 20LL << max_bits;
      if (j["training_size"].get<long long>() < need) {
        err("training_size", "need at least 20 draws per codeword (>= " + std::to_string(need) + ")");
      }
    }
  }

  if (!j.contains("eval_draws") || !detail::is_uint(j["eval_draws"]) || j["eval_draws"].get<long long>() < 1) {
    err("eval_draws", "required integer >= 1");
  } else if (j["eval_draws"].get<long long>() < 1000) {
    report.warnings.push_back("eval_draws: below 1000, too few for acceptance-grade Monte Carlo runs");
  }

  if (!j.contains("seed") || !detail::is_uint(j["seed"])) err("seed", "required unsigned integer");

  if (j.contains("output_prefix") && (!j["output_prefix"].is_string() || j["output_prefix"].get<std::string>().empty())) {
    err("output_prefix", "must be a non-empty string when given");
  }
  if (j.contains("design")) {
    if (!j["design"].is_object()) {
      err("design", "must be an object");
    } else {
      for (auto it = j["design"].begin(); it != j["design"].end(); ++it) {
        const std::string& key = it.key();
        if (key == "restarts" || key == "max_rounds") {
          if (!detail::is_uint(it.value()) || it.value().get<long long>() < 1) err("design." + key, "must be an integer >= 1");
        } else if (key == "tol") {
          if (!it.value().is_number() || it.value().get<double>() <= 0.0) err("design.tol", "must be a positive number");
        } else {
          err("design." + key, "unknown field");
        }
      }
    }
  }
  if (j.contains("grassmann")) {
    if (!j["grassmann"].is_object()) {
      err("grassmann", "must be an object");
    } else {
      for (auto it = j["grassmann"].begin(); it != j["grassmann"].end(); ++it) {
        const std::string& key = it.key();
        if (key == "training_size" || key == "rounds") {
          if (!detail::is_uint(it.value()) || it.value().get<long long>() < 1) err("grassmann." + key, "must be an integer >= 1");
        } else if (key == "power_split") {
          const std::string v = it.value().is_string() ? it.value().get<std::string>() : "";
          if (v != "auto" && v != "random" && v != "equal") {
            err("grassmann.power_split", "must be one of auto, random, equal");
          }
        } else {
          err("grassmann." + key, "unknown field");
        }
      }
    }
  }

  return report;
}

inline ExperimentConfig config_from_json(const Json& j) {
  const ValidationReport report = validate_config(j);
  if (!report.ok()) {
    std::string what = "invalid experiment config:";
    for (const auto& e : report.errors) what += "\n  " + e;
    throw ConfigError(what);
  }

  ExperimentConfig cfg;
  cfg.name = j.at("name").get<std::string>();
  cfg.dims = SystemDims{j.at("dims").at("users").get<int>(),
                        j.at("dims").at("tx_antennas").get<int>(),
                        j.at("dims").at("rx_antennas").get<int>()};
  const std::string model = j.at("channel").at("model").get<std::string>();
  if (model == "kronecker") {
    cfg.channel.kind = FadingKind::Kronecker;
    if (j["channel"].contains("tx_correlation_eigenvalues")) {
      RVector eigs(cfg.dims.tx);
      for (int i = 0; i < cfg.dims.tx; ++i) {
        eigs(i) = j["channel"]["tx_correlation_eigenvalues"][static_cast<std::size_t>(i)].get<double>();
      }
      const CMatrix r = eigs.asDiagonal().toDenseMatrix().cast<Complex>();
      cfg.channel.tx_correlation.assign(static_cast<std::size_t>(cfg.dims.users), r);
    } else {
      for (const auto& m : j["channel"]["tx_correlation"]) {
        cfg.channel.tx_correlation.push_back(detail::matrix_from_json(m));
      }
    }
  }
  cfg.snr_grid_db = j.at("snr_grid_db").get<std::vector<double>>();
  if (j.contains("bits_list")) cfg.bits_list = j["bits_list"].get<std::vector<int>>();
  for (const auto& s : j.at("schemes")) cfg.schemes.push_back(*scheme_from_name(s.get<std::string>()));
  const std::string budget_type = j.at("budget").at("type").get<std::string>();
  cfg.budget.kind = budget_type == "sum" ? PowerBudget::Kind::Sum : PowerBudget::Kind::Individual;
  if (cfg.budget.kind == PowerBudget::Kind::Individual) {
    cfg.budget.fractions = j["budget"]["fractions"].get<std::vector<double>>();
  }
  if (j.contains("training_size")) cfg.training_size = j["training_size"].get<std::size_t>();
  cfg.eval_draws = j.at("eval_draws").get<std::size_t>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.output_prefix = j.contains("output_prefix") ? j["output_prefix"].get<std::string>() : cfg.name;
  if (j.contains("design")) {
    const auto& d = j["design"];
    if (d.contains("restarts")) cfg.design.restarts = d["restarts"].get<int>();
    if (d.contains("max_rounds")) cfg.design.max_rounds = d["max_rounds"].get<int>();
    if (d.contains("tol")) cfg.design.tol = d["tol"].get<double>();
  }
  if (j.contains("grassmann")) {
    const auto& g = j["grassmann"];
    if (g.contains("training_size")) cfg.grassmann.training_size = g["training_size"].get<std::size_t>();
    if (g.contains("rounds")) cfg.grassmann.rounds = g["rounds"].get<int>();
    if (g.contains("power_split")) {
      const std::string v = g["power_split"].get<std::string>();
      cfg.grassmann_power = v == "random"  ? GrassmannPower::Random
                            : v == "equal" ? GrassmannPower::Equal
                                           : GrassmannPower::Auto;
    }
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

struct ResultRow {
  Scheme scheme = Scheme::NoFeedback;
  int bits = 0;  ///< 0 for schemes without a codebook size
  double snr_db = 0.0;
  double mean_bits = 0.0;
  double stderr_bits = 0.0;
  std::uint64_t draws = 0;
  std::uint64_t seed = 0;
  bool design_converged = true;
};

struct RegionRow {
  int bits = 0;
  double snr_db = 0.0;
  RegionResult region;
};

struct ResultTable {
  std::vector<ResultRow> rows;
  std::vector<RegionRow> regions;
  std::string config_hash;
  Json config_echo;
  std::uint64_t seed = 0;
};

namespace detail {

inline std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

template <typename Codebook>
std::pair<double, double> evaluate_selection(const std::vector<ChannelRealization>& draws,
                                             const Codebook& codebook, double sigma2) {
  detail::MeanAccumulator acc;
  for (const auto& h : draws) acc.add(select(h, codebook, sigma2).bits);
  return {acc.mean(), acc.stderr_mean()};
}

}  // namespace detail

/// Runs every (scheme, B, snr) cell of the experiment. Cells are evaluated on
/// a worker pool; every random stream is derived from the config seed and a
/// cell-specific path, so the output is bit-identical for a given
/// (config, seed) regardless of the thread count.
inline ResultTable run_experiment(const ExperimentConfig& cfg, const Json& config_echo,
                                  int threads = 0) {
  const double sigma2 = 1.0;
  const ChannelModel model = cfg.channel.build(cfg.dims);

  // shared draw sets: one training pool for the designs, one evaluation pool
  // reused across schemes and SNR points (common random numbers)
  std::vector<ChannelRealization> train_draws;
  if (std::any_of(cfg.schemes.begin(), cfg.schemes.end(), scheme_needs_training)) {
    Rng rng(Rng::derive(cfg.seed, {0x7121ULL}));
    train_draws.reserve(cfg.training_size);
    for (std::size_t i = 0; i < cfg.training_size; ++i) train_draws.push_back(sample(model, rng));
  }
  std::vector<ChannelRealization> eval_draws;
  {
    Rng rng(Rng::derive(cfg.seed, {0xEFA1ULL}));
    eval_draws.reserve(cfg.eval_draws);
    for (std::size_t i = 0; i < cfg.eval_draws; ++i) eval_draws.push_back(sample(model, rng));
  }
  const TrainingSet training{std::move(train_draws), sigma2};

  // Grassmannian directions are SNR-independent; design them once per B
  // (rotated onto the statistical beams under a correlated channel model).
  // The random power allocation is drawn per transmission at evaluation time.
  std::vector<DirectionCodebook> packed;
  if (std::any_of(cfg.schemes.begin(), cfg.schemes.end(),
                  [](Scheme s) { return s == Scheme::Grassmann; })) {
    for (std::size_t bi = 0; bi < cfg.bits_list.size(); ++bi) {
      const int bits = cfg.bits_list[bi];
      GrassmannOptions gopts = cfg.grassmann;
      gopts.seed = Rng::derive(cfg.seed, {0x6123ULL, static_cast<std::uint64_t>(bits)});
      DirectionCodebook dirs = grassmann_design(bits, cfg.dims.users, cfg.dims.tx, gopts);
      if (cfg.channel.kind == FadingKind::Kronecker) {
        dirs = rotate_codebook(dirs, statistical_beams(cfg.channel.correlations_or_identity(cfg.dims)));
      }
      packed.push_back(std::move(dirs));
    }
  }

  ResultTable table;
  table.seed = cfg.seed;
  table.config_echo = config_echo;
  table.config_hash = detail::fnv1a_hex(config_echo.dump());

  // enumerate output slots in config order, then fill them from a worker pool
  struct Task {
    std::function<void()> work;
  };
  std::vector<Task> tasks;
  const std::size_t n_snr = cfg.snr_grid_db.size();

  std::size_t row_count = 0;
  for (Scheme s : cfg.schemes) {
    row_count += (scheme_uses_bits(s) ? cfg.bits_list.size() : 1) * n_snr;
  }
  table.rows.resize(row_count);
  std::size_t region_count = 0;
  for (Scheme s : cfg.schemes) {
    if (s == Scheme::Region2U) region_count += cfg.bits_list.size() * n_snr;
  }
  table.regions.resize(region_count);

  std::size_t next_row = 0;
  std::size_t next_region = 0;
  for (Scheme scheme : cfg.schemes) {
    const std::size_t n_bits = scheme_uses_bits(scheme) ? cfg.bits_list.size() : 1;
    if (scheme == Scheme::Region2U) {
      // one task per SNR point: the nested codebooks are shared across B
      for (std::size_t si = 0; si < n_snr; ++si) {
        const std::size_t row_base = next_row + si;
        const std::size_t region_base = next_region + si;
        tasks.push_back({[&, scheme, si, row_base, region_base] {
          const double power = snr_db_to_power(cfg.snr_grid_db[si]);
          const PowerBudget budget = cfg.budget.at_power(power, cfg.dims.users);
          CovarianceCodebook book;
          for (std::size_t bi = 0; bi < cfg.bits_list.size(); ++bi) {
            LloydOptions opts = cfg.design;
            opts.seed = Rng::derive(cfg.seed, {0x2e61ULL, si, bi});
            if (bi == 0) {
              book = design_covariance(training, cfg.bits_list[bi], budget, opts);
            } else {
              book = extend_covariance_codebook(book, training, cfg.bits_list[bi], opts);
            }
            const RegionResult region =
                region_2user(eval_draws, book, budget.per_user[0], budget.per_user[1], sigma2);
            ResultRow row;
            row.scheme = scheme;
            row.bits = cfg.bits_list[bi];
            row.snr_db = cfg.snr_grid_db[si];
            // the adaptive pentagon's sum bound is the expected selected rate
            row.mean_bits = region.pentagons.back().sum_max;
            row.stderr_bits = region.pentagons.back().sum_se;
            row.draws = eval_draws.size();
            row.seed = cfg.seed;
            row.design_converged = book.meta.converged;
            table.rows[row_base + bi * n_snr] = row;
            table.regions[region_base + bi * n_snr] =
                RegionRow{cfg.bits_list[bi], cfg.snr_grid_db[si], region};
          }
        }});
      }
      next_row += n_bits * n_snr;
      next_region += n_bits * n_snr;
      continue;
    }

    for (std::size_t bi = 0; bi < n_bits; ++bi) {
      for (std::size_t si = 0; si < n_snr; ++si) {
        const std::size_t slot = next_row + bi * n_snr + si;
        tasks.push_back({[&, scheme, bi, si, slot] {
          const int bits = scheme_uses_bits(scheme) ? cfg.bits_list[bi] : 0;
          const double snr_db = cfg.snr_grid_db[si];
          const double power = snr_db_to_power(snr_db);
          const PowerBudget budget = cfg.budget.at_power(power, cfg.dims.users);

          ResultRow row;
          row.scheme = scheme;
          row.bits = bits;
          row.snr_db = snr_db;
          row.draws = eval_draws.size();
          row.seed = cfg.seed;

          detail::MeanAccumulator acc;
          switch (scheme) {
            case Scheme::Covariance: {
              LloydOptions opts = cfg.design;
              opts.seed = Rng::derive(cfg.seed, {0xc0ULL, static_cast<std::uint64_t>(bits), si});
              const CovarianceCodebook book = design_covariance(training, bits, budget, opts);
              row.design_converged = book.meta.converged;
              std::tie(row.mean_bits, row.stderr_bits) =
                  detail::evaluate_selection(eval_draws, book, sigma2);
              break;
            }
            case Scheme::Eigenbeam: {
              LloydOptions opts = cfg.design;
              opts.seed = Rng::derive(cfg.seed, {0xe1ULL, static_cast<std::uint64_t>(bits), si});
              const BeamformingCodebook book = eigenbeam_design(training, bits, power, opts);
              row.design_converged = book.meta.converged;
              std::tie(row.mean_bits, row.stderr_bits) =
                  detail::evaluate_selection(eval_draws, book, sigma2);
              break;
            }
            case Scheme::Grassmann: {
              const DirectionCodebook& dirs = packed[bi];
              if (cfg.grassmann_equal_power()) {
                // correlated-fading mode: the rotated packing replaces the
                // statistical beamformer and keeps its equal power split
                std::vector<std::vector<double>> fractions(
                    dirs.entries.size(),
                    std::vector<double>(static_cast<std::size_t>(cfg.dims.users),
                                        1.0 / cfg.dims.users));
                const BeamformingCodebook book =
                    assemble_beamforming(dirs, fractions, power, cfg.dims);
                std::tie(row.mean_bits, row.stderr_bits) =
                    detail::evaluate_selection(eval_draws, book, sigma2);
                break;
              }
              // packed directions with a fresh random power split per entry
              // and transmission (the curve averages over the power law too)
              Rng rng(Rng::derive(cfg.seed, {0x6125ULL, static_cast<std::uint64_t>(bits), si}));
              struct Local {
                std::vector<BeamSet> entries;
              } cb;
              cb.entries.resize(dirs.entries.size(),
                                BeamSet(static_cast<std::size_t>(cfg.dims.users)));
              for (const auto& h : eval_draws) {
                for (std::size_t q = 0; q < dirs.entries.size(); ++q) {
                  const std::vector<double> alpha = random_power(power, cfg.dims.users, rng);
                  for (int k = 0; k < cfg.dims.users; ++k) {
                    cb.entries[q][static_cast<std::size_t>(k)] = {
                        alpha[static_cast<std::size_t>(k)],
                        dirs.entries[q][static_cast<std::size_t>(k)]};
                  }
                }
                acc.add(select(h, cb, sigma2).bits);
              }
              row.mean_bits = acc.mean();
              row.stderr_bits = acc.stderr_mean();
              break;
            }
            case Scheme::RandomBf: {
              // expectation over random codebooks: a fresh codebook per draw
              Rng rng(Rng::derive(cfg.seed, {0x4bfULL, static_cast<std::uint64_t>(bits), si}));
              const std::size_t n_entries = std::size_t{1} << bits;
              struct Local {
                std::vector<BeamSet> entries;
              } cb;
              cb.entries.resize(n_entries, BeamSet(static_cast<std::size_t>(cfg.dims.users)));
              for (const auto& h : eval_draws) {
                for (auto& entry : cb.entries) {
                  const std::vector<double> alpha = random_power(power, cfg.dims.users, rng);
                  for (int k = 0; k < cfg.dims.users; ++k) {
                    entry[static_cast<std::size_t>(k)] = {alpha[static_cast<std::size_t>(k)],
                                                          rng.unit_vector(cfg.dims.tx)};
                  }
                }
                acc.add(select(h, cb, sigma2).bits);
              }
              row.mean_bits = acc.mean();
              row.stderr_bits = acc.stderr_mean();
              break;
            }
            case Scheme::StatisticalBf: {
              const std::vector<CVector> beams =
                  statistical_beams(cfg.channel.correlations_or_identity(cfg.dims));
              BeamSet entry(static_cast<std::size_t>(cfg.dims.users));
              for (int k = 0; k < cfg.dims.users; ++k) {
                entry[static_cast<std::size_t>(k)] = {
                    std::sqrt(power / cfg.dims.users), beams[static_cast<std::size_t>(k)]};
              }
              for (const auto& h : eval_draws) acc.add(sum_rate(h, entry, sigma2));
              row.mean_bits = acc.mean();
              row.stderr_bits = acc.stderr_mean();
              break;
            }
            case Scheme::FullCsi: {
              for (const auto& h : eval_draws) acc.add(full_csi_rate(h, budget, sigma2));
              row.mean_bits = acc.mean();
              row.stderr_bits = acc.stderr_mean();
              break;
            }
            case Scheme::NoFeedback: {
              const CovarianceSet q = no_feedback_covariances(cfg.dims, budget);
              for (const auto& h : eval_draws) acc.add(sum_rate(h, q, sigma2));
              row.mean_bits = acc.mean();
              row.stderr_bits = acc.stderr_mean();
              break;
            }
            case Scheme::Tdma: {
              for (const auto& h : eval_draws) acc.add(tdma_rate(h, power, sigma2));
              row.mean_bits = acc.mean();
              row.stderr_bits = acc.stderr_mean();
              break;
            }
            case Scheme::Region2U:
              break;  // handled above
          }
          table.rows[slot] = row;
        }});
      }
    }
    next_row += n_bits * n_snr;
  }

  // worker pool; any task failure is reported after the pool drains
  const int n_threads = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::atomic<std::size_t> cursor{0};
  std::mutex error_mutex;
  std::string first_error;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        tasks[i].work();
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (first_error.empty()) first_error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (!first_error.empty()) throw std::runtime_error("experiment task failed: " + first_error);

  return table;
}

inline ResultTable run_experiment(const Json& config_json, int threads = 0) {
  return run_experiment(config_from_json(config_json), config_json, threads);
}

// ---------------------------------------------------------------------------
// Output files
// ---------------------------------------------------------------------------

inline std::string to_csv(const ResultTable& table) {
  std::string out = "scheme,B,snr_db,mean_bits,stderr_bits,draws,seed\n";
  for (const auto& row : table.rows) {
    out += scheme_name(row.scheme);
    out += ',';
    out += std::to_string(row.bits);
    out += ',';
    out += detail::format_double(row.snr_db);
    out += ',';
    out += detail::format_double(row.mean_bits);
    out += ',';
    out += detail::format_double(row.stderr_bits);
    out += ',';
    out += std::to_string(row.draws);
    out += ',';
    out += std::to_string(row.seed);
    out += '\n';
  }
  return out;
}

inline Json to_json(const ResultTable& table) {
  Json rows = Json::array();
  for (const auto& row : table.rows) {
    rows.push_back(Json{{"scheme", scheme_name(row.scheme)},
                        {"bits", row.bits},
                        {"snr_db", row.snr_db},
                        {"mean_bits", row.mean_bits},
                        {"stderr_bits", row.stderr_bits},
                        {"draws", row.draws},
                        {"seed", row.seed},
                        {"design_converged", row.design_converged}});
  }
  Json out{{"config_hash", table.config_hash},
           {"seed", table.seed},
           {"config", table.config_echo},
           {"rows", std::move(rows)}};
  if (!table.regions.empty()) {
    Json regions = Json::array();
    for (const auto& r : table.regions) {
      Json vertices = Json::array();
      for (const auto& v : r.region.polygon.vertices) vertices.push_back(Json::array({v.r1, v.r2}));
      Json pentagons = Json::array();
      for (const auto& p : r.region.pentagons) {
        pentagons.push_back(Json{{"r1_max", p.r1_max},
                                 {"r2_max", p.r2_max},
                                 {"sum_max", p.sum_max},
                                 {"r1_se", p.r1_se},
                                 {"r2_se", p.r2_se},
                                 {"sum_se", p.sum_se}});
      }
      regions.push_back(Json{{"bits", r.bits},
                             {"snr_db", r.snr_db},
                             {"vertices", std::move(vertices)},
                             {"pentagons", std::move(pentagons)},
                             {"max_stderr", r.region.max_stderr}});
    }
    out["regions"] = std::move(regions);
  }
  return out;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << content;
  if (!out) throw std::runtime_error("failed writing output file: " + path);
}

}  // namespace macfb
