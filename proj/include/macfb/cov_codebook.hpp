// SPDX-License-Identifier: Apache-2.0
//
// Lloyd design of covariance codebooks: alternate argmax partition of a
// channel training set with a centroid step that waterfills the cell-average
// Gramian (the heuristic conditional-mean approximation), keep the best of
// several random restarts.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "macfb/channel.hpp"
#include "macfb/rates.hpp"
#include "macfb/rng.hpp"
#include "macfb/waterfill.hpp"

namespace macfb {

/// Channel draws used to train a codebook, with the noise power they will be
/// evaluated against.
struct TrainingSet {
  std::vector<ChannelRealization> draws;
  double sigma2 = 1.0;

  void validate() const {
    if (draws.empty()) throw std::invalid_argument("TrainingSet: no draws");
    if (!(sigma2 > 0.0)) throw std::invalid_argument("TrainingSet: sigma2 must be positive");
    const Eigen::Index rows = draws.front().stacked.rows();
    const Eigen::Index cols = draws.front().stacked.cols();
    for (const auto& h : draws) {
      if (h.stacked.rows() != rows || h.stacked.cols() != cols) {
        throw std::invalid_argument("TrainingSet: draws have inconsistent dimensions");
      }
    }
  }
};

struct LloydOptions {
  int restarts = 4;
  int max_rounds = 50;
  double tol = 1e-4;        ///< bits of training-objective improvement per round
  std::uint64_t seed = 0;
  SolverOptions solver;
};

struct DesignMeta {
  std::uint64_t seed = 0;
  int restarts = 0;
  int rounds = 0;
  std::size_t training_size = 0;
  double objective_bits = 0.0;  ///< training-set average selected sum-rate
  bool converged = false;
};

struct CovarianceCodebook {
  int bits = 0;
  std::vector<CovarianceSet> entries;
  PowerBudget budget;
  SystemDims dims;
  DesignMeta meta;
  std::vector<double> round_objectives;  ///< winning restart, one value per round
};

namespace detail {

struct LloydStats {
  double objective_bits = 0.0;
  int rounds = 0;
  bool converged = false;
  std::vector<double> history;  ///< per-round objectives of the winning restart
};

/// Shared Lloyd loop. `centroid(indices)` re-optimizes a codeword for a cell
/// of training draws; `rate(draw, entry)` is the selection metric. Codewords
/// start from single randomly chosen draws, empty cells are reseeded from the
/// worst-served draw, and the snapshot with the highest training objective
/// across all rounds and restarts is returned (the centroid step is a
/// heuristic, so the objective is not monotone round over round).
template <typename Entry, typename CentroidFn, typename RateFn>
std::pair<std::vector<Entry>, LloydStats> lloyd_design(std::size_t n_draws, std::size_t n_entries,
                                                       CentroidFn&& centroid, RateFn&& rate,
                                                       const LloydOptions& opts) {
  if (n_entries == 0) throw std::invalid_argument("lloyd_design: need at least one codeword");
  if (n_draws < n_entries) throw std::invalid_argument("lloyd_design: fewer draws than codewords");

  std::vector<Entry> best_entries;
  LloydStats best{-std::numeric_limits<double>::infinity(), 0, false};

  std::vector<std::size_t> assignment(n_draws);
  std::vector<double> selected(n_draws);
  const auto assign_all = [&](const std::vector<Entry>& entries) {
    double total = 0.0;
    for (std::size_t d = 0; d < n_draws; ++d) {
      std::size_t arg = 0;
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t q = 0; q < entries.size(); ++q) {
        const double r = rate(d, entries[q]);
        if (r > top) {
          top = r;
          arg = q;
        }
      }
      assignment[d] = arg;
      selected[d] = top;
      total += top;
    }
    return total / static_cast<double>(n_draws);
  };

  for (int restart = 0; restart < std::max(1, opts.restarts); ++restart) {
    Rng rng(Rng::derive(opts.seed, {0x11u, static_cast<std::uint64_t>(restart)}));

    // initial codewords from distinct random training draws
    std::vector<std::size_t> pool(n_draws);
    for (std::size_t i = 0; i < n_draws; ++i) pool[i] = i;
    std::vector<Entry> entries;
    entries.reserve(n_entries);
    for (std::size_t q = 0; q < n_entries; ++q) {
      const std::size_t j = q + static_cast<std::size_t>(rng.below(n_draws - q));
      std::swap(pool[q], pool[j]);
      entries.push_back(centroid(std::vector<std::size_t>{pool[q]}));
    }

    LloydStats stats;
    bool best_is_here = false;
    double prev = -std::numeric_limits<double>::infinity();
    for (int round = 1; round <= opts.max_rounds; ++round) {
      double objective = assign_all(entries);
      stats.rounds = round;
      stats.history.push_back(objective);
      if (objective > best.objective_bits) {
        best.objective_bits = objective;
        best.rounds = round;
        best_entries = entries;
        best_is_here = true;
      }
      if (round > 1 && objective - prev < opts.tol) {
        stats.converged = true;
        break;
      }
      prev = objective;

      // reseed empty cells from the worst-served draws
      std::vector<std::size_t> population(n_entries, 0);
      for (std::size_t d = 0; d < n_draws; ++d) ++population[assignment[d]];
      std::vector<std::size_t> empty;
      for (std::size_t q = 0; q < n_entries; ++q) {
        if (population[q] == 0) empty.push_back(q);
      }
      if (!empty.empty()) {
        std::vector<std::size_t> order(n_draws);
        for (std::size_t i = 0; i < n_draws; ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
          return selected[a] != selected[b] ? selected[a] < selected[b] : a < b;
        });
        for (std::size_t i = 0; i < empty.size() && i < n_draws; ++i) {
          entries[empty[i]] = centroid(std::vector<std::size_t>{order[i]});
        }
        assign_all(entries);
      }

      std::vector<std::vector<std::size_t>> cells(n_entries);
      for (std::size_t d = 0; d < n_draws; ++d) cells[assignment[d]].push_back(d);
      for (std::size_t q = 0; q < n_entries; ++q) {
        if (!cells[q].empty()) entries[q] = centroid(cells[q]);
      }
    }

    // the last centroid step is otherwise never scored
    const double objective = assign_all(entries);
    stats.history.push_back(objective);
    if (objective > best.objective_bits) {
      best.objective_bits = objective;
      best.rounds = stats.rounds;
      best_entries = entries;
      best_is_here = true;
    }
    if (best_is_here) {
      best.converged = stats.converged;
      best.history = stats.history;
    }
  }

  return {std::move(best_entries), best};
}

}  // namespace detail

/// Argmax partition of the training set against a codebook: each draw goes to
/// the codeword with the highest instantaneous sum-rate, ties to the lowest
/// index. This is the same rule the deployed selection uses.
inline std::vector<std::size_t> assign_partition(const TrainingSet& training,
                                                 const CovarianceCodebook& codebook) {
  training.validate();
  if (codebook.entries.empty()) throw std::invalid_argument("assign_partition: empty codebook");
  std::vector<std::size_t> assignment(training.draws.size());
  for (std::size_t d = 0; d < training.draws.size(); ++d) {
    assignment[d] = select(training.draws[d], codebook, training.sigma2).index;
  }
  return assignment;
}

/// Centroid step for one cell: average Gramian R = mean(H* H), Hermitian
/// factor R = S* S, per-user effective channels as the Mt-column blocks of S,
/// then iterative waterfilling under the budget.
inline CovarianceSet centroid_update(const TrainingSet& training,
                                     const std::vector<std::size_t>& region,
                                     const PowerBudget& budget,
                                     const SolverOptions& solver = {}) {
  if (region.empty()) throw std::invalid_argument("centroid_update: empty cell");
  const Eigen::Index total = training.draws.front().stacked.cols();
  const int users = training.draws.front().users();
  const Eigen::Index mt = total / users;

  CMatrix mean_gram = CMatrix::Zero(total, total);
  for (std::size_t idx : region) {
    const CMatrix& h = training.draws[idx].stacked;
    mean_gram.noalias() += h.adjoint() * h;
  }
  mean_gram /= static_cast<double>(region.size());

  const CMatrix root = psd_sqrt(HermitianPsd(0.5 * (mean_gram + mean_gram.adjoint())));
  std::vector<CMatrix> effective(static_cast<std::size_t>(users));
  for (int k = 0; k < users; ++k) {
    effective[static_cast<std::size_t>(k)] = root.middleCols(k * mt, mt);
  }
  return iwf(effective, budget, training.sigma2, solver).covariances;
}

namespace detail {

inline std::vector<CovarianceSet> design_covariance_entries(const TrainingSet& training,
                                                            std::size_t n_entries,
                                                            const PowerBudget& budget,
                                                            const LloydOptions& opts,
                                                            LloydStats& stats) {
  auto centroid = [&](const std::vector<std::size_t>& region) {
    return centroid_update(training, region, budget, opts.solver);
  };
  auto rate = [&](std::size_t draw, const CovarianceSet& entry) {
    return sum_rate(training.draws[draw], entry, training.sigma2);
  };
  auto [entries, s] =
      lloyd_design<CovarianceSet>(training.draws.size(), n_entries, centroid, rate, opts);
  stats = s;
  return std::move(entries);
}

}  // namespace detail

/// Designs the 2^bits covariance codebook on the training set. Requires at
/// least 20 * 2^bits draws.
inline CovarianceCodebook design_covariance(const TrainingSet& training, int bits,
                                            const PowerBudget& budget,
                                            const LloydOptions& opts = {}) {
  training.validate();
  if (bits < 0 || bits > 20) throw std::invalid_argument("design_covariance: bits out of range");
  const std::size_t n_entries = std::size_t{1} << bits;
  if (training.draws.size() < 20 * n_entries) {
    throw std::invalid_argument(
        "design_covariance: training set too small, need at least 20 draws per codeword (20 * 2^B)");
  }
  if (budget.kind == PowerBudget::Kind::Individual &&
      budget.per_user.size() != static_cast<std::size_t>(training.draws.front().users())) {
    throw std::invalid_argument("design_covariance: budget and training disagree on user count");
  }

  CovarianceCodebook book;
  book.bits = bits;
  book.budget = budget;
  book.dims = SystemDims{training.draws.front().users(),
                         static_cast<int>(training.draws.front().user(0).cols()),
                         static_cast<int>(training.draws.front().stacked.rows())};
  detail::LloydStats stats;
  book.entries = detail::design_covariance_entries(training, n_entries, budget, opts, stats);
  book.meta = DesignMeta{opts.seed,     opts.restarts,          stats.rounds,
                         training.draws.size(), stats.objective_bits, stats.converged};
  book.round_objectives = std::move(stats.history);
  return book;
}

/// Grows a codebook to 2^bits entries by appending an independently designed
/// complement; the base entries are kept verbatim, so the result's entry set
/// is a superset of the base (nested feedback sets for region comparisons).
inline CovarianceCodebook extend_covariance_codebook(const CovarianceCodebook& base,
                                                     const TrainingSet& training, int bits,
                                                     const LloydOptions& opts = {}) {
  training.validate();
  const std::size_t target = std::size_t{1} << bits;
  if (target <= base.entries.size()) {
    throw std::invalid_argument("extend_covariance_codebook: target must exceed the base size");
  }
  const std::size_t extra = target - base.entries.size();

  LloydOptions sub = opts;
  sub.seed = Rng::derive(opts.seed, {0x5eedULL, static_cast<std::uint64_t>(bits)});
  detail::LloydStats stats;
  std::vector<CovarianceSet> extension =
      detail::design_covariance_entries(training, extra, base.budget, sub, stats);

  CovarianceCodebook book = base;
  book.bits = bits;
  for (auto& e : extension) book.entries.push_back(std::move(e));

  double total = 0.0;
  for (const auto& h : training.draws) total += select(h, book, training.sigma2).bits;
  book.meta.objective_bits = total / static_cast<double>(training.draws.size());
  book.meta.training_size = training.draws.size();
  book.meta.seed = opts.seed;
  return book;
}

}  // namespace macfb
