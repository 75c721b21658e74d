// SPDX-License-Identifier: Apache-2.0
//
// Beamforming codebooks: eigenbeamforming designed with Lloyd's algorithm,
// Grassmannian direction packing with random per-entry power splits,
// statistical beamforming for correlated channels and the distance-preserving
// codebook rotation that aligns a packing with the statistical beams.

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "macfb/cov_codebook.hpp"
#include "macfb/rates.hpp"
#include "macfb/rng.hpp"

namespace macfb {

struct BeamformingCodebook {
  int bits = 0;
  std::vector<BeamSet> entries;
  PowerBudget budget;
  SystemDims dims;
  DesignMeta meta;
  double min_dist_fs = 0.0;  ///< packing quality, set by the Grassmannian path
  std::vector<double> round_objectives;  ///< Lloyd designs: winning restart per round
};

/// Centroid step of eigenbeamforming: per user, the direction is the top
/// eigenvector of the cell-average Gramian R^(k) = mean(H^(k)* H^(k)) and the
/// squared amplitude splits P proportionally to the top eigenvalues,
/// alpha_k = sqrt(P) * l_k / sqrt(sum_j l_j^2) with l_k^2 the top eigenvalue.
inline BeamSet eigenbeam_centroid(const TrainingSet& training,
                                  const std::vector<std::size_t>& region, double power) {
  if (region.empty()) throw std::invalid_argument("eigenbeam_centroid: empty cell");
  if (!(power > 0.0)) throw std::invalid_argument("eigenbeam_centroid: power must be positive");
  const int users = training.draws.front().users();
  const Eigen::Index mt = training.draws.front().user(0).cols();

  std::vector<EigenSystem> eigs(static_cast<std::size_t>(users));
  double top_sum = 0.0;
  for (int k = 0; k < users; ++k) {
    CMatrix gram = CMatrix::Zero(mt, mt);
    for (std::size_t idx : region) {
      const CMatrix& h = training.draws[idx].user(k);
      gram.noalias() += h.adjoint() * h;
    }
    gram /= static_cast<double>(region.size());
    eigs[static_cast<std::size_t>(k)] = detail::herm_eig_unchecked(0.5 * (gram + gram.adjoint()));
    top_sum += std::max(eigs[static_cast<std::size_t>(k)].values(0), 0.0);
  }
  if (!(top_sum > 0.0)) {
    throw std::invalid_argument("eigenbeam_centroid: cell Gramians are all zero, no direction defined");
  }

  BeamSet beams(static_cast<std::size_t>(users));
  for (int k = 0; k < users; ++k) {
    const auto& e = eigs[static_cast<std::size_t>(k)];
    const double top = std::max(e.values(0), 0.0);
    if (top > 0.0) {
      beams[static_cast<std::size_t>(k)] = {std::sqrt(power * top / top_sum), e.vectors.col(0)};
    } else {
      beams[static_cast<std::size_t>(k)] = {0.0, CVector::Unit(mt, 0)};
    }
  }
  return beams;
}

/// Lloyd design of the eigenbeamforming codebook: the partition uses the true
/// beamforming sum-rate while each centroid optimizes the single-stream lower
/// bound through eigenbeam_centroid. Restart and empty-cell rules are shared
/// with the covariance design.
inline BeamformingCodebook eigenbeam_design(const TrainingSet& training, int bits, double power,
                                            const LloydOptions& opts = {}) {
  training.validate();
  if (bits < 0 || bits > 20) throw std::invalid_argument("eigenbeam_design: bits out of range");
  const std::size_t n_entries = std::size_t{1} << bits;
  if (training.draws.size() < 20 * n_entries) {
    throw std::invalid_argument(
        "eigenbeam_design: training set too small, need at least 20 draws per codeword (20 * 2^B)");
  }

  auto centroid = [&](const std::vector<std::size_t>& region) {
    return eigenbeam_centroid(training, region, power);
  };
  auto rate = [&](std::size_t draw, const BeamSet& entry) {
    return sum_rate(training.draws[draw], entry, training.sigma2);
  };
  auto [entries, stats] =
      detail::lloyd_design<BeamSet>(training.draws.size(), n_entries, centroid, rate, opts);

  BeamformingCodebook book;
  book.bits = bits;
  book.entries = std::move(entries);
  book.budget = PowerBudget::sum(power);
  book.dims = SystemDims{training.draws.front().users(),
                         static_cast<int>(training.draws.front().user(0).cols()),
                         static_cast<int>(training.draws.front().stacked.rows())};
  book.meta = DesignMeta{opts.seed,     opts.restarts,          stats.rounds,
                         training.draws.size(), stats.objective_bits, stats.converged};
  book.round_objectives = std::move(stats.history);
  return book;
}

/// Fubini-Study distance between two block-diagonal direction sets:
/// arccos of the product of per-user inner-product magnitudes.
inline double fubini_study(const std::vector<CVector>& a, const std::vector<CVector>& b) {
  if (a.size() != b.size() || a.empty()) {
    throw std::invalid_argument("fubini_study: direction lists must match and be nonempty");
  }
  double prod = 1.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k].size() != b[k].size()) {
      throw std::invalid_argument("fubini_study: direction dimensions must match");
    }
    if (std::abs(a[k].norm() - 1.0) > 1e-8 || std::abs(b[k].norm() - 1.0) > 1e-8) {
      throw std::invalid_argument("fubini_study: directions must be unit-norm");
    }
    prod *= std::abs(a[k].dot(b[k]));
  }
  return std::acos(std::clamp(prod, -1.0, 1.0));
}

/// Unit-direction codebook from the Grassmannian packing design.
struct DirectionCodebook {
  int bits = 0;
  std::vector<std::vector<CVector>> entries;  ///< per entry, one direction per user
  double min_dist_fs = 0.0;                   ///< minimum pairwise Fubini-Study distance
  std::vector<double> min_dist_history;       ///< the distance recorded after every round
  std::uint64_t seed = 0;
  int best_round = 0;

  double recompute_min_dist() const {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t q = 0; q + 1 < entries.size(); ++q) {
      for (std::size_t r = q + 1; r < entries.size(); ++r) {
        best = std::min(best, fubini_study(entries[q], entries[r]));
      }
    }
    return entries.size() > 1 ? best : 0.0;
  }
};

struct GrassmannOptions {
  std::size_t training_size = 4096;
  int rounds = 60;
  std::uint64_t seed = 0;
};

/// Grassmannian packing by Lloyd quantization of synthetic uniform-sphere
/// directions. The partition minimizes the product distortion
/// d2(G, Vq) = -prod_k |<v_q^k, g^k>|^2, centroids are the top eigenvectors
/// of the per-cell outer-product averages, and because the minimum pairwise
/// distance oscillates the snapshot with the largest min distance over all
/// rounds is returned.
inline DirectionCodebook grassmann_design(int bits, int users, int tx,
                                          const GrassmannOptions& opts = {}) {
  if (bits < 1 || bits > 20) throw std::invalid_argument("grassmann_design: bits must be in [1, 20]");
  if (users < 1 || tx < 1) throw std::invalid_argument("grassmann_design: bad dimensions");
  const std::size_t n_entries = std::size_t{1} << bits;
  const std::size_t n_train = std::max(opts.training_size, 4 * n_entries);

  Rng rng(Rng::derive(opts.seed, {0x6aULL}));
  std::vector<std::vector<CVector>> training(n_train);
  for (auto& g : training) {
    g.reserve(static_cast<std::size_t>(users));
    for (int k = 0; k < users; ++k) g.push_back(rng.unit_vector(tx));
  }

  const auto distortion = [users](const std::vector<CVector>& codeword,
                                  const std::vector<CVector>& g) {
    double prod = 1.0;
    for (int k = 0; k < users; ++k) {
      const double inner = std::abs(codeword[static_cast<std::size_t>(k)].dot(g[static_cast<std::size_t>(k)]));
      prod *= inner * inner;
    }
    return -prod;
  };

  // initial codewords from distinct training directions
  std::vector<std::size_t> pool(n_train);
  for (std::size_t i = 0; i < n_train; ++i) pool[i] = i;
  std::vector<std::vector<CVector>> entries(n_entries);
  for (std::size_t q = 0; q < n_entries; ++q) {
    const std::size_t j = q + static_cast<std::size_t>(rng.below(n_train - q));
    std::swap(pool[q], pool[j]);
    entries[q] = training[pool[q]];
  }

  DirectionCodebook best;
  best.bits = bits;
  best.seed = opts.seed;
  best.min_dist_fs = -1.0;

  std::vector<std::size_t> assignment(n_train);
  std::vector<double> assigned_dist(n_train);
  const auto assign_all = [&]() {
    for (std::size_t t = 0; t < n_train; ++t) {
      std::size_t arg = 0;
      double low = std::numeric_limits<double>::infinity();
      for (std::size_t q = 0; q < n_entries; ++q) {
        const double d = distortion(entries[q], training[t]);
        if (d < low) {
          low = d;
          arg = q;
        }
      }
      assignment[t] = arg;
      assigned_dist[t] = low;
    }
  };

  for (int round = 1; round <= opts.rounds; ++round) {
    assign_all();

    std::vector<std::size_t> population(n_entries, 0);
    for (std::size_t t = 0; t < n_train; ++t) ++population[assignment[t]];
    bool reseeded = false;
    for (std::size_t q = 0; q < n_entries; ++q) {
      if (population[q] != 0) continue;
      // worst-served draw: largest assigned distortion
      std::size_t worst = 0;
      for (std::size_t t = 1; t < n_train; ++t) {
        if (assigned_dist[t] > assigned_dist[worst]) worst = t;
      }
      entries[q] = training[worst];
      assigned_dist[worst] = -std::numeric_limits<double>::infinity();
      reseeded = true;
    }
    if (reseeded) assign_all();

    for (std::size_t q = 0; q < n_entries; ++q) {
      for (int k = 0; k < users; ++k) {
        CMatrix outer = CMatrix::Zero(tx, tx);
        std::size_t count = 0;
        for (std::size_t t = 0; t < n_train; ++t) {
          if (assignment[t] != q) continue;
          const CVector& g = training[t][static_cast<std::size_t>(k)];
          outer.noalias() += g * g.adjoint();
          ++count;
        }
        if (count == 0) continue;
        outer /= static_cast<double>(count);
        entries[q][static_cast<std::size_t>(k)] =
            detail::herm_eig_unchecked(0.5 * (outer + outer.adjoint())).vectors.col(0);
      }
    }

    double min_dist = std::numeric_limits<double>::infinity();
    for (std::size_t q = 0; q + 1 < n_entries; ++q) {
      for (std::size_t r = q + 1; r < n_entries; ++r) {
        min_dist = std::min(min_dist, fubini_study(entries[q], entries[r]));
      }
    }
    best.min_dist_history.push_back(min_dist);
    if (min_dist > best.min_dist_fs) {
      best.min_dist_fs = min_dist;
      best.entries = entries;
      best.best_round = round;
    }
  }
  return best;
}

/// Random power split with sum power P: squared amplitudes uniform on the
/// scaled simplex (normalized squared magnitudes of i.i.d. complex
/// Gaussians).
inline std::vector<double> random_power(double power, int users, Rng& rng) {
  if (!(power > 0.0)) throw std::invalid_argument("random_power: power must be positive");
  if (users < 1) throw std::invalid_argument("random_power: need at least one user");
  std::vector<double> energy(static_cast<std::size_t>(users));
  double total = 0.0;
  do {
    total = 0.0;
    for (auto& e : energy) {
      const Complex x = rng.cgaussian();
      e = std::norm(x);
      total += e;
    }
  } while (!(total > 1e-300));
  std::vector<double> alpha(static_cast<std::size_t>(users));
  for (int k = 0; k < users; ++k) {
    alpha[static_cast<std::size_t>(k)] = std::sqrt(power * energy[static_cast<std::size_t>(k)] / total);
  }
  return alpha;
}

/// Statistical beamforming directions: per user, the top eigenvector of the
/// transmit correlation matrix. With a degenerate top eigenvalue the choice
/// follows the deterministic phase convention but is otherwise arbitrary.
inline std::vector<CVector> statistical_beams(const std::vector<HermitianPsd>& tx_correlation) {
  if (tx_correlation.empty()) throw std::invalid_argument("statistical_beams: no correlation matrices");
  std::vector<CVector> beams;
  beams.reserve(tx_correlation.size());
  for (const auto& r : tx_correlation) beams.push_back(r.eig().vectors.col(0));
  return beams;
}

/// Rotates a direction codebook by the block-diagonal unitary that maps its
/// first entry onto the target directions (Householder reflection per user
/// after phase alignment). Pairwise Fubini-Study distances are preserved.
inline DirectionCodebook rotate_codebook(const DirectionCodebook& codebook,
                                         const std::vector<CVector>& target) {
  if (codebook.entries.empty()) throw std::invalid_argument("rotate_codebook: empty codebook");
  const std::size_t users = codebook.entries.front().size();
  if (target.size() != users) {
    throw std::invalid_argument("rotate_codebook: target and codebook disagree on user count");
  }

  std::vector<CMatrix> rotation(users);
  for (std::size_t k = 0; k < users; ++k) {
    const CVector& from = codebook.entries.front()[k];
    const CVector& to = target[k];
    if (from.size() != to.size()) {
      throw std::invalid_argument("rotate_codebook: direction dimensions must match");
    }
    // phase-align so the inner product is real, then reflect across the bisector
    const Complex inner = to.dot(from);  // <to, from>
    const double mag = std::abs(inner);
    const Complex phase = mag > 1e-14 ? inner / mag : Complex(1.0, 0.0);
    const CVector aligned = from * std::conj(phase);
    CVector w = aligned - to;
    const double norm2 = w.squaredNorm();
    if (norm2 <= 1e-28) {
      rotation[k] = CMatrix::Identity(from.size(), from.size());
    } else {
      rotation[k] = CMatrix::Identity(from.size(), from.size()) - (2.0 / norm2) * (w * w.adjoint());
    }
  }

  DirectionCodebook out = codebook;
  for (auto& entry : out.entries) {
    for (std::size_t k = 0; k < users; ++k) entry[k] = rotation[k] * entry[k];
  }
  out.min_dist_fs = out.recompute_min_dist();
  return out;
}

/// Assembles a beamforming codebook from packed directions and per-entry
/// power fractions (frozen at design time), scaled to the sum power P.
inline BeamformingCodebook assemble_beamforming(const DirectionCodebook& directions,
                                                const std::vector<std::vector<double>>& fractions,
                                                double power, const SystemDims& dims) {
  if (fractions.size() != directions.entries.size()) {
    throw std::invalid_argument("assemble_beamforming: one power split per entry required");
  }
  BeamformingCodebook book;
  book.bits = directions.bits;
  book.budget = PowerBudget::sum(power);
  book.dims = dims;
  book.min_dist_fs = directions.min_dist_fs;
  book.meta.seed = directions.seed;
  book.entries.reserve(directions.entries.size());
  for (std::size_t q = 0; q < directions.entries.size(); ++q) {
    const auto& frac = fractions[q];
    if (frac.size() != directions.entries[q].size()) {
      throw std::invalid_argument("assemble_beamforming: power split has wrong user count");
    }
    BeamSet entry(frac.size());
    for (std::size_t k = 0; k < frac.size(); ++k) {
      entry[k] = {std::sqrt(power * frac[k]), directions.entries[q][k]};
    }
    book.entries.push_back(std::move(entry));
  }
  return book;
}

}  // namespace macfb
