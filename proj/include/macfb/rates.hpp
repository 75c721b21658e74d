// SPDX-License-Identifier: Apache-2.0
//
// Rate evaluation: instantaneous sum-rate, codeword selection, the two-user
// expected rate region, and the full-CSI / no-feedback / TDMA baselines.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "macfb/channel.hpp"
#include "macfb/numerics.hpp"
#include "macfb/waterfill.hpp"

namespace macfb {

/// Instantaneous sum-rate log2 det(I + 1/s2 * sum_k H^(k) Q^(k) H^(k)*).
inline double sum_rate(const ChannelRealization& h, const CovarianceSet& q, double sigma2) {
  if (q.count() != h.users()) {
    throw std::invalid_argument("sum_rate: covariance set and channel disagree on user count");
  }
  const Eigen::Index rx = h.stacked.rows();
  CMatrix gram = CMatrix::Zero(rx, rx);
  for (int k = 0; k < h.users(); ++k) {
    gram.noalias() += h.user(k) * q.user(k).mat() * h.user(k).adjoint();
  }
  return detail::log2_det_i_plus_gram(1.0 / sigma2, 0.5 * (gram + gram.adjoint()));
}

/// One user's rank-one transmission: amplitude alpha along the unit
/// direction dir, i.e. w = alpha * dir.
struct BeamEntry {
  double alpha = 0.0;
  CVector dir;

  CVector weight() const { return alpha * dir; }
};

/// One beamforming codeword: a BeamEntry per user.
using BeamSet = std::vector<BeamEntry>;

/// Beamforming sum-rate evaluated through the stacked effective vectors
/// e_k = H^(k) w^(k): det(I + 1/s2 E E*) = det(I + 1/s2 E* E), so the
/// K x K Gramian of the effective columns is factored instead of the
/// Mr x Mr receive-side form used on the covariance path.
inline double sum_rate(const ChannelRealization& h, const BeamSet& w, double sigma2) {
  if (static_cast<int>(w.size()) != h.users()) {
    throw std::invalid_argument("sum_rate: beam set and channel disagree on user count");
  }
  const int n = h.users();
  CMatrix effective(h.stacked.rows(), n);
  for (int k = 0; k < n; ++k) {
    effective.col(k) = h.user(k) * w[static_cast<std::size_t>(k)].weight();
  }
  CMatrix gram = effective.adjoint() * effective;
  return detail::log2_det_i_plus_gram(1.0 / sigma2, 0.5 * (gram + gram.adjoint()));
}

struct SelectResult {
  std::size_t index = 0;  ///< 0-based codeword index
  double bits = 0.0;      ///< achieved sum-rate
};

/// Feedback selection: argmax of the instantaneous sum-rate over the
/// codebook entries, ties resolved to the lowest index. Works for any
/// codebook type exposing `entries` evaluable by sum_rate.
template <typename Codebook>
SelectResult select(const ChannelRealization& h, const Codebook& codebook, double sigma2) {
  if (codebook.entries.empty()) throw std::invalid_argument("select: codebook is empty");
  SelectResult best{0, -std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < codebook.entries.size(); ++i) {
    const double bits = sum_rate(h, codebook.entries[i], sigma2);
    if (bits > best.bits) best = {i, bits};
  }
  return best;
}

/// Full-CSI benchmark: iterative waterfilling on the realized channel.
inline double full_csi_rate(const ChannelRealization& h, const PowerBudget& budget, double sigma2,
                            const SolverOptions& opts = {}) {
  const IwfResult r = iwf(h.blocks, budget, sigma2, opts);
  return sum_rate(h, r.covariances, sigma2);
}

/// No-feedback baseline: scaled identity covariances, P/(K*Mt) per antenna
/// under a sum budget and P_k/Mt under individual budgets.
inline CovarianceSet no_feedback_covariances(const SystemDims& dims, const PowerBudget& budget) {
  dims.validate();
  if (budget.kind == PowerBudget::Kind::Individual &&
      budget.per_user.size() != static_cast<std::size_t>(dims.users)) {
    throw std::invalid_argument("no_feedback: budget and dims disagree on user count");
  }
  CovarianceSet set;
  set.users.reserve(static_cast<std::size_t>(dims.users));
  for (int k = 0; k < dims.users; ++k) {
    const double p = budget.kind == PowerBudget::Kind::Sum
                         ? budget.total / (static_cast<double>(dims.users) * dims.tx)
                         : budget.per_user[static_cast<std::size_t>(k)] / dims.tx;
    set.users.emplace_back(CMatrix(p * CMatrix::Identity(dims.tx, dims.tx)));
  }
  return set;
}

inline double no_feedback_rate(const ChannelRealization& h, const PowerBudget& budget,
                               double sigma2) {
  SystemDims dims{h.users(), static_cast<int>(h.user(0).cols()), static_cast<int>(h.stacked.rows())};
  return sum_rate(h, no_feedback_covariances(dims, budget), sigma2);
}

/// TDMA baseline: each user gets a 1/K time slice and transmits alone with
/// full power P and full CSI (single-user waterfilling over its eigenmodes).
inline double tdma_rate(const ChannelRealization& h, double power, double sigma2) {
  const int n = h.users();
  double bits = 0.0;
  for (int k = 0; k < n; ++k) {
    CMatrix gram = h.user(k).adjoint() * h.user(k);
    const EigenSystem eig = detail::herm_eig_unchecked(0.5 * (gram + gram.adjoint()));
    if (eig.values(0) <= 1e-300) continue;
    const RVector p = waterfill_single(eig.values, power, sigma2);
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      if (p(i) > 0.0) bits += std::log2(1.0 + eig.values(i) * p(i) / sigma2);
    }
  }
  return bits / static_cast<double>(n);
}

/// Pointwise ratio of two sum-rate curves (codebook over TDMA).
inline std::vector<double> rate_ratio(const std::vector<double>& codebook_curve,
                                      const std::vector<double>& tdma_curve) {
  if (codebook_curve.size() != tdma_curve.size()) {
    throw std::invalid_argument("rate_ratio: curves must have the same length");
  }
  std::vector<double> out(codebook_curve.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(tdma_curve[i] > 0.0)) throw std::invalid_argument("rate_ratio: TDMA curve must be positive");
    out[i] = codebook_curve[i] / tdma_curve[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Two-user expected rate region
// ---------------------------------------------------------------------------

struct RatePoint2U {
  double r1 = 0.0;
  double r2 = 0.0;
};

/// Convex down-set polygon, vertices counterclockwise starting at (0, 0).
struct RegionPolygon {
  std::vector<RatePoint2U> vertices;

  /// Point containment with slack: every hull edge may be violated by at
  /// most `slack` (useful for Monte Carlo confidence comparisons).
  bool contains(const RatePoint2U& p, double slack = 0.0) const {
    if (vertices.empty()) return false;
    if (vertices.size() == 1) {
      return p.r1 <= vertices[0].r1 + slack && p.r2 <= vertices[0].r2 + slack;
    }
    for (std::size_t i = 0; i < vertices.size(); ++i) {
      const RatePoint2U& a = vertices[i];
      const RatePoint2U& b = vertices[(i + 1) % vertices.size()];
      // counterclockwise polygon: interior points lie left of every edge
      const double cross = (b.r1 - a.r1) * (p.r2 - a.r2) - (b.r2 - a.r2) * (p.r1 - a.r1);
      const double edge = std::hypot(b.r1 - a.r1, b.r2 - a.r2);
      if (cross < -slack * std::max(edge, 1e-12)) return false;
    }
    return true;
  }
};

/// Expected capacity pentagon of one feedback mapping: R1 <= r1_max,
/// R2 <= r2_max, R1 + R2 <= sum_max, with Monte Carlo standard errors.
struct Pentagon {
  double r1_max = 0.0;
  double r2_max = 0.0;
  double sum_max = 0.0;
  double r1_se = 0.0;
  double r2_se = 0.0;
  double sum_se = 0.0;

  std::vector<RatePoint2U> corners() const {
    if (sum_max >= r1_max + r2_max) {
      return {{0.0, 0.0}, {r1_max, 0.0}, {r1_max, r2_max}, {0.0, r2_max}};
    }
    return {{0.0, 0.0},
            {r1_max, 0.0},
            {r1_max, sum_max - r1_max},
            {sum_max - r2_max, r2_max},
            {0.0, r2_max}};
  }
};

struct RegionResult {
  RegionPolygon polygon;
  std::vector<Pentagon> pentagons;  ///< one per codeword, then the adaptive mapping
  double max_stderr = 0.0;
};

namespace detail {

/// Counterclockwise convex hull (monotone chain); collinear points dropped.
inline std::vector<RatePoint2U> convex_hull(std::vector<RatePoint2U> pts) {
  std::sort(pts.begin(), pts.end(), [](const RatePoint2U& a, const RatePoint2U& b) {
    return a.r1 != b.r1 ? a.r1 < b.r1 : a.r2 < b.r2;
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const RatePoint2U& a, const RatePoint2U& b) {
                          return a.r1 == b.r1 && a.r2 == b.r2;
                        }),
            pts.end());
  const std::size_t n = pts.size();
  if (n <= 2) return pts;
  auto cross = [](const RatePoint2U& o, const RatePoint2U& a, const RatePoint2U& b) {
    return (a.r1 - o.r1) * (b.r2 - o.r2) - (a.r2 - o.r2) * (b.r1 - o.r1);
  };
  std::vector<RatePoint2U> hull(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {  // lower chain
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = n - 1, t = k + 1; i-- > 0;) {  // upper chain
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  // rotate so the polygon starts at the lexicographically smallest vertex
  auto start = std::min_element(hull.begin(), hull.end(),
                                [](const RatePoint2U& a, const RatePoint2U& b) {
                                  return a.r1 != b.r1 ? a.r1 < b.r1 : a.r2 < b.r2;
                                });
  std::rotate(hull.begin(), start, hull.end());
  return hull;
}

struct MeanAccumulator {
  double sum = 0.0;
  double sumsq = 0.0;
  std::size_t n = 0;

  void add(double x) {
    sum += x;
    sumsq += x * x;
    ++n;
  }
  double mean() const { return n > 0 ? sum / static_cast<double>(n) : 0.0; }
  double stderr_mean() const {
    if (n < 2) return 0.0;
    const double m = mean();
    const double var = std::max(0.0, (sumsq - static_cast<double>(n) * m * m) /
                                         static_cast<double>(n - 1));
    return std::sqrt(var / static_cast<double>(n));
  }
};

/// Single-user rate bound of one codeword, covariance and beamforming forms.
inline double user_rate(const ChannelRealization& h, const CovarianceSet& entry, int k,
                        double sigma2) {
  CMatrix gram = h.user(k) * entry.user(k).mat() * h.user(k).adjoint();
  return log2_det_i_plus_gram(1.0 / sigma2, 0.5 * (gram + gram.adjoint()));
}

inline double user_rate(const ChannelRealization& h, const BeamSet& entry, int k, double sigma2) {
  const CVector e = h.user(k) * entry[static_cast<std::size_t>(k)].weight();
  return std::log2(1.0 + e.squaredNorm() / sigma2);
}

}  // namespace detail

/// Two-user expected rate region of a codebook (capacity pentagons averaged
/// over the sample set). One pentagon per codeword (constant feedback
/// mapping) plus the pentagon of the deployed argmax selection rule; the
/// region is the convex-hull down-set of their union.
template <typename Codebook>
RegionResult region_2user(const std::vector<ChannelRealization>& samples, const Codebook& codebook,
                          double power_user1, double power_user2, double sigma2) {
  if (samples.empty()) throw std::invalid_argument("region_2user: no channel samples");
  if (samples.front().users() != 2) {
    throw std::invalid_argument("region_2user: defined for two-user systems only");
  }
  if (!(power_user1 > 0.0) || !(power_user2 > 0.0)) {
    throw std::invalid_argument("region_2user: user powers must be positive");
  }
  const std::size_t n_entries = codebook.entries.size();
  if (n_entries == 0) throw std::invalid_argument("region_2user: codebook is empty");

  std::vector<std::array<detail::MeanAccumulator, 3>> acc(n_entries + 1);
  for (const ChannelRealization& h : samples) {
    SelectResult best{0, -std::numeric_limits<double>::infinity()};
    std::vector<double> r1(n_entries), r2(n_entries);
    for (std::size_t q = 0; q < n_entries; ++q) {
      const double sum_bits = sum_rate(h, codebook.entries[q], sigma2);
      r1[q] = detail::user_rate(h, codebook.entries[q], 0, sigma2);
      r2[q] = detail::user_rate(h, codebook.entries[q], 1, sigma2);
      acc[q][0].add(r1[q]);
      acc[q][1].add(r2[q]);
      acc[q][2].add(sum_bits);
      if (sum_bits > best.bits) best = {q, sum_bits};
    }
    acc[n_entries][0].add(r1[best.index]);
    acc[n_entries][1].add(r2[best.index]);
    acc[n_entries][2].add(best.bits);
  }

  RegionResult out;
  std::vector<RatePoint2U> points;
  for (auto& a : acc) {
    Pentagon p;
    p.r1_max = a[0].mean();
    p.r2_max = a[1].mean();
    p.sum_max = a[2].mean();
    p.r1_se = a[0].stderr_mean();
    p.r2_se = a[1].stderr_mean();
    p.sum_se = a[2].stderr_mean();
    out.max_stderr = std::max({out.max_stderr, p.r1_se, p.r2_se, p.sum_se});
    const auto corners = p.corners();
    points.insert(points.end(), corners.begin(), corners.end());
    out.pentagons.push_back(p);
  }
  out.polygon.vertices = detail::convex_hull(std::move(points));
  return out;
}

}  // namespace macfb
