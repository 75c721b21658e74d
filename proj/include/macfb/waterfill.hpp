// SPDX-License-Identifier: Apache-2.0
//
// Power allocation solvers for the MIMO MAC: exact single-user waterfilling
// and the two iterative waterfilling schemes (shared water level under a sum
// power budget, per-user water levels under individual budgets).

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "macfb/numerics.hpp"

namespace macfb {

/// Transmit power budget: one shared pool or one cap per user.
struct PowerBudget {
  enum class Kind { Sum, Individual };

  Kind kind = Kind::Sum;
  double total = 1.0;                ///< Sum: shared pool P
  std::vector<double> per_user;      ///< Individual: caps P_k

  static PowerBudget sum(double p) {
    if (!(p > 0.0) || !std::isfinite(p)) {
      throw std::invalid_argument("PowerBudget: sum power must be positive and finite");
    }
    PowerBudget b;
    b.kind = Kind::Sum;
    b.total = p;
    return b;
  }

  static PowerBudget individual(std::vector<double> caps) {
    if (caps.empty()) throw std::invalid_argument("PowerBudget: need at least one user cap");
    for (double p : caps) {
      if (!(p > 0.0) || !std::isfinite(p)) {
        throw std::invalid_argument("PowerBudget: user powers must be positive and finite");
      }
    }
    PowerBudget b;
    b.kind = Kind::Individual;
    b.total = std::accumulate(caps.begin(), caps.end(), 0.0);
    b.per_user = std::move(caps);
    return b;
  }
};

/// Per-user transmit covariance matrices Q^(k), each Mt x Mt PSD.
struct CovarianceSet {
  std::vector<HermitianPsd> users;

  int count() const { return static_cast<int>(users.size()); }
  const HermitianPsd& user(int k) const { return users[static_cast<std::size_t>(k)]; }

  double trace_sum() const {
    double t = 0.0;
    for (const auto& q : users) t += q.trace();
    return t;
  }

  /// Budget feasibility with the standard 1e-9 relative slack.
  bool satisfies(const PowerBudget& budget, double rel = 1e-9) const {
    if (budget.kind == PowerBudget::Kind::Sum) {
      return trace_sum() <= budget.total * (1.0 + rel);
    }
    if (budget.per_user.size() != users.size()) return false;
    for (std::size_t k = 0; k < users.size(); ++k) {
      if (users[k].trace() > budget.per_user[k] * (1.0 + rel)) return false;
    }
    return true;
  }
};

struct SolverOptions {
  double tol = 1e-9;    ///< relative objective change declaring a fixed point
  int max_iters = 500;
};

/// Iterative waterfilling outcome. `objective_history` holds the sum-rate in
/// bits after every accepted update (block-coordinate ascent, so it is
/// nondecreasing); `idle_users` lists users whose channel was identically
/// zero and who therefore received the degenerate covariance.
struct IwfResult {
  CovarianceSet covariances;
  double objective_bits = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_history;
  std::vector<int> idle_users;
};

/// Exact waterfilling over one user's eigenmodes: p_i = max(0, mu - s2/l_i)
/// with mu solving sum p_i = P. The water level comes from the sorted
/// threshold scan, which is exact for this piecewise-linear problem.
inline RVector waterfill_single(const RVector& eigenvalues, double power, double sigma2) {
  const Eigen::Index n = eigenvalues.size();
  if (n == 0) throw std::invalid_argument("waterfill_single: no eigenvalues given");
  if (!(power > 0.0) || !std::isfinite(power)) {
    throw std::invalid_argument("waterfill_single: power must be positive and finite");
  }
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
    throw std::invalid_argument("waterfill_single: sigma2 must be positive and finite");
  }
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    if (eigenvalues(i + 1) > eigenvalues(i) * (1.0 + 1e-12) + 1e-300) {
      throw std::invalid_argument("waterfill_single: eigenvalues must be sorted descending");
    }
  }

  Eigen::Index active = 0;
  while (active < n && eigenvalues(active) > 1e-300) ++active;
  if (active == 0) {
    throw std::invalid_argument("waterfill_single: all eigenvalues are (numerically) zero");
  }

  // inverse gains ascending; find the largest m with water above inv(m-1)
  RVector inv(active);
  for (Eigen::Index i = 0; i < active; ++i) inv(i) = sigma2 / eigenvalues(i);
  Eigen::Index m = 1;
  double prefix = inv(0);
  double level = power + prefix;  // m = 1 always feasible since power > 0
  for (Eigen::Index cand = 2; cand <= active; ++cand) {
    const double next_prefix = prefix + inv(cand - 1);
    const double next_level = (power + next_prefix) / static_cast<double>(cand);
    if (next_level <= inv(cand - 1)) break;
    m = cand;
    prefix = next_prefix;
    level = next_level;
  }

  RVector p = RVector::Zero(n);
  for (Eigen::Index i = 0; i < m; ++i) p(i) = level - inv(i);
  return p;
}

namespace detail {

inline bool zero_channel(const CMatrix& s) {
  return s.size() == 0 || s.cwiseAbs().maxCoeff() <= 1e-150;
}

inline void check_channel_shapes(const std::vector<CMatrix>& channels) {
  if (channels.empty()) throw std::invalid_argument("iwf: need at least one channel");
  const Eigen::Index rows = channels.front().rows();
  for (const auto& s : channels) {
    if (s.rows() != rows) throw std::invalid_argument("iwf: channels must share the row dimension");
    if (s.cols() < 1 || s.rows() < 1) throw std::invalid_argument("iwf: empty channel matrix");
    if (!is_finite(s)) throw std::invalid_argument("iwf: channel has non-finite entries");
  }
}

/// Sum-rate log2 det(I + 1/s2 * sum_k S_k Q_k S_k*) for raw covariance blocks.
inline double mac_objective(const std::vector<CMatrix>& channels, const std::vector<CMatrix>& q,
                            double sigma2) {
  const Eigen::Index rows = channels.front().rows();
  CMatrix gram = CMatrix::Zero(rows, rows);
  for (std::size_t k = 0; k < channels.size(); ++k) {
    if (q[k].size() == 0) continue;
    gram.noalias() += channels[k] * q[k] * channels[k].adjoint();
  }
  return log2_det_i_plus_gram(1.0 / sigma2, 0.5 * (gram + gram.adjoint()));
}

/// Interference-plus-noise whitened channel of user k: L^{-1} S_k where
/// L L* = s2 I + sum_{j != k} S_j Q_j S_j*.
inline CMatrix whitened_channel(const std::vector<CMatrix>& channels, const std::vector<CMatrix>& q,
                                double sigma2, std::size_t k) {
  const Eigen::Index rows = channels.front().rows();
  CMatrix z = CMatrix::Zero(rows, rows);
  for (std::size_t j = 0; j < channels.size(); ++j) {
    if (j == k || q[j].size() == 0) continue;
    z.noalias() += channels[j] * q[j] * channels[j].adjoint();
  }
  z = 0.5 * (z + z.adjoint());
  for (Eigen::Index i = 0; i < rows; ++i) z(i, i) += sigma2;
  Eigen::LLT<CMatrix> llt(z);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("iwf: interference covariance is not positive definite");
  }
  return llt.matrixL().solve(channels[k]);
}

inline CovarianceSet wrap_covariances(std::vector<CMatrix>&& q, Eigen::Index mt_fallback) {
  CovarianceSet set;
  set.users.reserve(q.size());
  for (auto& m : q) {
    if (m.size() == 0) m = CMatrix::Zero(mt_fallback, mt_fallback);
    set.users.emplace_back(std::move(m));
  }
  return set;
}

}  // namespace detail

/// Sum-power iterative waterfilling: every iteration whitens each user by the
/// others' interference, pools all whitened eigenmodes and waterfills them
/// under one shared water level, then moves toward that best response. The
/// step starts at 1 and backtracks on the segment whenever the (concave)
/// objective would decrease, so the recorded objective is nondecreasing and a
/// refused step certifies a fixed point.
///
/// Users whose channel is identically zero get a zero covariance and the
/// whole budget goes to the rest.
inline IwfResult iwf_sum_power(const std::vector<CMatrix>& channels, double power, double sigma2,
                               const SolverOptions& opts = {}) {
  detail::check_channel_shapes(channels);
  if (!(power > 0.0) || !std::isfinite(power)) {
    throw std::invalid_argument("iwf_sum_power: power must be positive and finite");
  }
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
    throw std::invalid_argument("iwf_sum_power: sigma2 must be positive and finite");
  }
  const std::size_t n_users = channels.size();

  IwfResult out;
  std::vector<std::size_t> active;
  for (std::size_t k = 0; k < n_users; ++k) {
    if (detail::zero_channel(channels[k])) {
      out.idle_users.push_back(static_cast<int>(k));
    } else {
      active.push_back(k);
    }
  }

  std::vector<CMatrix> q(n_users);
  for (std::size_t k = 0; k < n_users; ++k) q[k] = CMatrix::Zero(channels[k].cols(), channels[k].cols());
  if (active.empty()) {
    out.covariances = detail::wrap_covariances(std::move(q), channels.front().cols());
    out.converged = true;
    out.objective_history.push_back(0.0);
    return out;
  }

  double dims_total = 0.0;
  for (std::size_t k : active) dims_total += static_cast<double>(channels[k].cols());
  for (std::size_t k : active) {
    q[k] = (power / dims_total) * CMatrix::Identity(channels[k].cols(), channels[k].cols());
  }

  double objective = detail::mac_objective(channels, q, sigma2);
  out.objective_history.push_back(objective);

  std::vector<CMatrix> proposal(n_users);
  for (int iter = 1; iter <= opts.max_iters; ++iter) {
    // best response: joint waterfill over everyone's whitened modes
    struct Mode {
      double gain;
      std::size_t user;
      Eigen::Index index;
    };
    std::vector<Mode> modes;
    std::vector<EigenSystem> eigs(n_users);
    for (std::size_t k : active) {
      const CMatrix g = detail::whitened_channel(channels, q, sigma2, k);
      CMatrix gram = g.adjoint() * g;
      eigs[k] = detail::herm_eig_unchecked(0.5 * (gram + gram.adjoint()));
      for (Eigen::Index i = 0; i < eigs[k].values.size(); ++i) {
        if (eigs[k].values(i) > 1e-300) modes.push_back({eigs[k].values(i), k, i});
      }
    }
    if (modes.empty()) break;
    std::sort(modes.begin(), modes.end(), [](const Mode& a, const Mode& b) {
      if (a.gain != b.gain) return a.gain > b.gain;
      return a.user != b.user ? a.user < b.user : a.index < b.index;
    });
    RVector pooled(static_cast<Eigen::Index>(modes.size()));
    for (std::size_t i = 0; i < modes.size(); ++i) pooled(static_cast<Eigen::Index>(i)) = modes[i].gain;
    const RVector levels = waterfill_single(pooled, power, 1.0);

    for (std::size_t k : active) {
      RVector p = RVector::Zero(eigs[k].values.size());
      for (std::size_t i = 0; i < modes.size(); ++i) {
        if (modes[i].user == k) p(modes[i].index) = levels(static_cast<Eigen::Index>(i));
      }
      proposal[k] = eigs[k].vectors * p.asDiagonal() * eigs[k].vectors.adjoint();
    }

    // monotone step toward the best response
    double step = 1.0;
    bool accepted = false;
    std::vector<CMatrix> trial(n_users);
    for (int back = 0; back < 60; ++back) {
      trial = q;
      for (std::size_t k : active) trial[k] = (1.0 - step) * q[k] + step * proposal[k];
      const double value = detail::mac_objective(channels, trial, sigma2);
      if (value >= objective - 1e-13 * (1.0 + std::abs(objective))) {
        const double previous = objective;
        q = std::move(trial);
        objective = value;
        out.objective_history.push_back(objective);
        out.iterations = iter;
        accepted = true;
        if (std::abs(objective - previous) <= opts.tol * std::max(1.0, std::abs(previous))) {
          out.converged = true;
        }
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      out.converged = true;  // no ascent along the best-response segment
      break;
    }
    if (out.converged) break;
  }

  out.objective_bits = objective;
  out.covariances = detail::wrap_covariances(std::move(q), channels.front().cols());
  return out;
}

/// Individual-power iterative waterfilling: cyclic exact best response, each
/// user waterfills its interference-whitened channel under its own budget.
/// Zero-channel users park their (unusable) power as (P_k/Mt) I and are
/// reported in `idle_users`.
inline IwfResult iwf_individual(const std::vector<CMatrix>& channels,
                                const std::vector<double>& user_power, double sigma2,
                                const SolverOptions& opts = {}) {
  detail::check_channel_shapes(channels);
  if (user_power.size() != channels.size()) {
    throw std::invalid_argument("iwf_individual: need one power cap per user");
  }
  for (double p : user_power) {
    if (!(p > 0.0) || !std::isfinite(p)) {
      throw std::invalid_argument("iwf_individual: user powers must be positive and finite");
    }
  }
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
    throw std::invalid_argument("iwf_individual: sigma2 must be positive and finite");
  }
  const std::size_t n_users = channels.size();

  IwfResult out;
  std::vector<std::size_t> active;
  std::vector<CMatrix> q(n_users);
  for (std::size_t k = 0; k < n_users; ++k) {
    const Eigen::Index mt = channels[k].cols();
    if (detail::zero_channel(channels[k])) {
      out.idle_users.push_back(static_cast<int>(k));
      q[k] = (user_power[k] / static_cast<double>(mt)) * CMatrix::Identity(mt, mt);
    } else {
      active.push_back(k);
      q[k] = (user_power[k] / static_cast<double>(mt)) * CMatrix::Identity(mt, mt);
    }
  }

  double objective = detail::mac_objective(channels, q, sigma2);
  out.objective_history.push_back(objective);
  if (active.empty()) {
    out.covariances = detail::wrap_covariances(std::move(q), channels.front().cols());
    out.converged = true;
    out.objective_bits = objective;
    return out;
  }

  for (int iter = 1; iter <= opts.max_iters; ++iter) {
    for (std::size_t k : active) {
      const CMatrix g = detail::whitened_channel(channels, q, sigma2, k);
      CMatrix gram = g.adjoint() * g;
      const EigenSystem eig = detail::herm_eig_unchecked(0.5 * (gram + gram.adjoint()));
      if (eig.values(0) <= 1e-300) continue;
      const RVector p = waterfill_single(eig.values, user_power[k], 1.0);
      q[k] = eig.vectors * p.asDiagonal() * eig.vectors.adjoint();
    }
    const double previous = objective;
    objective = detail::mac_objective(channels, q, sigma2);
    out.objective_history.push_back(objective);
    out.iterations = iter;
    if (std::abs(objective - previous) <= opts.tol * std::max(1.0, std::abs(previous))) {
      out.converged = true;
      break;
    }
  }

  out.objective_bits = objective;
  out.covariances = detail::wrap_covariances(std::move(q), channels.front().cols());
  return out;
}

/// Dispatch on the budget kind; `channels` order matches `budget.per_user`.
inline IwfResult iwf(const std::vector<CMatrix>& channels, const PowerBudget& budget, double sigma2,
                     const SolverOptions& opts = {}) {
  if (budget.kind == PowerBudget::Kind::Sum) {
    return iwf_sum_power(channels, budget.total, sigma2, opts);
  }
  return iwf_individual(channels, budget.per_user, sigma2, opts);
}

}  // namespace macfb
