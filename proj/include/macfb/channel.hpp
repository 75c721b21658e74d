// SPDX-License-Identifier: Apache-2.0
//
// Fading channel models for the K-user MIMO multiple-access uplink:
// i.i.d. Rayleigh and Kronecker transmit-correlated Rayleigh sampling.

#pragma once

#include <stdexcept>
#include <vector>

#include "macfb/numerics.hpp"
#include "macfb/rng.hpp"

namespace macfb {

/// (K, Mt, Mr): users, transmit antennas per user, receive antennas.
struct SystemDims {
  int users = 1;
  int tx = 1;
  int rx = 1;

  void validate() const {
    if (users < 1 || tx < 1 || rx < 1) {
      throw std::invalid_argument("SystemDims: users, tx and rx must all be >= 1");
    }
  }

  bool operator==(const SystemDims&) const = default;
};

enum class FadingKind { IidRayleigh, Kronecker };

/// Channel law. For the Kronecker model each user k fades as
/// H^(k) = Hw^(k) * Rt^(k)^{1/2} with Hw i.i.d. CN(0,1); the per-user
/// transmit correlation matrices are PSD with trace Mt so the average
/// entry power stays 1.
class ChannelModel {
 public:
  static ChannelModel iid_rayleigh(SystemDims dims) {
    dims.validate();
    ChannelModel m;
    m.dims_ = dims;
    m.kind_ = FadingKind::IidRayleigh;
    return m;
  }

  static ChannelModel kronecker(SystemDims dims, std::vector<HermitianPsd> tx_correlation) {
    dims.validate();
    if (tx_correlation.size() != static_cast<std::size_t>(dims.users)) {
      throw std::invalid_argument("ChannelModel: need one transmit correlation matrix per user");
    }
    for (const auto& r : tx_correlation) {
      if (r.dim() != dims.tx) {
        throw std::invalid_argument("ChannelModel: transmit correlation must be Mt x Mt");
      }
      if (std::abs(r.trace() - static_cast<double>(dims.tx)) > 1e-8 * dims.tx) {
        throw std::invalid_argument("ChannelModel: transmit correlation trace must equal Mt");
      }
    }
    ChannelModel m;
    m.dims_ = dims;
    m.kind_ = FadingKind::Kronecker;
    m.tx_corr_ = std::move(tx_correlation);
    m.tx_corr_sqrt_.reserve(m.tx_corr_.size());
    for (const auto& r : m.tx_corr_) m.tx_corr_sqrt_.push_back(psd_sqrt(r));
    return m;
  }

  const SystemDims& dims() const { return dims_; }
  FadingKind kind() const { return kind_; }
  const std::vector<HermitianPsd>& tx_correlation() const { return tx_corr_; }
  const CMatrix& tx_correlation_sqrt(int k) const {
    return tx_corr_sqrt_[static_cast<std::size_t>(k)];
  }

 private:
  ChannelModel() = default;

  SystemDims dims_;
  FadingKind kind_ = FadingKind::IidRayleigh;
  std::vector<HermitianPsd> tx_corr_;
  std::vector<CMatrix> tx_corr_sqrt_;
};

/// One fading draw: per-user Mr x Mt blocks plus their horizontal stack
/// H = [H^(1) ... H^(K)].
struct ChannelRealization {
  std::vector<CMatrix> blocks;
  CMatrix stacked;

  const CMatrix& user(int k) const { return blocks[static_cast<std::size_t>(k)]; }
  int users() const { return static_cast<int>(blocks.size()); }
};

inline ChannelRealization sample(const ChannelModel& model, Rng& rng) {
  const SystemDims& d = model.dims();
  ChannelRealization h;
  h.blocks.reserve(static_cast<std::size_t>(d.users));
  h.stacked.resize(d.rx, static_cast<Eigen::Index>(d.users) * d.tx);
  for (int k = 0; k < d.users; ++k) {
    CMatrix hw(d.rx, d.tx);
    for (Eigen::Index i = 0; i < hw.rows(); ++i) {
      for (Eigen::Index j = 0; j < hw.cols(); ++j) hw(i, j) = rng.cgaussian();
    }
    CMatrix block = (model.kind() == FadingKind::Kronecker)
                        ? CMatrix(hw * model.tx_correlation_sqrt(k))
                        : std::move(hw);
    h.stacked.middleCols(static_cast<Eigen::Index>(k) * d.tx, d.tx) = block;
    h.blocks.push_back(std::move(block));
  }
  return h;
}

}  // namespace macfb
