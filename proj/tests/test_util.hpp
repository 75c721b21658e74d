// SPDX-License-Identifier: Apache-2.0
//
// Shared helpers for the test suites: random matrix generators driven by the
// library Rng so every test is reproducible from a literal seed.

#pragma once

#include "macfb/channel.hpp"
#include "macfb/rng.hpp"

namespace macfb::testing {

inline CMatrix random_complex(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  CMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.cgaussian();
  }
  return m;
}

inline CMatrix random_hermitian(Rng& rng, Eigen::Index n) {
  const CMatrix a = random_complex(rng, n, n);
  return 0.5 * (a + a.adjoint());
}

inline CMatrix random_psd(Rng& rng, Eigen::Index n, Eigen::Index rank = -1) {
  const Eigen::Index r = rank < 0 ? n : rank;
  const CMatrix a = random_complex(rng, n, r);
  return a * a.adjoint();
}

/// Random PSD matrix with the exact trace given.
inline CMatrix random_psd_with_trace(Rng& rng, Eigen::Index n, double trace) {
  CMatrix q = random_psd(rng, n);
  return q * (trace / q.trace().real());
}

inline ChannelRealization make_realization(std::vector<CMatrix> blocks) {
  ChannelRealization h;
  const Eigen::Index rx = blocks.front().rows();
  Eigen::Index cols = 0;
  for (const auto& b : blocks) cols += b.cols();
  h.stacked.resize(rx, cols);
  Eigen::Index at = 0;
  for (auto& b : blocks) {
    h.stacked.middleCols(at, b.cols()) = b;
    at += b.cols();
  }
  h.blocks = std::move(blocks);
  return h;
}

inline ChannelRealization random_realization(Rng& rng, int users, int tx, int rx) {
  std::vector<CMatrix> blocks;
  blocks.reserve(static_cast<std::size_t>(users));
  for (int k = 0; k < users; ++k) blocks.push_back(random_complex(rng, rx, tx));
  return make_realization(std::move(blocks));
}

inline std::vector<ChannelRealization> random_draws(Rng& rng, std::size_t n, int users, int tx,
                                                    int rx) {
  std::vector<ChannelRealization> draws;
  draws.reserve(n);
  for (std::size_t i = 0; i < n; ++i) draws.push_back(random_realization(rng, users, tx, rx));
  return draws;
}

}  // namespace macfb::testing
