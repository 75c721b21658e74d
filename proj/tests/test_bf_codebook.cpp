// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch.hpp>

#include "macfb/bf_codebook.hpp"
#include "properties.hpp"
#include "test_util.hpp"

using namespace macfb;
using namespace macfb::testing;

namespace {

/// Channel block whose Gramian H*H is the given diagonal.
CMatrix block_with_gramian(double g1, double g2) {
  CMatrix h = CMatrix::Zero(2, 2);
  h(0, 0) = std::sqrt(g1);
  h(1, 1) = std::sqrt(g2);
  return h;
}

}  // namespace

TEST_CASE("eigenbeam centroid for a single user") {
  Rng rng(81);
  TrainingSet training{random_draws(rng, 10, 1, 2, 3), 1.0};
  std::vector<std::size_t> all(10);
  for (std::size_t i = 0; i < 10; ++i) all[i] = i;
  const double power = 3.0;
  const BeamSet beams = eigenbeam_centroid(training, all, power);
  REQUIRE(beams.size() == 1);
  CHECK(beams[0].alpha == Approx(std::sqrt(power)));

  CMatrix mean = CMatrix::Zero(2, 2);
  for (const auto& h : training.draws) mean += h.user(0).adjoint() * h.user(0);
  mean /= 10.0;
  const EigenSystem eig = herm_eig(CMatrix(0.5 * (mean + mean.adjoint())));
  CHECK((beams[0].dir - eig.vectors.col(0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("equal top eigenvalues split the power evenly") {
  const ChannelRealization h =
      make_realization({block_with_gramian(2.0, 0.5), block_with_gramian(2.0, 0.1)});
  TrainingSet training{{h}, 1.0};
  const double power = 4.0;
  const BeamSet beams = eigenbeam_centroid(training, {0}, power);
  CHECK(beams[0].alpha * beams[0].alpha == Approx(power / 2));
  CHECK(beams[1].alpha * beams[1].alpha == Approx(power / 2));
}

TEST_CASE("top eigenvalues 3 and 1 give the 3P/4, P/4 split") {
  const ChannelRealization h =
      make_realization({block_with_gramian(3.0, 0.5), block_with_gramian(1.0, 0.2)});
  TrainingSet training{{h}, 1.0};
  const double power = 2.0;
  const BeamSet beams = eigenbeam_centroid(training, {0}, power);
  CHECK(beams[0].alpha * beams[0].alpha == Approx(3.0 * power / 4.0));
  CHECK(beams[1].alpha * beams[1].alpha == Approx(power / 4.0));
}

TEST_CASE("eigenbeam centroid rejects an all-zero cell") {
  const ChannelRealization zero =
      make_realization({CMatrix(CMatrix::Zero(2, 2)), CMatrix(CMatrix::Zero(2, 2))});
  TrainingSet training{{zero}, 1.0};
  CHECK_THROWS_AS(eigenbeam_centroid(training, {0}, 1.0), std::invalid_argument);
}

TEST_CASE("B = 0 eigenbeam design equals the centroid of all draws") {
  Rng rng(82);
  TrainingSet training{random_draws(rng, 30, 2, 2, 2), 1.0};
  const double power = 2.0;
  LloydOptions opts;
  opts.seed = 3;
  opts.restarts = 2;
  const BeamformingCodebook book = eigenbeam_design(training, 0, power, opts);
  REQUIRE(book.entries.size() == 1);

  std::vector<std::size_t> all(training.draws.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const BeamSet expected = eigenbeam_centroid(training, all, power);
  for (int k = 0; k < 2; ++k) {
    CHECK(book.entries[0][k].alpha == Approx(expected[k].alpha));
    CHECK((book.entries[0][k].dir - expected[k].dir).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("eigenbeam training objective is nondecreasing in bits at (5,3,3)") {
  Rng rng(83);
  TrainingSet training{random_draws(rng, 400, 5, 3, 3), 1.0};
  LloydOptions opts;
  opts.seed = 17;
  opts.restarts = 2;
  opts.max_rounds = 15;
  double previous = -1.0;
  for (int bits : {1, 2, 3, 4}) {
    const BeamformingCodebook book = eigenbeam_design(training, bits, 10.0, opts);
    CHECK(book.meta.objective_bits >= previous - 1e-9);
    previous = book.meta.objective_bits;
    for (const auto& entry : book.entries) {
      double total = 0.0;
      for (const auto& beam : entry) total += beam.alpha * beam.alpha;
      CHECK(total == Approx(10.0).epsilon(1e-8));
    }
  }
}

TEST_CASE("Lloyd eigenbeam design beats the average random codebook on a tiny system") {
  Rng rng(84);
  TrainingSet training{random_draws(rng, 80, 2, 1, 2), 1.0};
  const double power = 2.0;
  LloydOptions opts;
  opts.seed = 11;
  const BeamformingCodebook designed = eigenbeam_design(training, 1, power, opts);

  double random_total = 0.0;
  for (int s = 0; s < 20; ++s) {
    Rng r(1000 + static_cast<std::uint64_t>(s));
    BeamformingCodebook random_book;
    random_book.bits = 1;
    random_book.budget = PowerBudget::sum(power);
    random_book.dims = {2, 1, 2};
    for (int q = 0; q < 2; ++q) {
      const std::vector<double> alpha = random_power(power, 2, r);
      BeamSet entry(2);
      for (int k = 0; k < 2; ++k) entry[static_cast<std::size_t>(k)] = {alpha[static_cast<std::size_t>(k)], r.unit_vector(1)};
      random_book.entries.push_back(std::move(entry));
    }
    double total = 0.0;
    for (const auto& h : training.draws) total += select(h, random_book, 1.0).bits;
    random_total += total / static_cast<double>(training.draws.size());
  }
  CHECK(designed.meta.objective_bits >= random_total / 20.0);
}

TEST_CASE("fubini_study on hand-computed pairs") {
  CVector e1 = CVector::Unit(2, 0);
  CVector e2 = CVector::Unit(2, 1);
  CHECK(fubini_study({e1, e2}, {e1, e2}) == Approx(0.0).margin(1e-12));
  CHECK(fubini_study({e1, e1}, {e2, e1}) == Approx(std::numbers::pi / 2));

  // per-user inner products 1/sqrt(2) each -> arccos(1/2) = pi/3
  CVector mix(2);
  mix << Complex(1 / std::sqrt(2.0), 0), Complex(1 / std::sqrt(2.0), 0);
  CHECK(fubini_study({e1, e1}, {mix, mix}) == Approx(std::numbers::pi / 3));
}

TEST_CASE("two-line packing approaches the orthogonal pair") {
  GrassmannOptions opts;
  opts.training_size = 2048;
  opts.rounds = 60;
  opts.seed = 88;
  const DirectionCodebook packed = grassmann_design(1, 1, 2, opts);
  CHECK(packed.min_dist_fs > std::numbers::pi / 2 - 0.1);
  CHECK(packed.min_dist_fs <= std::numbers::pi / 2 + 1e-12);
}

TEST_CASE("packing snapshot dominates every recorded round") {
  GrassmannOptions opts;
  opts.training_size = 512;
  opts.rounds = 25;
  opts.seed = 89;
  const DirectionCodebook packed = grassmann_design(2, 2, 2, opts);
  REQUIRE_FALSE(packed.min_dist_history.empty());
  for (double d : packed.min_dist_history) CHECK(packed.min_dist_fs >= d);
  CHECK(packed.min_dist_fs == packed.recompute_min_dist());
}

TEST_CASE("packing beats the average random codebook min distance") {
  GrassmannOptions opts;
  opts.training_size = 2048;
  opts.rounds = 40;
  opts.seed = 90;
  const DirectionCodebook packed = grassmann_design(3, 2, 2, opts);

  Rng rng(91);
  double total = 0.0;
  for (int s = 0; s < 50; ++s) {
    DirectionCodebook random_book;
    random_book.bits = 3;
    random_book.entries.resize(8);
    for (auto& entry : random_book.entries) {
      entry = {rng.unit_vector(2), rng.unit_vector(2)};
    }
    total += random_book.recompute_min_dist();
  }
  CHECK(packed.min_dist_fs >= total / 50.0);
}

TEST_CASE("random_power matches its distributional contract") {
  Rng rng(92);
  const double power = 3.0;
  std::vector<double> single = random_power(power, 1, rng);
  CHECK(single[0] == Approx(std::sqrt(power)));

  double mean_first = 0.0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const std::vector<double> alpha = random_power(power, 3, rng);
    double total = 0.0;
    for (double a : alpha) total += a * a;
    REQUIRE(std::abs(total - power) <= 1e-12 * power);
    mean_first += alpha[0] * alpha[0];
  }
  CHECK(mean_first / draws == Approx(power / 3.0).epsilon(0.02));
}

TEST_CASE("statistical beams follow the top eigenvector") {
  CMatrix rt(2, 2);
  rt << 1.2, 0.0, 0.0, 0.8;
  const std::vector<CVector> beams = statistical_beams({HermitianPsd(rt)});
  CHECK((beams[0] - CVector::Unit(2, 0)).cwiseAbs().maxCoeff() < 1e-12);

  // identity correlation: degenerate spectrum, still deterministic
  const std::vector<CVector> id1 = statistical_beams({HermitianPsd(CMatrix(CMatrix::Identity(2, 2)))});
  const std::vector<CVector> id2 = statistical_beams({HermitianPsd(CMatrix(CMatrix::Identity(2, 2)))});
  CHECK(id1[0] == id2[0]);

  Rng rng(93);
  const CMatrix r = random_psd(rng, 3);
  const HermitianPsd rp(r);
  const CVector u = statistical_beams({rp})[0];
  const double lmax = rp.eig().values(0);
  CHECK((rp.mat() * u - lmax * u).cwiseAbs().maxCoeff() < 1e-10 * (1.0 + lmax));
}

TEST_CASE("rotation maps the first entry to the target and preserves distances") {
  GrassmannOptions opts;
  opts.training_size = 512;
  opts.rounds = 20;
  opts.seed = 94;
  const DirectionCodebook packed = grassmann_design(2, 2, 2, opts);

  // identity rotation
  const DirectionCodebook same = rotate_codebook(packed, packed.entries.front());
  for (std::size_t q = 0; q < packed.entries.size(); ++q) {
    for (std::size_t k = 0; k < 2; ++k) {
      CHECK((same.entries[q][k] - packed.entries[q][k]).cwiseAbs().maxCoeff() < 1e-12);
    }
  }

  Rng rng(95);
  const std::vector<CVector> target{rng.unit_vector(2), rng.unit_vector(2)};
  const DirectionCodebook rotated = rotate_codebook(packed, target);
  CHECK(std::abs(rotated.min_dist_fs - packed.min_dist_fs) < 1e-10);
  for (std::size_t k = 0; k < 2; ++k) {
    // first entry matches the target up to a global per-user phase
    const Complex inner = rotated.entries.front()[k].dot(target[k]);
    CHECK(std::abs(std::abs(inner) - 1.0) < 1e-10);
    // rotated directions stay unit norm
    for (std::size_t q = 0; q < rotated.entries.size(); ++q) {
      CHECK(rotated.entries[q][k].norm() == Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("beamforming codebook property suite") {
  const Failures failures = bf_codebook_properties(200, 0xBEA43);
  for (const auto& f : failures) FAIL_CHECK(f);
  CHECK(failures.empty());
}
