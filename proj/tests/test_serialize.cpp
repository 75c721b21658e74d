// SPDX-License-Identifier: Apache-2.0

#include <cstring>

#include <catch2/catch.hpp>

#include "macfb/serialize.hpp"
#include "test_util.hpp"

using namespace macfb;
using namespace macfb::testing;

namespace {

bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

bool bit_equal(const CMatrix& a, const CMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (!bit_equal(a(i, j).real(), b(i, j).real())) return false;
      if (!bit_equal(a(i, j).imag(), b(i, j).imag())) return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("covariance codebook JSON round trip is bit exact") {
  Rng rng(101);
  for (int c = 0; c < 10; ++c) {
    CovarianceCodebook book;
    book.bits = 1 + static_cast<int>(rng.below(2));
    book.dims = {2, 2, 3};
    book.budget = (c % 2 == 0) ? PowerBudget::sum(0.3 + 3.0 * rng.uniform())
                               : PowerBudget::individual({0.5 + rng.uniform(), 0.5 + rng.uniform()});
    book.meta = DesignMeta{rng.next_u64(), 4, 12, 640, 3.25 * rng.uniform(), true};
    const std::size_t n = std::size_t{1} << book.bits;
    for (std::size_t q = 0; q < n; ++q) {
      CovarianceSet entry;
      for (int k = 0; k < 2; ++k) entry.users.emplace_back(random_psd(rng, 2));
      book.entries.push_back(std::move(entry));
    }

    // dump to text and back, as the files on disk would be
    const std::string text = to_json(book).dump();
    const CovarianceCodebook loaded = covariance_codebook_from_json(Json::parse(text));

    CHECK(loaded.bits == book.bits);
    CHECK(loaded.dims == book.dims);
    CHECK(loaded.meta.seed == book.meta.seed);
    CHECK(bit_equal(loaded.meta.objective_bits, book.meta.objective_bits));
    REQUIRE(loaded.entries.size() == book.entries.size());
    for (std::size_t q = 0; q < n; ++q) {
      for (int k = 0; k < 2; ++k) {
        CHECK(bit_equal(loaded.entries[q].user(k).mat(), book.entries[q].user(k).mat()));
      }
    }
  }
}

TEST_CASE("beamforming codebook JSON round trip is bit exact") {
  Rng rng(102);
  BeamformingCodebook book;
  book.bits = 2;
  book.dims = {2, 2, 3};
  book.budget = PowerBudget::sum(2.0);
  book.min_dist_fs = 0.875;
  book.meta = DesignMeta{42, 4, 9, 512, 1.5, true};
  for (int q = 0; q < 4; ++q) {
    BeamSet entry(2);
    const std::vector<double> alpha = random_power(2.0, 2, rng);
    for (int k = 0; k < 2; ++k) {
      entry[static_cast<std::size_t>(k)] = {alpha[static_cast<std::size_t>(k)], rng.unit_vector(2)};
    }
    book.entries.push_back(std::move(entry));
  }

  const std::string text = to_json(book).dump();
  const BeamformingCodebook loaded = beamforming_codebook_from_json(Json::parse(text));
  CHECK(loaded.bits == book.bits);
  CHECK(bit_equal(loaded.min_dist_fs, book.min_dist_fs));
  REQUIRE(loaded.entries.size() == 4);
  for (std::size_t q = 0; q < 4; ++q) {
    for (std::size_t k = 0; k < 2; ++k) {
      CHECK(bit_equal(loaded.entries[q][k].alpha, book.entries[q][k].alpha));
      CHECK(bit_equal(CMatrix(loaded.entries[q][k].dir), CMatrix(book.entries[q][k].dir)));
    }
  }
}

TEST_CASE("loading rejects malformed codebook files") {
  CHECK_THROWS(covariance_codebook_from_json(Json{{"format", "something-else"}}));
  Json j{{"format", "macfb-covariance-codebook"},
         {"version", 1},
         {"dims", {{"users", 1}, {"tx_antennas", 1}, {"rx_antennas", 1}}},
         {"bits", 2},
         {"budget", {{"type", "sum"}, {"total", 1.0}}},
         {"entries", Json::array()},
         {"design_meta",
          {{"seed", 0}, {"restarts", 1}, {"rounds", 1}, {"training_size", 1},
           {"objective_bits", 0.0}, {"converged", true}}}};
  CHECK_THROWS_WITH(covariance_codebook_from_json(j), Catch::Contains("2^bits"));
}
