// SPDX-License-Identifier: Apache-2.0
//
// JSON serialization of the codebook artifacts. Matrices are stored as pairs
// of row-major real arrays; doubles survive a dump/parse round trip
// bit-exactly, so written codebooks reload identically.

#pragma once

#include <string>

#include <json.hpp>

#include "macfb/bf_codebook.hpp"
#include "macfb/cov_codebook.hpp"

namespace macfb {

using Json = nlohmann::json;

namespace detail {

inline Json matrix_to_json(const CMatrix& m) {
  Json re = Json::array();
  Json im = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      re.push_back(m(i, j).real());
      im.push_back(m(i, j).imag());
    }
  }
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"re", std::move(re)}, {"im", std::move(im)}};
}

inline CMatrix matrix_from_json(const Json& j) {
  const Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  const Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  const auto& re = j.at("re");
  const auto& im = j.at("im");
  if (static_cast<Eigen::Index>(re.size()) != rows * cols ||
      static_cast<Eigen::Index>(im.size()) != rows * cols) {
    throw std::invalid_argument("matrix_from_json: entry count does not match rows * cols");
  }
  CMatrix m(rows, cols);
  std::size_t idx = 0;
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j2 = 0; j2 < cols; ++j2, ++idx) {
      m(i, j2) = Complex(re[idx].get<double>(), im[idx].get<double>());
    }
  }
  return m;
}

inline Json vector_to_json(const CVector& v) {
  Json re = Json::array();
  Json im = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    re.push_back(v(i).real());
    im.push_back(v(i).imag());
  }
  return Json{{"re", std::move(re)}, {"im", std::move(im)}};
}

inline CVector vector_from_json(const Json& j) {
  const auto& re = j.at("re");
  const auto& im = j.at("im");
  if (re.size() != im.size()) throw std::invalid_argument("vector_from_json: length mismatch");
  CVector v(static_cast<Eigen::Index>(re.size()));
  for (std::size_t i = 0; i < re.size(); ++i) {
    v(static_cast<Eigen::Index>(i)) = Complex(re[i].get<double>(), im[i].get<double>());
  }
  return v;
}

inline Json budget_to_json(const PowerBudget& b) {
  if (b.kind == PowerBudget::Kind::Sum) return Json{{"type", "sum"}, {"total", b.total}};
  return Json{{"type", "individual"}, {"per_user", b.per_user}};
}

inline PowerBudget budget_from_json(const Json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "sum") return PowerBudget::sum(j.at("total").get<double>());
  if (type == "individual") {
    return PowerBudget::individual(j.at("per_user").get<std::vector<double>>());
  }
  throw std::invalid_argument("budget_from_json: unknown budget type '" + type + "'");
}

inline Json dims_to_json(const SystemDims& d) {
  return Json{{"users", d.users}, {"tx_antennas", d.tx}, {"rx_antennas", d.rx}};
}

inline SystemDims dims_from_json(const Json& j) {
  SystemDims d{j.at("users").get<int>(), j.at("tx_antennas").get<int>(),
               j.at("rx_antennas").get<int>()};
  d.validate();
  return d;
}

inline Json meta_to_json(const DesignMeta& m) {
  return Json{{"seed", m.seed},
              {"restarts", m.restarts},
              {"rounds", m.rounds},
              {"training_size", m.training_size},
              {"objective_bits", m.objective_bits},
              {"converged", m.converged}};
}

inline DesignMeta meta_from_json(const Json& j) {
  DesignMeta m;
  m.seed = j.at("seed").get<std::uint64_t>();
  m.restarts = j.at("restarts").get<int>();
  m.rounds = j.at("rounds").get<int>();
  m.training_size = j.at("training_size").get<std::size_t>();
  m.objective_bits = j.at("objective_bits").get<double>();
  m.converged = j.at("converged").get<bool>();
  return m;
}

}  // namespace detail

inline Json to_json(const CovarianceCodebook& book) {
  Json entries = Json::array();
  for (const auto& entry : book.entries) {
    Json users = Json::array();
    for (const auto& q : entry.users) users.push_back(detail::matrix_to_json(q.mat()));
    entries.push_back(std::move(users));
  }
  return Json{{"format", "macfb-covariance-codebook"},
              {"version", 1},
              {"dims", detail::dims_to_json(book.dims)},
              {"bits", book.bits},
              {"budget", detail::budget_to_json(book.budget)},
              {"entries", std::move(entries)},
              {"design_meta", detail::meta_to_json(book.meta)}};
}

inline CovarianceCodebook covariance_codebook_from_json(const Json& j) {
  if (j.at("format").get<std::string>() != "macfb-covariance-codebook") {
    throw std::invalid_argument("covariance_codebook_from_json: wrong format tag");
  }
  CovarianceCodebook book;
  book.dims = detail::dims_from_json(j.at("dims"));
  book.bits = j.at("bits").get<int>();
  book.budget = detail::budget_from_json(j.at("budget"));
  book.meta = detail::meta_from_json(j.at("design_meta"));
  for (const auto& entry : j.at("entries")) {
    CovarianceSet set;
    for (const auto& q : entry) set.users.emplace_back(detail::matrix_from_json(q));
    book.entries.push_back(std::move(set));
  }
  if (book.entries.size() != (std::size_t{1} << book.bits)) {
    throw std::invalid_argument("covariance_codebook_from_json: entry count must equal 2^bits");
  }
  return book;
}

inline Json to_json(const BeamformingCodebook& book) {
  Json entries = Json::array();
  for (const auto& entry : book.entries) {
    Json users = Json::array();
    for (const auto& beam : entry) {
      users.push_back(Json{{"alpha", beam.alpha}, {"dir", detail::vector_to_json(beam.dir)}});
    }
    entries.push_back(std::move(users));
  }
  return Json{{"format", "macfb-beamforming-codebook"},
              {"version", 1},
              {"dims", detail::dims_to_json(book.dims)},
              {"bits", book.bits},
              {"budget", detail::budget_to_json(book.budget)},
              {"min_dist_fs", book.min_dist_fs},
              {"entries", std::move(entries)},
              {"design_meta", detail::meta_to_json(book.meta)}};
}

inline BeamformingCodebook beamforming_codebook_from_json(const Json& j) {
  if (j.at("format").get<std::string>() != "macfb-beamforming-codebook") {
    throw std::invalid_argument("beamforming_codebook_from_json: wrong format tag");
  }
  BeamformingCodebook book;
  book.dims = detail::dims_from_json(j.at("dims"));
  book.bits = j.at("bits").get<int>();
  book.budget = detail::budget_from_json(j.at("budget"));
  book.min_dist_fs = j.at("min_dist_fs").get<double>();
  book.meta = detail::meta_from_json(j.at("design_meta"));
  for (const auto& entry : j.at("entries")) {
    BeamSet set;
    for (const auto& beam : entry) {
      set.push_back(BeamEntry{beam.at("alpha").get<double>(),
                              detail::vector_from_json(beam.at("dir"))});
    }
    book.entries.push_back(std::move(set));
  }
  if (book.entries.size() != (std::size_t{1} << book.bits)) {
    throw std::invalid_argument("beamforming_codebook_from_json: entry count must equal 2^bits");
  }
  return book;
}

}  // namespace macfb
