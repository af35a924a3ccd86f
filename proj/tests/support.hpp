#pragma once

// Shared fixtures for the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "rtfbeam/evalsim.hpp"
#include "rtfbeam/rtf.hpp"
#include "rtfbeam/scenario.hpp"

namespace rtfbeam::testing {

inline ScenarioConfig scene_config(double snr_db, std::uint64_t seed, bool echoes = true,
                                   NoiseKind noise = NoiseKind::pink, double duration_s = 4.0) {
  ScenarioConfig cfg;
  cfg.snr_db = snr_db;
  cfg.seed = seed;
  cfg.echoes = echoes;
  cfg.noise = noise;
  cfg.duration_s = duration_s;
  return cfg;
}

// Median over bins [k0, k1] and non-reference columns of |arg(est / true)|.
inline double median_phase_error(const RtfSet& rtf, const Eigen::MatrixXcd& true_g, Index k0, Index k1) {
  std::vector<double> err;
  for (Index c = 0; c < rtf.size(); ++c) {
    if (c == rtf.ref_column) continue;
    const Index ch = rtf.channels[std::size_t(c)];
    for (Index k = k0; k <= k1; ++k) {
      const std::complex<double> true_inv = 1.0 / true_g(k, ch);
      err.push_back(std::abs(std::arg(rtf.g_inv(k, c) / true_inv)));
    }
  }
  std::nth_element(err.begin(), err.begin() + std::ptrdiff_t(err.size() / 2), err.end());
  return err[err.size() / 2];
}

inline Eigen::MatrixXcd random_complex(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXcd a(rows, cols);
  for (Index i = 0; i < a.size(); ++i) a(i) = {n(rng), n(rng)};
  return a;
}

// Hermitian PSD matrix of the given rank.
inline Eigen::MatrixXcd random_psd(Index m, Index rank, std::mt19937_64& rng) {
  const Eigen::MatrixXcd a = random_complex(m, rank, rng);
  return a * a.adjoint();
}

}  // namespace rtfbeam::testing
