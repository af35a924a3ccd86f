#pragma once

#include "rtfbeam/beamform.hpp"
#include "rtfbeam/stft.hpp"
#include "rtfbeam/vad.hpp"

#include <Eigen/Dense>

#include <vector>

namespace rtfbeam {

struct PostfilterConfig {
  double delta_rel = 1e-6;  // delta = delta_rel * mean |u|^2 of the block
  double f_min = 100.0;     // Hz; bins strictly below get low_gain
  double f_max = 3125.0;    // Hz; bins strictly above pass unchanged
  double t_vad = 0.3;       // mask values strictly above pass unchanged
  double low_gain = 0.01;

  void validate(int sample_rate) const;
};

/// Residual noise at the beamformer output, w^H y_hat.
Eigen::MatrixXcd residual_noise(const BeamWeights& weights, const std::vector<Eigen::MatrixXcd>& noise_est);

/// Wiener gain with the low-band, high-band and speech-presence overrides, in that order.
/// `vad` may be null to skip the speech-presence override.
Eigen::MatrixXd wiener_mask(const Eigen::MatrixXcd& u, const Eigen::MatrixXcd& residual,
                            const Mask* vad, const PostfilterConfig& cfg, const StftConfig& stft);

Eigen::MatrixXcd apply_postfilter(const Eigen::MatrixXcd& u, const Eigen::MatrixXd& gain);

}  // namespace rtfbeam
