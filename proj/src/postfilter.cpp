#include "rtfbeam/postfilter.hpp"

#include "rtfbeam/error.hpp"

#include <algorithm>
#include <limits>

namespace rtfbeam {

void PostfilterConfig::validate(int sample_rate) const {
  if (!(delta_rel > 0.0)) {
    throw ConfigError("post-filter delta must be positive");
  }
  if (!(f_min >= 0.0 && f_min < f_max && f_max <= sample_rate / 2.0)) {
    throw ConfigError("post-filter band limits must satisfy 0 <= f_min < f_max <= fs/2");
  }
  if (!(t_vad >= 0.0 && t_vad <= 1.0)) {
    throw ConfigError("t_vad must lie in [0, 1]");
  }
  if (!(low_gain > 0.0 && low_gain <= 1.0)) {
    throw ConfigError("low-band gain must lie in (0, 1]");
  }
}

Eigen::MatrixXcd residual_noise(const BeamWeights& weights, const std::vector<Eigen::MatrixXcd>& noise_est) {
  std::vector<const Eigen::MatrixXcd*> inputs;
  inputs.reserve(noise_est.size());
  for (const auto& y : noise_est) {
    inputs.push_back(&y);
  }
  return beam_sum(weights.w, inputs);
}

Eigen::MatrixXd wiener_mask(const Eigen::MatrixXcd& u, const Eigen::MatrixXcd& residual,
                            const Mask* vad, const PostfilterConfig& cfg, const StftConfig& stft) {
  if (u.rows() != residual.rows() || u.cols() != residual.cols()) {
    throw SizeError("beamformer output and residual noise differ in shape");
  }
  if (vad != nullptr && (vad->bins() != u.rows() || vad->frames() != u.cols())) {
    throw SizeError("VAD mask shape differs from the beamformer output");
  }
  if (u.rows() != stft.bins()) {
    throw SizeError("beamformer output bin count differs from the STFT framing");
  }
  const Eigen::ArrayXXd pu = u.cwiseAbs2().array();
  const Eigen::ArrayXXd pr = residual.cwiseAbs2().array();
  const double mean_pu = pu.size() > 0 ? pu.mean() : 0.0;
  const double delta = std::max(cfg.delta_rel * mean_pu, std::numeric_limits<double>::min());

  Eigen::MatrixXd g = ((pu - pr).max(delta) / (pu + delta)).matrix();
  for (Index k = 0; k < g.rows(); ++k) {
    const double f = stft.bin_frequency(k);
    if (f < cfg.f_min) {
      g.row(k).setConstant(cfg.low_gain);
    }
    if (f > cfg.f_max) {
      g.row(k).setConstant(1.0);
    }
  }
  if (vad != nullptr) {
    g = (vad->values.array() > cfg.t_vad).select(1.0, g);
  }
  return g.cwiseMin(1.0).cwiseMax(std::numeric_limits<double>::min());
}

Eigen::MatrixXcd apply_postfilter(const Eigen::MatrixXcd& u, const Eigen::MatrixXd& gain) {
  if (u.rows() != gain.rows() || u.cols() != gain.cols()) {
    throw SizeError("gain and spectrum differ in shape");
  }
  return u.cwiseProduct(gain.cast<std::complex<double>>());
}

}  // namespace rtfbeam
