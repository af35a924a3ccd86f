#pragma once

#include "rtfbeam/signal_io.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <span>

namespace rtfbeam {

enum class MaskKind { oracle, network, pooled, unit };

/// Speech-presence probabilities, bins x frames, every entry in [0, 1].
struct Mask {
  Eigen::MatrixXd values;
  MaskKind kind = MaskKind::unit;

  Index bins() const { return values.rows(); }
  Index frames() const { return values.cols(); }
};

/// All-ones mask; disables VAD weighting.
Mask unit_mask(Index bins, Index frames);

/// Ideal binary mask: 1 where the local speech-to-noise ratio exceeds t_snr_db.
Mask oracle_ibm(const Eigen::MatrixXcd& speech, const Eigen::MatrixXcd& noise, double t_snr_db);

/// Frame-wise forward pass on normalized spectral magnitudes; no context frames.
Mask infer_mask(const NetworkWeights& net, const Eigen::MatrixXcd& spectrum);

/// Per-bin median across masks; even counts average the two middle values.
Mask pool_median(std::span<const Mask> masks);

/// Writes bins as rows and frames as columns.
void write_mask_csv(const Mask& mask, const std::filesystem::path& path);

}  // namespace rtfbeam
