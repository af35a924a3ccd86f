#pragma once

#include "rtfbeam/signal_io.hpp"

#include <vector>

namespace rtfbeam {

/// Outcome of microphone-failure detection on one block.
struct ChannelReport {
  Eigen::VectorXd mu;        // max |correlation| of channel i with any other channel
  std::vector<bool> active;  // mu[i] >= threshold
  double threshold = 0.0;

  Index active_count() const;
  std::vector<Index> active_channels() const;
};

/// Zero-lag Pearson correlation between all channel pairs of the block.
/// A zero-variance channel correlates 0 with everything.
Eigen::MatrixXd channel_correlations(const MultichannelSignal& block);

ChannelReport detect_failures(const MultichannelSignal& block, double t_mu);

}  // namespace rtfbeam
