#pragma once

#include "rtfbeam/signal_io.hpp"

#include <Eigen/Dense>

#include <vector>

namespace rtfbeam {

struct StftConfig {
  Index frame_len = 512;
  Index hop = 128;
  int sample_rate = 16000;

  Index bins() const { return frame_len / 2 + 1; }
  /// Center frequency of bin k in Hz.
  double bin_frequency(Index k) const {
    return static_cast<double>(k) * sample_rate / static_cast<double>(frame_len);
  }
  /// Frames produced by analyze() for a signal of the given length (0 if too short).
  Index frame_count(Index samples) const {
    return samples < frame_len ? 0 : (samples - frame_len) / hop + 1;
  }
  /// Samples spanned by `frames` consecutive frames.
  Index span_samples(Index frames) const { return (frames - 1) * hop + frame_len; }
  void validate() const;
};

/// One-sided STFT of every channel; channel(m) is a bins x frames matrix.
class Spectrogram {
 public:
  Spectrogram() = default;
  Spectrogram(std::vector<Eigen::MatrixXcd> channels, StftConfig config);

  Index bins() const { return bins_; }
  Index frames() const { return frames_; }
  Index channel_count() const { return static_cast<Index>(channels_.size()); }
  const StftConfig& config() const { return config_; }

  const Eigen::MatrixXcd& channel(Index m) const { return channels_.at(static_cast<std::size_t>(m)); }
  Eigen::MatrixXcd& channel(Index m) { return channels_.at(static_cast<std::size_t>(m)); }

  /// Column vector of all channels at (k, l).
  Eigen::VectorXcd snapshot(Index k, Index l) const;
  /// Channels x frames matrix for bin k, restricted to `channels`.
  Eigen::MatrixXcd bin_matrix(Index k, const std::vector<Index>& channels) const;

 private:
  std::vector<Eigen::MatrixXcd> channels_;
  StftConfig config_;
  Index bins_ = 0;
  Index frames_ = 0;
};

/// Periodic Hamming window of length n.
Eigen::VectorXd hamming_window(Index n);

Spectrogram analyze(const MultichannelSignal& signal, const StftConfig& cfg);

/// Weighted overlap-add; output length is span_samples(frames()).
MultichannelSignal synthesize(const Spectrogram& spec);

}  // namespace rtfbeam
