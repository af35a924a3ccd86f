#pragma once

#include "rtfbeam/signal_io.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

namespace rtfbeam {

/// One FIR per channel, in effect from start_sample until the next segment.
struct TrajectorySegment {
  Index start_sample = 0;
  std::vector<std::vector<double>> firs;
};

enum class NoiseKind { white, pink, recorded };

struct MixtureSpec {
  Index channels = 4;
  std::vector<TrajectorySegment> trajectory;  // first segment starts at 0
  NoiseKind noise = NoiseKind::pink;
  double snr_db = 5.0;
  Index ref_channel = 0;

  /// Segment starts must be multiples of `hop` so that they fall on block boundaries.
  void validate(Index hop) const;
};

struct SegmentRtf {
  Index start_sample = 0;
  Eigen::MatrixXcd g;  // bins x channels, H_i / H_ref
};

struct Mixture {
  MultichannelSignal mixture;
  MultichannelSignal clean;  // target spatial images
  MultichannelSignal noise;  // scaled noise images
  std::vector<SegmentRtf> true_rtf;
  double noise_gain = 1.0;
};

/// x_i = h_i * s + alpha y_i with alpha set so the global SNR equals spec.snr_db.
Mixture simulate(const MixtureSpec& spec, const MultichannelSignal& dry, const MultichannelSignal& noise,
                 Index frame_len = 512);

/// Frequency response ratio H_i(k) / H_ref(k) on the one-sided frame_len-point grid.
Eigen::MatrixXcd fir_rtf(const std::vector<std::vector<double>>& firs, Index ref, Index frame_len);

/// Pure delay followed by three decaying echoes, at most 64 taps.
std::vector<double> echo_fir(Index delay, std::uint64_t seed);

/// Static scene: one segment, channel c delayed by delays[c] with decaying echoes.
std::vector<TrajectorySegment> static_trajectory(const std::vector<Index>& delays, bool echoes, std::uint64_t seed);

/// Speaker alternating between positions every `segment_samples`.
std::vector<TrajectorySegment> moving_trajectory(const std::vector<std::vector<Index>>& positions,
                                                 Index segment_samples, Index total_samples, bool echoes,
                                                 std::uint64_t seed);

/// Synthetic speech-like source: voiced and unvoiced syllables separated by pauses.
MultichannelSignal synth_speech(Index length, int sample_rate, std::uint64_t seed);

struct NoiseField {
  NoiseKind kind = NoiseKind::pink;
  Index channels = 4;
  std::vector<std::vector<Index>> source_delays;  // per point source, per channel
  double sensor_level = 0.3;                      // rms of independent per-channel noise relative to sources
};

/// Point noise sources arriving with per-channel delays plus independent sensor noise.
MultichannelSignal make_noise(const NoiseField& field, Index length, int sample_rate, std::uint64_t seed);

struct Decomposition {
  Eigen::VectorXd target;
  Eigen::VectorXd interference;
  Eigen::VectorXd artifacts;
};

/// Projection of `estimate` onto delayed copies (0..filter_len-1) of the target,
/// then of the remainder onto delayed copies of every noise channel.
Decomposition decompose(const Eigen::VectorXd& estimate, const Eigen::VectorXd& target,
                        const Eigen::MatrixXd& noise, Index filter_len = 32);

struct Metrics {
  double sir = 0.0;
  double sdr = 0.0;
  double sar = 0.0;
  bool capped = false;  // at least one ratio hit the +-200 dB sentinel
};

inline constexpr double kMetricCap = 200.0;

Metrics metrics(const Decomposition& d);

struct MetricReport {
  Metrics aggregate;
  std::vector<Metrics> blocks;
};

/// Aggregate metrics plus, when block_samples is set, metrics of each consecutive block.
/// Stems are trimmed to the estimate length.
MetricReport evaluate(const Eigen::VectorXd& estimate, const Eigen::VectorXd& target, const Eigen::MatrixXd& noise,
                      Index filter_len = 32, std::optional<Index> block_samples = std::nullopt);

}  // namespace rtfbeam
