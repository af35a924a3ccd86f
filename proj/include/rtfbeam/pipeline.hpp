#pragma once

#include "rtfbeam/beamform.hpp"
#include "rtfbeam/channel_health.hpp"
#include "rtfbeam/postfilter.hpp"
#include "rtfbeam/rtf.hpp"
#include "rtfbeam/signal_io.hpp"
#include "rtfbeam/stft.hpp"
#include "rtfbeam/vad.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace rtfbeam {

enum class PostfilterKind { none, wiener, ban };
enum class VadMode { none, oracle, network };
enum class Pooling { none, median };

struct PipelineConfig {
  std::optional<Index> block_frames;  // empty means batch: the whole recording is one block
  BeamMethod beamformer = BeamMethod::mvdr;
  PostfilterKind postfilter = PostfilterKind::wiener;
  VadMode vad = VadMode::oracle;
  Pooling pooling = Pooling::median;
  Index ref_channel = 0;
  double t_mu = 0.05;
  double t_snr_db = 5.0;
  double noise_loading = 1e-6;
  bool allow_any_pairing = false;  // permit gev:wiener, irtf:ban and the like
  StftConfig stft;
  RtfConfig rtf;
  PostfilterConfig post;
  std::filesystem::path dump_dir;  // when set, run() writes per-block mask and RTF CSVs here

  /// Throws ConfigError on invalid combinations.
  void validate() const;
};

/// Frames per block for a block duration in milliseconds (250 ms -> 31 frames at 16 kHz / 128 hop).
Index block_frames_from_ms(double ms, const StftConfig& stft);

/// Everything a VAD mode may need beyond the mixture. Oracle mode reads the clean
/// spatial images and the noise images, network mode reads the weights.
struct VadInputs {
  const MultichannelSignal* clean = nullptr;
  const MultichannelSignal* noise = nullptr;
  const NetworkWeights* network = nullptr;
};

struct StageTimings {
  double detect_ms = 0.0;
  double stft_ms = 0.0;
  double vad_ms = 0.0;
  double rtf_ms = 0.0;
  double beamform_ms = 0.0;
  double postfilter_ms = 0.0;
};

struct BlockDiagnostics {
  Index first_frame = 0;
  Index frames = 0;
  std::vector<Index> active_channels;
  Index ref_channel = 0;
  bool passthrough = false;     // fewer than two channels survived
  bool ref_reassigned = false;  // the configured reference failed
  Index rtf_fallback_bins = 0;
  Index beam_fallback_bins = 0;
  StageTimings timings;
};

struct BlockResult {
  Eigen::MatrixXcd enhanced;  // bins x block frames
  BlockDiagnostics diagnostics;
  Mask vad_mask;              // mask driving GEV and the post-filter
  std::optional<RtfSet> rtf;
};

/// Enhances one block with no state carried over from other blocks.
BlockResult process_block(const MultichannelSignal& block, const PipelineConfig& cfg,
                          const VadInputs& vad = {});

struct BlockSpan {
  Index first_frame = 0;
  Index frames = 0;
};

/// Consecutive non-overlapping frame ranges covering [0, total_frames). A trailing
/// remainder shorter than min_frames joins the previous block.
std::vector<BlockSpan> partition_blocks(Index total_frames, std::optional<Index> block_frames,
                                        Index min_frames);

struct RunResult {
  MultichannelSignal output;  // one channel, length span_samples(total frames)
  Eigen::MatrixXcd spectrum;  // enhanced STFT of the whole recording
  std::vector<BlockDiagnostics> blocks;
};

RunResult run(const MultichannelSignal& signal, const PipelineConfig& cfg, const VadInputs& vad = {});

/// Per-block active channels (1-based), fallback counts and timings.
std::string diagnostics_json(const RunResult& result);

const char* to_string(BeamMethod m);
const char* to_string(PostfilterKind k);
const char* to_string(VadMode v);

}  // namespace rtfbeam
