#pragma once

#include "rtfbeam/evalsim.hpp"
#include "rtfbeam/signal_io.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace rtfbeam {

/// Everything needed to reproduce a simulated mixture. Mirrors the JSON accepted by
/// `rtfbeam simulate --config`.
struct ScenarioConfig {
  Index channels = 4;
  int sample_rate = 16000;
  double duration_s = 4.0;
  double snr_db = 5.0;
  std::uint64_t seed = 1;
  Index ref_channel = 0;

  std::filesystem::path source_path;  // empty: synthetic speech
  NoiseKind noise = NoiseKind::pink;
  std::filesystem::path noise_path;  // required for recorded noise
  std::vector<std::vector<Index>> noise_sources = {{0, 6, 12, 18}, {18, 11, 5, 0}};
  double sensor_level = 0.5;

  bool moving = false;
  std::vector<std::vector<Index>> positions = {{0, 2, 4, 6}};  // per position, per-channel delay
  double segment_s = 0.8;
  bool echoes = true;
};

ScenarioConfig parse_scenario(std::string_view json_text);
ScenarioConfig load_scenario(const std::filesystem::path& path);

Mixture build_mixture(const ScenarioConfig& cfg, Index frame_len = 512, Index hop = 128);

/// {"ref_channel", "frame_len", "segments": [{"start_sample", "real", "imag"}]}, bins x channels.
std::string rtf_json(const Mixture& mix, Index ref_channel, Index frame_len);

}  // namespace rtfbeam
