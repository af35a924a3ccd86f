#include "rtfbeam/pipeline.hpp"

#include "rtfbeam/error.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>

namespace rtfbeam {

const char* to_string(BeamMethod m) {
  switch (m) {
    case BeamMethod::irtf: return "irtf";
    case BeamMethod::mvdr: return "mvdr";
    case BeamMethod::gev: return "gev";
  }
  return "?";
}

const char* to_string(PostfilterKind k) {
  switch (k) {
    case PostfilterKind::none: return "none";
    case PostfilterKind::wiener: return "wiener";
    case PostfilterKind::ban: return "ban";
  }
  return "?";
}

const char* to_string(VadMode v) {
  switch (v) {
    case VadMode::none: return "none";
    case VadMode::oracle: return "oracle";
    case VadMode::network: return "network";
  }
  return "?";
}

void PipelineConfig::validate() const {
  stft.validate();
  post.validate(stft.sample_rate);
  if (rtf.sub_block_len < 1) {
    throw ConfigError("sub-block length must be positive");
  }
  if (block_frames && *block_frames < 2 * rtf.sub_block_len) {
    throw ConfigError("a block of " + std::to_string(*block_frames) +
                      " frames is shorter than two sub-blocks of " + std::to_string(rtf.sub_block_len));
  }
  if (ref_channel < 0) {
    throw ConfigError("reference channel must be non-negative");
  }
  if (!(t_mu >= 0.0 && t_mu <= 1.0)) {
    throw ConfigError("t_mu must lie in [0, 1]");
  }
  if (!allow_any_pairing) {
    const bool gev = beamformer == BeamMethod::gev;
    if (gev && postfilter == PostfilterKind::wiener) {
      throw ConfigError("gev pairs with postfilter none or ban");
    }
    if (!gev && postfilter == PostfilterKind::ban) {
      throw ConfigError("irtf and mvdr pair with postfilter none or wiener");
    }
  }
  if (beamformer == BeamMethod::gev && vad == VadMode::none) {
    throw ConfigError("gev needs a VAD mask (oracle or network)");
  }
}

Index block_frames_from_ms(double ms, const StftConfig& stft) {
  return static_cast<Index>(std::llround(ms * stft.sample_rate / (1000.0 * static_cast<double>(stft.hop))));
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

void check_stems(const MultichannelSignal& block, const MultichannelSignal* stem, const char* what) {
  if (stem == nullptr) {
    throw ConfigError(std::string("oracle VAD needs the ") + what + " stems");
  }
  if (stem->channel_count() != block.channel_count() || stem->length() != block.length()) {
    throw SizeError(std::string(what) + " stems do not match the mixture shape");
  }
}

}  // namespace

BlockResult process_block(const MultichannelSignal& block, const PipelineConfig& cfg, const VadInputs& vad) {
  cfg.validate();
  if (block.sample_rate != cfg.stft.sample_rate) {
    throw ConfigError("block sample rate " + std::to_string(block.sample_rate) + " differs from the STFT rate");
  }
  if (cfg.ref_channel >= block.channel_count()) {
    throw ConfigError("reference channel " + std::to_string(cfg.ref_channel + 1) + " does not exist");
  }
  const Index frames = cfg.stft.frame_count(block.length());
  if (frames < 2 * cfg.rtf.sub_block_len) {
    throw SizeError("block yields " + std::to_string(frames) + " frames, need at least " +
                    std::to_string(2 * cfg.rtf.sub_block_len));
  }

  BlockResult result;
  BlockDiagnostics& diag = result.diagnostics;
  diag.frames = frames;

  // 1. Microphone failures.
  auto t0 = Clock::now();
  std::vector<Index> active;
  if (block.channel_count() >= 2) {
    active = detect_failures(block, cfg.t_mu).active_channels();
  } else {
    active = {0};
  }
  Index ref = cfg.ref_channel;
  if (std::find(active.begin(), active.end(), ref) == active.end()) {
    diag.ref_reassigned = !active.empty();
    ref = active.empty() ? cfg.ref_channel : active.front();
  }
  diag.active_channels = active;
  diag.ref_channel = ref;
  diag.timings.detect_ms = elapsed_ms(t0);

  // 2. STFT.
  t0 = Clock::now();
  const Spectrogram spec = analyze(block, cfg.stft);
  diag.timings.stft_ms = elapsed_ms(t0);
  const Index bins = spec.bins();

  if (active.size() < 2) {
    diag.passthrough = true;
    result.enhanced = spec.channel(ref);
    result.vad_mask = unit_mask(bins, frames);
    return result;
  }
  const auto ref_it = std::find(active.begin(), active.end(), ref);
  const Index ref_column = static_cast<Index>(ref_it - active.begin());

  // 3. Per-channel VAD masks, optionally pooled.
  t0 = Clock::now();
  std::vector<Mask> masks(static_cast<std::size_t>(block.channel_count()), unit_mask(bins, frames));
  if (cfg.vad == VadMode::oracle) {
    check_stems(block, vad.clean, "clean");
    check_stems(block, vad.noise, "noise");
    const Spectrogram clean = analyze(vad.clean->select_channels(active), cfg.stft);
    const Spectrogram noise = analyze(vad.noise->select_channels(active), cfg.stft);
    for (std::size_t c = 0; c < active.size(); ++c) {
      const auto i = static_cast<Index>(c);
      masks[static_cast<std::size_t>(active[c])] = oracle_ibm(clean.channel(i), noise.channel(i), cfg.t_snr_db);
    }
  } else if (cfg.vad == VadMode::network) {
    if (vad.network == nullptr) {
      throw ConfigError("network VAD needs weights");
    }
    for (Index ch : active) {
      masks[static_cast<std::size_t>(ch)] = infer_mask(*vad.network, spec.channel(ch));
    }
  }
  std::optional<Mask> pooled;
  if (cfg.pooling == Pooling::median && cfg.vad != VadMode::none) {
    std::vector<Mask> active_masks;
    for (Index ch : active) {
      active_masks.push_back(masks[static_cast<std::size_t>(ch)]);
    }
    pooled = pool_median(active_masks);
  }
  result.vad_mask = pooled ? *pooled : masks[static_cast<std::size_t>(ref)];
  diag.timings.vad_ms = elapsed_ms(t0);

  // 4. RTFs, needed by every beamformer except plain GEV.
  const bool need_noise = cfg.beamformer == BeamMethod::mvdr || cfg.postfilter == PostfilterKind::wiener;
  const bool need_rtf = cfg.beamformer != BeamMethod::gev || need_noise;
  t0 = Clock::now();
  if (need_rtf) {
    const std::span<const Mask> rtf_masks =
        pooled ? std::span<const Mask>(&*pooled, 1) : std::span<const Mask>(masks);
    result.rtf = build_rtf_set(spec, active, ref, rtf_masks, cfg.rtf);
    diag.rtf_fallback_bins = result.rtf->fallback_bins;
  }
  diag.timings.rtf_ms = elapsed_ms(t0);

  // 5. Beamforming.
  t0 = Clock::now();
  std::optional<NoiseEstimate> noise;
  if (need_noise) {
    noise = estimate_noise(spec, *result.rtf, cfg.noise_loading);
  }
  BeamWeights weights;
  switch (cfg.beamformer) {
    case BeamMethod::irtf:
      weights = irtf_weights(*result.rtf);
      break;
    case BeamMethod::mvdr:
      weights = mvdr_weights(noise->cov, *result.rtf);
      break;
    case BeamMethod::gev:
      weights = gev_weights(spec, active, ref_column, result.vad_mask);
      break;
  }
  if (cfg.postfilter != PostfilterKind::ban) {
    weights.ban_gain.reset();
  } else if (!weights.ban_gain) {
    // BAN is only defined for GEV weights; elsewhere it is unity.
    weights.ban_gain = Eigen::VectorXd::Ones(bins);
  }
  diag.beam_fallback_bins = weights.fallback_count();
  Eigen::MatrixXcd u = apply(weights, spec);
  diag.timings.beamform_ms = elapsed_ms(t0);

  // 6. Post-filter.
  t0 = Clock::now();
  if (cfg.postfilter == PostfilterKind::wiener) {
    const Eigen::MatrixXcd r = residual_noise(weights, noise->y_hat);
    const Mask* vad_mask = cfg.vad == VadMode::none ? nullptr : &result.vad_mask;
    u = apply_postfilter(u, wiener_mask(u, r, vad_mask, cfg.post, cfg.stft));
  }
  diag.timings.postfilter_ms = elapsed_ms(t0);

  result.enhanced = std::move(u);
  return result;
}

std::vector<BlockSpan> partition_blocks(Index total_frames, std::optional<Index> block_frames, Index min_frames) {
  if (total_frames < min_frames) {
    throw SizeError("recording yields " + std::to_string(total_frames) + " frames, need at least " +
                    std::to_string(min_frames));
  }
  if (!block_frames) {
    return {BlockSpan{0, total_frames}};
  }
  const Index f = *block_frames;
  if (f < 1) {
    throw ConfigError("block length must be positive");
  }
  if (total_frames < f) {
    throw SizeError("recording of " + std::to_string(total_frames) + " frames is shorter than one block of " +
                    std::to_string(f));
  }
  std::vector<BlockSpan> spans;
  for (Index start = 0; start < total_frames; start += f) {
    spans.push_back(BlockSpan{start, std::min(f, total_frames - start)});
  }
  if (spans.size() > 1 && spans.back().frames < min_frames) {
    const Index tail = spans.back().frames;
    spans.pop_back();
    spans.back().frames += tail;
  }
  return spans;
}

RunResult run(const MultichannelSignal& signal, const PipelineConfig& cfg, const VadInputs& vad) {
  cfg.validate();
  if (signal.sample_rate != 16000 || cfg.stft.sample_rate != 16000) {
    throw ConfigError("only 16 kHz input is supported (got " + std::to_string(signal.sample_rate) + " Hz)");
  }
  if (cfg.vad == VadMode::oracle) {
    check_stems(signal, vad.clean, "clean");
    check_stems(signal, vad.noise, "noise");
  }
  const StftConfig& stft = cfg.stft;
  const Index total = stft.frame_count(signal.length());
  const std::vector<BlockSpan> spans = partition_blocks(total, cfg.block_frames, 2 * cfg.rtf.sub_block_len);
  if (!cfg.dump_dir.empty()) {
    std::filesystem::create_directories(cfg.dump_dir);
  }

  RunResult out;
  out.spectrum = Eigen::MatrixXcd::Zero(stft.bins(), total);
  for (std::size_t b = 0; b < spans.size(); ++b) {
    const BlockSpan& span = spans[b];
    const Index start = span.first_frame * stft.hop;
    const Index count = stft.span_samples(span.frames);
    const MultichannelSignal block = signal.slice(start, count);
    std::optional<MultichannelSignal> clean;
    std::optional<MultichannelSignal> noise;
    VadInputs block_vad{nullptr, nullptr, vad.network};
    if (cfg.vad == VadMode::oracle) {
      clean = vad.clean->slice(start, count);
      noise = vad.noise->slice(start, count);
      block_vad.clean = &*clean;
      block_vad.noise = &*noise;
    }
    BlockResult res = process_block(block, cfg, block_vad);
    res.diagnostics.first_frame = span.first_frame;
    out.spectrum.middleCols(span.first_frame, span.frames) = res.enhanced;
    if (!cfg.dump_dir.empty()) {
      const std::string stem = "block" + std::to_string(b);
      write_mask_csv(res.vad_mask, cfg.dump_dir / (stem + "_mask.csv"));
      if (res.rtf) {
        write_rtf_csv(*res.rtf, cfg.dump_dir / (stem + "_rtf.csv"));
      }
    }
    out.blocks.push_back(std::move(res.diagnostics));
  }
  out.output = synthesize(Spectrogram({out.spectrum}, stft));
  return out;
}

std::string diagnostics_json(const RunResult& result) {
  using nlohmann::json;
  json blocks = json::array();
  for (const BlockDiagnostics& d : result.blocks) {
    json active = json::array();
    for (Index ch : d.active_channels) {
      active.push_back(ch + 1);
    }
    blocks.push_back({
        {"first_frame", d.first_frame},
        {"frames", d.frames},
        {"active_channels", std::move(active)},
        {"ref_channel", d.ref_channel + 1},
        {"passthrough", d.passthrough},
        {"ref_reassigned", d.ref_reassigned},
        {"rtf_fallback_bins", d.rtf_fallback_bins},
        {"beam_fallback_bins", d.beam_fallback_bins},
        {"timings_ms",
         {{"detect", d.timings.detect_ms},
          {"stft", d.timings.stft_ms},
          {"vad", d.timings.vad_ms},
          {"rtf", d.timings.rtf_ms},
          {"beamform", d.timings.beamform_ms},
          {"postfilter", d.timings.postfilter_ms}}},
    });
  }
  Index passthrough = 0;
  Index rtf_fb = 0;
  Index beam_fb = 0;
  for (const BlockDiagnostics& d : result.blocks) {
    passthrough += d.passthrough ? 1 : 0;
    rtf_fb += d.rtf_fallback_bins;
    beam_fb += d.beam_fallback_bins;
  }
  json doc = {{"blocks", std::move(blocks)},
              {"summary",
               {{"block_count", result.blocks.size()},
                {"passthrough_blocks", passthrough},
                {"rtf_fallback_bins", rtf_fb},
                {"beam_fallback_bins", beam_fb}}}};
  return doc.dump(2);
}

}  // namespace rtfbeam
