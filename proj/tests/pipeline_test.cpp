#include <filesystem>

#include <gtest/gtest.h>

#include "rtfbeam/error.hpp"
#include "rtfbeam/pipeline.hpp"
#include "support.hpp"

using namespace rtfbeam;
using namespace rtfbeam::testing;

namespace {

PipelineConfig config(BeamMethod bf, PostfilterKind pf, VadMode vad, std::optional<Index> block = 100) {
  PipelineConfig cfg;
  cfg.beamformer = bf;
  cfg.postfilter = pf;
  cfg.vad = vad;
  cfg.block_frames = block;
  return cfg;
}

const Mixture& shared_mixture() {
  static const Mixture mix = build_mixture(scene_config(5.0, 1, true, NoiseKind::pink, 2.0));
  return mix;
}

}  // namespace

TEST(Pipeline, BlockFramesFromMilliseconds) {
  const StftConfig stft;
  EXPECT_EQ(block_frames_from_ms(250, stft), 31);
  EXPECT_EQ(block_frames_from_ms(400, stft), 50);
  EXPECT_EQ(block_frames_from_ms(800, stft), 100);
  EXPECT_EQ(block_frames_from_ms(2000, stft), 250);
}

TEST(Pipeline, Partition) {
  const StftConfig stft;
  const Index four_seconds = stft.frame_count(64000);
  EXPECT_EQ(partition_blocks(four_seconds, 100, 20).size(), 5u);
  const auto merged = partition_blocks(115, 100, 20);
  ASSERT_EQ(merged.size(), 1u);
  EXPECT_EQ(merged[0].frames, 115);
  const auto kept = partition_blocks(125, 100, 20);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[1].first_frame, 100);
  EXPECT_EQ(kept[1].frames, 25);
  const auto batch = partition_blocks(497, std::nullopt, 20);
  ASSERT_EQ(batch.size(), 1u);
  EXPECT_EQ(batch[0].frames, 497);
  EXPECT_THROW(partition_blocks(19, std::nullopt, 20), SizeError);
  EXPECT_THROW(partition_blocks(90, 100, 20), SizeError);
  EXPECT_THROW(partition_blocks(90, 0, 20), ConfigError);
}

TEST(Pipeline, ConfigValidation) {
  EXPECT_NO_THROW(config(BeamMethod::irtf, PostfilterKind::wiener, VadMode::none).validate());
  EXPECT_NO_THROW(config(BeamMethod::gev, PostfilterKind::ban, VadMode::oracle).validate());
  EXPECT_THROW(config(BeamMethod::gev, PostfilterKind::wiener, VadMode::oracle).validate(), ConfigError);
  EXPECT_THROW(config(BeamMethod::mvdr, PostfilterKind::ban, VadMode::oracle).validate(), ConfigError);
  EXPECT_THROW(config(BeamMethod::gev, PostfilterKind::ban, VadMode::none).validate(), ConfigError);
  PipelineConfig any = config(BeamMethod::mvdr, PostfilterKind::ban, VadMode::oracle);
  any.allow_any_pairing = true;
  EXPECT_NO_THROW(any.validate());
  EXPECT_THROW(config(BeamMethod::irtf, PostfilterKind::none, VadMode::none, 19).validate(), ConfigError);
  PipelineConfig mu = config(BeamMethod::irtf, PostfilterKind::none, VadMode::none);
  mu.t_mu = 2.0;
  EXPECT_THROW(mu.validate(), ConfigError);
}

TEST(Pipeline, NoiseFreeGainOnlyChainIsTransparent) {
  const MultichannelSignal s = synth_speech(32000, 16000, 4);
  Eigen::MatrixXd x(3, s.length());
  x.row(0) = s.samples.row(0);
  x.row(1) = 0.5 * s.samples.row(0);
  x.row(2) = -1.5 * s.samples.row(0);
  const MultichannelSignal mix(x, 16000);
  for (BeamMethod bf : {BeamMethod::irtf, BeamMethod::mvdr}) {
    const RunResult r = run(mix, config(bf, PostfilterKind::none, VadMode::none));
    const Index a = 512, n = r.output.length() - 1024;
    const double err = (r.output.samples.row(0).segment(a, n) - x.row(0).segment(a, n)).squaredNorm();
    EXPECT_LT(10.0 * std::log10(err / x.row(0).segment(a, n).squaredNorm()), -60.0) << to_string(bf);
  }
}

TEST(Pipeline, NoiseOnlyBlockIsAttenuated) {
  const Mixture& mix = shared_mixture();
  const MultichannelSignal noise = mix.noise;
  const MultichannelSignal silent(Eigen::MatrixXd::Zero(noise.channel_count(), noise.length()), 16000);
  const VadInputs vad{&silent, &noise, nullptr};
  const RunResult r = run(noise, config(BeamMethod::mvdr, PostfilterKind::wiener, VadMode::oracle), vad);
  const Index n = r.output.length();
  EXPECT_LE(r.output.samples.row(0).squaredNorm(), noise.samples.row(0).head(n).squaredNorm());
}

TEST(Pipeline, Deterministic) {
  const Mixture& mix = shared_mixture();
  const VadInputs vad{&mix.clean, &mix.noise, nullptr};
  for (auto [bf, pf] : {std::pair{BeamMethod::mvdr, PostfilterKind::wiener}, {BeamMethod::gev, PostfilterKind::ban}}) {
    const PipelineConfig cfg = config(bf, pf, VadMode::oracle, 31);
    const RunResult a = run(mix.mixture, cfg, vad);
    const RunResult b = run(mix.mixture, cfg, vad);
    EXPECT_TRUE((a.output.samples.array() == b.output.samples.array()).all());
  }
}

TEST(Pipeline, BlocksAreIndependent) {
  const Mixture& mix = shared_mixture();
  const VadInputs vad{&mix.clean, &mix.noise, nullptr};
  const StftConfig stft;
  for (BeamMethod bf : {BeamMethod::irtf, BeamMethod::mvdr, BeamMethod::gev}) {
    const PipelineConfig cfg =
        config(bf, bf == BeamMethod::gev ? PostfilterKind::ban : PostfilterKind::wiener, VadMode::oracle, 50);
    const RunResult joint = run(mix.mixture, cfg, vad);
    ASSERT_GE(joint.blocks.size(), 3u);
    for (std::size_t b = 1; b < 3; ++b) {
      const BlockDiagnostics& d = joint.blocks[b];
      const Index start = d.first_frame * stft.hop, count = stft.span_samples(d.frames);
      const MultichannelSignal clean = mix.clean.slice(start, count), noise = mix.noise.slice(start, count);
      const BlockResult alone = process_block(mix.mixture.slice(start, count), cfg, {&clean, &noise, nullptr});
      EXPECT_TRUE((alone.enhanced.array() == joint.spectrum.middleCols(d.first_frame, d.frames).array()).all())
          << to_string(bf) << " block " << b;
    }
  }
}

TEST(Pipeline, FailedChannelsAreExcluded) {
  const Mixture& mix = shared_mixture();
  Eigen::MatrixXd x = mix.mixture.samples;
  x.row(0).setZero();  // reference channel dead
  const RunResult r = run({x, 16000}, config(BeamMethod::mvdr, PostfilterKind::wiener, VadMode::none));
  for (const BlockDiagnostics& d : r.blocks) {
    ASSERT_FALSE(d.active_channels.empty());
    EXPECT_EQ(std::count(d.active_channels.begin(), d.active_channels.end(), 0), 0);
    EXPECT_TRUE(d.ref_reassigned);
    EXPECT_EQ(d.ref_channel, d.active_channels.front());
  }
  EXPECT_TRUE(r.output.samples.allFinite());
  EXPECT_NE(diagnostics_json(r).find("\"ref_reassigned\": true"), std::string::npos);
}

TEST(Pipeline, SingleSurvivorPassesThrough) {
  const Mixture& mix = shared_mixture();
  Eigen::MatrixXd x = mix.mixture.samples;
  x.bottomRows(3).setZero();
  const BlockResult r =
      process_block(MultichannelSignal(x, 16000).slice(0, 13184), config(BeamMethod::irtf, PostfilterKind::wiener, VadMode::none));
  EXPECT_TRUE(r.diagnostics.passthrough);
  EXPECT_EQ(r.enhanced, analyze(MultichannelSignal(x, 16000).slice(0, 13184), StftConfig{}).channel(0));
}

TEST(Pipeline, InputErrors) {
  const Mixture& mix = shared_mixture();
  EXPECT_THROW(run(mix.mixture, config(BeamMethod::mvdr, PostfilterKind::wiener, VadMode::oracle)), ConfigError);
  EXPECT_THROW(run(mix.mixture, config(BeamMethod::mvdr, PostfilterKind::wiener, VadMode::network)), ConfigError);
  EXPECT_THROW(run({mix.mixture.samples, 8000}, config(BeamMethod::mvdr, PostfilterKind::wiener, VadMode::none)),
               ConfigError);
  PipelineConfig ref = config(BeamMethod::mvdr, PostfilterKind::wiener, VadMode::none);
  ref.ref_channel = 7;
  EXPECT_THROW(run(mix.mixture, ref), ConfigError);
  EXPECT_THROW(run(mix.mixture.slice(0, 2000), config(BeamMethod::irtf, PostfilterKind::none, VadMode::none)),
               SizeError);
}

TEST(Pipeline, DumpsPerBlockFiles) {
  const Mixture& mix = shared_mixture();
  PipelineConfig cfg = config(BeamMethod::irtf, PostfilterKind::wiener, VadMode::none);
  cfg.dump_dir = std::filesystem::temp_directory_path() / "rtfbeam_dump_test";
  std::filesystem::remove_all(cfg.dump_dir);
  const RunResult r = run(mix.mixture, cfg);
  for (std::size_t b = 0; b < r.blocks.size(); ++b) {
    EXPECT_TRUE(std::filesystem::exists(cfg.dump_dir / ("block" + std::to_string(b) + "_mask.csv")));
    EXPECT_TRUE(std::filesystem::exists(cfg.dump_dir / ("block" + std::to_string(b) + "_rtf.csv")));
  }
}

TEST(Pipeline, BatchIsOneBlock) {
  const Mixture& mix = shared_mixture();
  const RunResult r = run(mix.mixture, config(BeamMethod::irtf, PostfilterKind::wiener, VadMode::none, std::nullopt));
  ASSERT_EQ(r.blocks.size(), 1u);
  EXPECT_EQ(r.blocks[0].frames, StftConfig{}.frame_count(mix.mixture.length()));
  EXPECT_EQ(r.output.length(), StftConfig{}.span_samples(r.blocks[0].frames));
}
