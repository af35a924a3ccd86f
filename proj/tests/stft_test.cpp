#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "rtfbeam/error.hpp"
#include "rtfbeam/stft.hpp"

using namespace rtfbeam;

namespace {

MultichannelSignal random_signal(Index channels, Index length, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd x(channels, length);
  for (Index i = 0; i < x.size(); ++i) x(i) = n(rng);
  return {x, 16000};
}

// Direct O(N^2) DFT of one windowed frame, bins 0..N/2.
Eigen::VectorXcd naive_frame_dft(const Eigen::VectorXd& frame) {
  const Index n = frame.size();
  Eigen::VectorXcd out(n / 2 + 1);
  for (Index k = 0; k <= n / 2; ++k) {
    std::complex<double> acc = 0.0;
    for (Index t = 0; t < n; ++t) {
      acc += frame(t) * std::polar(1.0, -2.0 * std::numbers::pi * double(k * t) / double(n));
    }
    out(k) = acc;
  }
  return out;
}

}  // namespace

TEST(Stft, HammingIsPeriodic) {
  const Eigen::VectorXd w = hamming_window(512);
  EXPECT_NEAR(w(0), 0.08, 1e-15);
  EXPECT_NEAR(w(256), 1.0, 1e-15);
  // periodic: symmetric around n/2, not around (n-1)/2
  for (Index t = 1; t < 256; ++t) EXPECT_NEAR(w(t), w(512 - t), 1e-14);
}

TEST(Stft, FrameCountForOneSecond) {
  StftConfig cfg;
  EXPECT_EQ(cfg.frame_count(16000), 122);
  EXPECT_EQ(cfg.frame_count(511), 0);
  EXPECT_EQ(cfg.frame_count(512), 1);
  EXPECT_EQ(cfg.bins(), 257);
  EXPECT_EQ(cfg.span_samples(122), 121 * 128 + 512);
  const Spectrogram s = analyze(random_signal(2, 16000, 3), cfg);
  EXPECT_EQ(s.frames(), 122);
  EXPECT_EQ(s.bins(), 257);
  EXPECT_EQ(s.channel_count(), 2);
}

TEST(Stft, MatchesDirectDft) {
  StftConfig cfg;
  const MultichannelSignal x = random_signal(1, 2048, 5);
  const Spectrogram s = analyze(x, cfg);
  const Eigen::VectorXd w = hamming_window(512);
  for (Index l : {0, 3, 12}) {
    const Eigen::VectorXd frame = x.samples.row(0).segment(l * 128, 512).transpose().cwiseProduct(w);
    const Eigen::VectorXcd ref = naive_frame_dft(frame);
    EXPECT_LT((s.channel(0).col(l) - ref).norm(), 1e-9 * ref.norm());
  }
}

TEST(Stft, SinusoidPeaksAtItsBin) {
  StftConfig cfg;
  Eigen::MatrixXd x(1, 4096);
  const Index k0 = 40;  // 1250 Hz
  for (Index t = 0; t < x.cols(); ++t) x(0, t) = std::cos(2.0 * std::numbers::pi * k0 * t / 512.0);
  const Spectrogram s = analyze({x, 16000}, cfg);
  for (Index l = 0; l < s.frames(); ++l) {
    Index arg = 0;
    s.channel(0).col(l).cwiseAbs().maxCoeff(&arg);
    EXPECT_EQ(arg, k0);
    // coherent gain of the window is sum(w)/2 for a unit cosine
    EXPECT_NEAR(std::abs(s.channel(0)(k0, l)), hamming_window(512).sum() / 2.0, 1e-8);
  }
}

TEST(Stft, RoundTripInterior) {
  StftConfig cfg;
  const MultichannelSignal x = random_signal(4, 32000, 11);
  const MultichannelSignal y = synthesize(analyze(x, cfg));
  ASSERT_EQ(y.length(), cfg.span_samples(cfg.frame_count(32000)));
  const Index a = 512, b = y.length() - 512;
  const Eigen::MatrixXd d = y.samples.middleCols(a, b - a) - x.samples.middleCols(a, b - a);
  EXPECT_LT(d.norm() / x.samples.middleCols(a, b - a).norm(), 1e-10);
}

TEST(Stft, RoundTripEdgesStayFinite) {
  StftConfig cfg;
  const MultichannelSignal x = random_signal(1, 600, 2);
  const MultichannelSignal y = synthesize(analyze(x, cfg));
  EXPECT_EQ(y.length(), 512);
  EXPECT_TRUE(y.samples.allFinite());
  // even the very first sample, where the window is small, is recovered
  EXPECT_NEAR(y.samples(0, 0), x.samples(0, 0), 1e-9);
}

TEST(Stft, ParsevalPerFrame) {
  StftConfig cfg;
  const MultichannelSignal x = random_signal(1, 4096, 8);
  const Spectrogram s = analyze(x, cfg);
  const Eigen::VectorXd w = hamming_window(512);
  for (Index l = 0; l < s.frames(); l += 5) {
    const double time = x.samples.row(0).segment(l * 128, 512).transpose().cwiseProduct(w).squaredNorm();
    const Eigen::VectorXcd c = s.channel(0).col(l);
    double freq = std::norm(c(0)) + std::norm(c(256));
    for (Index k = 1; k < 256; ++k) freq += 2.0 * std::norm(c(k));
    EXPECT_NEAR(freq / 512.0, time, 1e-9 * time);
  }
}

TEST(Stft, Linearity) {
  StftConfig cfg;
  const MultichannelSignal a = random_signal(2, 3000, 1), b = random_signal(2, 3000, 2);
  const Spectrogram sa = analyze(a, cfg), sb = analyze(b, cfg);
  const Spectrogram sc = analyze({2.0 * a.samples - 0.5 * b.samples, 16000}, cfg);
  for (Index m = 0; m < 2; ++m) {
    EXPECT_LT((sc.channel(m) - (2.0 * sa.channel(m) - 0.5 * sb.channel(m))).norm(), 1e-9 * sc.channel(m).norm());
  }
}

TEST(Stft, SnapshotAndBinMatrix) {
  const Spectrogram s = analyze(random_signal(3, 2000, 4), StftConfig{});
  const Eigen::VectorXcd v = s.snapshot(7, 2);
  for (Index m = 0; m < 3; ++m) EXPECT_EQ(v(m), s.channel(m)(7, 2));
  const Eigen::MatrixXcd b = s.bin_matrix(7, {2, 0});
  EXPECT_EQ(b.rows(), 2);
  EXPECT_EQ(b(0, 2), s.channel(2)(7, 2));
  EXPECT_EQ(b(1, 2), s.channel(0)(7, 2));
}

TEST(Stft, Errors) {
  EXPECT_THROW(analyze(random_signal(1, 400, 1), StftConfig{}), SizeError);
  StftConfig odd;
  odd.frame_len = 511;
  EXPECT_THROW(odd.validate(), ConfigError);
  StftConfig hop;
  hop.hop = 0;
  EXPECT_THROW(hop.validate(), ConfigError);
  hop.hop = 513;
  EXPECT_THROW(hop.validate(), ConfigError);
  EXPECT_THROW(Spectrogram({Eigen::MatrixXcd::Zero(256, 3)}, StftConfig{}), SizeError);
}
