#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "rtfbeam/error.hpp"
#include "rtfbeam/rtf.hpp"
#include "rtfbeam/stft.hpp"
#include "rtfbeam/vad.hpp"
#include "support.hpp"

using namespace rtfbeam;
using namespace rtfbeam::testing;

namespace {

Spectrogram spectrogram_of(const Eigen::MatrixXd& x) { return analyze({x, 16000}, StftConfig{}); }

// Amplitude-modulated noise so sub-block PSDs vary.
Eigen::RowVectorXd nonstationary(Index length, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::RowVectorXd s(length);
  for (Index t = 0; t < length; ++t) s(t) = n(rng) * (1.1 + std::sin(double(t) / 900.0));
  return s;
}

// Generic complex least squares on [auto 1] [g c]^T = cross via the normal equations.
std::complex<double> normal_equations(const Eigen::VectorXcd& cross, const Eigen::VectorXd& autos) {
  const Index n = cross.size();
  Eigen::MatrixXcd a(n, 2);
  a.col(0) = autos.cast<std::complex<double>>();
  a.col(1).setOnes();
  const Eigen::MatrixXcd ata = a.adjoint() * a;
  const Eigen::VectorXcd atb = a.adjoint() * cross;
  return ata.fullPivLu().solve(atb)(0);
}

}  // namespace

TEST(Rtf, IdenticalChannelsGiveEqualPsds) {
  const Eigen::RowVectorXd s = nonstationary(8000, 1);
  Eigen::MatrixXd x(2, 8000);
  x << s, s;
  const Spectrogram spec = spectrogram_of(x);
  const SubblockPsd psd = compute_subblock_psd(spec, 0, 1, unit_mask(spec.bins(), spec.frames()), 10);
  EXPECT_LT((psd.cross - psd.auto_psd.cast<std::complex<double>>()).norm(), 1e-12 * psd.auto_psd.norm());
  const SubblockPsd zero = compute_subblock_psd(spec, 0, 1, Mask{Eigen::MatrixXd::Zero(spec.bins(), spec.frames())}, 10);
  EXPECT_EQ(zero.cross.norm(), 0.0);
  EXPECT_EQ(zero.auto_psd.norm(), 0.0);
}

TEST(Rtf, SubBlockCounts) {
  StftConfig cfg;
  for (auto [frames, n] : {std::pair{31, 3}, {50, 5}, {100, 10}, {250, 25}}) {
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(2, cfg.span_samples(frames));
    const Spectrogram spec = spectrogram_of(x);
    ASSERT_EQ(spec.frames(), frames);
    EXPECT_EQ(compute_subblock_psd(spec, 0, 1, unit_mask(spec.bins(), frames), 10).sub_block_count(), n);
  }
  const Spectrogram tiny = spectrogram_of(Eigen::MatrixXd::Random(2, cfg.span_samples(19)));
  EXPECT_THROW(compute_subblock_psd(tiny, 0, 1, unit_mask(257, 19), 10), SizeError);
  EXPECT_THROW(compute_subblock_psd(tiny, 0, 1, unit_mask(257, 18), 10), SizeError);
  EXPECT_THROW(compute_subblock_psd(tiny, 0, 1, unit_mask(257, 19), 0), ConfigError);
}

TEST(Rtf, ExactProportionality) {
  const Eigen::RowVectorXd s = nonstationary(16000, 2);
  Eigen::MatrixXd x(2, 16000);
  x << 2.0 * s, s;
  const Spectrogram spec = spectrogram_of(x);
  const InverseRtfEstimate e =
      estimate_rtf_inverse(compute_subblock_psd(spec, 0, 1, unit_mask(spec.bins(), spec.frames()), 10));
  for (Index k = 0; k < spec.bins(); ++k) EXPECT_NEAR(std::abs(e.g_inv(k) - 2.0), 0.0, 1e-9);
  EXPECT_EQ(e.fallback_count(), 0);
}

TEST(Rtf, ClosedFormMatchesNormalEquations) {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<Index> count(2, 25);
  std::uniform_real_distribution<double> u(0.1, 5.0);
  for (int trial = 0; trial < 300; ++trial) {
    const Index n = count(rng);
    SubblockPsd psd;
    psd.sub_block_len = 10;
    psd.cross = random_complex(1, n, rng);
    psd.auto_psd.resize(1, n);
    for (Index i = 0; i < n; ++i) psd.auto_psd(0, i) = u(rng);
    const std::complex<double> ref = normal_equations(psd.cross.row(0).transpose(), psd.auto_psd.row(0).transpose());
    const InverseRtfEstimate e = estimate_rtf_inverse(psd);
    EXPECT_LT(std::abs(e.g_inv(0) - ref), 1e-10 * std::max(1.0, std::abs(ref))) << "trial " << trial;
  }
}

TEST(Rtf, VarianceGuardFallsBackToRatio) {
  SubblockPsd psd;
  psd.sub_block_len = 10;
  psd.cross = Eigen::MatrixXcd(2, 3);
  psd.auto_psd = Eigen::MatrixXd(2, 3);
  psd.cross << std::complex<double>(1, 1), std::complex<double>(3, 1), std::complex<double>(2, 1), 0.0, 0.0, 0.0;
  psd.auto_psd << 2.0, 2.0, 2.0, 0.0, 0.0, 0.0;
  const InverseRtfEstimate e = estimate_rtf_inverse(psd);
  EXPECT_TRUE(e.fallback[0]);
  EXPECT_NEAR(std::abs(e.g_inv(0) - std::complex<double>(1.0, 0.5)), 0.0, 1e-15);
  EXPECT_TRUE(e.fallback[1]);
  EXPECT_EQ(e.g_inv(1), std::complex<double>(1.0, 0.0));
  psd.cross.conservativeResize(2, 1);
  psd.auto_psd.conservativeResize(2, 1);
  EXPECT_THROW(estimate_rtf_inverse(psd), SizeError);
}

TEST(Rtf, MaskScaleInvariance) {
  const Mixture mix = build_mixture(scene_config(10.0, 3, true, NoiseKind::white, 1.0));
  const Spectrogram spec = analyze(mix.mixture, StftConfig{});
  Mask m{Eigen::MatrixXd::Random(spec.bins(), spec.frames()).cwiseAbs(), MaskKind::network};
  Mask half = m;
  half.values *= 0.5;
  const auto a = estimate_rtf_inverse(compute_subblock_psd(spec, 0, 2, m, 10));
  const auto b = estimate_rtf_inverse(compute_subblock_psd(spec, 0, 2, half, 10));
  EXPECT_LT((a.g_inv - b.g_inv).norm(), 1e-12 * a.g_inv.norm());
}

TEST(Rtf, BuildSetStructure) {
  const Eigen::RowVectorXd s = nonstationary(8000, 5);
  Eigen::MatrixXd x(3, 8000);
  x << s, s, s;
  const Spectrogram spec = spectrogram_of(x);
  const std::vector<Mask> pooled{unit_mask(spec.bins(), spec.frames())};
  const RtfSet set = build_rtf_set(spec, {0, 2}, 2, pooled, RtfConfig{});
  EXPECT_EQ(set.channels, (std::vector<Index>{0, 2}));
  EXPECT_EQ(set.ref_column, 1);
  EXPECT_EQ(set.ref_channel(), 2);
  EXPECT_EQ(set.excluded, (std::vector<Index>{1}));
  for (Index k = 0; k < spec.bins(); ++k) {
    EXPECT_NEAR(std::abs(set.g_inv(k, 0) - 1.0), 0.0, 1e-9);
    EXPECT_EQ(set.g_inv(k, 1), std::complex<double>(1.0));
    EXPECT_EQ(set.g(k, 1), std::complex<double>(1.0));
    EXPECT_NEAR(std::abs(set.g(k, 0) - 1.0), 0.0, 2e-6);
  }
  EXPECT_THROW(build_rtf_set(spec, {0, 2}, 1, pooled, RtfConfig{}), ConfigError);
  EXPECT_THROW(build_rtf_set(spec, {0}, 0, pooled, RtfConfig{}), SizeError);
  const std::vector<Mask> two(2, unit_mask(spec.bins(), spec.frames()));
  EXPECT_THROW(build_rtf_set(spec, {0, 2}, 0, two, RtfConfig{}), SizeError);
}

TEST(Rtf, RegularizedReciprocal) {
  Eigen::MatrixXcd a(1, 3);
  a << 2.0, std::complex<double>(0.0, 1.0), 0.0;
  const Eigen::MatrixXcd r = regularized_reciprocal(a, 1e-6);
  EXPECT_NEAR(std::abs(r(0, 0) - 0.5), 0.0, 1e-6);
  EXPECT_NEAR(std::abs(r(0, 1) - std::complex<double>(0.0, -1.0)), 0.0, 1e-5);
  EXPECT_EQ(r(0, 2), std::complex<double>(0.0));
}

TEST(Rtf, AnechoicDelaysRecovered) {
  // 0.8 s block: 100 frames, ten sub-blocks
  const StftConfig stft;
  const double duration = double(stft.span_samples(100)) / 16000.0;
  double err20 = 0.0, err5 = 0.0;
  for (double snr : {20.0, 5.0}) {
    const Mixture mix = build_mixture(scene_config(snr, 7, false, NoiseKind::white, duration));
    const Spectrogram spec = analyze(mix.mixture, stft);
    ASSERT_EQ(spec.frames(), 100);
    const std::vector<Mask> unit{unit_mask(spec.bins(), spec.frames())};
    const RtfSet set = build_rtf_set(spec, {0, 1, 2, 3}, 0, unit, RtfConfig{});
    (snr > 10 ? err20 : err5) = median_phase_error(set, mix.true_rtf.front().g, 4, 100);
  }
  EXPECT_LT(err20, 0.05);
  // noise-driven error grows with the noise amplitude; it must stay bounded, not blow up
  EXPECT_GT(err5, err20);
  EXPECT_LT(err5, 0.2);
}

TEST(Rtf, CsvLayout) {
  const Eigen::RowVectorXd s = nonstationary(4000, 6);
  Eigen::MatrixXd x(2, 4000);
  x << s, 0.5 * s;
  const Spectrogram spec = spectrogram_of(x);
  const std::vector<Mask> pooled{unit_mask(spec.bins(), spec.frames())};
  const RtfSet set = build_rtf_set(spec, {0, 1}, 0, pooled, RtfConfig{});
  const auto p = std::filesystem::temp_directory_path() / "rtfbeam_rtf.csv";
  write_rtf_csv(set, p);
  std::ifstream in(p);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "bin,mag1,phase1,mag2,phase2");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  EXPECT_EQ(rows, 257);
}
