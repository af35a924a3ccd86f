#include <random>

#include <gtest/gtest.h>

#include "rtfbeam/channel_health.hpp"
#include "rtfbeam/error.hpp"
#include "rtfbeam/evalsim.hpp"

using namespace rtfbeam;

TEST(ChannelHealth, CopiedChannelIsFullyCorrelated) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(2, 1000);
  x.row(1) = x.row(0);
  const ChannelReport r = detect_failures({x, 16000}, 0.4);
  EXPECT_NEAR(r.mu(0), 1.0, 1e-12);
  EXPECT_NEAR(r.mu(1), 1.0, 1e-12);
  EXPECT_EQ(r.active_count(), 2);
}

TEST(ChannelHealth, IndependentNoiseChannelFails) {
  const MultichannelSignal s = synth_speech(16000, 16000, 3);
  Eigen::MatrixXd x(4, 16000);
  x.row(0) = s.samples.row(0);
  x.row(1) = 0.8 * s.samples.row(0);
  x.row(2) = -0.5 * s.samples.row(0);
  std::mt19937 rng(9);
  std::normal_distribution<double> n(0.0, 0.1);
  for (Index t = 0; t < x.cols(); ++t) x(3, t) = n(rng);
  const ChannelReport r = detect_failures({x, 16000}, 0.4);
  EXPECT_LT(r.mu(3), 0.4);
  EXPECT_EQ(r.active_channels(), (std::vector<Index>{0, 1, 2}));
  // anti-correlation counts as correlation
  EXPECT_NEAR(r.mu(2), 1.0, 1e-12);
}

TEST(ChannelHealth, SilentChannelIsInactive) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 500);
  x.row(1) = x.row(0) + 0.1 * x.row(2);
  x.row(2).setZero();
  const Eigen::MatrixXd c = channel_correlations({x, 16000});
  EXPECT_EQ(c(2, 0), 0.0);
  EXPECT_EQ(c(2, 2), 0.0);
  const ChannelReport r = detect_failures({x, 16000}, 0.05);
  EXPECT_FALSE(r.active[2]);
  EXPECT_TRUE(r.active[0] && r.active[1]);
}

TEST(ChannelHealth, PermutationEquivariance) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 800);
  x.row(1) += 0.5 * x.row(0);
  x.row(3) += 0.2 * x.row(2);
  const ChannelReport a = detect_failures({x, 16000}, 0.1);
  const std::vector<Index> perm{2, 0, 3, 1};
  const ChannelReport b = detect_failures(MultichannelSignal(x, 16000).select_channels(perm), 0.1);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    EXPECT_NEAR(b.mu(Index(i)), a.mu(perm[i]), 1e-12);
    EXPECT_EQ(b.active[i], a.active[std::size_t(perm[i])]);
  }
}

TEST(ChannelHealth, ThresholdBoundaries) {
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 200);
  EXPECT_EQ(detect_failures({x, 16000}, 0.0).active_count(), 3);
  EXPECT_THROW(detect_failures({x, 16000}, -0.1), ConfigError);
  EXPECT_THROW(detect_failures({x, 16000}, 1.5), ConfigError);
  EXPECT_THROW(detect_failures({Eigen::MatrixXd::Random(1, 200), 16000}, 0.1), SizeError);
  EXPECT_THROW(detect_failures({Eigen::MatrixXd::Random(2, 1), 16000}, 0.1), SizeError);
}
