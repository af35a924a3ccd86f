#include "rtfbeam/channel_health.hpp"

#include "rtfbeam/error.hpp"

#include <cmath>

namespace rtfbeam {

Index ChannelReport::active_count() const {
  Index n = 0;
  for (bool a : active) {
    n += a ? 1 : 0;
  }
  return n;
}

std::vector<Index> ChannelReport::active_channels() const {
  std::vector<Index> out;
  for (std::size_t i = 0; i < active.size(); ++i) {
    if (active[i]) {
      out.push_back(static_cast<Index>(i));
    }
  }
  return out;
}

Eigen::MatrixXd channel_correlations(const MultichannelSignal& block) {
  const Index m = block.channel_count();
  const Eigen::MatrixXd centered = block.samples.colwise() - block.samples.rowwise().mean();
  const Eigen::MatrixXd gram = centered * centered.transpose();
  Eigen::MatrixXd corr = Eigen::MatrixXd::Zero(m, m);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < m; ++j) {
      const double denom = std::sqrt(gram(i, i) * gram(j, j));
      corr(i, j) = denom > 0.0 ? gram(i, j) / denom : 0.0;
    }
  }
  return corr;
}

ChannelReport detect_failures(const MultichannelSignal& block, double t_mu) {
  if (block.channel_count() < 2) {
    throw SizeError("failure detection needs at least two channels");
  }
  if (block.length() < 2) {
    throw SizeError("failure detection needs at least two samples");
  }
  if (!(t_mu >= 0.0 && t_mu <= 1.0)) {
    throw ConfigError("t_mu must lie in [0, 1]");
  }
  const Eigen::MatrixXd corr = channel_correlations(block);
  const Index m = block.channel_count();
  ChannelReport report;
  report.threshold = t_mu;
  report.mu = Eigen::VectorXd::Zero(m);
  report.active.assign(static_cast<std::size_t>(m), false);
  for (Index i = 0; i < m; ++i) {
    double best = 0.0;
    for (Index j = 0; j < m; ++j) {
      if (j != i) {
        best = std::max(best, std::min(1.0, std::abs(corr(i, j))));
      }
    }
    report.mu(i) = best;
    report.active[static_cast<std::size_t>(i)] = best >= t_mu;
  }
  return report;
}

}  // namespace rtfbeam
