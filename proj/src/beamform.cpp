#include "rtfbeam/beamform.hpp"

#include "rtfbeam/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>

namespace rtfbeam {

using cd = std::complex<double>;

Index BeamWeights::fallback_count() const {
  return static_cast<Index>(std::count(fallback.begin(), fallback.end(), true));
}

namespace {

Eigen::MatrixXcd hermitian_part(const Eigen::MatrixXcd& a) {
  return 0.5 * (a + a.adjoint());
}

std::vector<const Eigen::MatrixXcd*> channel_inputs(const Spectrogram& spec,
                                                    const std::vector<Index>& channels) {
  std::vector<const Eigen::MatrixXcd*> inputs;
  inputs.reserve(channels.size());
  for (Index ch : channels) {
    inputs.push_back(&spec.channel(ch));
  }
  return inputs;
}

}  // namespace

Eigen::MatrixXcd blocking_matrix(const Eigen::VectorXcd& g_inv, Index ref_column) {
  const Index m = g_inv.size();
  if (m < 2) {
    throw SizeError("blocking matrix needs at least two channels");
  }
  Eigen::MatrixXcd b = Eigen::MatrixXcd::Zero(m - 1, m);
  Index row = 0;
  for (Index c = 0; c < m; ++c) {
    if (c == ref_column) {
      continue;
    }
    b(row, ref_column) = -1.0;
    b(row, c) = g_inv(c);
    ++row;
  }
  return b;
}

BeamWeights irtf_weights(const RtfSet& rtf) {
  BeamWeights bw;
  bw.method = BeamMethod::irtf;
  bw.channels = rtf.channels;
  bw.ref_column = rtf.ref_column;
  // Stored conjugated so that w^H x = (1/M) sum_i g_inv_i x_i.
  bw.w = rtf.g_inv.conjugate() / static_cast<double>(rtf.size());
  bw.fallback.assign(static_cast<std::size_t>(rtf.bins()), false);
  return bw;
}

NoiseEstimate estimate_noise(const Spectrogram& spec, const RtfSet& rtf, double loading) {
  const Index m = rtf.size();
  if (m < 2) {
    throw SizeError("noise estimation needs at least two active channels");
  }
  if (rtf.bins() != spec.bins()) {
    throw SizeError("RTF set and spectrogram differ in bin count");
  }
  const Index frames = spec.frames();
  NoiseEstimate est;
  est.y_hat.assign(static_cast<std::size_t>(m), Eigen::MatrixXcd(spec.bins(), frames));
  est.cov.cxx.resize(static_cast<std::size_t>(spec.bins()));
  est.cov.cyy_hat.resize(static_cast<std::size_t>(spec.bins()));

  for (Index k = 0; k < spec.bins(); ++k) {
    const Eigen::MatrixXcd x = spec.bin_matrix(k, rtf.channels);
    const Eigen::MatrixXcd cxx = hermitian_part(x * x.adjoint() / static_cast<double>(frames));
    const Eigen::MatrixXcd b = blocking_matrix(rtf.g_inv.row(k).transpose(), rtf.ref_column);
    const Eigen::MatrixXcd v = b * x;
    // Cxx B^H and B Cxx B^H, formed from v itself so that a blocked target
    // does not leave rounding noise to be amplified by the inverse.
    const Eigen::MatrixXcd cxv = x * v.adjoint() / static_cast<double>(frames);
    Eigen::MatrixXcd cvv = hermitian_part(v * v.adjoint() / static_cast<double>(frames));
    const double mean_eig = cvv.trace().real() / static_cast<double>(m - 1);

    // gain maps the blocking output v back onto all channels.
    Eigen::MatrixXcd gain = Eigen::MatrixXcd::Zero(m, m - 1);
    if (mean_eig > 1e-20 * cxx.trace().real() / static_cast<double>(m)) {
      cvv.diagonal().array() += loading * mean_eig;
      gain = cxv * cvv.llt().solve(Eigen::MatrixXcd::Identity(m - 1, m - 1));
    }
    const Eigen::MatrixXcd y = gain * v;
    for (Index c = 0; c < m; ++c) {
      est.y_hat[static_cast<std::size_t>(c)].row(k) = y.row(c);
    }
    est.cov.cxx[static_cast<std::size_t>(k)] = cxx;
    est.cov.cyy_hat[static_cast<std::size_t>(k)] = hermitian_part(gain * cxv.adjoint());
  }
  return est;
}

Eigen::MatrixXcd hermitian_pinv(const Eigen::MatrixXcd& a, double rel_cutoff) {
  if (a.rows() != a.cols()) {
    throw SizeError("pseudoinverse expects a square matrix");
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(hermitian_part(a));
  const Eigen::VectorXd& lam = eig.eigenvalues();
  const double cutoff = rel_cutoff * lam.cwiseAbs().maxCoeff();
  Eigen::VectorXd inv_lam = Eigen::VectorXd::Zero(lam.size());
  for (Index i = 0; i < lam.size(); ++i) {
    if (std::abs(lam(i)) > cutoff && lam(i) != 0.0) {
      inv_lam(i) = 1.0 / lam(i);
    }
  }
  const Eigen::MatrixXcd& v = eig.eigenvectors();
  return v * inv_lam.cast<cd>().asDiagonal() * v.adjoint();
}

BeamWeights mvdr_weights(const CovarianceSet& cov, const RtfSet& rtf) {
  if (static_cast<Index>(cov.cyy_hat.size()) != rtf.bins()) {
    throw SizeError("covariance set and RTF set differ in bin count");
  }
  const BeamWeights fallback = irtf_weights(rtf);
  BeamWeights bw;
  bw.method = BeamMethod::mvdr;
  bw.channels = rtf.channels;
  bw.ref_column = rtf.ref_column;
  bw.w.resize(rtf.bins(), rtf.size());
  bw.fallback.assign(static_cast<std::size_t>(rtf.bins()), false);

  for (Index k = 0; k < rtf.bins(); ++k) {
    const Eigen::VectorXcd g = rtf.g.row(k).transpose();
    const Eigen::MatrixXcd pinv = hermitian_pinv(cov.cyy_hat[static_cast<std::size_t>(k)]);
    const Eigen::VectorXcd num = pinv * g;
    const double den = g.dot(num).real();
    // Relative to the largest achievable value ||C^+|| ||g||^2.
    const double scale = pinv.cwiseAbs().maxCoeff() * g.squaredNorm() * static_cast<double>(rtf.size());
    if (!(den > 1e-10 * scale) || !std::isfinite(den)) {
      bw.w.row(k) = fallback.w.row(k);
      bw.fallback[static_cast<std::size_t>(k)] = true;
      continue;
    }
    bw.w.row(k) = (num / den).transpose();
  }
  return bw;
}

GevSolution principal_generalized_eigen(const Eigen::MatrixXcd& css, const Eigen::MatrixXcd& cyy,
                                        Index ref_column) {
  const Index m = css.rows();
  if (css.cols() != m || cyy.rows() != m || cyy.cols() != m) {
    throw SizeError("generalized eigenproblem needs square matrices of equal size");
  }
  // Whiten with the Cholesky factor of cyy: L^-1 css L^-H z = lambda z, w = L^-H z.
  Eigen::MatrixXcd noise = hermitian_part(cyy);
  Eigen::LLT<Eigen::MatrixXcd> llt(noise);
  double load = 1e-12 * std::max(noise.trace().real() / static_cast<double>(m), 1e-300);
  while (llt.info() != Eigen::Success) {
    noise.diagonal().array() += load;
    llt.compute(noise);
    load *= 10.0;
  }
  const Eigen::MatrixXcd l_inv =
      llt.matrixL().solve(Eigen::MatrixXcd::Identity(m, m));
  const Eigen::MatrixXcd whitened = hermitian_part(l_inv * css * l_inv.adjoint());
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(whitened);

  GevSolution sol;
  sol.lambda = eig.eigenvalues()(m - 1);
  sol.w = l_inv.adjoint() * eig.eigenvectors().col(m - 1);
  sol.w.normalize();
  const cd ref = sol.w(ref_column);
  if (std::abs(ref) > 0.0) {
    sol.w *= std::conj(ref) / std::abs(ref);
  }
  return sol;
}

double ban_gain(const Eigen::VectorXcd& w, const Eigen::MatrixXcd& cyy) {
  const Eigen::VectorXcd cw = cyy * w;
  const double num = std::sqrt(std::max(0.0, (cyy.adjoint() * w).squaredNorm()) /
                               static_cast<double>(w.size()));
  const double den = w.dot(cw).real();
  return den > 0.0 ? num / den : 1.0;
}

MaskedCovariances masked_covariances(const Spectrogram& spec, const std::vector<Index>& channels,
                                     const Mask& mask) {
  if (mask.bins() != spec.bins() || mask.frames() != spec.frames()) {
    throw SizeError("mask shape does not match the spectrogram");
  }
  MaskedCovariances out;
  out.css.resize(static_cast<std::size_t>(spec.bins()));
  out.cyy.resize(static_cast<std::size_t>(spec.bins()));
  out.degenerate.assign(static_cast<std::size_t>(spec.bins()), false);
  for (Index k = 0; k < spec.bins(); ++k) {
    const Eigen::MatrixXcd x = spec.bin_matrix(k, channels);
    const Eigen::RowVectorXd p = mask.values.row(k);
    const Eigen::RowVectorXd q = (1.0 - p.array()).matrix();
    const double sum_p = p.sum();
    const double sum_q = q.sum();
    const auto weighted = [&](const Eigen::RowVectorXd& wts, double total) {
      Eigen::MatrixXcd xw = x;
      for (Index l = 0; l < x.cols(); ++l) {
        xw.col(l) *= wts(l);
      }
      return hermitian_part(xw * x.adjoint() / total);
    };
    const auto cxx = [&] {
      return hermitian_part(x * x.adjoint() / static_cast<double>(x.cols()));
    };
    // An empty class is replaced by a spatially white one at the level of Cxx.
    const bool degenerate = !(sum_p > 0.0 && sum_q > 0.0);
    if (!degenerate) {
      out.css[static_cast<std::size_t>(k)] = weighted(p, sum_p);
      out.cyy[static_cast<std::size_t>(k)] = weighted(q, sum_q);
    } else {
      const Eigen::MatrixXcd c = cxx();
      const double level = std::max(c.trace().real() / static_cast<double>(c.rows()), 1e-300);
      const Eigen::MatrixXcd white = level * Eigen::MatrixXcd::Identity(c.rows(), c.rows());
      out.css[static_cast<std::size_t>(k)] = sum_p > 0.0 ? c : white;
      out.cyy[static_cast<std::size_t>(k)] = sum_p > 0.0 ? white : c;
    }
    out.degenerate[static_cast<std::size_t>(k)] = degenerate;
  }
  return out;
}

BeamWeights gev_weights(const Spectrogram& spec, const std::vector<Index>& channels,
                        Index ref_column, const Mask& mask) {
  if (channels.size() < 2) {
    throw SizeError("GEV needs at least two active channels");
  }
  const MaskedCovariances cov = masked_covariances(spec, channels, mask);
  BeamWeights bw;
  bw.method = BeamMethod::gev;
  bw.channels = channels;
  bw.ref_column = ref_column;
  bw.w.resize(spec.bins(), static_cast<Index>(channels.size()));
  bw.fallback = cov.degenerate;
  Eigen::VectorXd gain(spec.bins());
  for (Index k = 0; k < spec.bins(); ++k) {
    const auto kk = static_cast<std::size_t>(k);
    const GevSolution sol = principal_generalized_eigen(cov.css[kk], cov.cyy[kk], ref_column);
    bw.w.row(k) = sol.w.transpose();
    gain(k) = ban_gain(sol.w, cov.cyy[kk]);
  }
  bw.ban_gain = std::move(gain);
  return bw;
}

Eigen::MatrixXcd beam_sum(const Eigen::MatrixXcd& w, const std::vector<const Eigen::MatrixXcd*>& inputs) {
  if (static_cast<Index>(inputs.size()) != w.cols() || inputs.empty()) {
    throw SizeError("weights and inputs differ in channel count");
  }
  const Index bins = inputs.front()->rows();
  const Index frames = inputs.front()->cols();
  if (w.rows() != bins) {
    throw SizeError("weights and inputs differ in bin count");
  }
  Eigen::MatrixXcd u = Eigen::MatrixXcd::Zero(bins, frames);
  for (std::size_t c = 0; c < inputs.size(); ++c) {
    const Eigen::MatrixXcd& x = *inputs[c];
    if (x.rows() != bins || x.cols() != frames) {
      throw SizeError("beamformer inputs differ in shape");
    }
    u.array() += x.array().colwise() * w.col(static_cast<Index>(c)).conjugate().array();
  }
  return u;
}

Eigen::MatrixXcd apply(const BeamWeights& weights, const Spectrogram& spec) {
  for (Index ch : weights.channels) {
    if (ch < 0 || ch >= spec.channel_count()) {
      throw SizeError("weights reference a channel missing from the spectrogram");
    }
  }
  Eigen::MatrixXcd u = beam_sum(weights.w, channel_inputs(spec, weights.channels));
  if (weights.ban_gain) {
    if (weights.ban_gain->size() != u.rows()) {
      throw SizeError("BAN gain length differs from bin count");
    }
    u.array().colwise() *= weights.ban_gain->cast<cd>().array();
  }
  return u;
}

}  // namespace rtfbeam
