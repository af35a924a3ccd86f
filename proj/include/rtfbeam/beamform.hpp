#pragma once

#include "rtfbeam/rtf.hpp"
#include "rtfbeam/stft.hpp"
#include "rtfbeam/vad.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace rtfbeam {

enum class BeamMethod { irtf, mvdr, gev };

/// Per-bin steering vectors over the channels in `channels`. Output is u = w^H x.
struct BeamWeights {
  Eigen::MatrixXcd w;  // bins x channels.size(); row k holds w(k)^T
  BeamMethod method = BeamMethod::irtf;
  std::vector<Index> channels;
  Index ref_column = 0;
  std::optional<Eigen::VectorXd> ban_gain;  // applied by apply() when present
  std::vector<bool> fallback;               // bins that fell back to a substitute

  Index bins() const { return w.rows(); }
  Index fallback_count() const;
};

/// Per-bin covariance estimates over the active channels.
struct CovarianceSet {
  std::vector<Eigen::MatrixXcd> cxx;      // sample covariance of x
  std::vector<Eigen::MatrixXcd> css;      // mask-weighted speech covariance (GEV only)
  std::vector<Eigen::MatrixXcd> cyy;      // mask-weighted noise covariance (GEV only)
  std::vector<Eigen::MatrixXcd> cyy_hat;  // covariance of the blocking-matrix noise estimate
};

/// Least-squares noise images recovered from the blocking-matrix output.
struct NoiseEstimate {
  std::vector<Eigen::MatrixXcd> y_hat;  // one bins x frames matrix per RtfSet column
  CovarianceSet cov;
};

/// (M-1) x M blocking matrix: row r maps x to g_inv_i x_i - x_ref for the r-th non-reference column.
Eigen::MatrixXcd blocking_matrix(const Eigen::VectorXcd& g_inv, Index ref_column);

/// Delay-free averaging of inverse-RTF-aligned channels.
BeamWeights irtf_weights(const RtfSet& rtf);

/// `loading` scales the diagonal loading of B Cxx B^H relative to its mean eigenvalue. A blocking
/// output at rounding level relative to x yields a zero noise estimate.
NoiseEstimate estimate_noise(const Spectrogram& spec, const RtfSet& rtf, double loading = 1e-6);

/// Moore-Penrose pseudoinverse of a Hermitian matrix; eigenvalues below
/// rel_cutoff * max |eigenvalue| are treated as zero.
Eigen::MatrixXcd hermitian_pinv(const Eigen::MatrixXcd& a, double rel_cutoff = 1e-8);

/// Pseudoinverse MVDR on cyy_hat. Bins with a vanishing g^H C^+ g fall back to IRTF weights.
BeamWeights mvdr_weights(const CovarianceSet& cov, const RtfSet& rtf);

struct GevSolution {
  Eigen::VectorXcd w;  // unit norm, reference component real and non-negative
  double lambda = 0.0;
};

/// Principal generalized eigenpair of css w = lambda cyy w for Hermitian css and positive
/// definite cyy. A singular cyy receives minimal diagonal loading.
GevSolution principal_generalized_eigen(const Eigen::MatrixXcd& css, const Eigen::MatrixXcd& cyy,
                                        Index ref_column);

/// Blind analytic normalization gain for GEV weights w under noise covariance cyy.
double ban_gain(const Eigen::VectorXcd& w, const Eigen::MatrixXcd& cyy);

struct MaskedCovariances {
  std::vector<Eigen::MatrixXcd> css;
  std::vector<Eigen::MatrixXcd> cyy;
  std::vector<bool> degenerate;  // sum P or sum (1-P) was zero; white substitute for the empty class
};

MaskedCovariances masked_covariances(const Spectrogram& spec, const std::vector<Index>& channels,
                                     const Mask& mask);

BeamWeights gev_weights(const Spectrogram& spec, const std::vector<Index>& channels,
                        Index ref_column, const Mask& mask);

/// sum over columns c of conj(w(k, c)) * inputs[c](k, l). No BAN gain.
Eigen::MatrixXcd beam_sum(const Eigen::MatrixXcd& w, const std::vector<const Eigen::MatrixXcd*>& inputs);

/// u(k, l) = w(k)^H x(k, l), times ban_gain(k) when present.
Eigen::MatrixXcd apply(const BeamWeights& weights, const Spectrogram& spec);

}  // namespace rtfbeam
