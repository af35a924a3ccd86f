#pragma once

#include "rtfbeam/stft.hpp"
#include "rtfbeam/vad.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <span>
#include <vector>

namespace rtfbeam {

/// Mask-weighted (cross-)PSD sums of one channel pair, one column per sub-block.
struct SubblockPsd {
  Eigen::MatrixXcd cross;    // bins x N: sum of P * x_ref * conj(x_i)
  Eigen::MatrixXd auto_psd;  // bins x N: sum of P * |x_i|^2
  Index sub_block_len = 0;

  Index sub_block_count() const { return cross.cols(); }
  Index bins() const { return cross.rows(); }
};

/// Trailing frames that do not fill a whole sub-block are dropped.
SubblockPsd compute_subblock_psd(const Spectrogram& spec, Index ref, Index channel,
                                 const Mask& mask, Index sub_block_len);

struct InverseRtfEstimate {
  Eigen::VectorXcd g_inv;
  std::vector<bool> fallback;  // bins where the variance guard fired

  Index fallback_count() const;
};

/// Least-squares fit of cross = g_inv * auto + c across sub-blocks, per bin.
InverseRtfEstimate estimate_rtf_inverse(const SubblockPsd& psd);

struct RtfConfig {
  Index sub_block_len = 10;  // frames
  double reciprocal_eps = 1e-6;
};

/// Inverse RTFs of the active channels relative to `ref`.
struct RtfSet {
  Eigen::MatrixXcd g_inv;       // bins x channels.size(); reference column is exactly 1
  Eigen::MatrixXcd g;           // regularized reciprocal of g_inv
  std::vector<Index> channels;  // spectrogram channel of each column
  Index ref_column = 0;
  std::vector<Index> excluded;  // spectrogram channels not present in the set
  Index fallback_bins = 0;

  Index bins() const { return g_inv.rows(); }
  Index size() const { return g_inv.cols(); }
  Index ref_channel() const { return channels.at(static_cast<std::size_t>(ref_column)); }
};

/// conj(a) / (|a|^2 + eps), elementwise.
Eigen::MatrixXcd regularized_reciprocal(const Eigen::MatrixXcd& a, double eps);

/// `masks` holds either one mask per spectrogram channel or a single pooled mask.
/// `ref` must be one of `active`.
RtfSet build_rtf_set(const Spectrogram& spec, const std::vector<Index>& active, Index ref,
                     std::span<const Mask> masks, const RtfConfig& cfg);

/// Columns: bin, then magnitude and phase of g_inv per channel.
void write_rtf_csv(const RtfSet& rtf, const std::filesystem::path& path);

}  // namespace rtfbeam
