#include "rtfbeam/rtf.hpp"

#include "rtfbeam/error.hpp"

#include <algorithm>
#include <complex>
#include <fstream>

namespace rtfbeam {

SubblockPsd compute_subblock_psd(const Spectrogram& spec, Index ref, Index channel,
                                 const Mask& mask, Index sub_block_len) {
  if (sub_block_len < 1) {
    throw ConfigError("sub-block length must be positive");
  }
  if (mask.bins() != spec.bins() || mask.frames() != spec.frames()) {
    throw SizeError("mask shape does not match the spectrogram");
  }
  const Index n_sub = spec.frames() / sub_block_len;
  if (n_sub < 2) {
    throw SizeError("block of " + std::to_string(spec.frames()) + " frames holds fewer than two sub-blocks of " +
                    std::to_string(sub_block_len));
  }
  const Eigen::MatrixXcd& xr = spec.channel(ref);
  const Eigen::MatrixXcd& xi = spec.channel(channel);

  SubblockPsd psd;
  psd.sub_block_len = sub_block_len;
  psd.cross = Eigen::MatrixXcd::Zero(spec.bins(), n_sub);
  psd.auto_psd = Eigen::MatrixXd::Zero(spec.bins(), n_sub);
  for (Index n = 0; n < n_sub; ++n) {
    for (Index l = n * sub_block_len; l < (n + 1) * sub_block_len; ++l) {
      for (Index k = 0; k < spec.bins(); ++k) {
        const double p = mask.values(k, l);
        psd.cross(k, n) += p * xr(k, l) * std::conj(xi(k, l));
        psd.auto_psd(k, n) += p * std::norm(xi(k, l));
      }
    }
  }
  return psd;
}

Index InverseRtfEstimate::fallback_count() const {
  return static_cast<Index>(std::count(fallback.begin(), fallback.end(), true));
}

InverseRtfEstimate estimate_rtf_inverse(const SubblockPsd& psd) {
  const Index bins = psd.bins();
  const Index n_sub = psd.sub_block_count();
  if (n_sub < 2) {
    throw SizeError("need at least two sub-blocks");
  }
  const double inv_n = 1.0 / static_cast<double>(n_sub);

  InverseRtfEstimate est;
  est.g_inv.resize(bins);
  est.fallback.assign(static_cast<std::size_t>(bins), false);
  for (Index k = 0; k < bins; ++k) {
    const auto cross = psd.cross.row(k);
    const auto autos = psd.auto_psd.row(k);
    const std::complex<double> mean_cross = cross.sum() * inv_n;
    const double mean_auto = autos.sum() * inv_n;
    // <c a> - <c><a> and <a^2> - <a>^2, evaluated on centered data.
    std::complex<double> cov{0.0, 0.0};
    double var = 0.0;
    for (Index n = 0; n < n_sub; ++n) {
      const double da = autos(n) - mean_auto;
      cov += (cross(n) - mean_cross) * da;
      var += da * da;
    }
    cov *= inv_n;
    var *= inv_n;

    const double eps_var = 1e-12 * mean_auto * mean_auto;
    if (var > eps_var && var > 0.0) {
      est.g_inv(k) = cov / var;
    } else {
      est.fallback[static_cast<std::size_t>(k)] = true;
      est.g_inv(k) = mean_auto > 0.0 ? mean_cross / mean_auto : std::complex<double>(1.0, 0.0);
    }
  }
  return est;
}

Eigen::MatrixXcd regularized_reciprocal(const Eigen::MatrixXcd& a, double eps) {
  return a.conjugate().array() / (a.cwiseAbs2().array() + eps).cast<std::complex<double>>();
}

RtfSet build_rtf_set(const Spectrogram& spec, const std::vector<Index>& active, Index ref,
                     std::span<const Mask> masks, const RtfConfig& cfg) {
  if (active.size() < 2) {
    throw SizeError("RTF estimation needs at least two active channels");
  }
  const auto ref_it = std::find(active.begin(), active.end(), ref);
  if (ref_it == active.end()) {
    throw ConfigError("reference channel is not active");
  }
  const bool pooled = masks.size() == 1;
  if (!pooled && static_cast<Index>(masks.size()) != spec.channel_count()) {
    throw SizeError("expected one mask per channel or a single pooled mask");
  }

  RtfSet set;
  set.channels = active;
  set.ref_column = static_cast<Index>(ref_it - active.begin());
  for (Index m = 0; m < spec.channel_count(); ++m) {
    if (std::find(active.begin(), active.end(), m) == active.end()) {
      set.excluded.push_back(m);
    }
  }
  set.g_inv = Eigen::MatrixXcd::Ones(spec.bins(), static_cast<Index>(active.size()));
  for (std::size_t c = 0; c < active.size(); ++c) {
    const Index ch = active[c];
    if (ch == ref) {
      continue;
    }
    const Mask& mask = pooled ? masks.front() : masks[static_cast<std::size_t>(ch)];
    const InverseRtfEstimate est =
        estimate_rtf_inverse(compute_subblock_psd(spec, ref, ch, mask, cfg.sub_block_len));
    set.g_inv.col(static_cast<Index>(c)) = est.g_inv;
    set.fallback_bins += est.fallback_count();
  }
  set.g = regularized_reciprocal(set.g_inv, cfg.reciprocal_eps);
  set.g.col(set.ref_column).setOnes();
  return set;
}

void write_rtf_csv(const RtfSet& rtf, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  out << "bin";
  for (Index ch : rtf.channels) {
    out << ",mag" << ch + 1 << ",phase" << ch + 1;
  }
  out << '\n';
  out.precision(9);
  for (Index k = 0; k < rtf.bins(); ++k) {
    out << k;
    for (Index c = 0; c < rtf.size(); ++c) {
      out << ',' << std::abs(rtf.g_inv(k, c)) << ',' << std::arg(rtf.g_inv(k, c));
    }
    out << '\n';
  }
}

}  // namespace rtfbeam
