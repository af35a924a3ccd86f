#include "rtfbeam/vad.hpp"

#include "rtfbeam/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <vector>

namespace rtfbeam {

Mask unit_mask(Index bins, Index frames) {
  return Mask{Eigen::MatrixXd::Ones(bins, frames), MaskKind::unit};
}

Mask oracle_ibm(const Eigen::MatrixXcd& speech, const Eigen::MatrixXcd& noise, double t_snr_db) {
  if (speech.rows() != noise.rows() || speech.cols() != noise.cols()) {
    throw SizeError("speech and noise spectra differ in shape");
  }
  const double ratio = std::pow(10.0, t_snr_db / 10.0);
  Mask mask{Eigen::MatrixXd::Zero(speech.rows(), speech.cols()), MaskKind::oracle};
  for (Index l = 0; l < speech.cols(); ++l) {
    for (Index k = 0; k < speech.rows(); ++k) {
      const double ps = std::norm(speech(k, l));
      const double py = std::norm(noise(k, l));
      // |y|^2 = 0 with |s|^2 > 0 is +inf dB; both zero is -inf dB.
      mask.values(k, l) = (ps > 0.0 && ps > ratio * py) ? 1.0 : 0.0;
    }
  }
  return mask;
}

Mask infer_mask(const NetworkWeights& net, const Eigen::MatrixXcd& spectrum) {
  if (net.layers.empty()) {
    throw SizeError("network has no layers");
  }
  if (spectrum.rows() != net.input_dim()) {
    throw SizeError("spectrum has " + std::to_string(spectrum.rows()) +
                    " bins but the network expects " + std::to_string(net.input_dim()));
  }
  if (net.output_dim() != spectrum.rows()) {
    throw SizeError("network output dimension " + std::to_string(net.output_dim()) +
                    " does not match " + std::to_string(spectrum.rows()) + " bins");
  }
  // Frames are columns, so one matrix product evaluates every frame independently.
  Eigen::MatrixXd act = spectrum.cwiseAbs();
  act = (act.colwise() - net.input_mean).array().colwise() / net.input_std.array();
  for (const DenseLayer& layer : net.layers) {
    Eigen::MatrixXd z = layer.weights * act;
    z.colwise() += layer.bias;
    if (layer.activation == Activation::relu) {
      act = z.cwiseMax(0.0);
    } else {
      act = (1.0 + (-z.array()).exp()).inverse().matrix();
    }
  }
  if (net.layers.back().activation == Activation::relu) {
    act = act.cwiseMin(1.0);
  }
  return Mask{std::move(act), MaskKind::network};
}

Mask pool_median(std::span<const Mask> masks) {
  if (masks.empty()) {
    throw SizeError("median pooling needs at least one mask");
  }
  const Index bins = masks.front().bins();
  const Index frames = masks.front().frames();
  for (const Mask& m : masks) {
    if (m.bins() != bins || m.frames() != frames) {
      throw SizeError("masks differ in shape");
    }
  }
  const std::size_t n = masks.size();
  Mask out{Eigen::MatrixXd(bins, frames), MaskKind::pooled};
  std::vector<double> column(n);
  for (Index l = 0; l < frames; ++l) {
    for (Index k = 0; k < bins; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        column[i] = masks[i].values(k, l);
      }
      std::sort(column.begin(), column.end());
      out.values(k, l) = n % 2 == 1 ? column[n / 2] : 0.5 * (column[n / 2 - 1] + column[n / 2]);
    }
  }
  return out;
}

void write_mask_csv(const Mask& mask, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  out.precision(6);
  for (Index k = 0; k < mask.bins(); ++k) {
    for (Index l = 0; l < mask.frames(); ++l) {
      out << (l ? "," : "") << mask.values(k, l);
    }
    out << '\n';
  }
}

}  // namespace rtfbeam
