#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace rtfbeam {

using Index = Eigen::Index;

/// Time-domain multichannel audio. Rows are channels, columns are samples.
struct MultichannelSignal {
  Eigen::MatrixXd samples;
  int sample_rate = 16000;

  MultichannelSignal() = default;
  /// Throws SizeError on an empty matrix and ConfigError on a non-positive rate.
  MultichannelSignal(Eigen::MatrixXd samples, int sample_rate);

  Index channel_count() const { return samples.rows(); }
  Index length() const { return samples.cols(); }

  /// Copy of samples [start, start + count) of every channel.
  MultichannelSignal slice(Index start, Index count) const;
  /// Copy restricted to the listed channels, in the listed order.
  MultichannelSignal select_channels(const std::vector<Index>& channels) const;
};

enum class WavEncoding { pcm16, float32 };

MultichannelSignal read_wav(const std::filesystem::path& path);

/// pcm16 clips to [-1, 1 - 1/32768] and rounds to the nearest code.
void write_wav(const MultichannelSignal& signal, const std::filesystem::path& path,
               WavEncoding encoding);

enum class Activation { relu, sigmoid };

struct DenseLayer {
  Eigen::MatrixXd weights;  // outputs x inputs
  Eigen::VectorXd bias;     // outputs
  Activation activation = Activation::sigmoid;
};

/// Feed-forward mask estimator: per-frame magnitudes in, per-bin speech presence out.
struct NetworkWeights {
  std::vector<DenseLayer> layers;
  Eigen::VectorXd input_mean;
  Eigen::VectorXd input_std;

  Index input_dim() const;
  Index output_dim() const;
  /// Throws FormatError when the layer chain or normalization vectors are inconsistent.
  void validate() const;
};

NetworkWeights parse_network(std::string_view json_text);
std::string network_to_json(const NetworkWeights& net);
NetworkWeights load_network(const std::filesystem::path& path);
void save_network(const NetworkWeights& net, const std::filesystem::path& path);

}  // namespace rtfbeam
