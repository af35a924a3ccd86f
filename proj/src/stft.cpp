#include "rtfbeam/stft.hpp"

#include "rtfbeam/error.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>

namespace rtfbeam {

void StftConfig::validate() const {
  if (frame_len < 2 || frame_len % 2 != 0) {
    throw ConfigError("frame length must be even and at least 2");
  }
  if (hop < 1 || hop > frame_len) {
    throw ConfigError("hop must lie in [1, frame_len]");
  }
  if (sample_rate <= 0) {
    throw ConfigError("sample rate must be positive");
  }
}

Spectrogram::Spectrogram(std::vector<Eigen::MatrixXcd> channels, StftConfig config)
    : channels_(std::move(channels)), config_(config) {
  config_.validate();
  if (channels_.empty()) {
    throw SizeError("spectrogram needs at least one channel");
  }
  bins_ = channels_.front().rows();
  frames_ = channels_.front().cols();
  if (bins_ != config_.bins()) {
    throw SizeError("spectrogram has " + std::to_string(bins_) + " bins, framing implies " +
                    std::to_string(config_.bins()));
  }
  for (const auto& c : channels_) {
    if (c.rows() != bins_ || c.cols() != frames_) {
      throw SizeError("spectrogram channels differ in shape");
    }
  }
}

Eigen::VectorXcd Spectrogram::snapshot(Index k, Index l) const {
  Eigen::VectorXcd x(channel_count());
  for (Index m = 0; m < channel_count(); ++m) {
    x(m) = channels_[static_cast<std::size_t>(m)](k, l);
  }
  return x;
}

Eigen::MatrixXcd Spectrogram::bin_matrix(Index k, const std::vector<Index>& channels) const {
  Eigen::MatrixXcd x(static_cast<Index>(channels.size()), frames_);
  for (std::size_t i = 0; i < channels.size(); ++i) {
    x.row(static_cast<Index>(i)) = channel(channels[i]).row(k);
  }
  return x;
}

Eigen::VectorXd hamming_window(Index n) {
  Eigen::VectorXd w(n);
  for (Index i = 0; i < n; ++i) {
    w(i) = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }
  return w;
}

namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(Index n) : n_(n), time_(static_cast<std::size_t>(n)), freq_(static_cast<std::size_t>(n / 2 + 1)) {
    std::lock_guard lock(planner_mutex());
    const int size = static_cast<int>(n);
    auto* f = reinterpret_cast<fftw_complex*>(freq_.data());
    forward_ = fftw_plan_dft_r2c_1d(size, time_.data(), f, FFTW_ESTIMATE);
    inverse_ = fftw_plan_dft_c2r_1d(size, f, time_.data(), FFTW_ESTIMATE);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  ~RealFft() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(inverse_);
  }

  std::vector<double>& time() { return time_; }
  std::vector<std::complex<double>>& freq() { return freq_; }

  void forward() { fftw_execute(forward_); }
  // Unnormalized: the result is n times the inverse DFT.
  void inverse() { fftw_execute(inverse_); }
  Index size() const { return n_; }

 private:
  Index n_;
  std::vector<double> time_;
  std::vector<std::complex<double>> freq_;
  fftw_plan forward_{};
  fftw_plan inverse_{};
};

}  // namespace

Spectrogram analyze(const MultichannelSignal& signal, const StftConfig& cfg) {
  cfg.validate();
  const Index frames = cfg.frame_count(signal.length());
  if (frames < 1) {
    throw SizeError("signal of " + std::to_string(signal.length()) +
                    " samples is shorter than one frame of " + std::to_string(cfg.frame_len));
  }
  const Index bins = cfg.bins();
  const Eigen::VectorXd window = hamming_window(cfg.frame_len);
  RealFft fft(cfg.frame_len);

  std::vector<Eigen::MatrixXcd> channels;
  channels.reserve(static_cast<std::size_t>(signal.channel_count()));
  for (Index m = 0; m < signal.channel_count(); ++m) {
    Eigen::MatrixXcd x(bins, frames);
    for (Index l = 0; l < frames; ++l) {
      const Index start = l * cfg.hop;
      for (Index n = 0; n < cfg.frame_len; ++n) {
        fft.time()[static_cast<std::size_t>(n)] = window(n) * signal.samples(m, start + n);
      }
      fft.forward();
      for (Index k = 0; k < bins; ++k) {
        x(k, l) = fft.freq()[static_cast<std::size_t>(k)];
      }
    }
    channels.push_back(std::move(x));
  }
  return Spectrogram(std::move(channels), cfg);
}

MultichannelSignal synthesize(const Spectrogram& spec) {
  const StftConfig& cfg = spec.config();
  const Index frames = spec.frames();
  const Index length = cfg.span_samples(frames);
  const Eigen::VectorXd window = hamming_window(cfg.frame_len);
  const double scale = 1.0 / static_cast<double>(cfg.frame_len);

  Eigen::VectorXd norm = Eigen::VectorXd::Zero(length);
  for (Index l = 0; l < frames; ++l) {
    norm.segment(l * cfg.hop, cfg.frame_len) += window.cwiseAbs2();
  }
  norm = norm.cwiseMax(1e-8);

  RealFft fft(cfg.frame_len);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(spec.channel_count(), length);
  for (Index m = 0; m < spec.channel_count(); ++m) {
    const Eigen::MatrixXcd& x = spec.channel(m);
    for (Index l = 0; l < frames; ++l) {
      for (Index k = 0; k < spec.bins(); ++k) {
        fft.freq()[static_cast<std::size_t>(k)] = x(k, l);
      }
      // c2r ignores the imaginary parts of the DC and Nyquist bins.
      fft.inverse();
      const Index start = l * cfg.hop;
      for (Index n = 0; n < cfg.frame_len; ++n) {
        out(m, start + n) += window(n) * fft.time()[static_cast<std::size_t>(n)] * scale;
      }
    }
    out.row(m).array() /= norm.transpose().array();
  }
  return MultichannelSignal(std::move(out), cfg.sample_rate);
}

}  // namespace rtfbeam
