#include "rtfbeam/evalsim.hpp"

#include "rtfbeam/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>

namespace rtfbeam {

void MixtureSpec::validate(Index hop) const {
  if (channels < 1) {
    throw ConfigError("mixture needs at least one channel");
  }
  if (ref_channel < 0 || ref_channel >= channels) {
    throw ConfigError("reference channel out of range");
  }
  if (!std::isfinite(snr_db)) {
    throw ConfigError("SNR must be finite");
  }
  if (trajectory.empty() || trajectory.front().start_sample != 0) {
    throw ConfigError("trajectory must start with a segment at sample 0");
  }
  for (std::size_t s = 0; s < trajectory.size(); ++s) {
    const TrajectorySegment& seg = trajectory[s];
    if (s > 0 && seg.start_sample <= trajectory[s - 1].start_sample) {
      throw ConfigError("trajectory segments must start in increasing order");
    }
    if (hop > 0 && seg.start_sample % hop != 0) {
      throw ConfigError("segment start " + std::to_string(seg.start_sample) + " is not a multiple of the hop " +
                        std::to_string(hop));
    }
    if (static_cast<Index>(seg.firs.size()) != channels) {
      throw ConfigError("every segment needs one FIR per channel");
    }
    for (const auto& h : seg.firs) {
      if (h.empty() || h.size() > 64) {
        throw ConfigError("FIR length must lie in [1, 64]");
      }
      if (std::all_of(h.begin(), h.end(), [](double v) { return v == 0.0; })) {
        throw ConfigError("FIRs must be nonzero");
      }
    }
  }
}

Eigen::MatrixXcd fir_rtf(const std::vector<std::vector<double>>& firs, Index ref, Index frame_len) {
  const Index bins = frame_len / 2 + 1;
  const auto channels = static_cast<Index>(firs.size());
  Eigen::MatrixXcd h(bins, channels);
  for (Index c = 0; c < channels; ++c) {
    const auto& taps = firs[static_cast<std::size_t>(c)];
    for (Index k = 0; k < bins; ++k) {
      std::complex<double> acc{0.0, 0.0};
      for (std::size_t t = 0; t < taps.size(); ++t) {
        const double phase = -2.0 * std::numbers::pi * static_cast<double>(k) * static_cast<double>(t) /
                             static_cast<double>(frame_len);
        acc += taps[t] * std::polar(1.0, phase);
      }
      h(k, c) = acc;
    }
  }
  Eigen::MatrixXcd g(bins, channels);
  for (Index c = 0; c < channels; ++c) {
    g.col(c) = h.col(c).array() / h.col(ref).array();
  }
  return g;
}

std::vector<double> echo_fir(Index delay, std::uint64_t seed) {
  if (delay < 0 || delay > 40) {
    throw ConfigError("echo FIR delay must lie in [0, 40]");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> gap(3, 7);
  std::uniform_real_distribution<double> jitter(0.8, 1.2);
  std::bernoulli_distribution flip(0.5);
  std::vector<double> h(static_cast<std::size_t>(delay) + 1, 0.0);
  h.back() = 1.0;
  Index pos = delay;
  double gain = 0.35;
  for (int echo = 0; echo < 3; ++echo) {
    pos += gap(rng);
    h.resize(static_cast<std::size_t>(pos) + 1, 0.0);
    h[static_cast<std::size_t>(pos)] = (flip(rng) ? -1.0 : 1.0) * gain * jitter(rng);
    gain *= 0.5;
  }
  return h;
}

namespace {

std::vector<double> pure_delay(Index delay) {
  std::vector<double> h(static_cast<std::size_t>(delay) + 1, 0.0);
  h.back() = 1.0;
  return h;
}

std::vector<std::vector<double>> position_firs(const std::vector<Index>& delays, bool echoes, std::uint64_t seed) {
  std::vector<std::vector<double>> firs;
  for (std::size_t c = 0; c < delays.size(); ++c) {
    firs.push_back(echoes ? echo_fir(delays[c], seed * 131 + c) : pure_delay(delays[c]));
  }
  return firs;
}

}  // namespace

std::vector<TrajectorySegment> static_trajectory(const std::vector<Index>& delays, bool echoes, std::uint64_t seed) {
  return {TrajectorySegment{0, position_firs(delays, echoes, seed)}};
}

std::vector<TrajectorySegment> moving_trajectory(const std::vector<std::vector<Index>>& positions,
                                                 Index segment_samples, Index total_samples, bool echoes,
                                                 std::uint64_t seed) {
  if (positions.empty() || segment_samples < 1) {
    throw ConfigError("moving trajectory needs positions and a positive segment length");
  }
  std::vector<std::vector<std::vector<double>>> firs;
  for (std::size_t p = 0; p < positions.size(); ++p) {
    firs.push_back(position_firs(positions[p], echoes, seed + 7919 * p));
  }
  std::vector<TrajectorySegment> out;
  std::size_t p = 0;
  for (Index start = 0; start < total_samples; start += segment_samples) {
    out.push_back(TrajectorySegment{start, firs[p]});
    p = (p + 1) % positions.size();
  }
  return out;
}

Mixture simulate(const MixtureSpec& spec, const MultichannelSignal& dry, const MultichannelSignal& noise,
                 Index frame_len) {
  spec.validate(1);
  if (dry.channel_count() != 1) {
    throw SizeError("dry source must be single-channel");
  }
  if (noise.channel_count() != spec.channels) {
    throw SizeError("noise must have one channel per microphone");
  }
  if (noise.length() < dry.length()) {
    throw SizeError("noise is shorter than the dry source");
  }
  if (noise.sample_rate != dry.sample_rate) {
    throw ConfigError("dry source and noise differ in sample rate");
  }
  const Index length = dry.length();
  const Eigen::RowVectorXd s = dry.samples.row(0);

  Eigen::MatrixXd clean = Eigen::MatrixXd::Zero(spec.channels, length);
  for (std::size_t seg = 0; seg < spec.trajectory.size(); ++seg) {
    const Index begin = spec.trajectory[seg].start_sample;
    const Index end = seg + 1 < spec.trajectory.size() ? spec.trajectory[seg + 1].start_sample : length;
    for (Index c = 0; c < spec.channels; ++c) {
      const auto& h = spec.trajectory[seg].firs[static_cast<std::size_t>(c)];
      for (Index n = begin; n < std::min(end, length); ++n) {
        double acc = 0.0;
        for (std::size_t t = 0; t < h.size() && static_cast<Index>(t) <= n; ++t) {
          acc += h[t] * s(n - static_cast<Index>(t));
        }
        clean(c, n) = acc;
      }
    }
  }

  const Eigen::MatrixXd y = noise.samples.leftCols(length);
  const double es = clean.squaredNorm();
  const double en = y.squaredNorm();
  if (!(es > 0.0) || !(en > 0.0)) {
    throw DataError("speech and noise stems must have nonzero energy");
  }
  const double alpha = std::sqrt(es / (en * std::pow(10.0, spec.snr_db / 10.0)));

  Mixture mix;
  mix.noise_gain = alpha;
  mix.clean = MultichannelSignal(clean, dry.sample_rate);
  mix.noise = MultichannelSignal(alpha * y, dry.sample_rate);
  mix.mixture = MultichannelSignal(clean + alpha * y, dry.sample_rate);
  for (const TrajectorySegment& seg : spec.trajectory) {
    mix.true_rtf.push_back(SegmentRtf{seg.start_sample, fir_rtf(seg.firs, spec.ref_channel, frame_len)});
  }
  return mix;
}

MultichannelSignal synth_speech(Index length, int sample_rate, std::uint64_t seed) {
  if (length < 1) {
    throw SizeError("speech length must be positive");
  }
  std::mt19937_64 rng(seed);
  const auto uni = [&rng](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double fs = sample_rate;
  const double two_pi = 2.0 * std::numbers::pi;

  Eigen::VectorXd s = Eigen::VectorXd::Zero(length);
  auto pos = static_cast<Index>(uni(0.0, 0.1) * fs);
  while (pos < length) {
    const auto dur = static_cast<Index>(uni(0.08, 0.32) * fs);
    const double gain = uni(0.3, 1.0);
    if (uni(0.0, 1.0) < 0.75) {
      // Voiced: harmonic series with a gliding pitch shaped by three formants.
      const double f0_start = uni(95.0, 230.0);
      const double f0_end = f0_start * uni(0.85, 1.15);
      const double formants[3] = {uni(300.0, 850.0), uni(850.0, 2400.0), uni(2400.0, 3400.0)};
      const double bandwidths[3] = {90.0, 130.0, 200.0};
      const double f0_mean = 0.5 * (f0_start + f0_end);
      const int harmonics = static_cast<int>(std::min(5000.0, 0.45 * fs) / std::max(f0_start, f0_end));
      std::vector<double> amp(static_cast<std::size_t>(harmonics));
      for (int h = 1; h <= harmonics; ++h) {
        double a = 0.02;
        for (int f = 0; f < 3; ++f) {
          const double d = (h * f0_mean - formants[f]) / bandwidths[f];
          a += 1.0 / (1.0 + d * d);
        }
        amp[static_cast<std::size_t>(h - 1)] = a / std::sqrt(static_cast<double>(h));
      }
      double phase = uni(0.0, two_pi);
      for (Index n = 0; n < dur && pos + n < length; ++n) {
        const double t = static_cast<double>(n) / static_cast<double>(dur);
        phase += two_pi * (f0_start + (f0_end - f0_start) * t) / fs;
        const double env = 0.5 * (1.0 - std::cos(two_pi * t));
        double v = 0.0;
        for (int h = 1; h <= harmonics; ++h) {
          v += amp[static_cast<std::size_t>(h - 1)] * std::sin(h * phase);
        }
        s(pos + n) += gain * env * v;
      }
    } else {
      // Unvoiced: pre-emphasized noise burst.
      double prev = 0.0;
      for (Index n = 0; n < dur && pos + n < length; ++n) {
        const double t = static_cast<double>(n) / static_cast<double>(dur);
        const double w = gauss(rng);
        const double env = 0.5 * (1.0 - std::cos(two_pi * t));
        s(pos + n) += 0.6 * gain * env * (w - 0.9 * prev);
        prev = w;
      }
    }
    Index gap = static_cast<Index>(uni(0.03, 0.25) * fs);
    if (uni(0.0, 1.0) < 0.15) {
      gap += static_cast<Index>(uni(0.2, 0.5) * fs);
    }
    pos += dur + gap;
  }
  const double rms = std::sqrt(s.squaredNorm() / static_cast<double>(length));
  if (rms > 0.0) {
    s *= 0.1 / rms;
  }
  return MultichannelSignal(s.transpose(), sample_rate);
}

namespace {

// Paul Kellet's refined pink filter applied to white Gaussian noise.
Eigen::VectorXd colored_noise(NoiseKind kind, Index length, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd out(length);
  double b[7] = {0, 0, 0, 0, 0, 0, 0};
  for (Index n = 0; n < length; ++n) {
    const double w = gauss(rng);
    if (kind == NoiseKind::white) {
      out(n) = w;
      continue;
    }
    b[0] = 0.99886 * b[0] + w * 0.0555179;
    b[1] = 0.99332 * b[1] + w * 0.0750759;
    b[2] = 0.96900 * b[2] + w * 0.1538520;
    b[3] = 0.86650 * b[3] + w * 0.3104856;
    b[4] = 0.55000 * b[4] + w * 0.5329522;
    b[5] = -0.7616 * b[5] - w * 0.0168980;
    out(n) = b[0] + b[1] + b[2] + b[3] + b[4] + b[5] + b[6] + w * 0.5362;
    b[6] = w * 0.115926;
  }
  return out;
}

double rms(const Eigen::VectorXd& v) {
  return std::sqrt(v.squaredNorm() / static_cast<double>(std::max<Index>(1, v.size())));
}

}  // namespace

MultichannelSignal make_noise(const NoiseField& field, Index length, int sample_rate, std::uint64_t seed) {
  if (field.kind == NoiseKind::recorded) {
    throw ConfigError("recorded noise must be read from a file");
  }
  if (field.channels < 1 || length < 1) {
    throw SizeError("noise needs at least one channel and one sample");
  }
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(field.channels, length);
  Index max_delay = 0;
  for (const auto& delays : field.source_delays) {
    if (static_cast<Index>(delays.size()) != field.channels) {
      throw ConfigError("every noise source needs one delay per channel");
    }
    max_delay = std::max(max_delay, *std::max_element(delays.begin(), delays.end()));
  }
  for (const auto& delays : field.source_delays) {
    Eigen::VectorXd src = colored_noise(field.kind, length + max_delay, rng);
    src /= rms(src);
    for (Index c = 0; c < field.channels; ++c) {
      const Index d = delays[static_cast<std::size_t>(c)];
      out.row(c) += src.segment(max_delay - d, length).transpose();
    }
  }
  const double level = field.source_delays.empty() ? 1.0 : field.sensor_level;
  if (level > 0.0) {
    for (Index c = 0; c < field.channels; ++c) {
      Eigen::VectorXd sensor = colored_noise(field.kind, length, rng);
      out.row(c) += (level / rms(sensor)) * sensor.transpose();
    }
  }
  const double total = std::sqrt(out.squaredNorm() / static_cast<double>(out.size()));
  if (total > 0.0) {
    out *= 0.1 / total;
  }
  return MultichannelSignal(std::move(out), sample_rate);
}

// ---------------------------------------------------------------------------
// Decomposition

namespace {

// Basis of delayed copies: column (a, d) holds signal a shifted right by d samples,
// zero-filled at the start and truncated at the end.
class DelayBasis {
 public:
  DelayBasis(const Eigen::MatrixXd& signals, Index taps) : sig_(signals), taps_(taps) {}

  Index size() const { return sig_.rows() * taps_; }

  Eigen::MatrixXd gram() const {
    const Index len = sig_.cols();
    const Index n = size();
    Eigen::MatrixXd g(n, n);
    for (Index a = 0; a < sig_.rows(); ++a) {
      for (Index b = a; b < sig_.rows(); ++b) {
        // Full-overlap correlations for every lag, then trim the tails per delay pair.
        Eigen::VectorXd full(2 * taps_ - 1);
        for (Index tau = -(taps_ - 1); tau < taps_; ++tau) {
          const Index lo = std::max<Index>(0, tau);
          const Index hi = len - 1 + std::min<Index>(0, tau);
          full(tau + taps_ - 1) = hi >= lo ? sig_.row(a).segment(lo, hi - lo + 1).dot(
                                                 sig_.row(b).segment(lo - tau, hi - lo + 1))
                                           : 0.0;
        }
        for (Index d1 = 0; d1 < taps_; ++d1) {
          for (Index d2 = 0; d2 < taps_; ++d2) {
            const Index tau = d2 - d1;
            const Index hi = len - 1 + std::min<Index>(0, tau);
            double v = full(tau + taps_ - 1);
            for (Index m = std::max(len - d1, std::max<Index>(0, tau)); m <= hi; ++m) {
              v -= sig_(a, m) * sig_(b, m - tau);
            }
            g(a * taps_ + d1, b * taps_ + d2) = v;
            g(b * taps_ + d2, a * taps_ + d1) = v;
          }
        }
      }
    }
    return g;
  }

  Eigen::VectorXd correlate(const Eigen::VectorXd& e) const {
    const Index len = sig_.cols();
    Eigen::VectorXd out(size());
    for (Index a = 0; a < sig_.rows(); ++a) {
      for (Index d = 0; d < taps_; ++d) {
        out(a * taps_ + d) = d < len ? sig_.row(a).head(len - d).dot(e.segment(d, len - d).transpose()) : 0.0;
      }
    }
    return out;
  }

  Eigen::VectorXd synthesize(const Eigen::VectorXd& coef) const {
    const Index len = sig_.cols();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(len);
    for (Index a = 0; a < sig_.rows(); ++a) {
      for (Index d = 0; d < taps_ && d < len; ++d) {
        out.segment(d, len - d) += coef(a * taps_ + d) * sig_.row(a).head(len - d).transpose();
      }
    }
    return out;
  }

  Eigen::VectorXd project(const Eigen::VectorXd& e) const {
    const Eigen::MatrixXd g = gram();
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(g);
    const Eigen::VectorXd& lam = eig.eigenvalues();
    const double cutoff = 1e-12 * std::max(lam.cwiseAbs().maxCoeff(), 0.0);
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(lam.size());
    for (Index i = 0; i < lam.size(); ++i) {
      if (lam(i) > cutoff) {
        inv(i) = 1.0 / lam(i);
      }
    }
    const Eigen::MatrixXd& v = eig.eigenvectors();
    const Eigen::VectorXd coef = v * (inv.asDiagonal() * (v.transpose() * correlate(e)));
    return synthesize(coef);
  }

 private:
  const Eigen::MatrixXd& sig_;
  Index taps_;
};

double ratio_db(double num, double den, bool& capped) {
  if (den <= 0.0 && num <= 0.0) {
    capped = true;
    return 0.0;
  }
  if (den <= 0.0) {
    capped = true;
    return kMetricCap;
  }
  if (num <= 0.0) {
    capped = true;
    return -kMetricCap;
  }
  const double db = 10.0 * std::log10(num / den);
  if (db >= kMetricCap || db <= -kMetricCap) {
    capped = true;
    return std::clamp(db, -kMetricCap, kMetricCap);
  }
  return db;
}

}  // namespace

Decomposition decompose(const Eigen::VectorXd& estimate, const Eigen::VectorXd& target,
                        const Eigen::MatrixXd& noise, Index filter_len) {
  if (filter_len < 1) {
    throw ConfigError("filter length must be positive");
  }
  if (target.size() != estimate.size() || noise.cols() != estimate.size()) {
    throw SizeError("estimate and stems differ in length");
  }
  const Eigen::MatrixXd target_row = target.transpose();
  Decomposition d;
  d.target = DelayBasis(target_row, filter_len).project(estimate);
  const Eigen::VectorXd remainder = estimate - d.target;
  d.interference = noise.rows() > 0 ? DelayBasis(noise, filter_len).project(remainder)
                                    : Eigen::VectorXd::Zero(estimate.size());
  d.artifacts = remainder - d.interference;
  return d;
}

Metrics metrics(const Decomposition& d) {
  Metrics m;
  const double st = d.target.squaredNorm();
  const double ei = d.interference.squaredNorm();
  const double ea = d.artifacts.squaredNorm();
  m.sir = ratio_db(st, ei, m.capped);
  m.sdr = ratio_db(st, (d.interference + d.artifacts).squaredNorm(), m.capped);
  m.sar = ratio_db((d.target + d.interference).squaredNorm(), ea, m.capped);
  return m;
}

MetricReport evaluate(const Eigen::VectorXd& estimate, const Eigen::VectorXd& target, const Eigen::MatrixXd& noise,
                      Index filter_len, std::optional<Index> block_samples) {
  const Index len = estimate.size();
  if (target.size() < len || noise.cols() < len) {
    throw SizeError("stems are shorter than the estimate");
  }
  const Eigen::VectorXd t = target.head(len);
  const Eigen::MatrixXd y = noise.leftCols(len);
  MetricReport report;
  report.aggregate = metrics(decompose(estimate, t, y, filter_len));
  if (block_samples) {
    if (*block_samples < filter_len) {
      throw ConfigError("evaluation blocks must be at least one filter long");
    }
    for (Index start = 0; start + *block_samples <= len; start += *block_samples) {
      const Index n = *block_samples;
      report.blocks.push_back(metrics(decompose(estimate.segment(start, n), t.segment(start, n),
                                                y.middleCols(start, n), filter_len)));
    }
  }
  return report;
}

}  // namespace rtfbeam
