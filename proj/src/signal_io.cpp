#include "rtfbeam/signal_io.hpp"

#include "rtfbeam/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace rtfbeam {

MultichannelSignal::MultichannelSignal(Eigen::MatrixXd s, int rate)
    : samples(std::move(s)), sample_rate(rate) {
  if (samples.rows() < 1 || samples.cols() < 1) {
    throw SizeError("signal needs at least one channel and one sample");
  }
  if (sample_rate <= 0) {
    throw ConfigError("sample rate must be positive");
  }
}

MultichannelSignal MultichannelSignal::slice(Index start, Index count) const {
  if (start < 0 || count < 1 || start + count > length()) {
    throw SizeError("slice [" + std::to_string(start) + ", " +
                    std::to_string(start + count) + ") outside signal of length " +
                    std::to_string(length()));
  }
  return MultichannelSignal(samples.middleCols(start, count), sample_rate);
}

MultichannelSignal MultichannelSignal::select_channels(const std::vector<Index>& channels) const {
  Eigen::MatrixXd out(static_cast<Index>(channels.size()), length());
  for (std::size_t i = 0; i < channels.size(); ++i) {
    if (channels[i] < 0 || channels[i] >= channel_count()) {
      throw SizeError("channel index out of range");
    }
    out.row(static_cast<Index>(i)) = samples.row(channels[i]);
  }
  return MultichannelSignal(std::move(out), sample_rate);
}

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xFF));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

void put32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xFF));
  }
}

void put_tag(std::vector<unsigned char>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

}  // namespace

MultichannelSignal read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError(path.string() + ": not a RIFF/WAVE file");
  }

  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t bits = 0;
  bool have_fmt = false;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::size_t size = le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) {
      // Truncated data chunks are common in the wild; read what is there.
      if (std::memcmp(chunk, "data", 4) == 0) {
        data = bytes.data() + body;
        data_size = bytes.size() - body;
        break;
      }
      throw FormatError(path.string() + ": chunk overruns file");
    }
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) {
        throw FormatError(path.string() + ": fmt chunk too short");
      }
      const unsigned char* f = bytes.data() + body;
      format = le16(f);
      channels = le16(f + 2);
      rate = le32(f + 4);
      bits = le16(f + 14);
      if (format == kFormatExtensible) {
        if (size < 40) {
          throw FormatError(path.string() + ": extensible fmt chunk too short");
        }
        format = le16(f + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = size;
    }
    pos = body + size + (size & 1U);
  }

  if (!have_fmt || data == nullptr) {
    throw FormatError(path.string() + ": missing fmt or data chunk");
  }
  if (channels == 0 || rate == 0) {
    throw FormatError(path.string() + ": zero channels or sample rate");
  }
  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool f32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !f32) {
    throw UnsupportedError(path.string() + ": only 16-bit PCM and 32-bit float are supported (format " +
                           std::to_string(format) + ", " + std::to_string(bits) + " bits)");
  }

  const std::size_t bytes_per_sample = bits / 8;
  const std::size_t frames = data_size / (bytes_per_sample * channels);
  if (frames == 0) {
    throw FormatError(path.string() + ": no audio frames");
  }
  Eigen::MatrixXd samples(channels, static_cast<Index>(frames));
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + (t * channels + c) * bytes_per_sample;
      double v;
      if (pcm16) {
        v = static_cast<std::int16_t>(le16(p)) / 32768.0;
      } else {
        v = std::bit_cast<float>(le32(p));
      }
      samples(static_cast<Index>(c), static_cast<Index>(t)) = v;
    }
  }
  return MultichannelSignal(std::move(samples), static_cast<int>(rate));
}

void write_wav(const MultichannelSignal& signal, const std::filesystem::path& path,
               WavEncoding encoding) {
  if (!signal.samples.allFinite()) {
    throw DataError("refusing to write non-finite samples to " + path.string());
  }
  const auto channels = static_cast<std::uint16_t>(signal.channel_count());
  const auto frames = static_cast<std::uint32_t>(signal.length());
  const std::uint16_t bits = encoding == WavEncoding::pcm16 ? 16 : 32;
  const std::uint16_t block_align = static_cast<std::uint16_t>(channels * bits / 8);
  const std::uint32_t data_size = frames * block_align;

  std::vector<unsigned char> out;
  out.reserve(44 + data_size);
  put_tag(out, "RIFF");
  put32(out, 36 + data_size);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put32(out, 16);
  put16(out, encoding == WavEncoding::pcm16 ? kFormatPcm : kFormatFloat);
  put16(out, channels);
  put32(out, static_cast<std::uint32_t>(signal.sample_rate));
  put32(out, static_cast<std::uint32_t>(signal.sample_rate) * block_align);
  put16(out, block_align);
  put16(out, bits);
  put_tag(out, "data");
  put32(out, data_size);

  constexpr double kMaxPcm = 1.0 - 1.0 / 32768.0;
  for (Index t = 0; t < signal.length(); ++t) {
    for (Index c = 0; c < signal.channel_count(); ++c) {
      const double v = signal.samples(c, t);
      if (encoding == WavEncoding::pcm16) {
        const double clipped = std::clamp(v, -1.0, kMaxPcm);
        const auto code = static_cast<std::int16_t>(std::lround(clipped * 32768.0));
        put16(out, static_cast<std::uint16_t>(code));
      } else {
        put32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      }
    }
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!file) {
    throw IoError("write failed: " + path.string());
  }
}

// ---------------------------------------------------------------------------
// Network weight files

Index NetworkWeights::input_dim() const {
  return layers.empty() ? 0 : layers.front().weights.cols();
}

Index NetworkWeights::output_dim() const {
  return layers.empty() ? 0 : layers.back().weights.rows();
}

void NetworkWeights::validate() const {
  if (layers.empty()) {
    throw FormatError("network has no layers");
  }
  for (std::size_t n = 0; n < layers.size(); ++n) {
    const DenseLayer& layer = layers[n];
    if (layer.weights.rows() == 0 || layer.weights.cols() == 0) {
      throw FormatError("layer " + std::to_string(n) + " has an empty weight matrix");
    }
    if (layer.bias.size() != layer.weights.rows()) {
      throw FormatError("layer " + std::to_string(n) + ": bias length " +
                        std::to_string(layer.bias.size()) + " != weight rows " +
                        std::to_string(layer.weights.rows()));
    }
    if (n > 0 && layer.weights.cols() != layers[n - 1].weights.rows()) {
      throw FormatError("layer " + std::to_string(n) + " expects " +
                        std::to_string(layer.weights.cols()) + " inputs but layer " +
                        std::to_string(n - 1) + " produces " +
                        std::to_string(layers[n - 1].weights.rows()));
    }
    if (!layer.weights.allFinite() || !layer.bias.allFinite()) {
      throw FormatError("layer " + std::to_string(n) + " has non-finite parameters");
    }
  }
  if (input_mean.size() != input_dim() || input_std.size() != input_dim()) {
    throw FormatError("normalization vectors must match the input dimension " +
                      std::to_string(input_dim()));
  }
  if (!input_mean.allFinite() || !(input_std.array() > 0.0).all() || !input_std.allFinite()) {
    throw FormatError("input std must be finite and strictly positive");
  }
}

namespace {

using nlohmann::json;

const json& require(const json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw FormatError(std::string("weight file: missing field '") + key + "'");
  }
  return obj.at(key);
}

Eigen::VectorXd to_vector(const json& arr, const char* what) {
  if (!arr.is_array()) {
    throw FormatError(std::string("weight file: '") + what + "' must be an array");
  }
  Eigen::VectorXd v(static_cast<Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) {
      throw FormatError(std::string("weight file: non-numeric entry in '") + what + "'");
    }
    v(static_cast<Index>(i)) = arr[i].get<double>();
  }
  return v;
}

Eigen::MatrixXd to_matrix(const json& arr) {
  if (!arr.is_array() || arr.empty() || !arr.front().is_array()) {
    throw FormatError("weight file: 'w' must be a non-empty array of rows");
  }
  const std::size_t cols = arr.front().size();
  Eigen::MatrixXd m(static_cast<Index>(arr.size()), static_cast<Index>(cols));
  for (std::size_t r = 0; r < arr.size(); ++r) {
    if (!arr[r].is_array() || arr[r].size() != cols) {
      throw FormatError("weight file: ragged weight matrix");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (!arr[r][c].is_number()) {
        throw FormatError("weight file: non-numeric weight");
      }
      m(static_cast<Index>(r), static_cast<Index>(c)) = arr[r][c].get<double>();
    }
  }
  return m;
}

json from_vector(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

}  // namespace

NetworkWeights parse_network(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("weight file: ") + e.what());
  }
  NetworkWeights net;
  const json& layers = require(doc, "layers");
  if (!layers.is_array()) {
    throw FormatError("weight file: 'layers' must be an array");
  }
  for (const json& entry : layers) {
    DenseLayer layer;
    layer.weights = to_matrix(require(entry, "w"));
    layer.bias = to_vector(require(entry, "b"), "b");
    const json& act = require(entry, "act");
    if (act == "relu") {
      layer.activation = Activation::relu;
    } else if (act == "sigmoid") {
      layer.activation = Activation::sigmoid;
    } else {
      throw FormatError("weight file: unknown activation " + act.dump());
    }
    net.layers.push_back(std::move(layer));
  }
  net.input_mean = to_vector(require(doc, "mean"), "mean");
  net.input_std = to_vector(require(doc, "std"), "std");
  net.validate();
  return net;
}

std::string network_to_json(const NetworkWeights& net) {
  json doc;
  doc["layers"] = json::array();
  for (const DenseLayer& layer : net.layers) {
    json rows = json::array();
    for (Index r = 0; r < layer.weights.rows(); ++r) {
      rows.push_back(from_vector(layer.weights.row(r).transpose()));
    }
    doc["layers"].push_back({{"w", std::move(rows)},
                             {"b", from_vector(layer.bias)},
                             {"act", layer.activation == Activation::relu ? "relu" : "sigmoid"}});
  }
  doc["mean"] = from_vector(net.input_mean);
  doc["std"] = from_vector(net.input_std);
  return doc.dump();
}

NetworkWeights load_network(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  std::ostringstream text;
  text << in.rdbuf();
  return parse_network(text.str());
}

void save_network(const NetworkWeights& net, const std::filesystem::path& path) {
  net.validate();
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  out << network_to_json(net);
  if (!out) {
    throw IoError("write failed: " + path.string());
  }
}

}  // namespace rtfbeam
