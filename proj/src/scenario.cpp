#include "rtfbeam/scenario.hpp"

#include "rtfbeam/error.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace rtfbeam {

namespace {

using nlohmann::json;

std::vector<std::vector<Index>> delay_table(const json& j, const char* what) {
  try {
    return j.get<std::vector<std::vector<Index>>>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("scenario: '") + what + "' must be an array of integer arrays");
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) {
    return fallback;
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario: bad value for '") + key + "': " + e.what());
  }
}

NoiseKind noise_kind(const std::string& name) {
  if (name == "white") return NoiseKind::white;
  if (name == "pink") return NoiseKind::pink;
  if (name == "recorded") return NoiseKind::recorded;
  throw ConfigError("scenario: unknown noise type '" + name + "'");
}

}  // namespace

ScenarioConfig parse_scenario(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
  if (!doc.is_object()) {
    throw ConfigError("scenario must be a JSON object");
  }
  ScenarioConfig cfg;
  cfg.channels = get_or<Index>(doc, "channels", cfg.channels);
  cfg.sample_rate = get_or<int>(doc, "sample_rate", cfg.sample_rate);
  cfg.duration_s = get_or<double>(doc, "duration_s", cfg.duration_s);
  cfg.snr_db = get_or<double>(doc, "snr_db", cfg.snr_db);
  cfg.seed = get_or<std::uint64_t>(doc, "seed", cfg.seed);
  cfg.ref_channel = get_or<Index>(doc, "ref_channel", 1) - 1;

  if (doc.contains("source")) {
    const json& src = doc.at("source");
    const auto type = get_or<std::string>(src, "type", "synthetic");
    if (type == "file") {
      cfg.source_path = get_or<std::string>(src, "path", "");
    } else if (type != "synthetic") {
      throw ConfigError("scenario: source type must be 'synthetic' or 'file'");
    }
  }
  if (doc.contains("noise")) {
    const json& n = doc.at("noise");
    cfg.noise = noise_kind(get_or<std::string>(n, "type", "pink"));
    cfg.noise_path = get_or<std::string>(n, "path", "");
    if (n.contains("sources")) {
      cfg.noise_sources = delay_table(n.at("sources"), "noise.sources");
    }
    cfg.sensor_level = get_or<double>(n, "sensor_level", cfg.sensor_level);
  }
  if (doc.contains("trajectory")) {
    const json& t = doc.at("trajectory");
    const auto type = get_or<std::string>(t, "type", "static");
    if (type != "static" && type != "moving") {
      throw ConfigError("scenario: trajectory type must be 'static' or 'moving'");
    }
    cfg.moving = type == "moving";
    if (t.contains("positions")) {
      cfg.positions = delay_table(t.at("positions"), "trajectory.positions");
    } else if (t.contains("delays")) {
      cfg.positions = {get_or<std::vector<Index>>(t, "delays", {})};
    }
    cfg.segment_s = get_or<double>(t, "segment_s", cfg.segment_s);
    cfg.echoes = get_or<bool>(t, "echoes", cfg.echoes);
  }
  if (cfg.noise == NoiseKind::recorded && cfg.noise_path.empty()) {
    throw ConfigError("scenario: recorded noise needs a path");
  }
  return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  std::ostringstream text;
  text << in.rdbuf();
  return parse_scenario(text.str());
}

Mixture build_mixture(const ScenarioConfig& cfg, Index frame_len, Index hop) {
  if (!(cfg.duration_s > 0.0) || cfg.sample_rate <= 0) {
    throw ConfigError("scenario: duration and sample rate must be positive");
  }
  if (cfg.positions.empty()) {
    throw ConfigError("scenario: at least one source position is needed");
  }
  for (const auto& p : cfg.positions) {
    if (static_cast<Index>(p.size()) != cfg.channels) {
      throw ConfigError("scenario: every position needs one delay per channel");
    }
  }

  MultichannelSignal dry;
  if (cfg.source_path.empty()) {
    const auto length = static_cast<Index>(std::llround(cfg.duration_s * cfg.sample_rate));
    dry = synth_speech(length, cfg.sample_rate, cfg.seed);
  } else {
    dry = read_wav(cfg.source_path);
    if (dry.channel_count() != 1) {
      dry = dry.select_channels({0});
    }
  }
  const Index length = dry.length();

  MultichannelSignal noise;
  if (cfg.noise == NoiseKind::recorded) {
    noise = read_wav(cfg.noise_path);
  } else {
    NoiseField field;
    field.kind = cfg.noise;
    field.channels = cfg.channels;
    field.source_delays = cfg.noise_sources;
    field.sensor_level = cfg.sensor_level;
    noise = make_noise(field, length, cfg.sample_rate, cfg.seed * 2654435761ULL + 17);
  }

  MixtureSpec spec;
  spec.channels = cfg.channels;
  spec.noise = cfg.noise;
  spec.snr_db = cfg.snr_db;
  spec.ref_channel = cfg.ref_channel;
  if (cfg.moving) {
    // Segment boundaries fall on the hop grid so they coincide with block starts.
    const Index seg = std::max<Index>(hop, static_cast<Index>(std::llround(cfg.segment_s * cfg.sample_rate / hop)) * hop);
    spec.trajectory = moving_trajectory(cfg.positions, seg, length, cfg.echoes, cfg.seed);
  } else {
    spec.trajectory = static_trajectory(cfg.positions.front(), cfg.echoes, cfg.seed);
  }
  spec.validate(hop);
  return simulate(spec, dry, noise, frame_len);
}

std::string rtf_json(const Mixture& mix, Index ref_channel, Index frame_len) {
  json segments = json::array();
  for (const SegmentRtf& seg : mix.true_rtf) {
    json re = json::array();
    json im = json::array();
    for (Index k = 0; k < seg.g.rows(); ++k) {
      std::vector<double> r;
      std::vector<double> i;
      for (Index c = 0; c < seg.g.cols(); ++c) {
        r.push_back(seg.g(k, c).real());
        i.push_back(seg.g(k, c).imag());
      }
      re.push_back(r);
      im.push_back(i);
    }
    segments.push_back({{"start_sample", seg.start_sample}, {"real", re}, {"imag", im}});
  }
  json doc = {{"ref_channel", ref_channel + 1}, {"frame_len", frame_len}, {"segments", segments}};
  return doc.dump();
}

}  // namespace rtfbeam
