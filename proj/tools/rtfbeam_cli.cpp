// rtfbeam: block-online multichannel speech enhancement from the command line.
//
//   rtfbeam enhance  --input mix.wav --output out.wav [options]
//   rtfbeam simulate --config scene.json --out-dir dir/
//   rtfbeam evaluate --estimate out.wav --clean clean.wav --noise noise.wav
//   rtfbeam sweep    --config scene.json --block-ms 250,400,800,2000,batch

#include "rtfbeam/error.hpp"
#include "rtfbeam/evalsim.hpp"
#include "rtfbeam/pipeline.hpp"
#include "rtfbeam/scenario.hpp"
#include "rtfbeam/signal_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace rtfbeam;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

const std::map<std::string, BeamMethod> kBeamformers = {
    {"irtf", BeamMethod::irtf}, {"mvdr", BeamMethod::mvdr}, {"gev", BeamMethod::gev}};
const std::map<std::string, PostfilterKind> kPostfilters = {
    {"none", PostfilterKind::none}, {"wiener", PostfilterKind::wiener}, {"ban", PostfilterKind::ban}};
const std::map<std::string, VadMode> kVadModes = {
    {"none", VadMode::none}, {"oracle", VadMode::oracle}, {"network", VadMode::network}};
const std::map<std::string, Pooling> kPoolings = {{"none", Pooling::none}, {"median", Pooling::median}};

std::optional<Index> parse_block(const std::string& text, const StftConfig& stft) {
  if (text == "batch") {
    return std::nullopt;
  }
  double ms = 0.0;
  try {
    std::size_t used = 0;
    ms = std::stod(text, &used);
    if (used != text.size()) {
      throw std::invalid_argument(text);
    }
  } catch (const std::exception&) {
    throw ConfigError("block length must be milliseconds or 'batch', got '" + text + "'");
  }
  if (!(ms > 0.0)) {
    throw ConfigError("block length must be positive");
  }
  return block_frames_from_ms(ms, stft);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) {
      out.push_back(item);
    }
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  out << text << '\n';
}

PostfilterKind default_postfilter(BeamMethod m) {
  return m == BeamMethod::gev ? PostfilterKind::ban : PostfilterKind::wiener;
}

struct EnhanceArgs {
  std::string input;
  std::string output;
  std::string beamformer = "mvdr";
  std::string block = "800";
  std::string vad = "none";
  std::string weights;
  std::string pooling = "median";
  std::string postfilter;
  int ref_channel = 1;
  double t_mu = 0.05;
  double t_snr = 5.0;
  int sub_block = 10;
  std::string clean;
  std::string noise;
  std::string diagnostics;
  std::string dump_dir;
  std::string encoding = "float32";
  bool any_pairing = false;
};

int run_enhance(const EnhanceArgs& a) {
  PipelineConfig cfg;
  cfg.beamformer = kBeamformers.at(a.beamformer);
  cfg.postfilter = a.postfilter.empty() ? default_postfilter(cfg.beamformer) : kPostfilters.at(a.postfilter);
  cfg.vad = kVadModes.at(a.vad);
  cfg.pooling = kPoolings.at(a.pooling);
  cfg.block_frames = parse_block(a.block, cfg.stft);
  cfg.ref_channel = a.ref_channel - 1;
  cfg.t_mu = a.t_mu;
  cfg.t_snr_db = a.t_snr;
  cfg.rtf.sub_block_len = a.sub_block;
  cfg.allow_any_pairing = a.any_pairing;
  cfg.dump_dir = a.dump_dir;
  cfg.validate();

  const MultichannelSignal mix = read_wav(a.input);
  if (cfg.ref_channel < 0 || cfg.ref_channel >= mix.channel_count()) {
    throw ConfigError("--ref-channel must lie in [1, " + std::to_string(mix.channel_count()) + "]");
  }
  std::optional<MultichannelSignal> clean;
  std::optional<MultichannelSignal> noise;
  std::optional<NetworkWeights> net;
  VadInputs vad;
  if (cfg.vad == VadMode::oracle) {
    if (a.clean.empty() || a.noise.empty()) {
      throw ConfigError("--vad oracle needs --clean and --noise");
    }
    clean = read_wav(a.clean);
    noise = read_wav(a.noise);
    vad.clean = &*clean;
    vad.noise = &*noise;
  } else if (cfg.vad == VadMode::network) {
    if (a.weights.empty()) {
      throw ConfigError("--vad network needs --vad-weights");
    }
    net = load_network(a.weights);
    vad.network = &*net;
  }

  const RunResult result = run(mix, cfg, vad);
  write_wav(result.output, a.output, a.encoding == "pcm16" ? WavEncoding::pcm16 : WavEncoding::float32);
  if (!a.diagnostics.empty()) {
    write_text(a.diagnostics, diagnostics_json(result));
  }
  std::cerr << "enhanced " << result.blocks.size() << " block(s), " << result.output.length() << " samples -> "
            << a.output << '\n';
  return 0;
}

int run_simulate(const std::string& config, const std::string& out_dir) {
  const ScenarioConfig scene = load_scenario(config);
  const Mixture mix = build_mixture(scene);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  write_wav(mix.mixture, dir / "mixture.wav", WavEncoding::float32);
  write_wav(mix.clean, dir / "clean.wav", WavEncoding::float32);
  write_wav(mix.noise, dir / "noise.wav", WavEncoding::float32);
  write_text(dir / "rtf.json", rtf_json(mix, scene.ref_channel, 512));
  std::cerr << "wrote " << mix.mixture.channel_count() << "-channel mixture of " << mix.mixture.length()
            << " samples to " << out_dir << '\n';
  return 0;
}

nlohmann::json metrics_json(const Metrics& m) {
  return {{"sir", m.sir}, {"sdr", m.sdr}, {"sar", m.sar}, {"capped", m.capped}};
}

int run_evaluate(const std::string& estimate_path, const std::string& clean_path, const std::string& noise_path,
                 int filter_len, int ref_channel, double block_ms, const std::string& json_path) {
  const MultichannelSignal est = read_wav(estimate_path);
  const MultichannelSignal clean = read_wav(clean_path);
  const MultichannelSignal noise = read_wav(noise_path);
  if (ref_channel < 1 || ref_channel > clean.channel_count()) {
    throw ConfigError("--ref-channel outside the clean stems");
  }
  std::optional<Index> block;
  if (block_ms > 0.0) {
    block = static_cast<Index>(block_ms * est.sample_rate / 1000.0);
  }
  const Index len = std::min({est.length(), clean.length(), noise.length()});
  const MetricReport report =
      evaluate(est.samples.row(0).head(len).transpose(), clean.samples.row(ref_channel - 1).head(len).transpose(),
               noise.samples.leftCols(len), filter_len, block);
  std::cout << "SIR " << report.aggregate.sir << " dB, SDR " << report.aggregate.sdr << " dB, SAR "
            << report.aggregate.sar << " dB\n";
  if (!json_path.empty()) {
    nlohmann::json blocks = nlohmann::json::array();
    for (const Metrics& m : report.blocks) {
      blocks.push_back(metrics_json(m));
    }
    write_text(json_path, nlohmann::json{{"aggregate", metrics_json(report.aggregate)},
                                         {"blocks", blocks},
                                         {"filter_len", filter_len}}
                              .dump(2));
  }
  return 0;
}

int run_sweep(const std::string& config, const std::string& blocks_arg, const std::string& beams_arg,
              const std::string& vad_arg, const std::string& csv_path) {
  const ScenarioConfig scene = load_scenario(config);
  const Mixture mix = build_mixture(scene);
  const Eigen::VectorXd target = mix.clean.samples.row(scene.ref_channel).transpose();

  std::ostringstream csv;
  csv << "beamformer,postfilter,block_ms,sir,sdr,sar\n";
  {
    const Eigen::VectorXd ref = mix.mixture.samples.row(scene.ref_channel).transpose();
    const Metrics m = evaluate(ref, target, mix.noise.samples).aggregate;
    csv << "unprocessed,none,-," << m.sir << ',' << m.sdr << ',' << m.sar << '\n';
  }
  VadInputs vad{&mix.clean, &mix.noise, nullptr};
  for (const std::string& beam : split_list(beams_arg)) {
    if (!kBeamformers.contains(beam)) {
      throw ConfigError("unknown beamformer '" + beam + "'");
    }
    for (const std::string& block : split_list(blocks_arg)) {
      PipelineConfig cfg;
      cfg.beamformer = kBeamformers.at(beam);
      cfg.postfilter = default_postfilter(cfg.beamformer);
      cfg.vad = kVadModes.at(vad_arg);
      cfg.ref_channel = scene.ref_channel;
      cfg.block_frames = parse_block(block, cfg.stft);
      const RunResult res = run(mix.mixture, cfg, vad);
      const Metrics m = evaluate(res.output.samples.row(0).transpose(), target, mix.noise.samples).aggregate;
      csv << beam << ',' << to_string(cfg.postfilter) << ',' << block << ',' << m.sir << ',' << m.sdr << ','
          << m.sar << '\n';
    }
  }
  if (csv_path.empty()) {
    std::cout << csv.str();
  } else {
    write_text(csv_path, csv.str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Block-online multichannel speech enhancement"};
  app.require_subcommand(1);

  EnhanceArgs ea;
  auto* enhance = app.add_subcommand("enhance", "Enhance a multichannel recording");
  enhance->add_option("--input", ea.input, "Multichannel mixture WAV")->required();
  enhance->add_option("--output", ea.output, "Single-channel output WAV")->required();
  enhance->add_option("--beamformer", ea.beamformer)->check(CLI::IsMember({"irtf", "mvdr", "gev"}));
  enhance->add_option("--block-ms", ea.block, "Block length in ms or 'batch'");
  enhance->add_option("--vad", ea.vad)->check(CLI::IsMember({"none", "oracle", "network"}));
  enhance->add_option("--vad-weights", ea.weights, "Weight file for --vad network");
  enhance->add_option("--pooling", ea.pooling)->check(CLI::IsMember({"none", "median"}));
  enhance->add_option("--postfilter", ea.postfilter, "Defaults to wiener (irtf, mvdr) or ban (gev)")
      ->check(CLI::IsMember({"none", "wiener", "ban"}));
  enhance->add_option("--ref-channel", ea.ref_channel, "1-based reference microphone");
  enhance->add_option("--t-mu", ea.t_mu, "Microphone failure threshold");
  enhance->add_option("--t-snr", ea.t_snr, "Oracle mask threshold in dB");
  enhance->add_option("--sub-block-frames", ea.sub_block, "Frames per RTF sub-block");
  enhance->add_option("--clean", ea.clean, "Clean spatial images (oracle VAD)");
  enhance->add_option("--noise", ea.noise, "Noise images (oracle VAD)");
  enhance->add_option("--dump-diagnostics", ea.diagnostics, "Per-block diagnostics JSON");
  enhance->add_option("--dump-dir", ea.dump_dir, "Directory for per-block mask and RTF CSVs");
  enhance->add_option("--encoding", ea.encoding)->check(CLI::IsMember({"pcm16", "float32"}));
  enhance->add_flag("--any-pairing", ea.any_pairing, "Allow beamformer/post-filter pairings outside the defaults");

  std::string sim_config;
  std::string sim_out;
  auto* simulate_cmd = app.add_subcommand("simulate", "Generate a synthetic mixture with ground truth");
  simulate_cmd->add_option("--config", sim_config, "Scenario JSON")->required();
  simulate_cmd->add_option("--out-dir", sim_out)->required();

  std::string ev_est;
  std::string ev_clean;
  std::string ev_noise;
  std::string ev_json;
  int ev_filter = 32;
  int ev_ref = 1;
  double ev_block = 0.0;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "SIR/SDR/SAR of an estimate against known stems");
  evaluate_cmd->add_option("--estimate", ev_est)->required();
  evaluate_cmd->add_option("--clean", ev_clean)->required();
  evaluate_cmd->add_option("--noise", ev_noise)->required();
  evaluate_cmd->add_option("--filter-len", ev_filter)->check(CLI::PositiveNumber);
  evaluate_cmd->add_option("--ref-channel", ev_ref);
  evaluate_cmd->add_option("--block-ms", ev_block, "Also report metrics per block of this length");
  evaluate_cmd->add_option("--json", ev_json);

  std::string sw_config;
  std::string sw_blocks = "250,400,800,2000,batch";
  std::string sw_beams = "irtf,mvdr,gev";
  std::string sw_vad = "oracle";
  std::string sw_csv;
  auto* sweep_cmd = app.add_subcommand("sweep", "Metrics per block length on a simulated scene (CSV)");
  sweep_cmd->add_option("--config", sw_config)->required();
  sweep_cmd->add_option("--block-ms", sw_blocks);
  sweep_cmd->add_option("--beamformers", sw_beams);
  sweep_cmd->add_option("--vad", sw_vad)->check(CLI::IsMember({"none", "oracle"}));
  sweep_cmd->add_option("--csv", sw_csv);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (enhance->parsed()) {
      return run_enhance(ea);
    }
    if (simulate_cmd->parsed()) {
      return run_simulate(sim_config, sim_out);
    }
    if (evaluate_cmd->parsed()) {
      return run_evaluate(ev_est, ev_clean, ev_noise, ev_filter, ev_ref, ev_block, ev_json);
    }
    if (sweep_cmd->parsed()) {
      return run_sweep(sw_config, sw_blocks, sw_beams, sw_vad, sw_csv);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const SizeError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const FormatError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const UnsupportedError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
