// mudsim: Monte-Carlo BER simulation of iterative multiuser receivers.
//
//   mudsim run --preset paper-fig2 --users 16 --ebn0-db 5 --iters 5 --frames 200
//              --seed 42 --detector talg --out out.csv

#include <CLI11.hpp>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "mud/harness.hpp"

namespace {

struct Flags {
  std::string config_path;
  std::string preset;
  std::optional<int> users, gain, iters;
  std::optional<double> ebn0_db, floor, rho_margin;
  std::optional<std::size_t> frames, info_bits, pmax, pmin, plist;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> detector, t_threshold, cadence, modulation, generators;
  bool terminated = false;
  bool max_log = false;
  bool extended = false;
  std::string out;
  std::string format = "csv";
  unsigned threads = 1;
};

double parse_threshold(const std::string& text) {
  if (text == "inf" || text == "infinity") return mud::kInfiniteThreshold;
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used == text.size()) return v;
  } catch (const std::exception&) {
  }
  throw mud::Error(mud::ErrorCode::ConfigInvalid, "threshold '" + text + "' is not a number");
}

mud::SimConfig build_config(const Flags& f, const CLI::App& run) {
  nlohmann::json file = nlohmann::json::object();
  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    mud::require(static_cast<bool>(in), mud::ErrorCode::Io, "cannot read config '" + f.config_path + "'");
    try {
      file = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw mud::Error(mud::ErrorCode::ConfigInvalid, std::string("config file: ") + e.what());
    }
  }

  std::string preset = f.preset;
  if (preset.empty() && file.contains("preset")) preset = file["preset"].get<std::string>();
  bool extended = f.extended || file.value("extended", false);

  mud::SimConfig cfg;
  if (!preset.empty()) {
    mud::require(preset == "paper-fig2", mud::ErrorCode::ConfigInvalid, "unknown preset '" + preset + "'");
    cfg = mud::paper_fig2_preset(extended ? 19 : 16);
  } else if (extended) {
    cfg.users = 19;
    cfg.iterations = 20;
  }
  mud::apply_config_json(file, cfg);

  if (f.users) cfg.users = *f.users;
  if (f.gain) cfg.gain = *f.gain;
  if (f.iters) cfg.iterations = *f.iters;
  if (f.ebn0_db) cfg.ebn0_db = *f.ebn0_db;
  if (f.floor) cfg.floor = *f.floor;
  if (f.rho_margin) cfg.rho_margin = *f.rho_margin;
  if (f.frames) cfg.frames = *f.frames;
  if (f.info_bits) cfg.info_bits = *f.info_bits;
  if (f.pmax) cfg.search.p_max = *f.pmax;
  if (f.pmin) cfg.search.p_min = *f.pmin;
  if (f.plist) cfg.search.p_list = *f.plist;
  if (f.seed) cfg.seed = *f.seed;
  if (f.detector) cfg.detector = mud::parse_detector(*f.detector);
  if (f.t_threshold) cfg.search.t_threshold = parse_threshold(*f.t_threshold);
  if (f.cadence) mud::apply_config_json({{"cadence", *f.cadence}}, cfg);
  if (f.modulation) cfg.modulation = *f.modulation;
  if (f.generators) cfg.generators = *f.generators;
  if (run.count("--terminated") > 0) cfg.termination = mud::Termination::Terminated;
  if (run.count("--max-log") > 0) cfg.max_log = true;

  // the benchmark Pmin schedule follows the final user count unless set explicitly
  if (!preset.empty() && !f.pmin && !file.contains("pmin")) cfg.search.p_min = mud::benchmark_p_min(cfg.users);
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Iterative multiuser detection BER simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("mudsim ") + mud::kVersion);

  Flags f;
  auto* run = app.add_subcommand("run", "run a Monte-Carlo simulation");
  run->add_option("--config", f.config_path, "JSON config file; command-line flags override it");
  run->add_option("--preset", f.preset, "parameter preset")->check(CLI::IsMember({"paper-fig2"}));
  run->add_option("--users,-K", f.users, "number of users K");
  run->add_option("--gain,-L", f.gain, "spreading gain L");
  run->add_option("--ebn0-db", f.ebn0_db, "Eb/N0 in dB");
  run->add_option("--iters", f.iters, "receiver iterations");
  run->add_option("--frames", f.frames, "Monte-Carlo frames");
  run->add_option("--info-bits", f.info_bits, "information bits per user and frame");
  run->add_option("--seed", f.seed, "master seed");
  run->add_option("--detector", f.detector, "inner detector")
      ->check(CLI::IsMember({"talg", "pic", "lmmse", "exhaustive"}));
  run->add_option("--t-threshold", f.t_threshold, "T-algorithm threshold in multiples of N0 (or 'inf')");
  run->add_option("--pmax", f.pmax, "maximum retained paths per depth");
  run->add_option("--pmin", f.pmin, "minimum retained paths per depth");
  run->add_option("--plist", f.plist, "leaves used for marginalization (default pmax)");
  run->add_option("--floor", f.floor, "probability floor");
  run->add_option("--rho-margin", f.rho_margin, "slack added to the rho lower bound");
  run->add_option("--cadence", f.cadence, "spreading redraw cadence")->check(CLI::IsMember({"frame", "symbol"}));
  run->add_option("--modulation", f.modulation, "symbol alphabet")->check(CLI::IsMember({"bpsk", "qpsk", "qam16"}));
  run->add_option("--generators", f.generators, "octal generator polynomials, e.g. 05,07");
  run->add_flag("--terminated", f.terminated, "terminate each frame with a zero tail");
  run->add_flag("--max-log", f.max_log, "max-log instead of exact log-MAP decoding");
  run->add_flag("--extended", f.extended, "long benchmark point: K = 19, 20 iterations, Pmin = 128");
  run->add_option("--out", f.out, "output file (stdout when omitted)");
  run->add_option("--format", f.format, "output format")->check(CLI::IsMember({"csv", "json"}));
  run->add_option("--threads", f.threads, "worker threads (results do not depend on this)")
      ->check(CLI::Range(1u, 1024u));

  CLI11_PARSE(app, argc, argv);

  try {
    const mud::SimConfig cfg = build_config(f, *run);
    const auto report = mud::run_simulation(cfg, f.threads);
    const auto format = f.format == "json" ? mud::ReportFormat::Json : mud::ReportFormat::Csv;
    if (f.out.empty()) {
      std::cout << (format == mud::ReportFormat::Csv ? mud::report_to_csv(report)
                                                     : mud::report_to_json(report).dump(2) + "\n");
    } else {
      mud::emit_report(report, format, f.out);
      const auto& last = report.iterations.back();
      std::cerr << "K=" << cfg.users << " L=" << cfg.gain << " Eb/N0=" << cfg.ebn0_db << " dB  " << report.frames
                << " frames  final BER " << last.ber() << " (" << last.bit_errors << "/" << last.bits << ")\n";
    }
  } catch (const mud::Error& e) {
    std::cerr << "mudsim: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "mudsim: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
