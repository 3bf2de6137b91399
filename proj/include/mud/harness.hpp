#pragma once

// Canonical iterative receiver and Monte-Carlo driver.
//
// Per frame: draw data, encode, interleave, map, spread and add noise; then
// alternate between the multiuser detector (over every channel use) and the K
// single-user decoders, exchanging extrinsics through the interleavers. Bit
// errors are counted on information bits after every iteration.

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "mud/baselines.hpp"
#include "mud/constellation.hpp"
#include "mud/error.hpp"
#include "mud/fec.hpp"
#include "mud/gram.hpp"
#include "mud/marginal.hpp"
#include "mud/model.hpp"
#include "mud/oracle.hpp"
#include "mud/probability.hpp"
#include "mud/rng.hpp"
#include "mud/search.hpp"

namespace mud {

inline constexpr const char* kVersion = "1.0.0";

enum class DetectorKind { TAlgorithm, Pic, Lmmse, Exhaustive };
enum class SpreadingCadence { PerFrame, PerSymbol };

inline std::string to_string(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::TAlgorithm: return "talg";
    case DetectorKind::Pic: return "pic";
    case DetectorKind::Lmmse: return "lmmse";
    case DetectorKind::Exhaustive: return "exhaustive";
  }
  return "?";
}

inline DetectorKind parse_detector(const std::string& name) {
  if (name == "talg") return DetectorKind::TAlgorithm;
  if (name == "pic") return DetectorKind::Pic;
  if (name == "lmmse") return DetectorKind::Lmmse;
  if (name == "exhaustive") return DetectorKind::Exhaustive;
  throw Error(ErrorCode::ConfigInvalid, "unknown detector '" + name + "'");
}

inline Constellation make_constellation(const std::string& name) {
  if (name == "bpsk") return Constellation::bpsk();
  if (name == "qpsk") return Constellation::qpsk();
  if (name == "qam16") return Constellation::qam16();
  throw Error(ErrorCode::ConfigInvalid, "unknown modulation '" + name + "'");
}

struct SimConfig {
  int users = 16;
  int gain = 8;
  double ebn0_db = 5.0;
  int iterations = 20;
  DetectorKind detector = DetectorKind::TAlgorithm;
  SearchParams search{16.0, 512, 32, 0};
  std::size_t frames = 1;
  std::size_t info_bits = 500;
  std::uint64_t seed = 1;
  double floor = kDefaultFloor;
  SpreadingCadence cadence = SpreadingCadence::PerFrame;
  Termination termination = Termination::Unterminated;
  double rho_margin = kDefaultRhoMargin;
  bool max_log = false;
  std::string modulation = "bpsk";
  std::string generators = "05,07";

  bool operator==(const SimConfig&) const = default;

  void validate() const {
    auto check = [](bool ok, const std::string& what) { require(ok, ErrorCode::ConfigInvalid, what); };
    check(users >= 1, "users must be >= 1");
    check(gain >= 1, "gain must be >= 1");
    check(iterations >= 1, "iterations must be >= 1");
    check(frames >= 1, "frames must be >= 1");
    check(info_bits >= 1, "info bits per frame must be >= 1");
    check(std::isfinite(ebn0_db), "Eb/N0 must be finite");
    check(floor >= 0.0 && floor < 0.5, "floor must lie in [0, 0.5)");
    check(rho_margin > 0.0, "rho margin must be positive");
    try {
      search.validate();
      const auto c = make_constellation(modulation);
      const auto code = ConvCode::from_octal(generators);
      check(code.coded_length(info_bits, termination) % static_cast<std::size_t>(c.bits_per_symbol()) == 0,
            "coded frame length must be divisible by bits per symbol");
      check(floor * static_cast<double>(c.size()) <= 1.0, "floor too large for the alphabet");
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ConfigInvalid) throw;
      throw Error(ErrorCode::ConfigInvalid, e.what());
    }
  }
};

/// Minimum retained paths per depth used for the benchmark loads.
inline std::size_t benchmark_p_min(int users) {
  if (users <= 16) return 32;
  if (users <= 18) return 64;
  return 128;
}

/// L = 8, BPSK, (05,07), I = 500, T = 16 N0, Pmax = 512, Pmin by load, 5 dB,
/// spreading redrawn every channel use.
inline SimConfig paper_fig2_preset(int users = 16) {
  SimConfig c;
  c.users = users;
  c.gain = 8;
  c.ebn0_db = 5.0;
  c.iterations = 20;
  c.detector = DetectorKind::TAlgorithm;
  c.search = SearchParams{16.0, 512, benchmark_p_min(users), 0};
  c.info_bits = 500;
  c.modulation = "bpsk";
  c.generators = "05,07";
  c.cadence = SpreadingCadence::PerSymbol;
  return c;
}

struct IterationStats {
  std::uint64_t bits = 0;
  std::uint64_t bit_errors = 0;
  std::uint64_t channel_uses = 0;
  std::uint64_t node_expansions = 0;
  std::uint64_t max_node_expansions = 0;  // largest count in any single channel use

  [[nodiscard]] double ber() const { return bits == 0 ? 0.0 : static_cast<double>(bit_errors) / static_cast<double>(bits); }
  [[nodiscard]] double avg_node_expansions() const {
    return channel_uses == 0 ? 0.0 : static_cast<double>(node_expansions) / static_cast<double>(channel_uses);
  }

  void merge(const IterationStats& o) {
    bits += o.bits;
    bit_errors += o.bit_errors;
    channel_uses += o.channel_uses;
    node_expansions += o.node_expansions;
    max_node_expansions = std::max(max_node_expansions, o.max_node_expansions);
  }

  bool operator==(const IterationStats&) const = default;
};

struct BerReport {
  SimConfig config;
  std::uint64_t frames = 0;
  std::vector<IterationStats> iterations;
  std::string version = kVersion;

  bool operator==(const BerReport&) const = default;
};

using FrameResult = std::vector<IterationStats>;

/// Everything shared by all frames of one run.
class SimulationContext {
 public:
  explicit SimulationContext(SimConfig config)
      : config_((config.validate(), std::move(config))),
        constellation_(make_constellation(config_.modulation)),
        code_(ConvCode::from_octal(config_.generators)),
        noise_(ebn0_to_noise(config_.ebn0_db, code_.rate(), static_cast<int>(constellation_.size()),
                             constellation_.power())),
        rho_(choose_rho(constellation_, config_.users, config_.rho_margin)) {
    const std::size_t coded = code_.coded_length(config_.info_bits, config_.termination);
    for (int k = 0; k < config_.users; ++k) {
      Rng rng(config_.seed, 0, StreamPurpose::Interleaver, static_cast<std::uint64_t>(k));
      interleavers_.push_back(Interleaver::random(coded, rng));
    }
  }

  [[nodiscard]] const SimConfig& config() const noexcept { return config_; }
  [[nodiscard]] const Constellation& constellation() const noexcept { return constellation_; }
  [[nodiscard]] const ConvCode& code() const noexcept { return code_; }
  [[nodiscard]] const NoiseSpec& noise() const noexcept { return noise_; }
  [[nodiscard]] double rho() const noexcept { return rho_; }
  [[nodiscard]] const std::vector<Interleaver>& interleavers() const noexcept { return interleavers_; }

 private:
  SimConfig config_;
  Constellation constellation_;
  ConvCode code_;
  NoiseSpec noise_;
  double rho_;
  std::vector<Interleaver> interleavers_;
};

/// Per-worker detector state for one channel realization.
class InnerDetector {
 public:
  InnerDetector(const SimulationContext& ctx, const SpreadingMatrix& s) : ctx_(ctx), s_(s) {
    if (ctx.config().detector == DetectorKind::TAlgorithm) transform_.emplace(s, ctx.rho());
  }

  /// Extrinsic symbol probabilities for one channel use; adds the number of
  /// tree nodes evaluated to `expansions`.
  ProbabilityMatrix detect(const Observation& r, const ProbabilityMatrix& priors, TreeSearcher& searcher,
                           std::uint64_t& expansions) const {
    const auto& cfg = ctx_.config();
    const auto& c = ctx_.constellation();
    const auto& noise = ctx_.noise();
    switch (cfg.detector) {
      case DetectorKind::TAlgorithm: {
        const auto stats = matched_filter(r, s_);
        const auto list = searcher.search(stats, *transform_, priors, c, cfg.search, noise.n0);
        expansions += list.node_expansions;
        // unfloored posterior: flooring before the division by a floored prior
        // would erase the extrinsic of every confidently-known symbol
        const auto posterior = list_to_posteriors(list, priors.alphabet(), noise.n0, 0.0);
        return extrinsic_from_posterior(posterior, priors, cfg.floor);
      }
      case DetectorKind::Exhaustive: {
        const auto posterior = brute_force_symbol_app(r, s_, priors, c, noise.n0, 0.0);
        expansions += static_cast<std::uint64_t>(std::pow(static_cast<double>(c.size()), s_.users()));
        return extrinsic_from_posterior(posterior, priors, cfg.floor);
      }
      case DetectorKind::Pic: return soft_pic_detect(r, s_, priors, c, noise, cfg.floor);
      case DetectorKind::Lmmse: return lmmse_detect(r, s_, priors, c, noise, cfg.floor);
    }
    return priors;
  }

 private:
  const SimulationContext& ctx_;
  const SpreadingMatrix& s_;
  std::optional<GramTransform> transform_;
};

/// Bit extrinsics of one user's symbol from its symbol extrinsic, weighting
/// the other bits of the label by their priors.
inline void symbol_to_bit_extrinsics(const ProbabilityMatrix& ext, Eigen::Index k, const Constellation& c,
                                     std::span<const BitPmf> bit_priors, std::span<BitPmf> out, double floor) {
  const int m = c.bits_per_symbol();
  for (int b = 0; b < m; ++b) {
    BitPmf acc{0.0, 0.0};
    for (std::size_t q = 0; q < c.size(); ++q) {
      double w = ext(static_cast<Eigen::Index>(q), k);
      for (int other = 0; other < m; ++other)
        if (other != b) w *= bit_priors[static_cast<std::size_t>(other)][c.label_bit(q, other)];
      acc[c.label_bit(q, b)] += w;
    }
    normalize_with_floor(acc, floor);
    out[static_cast<std::size_t>(b)] = acc;
  }
}

inline double symbol_prior_from_bits(std::size_t q, const Constellation& c, std::span<const BitPmf> bit_priors) {
  double p = 1.0;
  for (int b = 0; b < c.bits_per_symbol(); ++b) p *= bit_priors[static_cast<std::size_t>(b)][c.label_bit(q, b)];
  return p;
}

/// One Monte-Carlo frame through the full iterative receiver.
inline FrameResult run_frame(const SimulationContext& ctx, std::uint64_t frame_index, TreeSearcher& searcher) {
  const auto& cfg = ctx.config();
  const auto& c = ctx.constellation();
  const auto users = static_cast<std::size_t>(cfg.users);
  const auto m = static_cast<std::size_t>(c.bits_per_symbol());

  Rng data_rng(cfg.seed, frame_index, StreamPurpose::InfoBits);
  Rng spread_rng(cfg.seed, frame_index, StreamPurpose::Spreading);
  Rng noise_rng(cfg.seed, frame_index, StreamPurpose::Noise);

  std::vector<Bits> info(users, Bits(cfg.info_bits));
  for (auto& user : info)
    for (auto& bit : user) bit = data_rng.bit() ? 1 : 0;
  const SymbolFrame frame = encode_and_modulate(info, ctx.code(), ctx.interleavers(), c, cfg.termination);
  const std::size_t uses = frame.uses;

  std::vector<SpreadingMatrix> spreading;
  if (cfg.cadence == SpreadingCadence::PerFrame) {
    spreading.push_back(draw_spreading(cfg.users, cfg.gain, spread_rng));
  } else {
    for (std::size_t n = 0; n < uses; ++n) spreading.push_back(draw_spreading(cfg.users, cfg.gain, spread_rng));
  }
  auto spreading_at = [&](std::size_t n) -> const SpreadingMatrix& {
    return spreading[cfg.cadence == SpreadingCadence::PerFrame ? 0 : n];
  };
  std::vector<Observation> received;
  received.reserve(uses);
  for (std::size_t n = 0; n < uses; ++n)
    received.push_back(observe(spreading_at(n), frame.symbol_vector(n, c), ctx.noise(), noise_rng));

  std::vector<InnerDetector> detectors;
  detectors.reserve(spreading.size());
  for (const auto& s : spreading) detectors.emplace_back(ctx, s);

  const std::size_t coded = uses * m;
  // decoder extrinsics in transmitted (interleaved) order, i.e. detector bit priors
  std::vector<BitProbabilities> bit_priors(users, uniform_bits(coded));
  std::vector<ProbabilityMatrix> priors(uses, ProbabilityMatrix::uniform(static_cast<Eigen::Index>(c.size()), cfg.users));
  BitProbabilities detector_bits(coded);

  const BcjrOptions bcjr{cfg.termination, cfg.max_log, cfg.floor};
  FrameResult result(static_cast<std::size_t>(cfg.iterations));
  for (int it = 0; it < cfg.iterations; ++it) {
    auto& stats = result[static_cast<std::size_t>(it)];
    std::vector<ProbabilityMatrix> extrinsic;
    extrinsic.reserve(uses);
    for (std::size_t n = 0; n < uses; ++n) {
      std::uint64_t expansions = 0;
      extrinsic.push_back(
          detectors[cfg.cadence == SpreadingCadence::PerFrame ? 0 : n].detect(received[n], priors[n], searcher,
                                                                               expansions));
      stats.node_expansions += expansions;
      stats.max_node_expansions = std::max(stats.max_node_expansions, expansions);
    }
    stats.channel_uses = uses;

    for (std::size_t k = 0; k < users; ++k) {
      for (std::size_t n = 0; n < uses; ++n)
        symbol_to_bit_extrinsics(extrinsic[n], static_cast<Eigen::Index>(k), c,
                                 std::span<const BitPmf>(&bit_priors[k][n * m], m),
                                 std::span<BitPmf>(&detector_bits[n * m], m), cfg.floor);
      const auto decoded = bcjr_decode(permute(detector_bits, ctx.interleavers()[k], Direction::Inverse), ctx.code(), bcjr);
      const Bits decisions = hard_decide(decoded.info_posterior);
      for (std::size_t i = 0; i < cfg.info_bits; ++i) stats.bit_errors += decisions[i] != info[k][i] ? 1 : 0;
      stats.bits += cfg.info_bits;
      bit_priors[k] = permute(decoded.coded_extrinsic, ctx.interleavers()[k], Direction::Forward);
    }

    if (it + 1 == cfg.iterations) break;
    for (std::size_t n = 0; n < uses; ++n) {
      Eigen::MatrixXd w(static_cast<Eigen::Index>(c.size()), cfg.users);
      for (std::size_t k = 0; k < users; ++k)
        for (std::size_t q = 0; q < c.size(); ++q)
          w(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(k)) =
              symbol_prior_from_bits(q, c, std::span<const BitPmf>(&bit_priors[k][n * m], m));
      priors[n] = ProbabilityMatrix::from_weights(std::move(w), cfg.floor);
    }
  }
  return result;
}

/// Runs all frames on `workers` threads. Each frame draws from its own seeded
/// streams and results are reduced in frame order, so the report does not
/// depend on the worker count.
inline BerReport run_simulation(const SimConfig& config, unsigned workers = 1) {
  const SimulationContext ctx(config);
  const std::size_t frames = config.frames;
  std::vector<FrameResult> results(frames);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto work = [&] {
    TreeSearcher searcher;
    for (std::size_t f = next++; f < frames && !failed; f = next++) {
      try {
        results[f] = run_frame(ctx, f, searcher);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(frames)));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < workers; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  BerReport report;
  report.config = config;
  report.frames = frames;
  report.iterations.resize(static_cast<std::size_t>(config.iterations));
  for (const auto& frame : results)
    for (std::size_t i = 0; i < frame.size(); ++i) report.iterations[i].merge(frame[i]);
  return report;
}

// ---------------------------------------------------------------------------
// configuration and report serialization

inline nlohmann::json threshold_to_json(double t) {
  if (std::isinf(t)) return "inf";
  return t;
}

inline double threshold_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    require(s == "inf" || s == "infinity", ErrorCode::ConfigInvalid, "threshold must be a number or \"inf\"");
    return kInfiniteThreshold;
  }
  return j.get<double>();
}

inline nlohmann::json config_to_json(const SimConfig& c) {
  return {
      {"users", c.users},
      {"gain", c.gain},
      {"ebn0_db", c.ebn0_db},
      {"iters", c.iterations},
      {"detector", to_string(c.detector)},
      {"t_threshold", threshold_to_json(c.search.t_threshold)},
      {"pmax", c.search.p_max},
      {"pmin", c.search.p_min},
      {"plist", c.search.p_list},
      {"frames", c.frames},
      {"info_bits", c.info_bits},
      {"seed", c.seed},
      {"floor", c.floor},
      {"cadence", c.cadence == SpreadingCadence::PerFrame ? "frame" : "symbol"},
      {"terminated", c.termination == Termination::Terminated},
      {"rho_margin", c.rho_margin},
      {"max_log", c.max_log},
      {"modulation", c.modulation},
      {"generators", c.generators},
  };
}

/// Overlays the keys present in `j` onto `c`. Unknown keys are rejected.
inline void apply_config_json(const nlohmann::json& j, SimConfig& c) {
  require(j.is_object(), ErrorCode::ConfigInvalid, "configuration must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "users") c.users = value.get<int>();
      else if (key == "gain") c.gain = value.get<int>();
      else if (key == "ebn0_db") c.ebn0_db = value.get<double>();
      else if (key == "iters") c.iterations = value.get<int>();
      else if (key == "detector") c.detector = parse_detector(value.get<std::string>());
      else if (key == "t_threshold") c.search.t_threshold = threshold_from_json(value);
      else if (key == "pmax") c.search.p_max = value.get<std::size_t>();
      else if (key == "pmin") c.search.p_min = value.get<std::size_t>();
      else if (key == "plist") c.search.p_list = value.get<std::size_t>();
      else if (key == "frames") c.frames = value.get<std::size_t>();
      else if (key == "info_bits") c.info_bits = value.get<std::size_t>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "floor") c.floor = value.get<double>();
      else if (key == "cadence") {
        const auto s = value.get<std::string>();
        require(s == "frame" || s == "symbol", ErrorCode::ConfigInvalid, "cadence must be frame or symbol");
        c.cadence = s == "frame" ? SpreadingCadence::PerFrame : SpreadingCadence::PerSymbol;
      } else if (key == "terminated") c.termination = value.get<bool>() ? Termination::Terminated : Termination::Unterminated;
      else if (key == "rho_margin") c.rho_margin = value.get<double>();
      else if (key == "max_log") c.max_log = value.get<bool>();
      else if (key == "modulation") c.modulation = value.get<std::string>();
      else if (key == "generators") c.generators = value.get<std::string>();
      else if (key == "preset" || key == "out" || key == "format" || key == "threads" || key == "extended") {
        // run options, handled by the caller
      } else {
        throw Error(ErrorCode::ConfigInvalid, "unknown configuration key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, e.what());
  }
}

inline nlohmann::json report_to_json(const BerReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < r.iterations.size(); ++i) {
    const auto& it = r.iterations[i];
    rows.push_back({
        {"detector", to_string(r.config.detector)},
        {"K", r.config.users},
        {"L", r.config.gain},
        {"ebn0_db", r.config.ebn0_db},
        {"iteration", i + 1},
        {"frames", r.frames},
        {"bits", it.bits},
        {"bit_errors", it.bit_errors},
        {"ber", it.ber()},
        {"avg_node_expansions", it.avg_node_expansions()},
        {"channel_uses", it.channel_uses},
        {"node_expansions", it.node_expansions},
        {"max_node_expansions", it.max_node_expansions},
    });
  }
  return {{"version", r.version}, {"seed", r.config.seed}, {"config", config_to_json(r.config)}, {"rows", rows}};
}

inline BerReport report_from_json(const nlohmann::json& j) {
  BerReport r;
  try {
    r.version = j.at("version").get<std::string>();
    apply_config_json(j.at("config"), r.config);
    const auto& rows = j.at("rows");
    r.frames = rows.empty() ? 0 : rows.front().at("frames").get<std::uint64_t>();
    for (const auto& row : rows) {
      IterationStats it;
      it.bits = row.at("bits").get<std::uint64_t>();
      it.bit_errors = row.at("bit_errors").get<std::uint64_t>();
      it.channel_uses = row.at("channel_uses").get<std::uint64_t>();
      it.node_expansions = row.at("node_expansions").get<std::uint64_t>();
      it.max_node_expansions = row.at("max_node_expansions").get<std::uint64_t>();
      r.iterations.push_back(it);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, std::string("malformed report: ") + e.what());
  }
  return r;
}

inline std::string report_to_csv(const BerReport& r) {
  std::string out = "detector,K,L,ebn0_db,iteration,frames,bits,bit_errors,ber,avg_node_expansions\n";
  char line[512];
  for (std::size_t i = 0; i < r.iterations.size(); ++i) {
    const auto& it = r.iterations[i];
    std::snprintf(line, sizeof line, "%s,%d,%d,%.6g,%zu,%llu,%llu,%llu,%.9e,%.6f\n", to_string(r.config.detector).c_str(),
                  r.config.users, r.config.gain, r.config.ebn0_db, i + 1, static_cast<unsigned long long>(r.frames),
                  static_cast<unsigned long long>(it.bits), static_cast<unsigned long long>(it.bit_errors), it.ber(),
                  it.avg_node_expansions());
    out += line;
  }
  return out;
}

enum class ReportFormat { Csv, Json };

inline void emit_report(const BerReport& report, ReportFormat format, const std::string& path) {
  const std::string text = format == ReportFormat::Csv ? report_to_csv(report) : report_to_json(report).dump(2) + "\n";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot open '" + path + "' for writing");
  out << text;
  out.flush();
  require(static_cast<bool>(out), ErrorCode::Io, "failed writing '" + path + "'");
}

}  // namespace mud
