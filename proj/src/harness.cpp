#include "twobit/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "twobit/errors.hpp"
#include "twobit/parallel.hpp"
#include "twobit/rng.hpp"

namespace twobit {

namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t kInitStream = 0x696e6974;
constexpr std::uint64_t kTrainStream = 0x74726e;
constexpr std::uint64_t kNoiseStream = 0x6e6f6973;

}  // namespace

void SimulationConfig::validate() const {
  if (n < 1) throw ConfigError("n must be >= 1");
  if (p < FixedPointConfig::kMinWidth || p > FixedPointConfig::kMaxWidth) {
    throw ConfigError("p must lie in [4, 64]");
  }
  if (rounds < 1) throw ConfigError("rounds must be >= 1");
  if (!std::isfinite(m_initial) || m_initial <= 0.0) throw ConfigError("m_initial must be finite and > 0");
  if (!std::isfinite(m_floor) || m_floor <= 0.0) throw ConfigError("m_floor must be finite and > 0");
  if (!std::isfinite(noise_sigma) || noise_sigma < 0.0) throw ConfigError("noise_sigma must be >= 0");
  if (!std::isfinite(clip_norm) || clip_norm <= 0.0) throw ConfigError("clip_norm must be > 0");
  if (model == ModelKind::kMlpOneHidden && hidden_dim == 0) throw ConfigError("hidden_dim must be > 0");
  if (idx_images.empty() != idx_labels.empty()) {
    throw ConfigError("idx_images and idx_labels must be given together");
  }
  if (idx_images.empty()) synth.validate();
  train.validate();
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("invalid value '" + value + "' for key '" + key + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError("invalid boolean '" + value + "' for key '" + key + "'");
}

}  // namespace

SimulationConfig parse_config(std::istream& in) {
  SimulationConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(stripped).substr(0, eq));
    const std::string value = trim(std::string_view(stripped).substr(eq + 1));

    if (key == "n") cfg.n = parse_number<std::size_t>(key, value);
    else if (key == "p") cfg.p = parse_number<int>(key, value);
    else if (key == "rounds") cfg.rounds = parse_number<std::uint32_t>(key, value);
    else if (key == "method") {
      try {
        cfg.method = parse_method(value);
      } catch (const DomainError& e) {
        throw ConfigError(e.what());
      }
    } else if (key == "model") {
      if (value == "logistic_regression") cfg.model = ModelKind::kLogisticRegression;
      else if (value == "mlp_one_hidden") cfg.model = ModelKind::kMlpOneHidden;
      else throw ConfigError("unknown model '" + value + "'");
    } else if (key == "hidden_dim") cfg.hidden_dim = parse_number<std::size_t>(key, value);
    else if (key == "clusters") cfg.synth.clusters = parse_number<std::size_t>(key, value);
    else if (key == "dims") cfg.synth.dims = parse_number<std::size_t>(key, value);
    else if (key == "samples") cfg.synth.samples = parse_number<std::size_t>(key, value);
    else if (key == "spread") cfg.synth.spread = parse_number<double>(key, value);
    else if (key == "idx_images") cfg.idx_images = value;
    else if (key == "idx_labels") cfg.idx_labels = value;
    else if (key == "train_fraction") cfg.train_fraction = parse_number<double>(key, value);
    else if (key == "local_epochs" || key == "e") cfg.train.local_epochs = parse_number<int>(key, value);
    else if (key == "learning_rate") cfg.train.learning_rate = parse_number<double>(key, value);
    else if (key == "batch_size") cfg.train.batch_size = parse_number<std::size_t>(key, value);
    else if (key == "m_initial") cfg.m_initial = parse_number<double>(key, value);
    else if (key == "m_mode") {
      if (value == "monotone") cfg.m_mode = ScaleMode::kMonotone;
      else if (value == "adaptive") cfg.m_mode = ScaleMode::kAdaptive;
      else throw ConfigError("unknown m_mode '" + value + "'");
    } else if (key == "m_floor") cfg.m_floor = parse_number<double>(key, value);
    else if (key == "payload") {
      if (value == "delta") cfg.payload = PayloadMode::kDelta;
      else if (value == "weights") cfg.payload = PayloadMode::kWeights;
      else throw ConfigError("unknown payload '" + value + "'");
    } else if (key == "noise_sigma") cfg.noise_sigma = parse_number<double>(key, value);
    else if (key == "clip_norm") cfg.clip_norm = parse_number<double>(key, value);
    else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "threads") cfg.threads = parse_number<unsigned>(key, value);
    else if (key == "replicate_shard") cfg.replicate_shard = parse_bool(key, value);
    else throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

SimulationConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  return parse_config(in);
}

// ---------------------------------------------------------------------------
// Baseline aggregators

std::vector<double> fedavg_aggregate(std::span<const std::vector<double>> locals) {
  if (locals.empty()) throw DegenerateInputError("fedavg over an empty set");
  const std::size_t len = locals.front().size();
  std::vector<double> sum(len, 0.0);
  for (const auto& v : locals) {
    if (v.size() != len) throw ShapeError("fedavg inputs have different lengths");
    for (std::size_t j = 0; j < len; ++j) sum[j] += v[j];
  }
  const auto count = static_cast<double>(locals.size());
  for (double& s : sum) s /= count;
  return sum;
}

std::vector<double> dp_fedavg_aggregate(std::span<const std::vector<double>> locals, double noise_sigma,
                                        double clip_norm, std::uint64_t seed) {
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
  if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be > 0");
  if (locals.empty()) throw DegenerateInputError("dp_fedavg over an empty set");

  std::vector<std::vector<double>> noisy;
  noisy.reserve(locals.size());
  for (std::size_t i = 0; i < locals.size(); ++i) {
    std::vector<double> v = locals[i];
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > clip_norm) {
      const double s = clip_norm / norm;
      for (double& x : v) x *= s;
    }
    Rng rng(derive_seed(seed, kNoiseStream, i));
    for (double& x : v) x += noise_sigma * rng.normal();
    noisy.push_back(std::move(v));
  }
  return fedavg_aggregate(noisy);
}

// ---------------------------------------------------------------------------
// Simulation

Simulation::Simulation(SimulationConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  cfg_.train.seed = cfg_.seed;
  if (!cfg_.idx_images.empty()) {
    data_ = load_idx(cfg_.idx_images, cfg_.idx_labels);
  } else {
    data_ = synth_dataset(cfg_.synth, cfg_.seed);
  }
  partition_ = partition_dataset(data_.size(), cfg_.n, cfg_.seed, cfg_.train_fraction);

  spec_.kind = cfg_.model;
  spec_.input_dim = data_.dim;
  spec_.num_classes = data_.num_classes;
  spec_.hidden_dim = cfg_.model == ModelKind::kMlpOneHidden ? cfg_.hidden_dim : 0;
  spec_.validate();

  state_.weights = init_model(spec_, derive_seed(cfg_.seed, kInitStream));
  state_.m = cfg_.m_initial;
  state_.round = 0;
}

std::vector<double> Simulation::train_node(std::size_t node, std::span<const double> w,
                                           std::uint32_t round) const {
  const std::size_t source = cfg_.replicate_shard ? 0 : node;
  Rng rng(derive_seed(cfg_.seed, kTrainStream, source, round));
  return local_train(w, data_, partition_.shards[source], cfg_.train, spec_, rng);
}

RoundMetrics Simulation::step() {
  const std::uint32_t round = state_.round;
  const std::size_t P = state_.weights.size();
  const bool twobit = cfg_.method == Method::kTwoBit;
  const std::size_t active = cfg_.method == Method::kStandalone ? 1 : cfg_.n;

  BitAssignment assignment;
  if (twobit) assignment = assign_locations(cfg_.n, cfg_.p, cfg_.seed, round);

  // Downlink: every node receives the model, m and (two-bit) its base location.
  std::vector<std::vector<std::uint8_t>> downlink(active);
  for (std::size_t i = 0; i < active; ++i) {
    DownlinkMessage msg;
    msg.round = round;
    msg.p = static_cast<std::uint8_t>(cfg_.p);
    msg.base_location = static_cast<std::uint8_t>(twobit ? assignment.base_locations[i] : 2);
    msg.m = state_.m;
    msg.weights = state_.weights;
    downlink[i] = to_bytes(msg);
  }

  // Local training and payload construction, one slot per node.
  std::vector<std::vector<double>> payloads(active);
  std::vector<std::vector<std::uint8_t>> uplink(twobit ? active : 0);
  detail::parallel_for(active, cfg_.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const DownlinkMessage msg = downlink_from_bytes(downlink[i]);
      std::vector<double> local = train_node(i, msg.weights, msg.round);
      if (cfg_.payload == PayloadMode::kDelta) {
        for (std::size_t j = 0; j < P; ++j) local[j] -= msg.weights[j];
      }
      if (twobit) {
        const FixedPointConfig fp{msg.p, msg.m};
        const TwoBitUpdateMatrix u =
            map_update(local, fp, msg.base_location, static_cast<std::uint32_t>(i), msg.round);
        uplink[i] = to_bytes(pack(u));
      }
      payloads[i] = std::move(local);
    }
  });

  const std::vector<double> true_mean = fedavg_aggregate(payloads);
  std::vector<double> aggregate;
  double next_m = state_.m;
  switch (cfg_.method) {
    case Method::kTwoBit: {
      std::vector<TwoBitUpdateMatrix> received;
      received.reserve(active);
      for (const auto& bytes : uplink) received.push_back(unpack(uplink_from_bytes(bytes)));
      AggregationOptions opts;
      opts.payload = cfg_.payload;
      opts.scale_mode = cfg_.m_mode;
      opts.m_floor = cfg_.m_floor;
      opts.threads = cfg_.threads;
      RoundAggregate agg =
          aggregate_updates(received, assignment, P, round, FixedPointConfig{cfg_.p, state_.m}, opts);
      aggregate = std::move(agg.values);
      next_m = agg.next_m;
      break;
    }
    case Method::kFedAvg:
    case Method::kStandalone:
      aggregate = true_mean;
      break;
    case Method::kDpFedAvg:
      aggregate = dp_fedavg_aggregate(payloads, cfg_.noise_sigma, cfg_.clip_norm,
                                      derive_seed(cfg_.seed, kNoiseStream, round));
      break;
  }

  RoundMetrics metrics;
  metrics.round = round + 1;
  double err_sum = 0.0;
  for (std::size_t j = 0; j < P; ++j) {
    const double err = std::fabs(aggregate[j] - true_mean[j]);
    err_sum += err;
    metrics.recon_err_max = std::max(metrics.recon_err_max, err);
  }
  metrics.recon_err_mean = P > 0 ? err_sum / static_cast<double>(P) : 0.0;

  if (cfg_.payload == PayloadMode::kDelta) {
    for (std::size_t j = 0; j < P; ++j) state_.weights[j] += aggregate[j];
  } else {
    state_.weights = std::move(aggregate);
  }
  state_.m = next_m;
  state_.round = round + 1;

  if (cfg_.method != Method::kStandalone) {
    metrics.uplink_bits = uplink_overhead(cfg_.method, cfg_.p, P).uplink_bits_per_node_per_round * cfg_.n;
  }
  metrics.m = state_.m;
  metrics.accuracy = evaluate(state_.weights, data_, partition_.test, spec_);
  return metrics;
}

std::vector<RoundMetrics> Simulation::run() {
  std::vector<RoundMetrics> out;
  out.reserve(cfg_.rounds);
  while (state_.round < cfg_.rounds) out.push_back(step());
  return out;
}

std::vector<RoundMetrics> run_simulation(const SimulationConfig& cfg) { return Simulation(cfg).run(); }

// ---------------------------------------------------------------------------
// Metrics I/O

namespace {

// Shortest representation that parses back to the same double.
std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

void write_metrics(std::ostream& out, std::span<const RoundMetrics> metrics, MetricsFormat format) {
  if (format == MetricsFormat::kCsv) {
    out << kMetricsCsvHeader << '\n';
    for (const auto& r : metrics) {
      out << r.round << ',' << format_double(r.accuracy) << ',' << r.uplink_bits << ','
          << format_double(r.m) << ',' << format_double(r.recon_err_mean) << ','
          << format_double(r.recon_err_max) << '\n';
    }
    return;
  }
  for (const auto& r : metrics) {
    out << "round=" << r.round << " accuracy=" << format_double(r.accuracy)
        << " uplink_bits=" << r.uplink_bits << " m=" << format_double(r.m)
        << " recon_err_mean=" << format_double(r.recon_err_mean)
        << " recon_err_max=" << format_double(r.recon_err_max) << '\n';
  }
}

void emit_metrics(std::span<const RoundMetrics> metrics, const std::filesystem::path& path,
                  MetricsFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_metrics(out, metrics, format);
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<RoundMetrics> read_metrics_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kMetricsCsvHeader) {
    throw FormatError("metrics CSV header missing or unexpected");
  }
  std::vector<RoundMetrics> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) throw FormatError("metrics row has " + std::to_string(cells.size()) + " cells");
    try {
      RoundMetrics r;
      r.round = parse_number<std::uint32_t>("round", cells[0]);
      r.accuracy = parse_number<double>("accuracy", cells[1]);
      r.uplink_bits = parse_number<std::uint64_t>("uplink_bits", cells[2]);
      r.m = parse_number<double>("m", cells[3]);
      r.recon_err_mean = parse_number<double>("recon_err_mean", cells[4]);
      r.recon_err_max = parse_number<double>("recon_err_max", cells[5]);
      out.push_back(r);
    } catch (const ConfigError& e) {
      throw FormatError(std::string("metrics row: ") + e.what());
    }
  }
  return out;
}

std::vector<RoundMetrics> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_metrics_csv(in);
}

}  // namespace twobit
