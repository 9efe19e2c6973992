#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "twobit/aggregation.hpp"
#include "twobit/protocol.hpp"
#include "twobit/training.hpp"

namespace twobit {

struct SimulationConfig {
  std::size_t n = 31;
  int p = 32;
  std::uint32_t rounds = 50;
  Method method = Method::kTwoBit;

  ModelKind model = ModelKind::kLogisticRegression;
  std::size_t hidden_dim = 16;

  // Synthetic data unless both IDX paths are set.
  SynthSpec synth;
  std::string idx_images;
  std::string idx_labels;
  double train_fraction = 0.8;

  TrainConfig train;

  double m_initial = 1.0;
  ScaleMode m_mode = ScaleMode::kMonotone;
  double m_floor = 1e-9;
  PayloadMode payload = PayloadMode::kDelta;

  // dp_fedavg only.
  double noise_sigma = 0.0;
  double clip_norm = 1.0;

  std::uint64_t seed = 1;
  // Nodes trained concurrently within a round. Output does not depend on it.
  unsigned threads = 1;
  // Every node trains on shard 0 with node 0's shuffle stream, so all
  // payloads are identical. Used to check two-bit against FedAvg.
  bool replicate_shard = false;

  void validate() const;
};

// Key/value text, one `key = value` per line, `#` starts a comment.
// Unknown keys and unparsable values raise ConfigError.
SimulationConfig parse_config(std::istream& in);
SimulationConfig load_config(const std::filesystem::path& path);

struct RoundMetrics {
  std::uint32_t round = 0;
  double accuracy = 0.0;
  std::uint64_t uplink_bits = 0;
  double m = 0.0;
  // |aggregate - mean of the true payloads| over parameters. Zero for plain
  // FedAvg and standalone by construction.
  double recon_err_mean = 0.0;
  double recon_err_max = 0.0;

  friend bool operator==(const RoundMetrics&, const RoundMetrics&) = default;
};

// Element-wise mean. Throws ShapeError on length mismatch and
// DegenerateInputError on an empty set.
std::vector<double> fedavg_aggregate(std::span<const std::vector<double>> locals);

// Clip each vector to L2 norm clip_norm, add N(0, noise_sigma^2) per
// coordinate with a per-client stream derived from seed, then average.
std::vector<double> dp_fedavg_aggregate(std::span<const std::vector<double>> locals, double noise_sigma,
                                        double clip_norm, std::uint64_t seed);

class Simulation {
 public:
  explicit Simulation(SimulationConfig cfg);

  // One federated round: broadcast, local training, upload, aggregation, evaluation.
  RoundMetrics step();
  std::vector<RoundMetrics> run();

  const SimulationConfig& config() const { return cfg_; }
  const ModelSpec& model() const { return spec_; }
  const Dataset& data() const { return data_; }
  const DataPartition& partition() const { return partition_; }
  const GlobalModelState& state() const { return state_; }

 private:
  std::vector<double> train_node(std::size_t node, std::span<const double> w, std::uint32_t round) const;

  SimulationConfig cfg_;
  Dataset data_;
  DataPartition partition_;
  ModelSpec spec_;
  GlobalModelState state_;
};

std::vector<RoundMetrics> run_simulation(const SimulationConfig& cfg);

enum class MetricsFormat { kCsv, kKeyValue };

inline constexpr const char* kMetricsCsvHeader = "round,accuracy,uplink_bits,m,recon_err_mean,recon_err_max";

void write_metrics(std::ostream& out, std::span<const RoundMetrics> metrics, MetricsFormat format);
// Throws IoError naming the path when the file cannot be written.
void emit_metrics(std::span<const RoundMetrics> metrics, const std::filesystem::path& path,
                  MetricsFormat format = MetricsFormat::kCsv);
std::vector<RoundMetrics> read_metrics_csv(std::istream& in);
std::vector<RoundMetrics> read_metrics_csv(const std::filesystem::path& path);

}  // namespace twobit
