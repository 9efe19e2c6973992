#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "twobit/rng.hpp"

namespace twobit {

// Labelled samples in one flat row-major feature buffer.
struct Dataset {
  std::size_t dim = 0;
  std::size_t num_classes = 0;
  std::vector<float> features;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const float> row(std::size_t i) const { return {features.data() + i * dim, dim}; }
};

enum class ModelKind { kLogisticRegression, kMlpOneHidden };

// Parameters are flattened in a fixed order. Logistic regression: W (classes x
// input, row-major) then b. MLP: W1 (hidden x input), b1, W2 (classes x hidden), b2.
// The hidden layer uses a rectifier.
struct ModelSpec {
  ModelKind kind = ModelKind::kLogisticRegression;
  std::size_t input_dim = 0;
  std::size_t num_classes = 0;
  std::size_t hidden_dim = 0;

  void validate() const;
  std::size_t parameter_count() const;
};

struct TrainConfig {
  int local_epochs = 10;
  double learning_rate = 0.05;
  std::size_t batch_size = 16;
  std::uint64_t seed = 1;

  void validate() const;
};

// Indices into a Dataset.
using Batch = std::span<const std::size_t>;

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every parameter of a layer, biases included.
std::vector<double> init_model(const ModelSpec& spec, std::uint64_t seed);

// Class scores for one sample.
std::vector<double> logits(std::span<const double> w, std::span<const float> x, const ModelSpec& spec);

// Mean softmax cross-entropy over the batch.
double loss(std::span<const double> w, const Dataset& data, Batch batch, const ModelSpec& spec);

// Analytic gradient of loss(). Throws ShapeError on dimension mismatch and
// DegenerateInputError on an empty batch.
std::vector<double> gradient(std::span<const double> w, const Dataset& data, Batch batch,
                             const ModelSpec& spec);

// cfg.local_epochs epochs of shuffled mini-batch SGD. The caller owns the
// shuffle stream, so consecutive calls on the same Rng continue one schedule.
std::vector<double> local_train(std::span<const double> w, const Dataset& data, Batch shard,
                                const TrainConfig& cfg, const ModelSpec& spec, Rng& rng);
// Same, with a fresh shuffle stream seeded from cfg.seed.
std::vector<double> local_train(std::span<const double> w, const Dataset& data, Batch shard,
                                const TrainConfig& cfg, const ModelSpec& spec);

// Fraction of samples whose argmax class (lowest index on ties) equals the label.
double evaluate(std::span<const double> w, const Dataset& data, Batch samples, const ModelSpec& spec);

// Disjoint training shards, sizes within one of each other, plus a shared test set.
struct DataPartition {
  std::vector<std::vector<std::size_t>> shards;
  std::vector<std::size_t> test;
};

// Seeded shuffle, first floor(N * train_fraction) samples for training, the rest for testing.
DataPartition partition_dataset(std::size_t sample_count, std::size_t n, std::uint64_t seed,
                                double train_fraction = 0.8);

struct SynthSpec {
  std::size_t clusters = 2;
  std::size_t dims = 10;
  std::size_t samples = 2000;
  // Standard deviation of each coordinate around the cluster center.
  double spread = 1.5;

  void validate() const;
};

// Gaussian clusters with centers drawn from N(0, I); the label is the cluster index.
Dataset synth_dataset(const SynthSpec& spec, std::uint64_t seed);

// Reads an IDX3 image file and its IDX1 label file. Pixels are scaled to [0, 1].
// Throws FormatError (with byte offset) on bad magic, truncation or count mismatch.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

}  // namespace twobit
