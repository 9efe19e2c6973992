#include "twobit/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include "twobit/errors.hpp"

namespace twobit {

void ModelSpec::validate() const {
  if (input_dim == 0 || num_classes == 0) throw ConfigError("model dimensions must be positive");
  if (kind == ModelKind::kMlpOneHidden && hidden_dim == 0) {
    throw ConfigError("mlp hidden_dim must be positive");
  }
}

std::size_t ModelSpec::parameter_count() const {
  if (kind == ModelKind::kLogisticRegression) return input_dim * num_classes + num_classes;
  return input_dim * hidden_dim + hidden_dim + hidden_dim * num_classes + num_classes;
}

void TrainConfig::validate() const {
  if (local_epochs < 1) throw ConfigError("local_epochs must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be finite and non-negative");
  }
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
}

void SynthSpec::validate() const {
  if (clusters < 2) throw ConfigError("synthetic data needs at least 2 clusters");
  if (dims == 0 || samples == 0) throw ConfigError("synthetic dims and samples must be positive");
  if (!(spread >= 0.0) || !std::isfinite(spread)) throw ConfigError("spread must be finite and >= 0");
}

namespace {

void check_shapes(std::span<const double> w, const Dataset& data, const ModelSpec& spec) {
  spec.validate();
  if (w.size() != spec.parameter_count()) {
    throw ShapeError("weight vector has " + std::to_string(w.size()) + " entries, model needs " +
                     std::to_string(spec.parameter_count()));
  }
  if (data.dim != spec.input_dim) {
    throw ShapeError("dataset dim " + std::to_string(data.dim) + " != model input_dim " +
                     std::to_string(spec.input_dim));
  }
}

// In-place softmax, max-shifted.
void softmax(std::vector<double>& z) {
  const double top = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - top);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

// Forward pass that keeps the hidden pre-activations for backprop.
struct Forward {
  std::vector<double> pre;     // hidden pre-activation (mlp only)
  std::vector<double> hidden;  // rectified
  std::vector<double> out;     // class scores
};

Forward forward(std::span<const double> w, std::span<const float> x, const ModelSpec& spec) {
  Forward f;
  const std::size_t in = spec.input_dim;
  const std::size_t c = spec.num_classes;
  if (spec.kind == ModelKind::kLogisticRegression) {
    const double* bias = w.data() + c * in;
    f.out.assign(c, 0.0);
    for (std::size_t k = 0; k < c; ++k) {
      double s = bias[k];
      const double* wk = w.data() + k * in;
      for (std::size_t d = 0; d < in; ++d) s += wk[d] * x[d];
      f.out[k] = s;
    }
    return f;
  }
  const std::size_t h = spec.hidden_dim;
  const double* w1 = w.data();
  const double* b1 = w1 + h * in;
  const double* w2 = b1 + h;
  const double* b2 = w2 + c * h;
  f.pre.assign(h, 0.0);
  f.hidden.assign(h, 0.0);
  for (std::size_t u = 0; u < h; ++u) {
    double s = b1[u];
    for (std::size_t d = 0; d < in; ++d) s += w1[u * in + d] * x[d];
    f.pre[u] = s;
    f.hidden[u] = s > 0.0 ? s : 0.0;
  }
  f.out.assign(c, 0.0);
  for (std::size_t k = 0; k < c; ++k) {
    double s = b2[k];
    for (std::size_t u = 0; u < h; ++u) s += w2[k * h + u] * f.hidden[u];
    f.out[k] = s;
  }
  return f;
}

void check_label(const Dataset& data, std::size_t i, const ModelSpec& spec) {
  if (i >= data.size()) throw ShapeError("sample index " + std::to_string(i) + " out of range");
  const int y = data.labels[i];
  if (y < 0 || static_cast<std::size_t>(y) >= spec.num_classes) {
    throw ShapeError("label " + std::to_string(y) + " outside model's class range");
  }
}

}  // namespace

std::vector<double> init_model(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  std::vector<double> w;
  w.reserve(spec.parameter_count());
  auto layer = [&](std::size_t fan_in, std::size_t fan_out) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    // weights then biases, all from the same fan-in bound
    for (std::size_t i = 0; i < fan_out * fan_in + fan_out; ++i) w.push_back(rng.uniform(-bound, bound));
  };
  if (spec.kind == ModelKind::kLogisticRegression) {
    layer(spec.input_dim, spec.num_classes);
  } else {
    layer(spec.input_dim, spec.hidden_dim);
    layer(spec.hidden_dim, spec.num_classes);
  }
  return w;
}

std::vector<double> logits(std::span<const double> w, std::span<const float> x, const ModelSpec& spec) {
  spec.validate();
  if (w.size() != spec.parameter_count() || x.size() != spec.input_dim) {
    throw ShapeError("logits: weight or feature size does not match the model");
  }
  return forward(w, x, spec).out;
}

double loss(std::span<const double> w, const Dataset& data, Batch batch, const ModelSpec& spec) {
  check_shapes(w, data, spec);
  if (batch.empty()) throw DegenerateInputError("loss over an empty batch");
  double total = 0.0;
  for (std::size_t i : batch) {
    check_label(data, i, spec);
    std::vector<double> z = forward(w, data.row(i), spec).out;
    const double top = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - top);
    total += std::log(sum) + top - z[static_cast<std::size_t>(data.labels[i])];
  }
  return total / static_cast<double>(batch.size());
}

std::vector<double> gradient(std::span<const double> w, const Dataset& data, Batch batch,
                             const ModelSpec& spec) {
  check_shapes(w, data, spec);
  if (batch.empty()) throw DegenerateInputError("gradient over an empty batch");

  const std::size_t in = spec.input_dim;
  const std::size_t c = spec.num_classes;
  std::vector<double> g(w.size(), 0.0);

  for (std::size_t i : batch) {
    check_label(data, i, spec);
    const auto x = data.row(i);
    Forward f = forward(w, x, spec);
    std::vector<double>& dz = f.out;
    softmax(dz);
    dz[static_cast<std::size_t>(data.labels[i])] -= 1.0;

    if (spec.kind == ModelKind::kLogisticRegression) {
      double* gb = g.data() + c * in;
      for (std::size_t k = 0; k < c; ++k) {
        double* gk = g.data() + k * in;
        for (std::size_t d = 0; d < in; ++d) gk[d] += dz[k] * x[d];
        gb[k] += dz[k];
      }
      continue;
    }

    const std::size_t h = spec.hidden_dim;
    const double* w2 = w.data() + h * in + h;
    double* gw1 = g.data();
    double* gb1 = gw1 + h * in;
    double* gw2 = gb1 + h;
    double* gb2 = gw2 + c * h;
    std::vector<double> dh(h, 0.0);
    for (std::size_t k = 0; k < c; ++k) {
      for (std::size_t u = 0; u < h; ++u) {
        gw2[k * h + u] += dz[k] * f.hidden[u];
        dh[u] += w2[k * h + u] * dz[k];
      }
      gb2[k] += dz[k];
    }
    for (std::size_t u = 0; u < h; ++u) {
      if (f.pre[u] <= 0.0) continue;
      for (std::size_t d = 0; d < in; ++d) gw1[u * in + d] += dh[u] * x[d];
      gb1[u] += dh[u];
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (double& v : g) v *= inv;
  return g;
}

std::vector<double> local_train(std::span<const double> w, const Dataset& data, Batch shard,
                                const TrainConfig& cfg, const ModelSpec& spec, Rng& rng) {
  cfg.validate();
  check_shapes(w, data, spec);
  if (shard.empty()) throw DegenerateInputError("local_train on an empty shard");

  std::vector<double> weights(w.begin(), w.end());
  std::vector<std::size_t> order(shard.size());
  for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    std::copy(shard.begin(), shard.end(), order.begin());
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      const std::vector<double> g = gradient(weights, data, Batch(order.data() + start, len), spec);
      for (std::size_t j = 0; j < weights.size(); ++j) weights[j] -= cfg.learning_rate * g[j];
    }
  }
  return weights;
}

std::vector<double> local_train(std::span<const double> w, const Dataset& data, Batch shard,
                                const TrainConfig& cfg, const ModelSpec& spec) {
  Rng rng(cfg.seed);
  return local_train(w, data, shard, cfg, spec, rng);
}

double evaluate(std::span<const double> w, const Dataset& data, Batch samples, const ModelSpec& spec) {
  check_shapes(w, data, spec);
  if (samples.empty()) throw DegenerateInputError("evaluate on an empty test set");
  std::size_t correct = 0;
  for (std::size_t i : samples) {
    if (i >= data.size()) throw ShapeError("sample index out of range");
    const std::vector<double> z = forward(w, data.row(i), spec).out;
    const auto best = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
    if (best == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

DataPartition partition_dataset(std::size_t sample_count, std::size_t n, std::uint64_t seed,
                                double train_fraction) {
  if (n < 1) throw ConfigError("partition needs at least one node");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie strictly between 0 and 1");
  }
  // The small epsilon keeps 100 * 0.8 at 80 despite binary rounding.
  const auto train_count =
      static_cast<std::size_t>(std::floor(static_cast<double>(sample_count) * train_fraction + 1e-9));
  if (train_count < n) {
    throw DegenerateInputError("only " + std::to_string(train_count) + " training samples for " +
                               std::to_string(n) + " nodes");
  }
  if (train_count >= sample_count) throw DegenerateInputError("train/test split leaves no test samples");

  std::vector<std::size_t> order(sample_count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0x70617274ULL));
  rng.shuffle(std::span<std::size_t>(order));

  DataPartition part;
  part.shards.resize(n);
  const std::size_t base = train_count / n;
  const std::size_t extra = train_count % n;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t len = base + (i < extra ? 1 : 0);
    part.shards[i].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                          order.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  part.test.assign(order.begin() + static_cast<std::ptrdiff_t>(train_count), order.end());
  return part;
}

Dataset synth_dataset(const SynthSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(derive_seed(seed, 0x73796e74ULL));
  std::vector<double> centers(spec.clusters * spec.dims);
  for (double& c : centers) c = rng.normal();

  Dataset data;
  data.dim = spec.dims;
  data.num_classes = spec.clusters;
  data.features.reserve(spec.samples * spec.dims);
  data.labels.reserve(spec.samples);
  for (std::size_t i = 0; i < spec.samples; ++i) {
    const std::size_t label = i % spec.clusters;
    for (std::size_t d = 0; d < spec.dims; ++d) {
      const double v = centers[label * spec.dims + d] + spec.spread * rng.normal();
      data.features.push_back(static_cast<float>(v));
    }
    data.labels.push_back(static_cast<int>(label));
  }
  return data;
}

namespace {

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::string& what) {
  if (offset + 4 > bytes.size()) throw FormatError(what + ": truncated header", offset);
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

}  // namespace

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  const auto images = read_file(images_path);
  const auto labels = read_file(labels_path);
  const std::string iname = images_path.string();
  const std::string lname = labels_path.string();

  if (read_be32(images, 0, iname) != kIdxImagesMagic) throw FormatError(iname + ": bad IDX3 magic", 0);
  const std::uint32_t count = read_be32(images, 4, iname);
  const std::uint32_t rows = read_be32(images, 8, iname);
  const std::uint32_t cols = read_be32(images, 12, iname);
  const std::size_t dim = std::size_t{rows} * cols;
  const std::size_t expected = 16 + std::size_t{count} * dim;
  if (images.size() < expected) throw FormatError(iname + ": truncated pixel data", images.size());
  if (images.size() > expected) throw FormatError(iname + ": trailing bytes after pixel data", expected);

  if (read_be32(labels, 0, lname) != kIdxLabelsMagic) throw FormatError(lname + ": bad IDX1 magic", 0);
  const std::uint32_t label_count = read_be32(labels, 4, lname);
  if (label_count != count) {
    throw FormatError(lname + ": " + std::to_string(label_count) + " labels for " +
                          std::to_string(count) + " images",
                      4);
  }
  if (labels.size() < 8 + std::size_t{count}) throw FormatError(lname + ": truncated labels", labels.size());
  if (labels.size() > 8 + std::size_t{count}) throw FormatError(lname + ": trailing bytes", 8 + std::size_t{count});

  Dataset data;
  data.dim = dim;
  data.features.resize(std::size_t{count} * dim);
  for (std::size_t i = 0; i < data.features.size(); ++i) {
    data.features[i] = static_cast<float>(images[16 + i]) / 255.0F;
  }
  data.labels.resize(count);
  int max_label = 0;
  for (std::size_t i = 0; i < count; ++i) {
    data.labels[i] = labels[8 + i];
    max_label = std::max(max_label, data.labels[i]);
  }
  data.num_classes = count > 0 ? static_cast<std::size_t>(max_label) + 1 : 0;
  return data;
}

}  // namespace twobit
