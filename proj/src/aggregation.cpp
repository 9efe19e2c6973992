#include "twobit/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "twobit/errors.hpp"
#include "twobit/parallel.hpp"
#include "twobit/rng.hpp"

namespace twobit {

BitAssignment assign_locations(std::size_t n, int p, std::uint64_t seed, std::uint32_t round) {
  if (n < 1) throw ConfigError("assign_locations needs at least one node");
  if (p < FixedPointConfig::kMinWidth || p > FixedPointConfig::kMaxWidth) {
    throw ConfigError("fixed-point width p=" + std::to_string(p) + " out of range");
  }
  Rng rng(derive_seed(seed, round, 0x6c6f63ULL));

  std::vector<int> locations(static_cast<std::size_t>(p - 1));
  std::iota(locations.begin(), locations.end(), 2);
  rng.shuffle(std::span<int>(locations));

  BitAssignment out;
  out.round = round;
  out.base_locations.reserve(n);
  const std::size_t covered = std::min(n, locations.size());
  out.base_locations.assign(locations.begin(), locations.begin() + static_cast<std::ptrdiff_t>(covered));
  for (std::size_t i = covered; i < n; ++i) {
    out.base_locations.push_back(2 + static_cast<int>(rng.below(locations.size())));
  }
  return out;
}

std::uint8_t vote_bit(std::size_t ones, std::size_t total) {
  if (ones > total) throw DomainError("vote count of ones exceeds group size");
  return 2 * ones > total ? 1 : 0;
}

std::uint8_t vote_bit(std::span<const std::uint8_t> bits) {
  const auto ones = static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
  return vote_bit(ones, bits.size());
}

ParameterTally::ParameterTally(int p)
    : p_(p),
      positive_(static_cast<std::size_t>(p - 1)),
      negative_(static_cast<std::size_t>(p - 1)) {
  if (p < FixedPointConfig::kMinWidth || p > FixedPointConfig::kMaxWidth) {
    throw ConfigError("fixed-point width p=" + std::to_string(p) + " out of range");
  }
}

std::size_t ParameterTally::slot(int location) const {
  if (location < 2 || location > p_) {
    throw IndexError("tally location " + std::to_string(location) + " outside [2, " +
                     std::to_string(p_) + "]");
  }
  return static_cast<std::size_t>(location - 2);
}

void ParameterTally::add(int location, TwoBitRow row) {
  auto& group = row.sign ? positive_[slot(location)] : negative_[slot(location)];
  group.total += 1;
  group.ones += row.value ? 1 : 0;
  (row.sign ? n_pos : n_neg) += 1;
}

const GroupCounts& ParameterTally::positive(int location) const { return positive_[slot(location)]; }
const GroupCounts& ParameterTally::negative(int location) const { return negative_[slot(location)]; }
GroupCounts& ParameterTally::positive(int location) { return positive_[slot(location)]; }
GroupCounts& ParameterTally::negative(int location) { return negative_[slot(location)]; }

VotedCodes voted_codes(const ParameterTally& tally) {
  VotedCodes codes;
  for (int loc = 2; loc <= tally.width(); ++loc) {
    const auto& pos = tally.positive(loc);
    const auto& neg = tally.negative(loc);
    codes.positive = (codes.positive << 1) | vote_bit(pos.ones, pos.total);
    codes.negative = (codes.negative << 1) | vote_bit(neg.ones, neg.total);
  }
  return codes;
}

namespace {

struct Reconstruction {
  double value = 0.0;
  double positive_magnitude = 0.0;
  double negative_magnitude = 0.0;
};

Reconstruction reconstruct(const ParameterTally& tally, const FixedPointConfig& cfg) {
  const std::size_t reporting = tally.n_pos + tally.n_neg;
  if (reporting == 0) throw DegenerateInputError("no node reported this parameter");

  const VotedCodes codes = voted_codes(tally);
  const double scale = cfg.m / std::ldexp(1.0, cfg.p - 1);
  Reconstruction r;
  r.positive_magnitude = static_cast<double>(codes.positive) * scale;
  r.negative_magnitude = static_cast<double>(codes.negative) * scale;
  const double weighted = static_cast<double>(tally.n_pos) * r.positive_magnitude +
                          static_cast<double>(tally.n_neg) * -r.negative_magnitude;
  r.value = weighted / static_cast<double>(reporting);
  return r;
}

void check_updates(std::span<const TwoBitUpdateMatrix> updates, const BitAssignment& assignment,
                   std::size_t param_count, std::uint32_t round, int p) {
  if (updates.empty()) throw DegenerateInputError("no updates to aggregate");
  if (assignment.round != round) {
    throw ProtocolError("assignment is for round " + std::to_string(assignment.round) +
                        ", aggregating round " + std::to_string(round));
  }
  std::vector<bool> seen(assignment.node_count(), false);
  for (const auto& u : updates) {
    const std::string who = "node " + std::to_string(u.node_id);
    if (u.p != p) {
      throw ProtocolError(who + " used width " + std::to_string(u.p) + ", expected " + std::to_string(p));
    }
    if (u.round != round) {
      throw ProtocolError(who + " sent round " + std::to_string(u.round) + ", expected " +
                          std::to_string(round));
    }
    if (u.param_count() != param_count) {
      throw ProtocolError(who + " sent " + std::to_string(u.param_count()) + " rows, expected " +
                          std::to_string(param_count));
    }
    if (u.node_id >= assignment.node_count()) throw ProtocolError(who + " has no bit assignment");
    if (seen[u.node_id]) throw ProtocolError(who + " reported twice");
    seen[u.node_id] = true;
    if (u.base_location != assignment.base_locations[u.node_id]) {
      throw ProtocolError(who + " used base location " + std::to_string(u.base_location) +
                          ", assigned " + std::to_string(assignment.base_locations[u.node_id]));
    }
  }
}

}  // namespace

double reconstruct_parameter(const ParameterTally& tally, const FixedPointConfig& cfg) {
  cfg.validate();
  if (tally.width() != cfg.p) throw ConfigError("tally width does not match config width");
  return reconstruct(tally, cfg).value;
}

RoundAggregate aggregate_updates(std::span<const TwoBitUpdateMatrix> updates,
                                 const BitAssignment& assignment, std::size_t param_count,
                                 std::uint32_t round, const FixedPointConfig& cfg,
                                 const AggregationOptions& options) {
  cfg.validate();
  check_updates(updates, assignment, param_count, round, cfg.p);

  RoundAggregate out;
  out.values.assign(param_count, 0.0);
  std::vector<double> param_max(param_count, 0.0);

  detail::parallel_for(param_count, options.threads, [&](std::size_t begin, std::size_t end) {
    ParameterTally tally(cfg.p);
    for (std::size_t j = begin; j < end; ++j) {
      tally = ParameterTally(cfg.p);
      for (const auto& u : updates) {
        tally.add(location_for_row(u.base_location, j, cfg.p), u.rows[j]);
      }
      const Reconstruction r = reconstruct(tally, cfg);
      out.values[j] = r.value;
      param_max[j] = std::max(r.positive_magnitude, r.negative_magnitude);
    }
  });

  for (double v : param_max) out.max_group_magnitude = std::max(out.max_group_magnitude, v);
  if (options.scale_mode == ScaleMode::kMonotone) {
    out.next_m = std::max(cfg.m, out.max_group_magnitude);
  } else {
    out.next_m = std::max(options.m_floor, out.max_group_magnitude);
  }
  return out;
}

GlobalModelState aggregate_round(std::span<const TwoBitUpdateMatrix> updates,
                                 const BitAssignment& assignment, const GlobalModelState& state,
                                 int p, const AggregationOptions& options) {
  const FixedPointConfig cfg{p, state.m};
  RoundAggregate agg =
      aggregate_updates(updates, assignment, state.weights.size(), state.round, cfg, options);

  GlobalModelState next;
  next.m = agg.next_m;
  next.round = state.round + 1;
  if (options.payload == PayloadMode::kDelta) {
    next.weights = state.weights;
    for (std::size_t j = 0; j < next.weights.size(); ++j) next.weights[j] += agg.values[j];
  } else {
    next.weights = std::move(agg.values);
  }
  return next;
}

}  // namespace twobit
