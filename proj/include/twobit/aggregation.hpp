#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "twobit/fixedpoint.hpp"
#include "twobit/mapping.hpp"

namespace twobit {

// Server's per-round choice of base bit location for each node; the index is the node id.
struct BitAssignment {
  std::uint32_t round = 0;
  std::vector<int> base_locations;

  std::size_t node_count() const { return base_locations.size(); }
};

// Draws this round's base locations for n nodes.
//
// With n >= p-1 the first p-1 nodes receive a random permutation of 2..p and
// the remaining nodes uniform draws, so every location has an owner. With
// n < p-1 the nodes receive distinct locations sampled without replacement.
// Deterministic in (seed, round).
BitAssignment assign_locations(std::size_t n, int p, std::uint64_t seed, std::uint32_t round = 0);

// Majority vote; ties and empty groups resolve to 0.
std::uint8_t vote_bit(std::size_t ones, std::size_t total);
std::uint8_t vote_bit(std::span<const std::uint8_t> bits);

struct GroupCounts {
  std::size_t ones = 0;
  std::size_t total = 0;
};

// Votes received for a single parameter, split by bit location and sign group.
class ParameterTally {
 public:
  explicit ParameterTally(int p);

  int width() const { return p_; }

  // Records one node's row, received at the given effective location in [2, p].
  void add(int location, TwoBitRow row);

  const GroupCounts& positive(int location) const;
  const GroupCounts& negative(int location) const;
  GroupCounts& positive(int location);
  GroupCounts& negative(int location);

  std::size_t n_pos = 0;
  std::size_t n_neg = 0;

 private:
  std::size_t slot(int location) const;

  int p_;
  std::vector<GroupCounts> positive_;
  std::vector<GroupCounts> negative_;
};

// The (p-1)-bit magnitudes assembled from the voted bits of each sign group.
struct VotedCodes {
  std::uint64_t positive = 0;
  std::uint64_t negative = 0;
};

VotedCodes voted_codes(const ParameterTally& tally);

// Weighted average of the rescaled positive and negative reconstructions,
// weights n_pos and n_neg. Throws DegenerateInputError when no node reported.
double reconstruct_parameter(const ParameterTally& tally, const FixedPointConfig& cfg);

enum class PayloadMode { kDelta, kWeights };
enum class ScaleMode { kMonotone, kAdaptive };

struct AggregationOptions {
  PayloadMode payload = PayloadMode::kDelta;
  ScaleMode scale_mode = ScaleMode::kMonotone;
  // Lower bound for m in adaptive mode.
  double m_floor = 1e-9;
  // Worker threads for the per-parameter loop; results do not depend on it.
  unsigned threads = 1;
};

struct GlobalModelState {
  std::vector<double> weights;
  double m = 1.0;
  std::uint32_t round = 0;
};

struct RoundAggregate {
  // Reconstructed per-parameter update (delta or weights, per payload mode).
  std::vector<double> values;
  // Largest |V * m / 2^(p-1)| over all parameters and both sign groups.
  double max_group_magnitude = 0.0;
  double next_m = 0.0;
};

// Groups, votes and reconstructs every parameter without touching the model.
// `m` is the scale the nodes encoded with this round.
RoundAggregate aggregate_updates(std::span<const TwoBitUpdateMatrix> updates,
                                 const BitAssignment& assignment, std::size_t param_count,
                                 std::uint32_t round, const FixedPointConfig& cfg,
                                 const AggregationOptions& options = {});

// Full server step: reconstruct, apply to the model, update m, advance the round.
// cfg.p gives the width; the scale used is state.m.
// Throws ProtocolError on width/round/count/assignment mismatch and
// DegenerateInputError on an empty update set.
GlobalModelState aggregate_round(std::span<const TwoBitUpdateMatrix> updates,
                                 const BitAssignment& assignment, const GlobalModelState& state,
                                 int p, const AggregationOptions& options = {});

}  // namespace twobit
