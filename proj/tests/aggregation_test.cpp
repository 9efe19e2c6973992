#include "twobit/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "twobit/errors.hpp"
#include "twobit/rng.hpp"

using namespace twobit;

namespace {

// Straight-line server step written from the algorithm description, sharing
// nothing with the library beyond encode/map_update on the client side:
// for every weight, collect (location, sign, bit) from every node, vote each
// location per sign group, assemble two magnitudes, rescale, weight-average.
struct ReferenceResult {
  std::vector<double> values;
  double max_magnitude = 0.0;
};

ReferenceResult reference_server(const std::vector<TwoBitUpdateMatrix>& updates, int p, double m) {
  ReferenceResult out;
  const std::size_t P = updates.front().rows.size();
  for (std::size_t j = 0; j < P; ++j) {
    std::map<int, std::vector<int>> pos_bits, neg_bits;
    int n_pos = 0, n_neg = 0;
    for (const auto& u : updates) {
      const int loc = (u.base_location - 2 + static_cast<int>(j % static_cast<std::size_t>(p - 1))) % (p - 1) + 2;
      if (u.rows[j].sign == 0) {
        neg_bits[loc].push_back(u.rows[j].value);
        ++n_neg;
      } else {
        pos_bits[loc].push_back(u.rows[j].value);
        ++n_pos;
      }
    }
    double vpos = 0.0, vneg = 0.0;
    for (int loc = 2; loc <= p; ++loc) {
      auto majority = [](const std::vector<int>& bits) {
        int ones = 0;
        for (int b : bits) ones += b;
        return ones > static_cast<int>(bits.size()) - ones ? 1 : 0;
      };
      const double weight = std::ldexp(1.0, p - loc);
      vpos += majority(pos_bits[loc]) * weight;
      vneg += majority(neg_bits[loc]) * weight;
    }
    const double scale = m / std::ldexp(1.0, p - 1);
    const double pos_real = vpos * scale;
    const double neg_real = -(vneg * scale);
    out.values.push_back((n_pos * pos_real + n_neg * neg_real) / (n_pos + n_neg));
    out.max_magnitude = std::max({out.max_magnitude, vpos * scale, vneg * scale});
  }
  return out;
}

std::vector<TwoBitUpdateMatrix> random_round(Rng& rng, std::size_t n, int p, double m, std::size_t P,
                                             const BitAssignment& a, std::vector<std::vector<double>>* raw = nullptr) {
  std::vector<TwoBitUpdateMatrix> ups;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> v(P);
    for (double& x : v) x = rng.uniform(-1.2 * m, 1.2 * m);
    ups.push_back(map_update(v, FixedPointConfig{p, m}, a.base_locations[i], static_cast<std::uint32_t>(i), a.round));
    if (raw) raw->push_back(v);
  }
  return ups;
}

}  // namespace

TEST(AssignLocations, SmallestCases) {
  auto a = assign_locations(3, 4, 5);
  std::vector<int> sorted = a.base_locations;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, (std::vector<int>{2, 3, 4}));

  a = assign_locations(1, 4, 5);
  ASSERT_EQ(a.node_count(), 1U);
  EXPECT_GE(a.base_locations[0], 2);
  EXPECT_LE(a.base_locations[0], 4);
}

TEST(AssignLocations, BijectionWhenNEqualsPMinusOne) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto a = assign_locations(31, 32, seed);
    std::set<int> s(a.base_locations.begin(), a.base_locations.end());
    ASSERT_EQ(s.size(), 31U);
    ASSERT_EQ(*s.begin(), 2);
    ASSERT_EQ(*s.rbegin(), 32);
  }
}

TEST(AssignLocations, CoverageAndDistinctness) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto big = assign_locations(50, 16, seed, 3);
    EXPECT_EQ(big.round, 3U);
    std::set<int> s(big.base_locations.begin(), big.base_locations.end());
    EXPECT_EQ(s.size(), 15U);
    for (int loc : big.base_locations) {
      EXPECT_GE(loc, 2);
      EXPECT_LE(loc, 16);
    }
    const auto small = assign_locations(5, 16, seed);
    std::set<int> t(small.base_locations.begin(), small.base_locations.end());
    EXPECT_EQ(t.size(), 5U);
  }
}

TEST(AssignLocations, DeterministicAndRoundDependent) {
  EXPECT_EQ(assign_locations(31, 32, 9, 4).base_locations, assign_locations(31, 32, 9, 4).base_locations);
  EXPECT_NE(assign_locations(31, 32, 9, 4).base_locations, assign_locations(31, 32, 9, 5).base_locations);
}

TEST(AssignLocations, FirstNodeRoughlyUniform) {
  std::vector<int> hist(5, 0);
  for (std::uint64_t seed = 0; seed < 4000; ++seed) hist[assign_locations(4, 5, seed).base_locations[0] - 2]++;
  for (int loc = 0; loc < 4; ++loc) EXPECT_NEAR(hist[loc], 1000, 120);
  EXPECT_EQ(hist[4], 0);
}

TEST(VoteBit, Examples) {
  const std::vector<std::uint8_t> two_of_three{1, 1, 0};
  EXPECT_EQ(vote_bit(two_of_three), 1);
  EXPECT_EQ(vote_bit(std::vector<std::uint8_t>{}), 0);
  EXPECT_EQ(vote_bit(std::vector<std::uint8_t>{1, 0}), 0);
  EXPECT_EQ(vote_bit(std::vector<std::uint8_t>{0, 0, 1}), 0);
  EXPECT_EQ(vote_bit(3, 4), 1);
  EXPECT_EQ(vote_bit(2, 4), 0);
  EXPECT_THROW(vote_bit(3, 2), DomainError);
}

TEST(ReconstructParameter, SingleGroup) {
  ParameterTally t(4);
  // positive bits 1,0,1 at locations 2,3,4 from three nodes
  t.add(2, {1, 1});
  t.add(3, {1, 0});
  t.add(4, {1, 1});
  EXPECT_EQ(t.n_pos, 3U);
  EXPECT_EQ(t.n_neg, 0U);
  EXPECT_DOUBLE_EQ(reconstruct_parameter(t, FixedPointConfig{4, 0.8}), 0.5);
}

TEST(ReconstructParameter, AllZero) {
  ParameterTally t(6);
  for (int loc = 2; loc <= 6; ++loc) t.add(loc, {static_cast<std::uint8_t>(loc % 2), 0});
  EXPECT_EQ(reconstruct_parameter(t, FixedPointConfig{6, 3.0}), 0.0);
}

TEST(ReconstructParameter, MixedSign) {
  ParameterTally t(4);
  t.positive(2) = {2, 2};  // voted 1
  t.negative(4) = {1, 1};  // voted 1
  t.n_pos = 2;
  t.n_neg = 1;
  EXPECT_DOUBLE_EQ(reconstruct_parameter(t, FixedPointConfig{4, 1.0}), (2 * 0.5 + 1 * -0.125) / 3);
  EXPECT_NEAR(reconstruct_parameter(t, FixedPointConfig{4, 1.0}), 0.2916666666666667, 1e-15);
}

TEST(ReconstructParameter, Errors) {
  ParameterTally t(4);
  EXPECT_THROW(reconstruct_parameter(t, FixedPointConfig{4, 1.0}), DegenerateInputError);
  t.add(2, {1, 1});
  EXPECT_THROW(reconstruct_parameter(t, FixedPointConfig{5, 1.0}), ConfigError);
  EXPECT_THROW(t.add(5, {1, 1}), IndexError);
}

TEST(AggregateRound, UnanimousThreeNodes) {
  const auto a = assign_locations(3, 4, 1);
  GlobalModelState s{{0.0}, 1.0, 0};
  std::vector<TwoBitUpdateMatrix> ups;
  for (std::uint32_t i = 0; i < 3; ++i) {
    ups.push_back(map_update(std::vector<double>{0.5}, FixedPointConfig{4, 1.0}, a.base_locations[i], i, 0));
  }
  const auto next = aggregate_round(ups, a, s, 4);
  EXPECT_DOUBLE_EQ(next.weights[0], 0.5);
  EXPECT_EQ(next.m, 1.0);
  EXPECT_EQ(next.round, 1U);
}

TEST(AggregateRound, ZeroUpdatesLeaveStateUnchanged) {
  const auto a = assign_locations(7, 8, 2);
  GlobalModelState s{{0.25, -1.5, 3.0}, 2.0, 0};
  std::vector<TwoBitUpdateMatrix> ups;
  for (std::uint32_t i = 0; i < 7; ++i) {
    ups.push_back(map_update(std::vector<double>(3, 0.0), FixedPointConfig{8, 2.0}, a.base_locations[i], i, 0));
  }
  const auto next = aggregate_round(ups, a, s, 8);
  EXPECT_EQ(next.weights, s.weights);
  EXPECT_EQ(next.m, 2.0);
}

TEST(AggregateRound, MatchesReferenceImplementation) {
  Rng rng(4242);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = trial < 20 ? 31 : 5 + rng.below(60);
    const int p = trial < 20 ? 32 : 4 + static_cast<int>(rng.below(29));
    const double m = rng.uniform(0.2, 3.0);
    const std::size_t P = 1 + rng.below(120);
    const auto a = assign_locations(n, p, rng.next_u64());
    const auto ups = random_round(rng, n, p, m, P, a);
    GlobalModelState s{std::vector<double>(P, 0.0), m, 0};
    const auto next = aggregate_round(ups, a, s, p);
    const auto ref = reference_server(ups, p, m);
    ASSERT_EQ(next.weights, ref.values) << "trial " << trial;
    ASSERT_EQ(next.m, std::max(m, ref.max_magnitude));
  }
}

TEST(AggregateRound, Invariants) {
  Rng rng(99);
  for (int trial = 0; trial < 60; ++trial) {
    const int p = 4 + static_cast<int>(rng.below(29));
    const std::size_t n = 1 + rng.below(70);
    const double m = rng.uniform(0.1, 4.0);
    const std::size_t P = 1 + rng.below(50);
    const FixedPointConfig c{p, m};
    const auto a = assign_locations(n, p, rng.next_u64());
    std::vector<std::vector<double>> raw;
    const auto ups = random_round(rng, n, p, m, P, a, &raw);
    const auto agg = aggregate_updates(ups, a, P, 0, c);
    const double bound = m * static_cast<double>(c.max_code()) / std::ldexp(1.0, p - 1);
    for (std::size_t j = 0; j < P; ++j) {
      ASSERT_LE(std::fabs(agg.values[j]), bound);
      bool all_pos = true, all_neg = true;
      for (const auto& v : raw) (v[j] >= 0.0 ? all_neg : all_pos) = false;
      if (all_pos) ASSERT_GE(agg.values[j], 0.0);
      if (all_neg) ASSERT_LE(agg.values[j], 0.0);
    }
    ASSERT_GE(agg.next_m, m);

    // Relabel nodes with a random permutation, carrying assignments along.
    std::vector<std::uint32_t> perm(n);
    for (std::uint32_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(std::span<std::uint32_t>(perm));
    BitAssignment pa;
    pa.base_locations.resize(n);
    std::vector<TwoBitUpdateMatrix> pups = ups;
    for (std::size_t i = 0; i < n; ++i) {
      pups[i].node_id = perm[i];
      pa.base_locations[perm[i]] = a.base_locations[i];
    }
    std::reverse(pups.begin(), pups.end());
    const auto pagg = aggregate_updates(pups, pa, P, 0, c);
    ASSERT_EQ(pagg.values, agg.values);
  }
}

TEST(AggregateRound, UnanimityWithinOneStep) {
  Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const int p = 4 + static_cast<int>(rng.below(45));
    const std::size_t n = static_cast<std::size_t>(p - 1) + rng.below(10);
    const double m = std::exp(rng.uniform(-4.0, 4.0));
    const FixedPointConfig c{p, m};
    const double limit = m * static_cast<double>(c.max_code()) / std::ldexp(1.0, p - 1);
    const double g = rng.uniform(-limit, limit);
    const auto a = assign_locations(n, p, rng.next_u64());
    std::vector<TwoBitUpdateMatrix> ups;
    for (std::uint32_t i = 0; i < n; ++i) ups.push_back(map_update(std::vector<double>{g}, c, a.base_locations[i], i, 0));
    const auto agg = aggregate_updates(ups, a, 1, 0, c);
    ASSERT_LE(std::fabs(agg.values[0] - g), c.step()) << "p=" << p << " n=" << n;
  }
}

TEST(AggregateRound, ThreadCountDoesNotChangeResult) {
  Rng rng(8);
  const auto a = assign_locations(31, 32, 5);
  const auto ups = random_round(rng, 31, 32, 1.0, 997, a);
  AggregationOptions one, many;
  many.threads = 7;
  const auto x = aggregate_updates(ups, a, 997, 0, FixedPointConfig{32, 1.0}, one);
  const auto y = aggregate_updates(ups, a, 997, 0, FixedPointConfig{32, 1.0}, many);
  EXPECT_EQ(x.values, y.values);
  EXPECT_EQ(x.next_m, y.next_m);
}

TEST(AggregateRound, ScaleModesAndPayloadModes) {
  Rng rng(12);
  const auto a = assign_locations(15, 16, 1);
  const auto ups = random_round(rng, 15, 16, 2.0, 20, a);
  GlobalModelState s{std::vector<double>(20, 1.0), 2.0, 0};

  AggregationOptions adaptive;
  adaptive.scale_mode = ScaleMode::kAdaptive;
  const auto agg = aggregate_updates(ups, a, 20, 0, FixedPointConfig{16, 2.0});
  const auto next_adaptive = aggregate_round(ups, a, s, 16, adaptive);
  EXPECT_EQ(next_adaptive.m, std::max(adaptive.m_floor, agg.max_group_magnitude));
  EXPECT_LT(next_adaptive.m, 2.0);

  AggregationOptions weights;
  weights.payload = PayloadMode::kWeights;
  const auto next_weights = aggregate_round(ups, a, s, 16, weights);
  EXPECT_EQ(next_weights.weights, agg.values);
  const auto next_delta = aggregate_round(ups, a, s, 16);
  for (std::size_t j = 0; j < 20; ++j) EXPECT_EQ(next_delta.weights[j], 1.0 + agg.values[j]);

  // All-zero round in adaptive mode falls back to the floor.
  std::vector<TwoBitUpdateMatrix> zeros;
  for (std::uint32_t i = 0; i < 15; ++i) {
    zeros.push_back(map_update(std::vector<double>(20, 0.0), FixedPointConfig{16, 2.0}, a.base_locations[i], i, 0));
  }
  EXPECT_EQ(aggregate_round(zeros, a, s, 16, adaptive).m, adaptive.m_floor);
}

TEST(AggregateRound, ProtocolErrors) {
  const auto a = assign_locations(3, 4, 1);
  GlobalModelState s{{0.0, 0.0}, 1.0, 0};
  auto make = [&](std::uint32_t i) {
    return map_update(std::vector<double>{0.1, 0.2}, FixedPointConfig{4, 1.0}, a.base_locations[i], i, 0);
  };
  std::vector<TwoBitUpdateMatrix> ups{make(0), make(1), make(2)};
  EXPECT_NO_THROW(aggregate_round(ups, a, s, 4));

  EXPECT_THROW(aggregate_round(std::vector<TwoBitUpdateMatrix>{}, a, s, 4), DegenerateInputError);

  auto bad = ups;
  bad[1].round = 1;
  EXPECT_THROW(aggregate_round(bad, a, s, 4), ProtocolError);
  bad = ups;
  bad[2].rows.pop_back();
  EXPECT_THROW(aggregate_round(bad, a, s, 4), ProtocolError);
  bad = ups;
  bad[0].p = 5;
  EXPECT_THROW(aggregate_round(bad, a, s, 4), ProtocolError);
  bad = ups;
  bad[1].node_id = 0;
  EXPECT_THROW(aggregate_round(bad, a, s, 4), ProtocolError);
  bad = ups;
  bad[1].node_id = 7;
  EXPECT_THROW(aggregate_round(bad, a, s, 4), ProtocolError);
  bad = ups;
  bad[0].base_location = a.base_locations[0] == 2 ? 3 : 2;
  EXPECT_THROW(aggregate_round(bad, a, s, 4), ProtocolError);
  GlobalModelState later = s;
  later.round = 1;
  EXPECT_THROW(aggregate_round(ups, a, later, 4), ProtocolError);
}
