#include "twobit/fixedpoint.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "twobit/errors.hpp"
#include "twobit/rng.hpp"

using namespace twobit;

namespace {

using Bits = std::vector<std::uint8_t>;

FixedPointConfig cfg(int p, double m) { return FixedPointConfig{p, m}; }

}  // namespace

TEST(FixedPointEncode, HalfAtWidthFour) {
  const auto code = encode(0.5, cfg(4, 1.0));
  EXPECT_TRUE(code.sign());
  EXPECT_EQ(code.magnitude_bits(), (Bits{1, 0, 0}));
  // decode(encode(g)) oracle: 4 * 1/8
  EXPECT_DOUBLE_EQ(decode(code, cfg(4, 1.0)), 0.5);
}

TEST(FixedPointEncode, ZeroIsNonNegativeWithEmptyMagnitude) {
  for (int p : {4, 9, 32, 64}) {
    for (double m : {1e-6, 0.3, 1000.0}) {
      const auto code = encode(0.0, cfg(p, m));
      EXPECT_TRUE(code.sign());
      EXPECT_EQ(code.magnitude(), 0U);
    }
  }
  EXPECT_TRUE(encode(-0.0, cfg(8, 1.0)).sign());
}

TEST(FixedPointEncode, SaturatesAtLargestCode) {
  const auto code = encode(2.0, cfg(4, 1.0));
  EXPECT_TRUE(code.sign());
  EXPECT_EQ(code.magnitude_bits(), (Bits{1, 1, 1}));
  EXPECT_EQ(encode(1e300, cfg(64, 1.0)).magnitude(), (std::uint64_t{1} << 63) - 1);
}

TEST(FixedPointEncode, NegativeMirrorsPositive) {
  const auto code = encode(-0.5, cfg(4, 1.0));
  EXPECT_FALSE(code.sign());
  EXPECT_EQ(code.magnitude_bits(), (Bits{1, 0, 0}));
}

TEST(FixedPointEncode, TruncatesTowardZero) {
  // 0.99 * 8 = 7.92 -> 7; 0.2 * 8 = 1.6 -> 1
  EXPECT_EQ(encode(0.99, cfg(4, 1.0)).magnitude(), 7U);
  EXPECT_EQ(encode(-0.2, cfg(4, 1.0)).magnitude(), 1U);
}

TEST(FixedPointEncode, RejectsNonFiniteAndBadConfig) {
  EXPECT_THROW(encode(std::numeric_limits<double>::quiet_NaN(), cfg(8, 1.0)), InputError);
  EXPECT_THROW(encode(std::numeric_limits<double>::infinity(), cfg(8, 1.0)), InputError);
  EXPECT_THROW(encode(0.1, cfg(3, 1.0)), ConfigError);
  EXPECT_THROW(encode(0.1, cfg(65, 1.0)), ConfigError);
  EXPECT_THROW(encode(0.1, cfg(8, 0.0)), ConfigError);
  EXPECT_THROW(encode(0.1, cfg(8, -1.0)), ConfigError);
  EXPECT_THROW(encode(0.1, cfg(8, std::numeric_limits<double>::infinity())), ConfigError);
}

TEST(FixedPointDecode, Examples) {
  EXPECT_DOUBLE_EQ(decode(SignedFixedPoint::from_bits(4, true, {1, 0, 1}), cfg(4, 0.8)), 0.5);
  EXPECT_EQ(decode(SignedFixedPoint::from_bits(4, true, {0, 0, 0}), cfg(4, 0.8)), 0.0);
  EXPECT_DOUBLE_EQ(decode(SignedFixedPoint::from_bits(4, false, {0, 0, 1}), cfg(4, 1.0)), -0.125);
}

TEST(FixedPointDecode, WidthMismatchIsConfigError) {
  const auto code = encode(0.25, cfg(8, 1.0));
  EXPECT_THROW(decode(code, cfg(9, 1.0)), ConfigError);
}

TEST(FixedPointCode, FromBitsValidatesLength) {
  EXPECT_THROW(SignedFixedPoint::from_bits(4, true, {1, 0}), ConfigError);
  EXPECT_THROW(SignedFixedPoint::from_bits(4, true, {1, 0, 2}), DomainError);
  EXPECT_THROW(SignedFixedPoint(4, true, 8), DomainError);
}

TEST(FixedPointBitAt, Locations) {
  const auto four = encode(0.5, cfg(4, 1.0));
  EXPECT_EQ(bit_at(four, 2), 1);
  EXPECT_EQ(bit_at(four, 3), 0);
  EXPECT_EQ(bit_at(four, 4), 0);
  // location p is the LSB: zero for any even magnitude
  for (std::uint64_t mag = 0; mag < 128; mag += 2) {
    EXPECT_EQ(bit_at(SignedFixedPoint(8, true, mag), 8), 0);
  }
  const SignedFixedPoint ones(12, false, (1U << 11) - 1);
  for (int loc = 2; loc <= 12; ++loc) EXPECT_EQ(bit_at(ones, loc), 1);
  EXPECT_EQ(ones.bit_at(1), 0);  // sign
}

TEST(FixedPointBitAt, OutOfRange) {
  const auto code = encode(0.5, cfg(4, 1.0));
  EXPECT_THROW(bit_at(code, 1), IndexError);
  EXPECT_THROW(bit_at(code, 5), IndexError);
  EXPECT_THROW(bit_at(code, 0), IndexError);
  EXPECT_THROW(code.bit_at(5), IndexError);
}

// Property checks over random (g, p, m).

class FixedPointProperties : public ::testing::Test {
 protected:
  Rng rng{20240611};

  FixedPointConfig random_cfg() {
    // 48 keeps one code step well above double rounding of g itself.
    const int p = 4 + static_cast<int>(rng.below(45));
    const double m = std::exp(rng.uniform(-8.0, 8.0));
    return {p, m};
  }
};

TEST_F(FixedPointProperties, RoundTripWithinOneStep) {
  for (int trial = 0; trial < 20000; ++trial) {
    const auto c = random_cfg();
    const double limit = c.m * static_cast<double>(c.max_code()) / std::ldexp(1.0, c.p - 1);
    const double g = rng.uniform(-limit, limit);
    const double back = decode(encode(g, c), c);
    ASSERT_LE(std::fabs(back - g), c.step()) << "p=" << c.p << " m=" << c.m << " g=" << g;
  }
}

TEST_F(FixedPointProperties, Monotone) {
  for (int trial = 0; trial < 20000; ++trial) {
    const auto c = random_cfg();
    double a = rng.uniform(-2.0 * c.m, 2.0 * c.m);
    double b = rng.uniform(-2.0 * c.m, 2.0 * c.m);
    if (a > b) std::swap(a, b);
    ASSERT_LE(decode(encode(a, c), c), decode(encode(b, c), c));
  }
}

TEST_F(FixedPointProperties, ClampBound) {
  for (int trial = 0; trial < 20000; ++trial) {
    const auto c = random_cfg();
    const double g = rng.uniform(-100.0, 100.0) * c.m;
    const double limit = c.m * static_cast<double>(c.max_code()) / std::ldexp(1.0, c.p - 1);
    ASSERT_LE(std::fabs(decode(encode(g, c), c)), limit);
  }
}

TEST_F(FixedPointProperties, NegationFlipsOnlySign) {
  for (int trial = 0; trial < 20000; ++trial) {
    const auto c = random_cfg();
    double g = rng.uniform(-3.0 * c.m, 3.0 * c.m);
    if (g == 0.0) continue;
    const auto pos = encode(g, c);
    const auto neg = encode(-g, c);
    ASSERT_NE(pos.sign(), neg.sign());
    ASSERT_EQ(pos.magnitude(), neg.magnitude());
  }
}
