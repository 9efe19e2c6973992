#pragma once

#include <cstdint>
#include <vector>

namespace twobit {

// Width of the full binary representation (sign + p-1 magnitude bits) and the
// real-valued scale bound m that maps onto the largest magnitude code.
struct FixedPointConfig {
  static constexpr int kMinWidth = 4;
  static constexpr int kMaxWidth = 64;

  int p = 32;
  double m = 1.0;

  // Throws ConfigError unless kMinWidth <= p <= kMaxWidth and m is finite and positive.
  void validate() const;

  int magnitude_bits() const { return p - 1; }
  // 2^(p-1) - 1, the largest code expressible in p-1 bits.
  std::uint64_t max_code() const;
  // m / 2^(p-1), the real value of one code step.
  double step() const;
};

// Sign bit plus a (p-1)-bit magnitude code.
//
// Bit locations follow the tuple x = (b1, b2, ..., bp): location 1 is the
// sign, location 2 the most significant magnitude bit, location p the least
// significant one.
class SignedFixedPoint {
 public:
  // sign = true means non-negative (the sign bit is 1).
  SignedFixedPoint(int p, bool sign, std::uint64_t magnitude);

  // From explicit magnitude bits, most significant first. Needs exactly p-1 bits.
  static SignedFixedPoint from_bits(int p, bool sign, const std::vector<std::uint8_t>& magnitude_bits);

  int width() const { return p_; }
  bool sign() const { return sign_; }
  std::uint8_t sign_bit() const { return sign_ ? 1 : 0; }
  std::uint64_t magnitude() const { return magnitude_; }

  // p-1 bits, most significant first.
  std::vector<std::uint8_t> magnitude_bits() const;

  // Bit at a location in [1, p]; location 1 is the sign. Throws IndexError.
  std::uint8_t bit_at(int location) const;

  friend bool operator==(const SignedFixedPoint&, const SignedFixedPoint&) = default;

 private:
  int p_;
  bool sign_;
  std::uint64_t magnitude_;
};

// Scale g by 2^(p-1)/m, truncate, saturate at 2^(p-1)-1. Zero encodes as non-negative.
// Throws InputError for non-finite g and ConfigError for an invalid config.
SignedFixedPoint encode(double g, const FixedPointConfig& cfg);

// +/- magnitude * m / 2^(p-1). Throws ConfigError if the widths disagree.
double decode(const SignedFixedPoint& code, const FixedPointConfig& cfg);

// Magnitude-bit accessor restricted to locations [2, p]. Throws IndexError otherwise.
std::uint8_t bit_at(const SignedFixedPoint& code, int location);

}  // namespace twobit
