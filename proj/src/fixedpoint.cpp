#include "twobit/fixedpoint.hpp"

#include <cmath>
#include <string>

#include "twobit/errors.hpp"

namespace twobit {

void FixedPointConfig::validate() const {
  if (p < kMinWidth || p > kMaxWidth) {
    throw ConfigError("fixed-point width p=" + std::to_string(p) + " outside [" +
                      std::to_string(kMinWidth) + ", " + std::to_string(kMaxWidth) + "]");
  }
  if (!std::isfinite(m) || m <= 0.0) {
    throw ConfigError("scale bound m must be finite and positive, got " + std::to_string(m));
  }
}

std::uint64_t FixedPointConfig::max_code() const {
  return (std::uint64_t{1} << (p - 1)) - 1;
}

double FixedPointConfig::step() const { return m / std::ldexp(1.0, p - 1); }

SignedFixedPoint::SignedFixedPoint(int p, bool sign, std::uint64_t magnitude)
    : p_(p), sign_(sign), magnitude_(magnitude) {
  if (p < FixedPointConfig::kMinWidth || p > FixedPointConfig::kMaxWidth) {
    throw ConfigError("fixed-point width p=" + std::to_string(p) + " out of range");
  }
  if (magnitude > (std::uint64_t{1} << (p - 1)) - 1) {
    throw DomainError("magnitude " + std::to_string(magnitude) + " does not fit in " +
                      std::to_string(p - 1) + " bits");
  }
}

SignedFixedPoint SignedFixedPoint::from_bits(int p, bool sign,
                                             const std::vector<std::uint8_t>& magnitude_bits) {
  if (static_cast<int>(magnitude_bits.size()) != p - 1) {
    throw ConfigError("expected " + std::to_string(p - 1) + " magnitude bits, got " +
                      std::to_string(magnitude_bits.size()));
  }
  std::uint64_t value = 0;
  for (auto b : magnitude_bits) {
    if (b > 1) throw DomainError("bit value must be 0 or 1");
    value = (value << 1) | b;
  }
  return SignedFixedPoint(p, sign, value);
}

std::vector<std::uint8_t> SignedFixedPoint::magnitude_bits() const {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(p_ - 1));
  for (int loc = 2; loc <= p_; ++loc) bits[static_cast<std::size_t>(loc - 2)] = bit_at(loc);
  return bits;
}

std::uint8_t SignedFixedPoint::bit_at(int location) const {
  if (location < 1 || location > p_) {
    throw IndexError("bit location " + std::to_string(location) + " outside [1, " +
                     std::to_string(p_) + "]");
  }
  if (location == 1) return sign_bit();
  return static_cast<std::uint8_t>((magnitude_ >> (p_ - location)) & 1U);
}

SignedFixedPoint encode(double g, const FixedPointConfig& cfg) {
  cfg.validate();
  if (!std::isfinite(g)) throw InputError("cannot encode non-finite value");

  const bool non_negative = g >= 0.0;
  const double scaled = std::fabs(g) * std::ldexp(1.0, cfg.p - 1) / cfg.m;
  const std::uint64_t max_code = cfg.max_code();
  // Compare in floating point first: the scaled value may exceed the integer range.
  std::uint64_t magnitude = max_code;
  if (scaled < static_cast<double>(max_code)) {
    magnitude = static_cast<std::uint64_t>(std::floor(scaled));
    if (magnitude > max_code) magnitude = max_code;
  }
  return SignedFixedPoint(cfg.p, non_negative, magnitude);
}

double decode(const SignedFixedPoint& code, const FixedPointConfig& cfg) {
  cfg.validate();
  if (code.width() != cfg.p) {
    throw ConfigError("code width " + std::to_string(code.width()) + " != config width " +
                      std::to_string(cfg.p));
  }
  const double value = static_cast<double>(code.magnitude()) * cfg.m / std::ldexp(1.0, cfg.p - 1);
  return code.sign() ? value : -value;
}

std::uint8_t bit_at(const SignedFixedPoint& code, int location) {
  if (location < 2 || location > code.width()) {
    throw IndexError("magnitude bit location " + std::to_string(location) + " outside [2, " +
                     std::to_string(code.width()) + "]");
  }
  return code.bit_at(location);
}

}  // namespace twobit
