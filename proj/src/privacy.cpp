#include "twobit/privacy.hpp"

#include <bit>
#include <cmath>
#include <string>

#include "twobit/errors.hpp"

namespace twobit {

double epsilon_theoretical(int p) {
  if (p < 3) throw DomainError("epsilon is undefined for p=" + std::to_string(p) + " (need p >= 3)");
  return std::log(static_cast<double>(p) / static_cast<double>(p - 2));
}

PrivacyReport privacy_report(int p) {
  PrivacyReport report;
  report.p = p;
  report.epsilon = epsilon_theoretical(p);
  if (p >= 4 && p <= 16) {
    report.enumerated = true;
    report.verified = proof_model_check(p).max_ratio == Rational(p, p - 2);
  }
  return report;
}

OutputDistribution output_distribution_fixed(const SignedFixedPoint& code) {
  const int locations = code.width() - 1;
  const int ones = std::popcount(code.magnitude());
  OutputDistribution dist;
  const std::uint8_t s = code.sign_bit();
  dist.set(s, 1, Rational(ones, locations));
  dist.set(s, 0, Rational(locations - ones, locations));
  return dist;
}

ProofModelResult proof_model_check(int p, int differing_location) {
  if (p < 4 || p > 16) {
    throw ResourceError("exhaustive enumeration is limited to 4 <= p <= 16, got p=" + std::to_string(p));
  }
  if (differing_location < 2 || differing_location > p) {
    throw IndexError("differing location " + std::to_string(differing_location) + " outside [2, " +
                     std::to_string(p) + "]");
  }

  const int free_bits = p - 2;
  const std::int64_t settings = std::int64_t{1} << free_bits;
  const std::int64_t states = settings * (p - 1);

  ProofModelResult result;
  result.p = p;
  for (int b = 0; b <= 1; ++b) {
    // zeros_x counts (setting, location) states where M(x) outputs value 0.
    std::int64_t zeros_x = 0;
    std::int64_t zeros_x_bar = 0;
    for (std::int64_t mask = 0; mask < settings; ++mask) {
      int free_index = 0;
      for (int loc = 2; loc <= p; ++loc) {
        if (loc == differing_location) {
          zeros_x += (b == 0) ? 1 : 0;
          zeros_x_bar += (b == 1) ? 1 : 0;
        } else {
          const bool bit = ((mask >> free_index) & 1) != 0;
          ++free_index;
          if (!bit) {
            ++zeros_x;
            ++zeros_x_bar;
          }
        }
      }
    }
    const auto ub = static_cast<std::size_t>(b);
    result.x_outputs_zero[ub] = Rational(zeros_x, states);
    result.x_bar_outputs_zero[ub] = Rational(zeros_x_bar, states);
    result.x_outputs_one[ub] = Rational(states - zeros_x, states);
    result.x_bar_outputs_one[ub] = Rational(states - zeros_x_bar, states);

    const Rational r0 = result.x_outputs_zero[ub] / result.x_bar_outputs_zero[ub];
    const Rational r1 = result.x_outputs_one[ub] / result.x_bar_outputs_one[ub];
    if (r0 > result.max_ratio) result.max_ratio = r0;
    if (r1 > result.max_ratio) result.max_ratio = r1;
  }
  return result;
}

PairRatio fixed_pair_ratio(const SignedFixedPoint& x, const SignedFixedPoint& x_bar) {
  if (x.width() != x_bar.width()) throw DomainError("codes have different widths");
  if (x.sign() != x_bar.sign()) throw DomainError("neighbouring codes must share the sign bit");
  if (std::popcount(x.magnitude() ^ x_bar.magnitude()) != 1) {
    throw DomainError("codes must differ in exactly one magnitude bit");
  }

  const OutputDistribution px = output_distribution_fixed(x);
  const OutputDistribution pb = output_distribution_fixed(x_bar);
  PairRatio out;
  const std::uint8_t s = x.sign_bit();
  for (std::uint8_t v = 0; v <= 1; ++v) {
    const Rational num = px.probability(s, v);
    const Rational den = pb.probability(s, v);
    if (den.numerator() == 0) {
      if (num.numerator() != 0) out.unbounded = true;
      continue;
    }
    const Rational r = num / den;
    if (r > out.ratio) out.ratio = r;
  }
  return out;
}

}  // namespace twobit
