#include "twobit/mapping.hpp"

#include <string>

#include "twobit/errors.hpp"

namespace twobit {

int location_for_row(int base_location, std::size_t row_index, int p) {
  if (p < FixedPointConfig::kMinWidth || p > FixedPointConfig::kMaxWidth) {
    throw ConfigError("fixed-point width p=" + std::to_string(p) + " out of range");
  }
  if (base_location < 2 || base_location > p) {
    throw IndexError("base location " + std::to_string(base_location) + " outside [2, " +
                     std::to_string(p) + "]");
  }
  const auto span = static_cast<std::size_t>(p - 1);
  const auto offset = (static_cast<std::size_t>(base_location - 2) + row_index % span) % span;
  return static_cast<int>(offset) + 2;
}

TwoBitUpdateMatrix map_update(std::span<const double> update, const FixedPointConfig& cfg,
                              int base_location, std::uint32_t node_id, std::uint32_t round) {
  cfg.validate();
  // Validates the base location once up front, also for empty updates.
  (void)location_for_row(base_location, 0, cfg.p);

  TwoBitUpdateMatrix out;
  out.node_id = node_id;
  out.round = round;
  out.p = cfg.p;
  out.base_location = base_location;
  out.rows.reserve(update.size());
  for (std::size_t j = 0; j < update.size(); ++j) {
    const SignedFixedPoint code = encode(update[j], cfg);
    const int location = location_for_row(base_location, j, cfg.p);
    out.rows.push_back({code.sign_bit(), code.bit_at(location)});
  }
  return out;
}

}  // namespace twobit
