#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "twobit/fixedpoint.hpp"

namespace twobit {

// One parameter's uplink contribution: its sign bit and one magnitude bit.
struct TwoBitRow {
  std::uint8_t sign = 1;
  std::uint8_t value = 0;

  friend bool operator==(const TwoBitRow&, const TwoBitRow&) = default;
};

// A node's whole uplink for one round, one row per flattened model parameter.
// p and base_location travel with the matrix so the server can recover each
// row's effective bit location.
struct TwoBitUpdateMatrix {
  std::uint32_t node_id = 0;
  std::uint32_t round = 0;
  int p = 32;
  int base_location = 2;
  std::vector<TwoBitRow> rows;

  std::size_t param_count() const { return rows.size(); }

  friend bool operator==(const TwoBitUpdateMatrix&, const TwoBitUpdateMatrix&) = default;
};

// The bit location used for row `row_index` when the server requested
// `base_location`: one step further per row, wrapping over locations 2..p.
// Throws IndexError for a base outside [2, p].
int location_for_row(int base_location, std::size_t row_index, int p);

// Client side of the protocol. Each value is encoded with `cfg`; row j carries
// its sign bit and the bit at location_for_row(base_location, j, p).
TwoBitUpdateMatrix map_update(std::span<const double> update, const FixedPointConfig& cfg,
                              int base_location, std::uint32_t node_id = 0,
                              std::uint32_t round = 0);

}  // namespace twobit
