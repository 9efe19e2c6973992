#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/rational.hpp>

#include "twobit/mapping.hpp"

namespace twobit {

// Uplink wire format
//
//   offset  size  field
//   0       4     node_id          (u32, big-endian)
//   4       4     round            (u32, big-endian)
//   8       4     param_count P    (u32, big-endian)
//   12      1     p                (u8)
//   13      1     base_location    (u8)
//   14      ...   payload, ceil(2P/8) bytes
//
// Parameter j owns payload bits 2j (sign) and 2j+1 (value). Bit k lives in
// byte k/8 at position k%8, least significant bit first. Pad bits are zero.
struct UplinkFrame {
  static constexpr std::size_t kHeaderBytes = 14;

  std::uint32_t node_id = 0;
  std::uint32_t round = 0;
  std::uint32_t param_count = 0;
  std::uint8_t p = 0;
  std::uint8_t base_location = 0;
  std::vector<std::uint8_t> payload;

  friend bool operator==(const UplinkFrame&, const UplinkFrame&) = default;
};

std::size_t payload_bytes(std::size_t param_count);

UplinkFrame pack(const TwoBitUpdateMatrix& update);

// Inverse of pack. Throws FormatError on wrong payload length, nonzero padding,
// or header fields outside their ranges.
TwoBitUpdateMatrix unpack(const UplinkFrame& frame);

std::vector<std::uint8_t> to_bytes(const UplinkFrame& frame);
UplinkFrame uplink_from_bytes(std::span<const std::uint8_t> bytes);

// Downlink wire format
//
//   0       4     round            (u32, big-endian)
//   4       1     p                (u8)
//   5       1     base_location    (u8)
//   6       8     m                (IEEE-754 binary64, big-endian)
//   14      4     P                (u32, big-endian)
//   18      8*P   weights          (binary64, big-endian)
//
// Each node gets its own message since the requested base location differs.
struct DownlinkMessage {
  static constexpr std::size_t kHeaderBytes = 18;

  std::uint32_t round = 0;
  std::uint8_t p = 0;
  std::uint8_t base_location = 0;
  double m = 0.0;
  std::vector<double> weights;

  friend bool operator==(const DownlinkMessage&, const DownlinkMessage&) = default;
};

std::vector<std::uint8_t> to_bytes(const DownlinkMessage& msg);
DownlinkMessage downlink_from_bytes(std::span<const std::uint8_t> bytes);

enum class Method { kTwoBit, kFedAvg, kDpFedAvg, kStandalone };

std::string_view to_string(Method method);
// Throws DomainError for an unknown name.
Method parse_method(std::string_view name);

struct OverheadReport {
  Method method = Method::kTwoBit;
  int p = 0;
  std::size_t param_count = 0;
  // Payload bits per node per round: 2P for two-bit, p*P for the baselines.
  std::uint64_t uplink_bits_per_node_per_round = 0;
  // Payload rounded up to whole bytes.
  std::uint64_t padded_payload_bits = 0;
  // Header plus padded payload.
  std::uint64_t framed_bits = 0;
  // p*P, what a full-precision upload costs.
  std::uint64_t baseline_bits = 0;
  // baseline_bits / uplink_bits_per_node_per_round.
  boost::rational<std::int64_t> reduction_factor{1};
  // One downlink message to one node.
  std::uint64_t downlink_bits = 0;
};

// Throws DomainError for the standalone method (no uplink) and for p < 4 or P < 1.
OverheadReport uplink_overhead(Method method, int p, std::size_t param_count);

}  // namespace twobit
