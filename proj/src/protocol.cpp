#include "twobit/protocol.hpp"

#include <bit>
#include <cstring>

#include "twobit/errors.hpp"
#include "twobit/fixedpoint.hpp"

namespace twobit {

namespace {

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_be64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::uint32_t get_be32(std::span<const std::uint8_t> in, std::size_t offset) {
  if (offset + 4 > in.size()) throw FormatError("truncated frame", in.size());
  return (std::uint32_t{in[offset]} << 24) | (std::uint32_t{in[offset + 1]} << 16) |
         (std::uint32_t{in[offset + 2]} << 8) | std::uint32_t{in[offset + 3]};
}

std::uint64_t get_be64(std::span<const std::uint8_t> in, std::size_t offset) {
  if (offset + 8 > in.size()) throw FormatError("truncated frame", in.size());
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < 8; ++i) v = (v << 8) | in[offset + i];
  return v;
}

void check_width_and_location(int p, int base_location, std::size_t offset) {
  if (p < FixedPointConfig::kMinWidth || p > FixedPointConfig::kMaxWidth) {
    throw FormatError("width p=" + std::to_string(p) + " out of range", offset);
  }
  if (base_location < 2 || base_location > p) {
    throw FormatError("base location " + std::to_string(base_location) + " outside [2, p]", offset + 1);
  }
}

}  // namespace

std::size_t payload_bytes(std::size_t param_count) { return (2 * param_count + 7) / 8; }

UplinkFrame pack(const TwoBitUpdateMatrix& update) {
  UplinkFrame frame;
  frame.node_id = update.node_id;
  frame.round = update.round;
  frame.param_count = static_cast<std::uint32_t>(update.rows.size());
  frame.p = static_cast<std::uint8_t>(update.p);
  frame.base_location = static_cast<std::uint8_t>(update.base_location);
  frame.payload.assign(payload_bytes(update.rows.size()), 0);
  for (std::size_t j = 0; j < update.rows.size(); ++j) {
    const std::size_t k = 2 * j;
    if (update.rows[j].sign) frame.payload[k / 8] |= static_cast<std::uint8_t>(1U << (k % 8));
    if (update.rows[j].value) frame.payload[(k + 1) / 8] |= static_cast<std::uint8_t>(1U << ((k + 1) % 8));
  }
  return frame;
}

TwoBitUpdateMatrix unpack(const UplinkFrame& frame) {
  check_width_and_location(frame.p, frame.base_location, 12);
  const std::size_t expected = payload_bytes(frame.param_count);
  if (frame.payload.size() != expected) {
    throw FormatError("payload is " + std::to_string(frame.payload.size()) + " bytes, expected " +
                          std::to_string(expected),
                      UplinkFrame::kHeaderBytes + std::min(frame.payload.size(), expected));
  }
  const std::size_t used_bits = 2 * std::size_t{frame.param_count};
  if (used_bits % 8 != 0) {
    const auto pad_mask = static_cast<std::uint8_t>(0xFFU << (used_bits % 8));
    if ((frame.payload.back() & pad_mask) != 0) {
      throw FormatError("nonzero padding bits", UplinkFrame::kHeaderBytes + expected - 1);
    }
  }

  TwoBitUpdateMatrix update;
  update.node_id = frame.node_id;
  update.round = frame.round;
  update.p = frame.p;
  update.base_location = frame.base_location;
  update.rows.resize(frame.param_count);
  for (std::size_t j = 0; j < update.rows.size(); ++j) {
    const std::size_t k = 2 * j;
    update.rows[j].sign = (frame.payload[k / 8] >> (k % 8)) & 1U;
    update.rows[j].value = (frame.payload[(k + 1) / 8] >> ((k + 1) % 8)) & 1U;
  }
  return update;
}

std::vector<std::uint8_t> to_bytes(const UplinkFrame& frame) {
  std::vector<std::uint8_t> out;
  out.reserve(UplinkFrame::kHeaderBytes + frame.payload.size());
  put_be32(out, frame.node_id);
  put_be32(out, frame.round);
  put_be32(out, frame.param_count);
  out.push_back(frame.p);
  out.push_back(frame.base_location);
  out.insert(out.end(), frame.payload.begin(), frame.payload.end());
  return out;
}

UplinkFrame uplink_from_bytes(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < UplinkFrame::kHeaderBytes) throw FormatError("truncated uplink header", bytes.size());
  UplinkFrame frame;
  frame.node_id = get_be32(bytes, 0);
  frame.round = get_be32(bytes, 4);
  frame.param_count = get_be32(bytes, 8);
  frame.p = bytes[12];
  frame.base_location = bytes[13];
  frame.payload.assign(bytes.begin() + UplinkFrame::kHeaderBytes, bytes.end());
  // Validates length and padding.
  (void)unpack(frame);
  return frame;
}

std::vector<std::uint8_t> to_bytes(const DownlinkMessage& msg) {
  std::vector<std::uint8_t> out;
  out.reserve(DownlinkMessage::kHeaderBytes + 8 * msg.weights.size());
  put_be32(out, msg.round);
  out.push_back(msg.p);
  out.push_back(msg.base_location);
  put_be64(out, std::bit_cast<std::uint64_t>(msg.m));
  put_be32(out, static_cast<std::uint32_t>(msg.weights.size()));
  for (double w : msg.weights) put_be64(out, std::bit_cast<std::uint64_t>(w));
  return out;
}

DownlinkMessage downlink_from_bytes(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < DownlinkMessage::kHeaderBytes) {
    throw FormatError("truncated downlink header", bytes.size());
  }
  DownlinkMessage msg;
  msg.round = get_be32(bytes, 0);
  msg.p = bytes[4];
  msg.base_location = bytes[5];
  check_width_and_location(msg.p, msg.base_location, 4);
  msg.m = std::bit_cast<double>(get_be64(bytes, 6));
  const std::uint32_t count = get_be32(bytes, 14);
  const std::size_t expected = DownlinkMessage::kHeaderBytes + 8 * std::size_t{count};
  if (bytes.size() != expected) {
    throw FormatError("downlink is " + std::to_string(bytes.size()) + " bytes, expected " +
                          std::to_string(expected),
                      std::min(bytes.size(), expected));
  }
  msg.weights.resize(count);
  for (std::size_t j = 0; j < count; ++j) {
    msg.weights[j] = std::bit_cast<double>(get_be64(bytes, DownlinkMessage::kHeaderBytes + 8 * j));
  }
  return msg;
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::kTwoBit: return "twobit";
    case Method::kFedAvg: return "fedavg";
    case Method::kDpFedAvg: return "dp_fedavg";
    case Method::kStandalone: return "standalone";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "twobit") return Method::kTwoBit;
  if (name == "fedavg") return Method::kFedAvg;
  if (name == "dp_fedavg") return Method::kDpFedAvg;
  if (name == "standalone") return Method::kStandalone;
  throw DomainError("unknown method '" + std::string(name) + "'");
}

OverheadReport uplink_overhead(Method method, int p, std::size_t param_count) {
  if (p < FixedPointConfig::kMinWidth) throw DomainError("p must be >= 4");
  if (param_count < 1) throw DomainError("parameter count must be >= 1");
  if (method == Method::kStandalone) throw DomainError("standalone training has no uplink");

  OverheadReport r;
  r.method = method;
  r.p = p;
  r.param_count = param_count;
  const std::uint64_t params = param_count;
  r.baseline_bits = static_cast<std::uint64_t>(p) * params;
  if (method == Method::kTwoBit) {
    r.uplink_bits_per_node_per_round = 2 * params;
    r.padded_payload_bits = 8 * payload_bytes(param_count);
    r.framed_bits = 8 * UplinkFrame::kHeaderBytes + r.padded_payload_bits;
  } else {
    r.uplink_bits_per_node_per_round = r.baseline_bits;
    r.padded_payload_bits = 8 * ((r.baseline_bits + 7) / 8);
    r.framed_bits = r.padded_payload_bits;
  }
  r.reduction_factor = boost::rational<std::int64_t>(static_cast<std::int64_t>(r.baseline_bits),
                                                      static_cast<std::int64_t>(r.uplink_bits_per_node_per_round));
  r.downlink_bits = 8 * (DownlinkMessage::kHeaderBytes + 8 * params);
  return r;
}

}  // namespace twobit
