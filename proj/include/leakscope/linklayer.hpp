#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "leakscope/netmodel.hpp"

namespace leakscope {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

namespace ethertype {
inline constexpr std::uint16_t ipv4 = 0x0800;
inline constexpr std::uint16_t arp = 0x0806;
}  // namespace ethertype

inline constexpr std::size_t kEthernetHeaderSize = 14;
inline constexpr std::size_t kArpBodySize = 28;

struct Frame {
    MacAddr dst_mac;
    MacAddr src_mac;
    std::uint16_t ethertype = 0;
    Bytes payload;
    double ts = 0.0;

    bool operator==(const Frame&) const = default;
};

/// Returns nullopt when the input cannot hold an Ethernet header.
std::optional<Frame> parse_frame(ByteView bytes, double ts = 0.0);
Bytes serialize(const Frame& frame);

enum class ArpOp : std::uint16_t { request = 1, reply = 2 };

struct ArpPacket {
    ArpOp op = ArpOp::request;
    MacAddr sender_mac;
    Ipv4Addr sender_ip;
    MacAddr target_mac;
    Ipv4Addr target_ip;

    bool operator==(const ArpPacket&) const = default;
};

/// Decodes an Ethernet/IPv4 ARP body. Trailing bytes past the 28-byte body are
/// treated as link padding; anything shorter, or a non-Ethernet/IPv4 ARP, is malformed.
std::optional<ArpPacket> parse_arp(const Frame& frame);
std::optional<ArpPacket> parse_arp_body(ByteView body);
/// Always exactly kArpBodySize bytes.
Bytes serialize(const ArpPacket& arp);
Frame make_arp_frame(const ArpPacket& arp, MacAddr eth_src, MacAddr eth_dst, double ts = 0.0);

namespace ipproto {
inline constexpr std::uint8_t tcp = 6;
inline constexpr std::uint8_t udp = 17;
}  // namespace ipproto

enum class Transport { tcp, udp, other };

struct Ipv4Header {
    Ipv4Addr src_ip;
    Ipv4Addr dst_ip;
    std::uint8_t protocol_number = 0;
    std::uint16_t total_length = 0;
    std::size_t header_length = 20;

    Transport protocol() const {
        return protocol_number == ipproto::tcp ? Transport::tcp
               : protocol_number == ipproto::udp ? Transport::udp
                                                  : Transport::other;
    }
};

std::optional<Ipv4Header> parse_ipv4(ByteView packet);

/// Transport header view carved out of an IPv4 packet.
struct Segment {
    std::uint16_t src_port = 0;
    std::uint16_t dst_port = 0;
    ByteView payload;
};

/// Bounded by the IP total length, so Ethernet padding never leaks into the payload.
std::optional<Segment> parse_transport(const Ipv4Header& ip, ByteView packet);

std::uint16_t internet_checksum(ByteView data, std::uint32_t initial = 0);

struct TcpFields {
    std::uint32_t seq = 0;
    std::uint32_t ack = 0;
    std::uint8_t flags = 0x18;  // PSH|ACK
};

Bytes build_udp_packet(Ipv4Addr src, Ipv4Addr dst, std::uint16_t src_port, std::uint16_t dst_port, ByteView payload);
Bytes build_tcp_packet(Ipv4Addr src, Ipv4Addr dst, std::uint16_t src_port, std::uint16_t dst_port, ByteView payload,
                       const TcpFields& fields = {});

}  // namespace leakscope
