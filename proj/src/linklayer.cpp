#include "leakscope/linklayer.hpp"

#include <algorithm>

#include "leakscope/error.hpp"

namespace leakscope {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::not_found: return "not_found";
        case ErrorCode::permission_denied: return "permission_denied";
        case ErrorCode::parse_error: return "parse_error";
        case ErrorCode::bad_magic: return "bad_magic";
        case ErrorCode::truncated_record: return "truncated_record";
        case ErrorCode::duplicate_ip: return "duplicate_ip";
        case ErrorCode::no_gateway: return "no_gateway";
        case ErrorCode::unknown_host: return "unknown_host";
        case ErrorCode::unknown_device: return "unknown_device";
        case ErrorCode::unknown_rule: return "unknown_rule";
        case ErrorCode::invalid_window: return "invalid_window";
        case ErrorCode::invalid_argument: return "invalid_argument";
        case ErrorCode::backend_io: return "backend_io";
        case ErrorCode::unsupported: return "unsupported";
    }
    return "unknown";
}

namespace {

std::uint16_t load_be16(ByteView b, std::size_t off) {
    return static_cast<std::uint16_t>((b[off] << 8) | b[off + 1]);
}

void store_be16(Bytes& b, std::size_t off, std::uint16_t v) {
    b[off] = static_cast<std::uint8_t>(v >> 8);
    b[off + 1] = static_cast<std::uint8_t>(v);
}

void store_be32(Bytes& b, std::size_t off, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b[off + i] = static_cast<std::uint8_t>(v >> (24 - 8 * i));
}

void append(Bytes& out, std::span<const std::uint8_t> data) { out.insert(out.end(), data.begin(), data.end()); }

MacAddr load_mac(ByteView b, std::size_t off) {
    std::array<std::uint8_t, 6> o{};
    std::copy_n(b.begin() + static_cast<std::ptrdiff_t>(off), 6, o.begin());
    return MacAddr(o);
}

Ipv4Addr load_ip(ByteView b, std::size_t off) {
    std::array<std::uint8_t, 4> o{};
    std::copy_n(b.begin() + static_cast<std::ptrdiff_t>(off), 4, o.begin());
    return Ipv4Addr(o);
}

Bytes build_ipv4(Ipv4Addr src, Ipv4Addr dst, std::uint8_t protocol, const Bytes& l4) {
    Bytes ip(20, 0);
    ip[0] = 0x45;
    store_be16(ip, 2, static_cast<std::uint16_t>(20 + l4.size()));
    ip[6] = 0x40;  // DF
    ip[8] = 64;
    ip[9] = protocol;
    std::copy(src.octets().begin(), src.octets().end(), ip.begin() + 12);
    std::copy(dst.octets().begin(), dst.octets().end(), ip.begin() + 16);
    store_be16(ip, 10, internet_checksum(ip));
    append(ip, l4);
    return ip;
}

std::uint32_t pseudo_header_sum(Ipv4Addr src, Ipv4Addr dst, std::uint8_t protocol, std::size_t l4_len) {
    std::uint32_t sum = 0;
    sum += src.to_u32() >> 16;
    sum += src.to_u32() & 0xffff;
    sum += dst.to_u32() >> 16;
    sum += dst.to_u32() & 0xffff;
    sum += protocol;
    sum += static_cast<std::uint32_t>(l4_len);
    return sum;
}

}  // namespace

std::optional<Frame> parse_frame(ByteView bytes, double ts) {
    if (bytes.size() < kEthernetHeaderSize) return std::nullopt;
    Frame f;
    f.dst_mac = load_mac(bytes, 0);
    f.src_mac = load_mac(bytes, 6);
    f.ethertype = load_be16(bytes, 12);
    f.payload.assign(bytes.begin() + kEthernetHeaderSize, bytes.end());
    f.ts = ts;
    return f;
}

Bytes serialize(const Frame& frame) {
    Bytes out;
    out.reserve(kEthernetHeaderSize + frame.payload.size());
    append(out, frame.dst_mac.octets());
    append(out, frame.src_mac.octets());
    out.push_back(static_cast<std::uint8_t>(frame.ethertype >> 8));
    out.push_back(static_cast<std::uint8_t>(frame.ethertype));
    append(out, frame.payload);
    return out;
}

std::optional<ArpPacket> parse_arp_body(ByteView body) {
    if (body.size() < kArpBodySize) return std::nullopt;
    if (load_be16(body, 0) != 1 || load_be16(body, 2) != ethertype::ipv4 || body[4] != 6 || body[5] != 4) {
        return std::nullopt;
    }
    const auto op = load_be16(body, 6);
    if (op != 1 && op != 2) return std::nullopt;
    ArpPacket p;
    p.op = static_cast<ArpOp>(op);
    p.sender_mac = load_mac(body, 8);
    p.sender_ip = load_ip(body, 14);
    p.target_mac = load_mac(body, 18);
    p.target_ip = load_ip(body, 24);
    return p;
}

std::optional<ArpPacket> parse_arp(const Frame& frame) {
    if (frame.ethertype != ethertype::arp) return std::nullopt;
    return parse_arp_body(frame.payload);
}

Bytes serialize(const ArpPacket& arp) {
    Bytes out(8, 0);
    store_be16(out, 0, 1);
    store_be16(out, 2, ethertype::ipv4);
    out[4] = 6;
    out[5] = 4;
    store_be16(out, 6, static_cast<std::uint16_t>(arp.op));
    append(out, arp.sender_mac.octets());
    append(out, arp.sender_ip.octets());
    append(out, arp.target_mac.octets());
    append(out, arp.target_ip.octets());
    return out;
}

Frame make_arp_frame(const ArpPacket& arp, MacAddr eth_src, MacAddr eth_dst, double ts) {
    return Frame{eth_dst, eth_src, ethertype::arp, serialize(arp), ts};
}

std::optional<Ipv4Header> parse_ipv4(ByteView packet) {
    if (packet.size() < 20 || (packet[0] >> 4) != 4) return std::nullopt;
    Ipv4Header h;
    h.header_length = static_cast<std::size_t>(packet[0] & 0x0f) * 4;
    h.total_length = load_be16(packet, 2);
    if (h.header_length < 20 || packet.size() < h.header_length || h.total_length < h.header_length) {
        return std::nullopt;
    }
    h.protocol_number = packet[9];
    h.src_ip = load_ip(packet, 12);
    h.dst_ip = load_ip(packet, 16);
    return h;
}

std::optional<Segment> parse_transport(const Ipv4Header& ip, ByteView packet) {
    const std::size_t end = std::min<std::size_t>(ip.total_length, packet.size());
    if (end < ip.header_length) return std::nullopt;
    auto l4 = packet.subspan(ip.header_length, end - ip.header_length);
    Segment seg;
    if (ip.protocol() == Transport::udp) {
        if (l4.size() < 8) return std::nullopt;
        seg.src_port = load_be16(l4, 0);
        seg.dst_port = load_be16(l4, 2);
        seg.payload = l4.subspan(8);
        return seg;
    }
    if (ip.protocol() == Transport::tcp) {
        if (l4.size() < 20) return std::nullopt;
        const std::size_t data_off = static_cast<std::size_t>(l4[12] >> 4) * 4;
        if (data_off < 20 || data_off > l4.size()) return std::nullopt;
        seg.src_port = load_be16(l4, 0);
        seg.dst_port = load_be16(l4, 2);
        seg.payload = l4.subspan(data_off);
        return seg;
    }
    return std::nullopt;
}

std::uint16_t internet_checksum(ByteView data, std::uint32_t initial) {
    std::uint32_t sum = initial;
    for (std::size_t i = 0; i + 1 < data.size(); i += 2) sum += static_cast<std::uint32_t>((data[i] << 8) | data[i + 1]);
    if (data.size() % 2 == 1) sum += static_cast<std::uint32_t>(data.back() << 8);
    while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
    return static_cast<std::uint16_t>(~sum);
}

Bytes build_udp_packet(Ipv4Addr src, Ipv4Addr dst, std::uint16_t src_port, std::uint16_t dst_port, ByteView payload) {
    Bytes udp(8, 0);
    store_be16(udp, 0, src_port);
    store_be16(udp, 2, dst_port);
    store_be16(udp, 4, static_cast<std::uint16_t>(8 + payload.size()));
    append(udp, payload);
    std::uint16_t csum = internet_checksum(udp, pseudo_header_sum(src, dst, ipproto::udp, udp.size()));
    store_be16(udp, 6, csum == 0 ? 0xffff : csum);
    return build_ipv4(src, dst, ipproto::udp, udp);
}

Bytes build_tcp_packet(Ipv4Addr src, Ipv4Addr dst, std::uint16_t src_port, std::uint16_t dst_port, ByteView payload,
                       const TcpFields& fields) {
    Bytes tcp(20, 0);
    store_be16(tcp, 0, src_port);
    store_be16(tcp, 2, dst_port);
    store_be32(tcp, 4, fields.seq);
    store_be32(tcp, 8, fields.ack);
    tcp[12] = 5 << 4;
    tcp[13] = fields.flags;
    store_be16(tcp, 14, 65535);
    append(tcp, payload);
    store_be16(tcp, 16, internet_checksum(tcp, pseudo_header_sum(src, dst, ipproto::tcp, tcp.size())));
    return build_ipv4(src, dst, ipproto::tcp, tcp);
}

}  // namespace leakscope
