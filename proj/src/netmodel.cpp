#include "leakscope/netmodel.hpp"

#include <charconv>
#include <cstdio>

namespace leakscope {

namespace {

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

// Parses `count` hex pairs separated by ':' or '-' (one separator kind per string).
template <std::size_t N>
std::optional<std::array<std::uint8_t, N>> parse_hex_groups(std::string_view text) {
    if (text.size() != N * 3 - 1) return std::nullopt;
    const char sep = N > 1 ? text[2] : ':';
    if (sep != ':' && sep != '-') return std::nullopt;
    std::array<std::uint8_t, N> out{};
    for (std::size_t i = 0; i < N; ++i) {
        const std::size_t pos = i * 3;
        if (i > 0 && text[pos - 1] != sep) return std::nullopt;
        const int hi = hex_value(text[pos]);
        const int lo = hex_value(text[pos + 1]);
        if (hi < 0 || lo < 0) return std::nullopt;
        out[i] = static_cast<std::uint8_t>(hi * 16 + lo);
    }
    return out;
}

}  // namespace

std::optional<MacAddr> MacAddr::parse(std::string_view text) {
    auto octets = parse_hex_groups<6>(text);
    if (!octets) return std::nullopt;
    return MacAddr(*octets);
}

std::string MacAddr::str() const {
    char buf[18];
    std::snprintf(buf, sizeof buf, "%02X:%02X:%02X:%02X:%02X:%02X", octets_[0], octets_[1], octets_[2], octets_[3],
                  octets_[4], octets_[5]);
    return buf;
}

std::optional<Ipv4Addr> Ipv4Addr::parse(std::string_view text) {
    std::array<std::uint8_t, 4> out{};
    const char* p = text.data();
    const char* end = text.data() + text.size();
    for (int i = 0; i < 4; ++i) {
        if (i > 0) {
            if (p == end || *p != '.') return std::nullopt;
            ++p;
        }
        if (p == end || *p < '0' || *p > '9') return std::nullopt;
        // Reject leading zeros ("01") so text round-trips are unambiguous.
        if (*p == '0' && p + 1 != end && p[1] >= '0' && p[1] <= '9') return std::nullopt;
        unsigned value = 0;
        auto [next, ec] = std::from_chars(p, end, value);
        if (ec != std::errc{} || value > 255 || next - p > 3) return std::nullopt;
        out[i] = static_cast<std::uint8_t>(value);
        p = next;
    }
    if (p != end) return std::nullopt;
    return Ipv4Addr(out);
}

std::string Ipv4Addr::str() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%u.%u.%u.%u", octets_[0], octets_[1], octets_[2], octets_[3]);
    return buf;
}

std::optional<Subnet> Subnet::parse(std::string_view cidr) {
    const auto slash = cidr.find('/');
    if (slash == std::string_view::npos) return std::nullopt;
    auto ip = Ipv4Addr::parse(cidr.substr(0, slash));
    if (!ip) return std::nullopt;
    int prefix = -1;
    auto tail = cidr.substr(slash + 1);
    auto [next, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), prefix);
    if (ec != std::errc{} || next != tail.data() + tail.size() || prefix < 0 || prefix > 32) return std::nullopt;
    return containing(*ip, prefix);
}

Subnet Subnet::containing(Ipv4Addr ip, int prefix) {
    Subnet s;
    s.prefix = prefix;
    s.network = Ipv4Addr::from_u32(ip.to_u32() & s.mask());
    return s;
}

std::vector<Ipv4Addr> Subnet::hosts() const {
    std::vector<Ipv4Addr> out;
    const std::uint32_t base = network.to_u32();
    const std::uint64_t size = std::uint64_t{1} << (32 - prefix);
    if (prefix >= 31) {
        for (std::uint64_t i = 0; i < size; ++i) out.push_back(Ipv4Addr::from_u32(base + static_cast<std::uint32_t>(i)));
        return out;
    }
    out.reserve(static_cast<std::size_t>(size - 2));
    for (std::uint64_t i = 1; i + 1 < size; ++i) out.push_back(Ipv4Addr::from_u32(base + static_cast<std::uint32_t>(i)));
    return out;
}

std::string Subnet::str() const { return network.str() + "/" + std::to_string(prefix); }

bool is_private_ipv4(Ipv4Addr ip) {
    const auto& o = ip.octets();
    return o[0] == 10 || (o[0] == 172 && (o[1] & 0xf0) == 16) || (o[0] == 192 && o[1] == 168);
}

std::optional<Oui> Oui::parse(std::string_view text) {
    auto octets = parse_hex_groups<3>(text);
    if (!octets) return std::nullopt;
    return Oui{*octets};
}

std::string Oui::str() const {
    char buf[9];
    std::snprintf(buf, sizeof buf, "%02X:%02X:%02X", prefix[0], prefix[1], prefix[2]);
    return buf;
}

Oui oui_of(const MacAddr& mac) {
    const auto& o = mac.octets();
    return Oui{{o[0], o[1], o[2]}};
}

std::optional<DeviceId> DeviceId::parse(std::string_view text) {
    if (text.size() != 12) return std::nullopt;
    for (char c : text) {
        if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return std::nullopt;
    }
    return DeviceId(std::string(text));
}

MacAddr DeviceId::mac() const {
    std::array<std::uint8_t, 6> o{};
    for (std::size_t i = 0; i < 6 && id_.size() == 12; ++i) {
        o[i] = static_cast<std::uint8_t>(hex_value(id_[2 * i]) * 16 + hex_value(id_[2 * i + 1]));
    }
    return MacAddr(o);
}

DeviceId device_id_of(const MacAddr& mac) {
    char buf[13];
    const auto& o = mac.octets();
    std::snprintf(buf, sizeof buf, "%02x%02x%02x%02x%02x%02x", o[0], o[1], o[2], o[3], o[4], o[5]);
    return DeviceId(buf);
}

}  // namespace leakscope
