#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace leakscope {

/// 48-bit Ethernet hardware address. Text form is "AA:BB:CC:DD:EE:FF".
class MacAddr {
public:
    constexpr MacAddr() = default;
    constexpr explicit MacAddr(std::array<std::uint8_t, 6> octets) : octets_(octets) {}

    /// Accepts ':' or '-' separated hex pairs, case-insensitive.
    static std::optional<MacAddr> parse(std::string_view text);
    static constexpr MacAddr broadcast() { return MacAddr({0xff, 0xff, 0xff, 0xff, 0xff, 0xff}); }

    std::string str() const;
    const std::array<std::uint8_t, 6>& octets() const { return octets_; }

    bool is_broadcast() const { return *this == broadcast(); }
    bool is_multicast() const { return (octets_[0] & 0x01) != 0; }
    bool is_locally_administered() const { return (octets_[0] & 0x02) != 0; }
    bool is_zero() const { return *this == MacAddr(); }

    auto operator<=>(const MacAddr&) const = default;

private:
    std::array<std::uint8_t, 6> octets_{};
};

class Ipv4Addr {
public:
    constexpr Ipv4Addr() = default;
    constexpr explicit Ipv4Addr(std::array<std::uint8_t, 4> octets) : octets_(octets) {}
    static constexpr Ipv4Addr from_u32(std::uint32_t host_order) {
        return Ipv4Addr({static_cast<std::uint8_t>(host_order >> 24), static_cast<std::uint8_t>(host_order >> 16),
                         static_cast<std::uint8_t>(host_order >> 8), static_cast<std::uint8_t>(host_order)});
    }

    static std::optional<Ipv4Addr> parse(std::string_view text);

    std::string str() const;
    const std::array<std::uint8_t, 4>& octets() const { return octets_; }
    std::uint32_t to_u32() const {
        return (std::uint32_t{octets_[0]} << 24) | (std::uint32_t{octets_[1]} << 16) |
               (std::uint32_t{octets_[2]} << 8) | std::uint32_t{octets_[3]};
    }
    bool is_zero() const { return to_u32() == 0; }

    auto operator<=>(const Ipv4Addr&) const = default;

private:
    std::array<std::uint8_t, 4> octets_{};
};

/// An address block such as 192.168.1.0/24.
struct Subnet {
    Ipv4Addr network;
    int prefix = 24;

    static std::optional<Subnet> parse(std::string_view cidr);
    static Subnet containing(Ipv4Addr ip, int prefix);

    std::uint32_t mask() const { return prefix == 0 ? 0u : ~std::uint32_t{0} << (32 - prefix); }
    bool contains(Ipv4Addr ip) const { return (ip.to_u32() & mask()) == (network.to_u32() & mask()); }
    /// Usable host addresses (network and broadcast excluded for prefixes below /31).
    std::vector<Ipv4Addr> hosts() const;
    std::string str() const;

    bool operator==(const Subnet&) const = default;
};

/// RFC 1918 private ranges; the fallback "is this address local" rule when no subnet is configured.
bool is_private_ipv4(Ipv4Addr ip);

struct Oui {
    std::array<std::uint8_t, 3> prefix{};

    static std::optional<Oui> parse(std::string_view text);
    std::string str() const;
    auto operator<=>(const Oui&) const = default;
};

Oui oui_of(const MacAddr& mac);

/// Stable device key: the MAC as 12 lowercase hex digits.
class DeviceId {
public:
    DeviceId() = default;
    /// Validates format only (12 lowercase hex digits); does not check that the device exists.
    static std::optional<DeviceId> parse(std::string_view text);

    const std::string& str() const { return id_; }
    MacAddr mac() const;

    auto operator<=>(const DeviceId&) const = default;

private:
    explicit DeviceId(std::string id) : id_(std::move(id)) {}
    friend DeviceId device_id_of(const MacAddr& mac);
    std::string id_;
};

DeviceId device_id_of(const MacAddr& mac);

struct DeviceRecord {
    DeviceId device_id;
    MacAddr mac;
    Ipv4Addr ip;
    std::string vendor = "unknown";
    std::string name = "unknown device";
    bool monitored = true;
    double last_seen = 0.0;

    bool operator==(const DeviceRecord&) const = default;
};

struct TrafficSample {
    std::int64_t t = 0;
    std::uint64_t bytes_out = 0;
    std::uint64_t bytes_in = 0;

    bool operator==(const TrafficSample&) const = default;
};

struct DeviceTraffic {
    DeviceId device_id;
    std::string name;
    std::string vendor;
    Ipv4Addr ip;
    MacAddr mac;
    bool blocked = false;
    std::vector<TrafficSample> series;
    std::set<std::string> tracker_hosts;
    std::size_t tracker_count = 0;

    bool operator==(const DeviceTraffic&) const = default;
};

struct TrafficSnapshot {
    std::int64_t generated_at = 0;
    std::vector<DeviceTraffic> devices;

    bool operator==(const TrafficSnapshot&) const = default;
};

}  // namespace leakscope

template <>
struct std::hash<leakscope::MacAddr> {
    std::size_t operator()(const leakscope::MacAddr& m) const noexcept {
        std::uint64_t v = 0;
        for (auto o : m.octets()) v = (v << 8) | o;
        return std::hash<std::uint64_t>{}(v);
    }
};

template <>
struct std::hash<leakscope::Ipv4Addr> {
    std::size_t operator()(const leakscope::Ipv4Addr& ip) const noexcept {
        return std::hash<std::uint32_t>{}(ip.to_u32());
    }
};
