#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <vector>

#include "leakscope/backend.hpp"
#include "leakscope/discovery.hpp"
#include "leakscope/linklayer.hpp"
#include "leakscope/policy.hpp"

namespace leakscope {

inline constexpr double kDefaultSpoofInterval = 2.0;

/// Random unicast, locally administered MACs that no known node owns.
class CorruptMacGenerator {
public:
    explicit CorruptMacGenerator(std::uint64_t seed = 0x5eed) : rng_(seed) {}

    MacAddr next(const std::function<bool(const MacAddr&)>& taken = {});

private:
    std::mt19937_64 rng_;
};

struct SpoofPlan {
    double cycle_interval = kDefaultSpoofInterval;
    std::vector<ArpPacket> packets;

    std::size_t per_cycle() const { return packets.size(); }
};

/// One spoofed reply per ordered pair (recipient, impersonated) of distinct nodes in
/// devices + {gateway}. A pair touching a blocked device carries a fresh corrupt MAC.
SpoofPlan plan_cycle(std::span<const DeviceRecord> devices, const GatewayRecord& gateway, const MacAddr& analyzer_mac,
                     const std::set<DeviceId>& blocked, CorruptMacGenerator& rng,
                     double cycle_interval = kDefaultSpoofInterval);

/// Same pairs carrying every node's true MAC, so poisoned caches recover.
SpoofPlan plan_healing(std::span<const DeviceRecord> devices, const GatewayRecord& gateway);

/// Bandwidth of the spoofed ARP bodies: 28 bytes x n(n+1) packets per cycle, in bits/s.
double overhead_bits_per_sec(std::size_t device_count, double cycle_interval = kDefaultSpoofInterval);

/// Ethernet framing for a plan packet: unicast to the recipient, sourced from the analyzer.
Frame spoof_frame(const ArpPacket& packet, const MacAddr& analyzer_mac, double ts);

struct SpooferStats {
    std::uint64_t cycles = 0;
    std::uint64_t packets_sent = 0;
    std::uint64_t send_failures = 0;
    std::uint64_t healing_packets = 0;
};

struct SpooferConfig {
    double cycle_interval = kDefaultSpoofInterval;
    std::uint64_t seed = 0x5eed;
};

/// Periodic poison/jam engine.
class Spoofer {
public:
    Spoofer(Backend& backend, const DeviceRegistry& registry, const PolicyStore& policy, SpooferConfig cfg = {});

    /// Runs a cycle if one is due at `now`; returns true when it did.
    bool tick(double now);
    /// Emits one full cycle immediately.
    void cycle(double now);
    /// Sends healing ARPs with true MACs; call once on shutdown.
    void heal();
    /// Timer loop for live use; returns after `stop` is set, healing on the way out.
    void run(const std::atomic<bool>& stop);

    double next_due() const { return next_due_; }
    const SpooferStats& stats() const { return stats_; }
    const std::set<DeviceId>& last_blocked() const { return last_blocked_; }
    double interval() const { return cfg_.cycle_interval; }

private:
    void emit(const std::vector<ArpPacket>& packets, const MacAddr& analyzer_mac, double now, bool healing);

    Backend& backend_;
    const DeviceRegistry& registry_;
    const PolicyStore& policy_;
    SpooferConfig cfg_;
    CorruptMacGenerator rng_;
    double next_due_ = -1.0;
    std::set<DeviceId> last_blocked_;
    SpooferStats stats_;
};

/// IP -> true destination MAC for intercepted traffic.
class ForwardTable {
public:
    ForwardTable() = default;
    ForwardTable(std::span<const DeviceRecord> devices, std::optional<GatewayRecord> gateway, Subnet subnet);

    /// Off-subnet destinations go to the gateway. nullopt when the destination is unknown.
    std::optional<MacAddr> resolve(Ipv4Addr src_ip, Ipv4Addr dst_ip) const;

private:
    std::map<Ipv4Addr, MacAddr> lan_;
    std::optional<GatewayRecord> gateway_;
    Subnet subnet_;
};

enum class ForwardResult { forwarded, not_ours, blocked, unknown_destination, send_failed };

struct ForwarderStats {
    std::uint64_t forwarded = 0;
    std::uint64_t not_ours = 0;
    std::uint64_t blocked = 0;
    std::uint64_t unknown_destination = 0;
    std::uint64_t send_failures = 0;
};

/// Re-emits intercepted IPv4 frames toward their true destination, rewriting MACs only.
class Forwarder {
public:
    Forwarder(Backend& backend, const DeviceRegistry& registry, const PolicyStore& policy, Subnet subnet);

    ForwardResult forward(const Frame& frame, double now);
    const ForwarderStats& stats() const { return stats_; }

private:
    const ForwardTable& table();

    Backend& backend_;
    const DeviceRegistry& registry_;
    const PolicyStore& policy_;
    Subnet subnet_;
    ForwardTable table_;
    std::uint64_t table_version_ = ~std::uint64_t{0};
    std::optional<GatewayRecord> table_gateway_;
    ForwarderStats stats_;
};

}  // namespace leakscope
