#pragma once

#include <functional>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "leakscope/backend.hpp"
#include "leakscope/netmodel.hpp"

namespace leakscope {

/// OUI -> text mapping loaded from `XX:XX:XX<whitespace>text` lines.
class OuiMap {
public:
    void set(const Oui& oui, std::string text) { entries_[oui] = std::move(text); }
    std::optional<std::string> find(const Oui& oui) const;
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const std::map<Oui, std::string>& entries() const { return entries_; }

    /// Non-fatal findings from loading, e.g. duplicate keys.
    std::vector<std::string> warnings;

private:
    std::map<Oui, std::string> entries_;
};

struct OuiTable : OuiMap {
    /// Total lookup: "unknown" when absent.
    std::string vendor(const Oui& oui) const { return find(oui).value_or("unknown"); }
};

struct NameMap : OuiMap {};

/// Also accepts the IEEE registry layout (`XX-XX-XX   (hex)\tVendor`). Later duplicates win.
OuiTable parse_oui_table(std::string_view text, const std::string& origin = "<oui>");
NameMap parse_name_map(std::string_view text, const std::string& origin = "<names>");
OuiTable load_oui_table(const std::string& path);
NameMap load_name_map(const std::string& path);

struct Identity {
    std::string vendor;
    std::string name;

    bool operator==(const Identity&) const = default;
};

Identity identify(const MacAddr& mac, const OuiTable& ouis, const NameMap& names);

struct GatewayRecord {
    MacAddr mac;
    Ipv4Addr ip;

    bool operator==(const GatewayRecord&) const = default;
};

/// Shared device store: one writer, many readers. Keyed by MAC; IPs are unique.
class DeviceRegistry {
public:
    DeviceRegistry() = default;
    DeviceRegistry(OuiTable ouis, NameMap names, bool known_only = false);

    /// Creates or refreshes a record. A different record holding the same IP is evicted.
    DeviceRecord upsert(const MacAddr& mac, Ipv4Addr ip, double now);
    void touch(const MacAddr& mac, double now);
    bool remove(const DeviceId& id);

    void set_gateway(const GatewayRecord& gw);
    std::optional<GatewayRecord> gateway() const;
    void set_self(const LocalIdentity& self);
    std::optional<LocalIdentity> self() const;
    /// Gateway IP known before its MAC (from configuration).
    void set_gateway_ip(Ipv4Addr ip);
    std::optional<Ipv4Addr> gateway_ip() const;

    std::optional<DeviceRecord> by_mac(const MacAddr& mac) const;
    std::optional<DeviceRecord> by_ip(Ipv4Addr ip) const;
    std::optional<DeviceRecord> find(const DeviceId& id) const;
    bool contains(const DeviceId& id) const;

    /// Consistent copy ordered by MAC.
    std::vector<DeviceRecord> snapshot() const;
    std::vector<DeviceRecord> monitored() const;
    std::size_t size() const;
    /// Bumped on every structural change; cheap staleness check for derived tables.
    std::uint64_t version() const;

    Identity label(const MacAddr& mac) const { return identify(mac, ouis_, names_); }

private:
    mutable std::shared_mutex mu_;
    OuiTable ouis_;
    NameMap names_;
    bool known_only_ = false;
    std::map<MacAddr, DeviceRecord> devices_;
    std::optional<GatewayRecord> gateway_;
    std::optional<Ipv4Addr> gateway_ip_;
    std::optional<LocalIdentity> self_;
    std::uint64_t version_ = 0;
};

struct ScanOptions {
    Subnet subnet;
    double timeout = 2.0;
    /// Replies from this address identify the gateway instead of a device.
    std::optional<Ipv4Addr> gateway_ip;
};

struct ScanResult {
    std::vector<DeviceRecord> devices;
    std::optional<GatewayRecord> gateway;
    std::size_t requests_sent = 0;
};

/// Broadcasts one ARP request per subnet address and collects replies until the timeout
/// (backend clock). Non-ARP frames seen meanwhile go to `other` when provided.
/// Throws Error(invalid_argument) for prefixes shorter than /16 and Error(backend_io) on send failure.
ScanResult arp_scan(Backend& backend, const LocalIdentity& self, const ScanOptions& opts, const DeviceRegistry& labels,
                    const std::function<void(const Frame&)>& other = {});

/// Registers scan findings; returns how many devices were added or refreshed.
std::size_t apply_scan(DeviceRegistry& registry, const ScanResult& scan, double now);

}  // namespace leakscope
