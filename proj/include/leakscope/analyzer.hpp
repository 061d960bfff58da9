#pragma once

#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "leakscope/discovery.hpp"
#include "leakscope/linklayer.hpp"
#include "leakscope/netmodel.hpp"
#include "leakscope/policy.hpp"
#include "leakscope/protocols.hpp"

namespace leakscope {

enum class BindingSource { ip_literal = 0, dns = 1, sni = 2 };

const char* to_string(BindingSource s);

struct HostnameBinding {
    DeviceId device;
    Ipv4Addr remote_ip;
    std::string hostname;
    BindingSource source = BindingSource::ip_literal;
    std::int64_t observed_at = 0;

    bool operator==(const HostnameBinding&) const = default;
};

/// Device side is always local.
struct FlowKey {
    DeviceId device;
    Ipv4Addr remote_ip;
    Transport protocol = Transport::other;
    std::uint16_t remote_port = 0;

    auto operator<=>(const FlowKey&) const = default;
};

struct DeviceCounters {
    std::deque<TrafficSample> ring;
    std::uint64_t bytes_out = 0;
    std::uint64_t bytes_in = 0;
    std::set<std::string> tracker_hosts;
};

struct IngestStats {
    std::uint64_t frames = 0;
    std::uint64_t arp_frames = 0;
    std::uint64_t ip_frames = 0;
    std::uint64_t attributed = 0;
    std::uint64_t unattributed = 0;
    std::uint64_t attributed_bytes = 0;
    std::uint64_t unknown_ethertype = 0;
    std::uint64_t malformed = 0;
    std::uint64_t parse_errors = 0;
    /// Frames we transmitted ourselves (looped back by the capture layer).
    std::uint64_t self_frames = 0;

    bool operator==(const IngestStats&) const = default;
};

struct AnalyzerConfig {
    std::int64_t retention_seconds = 600;
    /// Addresses treated as LAN-local when learning new devices; RFC 1918 when unset.
    std::optional<Subnet> subnet;
};

/// Header-only traffic accounting with hostname attribution. One ingest thread,
/// any number of snapshot readers.
class Analyzer {
public:
    Analyzer(DeviceRegistry& registry, Blocklist blocklist, AnalyzerConfig cfg = {});

    void ingest(const Frame& frame, double now);

    TrafficSnapshot snapshot(const PolicyStore* policy, double now) const;
    IngestStats stats() const;
    std::optional<HostnameBinding> binding(const DeviceId& device, Ipv4Addr remote) const;
    std::vector<HostnameBinding> bindings(const DeviceId& device) const;
    std::uint64_t bytes_out(const DeviceId& device) const;
    std::uint64_t bytes_in(const DeviceId& device) const;
    const Blocklist& blocklist() const { return blocklist_; }

private:
    bool is_local(Ipv4Addr ip) const;
    void learn_arp(const ArpPacket& arp, double now);
    void bind(const DeviceId& device, Ipv4Addr remote, std::string hostname, BindingSource source, std::int64_t now);
    void account(DeviceCounters& c, std::int64_t second, std::uint64_t bytes, bool outbound);

    DeviceRegistry& registry_;
    Blocklist blocklist_;
    AnalyzerConfig cfg_;

    mutable std::mutex mu_;
    std::map<DeviceId, DeviceCounters> counters_;
    std::map<std::pair<DeviceId, Ipv4Addr>, HostnameBinding> bindings_;
    std::set<FlowKey> flows_;
    IngestStats stats_;
};

}  // namespace leakscope
