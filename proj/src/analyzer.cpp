#include "leakscope/analyzer.hpp"

#include <cmath>

namespace leakscope {

namespace {

constexpr std::uint16_t kDnsPort = 53;

std::int64_t second_of(double t) { return static_cast<std::int64_t>(std::floor(t)); }

}  // namespace

const char* to_string(BindingSource s) {
    switch (s) {
        case BindingSource::ip_literal: return "ip_literal";
        case BindingSource::dns: return "dns";
        case BindingSource::sni: return "sni";
    }
    return "ip_literal";
}

Analyzer::Analyzer(DeviceRegistry& registry, Blocklist blocklist, AnalyzerConfig cfg)
    : registry_(registry), blocklist_(std::move(blocklist)), cfg_(cfg) {}

bool Analyzer::is_local(Ipv4Addr ip) const {
    return cfg_.subnet ? cfg_.subnet->contains(ip) : is_private_ipv4(ip);
}

void Analyzer::learn_arp(const ArpPacket& arp, double now) {
    if (arp.sender_ip.is_zero() || arp.sender_mac.is_multicast() || !is_local(arp.sender_ip)) return;
    const auto gw_ip = registry_.gateway_ip();
    const auto gw = registry_.gateway();
    if (gw_ip && arp.sender_ip == *gw_ip) {
        if (!gw) registry_.set_gateway({arp.sender_mac, arp.sender_ip});
        return;
    }
    if (gw && gw->mac == arp.sender_mac) return;
    if (auto self = registry_.self(); self && (self->ip == arp.sender_ip || self->mac == arp.sender_mac)) return;
    registry_.upsert(arp.sender_mac, arp.sender_ip, now);
}

void Analyzer::account(DeviceCounters& c, std::int64_t second, std::uint64_t bytes, bool outbound) {
    if (c.ring.empty() || c.ring.back().t < second) c.ring.push_back({second, 0, 0});
    // Frames arrive in clock order; a late frame lands in the newest bucket.
    TrafficSample& s = c.ring.back();
    (outbound ? s.bytes_out : s.bytes_in) += bytes;
    (outbound ? c.bytes_out : c.bytes_in) += bytes;
    while (!c.ring.empty() && c.ring.front().t <= second - cfg_.retention_seconds) c.ring.pop_front();
}

void Analyzer::bind(const DeviceId& device, Ipv4Addr remote, std::string hostname, BindingSource source,
                    std::int64_t now) {
    auto key = std::make_pair(device, remote);
    auto it = bindings_.find(key);
    if (it != bindings_.end() && static_cast<int>(it->second.source) > static_cast<int>(source)) return;
    bindings_[key] = HostnameBinding{device, remote, std::move(hostname), source, now};
}

void Analyzer::ingest(const Frame& frame, double now) {
    std::lock_guard lock(mu_);
    ++stats_.frames;
    const auto self = registry_.self();
    if (self && frame.src_mac == self->mac) {
        ++stats_.self_frames;
        return;
    }

    if (frame.ethertype == ethertype::arp) {
        ++stats_.arp_frames;
        auto arp = parse_arp(frame);
        if (!arp) {
            ++stats_.malformed;
            return;
        }
        learn_arp(*arp, now);
        return;
    }
    if (frame.ethertype != ethertype::ipv4) {
        ++stats_.unknown_ethertype;
        return;
    }
    auto ip = parse_ipv4(frame.payload);
    if (!ip) {
        ++stats_.malformed;
        return;
    }
    ++stats_.ip_frames;

    // Attribution: MAC first, then IP (frames rewritten by forwarding keep only the IPs).
    std::optional<DeviceRecord> dev;
    bool outbound = true;
    if ((dev = registry_.by_mac(frame.src_mac))) {
        outbound = true;
    } else if ((dev = registry_.by_mac(frame.dst_mac))) {
        outbound = false;
    } else if ((dev = registry_.by_ip(ip->src_ip))) {
        outbound = true;
    } else if ((dev = registry_.by_ip(ip->dst_ip))) {
        outbound = false;
    } else {
        const auto gw_ip = registry_.gateway_ip();
        const auto gw = registry_.gateway();
        const bool from_gateway = (gw_ip && ip->src_ip == *gw_ip) || (gw && gw->mac == frame.src_mac);
        if (gw_ip && ip->src_ip == *gw_ip && !gw && !frame.src_mac.is_multicast()) {
            registry_.set_gateway({frame.src_mac, ip->src_ip});
        }
        const bool self_ip = self && self->ip == ip->src_ip;
        if (!from_gateway && !self_ip && is_local(ip->src_ip) && !frame.src_mac.is_multicast()) {
            dev = registry_.upsert(frame.src_mac, ip->src_ip, now);
            outbound = true;
        }
    }
    if (!dev || !dev->monitored) {
        ++stats_.unattributed;
        return;
    }
    ++stats_.attributed;
    stats_.attributed_bytes += ip->total_length;
    registry_.touch(dev->mac, now);

    const std::int64_t sec = second_of(now);
    DeviceCounters& c = counters_[dev->device_id];
    account(c, sec, ip->total_length, outbound);

    const Ipv4Addr remote = outbound ? ip->dst_ip : ip->src_ip;
    // Handshake-only TCP segments do not count as a contact: the ClientHello that follows may rebind the name.
    bool contact = true;
    if (ip->protocol() == Transport::udp || ip->protocol() == Transport::tcp) {
        auto seg = parse_transport(*ip, frame.payload);
        if (seg && ip->protocol() == Transport::tcp && seg->payload.empty()) contact = false;
        if (!seg) {
            ++stats_.parse_errors;
        } else if (ip->protocol() == Transport::udp && !outbound && seg->src_port == kDnsPort) {
            if (auto answers = parse_dns_response(seg->payload)) {
                for (auto& a : *answers) bind(dev->device_id, a.ip, a.name, BindingSource::dns, sec);
            } else {
                ++stats_.parse_errors;
            }
        } else if (ip->protocol() == Transport::tcp && outbound && !seg->payload.empty()) {
            FlowKey key{dev->device_id, remote, Transport::tcp, seg->dst_port};
            if (flows_.insert(key).second) {
                auto sni = parse_client_hello_sni(seg->payload);
                if (sni.status == SniResult::Status::found) {
                    bind(dev->device_id, remote, sni.hostname, BindingSource::sni, sec);
                } else if (sni.status == SniResult::Status::malformed) {
                    ++stats_.parse_errors;
                }
            }
        }
    }

    auto key = std::make_pair(dev->device_id, remote);
    auto it = bindings_.find(key);
    if (it == bindings_.end()) {
        bind(dev->device_id, remote, remote.str(), BindingSource::ip_literal, sec);
        it = bindings_.find(key);
    }
    if (contact && it->second.source != BindingSource::ip_literal && match_tracker(it->second.hostname, blocklist_)) {
        c.tracker_hosts.insert(it->second.hostname);
    }
}

TrafficSnapshot Analyzer::snapshot(const PolicyStore* policy, double now) const {
    TrafficSnapshot snap;
    snap.generated_at = second_of(now);
    const auto blocked = policy ? policy->blocked_set(snap.generated_at) : std::set<DeviceId>{};
    const auto devices = registry_.monitored();
    std::lock_guard lock(mu_);
    for (const auto& d : devices) {
        DeviceTraffic t;
        t.device_id = d.device_id;
        t.name = d.name;
        t.vendor = d.vendor;
        t.ip = d.ip;
        t.mac = d.mac;
        t.blocked = blocked.count(d.device_id) > 0;
        if (auto it = counters_.find(d.device_id); it != counters_.end()) {
            for (const auto& s : it->second.ring) {
                if (s.t > snap.generated_at - cfg_.retention_seconds) t.series.push_back(s);
            }
            t.tracker_hosts = it->second.tracker_hosts;
        }
        t.tracker_count = t.tracker_hosts.size();
        snap.devices.push_back(std::move(t));
    }
    return snap;
}

IngestStats Analyzer::stats() const {
    std::lock_guard lock(mu_);
    return stats_;
}

std::optional<HostnameBinding> Analyzer::binding(const DeviceId& device, Ipv4Addr remote) const {
    std::lock_guard lock(mu_);
    auto it = bindings_.find({device, remote});
    if (it == bindings_.end()) return std::nullopt;
    return it->second;
}

std::vector<HostnameBinding> Analyzer::bindings(const DeviceId& device) const {
    std::lock_guard lock(mu_);
    std::vector<HostnameBinding> out;
    for (const auto& [key, b] : bindings_) {
        if (key.first == device) out.push_back(b);
    }
    return out;
}

std::uint64_t Analyzer::bytes_out(const DeviceId& device) const {
    std::lock_guard lock(mu_);
    auto it = counters_.find(device);
    return it == counters_.end() ? 0 : it->second.bytes_out;
}

std::uint64_t Analyzer::bytes_in(const DeviceId& device) const {
    std::lock_guard lock(mu_);
    auto it = counters_.find(device);
    return it == counters_.end() ? 0 : it->second.bytes_in;
}

}  // namespace leakscope
