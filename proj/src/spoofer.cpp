#include "leakscope/spoofer.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <thread>

#include "leakscope/error.hpp"

namespace leakscope {

namespace {

struct Node {
    DeviceId id;
    MacAddr mac;
    Ipv4Addr ip;
    bool is_gateway = false;
};

std::vector<Node> nodes_of(std::span<const DeviceRecord> devices, const GatewayRecord& gateway) {
    std::vector<Node> nodes;
    nodes.reserve(devices.size() + 1);
    for (const auto& d : devices) nodes.push_back({d.device_id, d.mac, d.ip, false});
    nodes.push_back({device_id_of(gateway.mac), gateway.mac, gateway.ip, true});
    return nodes;
}

std::int64_t whole_second(double t) { return static_cast<std::int64_t>(std::floor(t)); }

}  // namespace

MacAddr CorruptMacGenerator::next(const std::function<bool(const MacAddr&)>& taken) {
    while (true) {
        const std::uint64_t r = rng_();
        std::array<std::uint8_t, 6> o{};
        for (int i = 0; i < 6; ++i) o[i] = static_cast<std::uint8_t>(r >> (8 * i));
        o[0] = static_cast<std::uint8_t>((o[0] & 0xfc) | 0x02);  // unicast, locally administered
        MacAddr mac(o);
        if (!taken || !taken(mac)) return mac;
    }
}

SpoofPlan plan_cycle(std::span<const DeviceRecord> devices, const GatewayRecord& gateway, const MacAddr& analyzer_mac,
                     const std::set<DeviceId>& blocked, CorruptMacGenerator& rng, double cycle_interval) {
    SpoofPlan plan;
    plan.cycle_interval = cycle_interval;
    if (devices.empty()) return plan;
    const auto nodes = nodes_of(devices, gateway);
    auto is_known = [&](const MacAddr& mac) {
        if (mac == analyzer_mac) return true;
        for (const auto& n : nodes) {
            if (n.mac == mac) return true;
        }
        return false;
    };
    auto is_blocked = [&](const Node& n) { return !n.is_gateway && blocked.count(n.id) > 0; };

    plan.packets.reserve(nodes.size() * (nodes.size() - 1));
    for (const auto& recipient : nodes) {
        for (const auto& impersonated : nodes) {
            if (&recipient == &impersonated) continue;
            ArpPacket p;
            p.op = ArpOp::reply;
            p.sender_ip = impersonated.ip;
            p.sender_mac = (is_blocked(recipient) || is_blocked(impersonated)) ? rng.next(is_known) : analyzer_mac;
            p.target_ip = recipient.ip;
            p.target_mac = recipient.mac;
            plan.packets.push_back(p);
        }
    }
    return plan;
}

SpoofPlan plan_healing(std::span<const DeviceRecord> devices, const GatewayRecord& gateway) {
    SpoofPlan plan;
    if (devices.empty()) return plan;
    const auto nodes = nodes_of(devices, gateway);
    for (const auto& recipient : nodes) {
        for (const auto& other : nodes) {
            if (&recipient == &other) continue;
            plan.packets.push_back({ArpOp::reply, other.mac, other.ip, recipient.mac, recipient.ip});
        }
    }
    return plan;
}

double overhead_bits_per_sec(std::size_t device_count, double cycle_interval) {
    const double packets = static_cast<double>(device_count) * static_cast<double>(device_count + 1);
    return static_cast<double>(kArpBodySize) * packets / cycle_interval * 8.0;
}

Frame spoof_frame(const ArpPacket& packet, const MacAddr& analyzer_mac, double ts) {
    return make_arp_frame(packet, analyzer_mac, packet.target_mac, ts);
}

Spoofer::Spoofer(Backend& backend, const DeviceRegistry& registry, const PolicyStore& policy, SpooferConfig cfg)
    : backend_(backend), registry_(registry), policy_(policy), cfg_(cfg), rng_(cfg.seed) {
    if (!(cfg_.cycle_interval > 0)) throw Error(ErrorCode::invalid_argument, "spoof interval must be positive");
}

bool Spoofer::tick(double now) {
    if (next_due_ >= 0 && now + 1e-6 < next_due_) return false;
    cycle(now);
    next_due_ = next_due_ < 0 ? now + cfg_.cycle_interval : next_due_ + cfg_.cycle_interval;
    if (next_due_ + 1e-6 <= now) next_due_ = now + cfg_.cycle_interval;
    return true;
}

void Spoofer::cycle(double now) {
    const auto self = registry_.self();
    const auto gateway = registry_.gateway();
    if (!self || !gateway) {
        spdlog::warn("spoofer: skipping cycle, {} unknown", !self ? "local identity" : "gateway");
        return;
    }
    auto devices = registry_.monitored();
    std::erase_if(devices, [](const DeviceRecord& d) { return d.ip.is_zero(); });
    const auto blocked = policy_.blocked_set(whole_second(now));
    for (const auto& id : last_blocked_) {
        if (!blocked.count(id)) spdlog::info("spoofer: restoring {}", id.str());
    }
    for (const auto& id : blocked) {
        if (!last_blocked_.count(id)) spdlog::info("spoofer: jamming {}", id.str());
    }
    last_blocked_ = blocked;
    const auto plan = plan_cycle(devices, *gateway, self->mac, blocked, rng_, cfg_.cycle_interval);
    emit(plan.packets, self->mac, now, false);
    ++stats_.cycles;
}

void Spoofer::heal() {
    const auto self = registry_.self();
    const auto gateway = registry_.gateway();
    if (!self || !gateway) return;
    auto devices = registry_.monitored();
    std::erase_if(devices, [](const DeviceRecord& d) { return d.ip.is_zero(); });
    emit(plan_healing(devices, *gateway).packets, self->mac, backend_.now(), true);
}

void Spoofer::emit(const std::vector<ArpPacket>& packets, const MacAddr& analyzer_mac, double now, bool healing) {
    for (const auto& p : packets) {
        try {
            backend_.send(spoof_frame(p, analyzer_mac, now));
            ++(healing ? stats_.healing_packets : stats_.packets_sent);
        } catch (const std::exception& e) {
            ++stats_.send_failures;
            spdlog::warn("spoofer: send failed, retrying next cycle: {}", e.what());
            return;
        }
    }
}

void Spoofer::run(const std::atomic<bool>& stop) {
    using namespace std::chrono_literals;
    while (!stop.load()) {
        tick(backend_.now());
        const double wait = std::clamp(next_due_ - backend_.now(), 0.0, 0.1);
        std::this_thread::sleep_for(std::chrono::duration<double>(wait));
    }
    heal();
}

ForwardTable::ForwardTable(std::span<const DeviceRecord> devices, std::optional<GatewayRecord> gateway, Subnet subnet)
    : gateway_(gateway), subnet_(subnet) {
    for (const auto& d : devices) lan_[d.ip] = d.mac;
    if (gateway_) lan_[gateway_->ip] = gateway_->mac;
}

std::optional<MacAddr> ForwardTable::resolve(Ipv4Addr, Ipv4Addr dst_ip) const {
    if (!subnet_.contains(dst_ip)) {
        if (!gateway_) return std::nullopt;
        return gateway_->mac;
    }
    auto it = lan_.find(dst_ip);
    if (it == lan_.end()) return std::nullopt;
    return it->second;
}

Forwarder::Forwarder(Backend& backend, const DeviceRegistry& registry, const PolicyStore& policy, Subnet subnet)
    : backend_(backend), registry_(registry), policy_(policy), subnet_(subnet) {}

const ForwardTable& Forwarder::table() {
    const auto version = registry_.version();
    const auto gateway = registry_.gateway();
    if (version != table_version_ || gateway != table_gateway_) {
        table_ = ForwardTable(registry_.snapshot(), gateway, subnet_);
        table_version_ = version;
        table_gateway_ = gateway;
    }
    return table_;
}

ForwardResult Forwarder::forward(const Frame& frame, double now) {
    const auto self = registry_.self();
    auto not_ours = [&] {
        ++stats_.not_ours;
        return ForwardResult::not_ours;
    };
    if (!self || frame.ethertype != ethertype::ipv4 || frame.dst_mac != self->mac || frame.src_mac == self->mac) {
        return not_ours();
    }
    auto ip = parse_ipv4(frame.payload);
    if (!ip || ip->dst_ip == self->ip) return not_ours();

    const auto blocked = policy_.blocked_set(whole_second(now));
    if (!blocked.empty()) {
        auto src = registry_.by_mac(frame.src_mac);
        if (!src) src = registry_.by_ip(ip->src_ip);
        auto dst = registry_.by_ip(ip->dst_ip);
        if ((src && blocked.count(src->device_id)) || (dst && blocked.count(dst->device_id))) {
            ++stats_.blocked;
            return ForwardResult::blocked;
        }
    }

    auto mac = table().resolve(ip->src_ip, ip->dst_ip);
    if (!mac) {
        ++stats_.unknown_destination;
        return ForwardResult::unknown_destination;
    }
    Frame out = frame;
    out.src_mac = self->mac;
    out.dst_mac = *mac;
    out.ts = now;
    try {
        backend_.send(out);
    } catch (const std::exception& e) {
        ++stats_.send_failures;
        spdlog::warn("forwarder: send failed: {}", e.what());
        return ForwardResult::send_failed;
    }
    ++stats_.forwarded;
    return ForwardResult::forwarded;
}

}  // namespace leakscope
