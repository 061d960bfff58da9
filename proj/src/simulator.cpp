#include <spdlog/spdlog.h>

#include <algorithm>

#include "leakscope/error.hpp"
#include "leakscope/simnet.hpp"

namespace leakscope::sim {

namespace {

constexpr double kEpsilon = 1e-9;
constexpr double kArpRetry = 1.0;
constexpr double kPendingTimeout = 3.0;
constexpr std::size_t kUdpChunk = 1472;
constexpr std::size_t kTcpChunk = 1460;
constexpr std::uint16_t kDnsPort = 53;
constexpr std::uint16_t kTlsPort = 443;

// Reads the first question name of a DNS query; queries never use compression.
std::optional<std::string> dns_query_name(ByteView msg) {
    if (msg.size() < 12) return std::nullopt;
    std::string name;
    std::size_t pos = 12;
    while (pos < msg.size()) {
        const std::size_t len = msg[pos++];
        if (len == 0) return name;
        if (len > 63 || pos + len > msg.size()) return std::nullopt;
        if (!name.empty()) name += '.';
        name.append(reinterpret_cast<const char*>(msg.data() + pos), len);
        pos += len;
    }
    return std::nullopt;
}

std::vector<std::size_t> chunks(std::size_t total, std::size_t chunk) {
    std::vector<std::size_t> out;
    if (total == 0) out.push_back(0);
    while (total > 0) {
        out.push_back(std::min(total, chunk));
        total -= out.back();
    }
    return out;
}

}  // namespace

Simulator::Simulator(Scenario scenario) : scenario_(std::move(scenario)), state_(scenario_.hosts.size()) {
    for (std::size_t i = 0; i < scenario_.hosts.size(); ++i) {
        if (scenario_.hosts[i].role == Role::gateway) gateway_ = static_cast<int>(i);
        if (scenario_.hosts[i].role == Role::analyzer) analyzer_ = static_cast<int>(i);
    }
    if (gateway_ < 0) throw Error(ErrorCode::no_gateway, "scenario has no gateway");
}

int Simulator::host_index(std::string_view name) const {
    for (std::size_t i = 0; i < scenario_.hosts.size(); ++i) {
        if (scenario_.hosts[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

bool Simulator::on_lan(int host) const { return this->host(host).role != Role::external; }

int Simulator::by_mac(Link link, const MacAddr& mac) const {
    for (std::size_t i = 0; i < scenario_.hosts.size(); ++i) {
        const auto& h = scenario_.hosts[i];
        const bool attached = link == Link::lan ? h.role != Role::external
                                                : (h.role == Role::external || h.role == Role::gateway);
        if (attached && h.mac == mac) return static_cast<int>(i);
    }
    return -1;
}

int Simulator::by_ip(Ipv4Addr ip) const {
    for (std::size_t i = 0; i < scenario_.hosts.size(); ++i) {
        if (scenario_.hosts[i].ip == ip) return static_cast<int>(i);
    }
    return -1;
}

std::vector<Frame> Simulator::step(double dt) {
    if (!(dt > 0)) throw Error(ErrorCode::invalid_argument, "simulation step must be positive");
    emitted_.clear();
    const double target = now_ + dt;
    while (next_event_ < scenario_.events.size() && scenario_.events[next_event_].at <= target + kEpsilon) {
        const auto& ev = scenario_.events[next_event_];
        now_ = std::max(now_, ev.at);
        fire(ev, next_event_);
        ++next_event_;
        drain();
    }
    now_ = target;
    expire();
    drain();
    return std::move(emitted_);
}

Delivery Simulator::inject(const Frame& frame) {
    const std::size_t first = log_.size();
    transmit(Link::lan, frame, by_mac(Link::lan, frame.src_mac));
    drain();
    return log_.at(first).outcome;
}

ArpCache Simulator::arp_cache_of(std::string_view host) const {
    const int idx = host_index(host);
    if (idx < 0) throw Error(ErrorCode::unknown_host, "unknown simulated host '" + std::string(host) + "'");
    ArpCache live;
    for (const auto& [ip, entry] : state_[static_cast<std::size_t>(idx)].cache) {
        if (entry.expires_at > now_ + kEpsilon) live.emplace(ip, entry);
    }
    return live;
}

std::deque<Frame> Simulator::take_analyzer_inbox() {
    std::deque<Frame> out;
    out.swap(analyzer_inbox_);
    return out;
}

std::size_t Simulator::scripted_bytes(std::string_view from, std::string_view to) const {
    auto it = scripted_.find({host_index(from), host_index(to)});
    return it == scripted_.end() ? 0 : it->second;
}

std::size_t Simulator::delivered_bytes(std::string_view from, std::string_view to) const {
    auto it = delivered_.find({host_index(from), host_index(to)});
    return it == delivered_.end() ? 0 : it->second;
}

void Simulator::write_log_pcap(const std::string& path) const {
    PcapWriter out(path);
    for (const auto& e : log_) out.write(e.frame);
}

std::uint32_t Simulator::next_seq(int host, Ipv4Addr remote, std::uint16_t sport, std::size_t len) {
    auto& seq = tcp_seq_[{host, remote.to_u32(), sport}];
    const std::uint32_t cur = seq;
    seq += static_cast<std::uint32_t>(len);
    return cur;
}

void Simulator::fire(const ScenarioEvent& ev, std::size_t index) {
    const int from = host_index(ev.from);
    const auto& h = host(from);
    const auto sport = static_cast<std::uint16_t>(49152 + index % 16000);
    auto send = [&](Ipv4Addr dst, Bytes packet, std::size_t payload) {
        scripted_[{from, by_ip(dst)}] += payload;
        if (on_lan(from)) {
            send_ip(from, dst, std::move(packet));
        } else {
            send_wan(from, std::move(packet));
        }
    };
    auto send_tcp = [&](std::uint16_t dport, ByteView data) {
        std::size_t off = 0;
        for (std::size_t n : chunks(data.size(), kTcpChunk)) {
            auto piece = data.subspan(off, n);
            TcpFields f;
            f.seq = next_seq(from, ev.remote, sport, n);
            send(ev.remote, build_tcp_packet(h.ip, ev.remote, sport, dport, piece, f), n);
            off += n;
        }
    };

    switch (ev.kind) {
        case EventKind::dns_query: {
            auto q = build_dns_query(static_cast<std::uint16_t>(index), ev.hostname);
            const auto size = q.size();
            send(scenario_.resolver, build_udp_packet(h.ip, scenario_.resolver, sport, kDnsPort, q), size);
            break;
        }
        case EventKind::udp_send:
            for (std::size_t n : chunks(ev.bytes, kUdpChunk)) {
                Bytes data(n, static_cast<std::uint8_t>(index));
                send(ev.remote, build_udp_packet(h.ip, ev.remote, sport, 9000, data), n);
            }
            break;
        case EventKind::tcp_send: {
            Bytes data(ev.bytes, static_cast<std::uint8_t>(index));
            send_tcp(8080, data);
            break;
        }
        case EventKind::tls_connect: {
            send_tcp(kTlsPort, build_client_hello(ev.hostname, static_cast<std::uint32_t>(index)));
            if (ev.bytes > 0) {
                // Application-data records; contents are opaque to every observer.
                Bytes data(ev.bytes, 0x17);
                send_tcp(kTlsPort, data);
            }
            break;
        }
    }
}

void Simulator::send_ip(int host_idx, Ipv4Addr dst, Bytes packet) {
    const auto& h = host(host_idx);
    auto& st = state_[static_cast<std::size_t>(host_idx)];
    const Ipv4Addr next_hop = scenario_.subnet.contains(dst) ? dst : host(gateway_).ip;
    if (next_hop == h.ip) {
        ++diagnostics_;
        return;
    }
    auto it = st.cache.find(next_hop);
    if (it != st.cache.end() && it->second.expires_at > now_ + kEpsilon) {
        transmit(Link::lan, Frame{it->second.mac, h.mac, ethertype::ipv4, std::move(packet), now_}, host_idx);
        return;
    }
    st.pending[next_hop].push_back({std::move(packet), now_});
    auto asked = st.arp_requested_at.find(next_hop);
    if (asked == st.arp_requested_at.end() || now_ - asked->second >= kArpRetry) {
        st.arp_requested_at[next_hop] = now_;
        ArpPacket req{ArpOp::request, h.mac, h.ip, MacAddr(), next_hop};
        transmit(Link::lan, make_arp_frame(req, h.mac, MacAddr::broadcast(), now_), host_idx);
    }
}

void Simulator::send_wan(int host_idx, Bytes packet) {
    const auto& h = host(host_idx);
    MacAddr dst;
    if (h.role == Role::external) {
        dst = host(gateway_).mac;
    } else {
        auto ip = parse_ipv4(packet);
        const int ext = ip ? by_ip(ip->dst_ip) : -1;
        if (ext < 0 || host(ext).role != Role::external) {
            ++diagnostics_;
            spdlog::debug("sim: no route for {}", ip ? ip->dst_ip.str() : std::string("?"));
            return;
        }
        dst = host(ext).mac;
    }
    transmit(Link::wan, Frame{dst, h.mac, ethertype::ipv4, std::move(packet), now_}, host_idx);
}

void Simulator::transmit(Link link, Frame frame, int sender) {
    frame.ts = now_;
    emitted_.push_back(frame);
    queue_.push_back({link, std::move(frame), sender});
}

Delivery Simulator::route(const Wire& w, std::vector<int>& recipients) const {
    recipients.clear();
    if (w.frame.dst_mac.is_broadcast() || w.frame.dst_mac.is_multicast()) {
        for (std::size_t i = 0; i < scenario_.hosts.size(); ++i) {
            const int idx = static_cast<int>(i);
            if (idx == w.sender) continue;
            if (by_mac(w.link, scenario_.hosts[i].mac) == idx) recipients.push_back(idx);
        }
        return {Delivery::Kind::broadcast, -1};
    }
    const int owner = by_mac(w.link, w.frame.dst_mac);
    if (owner < 0 || owner == w.sender) return {Delivery::Kind::dropped, -1};
    recipients.push_back(owner);
    return {Delivery::Kind::unicast, owner};
}

void Simulator::drain() {
    std::vector<int> recipients;
    while (!queue_.empty()) {
        Wire w = std::move(queue_.front());
        queue_.pop_front();
        const Delivery outcome = route(w, recipients);
        log_.push_back({now_, w.link, w.frame, w.sender, outcome});
        for (int r : recipients) receive(r, w.link, w.frame);
    }
}

void Simulator::receive(int host_idx, Link link, const Frame& frame) {
    if (host_idx == analyzer_) {
        analyzer_inbox_.push_back(frame);
        // The analyzer's own kernel still answers ARP for its address.
        if (auto arp = parse_arp(frame); arp && arp->op == ArpOp::request && arp->target_ip == host(host_idx).ip) {
            receive_arp(host_idx, *arp);
        }
        return;
    }
    if (frame.ethertype == ethertype::arp) {
        auto arp = parse_arp(frame);
        if (!arp) {
            ++diagnostics_;
            return;
        }
        if (link == Link::lan) receive_arp(host_idx, *arp);
        return;
    }
    if (frame.ethertype == ethertype::ipv4) receive_ip(host_idx, link, frame);
}

void Simulator::receive_arp(int host_idx, const ArpPacket& arp) {
    const auto& h = host(host_idx);
    auto& st = state_[static_cast<std::size_t>(host_idx)];
    if (!arp.sender_ip.is_zero()) st.cache[arp.sender_ip] = {arp.sender_mac, now_ + scenario_.arp_ttl};
    if (arp.op == ArpOp::request && arp.target_ip == h.ip) {
        ArpPacket reply{ArpOp::reply, h.mac, h.ip, arp.sender_mac, arp.sender_ip};
        transmit(Link::lan, make_arp_frame(reply, h.mac, arp.sender_mac, now_), host_idx);
    }
    if (auto pend = st.pending.find(arp.sender_ip); pend != st.pending.end()) {
        auto packets = std::move(pend->second);
        st.pending.erase(pend);
        st.arp_requested_at.erase(arp.sender_ip);
        for (auto& p : packets) {
            transmit(Link::lan, Frame{arp.sender_mac, h.mac, ethertype::ipv4, std::move(p.packet), now_}, host_idx);
        }
    }
}

void Simulator::receive_ip(int host_idx, Link link, const Frame& frame) {
    const auto& h = host(host_idx);
    auto ip = parse_ipv4(frame.payload);
    if (!ip) {
        ++diagnostics_;
        return;
    }
    const std::size_t len = std::min<std::size_t>(ip->total_length, frame.payload.size());
    ByteView packet(frame.payload.data(), len);
    if (ip->dst_ip == h.ip) {
        consume(host_idx, *ip, packet);
        return;
    }
    if (h.role == Role::gateway) {
        const bool dst_local = scenario_.subnet.contains(ip->dst_ip);
        if (link == Link::lan && !dst_local) {
            send_wan(host_idx, Bytes(packet.begin(), packet.end()));
            return;
        }
        if (link == Link::wan && dst_local) {
            send_ip(host_idx, ip->dst_ip, Bytes(packet.begin(), packet.end()));
            return;
        }
    }
    ++diagnostics_;
}

void Simulator::consume(int host_idx, const Ipv4Header& ip, ByteView packet) {
    const auto& h = host(host_idx);
    auto seg = parse_transport(ip, packet);
    if (!seg) {
        ++diagnostics_;
        return;
    }
    const int src = by_ip(ip.src_ip);
    delivered_[{src, host_idx}] += seg->payload.size();
    if (h.role == Role::device) return;

    auto reply = [&](Bytes pkt, std::size_t payload) {
        scripted_[{host_idx, src}] += payload;
        if (h.role == Role::external) {
            send_wan(host_idx, std::move(pkt));
        } else {
            send_ip(host_idx, ip.src_ip, std::move(pkt));
        }
    };

    if (ip.protocol() == Transport::udp && seg->dst_port == kDnsPort) {
        auto name = dns_query_name(seg->payload);
        if (!name || seg->payload.size() < 2) {
            ++diagnostics_;
            return;
        }
        const auto id = static_cast<std::uint16_t>((seg->payload[0] << 8) | seg->payload[1]);
        std::optional<Ipv4Addr> answer;
        if (auto it = scenario_.resolve.find(*name); it != scenario_.resolve.end()) answer = it->second;
        auto resp = build_dns_response(id, *name, answer);
        const auto size = resp.size();
        reply(build_udp_packet(h.ip, ip.src_ip, kDnsPort, seg->src_port, resp), size);
        return;
    }
    if (h.role != Role::external || seg->payload.empty()) return;

    // External hosts echo every data segment back to its sender.
    Bytes echo(seg->payload.begin(), seg->payload.end());
    const auto size = echo.size();
    if (ip.protocol() == Transport::udp) {
        reply(build_udp_packet(h.ip, ip.src_ip, seg->dst_port, seg->src_port, echo), size);
    } else {
        TcpFields f;
        f.seq = next_seq(host_idx, ip.src_ip, seg->dst_port, size);
        reply(build_tcp_packet(h.ip, ip.src_ip, seg->dst_port, seg->src_port, echo, f), size);
    }
}

void Simulator::expire() {
    for (std::size_t i = 0; i < state_.size(); ++i) {
        auto& st = state_[i];
        std::erase_if(st.cache, [&](const auto& kv) { return kv.second.expires_at <= now_ + kEpsilon; });
        for (auto it = st.pending.begin(); it != st.pending.end();) {
            auto& list = it->second;
            const auto before = list.size();
            std::erase_if(list, [&](const Pending& p) { return now_ - p.queued_at >= kPendingTimeout; });
            diagnostics_ += before - list.size();
            if (list.empty()) {
                st.arp_requested_at.erase(it->first);
                it = st.pending.erase(it);
            } else {
                ++it;
            }
        }
    }
}

}  // namespace leakscope::sim
