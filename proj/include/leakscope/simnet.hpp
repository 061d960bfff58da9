#pragma once

#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "leakscope/backend.hpp"
#include "leakscope/linklayer.hpp"

namespace leakscope::sim {

enum class Role { device, gateway, analyzer, external };

struct HostSpec {
    std::string name;
    MacAddr mac;
    Ipv4Addr ip;
    Role role = Role::device;
};

enum class EventKind { dns_query, tls_connect, udp_send, tcp_send };

struct ScenarioEvent {
    double at = 0.0;
    std::string from;
    EventKind kind = EventKind::udp_send;
    /// Queried name for dns_query, SNI for tls_connect.
    std::string hostname;
    Ipv4Addr remote;
    std::size_t bytes = 0;
};

/// Parsed scenario file. Text grammar is documented in docs/scenario-format.md.
struct Scenario {
    std::vector<HostSpec> hosts;
    std::vector<ScenarioEvent> events;
    double duration = 0.0;
    double arp_ttl = 60.0;
    Subnet subnet;
    std::map<std::string, Ipv4Addr> resolve;
    Ipv4Addr resolver;

    const HostSpec& gateway() const;
    const HostSpec* analyzer() const;
    const HostSpec* find(std::string_view name) const;
    const HostSpec* find_ip(Ipv4Addr ip) const;
    std::vector<const HostSpec*> devices() const;
};

/// Throws ParseError (with line), Error(duplicate_ip) or Error(no_gateway).
Scenario parse_scenario(std::string_view text, const std::string& origin = "<scenario>");
Scenario load_scenario(const std::string& path);

struct CacheEntry {
    MacAddr mac;
    double expires_at = 0.0;

    bool operator==(const CacheEntry&) const = default;
};

using ArpCache = std::map<Ipv4Addr, CacheEntry>;

enum class Link { lan, wan };

struct Delivery {
    enum class Kind { unicast, broadcast, dropped };
    Kind kind = Kind::dropped;
    /// Receiving host index for unicast; -1 otherwise.
    int host = -1;

    bool operator==(const Delivery&) const = default;
};

struct LogEntry {
    double t = 0.0;
    Link link = Link::lan;
    Frame frame;
    /// Host that put the frame on the wire, or -1 for injected frames from an unknown MAC.
    int sender = -1;
    Delivery outcome;

    bool operator==(const LogEntry&) const = default;
};

using DeliveryLog = std::vector<LogEntry>;

/// Lock-step discrete-event LAN. Hosts keep real ARP caches; frames are delivered by
/// destination MAC only. Not thread-safe.
class Simulator {
public:
    explicit Simulator(Scenario scenario);

    double now() const { return now_; }
    const Scenario& scenario() const { return scenario_; }

    /// Advances the clock by dt (> 0), firing due events and expiring ARP entries.
    /// Returns every frame put on either link during the step.
    std::vector<Frame> step(double dt);

    /// Puts a frame on the LAN as if transmitted by the owner of its source MAC.
    Delivery inject(const Frame& frame);

    /// Live entries only. Throws Error(unknown_host).
    ArpCache arp_cache_of(std::string_view host) const;

    const DeliveryLog& log() const { return log_; }
    void write_log_pcap(const std::string& path) const;

    /// Frames delivered to the analyzer host, not yet drained.
    std::deque<Frame> take_analyzer_inbox();

    /// Scripted transport payload bytes: what `from` tried to send to `to`.
    std::size_t scripted_bytes(std::string_view from, std::string_view to) const;
    /// Transport payload bytes from `from` that `to` actually consumed.
    std::size_t delivered_bytes(std::string_view from, std::string_view to) const;
    std::size_t diagnostics() const { return diagnostics_; }

    int host_index(std::string_view name) const;
    const HostSpec& host(int index) const { return scenario_.hosts.at(static_cast<std::size_t>(index)); }

private:
    struct Pending {
        Bytes packet;
        double queued_at = 0.0;
    };
    struct HostState {
        ArpCache cache;
        std::map<Ipv4Addr, std::vector<Pending>> pending;
        std::map<Ipv4Addr, double> arp_requested_at;
    };
    struct Wire {
        Link link;
        Frame frame;
        int sender;
    };

    void fire(const ScenarioEvent& ev, std::size_t index);
    void transmit(Link link, Frame frame, int sender);
    void drain();
    Delivery route(const Wire& w, std::vector<int>& recipients) const;
    void receive(int host, Link link, const Frame& frame);
    void receive_arp(int host, const ArpPacket& arp);
    void receive_ip(int host, Link link, const Frame& frame);
    void consume(int host, const Ipv4Header& ip, ByteView packet);
    void send_ip(int host, Ipv4Addr dst, Bytes packet);
    void send_wan(int host, Bytes packet);
    void expire();
    std::uint32_t next_seq(int host, Ipv4Addr remote, std::uint16_t sport, std::size_t len);

    int by_mac(Link link, const MacAddr& mac) const;
    int by_ip(Ipv4Addr ip) const;
    bool on_lan(int host) const;

    Scenario scenario_;
    std::vector<HostState> state_;
    std::size_t next_event_ = 0;
    double now_ = 0.0;
    std::deque<Wire> queue_;
    std::vector<Frame> emitted_;
    DeliveryLog log_;
    std::deque<Frame> analyzer_inbox_;
    std::map<std::pair<int, int>, std::size_t> scripted_;
    std::map<std::pair<int, int>, std::size_t> delivered_;
    std::map<std::tuple<int, std::uint32_t, std::uint16_t>, std::uint32_t> tcp_seq_;
    std::size_t diagnostics_ = 0;
    int gateway_ = -1;
    int analyzer_ = -1;
};

/// Wire formats the simulated hosts speak.
Bytes build_dns_query(std::uint16_t id, std::string_view name);
Bytes build_dns_response(std::uint16_t id, std::string_view name, std::optional<Ipv4Addr> answer);
/// Minimal well-formed TLS 1.2/1.3 ClientHello carrying a server_name extension.
Bytes build_client_hello(std::string_view sni, std::uint32_t random_seed = 0);

/// Backend attached to the scenario's analyzer host.
class SimBackend : public Backend {
public:
    SimBackend(std::shared_ptr<Simulator> sim, double epoch_base = 0.0);

    Received receive() override;
    void send(const Frame& frame) override;
    double now() const override;
    void advance(double seconds) override;

    std::optional<LocalIdentity> local_identity() const override;
    std::optional<Subnet> subnet() const override;
    std::optional<Ipv4Addr> gateway_hint() const override;

    /// Step size used when advance() covers more than one step.
    void set_step(double dt) { step_ = dt; }
    std::shared_ptr<Simulator> simulator() const { return sim_; }
    /// Sim time (seconds since scenario start).
    double sim_time() const;

private:
    mutable std::mutex mu_;
    std::shared_ptr<Simulator> sim_;
    double epoch_base_;
    double step_ = 0.1;
    std::deque<Frame> inbox_;
    std::atomic<double> now_{0.0};
};

}  // namespace leakscope::sim
