#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "leakscope/error.hpp"
#include "leakscope/simnet.hpp"

namespace leakscope::sim {

namespace {

std::vector<std::string> tokenize(std::string_view line) {
    std::vector<std::string> out;
    std::istringstream in{std::string(line)};
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::optional<double> to_seconds(const std::string& s) {
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size() || v < 0) return std::nullopt;
    return v;
}

std::optional<std::size_t> to_count(const std::string& s) {
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
    return v;
}

std::optional<Role> to_role(const std::string& s) {
    if (s == "device") return Role::device;
    if (s == "gateway") return Role::gateway;
    if (s == "analyzer") return Role::analyzer;
    if (s == "external") return Role::external;
    return std::nullopt;
}

struct PendingEvent {
    ScenarioEvent ev;
    int line;
};

}  // namespace

const HostSpec& Scenario::gateway() const {
    for (const auto& h : hosts) {
        if (h.role == Role::gateway) return h;
    }
    throw Error(ErrorCode::no_gateway, "scenario has no gateway");
}

const HostSpec* Scenario::analyzer() const {
    for (const auto& h : hosts) {
        if (h.role == Role::analyzer) return &h;
    }
    return nullptr;
}

const HostSpec* Scenario::find(std::string_view name) const {
    for (const auto& h : hosts) {
        if (h.name == name) return &h;
    }
    return nullptr;
}

const HostSpec* Scenario::find_ip(Ipv4Addr ip) const {
    for (const auto& h : hosts) {
        if (h.ip == ip) return &h;
    }
    return nullptr;
}

std::vector<const HostSpec*> Scenario::devices() const {
    std::vector<const HostSpec*> out;
    for (const auto& h : hosts) {
        if (h.role == Role::device) out.push_back(&h);
    }
    return out;
}

Scenario parse_scenario(std::string_view text, const std::string& origin) {
    Scenario sc;
    std::vector<PendingEvent> events;
    std::optional<double> duration;
    std::optional<Subnet> subnet;
    std::optional<Ipv4Addr> resolver;
    std::map<std::string, int> host_lines;

    auto fail = [&](int line, const std::string& what) { throw ParseError(origin, line, what); };

    std::istringstream in{std::string(text)};
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        if (auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
        const auto tok = tokenize(raw);
        if (tok.empty()) continue;
        const std::string& kw = tok[0];

        if (kw == "host") {
            if (tok.size() != 5) fail(lineno, "expected: host <name> <mac> <ip> <role>");
            auto mac = MacAddr::parse(tok[2]);
            auto ip = Ipv4Addr::parse(tok[3]);
            auto role = to_role(tok[4]);
            if (!mac) fail(lineno, "bad MAC address '" + tok[2] + "'");
            if (!ip) fail(lineno, "bad IPv4 address '" + tok[3] + "'");
            if (!role) fail(lineno, "unknown role '" + tok[4] + "'");
            if (host_lines.count(tok[1])) fail(lineno, "duplicate host name '" + tok[1] + "'");
            for (const auto& h : sc.hosts) {
                if (h.mac == *mac) fail(lineno, "duplicate MAC " + mac->str());
                if (h.ip == *ip) {
                    throw Error(ErrorCode::duplicate_ip, origin + ":" + std::to_string(lineno) + ": hosts '" + h.name +
                                                             "' and '" + tok[1] + "' share IP " + ip->str());
                }
                if (*role == Role::gateway && h.role == Role::gateway) fail(lineno, "more than one gateway");
                if (*role == Role::analyzer && h.role == Role::analyzer) fail(lineno, "more than one analyzer");
            }
            host_lines[tok[1]] = lineno;
            sc.hosts.push_back({tok[1], *mac, *ip, *role});
        } else if (kw == "ttl") {
            if (tok.size() != 2) fail(lineno, "expected: ttl <seconds>");
            auto v = to_seconds(tok[1]);
            if (!v || *v <= 0) fail(lineno, "bad ttl '" + tok[1] + "'");
            sc.arp_ttl = *v;
        } else if (kw == "duration") {
            if (tok.size() != 2) fail(lineno, "expected: duration <seconds>");
            duration = to_seconds(tok[1]);
            if (!duration) fail(lineno, "bad duration '" + tok[1] + "'");
        } else if (kw == "subnet") {
            if (tok.size() != 2) fail(lineno, "expected: subnet <cidr>");
            subnet = Subnet::parse(tok[1]);
            if (!subnet) fail(lineno, "bad subnet '" + tok[1] + "'");
        } else if (kw == "resolve") {
            if (tok.size() != 3) fail(lineno, "expected: resolve <hostname> <ip>");
            auto ip = Ipv4Addr::parse(tok[2]);
            if (!ip) fail(lineno, "bad IPv4 address '" + tok[2] + "'");
            sc.resolve[tok[1]] = *ip;
        } else if (kw == "resolver") {
            if (tok.size() != 2) fail(lineno, "expected: resolver <ip>");
            resolver = Ipv4Addr::parse(tok[1]);
            if (!resolver) fail(lineno, "bad IPv4 address '" + tok[1] + "'");
        } else if (kw == "at") {
            if (tok.size() < 4) fail(lineno, "expected: at <t> <host> <kind> ...");
            ScenarioEvent ev;
            auto t = to_seconds(tok[1]);
            if (!t) fail(lineno, "bad event time '" + tok[1] + "'");
            ev.at = *t;
            ev.from = tok[2];
            const std::string& kind = tok[3];
            if (kind == "dns") {
                if (tok.size() != 5) fail(lineno, "expected: at <t> <host> dns <hostname>");
                ev.kind = EventKind::dns_query;
                ev.hostname = tok[4];
            } else if (kind == "tls") {
                if (tok.size() != 7) fail(lineno, "expected: at <t> <host> tls <ip> <sni> <bytes>");
                ev.kind = EventKind::tls_connect;
                auto ip = Ipv4Addr::parse(tok[4]);
                auto n = to_count(tok[6]);
                if (!ip) fail(lineno, "bad IPv4 address '" + tok[4] + "'");
                if (!n) fail(lineno, "bad byte count '" + tok[6] + "'");
                ev.remote = *ip;
                ev.hostname = tok[5];
                ev.bytes = *n;
            } else if (kind == "udp" || kind == "tcp") {
                if (tok.size() != 6) fail(lineno, "expected: at <t> <host> " + kind + " <ip> <bytes>");
                ev.kind = kind == "udp" ? EventKind::udp_send : EventKind::tcp_send;
                auto ip = Ipv4Addr::parse(tok[4]);
                auto n = to_count(tok[5]);
                if (!ip) fail(lineno, "bad IPv4 address '" + tok[4] + "'");
                if (!n) fail(lineno, "bad byte count '" + tok[5] + "'");
                ev.remote = *ip;
                ev.bytes = *n;
            } else {
                fail(lineno, "unknown event kind '" + kind + "'");
            }
            events.push_back({ev, lineno});
        } else {
            fail(lineno, "unknown directive '" + kw + "'");
        }
    }

    const auto gateway_count = std::count_if(sc.hosts.begin(), sc.hosts.end(),
                                             [](const HostSpec& h) { return h.role == Role::gateway; });
    if (gateway_count == 0) throw Error(ErrorCode::no_gateway, origin + ": scenario declares no gateway host");

    const auto& gw = sc.gateway();
    sc.subnet = subnet.value_or(Subnet::containing(gw.ip, 24));
    sc.resolver = resolver.value_or(gw.ip);
    for (const auto& h : sc.hosts) {
        const bool inside = sc.subnet.contains(h.ip);
        if ((h.role == Role::external) == inside) {
            fail(host_lines[h.name], "host '" + h.name + "' is on the wrong side of subnet " + sc.subnet.str());
        }
    }

    double last = 0.0;
    for (const auto& pe : events) {
        const HostSpec* from = sc.find(pe.ev.from);
        if (!from) fail(pe.line, "unknown host '" + pe.ev.from + "'");
        if (from->role != Role::device && from->role != Role::external) {
            fail(pe.line, "only device and external hosts originate traffic");
        }
        if (from->role == Role::external && pe.ev.kind == EventKind::dns_query) {
            fail(pe.line, "external hosts do not issue DNS queries");
        }
        if (duration && pe.ev.at > *duration) fail(pe.line, "event after scenario duration");
        last = std::max(last, pe.ev.at);
        sc.events.push_back(pe.ev);
    }
    std::stable_sort(sc.events.begin(), sc.events.end(),
                     [](const ScenarioEvent& a, const ScenarioEvent& b) { return a.at < b.at; });
    sc.duration = duration.value_or(last);
    return sc;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::not_found, "scenario file not found: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), path);
}

}  // namespace leakscope::sim
