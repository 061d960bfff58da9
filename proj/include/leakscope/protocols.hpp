#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "leakscope/linklayer.hpp"

namespace leakscope {

struct DnsAnswer {
    std::string name;
    Ipv4Addr ip;

    bool operator==(const DnsAnswer&) const = default;
};

/// A-record answers of a DNS response (names lowercased, compression followed with a hop
/// bound). Non-A records are skipped; an error rcode yields an empty list.
/// nullopt for truncated messages, queries, or pointer loops.
std::optional<std::vector<DnsAnswer>> parse_dns_response(ByteView msg);

struct SniResult {
    enum class Status { found, absent, malformed };
    Status status = Status::absent;
    std::string hostname;

    static SniResult found(std::string h) { return {Status::found, std::move(h)}; }
    static SniResult absent() { return {Status::absent, {}}; }
    static SniResult malformed() { return {Status::malformed, {}}; }
};

/// Extracts the host_name server_name from the first client payload of a TCP flow.
/// Anything that is not a TLS handshake record carrying a ClientHello is `absent`;
/// a ClientHello whose internal lengths disagree is `malformed`.
SniResult parse_client_hello_sni(ByteView stream_head);

/// Tracker domains, stored lowercase without leading or trailing dots.
class Blocklist {
public:
    Blocklist() = default;
    explicit Blocklist(std::set<std::string> domains);

    /// false if `domain` is not a valid dotted DNS name.
    bool add(std::string_view domain);
    bool contains(std::string_view domain) const { return domains_.count(std::string(domain)) > 0; }
    std::size_t size() const { return domains_.size(); }
    const std::set<std::string>& domains() const { return domains_; }

private:
    std::set<std::string> domains_;
};

/// Newline-delimited domains with `#` comments. Throws ParseError.
Blocklist parse_blocklist(std::string_view text, const std::string& origin = "<blocklist>");
Blocklist load_blocklist(const std::string& path);

/// Exact match or suffix match on a label boundary.
bool match_tracker(std::string_view hostname, const Blocklist& blocklist);

/// Lowercases and strips a trailing root dot; nullopt when not a valid DNS name.
std::optional<std::string> normalize_hostname(std::string_view name);

}  // namespace leakscope
