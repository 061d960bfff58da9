#include "leakscope/protocols.hpp"

#include <fstream>
#include <sstream>

#include "leakscope/error.hpp"

namespace leakscope {

namespace {

constexpr int kMaxPointerHops = 32;
constexpr std::size_t kMaxNameLength = 255;

std::uint16_t be16(ByteView b, std::size_t off) { return static_cast<std::uint16_t>((b[off] << 8) | b[off + 1]); }

std::uint32_t be24(ByteView b, std::size_t off) {
    return (std::uint32_t{b[off]} << 16) | (std::uint32_t{b[off + 1]} << 8) | b[off + 2];
}

char lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

// Decodes a possibly-compressed name starting at `pos`. On success `pos` is left just past
// the name as it appears in place (a pointer counts as two bytes).
std::optional<std::string> read_name(ByteView msg, std::size_t& pos) {
    std::string name;
    std::size_t cur = pos;
    bool jumped = false;
    int hops = 0;
    while (true) {
        if (cur >= msg.size()) return std::nullopt;
        const std::uint8_t len = msg[cur];
        if ((len & 0xc0) == 0xc0) {
            if (cur + 1 >= msg.size() || ++hops > kMaxPointerHops) return std::nullopt;
            const std::size_t target = static_cast<std::size_t>(((len & 0x3f) << 8) | msg[cur + 1]);
            if (!jumped) pos = cur + 2;
            jumped = true;
            cur = target;
            continue;
        }
        if ((len & 0xc0) != 0) return std::nullopt;
        if (len == 0) {
            if (!jumped) pos = cur + 1;
            return name;
        }
        if (cur + 1 + len > msg.size()) return std::nullopt;
        if (!name.empty()) name += '.';
        for (std::size_t i = 0; i < len; ++i) name += lower(static_cast<char>(msg[cur + 1 + i]));
        if (name.size() > kMaxNameLength) return std::nullopt;
        cur += 1 + len;
    }
}

bool valid_label_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-' || c == '_';
}

}  // namespace

std::optional<std::string> normalize_hostname(std::string_view name) {
    std::string out;
    out.reserve(name.size());
    for (char c : name) out += lower(c);
    if (!out.empty() && out.back() == '.') out.pop_back();
    if (out.empty() || out.size() > kMaxNameLength) return std::nullopt;
    std::size_t label = 0;
    for (char c : out) {
        if (c == '.') {
            if (label == 0) return std::nullopt;
            label = 0;
            continue;
        }
        if (!valid_label_char(c) || ++label > 63) return std::nullopt;
    }
    if (label == 0) return std::nullopt;
    return out;
}

std::optional<std::vector<DnsAnswer>> parse_dns_response(ByteView msg) {
    if (msg.size() < 12) return std::nullopt;
    const std::uint16_t flags = be16(msg, 2);
    if ((flags & 0x8000) == 0) return std::nullopt;
    const std::uint16_t qdcount = be16(msg, 4);
    const std::uint16_t ancount = be16(msg, 6);
    std::size_t pos = 12;
    for (std::uint16_t i = 0; i < qdcount; ++i) {
        if (!read_name(msg, pos) || pos + 4 > msg.size()) return std::nullopt;
        pos += 4;
    }
    std::vector<DnsAnswer> answers;
    if ((flags & 0x000f) != 0) return answers;
    for (std::uint16_t i = 0; i < ancount; ++i) {
        auto name = read_name(msg, pos);
        if (!name || pos + 10 > msg.size()) return std::nullopt;
        const std::uint16_t type = be16(msg, pos);
        const std::uint16_t klass = be16(msg, pos + 2);
        const std::uint16_t rdlength = be16(msg, pos + 8);
        pos += 10;
        if (pos + rdlength > msg.size()) return std::nullopt;
        if (type == 1 && klass == 1 && rdlength == 4) {
            answers.push_back({*name, Ipv4Addr({msg[pos], msg[pos + 1], msg[pos + 2], msg[pos + 3]})});
        }
        pos += rdlength;
    }
    return answers;
}

SniResult parse_client_hello_sni(ByteView data) {
    // TLS record: type(1)=handshake, version(2) with major 3, length(2).
    if (data.size() < 5 || data[0] != 0x16 || data[1] != 0x03 || data[2] > 0x04) return SniResult::absent();
    const std::size_t record_len = be16(data, 3);
    if (record_len < 4) return SniResult::malformed();
    if (data.size() < 5 + 4) return SniResult::malformed();
    if (data[5] != 0x01) return SniResult::absent();  // not a ClientHello
    const std::size_t hs_len = be24(data, 6);
    if (hs_len + 4 > record_len) return SniResult::malformed();
    const std::size_t end = 9 + hs_len;
    if (end > data.size()) return SniResult::malformed();
    ByteView hello = data.subspan(0, end);

    std::size_t pos = 9;
    auto need = [&](std::size_t n) { return pos + n <= hello.size(); };
    if (!need(2 + 32 + 1)) return SniResult::malformed();
    pos += 2 + 32;
    const std::size_t sid = hello[pos];
    pos += 1;
    if (sid > 32 || !need(sid + 2)) return SniResult::malformed();
    pos += sid;
    const std::size_t suites = be16(hello, pos);
    pos += 2;
    if (suites % 2 != 0 || !need(suites + 1)) return SniResult::malformed();
    pos += suites;
    const std::size_t comp = hello[pos];
    pos += 1;
    if (!need(comp)) return SniResult::malformed();
    pos += comp;
    if (pos == hello.size()) return SniResult::absent();  // no extensions block
    if (!need(2)) return SniResult::malformed();
    const std::size_t ext_total = be16(hello, pos);
    pos += 2;
    if (pos + ext_total != hello.size()) return SniResult::malformed();

    while (pos < hello.size()) {
        if (!need(4)) return SniResult::malformed();
        const std::uint16_t type = be16(hello, pos);
        const std::size_t len = be16(hello, pos + 2);
        pos += 4;
        if (!need(len)) return SniResult::malformed();
        if (type == 0x0000) {
            ByteView ext = hello.subspan(pos, len);
            if (ext.size() < 2 || be16(ext, 0) + 2u != ext.size()) return SniResult::malformed();
            std::size_t p = 2;
            while (p < ext.size()) {
                if (p + 3 > ext.size()) return SniResult::malformed();
                const std::uint8_t name_type = ext[p];
                const std::size_t name_len = be16(ext, p + 1);
                p += 3;
                if (p + name_len > ext.size()) return SniResult::malformed();
                if (name_type == 0) {
                    std::string_view raw(reinterpret_cast<const char*>(ext.data() + p), name_len);
                    auto host = normalize_hostname(raw);
                    if (!host) return SniResult::malformed();
                    return SniResult::found(*host);
                }
                p += name_len;
            }
            return SniResult::absent();
        }
        pos += len;
    }
    return SniResult::absent();
}

Blocklist::Blocklist(std::set<std::string> domains) {
    for (const auto& d : domains) add(d);
}

bool Blocklist::add(std::string_view domain) {
    while (!domain.empty() && domain.front() == '.') domain.remove_prefix(1);
    auto norm = normalize_hostname(domain);
    if (!norm) return false;
    domains_.insert(*norm);
    return true;
}

Blocklist parse_blocklist(std::string_view text, const std::string& origin) {
    Blocklist out;
    std::istringstream in{std::string(text)};
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        if (auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
        const auto b = raw.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        const auto e = raw.find_last_not_of(" \t\r");
        const std::string domain = raw.substr(b, e - b + 1);
        if (!out.add(domain)) throw ParseError(origin, lineno, "invalid domain '" + domain + "'");
    }
    return out;
}

Blocklist load_blocklist(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::not_found, "blocklist not found: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_blocklist(buf.str(), path);
}

bool match_tracker(std::string_view hostname, const Blocklist& blocklist) {
    auto norm = normalize_hostname(hostname);
    if (!norm) return false;
    std::string_view h = *norm;
    while (true) {
        if (blocklist.contains(h)) return true;
        const auto dot = h.find('.');
        if (dot == std::string_view::npos) return false;
        h.remove_prefix(dot + 1);
    }
}

}  // namespace leakscope
