#include "leakscope/simnet.hpp"

namespace leakscope::sim {

namespace {

void put16(Bytes& b, std::uint16_t v) {
    b.push_back(static_cast<std::uint8_t>(v >> 8));
    b.push_back(static_cast<std::uint8_t>(v));
}

void put24(Bytes& b, std::uint32_t v) {
    b.push_back(static_cast<std::uint8_t>(v >> 16));
    b.push_back(static_cast<std::uint8_t>(v >> 8));
    b.push_back(static_cast<std::uint8_t>(v));
}

void put_name(Bytes& b, std::string_view name) {
    while (!name.empty()) {
        const auto dot = name.find('.');
        const auto label = name.substr(0, dot);
        b.push_back(static_cast<std::uint8_t>(label.size()));
        b.insert(b.end(), label.begin(), label.end());
        if (dot == std::string_view::npos) break;
        name.remove_prefix(dot + 1);
    }
    b.push_back(0);
}

void patch16(Bytes& b, std::size_t at, std::size_t v) {
    b[at] = static_cast<std::uint8_t>(v >> 8);
    b[at + 1] = static_cast<std::uint8_t>(v);
}

}  // namespace

Bytes build_dns_query(std::uint16_t id, std::string_view name) {
    Bytes b;
    put16(b, id);
    put16(b, 0x0100);  // RD
    put16(b, 1);
    put16(b, 0);
    put16(b, 0);
    put16(b, 0);
    put_name(b, name);
    put16(b, 1);  // A
    put16(b, 1);  // IN
    return b;
}

Bytes build_dns_response(std::uint16_t id, std::string_view name, std::optional<Ipv4Addr> answer) {
    Bytes b;
    put16(b, id);
    put16(b, answer ? 0x8180 : 0x8183);  // QR|RD|RA, rcode NOERROR or NXDOMAIN
    put16(b, 1);
    put16(b, answer ? 1 : 0);
    put16(b, 0);
    put16(b, 0);
    put_name(b, name);
    put16(b, 1);
    put16(b, 1);
    if (answer) {
        put16(b, 0xc00c);  // pointer to the question name
        put16(b, 1);
        put16(b, 1);
        put16(b, 0);
        put16(b, 300);
        put16(b, 4);
        b.insert(b.end(), answer->octets().begin(), answer->octets().end());
    }
    return b;
}

Bytes build_client_hello(std::string_view sni, std::uint32_t random_seed) {
    Bytes body;
    put16(body, 0x0303);
    std::uint32_t x = random_seed * 2654435761u + 1;
    for (int i = 0; i < 32; ++i) {
        x = x * 1664525u + 1013904223u;
        body.push_back(static_cast<std::uint8_t>(x >> 24));
    }
    body.push_back(0);  // session id
    const std::uint16_t suites[] = {0x1301, 0x1302, 0xc02b, 0xc02f};
    put16(body, sizeof suites);
    for (auto s : suites) put16(body, s);
    body.push_back(1);
    body.push_back(0);  // null compression

    Bytes ext;
    // server_name
    put16(ext, 0x0000);
    put16(ext, static_cast<std::uint16_t>(sni.size() + 5));
    put16(ext, static_cast<std::uint16_t>(sni.size() + 3));
    ext.push_back(0);  // host_name
    put16(ext, static_cast<std::uint16_t>(sni.size()));
    ext.insert(ext.end(), sni.begin(), sni.end());
    // supported_versions: TLS 1.3, 1.2
    put16(ext, 0x002b);
    put16(ext, 5);
    ext.push_back(4);
    put16(ext, 0x0304);
    put16(ext, 0x0303);

    put16(body, static_cast<std::uint16_t>(ext.size()));
    body.insert(body.end(), ext.begin(), ext.end());

    Bytes out;
    out.push_back(0x16);
    put16(out, 0x0301);
    put16(out, 0);
    out.push_back(0x01);
    put24(out, static_cast<std::uint32_t>(body.size()));
    out.insert(out.end(), body.begin(), body.end());
    patch16(out, 3, out.size() - 5);
    return out;
}

}  // namespace leakscope::sim
