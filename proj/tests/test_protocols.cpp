#include <doctest.h>

#include <cstring>
#include <fstream>
#include <iterator>

#include "leakscope/error.hpp"
#include "leakscope/protocols.hpp"
#include "leakscope/simnet.hpp"
#include "support.hpp"

using namespace leakscope;

namespace {

Bytes read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void put_name(Bytes& b, std::initializer_list<const char*> labels) {
    for (const char* l : labels) {
        b.push_back(static_cast<std::uint8_t>(std::strlen(l)));
        b.insert(b.end(), l, l + std::strlen(l));
    }
    b.push_back(0);
}

// Response for a.Example.COM: CNAME to b.example.com (compressed), then two A records,
// the second name a pointer into the CNAME rdata.
Bytes cname_response() {
    Bytes m = {0x12, 0x34, 0x81, 0x80, 0, 1, 0, 3, 0, 0, 0, 0};
    put_name(m, {"a", "Example", "COM"});  // offset 12
    m.insert(m.end(), {0, 1, 0, 1});
    // answer 1: CNAME, name = ptr to 12, rdata = "b" + ptr to 14 ("Example.COM")
    m.insert(m.end(), {0xc0, 12, 0, 5, 0, 1, 0, 0, 0, 60, 0, 4});
    const std::size_t cname_rdata = m.size();
    m.insert(m.end(), {1, 'b', 0xc0, 14});
    // answer 2: A for ptr to rdata
    m.insert(m.end(), {0xc0, static_cast<std::uint8_t>(cname_rdata), 0, 1, 0, 1, 0, 0, 0, 60, 0, 4, 93, 184, 216, 34});
    // answer 3: AAAA is skipped
    m.insert(m.end(), {0xc0, static_cast<std::uint8_t>(cname_rdata), 0, 28, 0, 1, 0, 0, 0, 60, 0, 16});
    m.insert(m.end(), 16, 0);
    return m;
}

}  // namespace

TEST_CASE("DNS response: compression pointers, CNAME chains and non-A records") {
    auto answers = parse_dns_response(cname_response());
    REQUIRE(answers);
    REQUIRE(answers->size() == 1);
    CHECK((*answers)[0].name == "b.example.com");
    CHECK((*answers)[0].ip.str() == "93.184.216.34");
}

TEST_CASE("DNS response: queries, truncation and pointer loops are rejected") {
    auto msg = cname_response();
    auto query = msg;
    query[2] &= 0x7f;
    CHECK_FALSE(parse_dns_response(query));
    for (std::size_t cut : {std::size_t{5}, std::size_t{20}, msg.size() - 1}) {
        CAPTURE(cut);
        CHECK_FALSE(parse_dns_response(ByteView(msg).subspan(0, cut)));
    }
    Bytes loop = {0, 1, 0x81, 0x80, 0, 1, 0, 0, 0, 0, 0, 0, 0xc0, 12, 0, 1, 0, 1};
    CHECK_FALSE(parse_dns_response(loop));
}

TEST_CASE("DNS response: error rcodes yield no answers") {
    auto nx = sim::build_dns_response(9, "nowhere.example", std::nullopt);
    CHECK((nx[3] & 0x0f) == 3);
    auto answers = parse_dns_response(nx);
    REQUIRE(answers);
    CHECK(answers->empty());
}

TEST_CASE("SNI extraction from a real ClientHello") {
    const auto hello = read_bytes(testing::fixture("client_hello_doubleclick.bin"));
    auto r = parse_client_hello_sni(hello);
    CHECK(r.status == SniResult::Status::found);
    CHECK(r.hostname == "ad.doubleclick.net");

    const auto nosni = read_bytes(testing::fixture("client_hello_nosni.bin"));
    CHECK(parse_client_hello_sni(nosni).status == SniResult::Status::absent);
}

TEST_CASE("simulated ClientHello carries its server name") {
    const auto hello = sim::build_client_hello("Stats.G.DoubleClick.net", 3);
    auto r = parse_client_hello_sni(hello);
    CHECK(r.status == SniResult::Status::found);
    CHECK(r.hostname == "stats.g.doubleclick.net");
}

TEST_CASE("SNI parser: non-handshake is absent, inconsistent lengths are malformed") {
    const auto hello = read_bytes(testing::fixture("client_hello_doubleclick.bin"));
    CHECK(parse_client_hello_sni(Bytes{0x17, 0x03, 0x03, 0x00, 0x10}).status == SniResult::Status::absent);
    CHECK(parse_client_hello_sni(Bytes{'G', 'E', 'T', ' ', '/'}).status == SniResult::Status::absent);
    CHECK(parse_client_hello_sni(Bytes{}).status == SniResult::Status::absent);

    auto cut = Bytes(hello.begin(), hello.begin() + 60);
    CHECK(parse_client_hello_sni(cut).status == SniResult::Status::malformed);

    auto bad_hs_len = hello;
    bad_hs_len[6] = 0xff;
    CHECK(parse_client_hello_sni(bad_hs_len).status == SniResult::Status::malformed);

    auto server_hello = hello;
    server_hello[5] = 0x02;
    CHECK(parse_client_hello_sni(server_hello).status == SniResult::Status::absent);

    // No strict prefix of the record yields a hostname.
    for (std::size_t n = 0; n < hello.size(); ++n) {
        auto r = parse_client_hello_sni(ByteView(hello).subspan(0, n));
        CHECK(r.status != SniResult::Status::found);
    }
}

TEST_CASE("blocklist parsing normalizes and rejects junk") {
    const auto bl = parse_blocklist("# trackers\nDoubleClick.NET\n  .tapad.com  # leading dot ok\n\nexample.org.\n");
    CHECK(bl.size() == 3);
    CHECK(bl.contains("doubleclick.net"));
    CHECK(bl.contains("tapad.com"));
    CHECK(bl.contains("example.org"));
    try {
        parse_blocklist("good.com\nbad domain.com\n", "bl.txt");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(load_blocklist("/nonexistent"), Error);
    CHECK(load_blocklist(testing::data_path("blocklist.txt")).size() >= 20);
}

TEST_CASE("tracker matching respects label boundaries") {
    const auto bl = testing::three_trackers();
    CHECK(match_tracker("doubleclick.net", bl));
    CHECK(match_tracker("ad.doubleclick.net", bl));
    CHECK(match_tracker("STATS.G.DOUBLECLICK.NET.", bl));
    CHECK_FALSE(match_tracker("notdoubleclick.net", bl));
    CHECK_FALSE(match_tracker("doubleclick.net.evil.com", bl));
    CHECK_FALSE(match_tracker("net", bl));
    CHECK_FALSE(match_tracker("", bl));
    CHECK_FALSE(match_tracker("tapad.co", bl));
}

TEST_CASE("tracker matching agrees with a brute-force suffix oracle") {
    const auto bl = testing::three_trackers();
    const std::vector<std::string> parts = {"a", "ad", "doubleclick", "net", "tapad", "com", "x-doubleclick", "g"};
    auto oracle = [&](const std::string& h) {
        for (const auto& d : bl.domains()) {
            if (h == d) return true;
            if (h.size() > d.size() && h.compare(h.size() - d.size(), d.size(), d) == 0 &&
                h[h.size() - d.size() - 1] == '.') {
                return true;
            }
        }
        return false;
    };
    std::size_t checked = 0;
    for (const auto& p1 : parts) {
        for (const auto& p2 : parts) {
            for (const auto& p3 : parts) {
                for (const std::string& h : {p2 + "." + p3, p1 + "." + p2 + "." + p3}) {
                    CAPTURE(h);
                    CHECK(match_tracker(h, bl) == oracle(h));
                    ++checked;
                }
            }
        }
    }
    CHECK(checked == 2 * parts.size() * parts.size() * parts.size());
}

TEST_CASE("hostname normalization") {
    CHECK(normalize_hostname("WWW.Example.COM.") == "www.example.com");
    CHECK(normalize_hostname("_dmarc.example.com") == "_dmarc.example.com");
    CHECK_FALSE(normalize_hostname(""));
    CHECK_FALSE(normalize_hostname("."));
    CHECK_FALSE(normalize_hostname("a..b"));
    CHECK_FALSE(normalize_hostname("bad host"));
    CHECK_FALSE(normalize_hostname(std::string(64, 'a') + ".com"));
    CHECK(normalize_hostname(std::string(63, 'a') + ".com"));
}
