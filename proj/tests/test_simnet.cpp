#include <doctest.h>

#include <filesystem>

#include "leakscope/error.hpp"
#include "leakscope/pcap.hpp"
#include "leakscope/protocols.hpp"
#include "leakscope/simnet.hpp"
#include "support.hpp"

using namespace leakscope;
using namespace leakscope::sim;

namespace {

// Gateway, analyzer, two devices and one external host.
constexpr const char* kTiny = R"(
host gw  02:00:00:00:00:01 10.0.0.1  gateway
host ana 02:00:00:00:00:09 10.0.0.9  analyzer
host a   02:00:00:00:00:0a 10.0.0.10 device
host b   02:00:00:00:00:0b 10.0.0.11 device
host srv 02:00:00:00:01:00 203.0.113.5 external
resolve api.example.com 203.0.113.5
at 1.0 a dns api.example.com
at 1.5 a udp 203.0.113.5 3000
at 2.0 a tcp 203.0.113.5 2000
at 2.5 srv udp 10.0.0.11 700
)";

int parse_error_line(const std::string& text) {
    try {
        parse_scenario(text, "t.scn");
    } catch (const ParseError& e) {
        return e.line();
    }
    return -1;
}

void run(Simulator& s, double seconds, double dt = 0.01) {
    for (double t = 0; t < seconds - 1e-9; t += dt) s.step(dt);
}

}  // namespace

TEST_CASE("scenario parses hosts, events and defaults") {
    const auto sc = parse_scenario(kTiny);
    CHECK(sc.hosts.size() == 5);
    CHECK(sc.gateway().name == "gw");
    REQUIRE(sc.analyzer());
    CHECK(sc.analyzer()->name == "ana");
    CHECK(sc.devices().size() == 2);
    CHECK(sc.subnet.str() == "10.0.0.0/24");
    CHECK(sc.resolver == sc.gateway().ip);
    CHECK(sc.arp_ttl == 60.0);
    CHECK(sc.duration == 2.5);
    REQUIRE(sc.events.size() == 4);
    CHECK(sc.events[0].kind == EventKind::dns_query);
    CHECK(sc.events[1].bytes == 3000);
}

TEST_CASE("lab scenario fixture has five devices behind one gateway") {
    const auto sc = load_scenario(testing::fixture("lab5.scn"));
    CHECK(sc.devices().size() == 5);
    CHECK(sc.gateway().ip.str() == "192.168.1.1");
    CHECK(sc.events.front().at >= 5.0);
}

TEST_CASE("scenario errors carry the offending line") {
    CHECK(parse_error_line("host gw 02:00:00:00:00:01 10.0.0.1 gateway\nhost gw 02:00:00:00:00:02 10.0.0.2 device\n") == 2);
    CHECK(parse_error_line("host gw 02:00:00:00:00:01 10.0.0.1 router\n") == 1);
    CHECK(parse_error_line("host gw zz:00:00:00:00:01 10.0.0.1 gateway\n") == 1);
    CHECK(parse_error_line("host gw 02:00:00:00:00:01 10.0.0.1 gateway\n\nat 1 nobody dns x.com\n") == 3);
    CHECK(parse_error_line("host gw 02:00:00:00:00:01 10.0.0.1 gateway\nat 1 gw udp 1.2.3.4 10\n") == 2);
    CHECK(parse_error_line("host gw 02:00:00:00:00:01 10.0.0.1 gateway\n"
                           "host x 02:00:00:00:00:02 8.8.8.8 external\nat 1 x dns a.com\n") == 3);
    CHECK(parse_error_line("host gw 02:00:00:00:00:01 10.0.0.1 gateway\nhost d 02:00:00:00:00:02 10.9.0.2 device\n") == 2);
    CHECK(parse_error_line("host gw 02:00:00:00:00:01 10.0.0.1 gateway\nhost d 02:00:00:00:00:02 10.0.0.2 device\n"
                           "duration 5\nat 6 d udp 1.1.1.1 10\n") == 4);
    CHECK(parse_error_line("frobnicate\n") == 1);
    CHECK(parse_error_line("host g1 02:00:00:00:00:01 10.0.0.1 gateway\nhost g2 02:00:00:00:00:02 10.0.0.2 gateway\n") == 2);
}

TEST_CASE("scenario structural errors: duplicate IP and missing gateway") {
    try {
        parse_scenario("host gw 02:00:00:00:00:01 10.0.0.1 gateway\nhost d 02:00:00:00:00:02 10.0.0.1 device\n");
        FAIL("expected duplicate_ip");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::duplicate_ip);
    }
    try {
        parse_scenario("host d 02:00:00:00:00:02 10.0.0.2 device\n");
        FAIL("expected no_gateway");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::no_gateway);
    }
    CHECK_THROWS_AS(load_scenario("/nonexistent.scn"), Error);
}

TEST_CASE("without interception, devices reach externals directly and every byte arrives") {
    Simulator s(parse_scenario(kTiny));
    run(s, 4.0);
    CHECK(s.scripted_bytes("a", "srv") == 5000);
    CHECK(s.delivered_bytes("a", "srv") == 5000);
    CHECK(s.delivered_bytes("srv", "a") == 5000);  // echoed back
    CHECK(s.delivered_bytes("srv", "b") == 700);
    CHECK(s.scripted_bytes("a", "gw") > 0);  // the DNS query
    CHECK(s.delivered_bytes("gw", "a") == s.scripted_bytes("gw", "a"));

    const auto cache = s.arp_cache_of("a");
    auto gw = cache.find(s.scenario().gateway().ip);
    REQUIRE(gw != cache.end());
    CHECK(gw->second.mac == s.scenario().gateway().mac);
    CHECK(s.diagnostics() == 0);
}

TEST_CASE("simulated resolver answers from the resolve table, NXDOMAIN otherwise") {
    const auto yes = build_dns_response(7, "api.example.com", *Ipv4Addr::parse("203.0.113.5"));
    auto answers = parse_dns_response(yes);
    REQUIRE(answers);
    REQUIRE(answers->size() == 1);
    CHECK((*answers)[0].name == "api.example.com");
    CHECK((*answers)[0].ip.str() == "203.0.113.5");

    const auto no = build_dns_response(7, "missing.example.com", std::nullopt);
    answers = parse_dns_response(no);
    REQUIRE(answers);
    CHECK(answers->empty());
}

TEST_CASE("ARP replies poison caches and unicast to a foreign MAC is dropped") {
    Simulator s(parse_scenario(kTiny));
    s.step(0.1);
    const auto& sc = s.scenario();
    const auto& ana = *sc.analyzer();
    const auto* a = sc.find("a");
    ArpPacket spoof{ArpOp::reply, ana.mac, sc.gateway().ip, a->mac, a->ip};
    auto d = s.inject(make_arp_frame(spoof, ana.mac, a->mac, s.now()));
    CHECK(d.kind == Delivery::Kind::unicast);
    CHECK(d.host == s.host_index("a"));
    CHECK(s.arp_cache_of("a").at(sc.gateway().ip).mac == ana.mac);

    Frame stray{*MacAddr::parse("02:ee:ee:ee:ee:ee"), ana.mac, ethertype::ipv4, Bytes(40, 0), s.now()};
    CHECK(s.inject(stray).kind == Delivery::Kind::dropped);
}

TEST_CASE("broadcast reaches every LAN host except the sender, never the WAN") {
    Simulator s(parse_scenario(kTiny));
    const auto& ana = *s.scenario().analyzer();
    ArpPacket req{ArpOp::request, ana.mac, ana.ip, MacAddr(), *Ipv4Addr::parse("10.0.0.10")};
    auto d = s.inject(make_arp_frame(req, ana.mac, MacAddr::broadcast(), 0));
    CHECK(d.kind == Delivery::Kind::broadcast);
    // Everyone on the LAN learned the analyzer from the request.
    for (const char* h : {"gw", "a", "b"}) {
        CAPTURE(h);
        CHECK(s.arp_cache_of(h).count(ana.ip) == 1);
    }
    CHECK(s.arp_cache_of("srv").empty());
    // Exactly one reply came back to the analyzer, from "a".
    auto inbox = s.take_analyzer_inbox();
    REQUIRE(inbox.size() == 1);
    auto reply = parse_arp(inbox.front());
    REQUIRE(reply);
    CHECK(reply->op == ArpOp::reply);
    CHECK(reply->sender_mac == s.scenario().find("a")->mac);
}

TEST_CASE("ARP entries expire after the ttl and unresolvable next hops are diagnosed") {
    Simulator s(parse_scenario(std::string(kTiny) + "ttl 1\n"));
    run(s, 1.2);
    CHECK(s.arp_cache_of("a").count(s.scenario().gateway().ip) == 1);
    run(s, 1.5);
    // The 1.5 s send refreshed the entry, 2.0 s reused it; by 3.5 s it is gone.
    run(s, 1.5);
    CHECK(s.arp_cache_of("a").count(s.scenario().gateway().ip) == 0);

    Simulator lonely(parse_scenario("host gw 02:00:00:00:00:01 10.0.0.1 gateway\n"
                                    "host d 02:00:00:00:00:02 10.0.0.2 device\n"
                                    "at 0.5 d udp 10.0.0.77 100\n"));
    run(lonely, 5.0);
    CHECK(lonely.diagnostics() >= 1);
    CHECK(lonely.delivered_bytes("d", "gw") == 0);
}

TEST_CASE("step rejects non-positive dt and unknown cache lookups throw") {
    Simulator s(parse_scenario(kTiny));
    CHECK_THROWS_AS(s.step(0), Error);
    CHECK_THROWS_AS(s.step(-1), Error);
    CHECK_THROWS_AS(s.arp_cache_of("nobody"), Error);
}

TEST_CASE("simulation is deterministic") {
    Simulator a(parse_scenario(kTiny));
    Simulator b(parse_scenario(kTiny));
    run(a, 3.0);
    run(b, 3.0);
    CHECK(a.log() == b.log());
}

TEST_CASE("delivery log exports as a readable capture") {
    Simulator s(parse_scenario(kTiny));
    run(s, 3.0);
    const auto path = (std::filesystem::temp_directory_path() / "leakscope_simlog.pcap").string();
    s.write_log_pcap(path);
    std::size_t n = 0;
    replay_pcap(path, [&](const Frame&) { ++n; });
    CHECK(n == s.log().size());
    std::filesystem::remove(path);
}

TEST_CASE("sim backend exposes scenario identity and drains the analyzer inbox") {
    auto sim = std::make_shared<Simulator>(parse_scenario(kTiny));
    SimBackend b(sim, 1000.0);
    REQUIRE(b.local_identity());
    CHECK(b.local_identity()->ip.str() == "10.0.0.9");
    CHECK(b.subnet()->str() == "10.0.0.0/24");
    CHECK(b.gateway_hint()->str() == "10.0.0.1");
    CHECK(b.now() == doctest::Approx(1000.0));
    CHECK(b.receive().status == RecvStatus::idle);

    ArpPacket req{ArpOp::request, b.local_identity()->mac, b.local_identity()->ip, MacAddr(),
                  *Ipv4Addr::parse("10.0.0.1")};
    b.send(make_arp_frame(req, req.sender_mac, MacAddr::broadcast(), 0));
    auto r = b.receive();
    REQUIRE(r.status == RecvStatus::frame);
    CHECK(r.frame.ts == doctest::Approx(1000.0));
    b.advance(0.5);
    CHECK(b.now() == doctest::Approx(1000.5));
    CHECK(b.sim_time() == doctest::Approx(0.5));

    auto no_analyzer = std::make_shared<Simulator>(parse_scenario("host gw 02:00:00:00:00:01 10.0.0.1 gateway\n"));
    CHECK_THROWS_AS(SimBackend{no_analyzer}, Error);
}
