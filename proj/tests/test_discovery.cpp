#include <doctest.h>

#include <algorithm>

#include "leakscope/discovery.hpp"
#include "leakscope/error.hpp"
#include "leakscope/simnet.hpp"
#include "support.hpp"

using namespace leakscope;

namespace {

MacAddr mac(const char* s) { return *MacAddr::parse(s); }
Ipv4Addr ip(const char* s) { return *Ipv4Addr::parse(s); }

}  // namespace

TEST_CASE("OUI table accepts the plain and IEEE layouts") {
    const auto t = parse_oui_table("# comment\n"
                                   "44:65:0D Amazon Technologies Inc.\n"
                                   "\n"
                                   "8C-71-F8   (hex)\t\tSamsung Electronics Co.,Ltd\n");
    CHECK(t.size() == 2);
    CHECK(t.vendor(*Oui::parse("44:65:0d")) == "Amazon Technologies Inc.");
    CHECK(t.vendor(*Oui::parse("8c:71:f8")) == "Samsung Electronics Co.,Ltd");
    CHECK(t.vendor(*Oui::parse("00:00:00")) == "unknown");
    CHECK(t.warnings.empty());
}

TEST_CASE("duplicate OUIs warn and the later entry wins") {
    const auto t = parse_oui_table("44:65:0D First\n44:65:0D Second\n");
    CHECK(t.size() == 1);
    CHECK(t.vendor(*Oui::parse("44:65:0D")) == "Second");
    REQUIRE(t.warnings.size() == 1);
    CHECK(t.warnings[0].find(":2:") != std::string::npos);
}

TEST_CASE("malformed OUI lines are parse errors with line numbers") {
    try {
        parse_oui_table("44:65:0D ok\nnot-an-oui Vendor\n", "x.txt");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(parse_name_map("44:65:0D\n"), ParseError);
    CHECK_THROWS_AS(load_oui_table("/nonexistent/oui.txt"), Error);
}

TEST_CASE("shipped data tables load") {
    const auto ouis = load_oui_table(testing::data_path("oui.txt"));
    const auto names = load_name_map(testing::data_path("names.txt"));
    CHECK(ouis.size() >= 10);
    CHECK(names.size() >= 5);
    CHECK(identify(mac("44:65:0d:11:22:01"), ouis, names).name == "Amazon Echo");
}

TEST_CASE("identify falls back from friendly name to vendor to unknown") {
    const auto ouis = parse_oui_table("44:65:0D Amazon\n00:17:88 Philips\n");
    const auto names = parse_name_map("44:65:0D Amazon Echo\n");
    CHECK(identify(mac("44:65:0d:00:00:01"), ouis, names) == Identity{"Amazon", "Amazon Echo"});
    CHECK(identify(mac("00:17:88:00:00:01"), ouis, names) == Identity{"Philips", "Philips"});
    CHECK(identify(mac("02:aa:bb:00:00:01"), ouis, names) == Identity{"unknown", "unknown device"});
}

TEST_CASE("registry keeps IPs unique and bumps its version on structural change") {
    DeviceRegistry reg;
    const auto v0 = reg.version();
    auto a = reg.upsert(mac("02:00:00:00:00:0a"), ip("10.0.0.10"), 1.0);
    CHECK(a.device_id.str() == "02000000000a");
    CHECK(reg.version() > v0);

    const auto v1 = reg.version();
    reg.upsert(mac("02:00:00:00:00:0a"), ip("10.0.0.10"), 2.0);  // refresh only
    CHECK(reg.version() == v1);
    CHECK(reg.by_mac(mac("02:00:00:00:00:0a"))->last_seen == 2.0);

    reg.upsert(mac("02:00:00:00:00:0b"), ip("10.0.0.10"), 3.0);  // takes over the address
    CHECK(reg.size() == 1);
    CHECK(reg.by_ip(ip("10.0.0.10"))->mac == mac("02:00:00:00:00:0b"));
    CHECK_FALSE(reg.contains(a.device_id));

    CHECK(reg.remove(device_id_of(mac("02:00:00:00:00:0b"))));
    CHECK_FALSE(reg.remove(device_id_of(mac("02:00:00:00:00:0b"))));
    CHECK(reg.size() == 0);
}

TEST_CASE("registry gateway is kept apart from devices") {
    DeviceRegistry reg;
    reg.upsert(mac("02:00:00:00:00:01"), ip("10.0.0.1"), 0);
    reg.set_gateway({mac("02:00:00:00:00:01"), ip("10.0.0.1")});
    CHECK(reg.size() == 0);
    CHECK(reg.gateway_ip() == ip("10.0.0.1"));
    REQUIRE(reg.gateway());
    CHECK(reg.gateway()->mac == mac("02:00:00:00:00:01"));
}

TEST_CASE("known_only marks devices without a friendly name as unmonitored") {
    DeviceRegistry reg(parse_oui_table("44:65:0D Amazon\n00:17:88 Philips\n"), parse_name_map("44:65:0D Amazon Echo\n"),
                       true);
    reg.upsert(mac("44:65:0d:00:00:01"), ip("10.0.0.10"), 0);
    reg.upsert(mac("00:17:88:00:00:01"), ip("10.0.0.11"), 0);
    CHECK(reg.size() == 2);
    const auto mon = reg.monitored();
    REQUIRE(mon.size() == 1);
    CHECK(mon[0].name == "Amazon Echo");
}

TEST_CASE("ARP scan on the simulated LAN finds every device and the gateway") {
    auto sim = std::make_shared<sim::Simulator>(sim::load_scenario(testing::fixture("lab5.scn")));
    sim::SimBackend backend(sim, 0.0);
    backend.set_step(0.01);
    DeviceRegistry reg;
    ScanOptions opts{*Subnet::parse("192.168.1.0/24"), 1.0, ip("192.168.1.1")};
    const auto self = *backend.local_identity();
    const auto result = arp_scan(backend, self, opts, reg);
    CHECK(result.requests_sent == 253);
    REQUIRE(result.gateway);
    CHECK(result.gateway->mac == sim->scenario().gateway().mac);
    REQUIRE(result.devices.size() == 5);
    for (const auto* h : sim->scenario().devices()) {
        CAPTURE(h->name);
        const bool found = std::any_of(result.devices.begin(), result.devices.end(),
                                       [&](const DeviceRecord& r) { return r.mac == h->mac && r.ip == h->ip; });
        CHECK(found);
    }
    CHECK(apply_scan(reg, result, backend.now()) == 5);
    CHECK(reg.size() == 5);
    CHECK(reg.gateway());
}

TEST_CASE("ARP scan refuses overly wide subnets") {
    auto sim = std::make_shared<sim::Simulator>(sim::load_scenario(testing::fixture("lab5.scn")));
    sim::SimBackend backend(sim, 0.0);
    DeviceRegistry reg;
    ScanOptions opts{*Subnet::parse("192.168.0.0/15"), 1.0, std::nullopt};
    try {
        arp_scan(backend, *backend.local_identity(), opts, reg);
        FAIL("expected invalid_argument");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::invalid_argument);
    }
}
