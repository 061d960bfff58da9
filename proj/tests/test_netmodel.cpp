#include <doctest.h>

#include <random>
#include <set>

#include "leakscope/netmodel.hpp"

using namespace leakscope;

TEST_CASE("MacAddr parses both separators and prints canonical uppercase") {
    auto a = MacAddr::parse("aa:bb:cc:dd:ee:ff");
    auto b = MacAddr::parse("AA-BB-CC-DD-EE-FF");
    REQUIRE(a);
    REQUIRE(b);
    CHECK(*a == *b);
    CHECK(a->str() == "AA:BB:CC:DD:EE:FF");
    CHECK(MacAddr::broadcast().is_broadcast());
    CHECK(MacAddr::broadcast().is_multicast());
    CHECK(MacAddr().is_zero());
}

TEST_CASE("MacAddr rejects malformed text") {
    for (const char* bad : {"", "aa:bb:cc:dd:ee", "aa:bb:cc:dd:ee:ff:00", "aa:bb:cc:dd:ee:gg", "aabb.ccdd.eeff",
                            "aa:bb-cc:dd:ee:ff", "a:bb:cc:dd:ee:ff", "aa:bb:cc:dd:ee:fff"}) {
        CAPTURE(bad);
        CHECK_FALSE(MacAddr::parse(bad));
    }
}

TEST_CASE("MacAddr text round-trip over random addresses") {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 2000; ++i) {
        std::array<std::uint8_t, 6> o{};
        for (auto& b : o) b = static_cast<std::uint8_t>(rng());
        MacAddr m(o);
        auto back = MacAddr::parse(m.str());
        REQUIRE(back);
        CHECK(*back == m);
    }
}

TEST_CASE("Ipv4Addr parse, print and integer form") {
    auto ip = Ipv4Addr::parse("192.168.1.20");
    REQUIRE(ip);
    CHECK(ip->str() == "192.168.1.20");
    CHECK(ip->to_u32() == 0xC0A80114u);
    CHECK(Ipv4Addr::from_u32(0xC0A80114u) == *ip);
    for (const char* bad : {"", "1.2.3", "1.2.3.4.5", "256.1.1.1", "01.2.3.4", "1..2.3", "a.b.c.d", "1.2.3.4 "}) {
        CAPTURE(bad);
        CHECK_FALSE(Ipv4Addr::parse(bad));
    }
}

TEST_CASE("Subnet containment and host enumeration") {
    auto s = Subnet::parse("192.168.1.0/24");
    REQUIRE(s);
    CHECK(s->contains(*Ipv4Addr::parse("192.168.1.77")));
    CHECK_FALSE(s->contains(*Ipv4Addr::parse("192.168.2.1")));
    const auto hosts = s->hosts();
    CHECK(hosts.size() == 254);
    CHECK(hosts.front().str() == "192.168.1.1");
    CHECK(hosts.back().str() == "192.168.1.254");
    CHECK(Subnet::parse("10.0.0.0/31")->hosts().size() == 2);
    CHECK(Subnet::containing(*Ipv4Addr::parse("10.1.2.3"), 16).str() == "10.1.0.0/16");
    CHECK_FALSE(Subnet::parse("10.0.0.0/33"));
    CHECK_FALSE(Subnet::parse("10.0.0.0"));
}

TEST_CASE("private address ranges") {
    for (const char* ip : {"10.1.2.3", "172.16.0.1", "172.31.255.255", "192.168.0.1"}) {
        CHECK(is_private_ipv4(*Ipv4Addr::parse(ip)));
    }
    for (const char* ip : {"172.32.0.1", "8.8.8.8", "192.169.0.1"}) CHECK_FALSE(is_private_ipv4(*Ipv4Addr::parse(ip)));
}

TEST_CASE("DeviceId is the stripped lowercase MAC") {
    auto mac = *MacAddr::parse("AA:BB:CC:DD:EE:FF");
    CHECK(device_id_of(mac).str() == "aabbccddeeff");
    CHECK(device_id_of(mac).mac() == mac);
    CHECK(DeviceId::parse("aabbccddeeff"));
    CHECK_FALSE(DeviceId::parse("AABBCCDDEEFF"));
    CHECK_FALSE(DeviceId::parse("aabbccddeef"));
    CHECK_FALSE(DeviceId::parse("unknown"));
}

TEST_CASE("DeviceId mapping is injective") {
    std::mt19937_64 rng(2);
    std::set<MacAddr> macs;
    std::set<std::string> ids;
    for (int i = 0; i < 5000; ++i) {
        std::array<std::uint8_t, 6> o{};
        for (auto& b : o) b = static_cast<std::uint8_t>(rng() & 0x0f);  // small alphabet to force near-collisions
        MacAddr m(o);
        macs.insert(m);
        ids.insert(device_id_of(m).str());
        CHECK(DeviceId::parse(device_id_of(m).str())->mac() == m);
    }
    CHECK(macs.size() == ids.size());
}

TEST_CASE("OUI prefix") {
    auto mac = *MacAddr::parse("44:65:0d:11:22:33");
    CHECK(oui_of(mac).str() == "44:65:0D");
    CHECK(Oui::parse("44-65-0d") == oui_of(mac));
    CHECK_FALSE(Oui::parse("44:65"));
}
