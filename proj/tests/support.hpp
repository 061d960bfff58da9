#pragma once

// Shared test helpers: fixture paths, a sim rig, an independent pcap byte oracle and a
// small JSON-schema checker for the golden schema tests.

#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "leakscope/engine.hpp"
#include "leakscope/simnet.hpp"

#ifndef LEAKSCOPE_FIXTURES
#error "LEAKSCOPE_FIXTURES must point at tests/fixtures"
#endif
#ifndef LEAKSCOPE_SCHEMAS
#error "LEAKSCOPE_SCHEMAS must point at schemas/"
#endif

namespace testing {

inline std::string fixture(const std::string& name) { return std::string(LEAKSCOPE_FIXTURES) + "/" + name; }
inline std::string data_path(const std::string& name) { return std::string(LEAKSCOPE_DATA_DIR) + "/" + name; }
inline std::string schema_path(const std::string& name) { return std::string(LEAKSCOPE_SCHEMAS) + "/" + name; }

inline nlohmann::json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("missing " + path);
    return nlohmann::json::parse(in);
}

inline leakscope::Blocklist three_trackers() {
    return leakscope::Blocklist({"doubleclick.net", "tapad.com", "scorecardresearch.com"});
}

/// The lab hosts with steady two-way UDP: every `period` seconds from t=5 each device sends
/// 300 bytes to the cdn host and the cdn host sends 200 bytes back.
inline leakscope::sim::Scenario chatty_scenario(double duration, double period = 0.5) {
    std::string text = "subnet 192.168.1.0/24\nttl 60\nduration " + std::to_string(duration) +
                       "\n"
                       "host router   50:c7:bf:00:00:01 192.168.1.1  gateway\n"
                       "host analyzer b8:27:eb:00:00:99 192.168.1.50 analyzer\n"
                       "host echo     44:65:0d:11:22:01 192.168.1.11 device\n"
                       "host tv       8c:71:f8:11:22:02 192.168.1.12 device\n"
                       "host cam      2c:aa:8e:11:22:03 192.168.1.13 device\n"
                       "host fridge   00:1d:25:11:22:04 192.168.1.14 device\n"
                       "host hue      00:17:88:11:22:05 192.168.1.15 device\n"
                       "host cdn      02:00:0d:20:00:0a 13.32.0.10   external\n";
    const char* devices[] = {"echo", "tv", "cam", "fridge", "hue"};
    const char* ips[] = {"192.168.1.11", "192.168.1.12", "192.168.1.13", "192.168.1.14", "192.168.1.15"};
    for (double t = 5.0; t <= duration - 1.0; t += period) {
        for (int i = 0; i < 5; ++i) {
            text += "at " + std::to_string(t + 0.01 * i) + " " + devices[i] + " udp 13.32.0.10 300\n";
            text += "at " + std::to_string(t + 0.2 + 0.01 * i) + " cdn udp " + ips[i] + " 200\n";
        }
    }
    return leakscope::sim::parse_scenario(text, "chatty");
}

/// Engine on a simulated LAN, with direct access to the simulator for oracles.
struct SimRig {
    std::shared_ptr<leakscope::sim::Simulator> sim;
    std::unique_ptr<leakscope::Engine> engine;

    explicit SimRig(leakscope::sim::Scenario sc, leakscope::EngineConfig cfg = {}, double step = 0.01) {
        sim = std::make_shared<leakscope::sim::Simulator>(std::move(sc));
        auto backend = std::make_unique<leakscope::sim::SimBackend>(sim, 0.0);
        backend->set_step(step);
        if (cfg.blocklist.size() == 0) cfg.blocklist = three_trackers();
        engine = std::make_unique<leakscope::Engine>(std::move(backend), std::move(cfg));
    }
    static SimRig lab5(leakscope::EngineConfig cfg = {}) {
        return SimRig(leakscope::sim::load_scenario(fixture("lab5.scn")), std::move(cfg));
    }

    leakscope::DeviceId id_of(const std::string& host) const {
        return leakscope::device_id_of(sim->scenario().find(host)->mac);
    }
};

// ---- independent pcap accounting ----

struct OracleTotals {
    std::uint64_t out = 0;
    std::uint64_t in = 0;
    bool operator==(const OracleTotals&) const = default;
};

/// Brute-force per-MAC IPv4 byte accounting straight from the file bytes. A MAC is a device
/// if it ever sources a frame (ARP or IPv4) from a subnet address other than the gateway.
/// A frame counts toward its source device, else toward its destination device.
inline std::map<std::string, OracleTotals> pcap_oracle(const std::string& path, std::uint32_t subnet,
                                                       std::uint32_t mask, std::uint32_t gateway) {
    std::ifstream in(path, std::ios::binary);
    std::vector<std::uint8_t> file((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    auto le32 = [&](std::size_t o) {
        return std::uint32_t(file[o]) | std::uint32_t(file[o + 1]) << 8 | std::uint32_t(file[o + 2]) << 16 |
               std::uint32_t(file[o + 3]) << 24;
    };
    auto mac_at = [](const std::uint8_t* p) {
        char buf[13];
        std::snprintf(buf, sizeof buf, "%02x%02x%02x%02x%02x%02x", p[0], p[1], p[2], p[3], p[4], p[5]);
        return std::string(buf);
    };
    auto be32 = [](const std::uint8_t* p) {
        return std::uint32_t(p[0]) << 24 | std::uint32_t(p[1]) << 16 | std::uint32_t(p[2]) << 8 | p[3];
    };
    std::vector<std::vector<std::uint8_t>> frames;
    for (std::size_t off = 24; off + 16 <= file.size();) {
        const std::uint32_t incl = le32(off + 8);
        off += 16;
        if (off + incl > file.size()) break;
        frames.emplace_back(file.begin() + off, file.begin() + off + incl);
        off += incl;
    }
    auto local = [&](std::uint32_t ip) { return (ip & mask) == (subnet & mask) && ip != gateway; };
    std::set<std::string> devices;
    for (const auto& f : frames) {
        if (f.size() < 14 || (f[6] & 1)) continue;
        const int et = f[12] << 8 | f[13];
        if (et == 0x0806 && f.size() >= 42 && local(be32(&f[28]))) devices.insert(mac_at(&f[6]));
        if (et == 0x0800 && f.size() >= 34 && local(be32(&f[26]))) devices.insert(mac_at(&f[6]));
    }
    std::map<std::string, OracleTotals> totals;
    for (const auto& f : frames) {
        if (f.size() < 34 || (f[12] << 8 | f[13]) != 0x0800) continue;
        const std::uint64_t total_length = std::uint64_t(f[16]) << 8 | f[17];
        const auto src = mac_at(&f[6]);
        const auto dst = mac_at(&f[0]);
        if (devices.count(src)) {
            totals[src].out += total_length;
        } else if (devices.count(dst)) {
            totals[dst].in += total_length;
        }
    }
    for (const auto& d : devices) totals[d];
    return totals;
}

// ---- JSON schema subset ----
// Supports: type (string or list), enum, const, properties, required, additionalProperties:false,
// items, minItems, maxItems, minimum, pattern, $ref to "#/$defs/<name>".

inline bool type_matches(const nlohmann::json& v, const std::string& t) {
    if (t == "object") return v.is_object();
    if (t == "array") return v.is_array();
    if (t == "string") return v.is_string();
    if (t == "integer") return v.is_number_integer();
    if (t == "number") return v.is_number();
    if (t == "boolean") return v.is_boolean();
    if (t == "null") return v.is_null();
    return false;
}

inline void schema_errors(const nlohmann::json& v, const nlohmann::json& s, const nlohmann::json& root,
                          const std::string& where, std::vector<std::string>& errs) {
    if (s.contains("$ref")) {
        const std::string ref = s["$ref"];
        const std::string prefix = "#/$defs/";
        if (ref.rfind(prefix, 0) != 0) {
            errs.push_back(where + ": unsupported $ref " + ref);
            return;
        }
        schema_errors(v, root["$defs"][ref.substr(prefix.size())], root, where, errs);
        return;
    }
    if (s.contains("type")) {
        bool ok = false;
        if (s["type"].is_array()) {
            for (const auto& t : s["type"]) ok = ok || type_matches(v, t.get<std::string>());
        } else {
            ok = type_matches(v, s["type"].get<std::string>());
        }
        if (!ok) {
            errs.push_back(where + ": expected type " + s["type"].dump() + ", got " + v.dump());
            return;
        }
    }
    if (s.contains("enum")) {
        bool found = false;
        for (const auto& e : s["enum"]) found = found || e == v;
        if (!found) errs.push_back(where + ": " + v.dump() + " not in enum");
    }
    if (s.contains("const") && s["const"] != v) errs.push_back(where + ": expected " + s["const"].dump());
    if (s.contains("minimum") && v.is_number() && v.get<double>() < s["minimum"].get<double>()) {
        errs.push_back(where + ": below minimum");
    }
    if (s.contains("pattern") && v.is_string() &&
        !std::regex_search(v.get<std::string>(), std::regex(s["pattern"].get<std::string>()))) {
        errs.push_back(where + ": '" + v.get<std::string>() + "' does not match " + s["pattern"].get<std::string>());
    }
    if (v.is_object()) {
        for (const auto& r : s.value("required", nlohmann::json::array())) {
            if (!v.contains(r.get<std::string>())) errs.push_back(where + ": missing " + r.get<std::string>());
        }
        const auto props = s.value("properties", nlohmann::json::object());
        for (auto it = v.begin(); it != v.end(); ++it) {
            if (props.contains(it.key())) {
                schema_errors(it.value(), props[it.key()], root, where + "." + it.key(), errs);
            } else if (s.contains("additionalProperties")) {
                const auto& ap = s["additionalProperties"];
                if (ap.is_boolean() && !ap.get<bool>()) {
                    errs.push_back(where + ": unexpected key " + it.key());
                } else if (ap.is_object()) {
                    schema_errors(it.value(), ap, root, where + "." + it.key(), errs);
                }
            }
        }
    }
    if (v.is_array()) {
        if (s.contains("minItems") && v.size() < s["minItems"].get<std::size_t>()) errs.push_back(where + ": too few items");
        if (s.contains("maxItems") && v.size() > s["maxItems"].get<std::size_t>()) errs.push_back(where + ": too many items");
        if (s.contains("items")) {
            for (std::size_t i = 0; i < v.size(); ++i) {
                schema_errors(v[i], s["items"], root, where + "[" + std::to_string(i) + "]", errs);
            }
        }
    }
}

inline std::vector<std::string> validate(const nlohmann::json& value, const std::string& schema_file) {
    const auto schema = load_json(schema_path(schema_file));
    std::vector<std::string> errs;
    schema_errors(value, schema, schema, "$", errs);
    return errs;
}

}  // namespace testing
