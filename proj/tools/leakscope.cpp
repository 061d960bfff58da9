// leakscope: run the analyzer service, or talk to a running one over its REST API.

#include <CLI11.hpp>
#include <fmt/core.h>
#include <httplib.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <thread>

#include "leakscope/api.hpp"
#include "leakscope/engine.hpp"
#include "leakscope/error.hpp"
#include "leakscope/simnet.hpp"

#ifndef LEAKSCOPE_DATA_DIR
#define LEAKSCOPE_DATA_DIR ""
#endif

namespace ls = leakscope;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRemote = 2;

std::atomic<bool> g_stop{false};

extern "C" void on_signal(int) { g_stop.store(true); }

// Usage/config problem detected locally.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Service unreachable or answered with an error.
struct RemoteError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ServiceFlags {
    std::string backend = "sim";
    std::string interface_name;
    std::string scenario;
    std::string pcap;
    std::string gateway_ip;
    std::string subnet;
    std::string oui_table;
    std::string name_map;
    std::string blocklist;
    std::string listen = "127.0.0.1:8089";
    std::string cors_origin = "*";
    std::string ui_dir;
    double spoof_interval = ls::kDefaultSpoofInterval;
    double sim_speed = 1.0;
    double scan_timeout = 2.0;
    bool known_only = false;
    bool promiscuous = false;
    std::uint64_t seed = 0x5eed;
};

std::string data_default(const std::string& flag, const char* file) {
    if (!flag.empty()) return flag;
    std::string dir;
    if (const char* env = std::getenv("LEAKSCOPE_DATA")) dir = env;
    if (dir.empty()) dir = LEAKSCOPE_DATA_DIR;
    if (dir.empty()) return {};
    auto p = std::filesystem::path(dir) / file;
    return std::filesystem::exists(p) ? p.string() : std::string{};
}

ls::EngineConfig engine_config(const ServiceFlags& f) {
    ls::EngineConfig cfg;
    if (!f.gateway_ip.empty()) {
        auto ip = ls::Ipv4Addr::parse(f.gateway_ip);
        if (!ip) throw UsageError("invalid --gateway-ip '" + f.gateway_ip + "'");
        cfg.gateway_ip = *ip;
    }
    if (!f.subnet.empty()) {
        auto s = ls::Subnet::parse(f.subnet);
        if (!s) throw UsageError("invalid --subnet '" + f.subnet + "'");
        cfg.subnet = *s;
    }
    if (auto p = data_default(f.oui_table, "oui.txt"); !p.empty()) cfg.ouis = ls::load_oui_table(p);
    if (auto p = data_default(f.name_map, "names.txt"); !p.empty()) cfg.names = ls::load_name_map(p);
    if (auto p = data_default(f.blocklist, "blocklist.txt"); !p.empty()) {
        cfg.blocklist = ls::load_blocklist(p);
    } else {
        spdlog::warn("no blocklist loaded; tracker counts will be zero");
    }
    if (!(f.spoof_interval > 0)) throw UsageError("--spoof-interval must be positive");
    if (f.spoof_interval < 1.0 && f.backend != "sim") throw UsageError("--spoof-interval below 1 s is sim-only");
    cfg.spoof_interval = f.spoof_interval;
    cfg.known_only = f.known_only;
    cfg.seed = f.seed;
    cfg.scan_timeout = f.scan_timeout;
    return cfg;
}

std::unique_ptr<ls::Backend> open_service_backend(const ServiceFlags& f) {
    ls::BackendConfig bc;
    if (f.backend == "sim") {
        if (f.scenario.empty()) throw UsageError("--backend sim requires --scenario");
        bc.kind = ls::BackendConfig::Kind::sim;
        bc.target = f.scenario;
        bc.sim_epoch = std::floor(std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count());
    } else if (f.backend == "pcap") {
        if (f.pcap.empty()) throw UsageError("--backend pcap requires --pcap");
        if (f.gateway_ip.empty()) throw UsageError("--backend pcap requires --gateway-ip");
        bc.kind = ls::BackendConfig::Kind::pcap;
        bc.target = f.pcap;
    } else if (f.backend == "live") {
        if (f.interface_name.empty()) throw UsageError("--backend live requires --interface");
        if (f.gateway_ip.empty()) throw UsageError("--backend live requires --gateway-ip");
        bc.kind = ls::BackendConfig::Kind::live;
        bc.target = f.interface_name;
        bc.promiscuous = f.promiscuous;
    } else {
        throw UsageError("unknown backend '" + f.backend + "'");
    }
    return ls::open_backend(bc);
}

// Sim time runs at wall speed times `speed`.
class ScaledBackend : public ls::Backend {
public:
    ScaledBackend(std::unique_ptr<ls::Backend> inner, double speed) : inner_(std::move(inner)), speed_(speed) {}
    ls::Received receive() override { return inner_->receive(); }
    void send(const ls::Frame& frame) override { inner_->send(frame); }
    double now() const override { return inner_->now(); }
    void advance(double seconds) override { inner_->advance(seconds * speed_); }
    bool can_send() const override { return inner_->can_send(); }
    std::optional<ls::LocalIdentity> local_identity() const override { return inner_->local_identity(); }
    std::optional<ls::Subnet> subnet() const override { return inner_->subnet(); }
    std::optional<ls::Ipv4Addr> gateway_hint() const override { return inner_->gateway_hint(); }

private:
    std::unique_ptr<ls::Backend> inner_;
    double speed_;
};

int cmd_run(const ServiceFlags& f) {
    auto backend = open_service_backend(f);
    if (f.backend == "sim" && f.sim_speed != 1.0) {
        if (!(f.sim_speed > 0)) throw UsageError("--sim-speed must be positive");
        backend = std::make_unique<ScaledBackend>(std::move(backend), f.sim_speed);
    }
    ls::Engine engine(std::move(backend), engine_config(f));
    ls::api::ApiRouter router(engine.api_context());
    const auto [host, port] = ls::api::parse_listen(f.listen);
    ls::api::HttpOptions opts;
    opts.host = host;
    opts.port = port;
    opts.cors_origin = f.cors_origin;
    if (!f.ui_dir.empty()) opts.ui_dir = f.ui_dir;
    ls::api::HttpServer server(router, opts);
    server.start();
    std::cout << "listening on http://" << host << ":" << server.port() << std::endl;

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    if (f.backend == "pcap") {
        engine.replay();
        const auto stats = engine.analyzer().stats();
        spdlog::info("replay done: {} frames, {} attributed; serving final snapshot", stats.frames, stats.attributed);
        while (!g_stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    } else {
        engine.run(g_stop);
    }
    server.stop();
    return kExitOk;
}

// ---- client side ----

std::string api_base(const std::string& flag) {
    if (const char* env = std::getenv("LEAKSCOPE_API"); env && *env) return env;
    return flag;
}

json call(const std::string& base, const std::string& method, const std::string& path, const std::string& body = {}) {
    httplib::Client client(base);
    client.set_connection_timeout(3);
    client.set_read_timeout(5);
    httplib::Result res;
    if (method == "GET") {
        res = client.Get(path);
    } else if (method == "DELETE") {
        res = client.Delete(path);
    } else {
        res = client.Post(path, body, "application/json");
    }
    if (!res) throw RemoteError("cannot reach " + base + ": " + httplib::to_string(res.error()));
    json j;
    try {
        j = json::parse(res->body);
    } catch (const json::exception&) {
        throw RemoteError("non-JSON response (HTTP " + std::to_string(res->status) + ")");
    }
    if (res->status >= 400) {
        throw RemoteError(j.value("code", std::string("error")) + ": " + j.value("message", std::string()));
    }
    return j;
}

std::uint64_t series_total(const json& series, int column) {
    std::uint64_t total = 0;
    for (const auto& row : series) total += row[column].get<std::uint64_t>();
    return total;
}

void print_devices(const json& j) {
    fmt::print("{:<14} {:<17} {:<15} {:<20} {}\n", "DEVICE", "MAC", "IP", "VENDOR", "NAME");
    for (const auto& d : j["devices"]) {
        fmt::print("{:<14} {:<17} {:<15} {:<20} {}\n", d["device_id"].get<std::string>(), d["mac"].get<std::string>(),
                   d["ip"].get<std::string>(), d["vendor"].get<std::string>(), d["name"].get<std::string>());
    }
}

void print_traffic(const json& snap) {
    fmt::print("{:<14} {:<15} {:>12} {:>12} {:>8} {:<7} {}\n", "DEVICE", "IP", "BYTES_OUT", "BYTES_IN", "TRACKERS",
               "BLOCKED", "NAME");
    for (const auto& d : snap["devices"]) {
        fmt::print("{:<14} {:<15} {:>12} {:>12} {:>8} {:<7} {}\n", d["device_id"].get<std::string>(),
                   d["ip"].get<std::string>(), series_total(d["series"], 1), series_total(d["series"], 2),
                   d["tracker_count"].get<std::size_t>(), d["blocked"].get<bool>() ? "yes" : "no",
                   d["name"].get<std::string>());
    }
}

int cmd_replay(const ServiceFlags& f, const std::string& path, bool json_out) {
    ServiceFlags pf = f;
    pf.backend = "pcap";
    pf.pcap = path;
    auto backend = open_service_backend(pf);
    auto* pcap = dynamic_cast<ls::PcapBackend*>(backend.get());
    ls::Engine engine(std::move(backend), engine_config(pf));
    engine.replay();
    const auto snap = engine.analyzer().snapshot(&engine.policy(), engine.now());
    const auto stats = engine.analyzer().stats();
    if (json_out) {
        json report = ls::api::to_json(snap);
        report["replay"] = {{"frames", stats.frames},
                            {"attributed", stats.attributed},
                            {"unattributed", stats.unattributed},
                            {"malformed", pcap ? pcap->stats().malformed : 0},
                            {"truncated", pcap && pcap->truncated()}};
        std::cout << report.dump(2) << "\n";
    } else {
        for (const auto& d : snap.devices) {
            fmt::print("{}  {:<15} out={} in={} trackers={}", d.device_id.str(), d.ip.str(),
                       engine.analyzer().bytes_out(d.device_id), engine.analyzer().bytes_in(d.device_id),
                       d.tracker_count);
            for (const auto& h : d.tracker_hosts) fmt::print(" {}", h);
            fmt::print("\n");
        }
        fmt::print("frames={} attributed={} unattributed={}\n", stats.frames, stats.attributed, stats.unattributed);
    }
    return pcap && pcap->truncated() ? kExitUsage : kExitOk;
}

void add_backend_flags(CLI::App* cmd, ServiceFlags& f) {
    cmd->add_option("--backend", f.backend, "live, sim or pcap")->check(CLI::IsMember({"live", "sim", "pcap"}));
    cmd->add_option("--interface", f.interface_name, "network interface (live)");
    cmd->add_option("--scenario", f.scenario, "scenario file (sim)");
    cmd->add_option("--pcap", f.pcap, "capture file (pcap)");
}

void add_analysis_flags(CLI::App* cmd, ServiceFlags& f) {
    cmd->add_option("--gateway-ip", f.gateway_ip, "gateway IPv4 address");
    cmd->add_option("--subnet", f.subnet, "LAN CIDR; defaults to the backend's");
    cmd->add_option("--oui-table", f.oui_table, "OUI vendor table");
    cmd->add_option("--name-map", f.name_map, "OUI friendly-name map");
    cmd->add_option("--blocklist", f.blocklist, "tracker domains, one per line");
    cmd->add_flag("--known-only", f.known_only, "monitor only devices present in the name map");
    cmd->add_option("--seed", f.seed, "corrupt-MAC generator seed");
}

}  // namespace

int main(int argc, char** argv) {
    auto logger = spdlog::stderr_color_mt("leakscope");
    spdlog::set_default_logger(logger);

    CLI::App app{"LAN privacy-leak analyzer: discover, intercept, attribute and block IoT traffic"};
    app.require_subcommand(1);
    std::string log_level = "info";
    std::string api = "http://127.0.0.1:8089";
    bool json_out = false;
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error")->capture_default_str();
    app.add_option("--api", api, "service base URL (LEAKSCOPE_API overrides)")->capture_default_str();

    ServiceFlags flags;
    auto* run = app.add_subcommand("run", "run the analyzer service");
    add_backend_flags(run, flags);
    add_analysis_flags(run, flags);
    run->add_option("--listen", flags.listen, "API listen address")->capture_default_str();
    run->add_option("--spoof-interval", flags.spoof_interval, "seconds between spoof cycles")->capture_default_str();
    run->add_option("--cors-origin", flags.cors_origin, "Access-Control-Allow-Origin value");
    run->add_option("--ui-dir", flags.ui_dir, "static dashboard files served under /ui");
    run->add_option("--sim-speed", flags.sim_speed, "sim backend: simulated seconds per wall second");
    run->add_option("--scan-timeout", flags.scan_timeout, "ARP scan reply window in seconds");
    run->add_flag("--promiscuous", flags.promiscuous, "live: enable promiscuous mode");

    auto* devices = app.add_subcommand("devices", "list discovered devices");
    devices->add_flag("--json", json_out, "machine-readable output");

    int watch_count = 0;
    auto* watch = app.add_subcommand("watch", "poll live traffic once per second");
    watch->add_flag("--json", json_out, "one snapshot per line as JSON");
    watch->add_option("--count", watch_count, "stop after N polls (0 = forever)");

    std::string device_id;
    std::int64_t from = 0;
    std::int64_t until = 0;
    bool forever = false;
    auto* block = app.add_subcommand("block", "block a device for a window or indefinitely");
    block->add_option("device_id", device_id, "12 hex digit device id")->required();
    auto* from_opt = block->add_option("--from", from, "block from this epoch second (0 = now)");
    auto* until_opt = block->add_option("--until", until, "unblock at this epoch second (0 = never)");
    block->add_flag("--forever", forever, "block indefinitely")->excludes(from_opt)->excludes(until_opt);
    block->add_flag("--json", json_out, "machine-readable output");

    std::string rule_id;
    auto* unblock = app.add_subcommand("unblock", "cancel a block rule");
    unblock->add_option("rule_id", rule_id, "rule id from block or schedule")->required();
    unblock->add_flag("--json", json_out, "machine-readable output");

    std::string start_hhmm;
    std::string end_hhmm;
    auto* schedule = app.add_subcommand("schedule", "block a device daily between two UTC times");
    schedule->add_option("device_id", device_id)->required();
    schedule->add_option("start", start_hhmm, "HH:MM")->required();
    schedule->add_option("end", end_hhmm, "HH:MM")->required();
    schedule->add_flag("--json", json_out, "machine-readable output");

    auto* rules = app.add_subcommand("rules", "list block rules");
    rules->add_flag("--json", json_out, "machine-readable output");

    ServiceFlags replay_flags;
    std::string replay_path;
    bool report = false;
    auto* replay = app.add_subcommand("replay", "analyze a capture file offline");
    replay->add_option("capture", replay_path, "capture file")->required();
    add_analysis_flags(replay, replay_flags);
    replay->add_flag("--report", report, "print per-device totals and tracker hits (default)");
    replay->add_flag("--json", json_out, "machine-readable output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }
    spdlog::set_level(spdlog::level::from_str(log_level));
    const std::string base = api_base(api);

    try {
        if (*run) return cmd_run(flags);
        if (*replay) return cmd_replay(replay_flags, replay_path, json_out);
        if (*devices) {
            auto j = call(base, "GET", "/devices");
            if (json_out) {
                std::cout << j.dump() << "\n";
            } else {
                print_devices(j);
            }
        } else if (*watch) {
            for (int i = 0; watch_count == 0 || i < watch_count; ++i) {
                if (i > 0) std::this_thread::sleep_for(std::chrono::seconds(1));
                auto j = call(base, "GET", "/get_traffic");
                if (json_out) {
                    std::cout << j.dump() << std::endl;
                } else {
                    print_traffic(j);
                    std::cout << std::endl;
                }
            }
        } else if (*block) {
            if (forever) from = until = 0;
            auto j = call(base, "GET", "/block/" + device_id + "/" + std::to_string(from) + "/" + std::to_string(until));
            std::cout << (json_out ? j.dump() : j["rule_id"].get<std::string>()) << "\n";
        } else if (*unblock) {
            auto j = call(base, "DELETE", "/rules/" + rule_id);
            std::cout << (json_out ? j.dump() : "cancelled " + rule_id) << "\n";
        } else if (*schedule) {
            json body = {{"device_id", device_id}, {"start_hhmm", start_hhmm}, {"end_hhmm", end_hhmm}};
            auto j = call(base, "POST", "/rules", body.dump());
            std::cout << (json_out ? j.dump() : j["rule_id"].get<std::string>()) << "\n";
        } else if (*rules) {
            auto j = call(base, "GET", "/rules");
            if (json_out) {
                std::cout << j.dump() << "\n";
            } else {
                for (const auto& r : j["rules"]) {
                    fmt::print("{:<10} {} [{}, {}) {}\n", r["rule_id"].get<std::string>(),
                               r["device_id"].get<std::string>(), r["block_at"].get<std::int64_t>(),
                               r["unblock_at"].get<std::int64_t>(), r["active"].get<bool>() ? "active" : "");
                }
                for (const auto& r : j["recurring"]) {
                    fmt::print("{:<10} {} daily {}-{} UTC {}\n", r["rule_id"].get<std::string>(),
                               r["device_id"].get<std::string>(), r["start_hhmm"].get<std::string>(),
                               r["end_hhmm"].get<std::string>(), r["active"].get<bool>() ? "active" : "");
                }
            }
        }
        return kExitOk;
    } catch (const UsageError& e) {
        spdlog::error("{}", e.what());
        return kExitUsage;
    } catch (const RemoteError& e) {
        spdlog::error("{}", e.what());
        return kExitRemote;
    } catch (const ls::Error& e) {
        spdlog::error("{}", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kExitUsage;
    }
}
