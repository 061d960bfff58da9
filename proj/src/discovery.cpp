#include "leakscope/discovery.hpp"

#include <spdlog/spdlog.h>

#include <fstream>
#include <mutex>
#include <sstream>

#include "leakscope/error.hpp"

namespace leakscope {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template <typename Map>
Map parse_oui_lines(std::string_view text, const std::string& origin) {
    Map out;
    std::istringstream in{std::string(text)};
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        const auto ws = line.find_first_of(" \t");
        const std::string key = line.substr(0, ws);
        auto oui = Oui::parse(key);
        if (!oui) throw ParseError(origin, lineno, "expected an OUI like AA:BB:CC, got '" + key + "'");
        std::string value = ws == std::string::npos ? std::string() : trim(std::string_view(line).substr(ws));
        if (value.rfind("(hex)", 0) == 0) value = trim(std::string_view(value).substr(5));
        if (value.empty()) throw ParseError(origin, lineno, "missing text after " + key);
        if (out.find(*oui)) {
            out.warnings.push_back(origin + ":" + std::to_string(lineno) + ": duplicate OUI " + oui->str() +
                                   ", later entry wins");
            spdlog::warn("{}", out.warnings.back());
        }
        out.set(*oui, std::move(value));
    }
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::not_found, "file not found: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

std::optional<std::string> OuiMap::find(const Oui& oui) const {
    auto it = entries_.find(oui);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

OuiTable parse_oui_table(std::string_view text, const std::string& origin) {
    return parse_oui_lines<OuiTable>(text, origin);
}

NameMap parse_name_map(std::string_view text, const std::string& origin) {
    return parse_oui_lines<NameMap>(text, origin);
}

OuiTable load_oui_table(const std::string& path) { return parse_oui_table(read_file(path), path); }

NameMap load_name_map(const std::string& path) { return parse_name_map(read_file(path), path); }

Identity identify(const MacAddr& mac, const OuiTable& ouis, const NameMap& names) {
    const Oui oui = oui_of(mac);
    Identity id;
    auto vendor = ouis.find(oui);
    id.vendor = vendor.value_or("unknown");
    if (auto name = names.find(oui)) {
        id.name = *name;
    } else if (vendor) {
        id.name = *vendor;
    } else {
        id.name = "unknown device";
    }
    return id;
}

DeviceRegistry::DeviceRegistry(OuiTable ouis, NameMap names, bool known_only)
    : ouis_(std::move(ouis)), names_(std::move(names)), known_only_(known_only) {}

DeviceRecord DeviceRegistry::upsert(const MacAddr& mac, Ipv4Addr ip, double now) {
    std::unique_lock lock(mu_);
    for (auto it = devices_.begin(); it != devices_.end();) {
        if (it->first != mac && it->second.ip == ip) {
            spdlog::info("registry: {} moved from {} to {}", ip.str(), it->first.str(), mac.str());
            it = devices_.erase(it);
            ++version_;
        } else {
            ++it;
        }
    }
    auto [it, inserted] = devices_.try_emplace(mac);
    DeviceRecord& rec = it->second;
    if (inserted) {
        const Identity label = identify(mac, ouis_, names_);
        rec.device_id = device_id_of(mac);
        rec.mac = mac;
        rec.vendor = label.vendor;
        rec.name = label.name;
        rec.monitored = !known_only_ || names_.find(oui_of(mac)).has_value();
        ++version_;
    }
    if (rec.ip != ip) {
        rec.ip = ip;
        ++version_;
    }
    rec.last_seen = now;
    return rec;
}

void DeviceRegistry::touch(const MacAddr& mac, double now) {
    std::unique_lock lock(mu_);
    if (auto it = devices_.find(mac); it != devices_.end()) it->second.last_seen = now;
}

bool DeviceRegistry::remove(const DeviceId& id) {
    std::unique_lock lock(mu_);
    const bool removed = devices_.erase(id.mac()) > 0;
    if (removed) ++version_;
    return removed;
}

void DeviceRegistry::set_gateway(const GatewayRecord& gw) {
    std::unique_lock lock(mu_);
    if (gateway_ != gw) ++version_;
    gateway_ = gw;
    gateway_ip_ = gw.ip;
    if (devices_.erase(gw.mac) > 0) ++version_;
}

std::optional<GatewayRecord> DeviceRegistry::gateway() const {
    std::shared_lock lock(mu_);
    return gateway_;
}

void DeviceRegistry::set_self(const LocalIdentity& self) {
    std::unique_lock lock(mu_);
    self_ = self;
    ++version_;
}

std::optional<LocalIdentity> DeviceRegistry::self() const {
    std::shared_lock lock(mu_);
    return self_;
}

void DeviceRegistry::set_gateway_ip(Ipv4Addr ip) {
    std::unique_lock lock(mu_);
    gateway_ip_ = ip;
}

std::optional<Ipv4Addr> DeviceRegistry::gateway_ip() const {
    std::shared_lock lock(mu_);
    return gateway_ip_;
}

std::optional<DeviceRecord> DeviceRegistry::by_mac(const MacAddr& mac) const {
    std::shared_lock lock(mu_);
    auto it = devices_.find(mac);
    if (it == devices_.end()) return std::nullopt;
    return it->second;
}

std::optional<DeviceRecord> DeviceRegistry::by_ip(Ipv4Addr ip) const {
    std::shared_lock lock(mu_);
    for (const auto& [mac, rec] : devices_) {
        if (rec.ip == ip) return rec;
    }
    return std::nullopt;
}

std::optional<DeviceRecord> DeviceRegistry::find(const DeviceId& id) const { return by_mac(id.mac()); }

bool DeviceRegistry::contains(const DeviceId& id) const { return find(id).has_value(); }

std::vector<DeviceRecord> DeviceRegistry::snapshot() const {
    std::shared_lock lock(mu_);
    std::vector<DeviceRecord> out;
    out.reserve(devices_.size());
    for (const auto& [mac, rec] : devices_) out.push_back(rec);
    return out;
}

std::vector<DeviceRecord> DeviceRegistry::monitored() const {
    auto all = snapshot();
    std::erase_if(all, [](const DeviceRecord& r) { return !r.monitored; });
    return all;
}

std::size_t DeviceRegistry::size() const {
    std::shared_lock lock(mu_);
    return devices_.size();
}

std::uint64_t DeviceRegistry::version() const {
    std::shared_lock lock(mu_);
    return version_;
}

ScanResult arp_scan(Backend& backend, const LocalIdentity& self, const ScanOptions& opts, const DeviceRegistry& labels,
                    const std::function<void(const Frame&)>& other) {
    if (opts.subnet.prefix < 16) {
        throw Error(ErrorCode::invalid_argument, "refusing to scan " + opts.subnet.str() + ": prefix must be /16 or longer");
    }
    ScanResult result;
    for (const Ipv4Addr& ip : opts.subnet.hosts()) {
        if (ip == self.ip) continue;
        ArpPacket req{ArpOp::request, self.mac, self.ip, MacAddr(), ip};
        try {
            backend.send(make_arp_frame(req, self.mac, MacAddr::broadcast(), backend.now()));
        } catch (const Error& e) {
            throw Error(ErrorCode::backend_io, std::string("ARP scan send failed: ") + e.what());
        }
        ++result.requests_sent;
    }

    std::map<MacAddr, DeviceRecord> found;
    const double deadline = backend.now() + opts.timeout;
    while (true) {
        Received r = backend.receive();
        if (r.status == RecvStatus::end) break;
        if (r.status == RecvStatus::idle) {
            const double left = deadline - backend.now();
            if (left <= 1e-9) break;
            backend.advance(std::min(0.05, left));
            continue;
        }
        auto arp = parse_arp(r.frame);
        if (!arp) {
            if (other) other(r.frame);
            continue;
        }
        if (arp->op != ArpOp::reply || arp->target_ip != self.ip || arp->sender_mac == self.mac ||
            !opts.subnet.contains(arp->sender_ip)) {
            continue;
        }
        if (opts.gateway_ip && arp->sender_ip == *opts.gateway_ip) {
            result.gateway = GatewayRecord{arp->sender_mac, arp->sender_ip};
            continue;
        }
        DeviceRecord rec;
        const Identity label = labels.label(arp->sender_mac);
        rec.device_id = device_id_of(arp->sender_mac);
        rec.mac = arp->sender_mac;
        rec.ip = arp->sender_ip;
        rec.vendor = label.vendor;
        rec.name = label.name;
        rec.last_seen = r.frame.ts;
        found[rec.mac] = rec;
    }
    // One record per IP: a later claimant of an address replaces the earlier one.
    std::map<Ipv4Addr, DeviceRecord> by_ip;
    for (auto& [mac, rec] : found) {
        auto it = by_ip.find(rec.ip);
        if (it == by_ip.end() || it->second.last_seen <= rec.last_seen) by_ip[rec.ip] = rec;
    }
    for (auto& [ip, rec] : by_ip) result.devices.push_back(std::move(rec));
    return result;
}

std::size_t apply_scan(DeviceRegistry& registry, const ScanResult& scan, double now) {
    if (scan.gateway) registry.set_gateway(*scan.gateway);
    for (const auto& d : scan.devices) registry.upsert(d.mac, d.ip, now);
    return scan.devices.size();
}

}  // namespace leakscope
