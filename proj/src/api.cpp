#include "leakscope/api.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "catalog_data.hpp"
#include "leakscope/error.hpp"

namespace leakscope::api {

namespace {

std::vector<std::string> split_path(std::string_view path) {
    if (auto q = path.find('?'); q != std::string_view::npos) path = path.substr(0, q);
    std::vector<std::string> parts;
    std::size_t i = 0;
    while (i < path.size()) {
        if (path[i] == '/') {
            ++i;
            continue;
        }
        const auto j = std::min(path.find('/', i), path.size());
        parts.emplace_back(path.substr(i, j - i));
        i = j;
    }
    return parts;
}

std::optional<std::int64_t> parse_epoch(const std::string& s) {
    if (s.empty() || s.size() > 18 || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        return std::nullopt;
    }
    std::int64_t v = 0;
    std::from_chars(s.data(), s.data() + s.size(), v);
    return v;
}

// Lowercase, with every run of non-alphanumerics collapsed to one space and padded.
std::string word_form(std::string_view s) {
    std::string out = " ";
    for (char c : s) {
        const bool alnum = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
        if (alnum) {
            out += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
        } else if (out.back() != ' ') {
            out += ' ';
        }
    }
    if (out.back() != ' ') out += ' ';
    return out;
}

Response ok(json body) { return {200, std::move(body)}; }

const char* error_code_for(int status) {
    switch (status) {
        case 404: return "not_found";
        case 409: return "conflict";
        default: return "bad_request";
    }
}

Response from_policy_error(const PolicyError& e) {
    switch (e.kind()) {
        case PolicyError::Kind::unknown_device:
        case PolicyError::Kind::unknown_rule: return error_response(404, e.what());
        case PolicyError::Kind::past_window: return error_response(409, e.what());
        case PolicyError::Kind::invalid_window: break;
    }
    return error_response(400, e.what());
}

json device_json(const DeviceRecord& d, const PrivacyCatalog* catalog) {
    json j = {{"device_id", d.device_id.str()},
              {"name", d.name},
              {"vendor", d.vendor},
              {"mac", d.mac.str()},
              {"ip", d.ip.str()},
              {"monitored", d.monitored},
              {"last_seen", d.last_seen}};
    if (catalog) j["device_class"] = to_string(catalog->classify(d.name));
    return j;
}

template <typename T>
T field(const json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw Error(ErrorCode::parse_error, std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorCode::parse_error, std::string("bad type for field '") + key + "'");
    }
}

}  // namespace

json to_json(const DeviceTraffic& d) {
    json series = json::array();
    for (const auto& s : d.series) series.push_back(json::array({s.t, s.bytes_out, s.bytes_in}));
    return json{{"device_id", d.device_id.str()},
                {"name", d.name},
                {"vendor", d.vendor},
                {"mac", d.mac.str()},
                {"ip", d.ip.str()},
                {"blocked", d.blocked},
                {"tracker_count", d.tracker_count},
                {"tracker_hosts", json(std::vector<std::string>(d.tracker_hosts.begin(), d.tracker_hosts.end()))},
                {"series", std::move(series)}};
}

json to_json(const TrafficSnapshot& snap) {
    json devices = json::array();
    for (const auto& d : snap.devices) devices.push_back(to_json(d));
    return json{{"generated_at", snap.generated_at}, {"devices", std::move(devices)}};
}

TrafficSnapshot snapshot_from_json(const json& j) {
    TrafficSnapshot snap;
    snap.generated_at = field<std::int64_t>(j, "generated_at");
    const auto devices = field<json>(j, "devices");
    if (!devices.is_array()) throw Error(ErrorCode::parse_error, "devices must be an array");
    for (const auto& dj : devices) {
        DeviceTraffic d;
        auto id = DeviceId::parse(field<std::string>(dj, "device_id"));
        auto mac = MacAddr::parse(field<std::string>(dj, "mac"));
        auto ip = Ipv4Addr::parse(field<std::string>(dj, "ip"));
        if (!id || !mac || !ip) throw Error(ErrorCode::parse_error, "bad device address fields");
        d.device_id = *id;
        d.mac = *mac;
        d.ip = *ip;
        d.name = field<std::string>(dj, "name");
        d.vendor = field<std::string>(dj, "vendor");
        d.blocked = field<bool>(dj, "blocked");
        d.tracker_count = field<std::size_t>(dj, "tracker_count");
        for (const auto& h : field<std::vector<std::string>>(dj, "tracker_hosts")) d.tracker_hosts.insert(h);
        for (const auto& row : field<json>(dj, "series")) {
            if (!row.is_array() || row.size() != 3) throw Error(ErrorCode::parse_error, "series rows are [t, out, in]");
            d.series.push_back({row[0].get<std::int64_t>(), row[1].get<std::uint64_t>(), row[2].get<std::uint64_t>()});
        }
        snap.devices.push_back(std::move(d));
    }
    return snap;
}

const char* to_string(DeviceClass c) {
    switch (c) {
        case DeviceClass::voice_assistant: return "voice_assistant";
        case DeviceClass::smart_tv: return "smart_tv";
        case DeviceClass::camera: return "camera";
        case DeviceClass::fridge: return "fridge";
        case DeviceClass::other: return "other";
    }
    return "other";
}

std::optional<DeviceClass> parse_device_class(std::string_view s) {
    for (auto c : {DeviceClass::voice_assistant, DeviceClass::smart_tv, DeviceClass::camera, DeviceClass::fridge,
                   DeviceClass::other}) {
        if (s == to_string(c)) return c;
    }
    return std::nullopt;
}

bool is_privacy_category(std::string_view s) {
    return std::find(std::begin(kPrivacyCategories), std::end(kPrivacyCategories), s) != std::end(kPrivacyCategories);
}

PrivacyCatalog PrivacyCatalog::parse(const json& j) {
    PrivacyCatalog cat;
    for (const auto& ej : field<json>(j, "entries")) {
        PrivacyCatalogEntry e;
        const auto cls = field<std::string>(ej, "device_class");
        auto parsed = parse_device_class(cls);
        if (!parsed) throw Error(ErrorCode::parse_error, "unknown device_class '" + cls + "'");
        e.device_class = *parsed;
        e.categories = field<std::vector<std::string>>(ej, "categories");
        e.keywords = field<std::vector<std::string>>(ej, "keywords");
        e.blurbs = field<std::map<std::string, std::string>>(ej, "blurbs");
        for (const auto& c : e.categories) {
            if (!is_privacy_category(c)) throw Error(ErrorCode::parse_error, "unknown privacy category '" + c + "'");
            if (!e.blurbs.count(c)) throw Error(ErrorCode::parse_error, "missing blurb for '" + c + "'");
        }
        if (e.device_class == DeviceClass::other) {
            cat.fallback_ = e;
        } else {
            cat.entries_.push_back(std::move(e));
        }
    }
    return cat;
}

PrivacyCatalog PrivacyCatalog::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::not_found, "catalog not found: " + path);
    try {
        return parse(json::parse(in));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::parse_error, path + ": " + e.what());
    }
}

const PrivacyCatalog& PrivacyCatalog::builtin() {
    static const PrivacyCatalog cat = parse(json::parse(detail::kBuiltinCatalog));
    return cat;
}

DeviceClass PrivacyCatalog::classify(std::string_view device_name) const {
    const auto name = word_form(device_name);
    for (const auto& e : entries_) {
        for (const auto& kw : e.keywords) {
            if (name.find(word_form(kw)) != std::string::npos) return e.device_class;
        }
    }
    return DeviceClass::other;
}

const PrivacyCatalogEntry& PrivacyCatalog::entry(DeviceClass c) const {
    for (const auto& e : entries_) {
        if (e.device_class == c) return e;
    }
    return fallback_;
}

Response error_response(int status, const std::string& message) {
    return {status, json{{"code", error_code_for(status)}, {"message", message}}};
}

ApiRouter::ApiRouter(ApiContext ctx) : ctx_(std::move(ctx)) {
    if (!ctx_.catalog) ctx_.catalog = &PrivacyCatalog::builtin();
}

std::int64_t ApiRouter::now() const {
    return static_cast<std::int64_t>(std::floor(ctx_.clock ? ctx_.clock() : 0.0));
}

Response ApiRouter::handle(std::string_view method, std::string_view path, std::string_view body) const {
    const auto parts = split_path(path);
    try {
        if (method == "GET") {
            if (parts.size() == 1 && parts[0] == "get_traffic") return get_traffic();
            if (parts.size() == 4 && parts[0] == "block") return block(parts);
            if (parts.size() == 1 && parts[0] == "devices") return devices();
            if (parts.size() == 1 && parts[0] == "rules") return list_rules();
            if (parts.size() == 2 && parts[0] == "device_info") return device_info(parts[1]);
        } else if (method == "POST") {
            if (parts.size() == 1 && parts[0] == "rules") return add_recurring(body);
        } else if (method == "DELETE") {
            if (parts.size() == 2 && parts[0] == "rules") return cancel(parts[1]);
        }
    } catch (const PolicyError& e) {
        return from_policy_error(e);
    } catch (const Error& e) {
        return error_response(e.code() == ErrorCode::not_found ? 404 : 400, e.what());
    }
    return error_response(404, "no route for " + std::string(method) + " " + std::string(path));
}

Response ApiRouter::get_traffic() const {
    return ok(to_json(ctx_.analyzer->snapshot(ctx_.policy, static_cast<double>(now()))));
}

Response ApiRouter::block(const std::vector<std::string>& parts) const {
    auto id = DeviceId::parse(parts[1]);
    if (!id || !ctx_.registry->contains(*id)) return error_response(404, "unknown device '" + parts[1] + "'");
    auto t0 = parse_epoch(parts[2]);
    auto t1 = parse_epoch(parts[3]);
    if (!t0 || !t1) return error_response(400, "block and unblock times must be unsigned epoch seconds");
    const auto rule_id = ctx_.policy->add_rule(*id, *t0, *t1, now());
    spdlog::info("api: block {} [{}, {}) as {}", id->str(), *t0, *t1, rule_id);
    return ok(json{{"rule_id", rule_id}});
}

Response ApiRouter::devices() const {
    json list = json::array();
    for (const auto& d : ctx_.registry->snapshot()) list.push_back(device_json(d, ctx_.catalog));
    json gateway = nullptr;
    if (auto gw = ctx_.registry->gateway()) gateway = json{{"mac", gw->mac.str()}, {"ip", gw->ip.str()}};
    return ok(json{{"devices", std::move(list)}, {"gateway", std::move(gateway)}});
}

Response ApiRouter::list_rules() const {
    const auto t = now();
    json windows = json::array();
    for (const auto& r : ctx_.policy->rules()) {
        windows.push_back(json{{"rule_id", r.rule_id},
                               {"device_id", r.device.str()},
                               {"block_at", r.block_at},
                               {"unblock_at", r.unblock_at},
                               {"created_at", r.created_at},
                               {"active", is_active(r, t)}});
    }
    json recurring = json::array();
    for (const auto& r : ctx_.policy->recurring_rules()) {
        const auto [start, end] = expand_window(r, t);
        recurring.push_back(json{{"rule_id", r.rule_id},
                                 {"device_id", r.device.str()},
                                 {"start_hhmm", format_hhmm(r.start_minute)},
                                 {"end_hhmm", format_hhmm(r.end_minute)},
                                 {"created_at", r.created_at},
                                 {"active", is_active(r, t)},
                                 {"window_start", start},
                                 {"window_end", end}});
    }
    return ok(json{{"rules", std::move(windows)}, {"recurring", std::move(recurring)}});
}

Response ApiRouter::add_recurring(std::string_view body) const {
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception&) {
        return error_response(400, "request body is not JSON");
    }
    const auto id_text = field<std::string>(j, "device_id");
    const auto start = parse_hhmm(field<std::string>(j, "start_hhmm"));
    const auto end = parse_hhmm(field<std::string>(j, "end_hhmm"));
    if (!start || !end) return error_response(400, "start_hhmm and end_hhmm must be HH:MM");
    auto id = DeviceId::parse(id_text);
    if (!id || !ctx_.registry->contains(*id)) return error_response(404, "unknown device '" + id_text + "'");
    const auto rule_id = ctx_.policy->add_recurring(*id, *start, *end, now());
    RecurringRule probe{rule_id, *id, *start, *end, now()};
    const auto [ws, we] = expand_window(probe, now());
    return ok(json{{"rule_id", rule_id}, {"window_start", ws}, {"window_end", we}});
}

Response ApiRouter::cancel(const std::string& rule_id) const {
    ctx_.policy->cancel_rule(rule_id);
    spdlog::info("api: cancelled {}", rule_id);
    return ok(json{{"rule_id", rule_id}, {"cancelled", true}});
}

Response ApiRouter::device_info(const std::string& id_text) const {
    auto id = DeviceId::parse(id_text);
    std::optional<DeviceRecord> rec;
    if (id) rec = ctx_.registry->find(*id);
    if (!rec) return error_response(404, "unknown device '" + id_text + "'");
    const auto cls = ctx_.catalog->classify(rec->name);
    const auto& entry = ctx_.catalog->entry(cls);
    return ok(json{{"device_id", rec->device_id.str()},
                   {"name", rec->name},
                   {"vendor", rec->vendor},
                   {"device_class", to_string(cls)},
                   {"categories", entry.categories},
                   {"blurbs", entry.blurbs}});
}

std::pair<std::string, int> parse_listen(std::string_view text) {
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos) throw Error(ErrorCode::invalid_argument, "listen address must be host:port");
    std::string host(text.substr(0, colon));
    const auto port_text = text.substr(colon + 1);
    int port = -1;
    auto r = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
    if (r.ec != std::errc{} || r.ptr != port_text.data() + port_text.size() || port < 0 || port > 65535) {
        throw Error(ErrorCode::invalid_argument, "bad port in listen address '" + std::string(text) + "'");
    }
    if (host.empty()) host = "127.0.0.1";
    return {host, port};
}

}  // namespace leakscope::api
