#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "leakscope/analyzer.hpp"
#include "leakscope/discovery.hpp"
#include "leakscope/netmodel.hpp"
#include "leakscope/policy.hpp"

namespace leakscope::api {

using nlohmann::json;

// Wire format. Field names and order are part of the published schema.
json to_json(const TrafficSnapshot& snap);
json to_json(const DeviceTraffic& dev);
/// Inverse of to_json; throws Error(parse_error) on shape mismatch.
TrafficSnapshot snapshot_from_json(const json& j);

enum class DeviceClass { voice_assistant, smart_tv, camera, fridge, other };

const char* to_string(DeviceClass c);
std::optional<DeviceClass> parse_device_class(std::string_view s);

inline constexpr const char* kPrivacyCategories[] = {"location", "activity", "screen",
                                                     "identity", "shopping", "health"};
bool is_privacy_category(std::string_view s);

struct PrivacyCatalogEntry {
    DeviceClass device_class = DeviceClass::other;
    std::vector<std::string> categories;
    std::map<std::string, std::string> blurbs;
    /// Case-insensitive substrings of the friendly name that select this class.
    std::vector<std::string> keywords;
};

class PrivacyCatalog {
public:
    /// Throws Error(parse_error) on unknown classes or categories.
    static PrivacyCatalog parse(const json& j);
    static PrivacyCatalog load(const std::string& path);
    /// The catalog compiled into the binary from data/privacy_catalog.json.
    static const PrivacyCatalog& builtin();

    DeviceClass classify(std::string_view device_name) const;
    const PrivacyCatalogEntry& entry(DeviceClass c) const;
    const std::vector<PrivacyCatalogEntry>& entries() const { return entries_; }

private:
    std::vector<PrivacyCatalogEntry> entries_;
    PrivacyCatalogEntry fallback_;
};

struct Response {
    int status = 200;
    json body;
};

/// {"code": ..., "message": ...}; code is one of not_found, bad_request, conflict.
Response error_response(int status, const std::string& message);

struct ApiContext {
    const DeviceRegistry* registry = nullptr;
    const Analyzer* analyzer = nullptr;
    PolicyStore* policy = nullptr;
    const PrivacyCatalog* catalog = nullptr;
    /// Epoch seconds; the virtual clock in sim runs.
    std::function<double()> clock;
};

/// Transport-independent request dispatch, so handlers are testable without sockets.
class ApiRouter {
public:
    explicit ApiRouter(ApiContext ctx);

    Response handle(std::string_view method, std::string_view path, std::string_view body = {}) const;

private:
    Response get_traffic() const;
    Response block(const std::vector<std::string>& parts) const;
    Response devices() const;
    Response list_rules() const;
    Response add_recurring(std::string_view body) const;
    Response cancel(const std::string& rule_id) const;
    Response device_info(const std::string& id) const;

    std::int64_t now() const;

    ApiContext ctx_;
};

struct HttpOptions {
    std::string host = "127.0.0.1";
    int port = 8089;
    std::string cors_origin = "*";
    /// Static files served under /ui when set.
    std::optional<std::string> ui_dir;
};

/// "host:port" or ":port"; throws Error(invalid_argument).
std::pair<std::string, int> parse_listen(std::string_view text);

class HttpServer {
public:
    HttpServer(const ApiRouter& router, HttpOptions opts);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds and starts serving on a background thread. Port 0 picks a free port.
    /// Throws Error(backend_io) when the address cannot be bound.
    void start();
    void stop();
    int port() const { return bound_port_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int bound_port_ = 0;
};

}  // namespace leakscope::api
