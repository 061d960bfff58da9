#pragma once

#include <atomic>
#include <memory>
#include <optional>

#include "leakscope/analyzer.hpp"
#include "leakscope/api.hpp"
#include "leakscope/backend.hpp"
#include "leakscope/discovery.hpp"
#include "leakscope/policy.hpp"
#include "leakscope/spoofer.hpp"

namespace leakscope {

struct EngineConfig {
    std::optional<Ipv4Addr> gateway_ip;  // falls back to the backend's hint
    std::optional<Subnet> subnet;        // falls back to the backend's subnet
    OuiTable ouis;
    NameMap names;
    bool known_only = false;
    Blocklist blocklist;
    double spoof_interval = kDefaultSpoofInterval;
    std::uint64_t seed = 0x5eed;
    double scan_timeout = 2.0;
    std::int64_t retention_seconds = 600;
};

/// Wires backend -> discovery -> spoofer/forwarder -> analyzer on one driver thread.
/// Registry, policy and analyzer are safe to read from API threads meanwhile.
class Engine {
public:
    Engine(std::unique_ptr<Backend> backend, EngineConfig cfg);

    /// Identity, gateway and an ARP scan when the backend can transmit. Call once.
    void start();
    /// Drains frames queued at the backend; returns how many were handled.
    std::size_t pump();
    /// Advances the backend clock by `seconds`, spoofing and forwarding along the way.
    void run_for(double seconds, double step = 0.05);
    /// Pcap mode: ingest until the capture ends.
    void replay();
    /// Wall-clock loop for run: returns once `stop` is set, after healing caches.
    void run(const std::atomic<bool>& stop);
    /// Restores true ARP mappings; idempotent.
    void shutdown();

    bool finished() const { return finished_; }
    double now() const { return backend_->now(); }

    Backend& backend() { return *backend_; }
    DeviceRegistry& registry() { return registry_; }
    PolicyStore& policy() { return policy_; }
    Analyzer& analyzer() { return *analyzer_; }
    Spoofer* spoofer() { return spoofer_.get(); }
    Forwarder* forwarder() { return forwarder_.get(); }
    /// Context for an ApiRouter bound to this engine's state.
    api::ApiContext api_context(const api::PrivacyCatalog* catalog = nullptr);

private:
    void handle(const Frame& frame);

    std::unique_ptr<Backend> backend_;
    EngineConfig cfg_;
    DeviceRegistry registry_;
    PolicyStore policy_;
    std::unique_ptr<Analyzer> analyzer_;
    std::unique_ptr<Spoofer> spoofer_;
    std::unique_ptr<Forwarder> forwarder_;
    bool started_ = false;
    bool finished_ = false;
    bool healed_ = false;
};

}  // namespace leakscope
