#pragma once

#include <atomic>
#include <memory>
#include <optional>
#include <string>

#include "leakscope/linklayer.hpp"
#include "leakscope/pcap.hpp"

namespace leakscope {

struct BackendConfig {
    enum class Kind { live, sim, pcap };

    Kind kind = Kind::sim;
    /// Interface name, scenario path or pcap path depending on kind.
    std::string target;
    bool promiscuous = false;
    /// Epoch second that sim time zero maps to.
    double sim_epoch = 0.0;
};

/// The host the analyzer runs on.
struct LocalIdentity {
    MacAddr mac;
    Ipv4Addr ip;
};

enum class RecvStatus { frame, idle, end };

struct Received {
    RecvStatus status = RecvStatus::idle;
    Frame frame;
};

/// Packet I/O boundary. One thread drains receive/advance; send may be called concurrently.
class Backend {
public:
    virtual ~Backend() = default;

    /// Next pending frame, `idle` when nothing is queued right now, `end` once the source is exhausted.
    virtual Received receive() = 0;
    /// Throws Error(backend_io or unsupported) on failure.
    virtual void send(const Frame& frame) = 0;
    /// Backend clock in epoch seconds. Virtual for sim and pcap.
    virtual double now() const = 0;
    /// Lets up to `seconds` pass: steps the simulation, or waits for traffic on a live link.
    virtual void advance(double seconds) = 0;

    virtual bool can_send() const { return true; }
    virtual std::optional<LocalIdentity> local_identity() const { return std::nullopt; }
    virtual std::optional<Subnet> subnet() const { return std::nullopt; }
    virtual std::optional<Ipv4Addr> gateway_hint() const { return std::nullopt; }
};

/// Replays a capture file; read-only.
class PcapBackend : public Backend {
public:
    explicit PcapBackend(const std::string& path);

    Received receive() override;
    void send(const Frame& frame) override;
    double now() const override;
    void advance(double) override {}
    bool can_send() const override { return false; }

    const ReplayStats& stats() const { return stats_; }
    bool truncated() const { return truncated_; }

private:
    PcapReader reader_;
    ReplayStats stats_;
    std::atomic<double> now_{0.0};
    std::optional<double> first_ts_;
    bool done_ = false;
    bool truncated_ = false;
};

/// Opens sim, pcap, or (when built with live support) raw-socket backends.
/// Throws Error(not_found) for a missing file/interface and Error(permission_denied) when
/// raw capture is not permitted.
std::unique_ptr<Backend> open_backend(const BackendConfig& cfg);

}  // namespace leakscope
