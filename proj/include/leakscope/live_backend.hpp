#pragma once

#include <mutex>
#include <string>

#include "leakscope/backend.hpp"

namespace leakscope {

/// Raw link-layer socket bound to one interface. Requires CAP_NET_RAW.
class LiveBackend : public Backend {
public:
    LiveBackend(const std::string& ifname, bool promiscuous);
    ~LiveBackend() override;
    LiveBackend(const LiveBackend&) = delete;
    LiveBackend& operator=(const LiveBackend&) = delete;

    Received receive() override;
    void send(const Frame& frame) override;
    double now() const override;
    void advance(double seconds) override;

    std::optional<LocalIdentity> local_identity() const override;
    std::optional<Subnet> subnet() const override;

private:
    std::string ifname_;
    int ifindex_ = 0;
    int fd_ = -1;
    std::mutex send_mu_;
    LocalIdentity identity_;
    std::optional<Subnet> subnet_;
};

}  // namespace leakscope
