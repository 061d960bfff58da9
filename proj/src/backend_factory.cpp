
#include "leakscope/backend.hpp"
#include "leakscope/error.hpp"
#include "leakscope/simnet.hpp"

#ifdef LEAKSCOPE_WITH_LIVE
#include "leakscope/live_backend.hpp"
#endif

namespace leakscope {

std::unique_ptr<Backend> open_backend(const BackendConfig& cfg) {
    switch (cfg.kind) {
        case BackendConfig::Kind::pcap:
            return std::make_unique<PcapBackend>(cfg.target);
        case BackendConfig::Kind::sim: {
            auto sim = std::make_shared<sim::Simulator>(sim::load_scenario(cfg.target));
            return std::make_unique<sim::SimBackend>(std::move(sim), cfg.sim_epoch);
        }
        case BackendConfig::Kind::live:
#ifdef LEAKSCOPE_WITH_LIVE
            return std::make_unique<LiveBackend>(cfg.target, cfg.promiscuous);
#else
            throw Error(ErrorCode::unsupported, "this build does not include live capture (LEAKSCOPE_WITH_LIVE=OFF)");
#endif
    }
    throw Error(ErrorCode::invalid_argument, "unknown backend kind");
}

}  // namespace leakscope
