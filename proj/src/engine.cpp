#include "leakscope/engine.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <thread>

#include "leakscope/error.hpp"

namespace leakscope {

Engine::Engine(std::unique_ptr<Backend> backend, EngineConfig cfg)
    : backend_(std::move(backend)),
      cfg_(std::move(cfg)),
      registry_(cfg_.ouis, cfg_.names, cfg_.known_only),
      policy_([this](const DeviceId& id) { return registry_.contains(id); }) {
    if (!cfg_.subnet) cfg_.subnet = backend_->subnet();
    if (!cfg_.gateway_ip) cfg_.gateway_ip = backend_->gateway_hint();
    AnalyzerConfig acfg;
    acfg.retention_seconds = cfg_.retention_seconds;
    acfg.subnet = cfg_.subnet;
    analyzer_ = std::make_unique<Analyzer>(registry_, cfg_.blocklist, acfg);
    if (backend_->can_send()) {
        if (!cfg_.subnet) throw Error(ErrorCode::invalid_argument, "subnet unknown; pass --subnet");
        spoofer_ = std::make_unique<Spoofer>(*backend_, registry_, policy_,
                                             SpooferConfig{cfg_.spoof_interval, cfg_.seed});
        forwarder_ = std::make_unique<Forwarder>(*backend_, registry_, policy_, *cfg_.subnet);
    }
}

void Engine::start() {
    if (started_) return;
    started_ = true;
    if (cfg_.gateway_ip) registry_.set_gateway_ip(*cfg_.gateway_ip);
    auto self = backend_->local_identity();
    if (self) registry_.set_self(*self);
    if (!backend_->can_send()) return;
    if (!self) throw Error(ErrorCode::invalid_argument, "backend has no local identity to spoof from");
    if (!cfg_.gateway_ip) throw Error(ErrorCode::no_gateway, "gateway IP unknown; pass --gateway-ip");

    ScanOptions opts;
    opts.subnet = *cfg_.subnet;
    opts.timeout = cfg_.scan_timeout;
    opts.gateway_ip = cfg_.gateway_ip;
    auto scan = arp_scan(*backend_, *self, opts, registry_, [this](const Frame& f) { handle(f); });
    const auto n = apply_scan(registry_, scan, backend_->now());
    spdlog::info("discovery: {} device(s), gateway {}", n,
                 scan.gateway ? scan.gateway->mac.str() : std::string("not found"));
    if (!registry_.gateway()) spdlog::warn("discovery: gateway {} did not answer", cfg_.gateway_ip->str());
}

void Engine::handle(const Frame& frame) {
    analyzer_->ingest(frame, frame.ts);
    if (forwarder_) forwarder_->forward(frame, backend_->now());
}

std::size_t Engine::pump() {
    std::size_t n = 0;
    while (true) {
        auto r = backend_->receive();
        if (r.status == RecvStatus::end) {
            finished_ = true;
            break;
        }
        if (r.status == RecvStatus::idle) break;
        handle(r.frame);
        ++n;
    }
    return n;
}

void Engine::run_for(double seconds, double step) {
    if (!(step > 0)) throw Error(ErrorCode::invalid_argument, "step must be positive");
    start();
    const double until = backend_->now() + seconds;
    while (!finished_ && backend_->now() + 1e-9 < until) {
        if (spoofer_) spoofer_->tick(backend_->now());
        backend_->advance(std::min(step, until - backend_->now()));
        pump();
    }
}

void Engine::replay() {
    start();
    while (!finished_) pump();
}

void Engine::run(const std::atomic<bool>& stop) {
    using clock = std::chrono::steady_clock;
    start();
    auto last = clock::now();
    while (!stop.load() && !finished_) {
        if (spoofer_) spoofer_->tick(backend_->now());
        const auto t = clock::now();
        const double elapsed = std::chrono::duration<double>(t - last).count();
        last = t;
        // Live backends block in advance() until traffic arrives; the sim steps by wall time.
        backend_->advance(std::clamp(elapsed, 0.005, 0.1));
        if (pump() == 0) std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    shutdown();
}

void Engine::shutdown() {
    if (healed_ || !spoofer_) return;
    healed_ = true;
    spoofer_->heal();
    spdlog::info("spoofer: sent {} healing ARP replies", spoofer_->stats().healing_packets);
}

api::ApiContext Engine::api_context(const api::PrivacyCatalog* catalog) {
    api::ApiContext ctx;
    ctx.registry = &registry_;
    ctx.analyzer = analyzer_.get();
    ctx.policy = &policy_;
    ctx.catalog = catalog;
    ctx.clock = [b = backend_.get()] { return b->now(); };
    return ctx;
}

}  // namespace leakscope
