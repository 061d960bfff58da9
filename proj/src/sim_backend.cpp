#include "leakscope/error.hpp"
#include "leakscope/simnet.hpp"

namespace leakscope::sim {

SimBackend::SimBackend(std::shared_ptr<Simulator> sim, double epoch_base)
    : sim_(std::move(sim)), epoch_base_(epoch_base) {
    if (!sim_->scenario().analyzer()) {
        throw Error(ErrorCode::invalid_argument, "scenario declares no analyzer host to attach to");
    }
    now_ = epoch_base_ + sim_->now();
}

Received SimBackend::receive() {
    std::lock_guard lock(mu_);
    for (auto& f : sim_->take_analyzer_inbox()) inbox_.push_back(std::move(f));
    if (inbox_.empty()) return {RecvStatus::idle, {}};
    Received r{RecvStatus::frame, std::move(inbox_.front())};
    inbox_.pop_front();
    r.frame.ts += epoch_base_;
    return r;
}

void SimBackend::send(const Frame& frame) {
    std::lock_guard lock(mu_);
    sim_->inject(frame);
}

double SimBackend::now() const { return now_; }

double SimBackend::sim_time() const {
    std::lock_guard lock(mu_);
    return sim_->now();
}

void SimBackend::advance(double seconds) {
    std::lock_guard lock(mu_);
    double remaining = seconds;
    while (remaining > 1e-9) {
        const double dt = std::min(step_, remaining);
        sim_->step(dt);
        remaining -= dt;
    }
    now_ = epoch_base_ + sim_->now();
}

std::optional<LocalIdentity> SimBackend::local_identity() const {
    const auto* a = sim_->scenario().analyzer();
    return LocalIdentity{a->mac, a->ip};
}

std::optional<Subnet> SimBackend::subnet() const { return sim_->scenario().subnet; }

std::optional<Ipv4Addr> SimBackend::gateway_hint() const { return sim_->scenario().gateway().ip; }

}  // namespace leakscope::sim
