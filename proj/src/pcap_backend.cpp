#include <spdlog/spdlog.h>

#include "leakscope/backend.hpp"

namespace leakscope {

PcapBackend::PcapBackend(const std::string& path) : reader_(path) {}

Received PcapBackend::receive() {
    while (!done_) {
        std::optional<PcapRecord> rec;
        try {
            rec = reader_.next();
        } catch (const Error& e) {
            spdlog::error("pcap replay stopped: {}", e.what());
            truncated_ = true;
            done_ = true;
            break;
        }
        if (!rec) {
            done_ = true;
            break;
        }
        if (!first_ts_) first_ts_ = rec->ts;
        now_ = rec->ts;
        stats_.duration = rec->ts - *first_ts_;
        auto frame = parse_frame(rec->data, rec->ts);
        if (!frame) {
            ++stats_.malformed;
            continue;
        }
        ++stats_.frames;
        return {RecvStatus::frame, std::move(*frame)};
    }
    return {RecvStatus::end, {}};
}

void PcapBackend::send(const Frame&) { throw Error(ErrorCode::unsupported, "pcap backend is read-only"); }

double PcapBackend::now() const { return now_; }

}  // namespace leakscope
