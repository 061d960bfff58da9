#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <string>

#include "leakscope/error.hpp"
#include "leakscope/linklayer.hpp"

namespace leakscope {

inline constexpr std::uint32_t kPcapMagicMicros = 0xa1b2c3d4;
inline constexpr std::uint32_t kPcapMagicNanos = 0xa1b23c4d;
inline constexpr std::uint32_t kLinktypeEthernet = 1;

struct PcapRecord {
    double ts = 0.0;
    Bytes data;
    std::uint32_t orig_len = 0;
};

/// Classic libpcap reader; accepts both byte orders and the nanosecond variant.
class PcapReader {
public:
    explicit PcapReader(const std::string& path);

    /// nullopt at clean end of file; throws Error(truncated_record) on a short record.
    std::optional<PcapRecord> next();
    std::uint32_t linktype() const { return linktype_; }
    std::size_t records_read() const { return records_; }

private:
    std::uint32_t read_u32(const std::uint8_t* p) const;

    std::string path_;
    std::ifstream in_;
    bool swapped_ = false;
    bool nanos_ = false;
    std::uint32_t linktype_ = 0;
    std::size_t records_ = 0;
};

class PcapWriter {
public:
    explicit PcapWriter(const std::string& path, std::uint32_t snaplen = 65535);
    void write(const Frame& frame);
    void write(double ts, ByteView data);

private:
    std::ofstream out_;
};

struct ReplayStats {
    std::size_t frames = 0;
    std::size_t malformed = 0;
    double duration = 0.0;

    bool operator==(const ReplayStats&) const = default;
};

class ReplayError : public Error {
public:
    ReplayError(ErrorCode code, const std::string& message, ReplayStats stats)
        : Error(code, message), stats_(stats) {}
    const ReplayStats& stats() const { return stats_; }

private:
    ReplayStats stats_;
};

/// Delivers every well-formed frame in file order. A truncated trailing record stops the
/// replay with ReplayError(truncated_record) carrying the counts delivered so far.
ReplayStats replay_pcap(const std::string& path, const std::function<void(const Frame&)>& sink);

}  // namespace leakscope
