#include "leakscope/pcap.hpp"

#include <array>
#include <filesystem>

namespace leakscope {

namespace {

std::uint32_t bswap32(std::uint32_t v) {
    return (v >> 24) | ((v >> 8) & 0xff00) | ((v << 8) & 0xff0000) | (v << 24);
}

void put_u32(std::ofstream& out, std::uint32_t v) {
    const char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
                       static_cast<char>(v >> 24)};
    out.write(b, 4);
}

void put_u16(std::ofstream& out, std::uint16_t v) {
    const char b[2] = {static_cast<char>(v), static_cast<char>(v >> 8)};
    out.write(b, 2);
}

}  // namespace

PcapReader::PcapReader(const std::string& path) : path_(path) {
    if (!std::filesystem::exists(path)) throw Error(ErrorCode::not_found, "pcap file not found: " + path);
    in_.open(path, std::ios::binary);
    if (!in_) throw Error(ErrorCode::permission_denied, "cannot open pcap file: " + path);

    std::array<std::uint8_t, 24> header{};
    in_.read(reinterpret_cast<char*>(header.data()), header.size());
    if (in_.gcount() != static_cast<std::streamsize>(header.size())) {
        throw Error(ErrorCode::bad_magic, "pcap global header too short: " + path);
    }
    const std::uint32_t magic = header[0] | (header[1] << 8) | (header[2] << 16) | (std::uint32_t{header[3]} << 24);
    if (magic == kPcapMagicMicros || magic == kPcapMagicNanos) {
        swapped_ = false;
    } else if (bswap32(magic) == kPcapMagicMicros || bswap32(magic) == kPcapMagicNanos) {
        swapped_ = true;
    } else {
        throw Error(ErrorCode::bad_magic, "not a classic pcap file: " + path);
    }
    nanos_ = (swapped_ ? bswap32(magic) : magic) == kPcapMagicNanos;
    linktype_ = read_u32(header.data() + 20);
    if (linktype_ != kLinktypeEthernet) {
        throw Error(ErrorCode::unsupported, "pcap linktype " + std::to_string(linktype_) + " is not Ethernet: " + path);
    }
}

std::uint32_t PcapReader::read_u32(const std::uint8_t* p) const {
    const std::uint32_t v = p[0] | (p[1] << 8) | (p[2] << 16) | (std::uint32_t{p[3]} << 24);
    return swapped_ ? bswap32(v) : v;
}

std::optional<PcapRecord> PcapReader::next() {
    std::array<std::uint8_t, 16> rh{};
    in_.read(reinterpret_cast<char*>(rh.data()), rh.size());
    const auto got = in_.gcount();
    if (got == 0) return std::nullopt;
    if (got != static_cast<std::streamsize>(rh.size())) {
        throw Error(ErrorCode::truncated_record, "truncated pcap record header after " + std::to_string(records_) +
                                                     " records: " + path_);
    }
    PcapRecord rec;
    const std::uint32_t sec = read_u32(rh.data());
    const std::uint32_t frac = read_u32(rh.data() + 4);
    const std::uint32_t incl = read_u32(rh.data() + 8);
    rec.orig_len = read_u32(rh.data() + 12);
    rec.ts = static_cast<double>(sec) + static_cast<double>(frac) / (nanos_ ? 1e9 : 1e6);
    if (incl > (1u << 24)) {
        throw Error(ErrorCode::truncated_record, "implausible pcap record length in " + path_);
    }
    rec.data.resize(incl);
    in_.read(reinterpret_cast<char*>(rec.data.data()), incl);
    if (in_.gcount() != static_cast<std::streamsize>(incl)) {
        throw Error(ErrorCode::truncated_record, "truncated pcap record body after " + std::to_string(records_) +
                                                     " records: " + path_);
    }
    ++records_;
    return rec;
}

PcapWriter::PcapWriter(const std::string& path, std::uint32_t snaplen) : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw Error(ErrorCode::permission_denied, "cannot create pcap file: " + path);
    put_u32(out_, kPcapMagicMicros);
    put_u16(out_, 2);
    put_u16(out_, 4);
    put_u32(out_, 0);
    put_u32(out_, 0);
    put_u32(out_, snaplen);
    put_u32(out_, kLinktypeEthernet);
}

void PcapWriter::write(const Frame& frame) { write(frame.ts, serialize(frame)); }

void PcapWriter::write(double ts, ByteView data) {
    const auto sec = static_cast<std::uint32_t>(ts);
    auto usec = static_cast<std::uint32_t>((ts - sec) * 1e6 + 0.5);
    if (usec >= 1000000) usec = 999999;
    put_u32(out_, sec);
    put_u32(out_, usec);
    put_u32(out_, static_cast<std::uint32_t>(data.size()));
    put_u32(out_, static_cast<std::uint32_t>(data.size()));
    out_.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

ReplayStats replay_pcap(const std::string& path, const std::function<void(const Frame&)>& sink) {
    PcapReader reader(path);
    ReplayStats stats;
    std::optional<double> first_ts;
    double last_ts = 0.0;
    try {
        while (auto rec = reader.next()) {
            if (!first_ts) first_ts = rec->ts;
            last_ts = rec->ts;
            stats.duration = last_ts - *first_ts;
            auto frame = parse_frame(rec->data, rec->ts);
            if (!frame) {
                ++stats.malformed;
                continue;
            }
            ++stats.frames;
            sink(*frame);
        }
    } catch (const ReplayError&) {
        throw;
    } catch (const Error& e) {
        throw ReplayError(e.code(), e.what(), stats);
    }
    return stats;
}

}  // namespace leakscope
