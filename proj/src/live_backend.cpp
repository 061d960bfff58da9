// Raw AF_PACKET capture/injection on Linux. Only compiled with LEAKSCOPE_WITH_LIVE.

#include <arpa/inet.h>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <linux/if_packet.h>
#include <mutex>
#include <net/ethernet.h>
#include <net/if.h>
#include <poll.h>
#include <sys/ioctl.h>
#include <sys/socket.h>
#include <unistd.h>

#include "leakscope/error.hpp"
#include "leakscope/live_backend.hpp"

namespace leakscope {

namespace {

double wall_now() {
    using namespace std::chrono;
    return duration<double>(system_clock::now().time_since_epoch()).count();
}

[[noreturn]] void raise_errno(const std::string& what, int err) {
    if (err == EPERM || err == EACCES) {
        throw Error(ErrorCode::permission_denied,
                    what + ": " + std::strerror(err) +
                        " (raw capture needs root or CAP_NET_RAW; try `sudo setcap cap_net_raw,cap_net_admin+ep <binary>`)");
    }
    if (err == ENODEV || err == ENXIO) throw Error(ErrorCode::not_found, what + ": " + std::strerror(err));
    throw Error(ErrorCode::backend_io, what + ": " + std::strerror(err));
}

}  // namespace

LiveBackend::LiveBackend(const std::string& ifname, bool promiscuous) : ifname_(ifname) {
    if (ifname.empty() || ifname.size() >= IFNAMSIZ) throw Error(ErrorCode::not_found, "bad interface name '" + ifname + "'");
    ifindex_ = static_cast<int>(if_nametoindex(ifname.c_str()));
    if (ifindex_ == 0) throw Error(ErrorCode::not_found, "no such interface '" + ifname + "'");

    fd_ = ::socket(AF_PACKET, SOCK_RAW, htons(ETH_P_ALL));
    if (fd_ < 0) raise_errno("opening raw socket on " + ifname, errno);

    sockaddr_ll addr{};
    addr.sll_family = AF_PACKET;
    addr.sll_protocol = htons(ETH_P_ALL);
    addr.sll_ifindex = ifindex_;
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
        const int err = errno;
        ::close(fd_);
        raise_errno("binding to " + ifname, err);
    }
    if (promiscuous) {
        packet_mreq mr{};
        mr.mr_ifindex = ifindex_;
        mr.mr_type = PACKET_MR_PROMISC;
        if (::setsockopt(fd_, SOL_PACKET, PACKET_ADD_MEMBERSHIP, &mr, sizeof mr) < 0) {
            const int err = errno;
            ::close(fd_);
            raise_errno("enabling promiscuous mode on " + ifname, err);
        }
    }

    ifreq ifr{};
    std::strncpy(ifr.ifr_name, ifname.c_str(), IFNAMSIZ - 1);
    if (::ioctl(fd_, SIOCGIFHWADDR, &ifr) == 0) {
        std::array<std::uint8_t, 6> o{};
        std::memcpy(o.data(), ifr.ifr_hwaddr.sa_data, 6);
        identity_.mac = MacAddr(o);
    }
    if (::ioctl(fd_, SIOCGIFADDR, &ifr) == 0) {
        const auto* sin = reinterpret_cast<sockaddr_in*>(&ifr.ifr_addr);
        identity_.ip = Ipv4Addr::from_u32(ntohl(sin->sin_addr.s_addr));
    }
    if (::ioctl(fd_, SIOCGIFNETMASK, &ifr) == 0) {
        const auto* sin = reinterpret_cast<sockaddr_in*>(&ifr.ifr_netmask);
        const std::uint32_t mask = ntohl(sin->sin_addr.s_addr);
        subnet_ = Subnet::containing(identity_.ip, __builtin_popcount(mask));
    }
}

LiveBackend::~LiveBackend() {
    if (fd_ >= 0) ::close(fd_);
}

Received LiveBackend::receive() {
    std::uint8_t buf[65536];
    sockaddr_ll from{};
    socklen_t fromlen = sizeof from;
    const ssize_t n = ::recvfrom(fd_, buf, sizeof buf, MSG_DONTWAIT, reinterpret_cast<sockaddr*>(&from), &fromlen);
    if (n < 0) {
        if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR) return {RecvStatus::idle, {}};
        raise_errno("receiving on " + ifname_, errno);
    }
    // Our own transmissions are looped back to packet sockets; they are not captured traffic.
    if (from.sll_pkttype == PACKET_OUTGOING) return {RecvStatus::idle, {}};
    auto frame = parse_frame(ByteView(buf, static_cast<std::size_t>(n)), wall_now());
    if (!frame) return {RecvStatus::idle, {}};
    return {RecvStatus::frame, std::move(*frame)};
}

void LiveBackend::send(const Frame& frame) {
    const Bytes wire = serialize(frame);
    std::lock_guard lock(send_mu_);
    sockaddr_ll addr{};
    addr.sll_family = AF_PACKET;
    addr.sll_ifindex = ifindex_;
    addr.sll_halen = 6;
    std::memcpy(addr.sll_addr, frame.dst_mac.octets().data(), 6);
    if (::sendto(fd_, wire.data(), wire.size(), 0, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
        raise_errno("sending on " + ifname_, errno);
    }
}

double LiveBackend::now() const { return wall_now(); }

void LiveBackend::advance(double seconds) {
    pollfd p{fd_, POLLIN, 0};
    ::poll(&p, 1, static_cast<int>(seconds * 1000));
}

std::optional<LocalIdentity> LiveBackend::local_identity() const { return identity_; }

std::optional<Subnet> LiveBackend::subnet() const { return subnet_; }

}  // namespace leakscope
