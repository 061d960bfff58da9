#!/usr/bin/env python3
"""Regenerate the binary test fixtures under tests/fixtures.

Everything is built with struct and the stdlib ssl module, independent of the C++ code,
so the fixtures double as an outside check on the parsers. Output is deterministic except
for the TLS ClientHello random bytes, which come from OpenSSL.
"""

import random
import ssl
import struct
import sys
from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

GATEWAY_MAC = "50:c7:bf:00:00:01"
GATEWAY_IP = "192.168.1.1"

# name, mac, ip
LAB_DEVICES = [
    ("echo", "44:65:0d:11:22:01", "192.168.1.11"),
    ("tv", "8c:71:f8:11:22:02", "192.168.1.12"),
    ("cam", "2c:aa:8e:11:22:03", "192.168.1.13"),
    ("fridge", "00:1d:25:11:22:04", "192.168.1.14"),
    ("hue", "00:17:88:11:22:05", "192.168.1.15"),
]

REMOTES = ["52.94.236.248", "142.250.80.2", "34.120.0.5", "151.101.1.69", "13.32.0.10"]


def mac_bytes(mac):
    return bytes(int(x, 16) for x in mac.split(":"))


def ip_bytes(ip):
    return bytes(int(x) for x in ip.split("."))


def checksum(data):
    if len(data) % 2:
        data += b"\0"
    s = sum(struct.unpack("!%dH" % (len(data) // 2), data))
    while s >> 16:
        s = (s & 0xFFFF) + (s >> 16)
    return ~s & 0xFFFF


def ipv4(src, dst, proto, payload, ident=0):
    total = 20 + len(payload)
    hdr = struct.pack("!BBHHHBBH4s4s", 0x45, 0, total, ident & 0xFFFF, 0, 64, proto, 0, ip_bytes(src), ip_bytes(dst))
    hdr = hdr[:10] + struct.pack("!H", checksum(hdr)) + hdr[12:]
    return hdr + payload


def udp(src, dst, sport, dport, payload):
    seg = struct.pack("!HHHH", sport, dport, 8 + len(payload), 0) + payload
    pseudo = ip_bytes(src) + ip_bytes(dst) + struct.pack("!BBH", 0, 17, len(seg))
    c = checksum(pseudo + seg) or 0xFFFF
    return ipv4(src, dst, 17, seg[:6] + struct.pack("!H", c) + seg[8:])


def tcp(src, dst, sport, dport, payload, seq=1, ack=0, flags=0x18):
    seg = struct.pack("!HHIIBBHHH", sport, dport, seq, ack, 5 << 4, flags, 65535, 0, 0) + payload
    pseudo = ip_bytes(src) + ip_bytes(dst) + struct.pack("!BBH", 0, 6, len(seg))
    c = checksum(pseudo + seg)
    return ipv4(src, dst, 6, seg[:16] + struct.pack("!H", c) + seg[18:])


def ether(dst, src, ethertype, payload, pad=True):
    frame = mac_bytes(dst) + mac_bytes(src) + struct.pack("!H", ethertype) + payload
    if pad and len(frame) < 60:
        frame += b"\0" * (60 - len(frame))
    return frame


def arp(op, smac, sip, tmac, tip):
    return struct.pack("!HHBBH6s4s6s4s", 1, 0x0800, 6, 4, op, mac_bytes(smac), ip_bytes(sip), mac_bytes(tmac), ip_bytes(tip))


def dns_name(name):
    out = b""
    for label in name.split("."):
        out += bytes([len(label)]) + label.encode()
    return out + b"\0"


def dns_query(ident, name):
    return struct.pack("!HHHHHH", ident, 0x0100, 1, 0, 0, 0) + dns_name(name) + struct.pack("!HH", 1, 1)


def dns_response(ident, name, answers):
    body = struct.pack("!HHHHHH", ident, 0x8180, 1, len(answers), 0, 0) + dns_name(name) + struct.pack("!HH", 1, 1)
    for ip in answers:
        body += struct.pack("!HHHIH", 0xC00C, 1, 1, 300, 4) + ip_bytes(ip)
    return body


def client_hello(sni):
    ctx = ssl.SSLContext(ssl.PROTOCOL_TLS_CLIENT)
    ctx.check_hostname = False
    ctx.verify_mode = ssl.CERT_NONE
    incoming, outgoing = ssl.MemoryBIO(), ssl.MemoryBIO()
    obj = ctx.wrap_bio(incoming, outgoing, server_hostname=sni)
    try:
        obj.do_handshake()
    except ssl.SSLWantReadError:
        pass
    return outgoing.read()


class Pcap:
    def __init__(self, big_endian=False, nanos=False):
        self.order = ">" if big_endian else "<"
        self.nanos = nanos
        magic = 0xA1B23C4D if nanos else 0xA1B2C3D4
        self.buf = bytearray(struct.pack(self.order + "IHHiIII", magic, 2, 4, 0, 0, 65535, 1))

    def add(self, ts, frame, cut=None):
        sec = int(ts)
        frac = int(round((ts - sec) * (1e9 if self.nanos else 1e6)))
        data = frame if cut is None else frame[:cut]
        self.buf += struct.pack(self.order + "IIII", sec, frac, len(frame), len(frame))
        self.buf += data

    def write(self, path):
        path.write_bytes(bytes(self.buf))


def lab_mirror():
    """Mirror-port view of a five-device LAN: devices talk to the gateway directly."""
    rng = random.Random(7)
    cap = Pcap()
    t = 1700000000.0
    for _, mac, ip in LAB_DEVICES:
        t += 0.01
        cap.add(t, ether("ff:ff:ff:ff:ff:ff", mac, 0x0806, arp(1, mac, ip, "00:00:00:00:00:00", GATEWAY_IP)))
        t += 0.001
        cap.add(t, ether(mac, GATEWAY_MAC, 0x0806, arp(2, GATEWAY_MAC, GATEWAY_IP, mac, ip)))
    hosts = {"tv": "ad.doubleclick.net", "echo": "avs-alexa-na.amazon.com", "cam": "api.wyzecam.com"}
    for name, mac, ip in LAB_DEVICES:
        if name in hosts:
            t += 0.02
            q = rng.randrange(65536)
            cap.add(t, ether(GATEWAY_MAC, mac, 0x0800, udp(ip, GATEWAY_IP, 40000 + q % 1000, 53, dns_query(q, hosts[name]))))
            t += 0.005
            cap.add(t, ether(mac, GATEWAY_MAC, 0x0800,
                             udp(GATEWAY_IP, ip, 53, 40000 + q % 1000, dns_response(q, hosts[name], [REMOTES[LAB_DEVICES.index((name, mac, ip)) % 5]]))))
    for i in range(3000):
        t += rng.uniform(0.001, 0.02)
        name, mac, ip = rng.choice(LAB_DEVICES)
        remote = rng.choice(REMOTES)
        size = rng.randrange(0, 1400)
        payload = bytes(rng.getrandbits(8) for _ in range(size))
        kind = rng.random()
        if kind < 0.45:
            pkt = tcp(ip, remote, 50000 + i % 100, 443, payload, seq=i)
            cap.add(t, ether(GATEWAY_MAC, mac, 0x0800, pkt))
        elif kind < 0.85:
            pkt = tcp(remote, ip, 443, 50000 + i % 100, payload, seq=i)
            cap.add(t, ether(mac, GATEWAY_MAC, 0x0800, pkt))
        elif kind < 0.93:
            pkt = udp(ip, remote, 50000 + i % 100, 9000 + i % 3, payload)
            cap.add(t, ether(GATEWAY_MAC, mac, 0x0800, pkt))
        elif kind < 0.96:
            # device to device, e.g. casting from the echo to the tv
            _, mac2, ip2 = rng.choice([d for d in LAB_DEVICES if d[1] != mac])
            cap.add(t, ether(mac2, mac, 0x0800, udp(ip, ip2, 5353, 5353, payload[:200])))
        elif kind < 0.98:
            # IPv6 multicast noise, ignored by accounting
            cap.add(t, ether("33:33:00:00:00:fb", mac, 0x86DD, payload[:120]))
        else:
            # runt frame: shorter than an Ethernet header
            cap.add(t, payload[:8] if size >= 8 else b"\x01\x02\x03")
    cap.write(OUT / "lab5_mirror.pcap")


def tls_exchange(cap, t, dev_mac, dev_ip, remote, sni, sport, data_len):
    cap.add(t, ether(GATEWAY_MAC, dev_mac, 0x0800, tcp(dev_ip, remote, sport, 443, b"", seq=100, flags=0x02)))
    cap.add(t + 0.01, ether(dev_mac, GATEWAY_MAC, 0x0800, tcp(remote, dev_ip, 443, sport, b"", seq=900, ack=101, flags=0x12)))
    cap.add(t + 0.02, ether(GATEWAY_MAC, dev_mac, 0x0800, tcp(dev_ip, remote, sport, 443, b"", seq=101, ack=901, flags=0x10)))
    hello = client_hello(sni) if sni else b"\x17\x03\x03\x00\x10" + b"\x00" * 16
    cap.add(t + 0.03, ether(GATEWAY_MAC, dev_mac, 0x0800, tcp(dev_ip, remote, sport, 443, hello, seq=101, ack=901)))
    cap.add(t + 0.05, ether(dev_mac, GATEWAY_MAC, 0x0800, tcp(remote, dev_ip, 443, sport, b"\x16" * data_len, seq=901, ack=101 + len(hello))))


def dns_exchange(cap, t, dev_mac, dev_ip, name, answers, ident):
    cap.add(t, ether(GATEWAY_MAC, dev_mac, 0x0800, udp(dev_ip, GATEWAY_IP, 41000 + ident, 53, dns_query(ident, name))))
    cap.add(t + 0.004, ether(dev_mac, GATEWAY_MAC, 0x0800, udp(GATEWAY_IP, dev_ip, 53, 41000 + ident, dns_response(ident, name, answers))))


def trackers():
    """tv resolves and talks to ad.doubleclick.net; echo only resolves tapad; cam talks to a benign host."""
    cap = Pcap()
    tv, echo, cam = LAB_DEVICES[1], LAB_DEVICES[0], LAB_DEVICES[2]
    t = 1700000100.0
    for _, mac, ip in (tv, echo, cam):
        cap.add(t, ether(GATEWAY_MAC, mac, 0x0806, arp(1, mac, ip, "00:00:00:00:00:00", GATEWAY_IP)))
        cap.add(t + 0.001, ether(mac, GATEWAY_MAC, 0x0806, arp(2, GATEWAY_MAC, GATEWAY_IP, mac, ip)))
        t += 0.01
    dns_exchange(cap, t + 0.1, tv[1], tv[2], "ad.doubleclick.net", ["142.250.80.2"], 1)
    tls_exchange(cap, t + 0.2, tv[1], tv[2], "142.250.80.2", "ad.doubleclick.net", 50001, 600)
    dns_exchange(cap, t + 0.3, echo[1], echo[2], "pixel.tapad.com", ["34.120.0.5"], 2)
    dns_exchange(cap, t + 0.4, cam[1], cam[2], "api.wyzecam.com", ["151.101.1.69"], 3)
    tls_exchange(cap, t + 0.5, cam[1], cam[2], "151.101.1.69", "api.wyzecam.com", 50002, 900)
    cap.write(OUT / "trackers.pcap")


def tracker_conflict():
    """DNS and SNI disagree about the same remote IP; SNI must win either way."""
    cap = Pcap()
    tv, fridge = LAB_DEVICES[1], LAB_DEVICES[3]
    t = 1700000200.0
    for _, mac, ip in (tv, fridge):
        cap.add(t, ether(GATEWAY_MAC, mac, 0x0806, arp(1, mac, ip, "00:00:00:00:00:00", GATEWAY_IP)))
        t += 0.01
    # tv: DNS says doubleclick, handshake names a benign host.
    dns_exchange(cap, t + 0.1, tv[1], tv[2], "ad.doubleclick.net", ["142.250.80.2"], 1)
    tls_exchange(cap, t + 0.2, tv[1], tv[2], "142.250.80.2", "www.example.com", 50001, 500)
    # fridge: DNS says benign, handshake names doubleclick.
    dns_exchange(cap, t + 0.3, fridge[1], fridge[2], "cdn.example.net", ["13.32.0.10"], 2)
    tls_exchange(cap, t + 0.4, fridge[1], fridge[2], "13.32.0.10", "stats.g.doubleclick.net", 50002, 500)
    cap.write(OUT / "tracker_conflict.pcap")


def small_variants():
    frame = ether(GATEWAY_MAC, LAB_DEVICES[0][1], 0x0800, udp(LAB_DEVICES[0][2], "52.94.236.248", 1234, 9000, b"hello"))
    for name, big, nanos in (("small_be.pcap", True, False), ("small_ns.pcap", False, True)):
        cap = Pcap(big_endian=big, nanos=nanos)
        cap.add(1700000300.25, frame)
        cap.add(1700000300.5, frame)
        cap.write(OUT / name)
    cap = Pcap()
    cap.add(1700000300.25, frame)
    cap.add(1700000300.5, frame, cut=20)
    cap.write(OUT / "truncated.pcap")


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    lab_mirror()
    trackers()
    tracker_conflict()
    small_variants()
    (OUT / "client_hello_doubleclick.bin").write_bytes(client_hello("ad.doubleclick.net"))
    (OUT / "client_hello_nosni.bin").write_bytes(client_hello(None))
    print("fixtures written to", OUT, file=sys.stderr)


if __name__ == "__main__":
    main()
