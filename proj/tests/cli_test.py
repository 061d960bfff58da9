#!/usr/bin/env python3
"""End-to-end checks of the leakscope binary: service on the sim backend, client
subcommands against it, and offline replay against a brute-force pcap count.

usage: cli_test.py path/to/leakscope
"""

import json
import os
import socket
import struct
import subprocess
import sys
import time
import urllib.request
from pathlib import Path

import jsonschema

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "tests" / "fixtures"
SCHEMAS = ROOT / "schemas"

failures = []


def check(cond, what):
    print(("ok   " if cond else "FAIL ") + what)
    if not cond:
        failures.append(what)


def schema(name):
    return json.loads((SCHEMAS / name).read_text())


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def cli(binary, api, *args, timeout=30):
    env = dict(os.environ, LEAKSCOPE_API=api)
    return subprocess.run([binary, *args], capture_output=True, text=True, timeout=timeout, env=env)


def wait_for(url, seconds=15.0):
    deadline = time.time() + seconds
    while time.time() < deadline:
        try:
            with urllib.request.urlopen(url, timeout=1) as r:
                return json.load(r)
        except OSError:
            time.sleep(0.1)
    return None


def start_service(binary, port, *args):
    proc = subprocess.Popen([binary, "run", "--listen", f"127.0.0.1:{port}", *args],
                            stdout=subprocess.PIPE, stderr=subprocess.STDOUT, text=True)
    return proc


def stop_service(proc):
    proc.terminate()
    try:
        proc.wait(timeout=10)
    except subprocess.TimeoutExpired:
        proc.kill()
        proc.wait()
    return proc.stdout.read()


def pcap_totals(path, subnet, mask, gateway):
    """Per-MAC IPv4 totals straight from the file: a frame counts toward its source device,
    else toward its destination device."""
    data = path.read_bytes()
    magic = data[:4]
    endian = "<" if magic in (b"\xd4\xc3\xb2\xa1", b"\x4d\x3c\xb2\xa1") else ">"
    frames, off = [], 24
    while off + 16 <= len(data):
        incl = struct.unpack(endian + "I", data[off + 8:off + 12])[0]
        off += 16
        if off + incl > len(data):
            break
        frames.append(data[off:off + incl])
        off += incl

    def local(ip):
        return ip & mask == subnet & mask and ip != gateway

    devices = set()
    for f in frames:
        if len(f) < 14 or f[6] & 1:
            continue
        et = int.from_bytes(f[12:14], "big")
        if et == 0x0806 and len(f) >= 42 and local(int.from_bytes(f[28:32], "big")):
            devices.add(f[6:12].hex())
        if et == 0x0800 and len(f) >= 34 and local(int.from_bytes(f[26:30], "big")):
            devices.add(f[6:12].hex())
    totals = {d: [0, 0] for d in devices}
    for f in frames:
        if len(f) < 34 or int.from_bytes(f[12:14], "big") != 0x0800:
            continue
        n = int.from_bytes(f[16:18], "big")
        src, dst = f[6:12].hex(), f[0:6].hex()
        if src in devices:
            totals[src][0] += n
        elif dst in devices:
            totals[dst][1] += n
    return totals


def sim_session(binary):
    port = free_port()
    api = f"http://127.0.0.1:{port}"
    proc = start_service(binary, port, "--backend", "sim", "--scenario", str(FIXTURES / "lab5.scn"),
                         "--sim-speed", "10")
    try:
        check(wait_for(api + "/devices") is not None, "sim service answers /devices")

        r = cli(binary, api, "devices", "--json")
        check(r.returncode == 0, "devices --json exits 0")
        devices = json.loads(r.stdout)
        jsonschema.validate(devices, schema("devices.schema.json"))
        check(len(devices["devices"]) == 5, "devices lists the 5 lab devices")
        tv = next(d["device_id"] for d in devices["devices"] if d["ip"] == "192.168.1.12")

        r = cli(binary, api, "block", tv, "--forever", "--json")
        check(r.returncode == 0, "block --forever exits 0")
        rule = json.loads(r.stdout)
        jsonschema.validate(rule, schema("block_response.schema.json"))

        r = cli(binary, api, "watch", "--count", "1", "--json")
        check(r.returncode == 0, "watch --count 1 exits 0")
        lines = [l for l in r.stdout.splitlines() if l.strip()]
        check(len(lines) == 1, "watch --count 1 prints one snapshot")
        snap = json.loads(lines[0])
        jsonschema.validate(snap, schema("traffic_snapshot.schema.json"))
        blocked = {d["device_id"]: d["blocked"] for d in snap["devices"]}
        check(blocked.get(tv) is True and sum(blocked.values()) == 1, "only the blocked tv reports blocked")

        r = cli(binary, api, "rules", "--json")
        check(r.returncode == 0, "rules --json exits 0")
        jsonschema.validate(json.loads(r.stdout), schema("rules.schema.json"))

        r = cli(binary, api, "unblock", rule["rule_id"], "--json")
        check(r.returncode == 0, "unblock of a live rule exits 0")
        jsonschema.validate(json.loads(r.stdout), schema("cancel_response.schema.json"))

        r = cli(binary, api, "unblock", "rule-999")
        check(r.returncode == 2 and "not_found" in r.stderr, "unblock of an unknown rule exits 2 with not_found")

        r = cli(binary, api, "block", tv, "--from", "200", "--until", "100")
        check(r.returncode == 2 and "bad_request" in r.stderr, "reversed window exits 2 with bad_request")

        # The environment overrides --api.
        r = subprocess.run([binary, "--api", "http://127.0.0.1:1", "devices", "--json"], capture_output=True,
                           text=True, timeout=30, env=dict(os.environ, LEAKSCOPE_API=api))
        check(r.returncode == 0, "LEAKSCOPE_API overrides --api")
        r = subprocess.run([binary, "--api", api, "devices", "--json"], capture_output=True, text=True,
                           timeout=30, env={k: v for k, v in os.environ.items() if k != "LEAKSCOPE_API"})
        check(r.returncode == 0, "--api alone reaches the service")
    finally:
        log = stop_service(proc)
    check("healing" in log, "service heals caches on shutdown")

    r = cli(binary, f"http://127.0.0.1:{port}", "devices")
    check(r.returncode == 2, "client against a stopped service exits 2")


def usage_errors(binary):
    r = subprocess.run([binary, "run", "--backend", "live", "--interface", "lo"], capture_output=True,
                       text=True, timeout=30)
    check(r.returncode == 1 and "--gateway-ip" in r.stderr, "live backend without --gateway-ip exits 1")
    r = subprocess.run([binary, "run", "--backend", "pcap", "--pcap", str(FIXTURES / "lab5_mirror.pcap")],
                       capture_output=True, text=True, timeout=30)
    check(r.returncode == 1, "pcap backend without --gateway-ip exits 1")
    r = subprocess.run([binary, "run", "--backend", "sim"], capture_output=True, text=True, timeout=30)
    check(r.returncode == 1, "sim backend without --scenario exits 1")


def replay(binary):
    pcap = FIXTURES / "lab5_mirror.pcap"
    r = subprocess.run([binary, "replay", str(pcap), "--gateway-ip", "192.168.1.1", "--subnet", "192.168.1.0/24",
                        "--json"], capture_output=True, text=True, timeout=60)
    check(r.returncode == 0, "replay --json exits 0")
    out = json.loads(r.stdout)
    jsonschema.validate({"generated_at": out["generated_at"], "devices": out["devices"]},
                        schema("traffic_snapshot.schema.json"))
    oracle = pcap_totals(pcap, 0xC0A80100, 0xFFFFFF00, 0xC0A80101)
    got = {}
    for d in out["devices"]:
        got[d["device_id"]] = [sum(p[1] for p in d["series"]), sum(p[2] for p in d["series"])]
    check(got == oracle, f"replay totals match the brute-force count ({len(oracle)} devices)")
    tv = next(d for d in out["devices"] if d["ip"] == "192.168.1.12")
    check(tv["tracker_count"] == 1 and tv["tracker_hosts"] == ["ad.doubleclick.net"], "replay names the tv tracker")


def pcap_service(binary):
    port = free_port()
    api = f"http://127.0.0.1:{port}"
    proc = start_service(binary, port, "--backend", "pcap", "--pcap", str(FIXTURES / "lab5_mirror.pcap"),
                         "--gateway-ip", "192.168.1.1", "--subnet", "192.168.1.0/24")
    try:
        first = wait_for(api + "/get_traffic")
        check(first is not None, "pcap service answers /get_traffic")
        time.sleep(1.5)
        check(proc.poll() is None, "pcap service keeps serving after the capture ends")
        later = wait_for(api + "/get_traffic")
        check(later is not None and len(later["devices"]) == 5, "pcap service reports the 5 capture devices")
        r = cli(binary, api, "block", later["devices"][0]["device_id"], "--forever", "--json")
        check(r.returncode == 0, "block works against a receive-only backend")
    finally:
        stop_service(proc)


def main():
    if len(sys.argv) != 2:
        print(__doc__)
        return 1
    binary = sys.argv[1]
    for step in (usage_errors, replay, sim_session, pcap_service):
        try:
            step(binary)
        except (jsonschema.ValidationError, json.JSONDecodeError, subprocess.TimeoutExpired, StopIteration,
                KeyError) as e:
            check(False, f"{step.__name__}: {type(e).__name__}: {e}")
    print(f"{len(failures)} failure(s)")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
