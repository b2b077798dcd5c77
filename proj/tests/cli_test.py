"""End-to-end checks of the `cell` command line. Usage: cli_test.py <path-to-cell>"""

import base64
import json
import os
import re
import signal
import socket
import subprocess
import sys
import tempfile
import time
import unittest
import urllib.request

CELL = None
PORTS = re.compile(r"wire=udp:(\d+) http=tcp:(\d+)")
# Start orientation (wrist at 30 deg); straight down would sit on the wrist singularity.
TOOL = "0,0.8660254037844386,0,0.5"


class Server:
    def __init__(self, *extra):
        self.proc = subprocess.Popen(
            [CELL, "run", "--host", "127.0.0.1", "--wire-port", "0", "--http-port", "0", *extra],
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
        )
        line = self.proc.stdout.readline()
        m = PORTS.search(line)
        if not m:
            self.proc.kill()
            raise RuntimeError(f"no port line: {line!r}")
        self.wire, self.http = int(m.group(1)), int(m.group(2))
        self.banner = line

    def status(self):
        with urllib.request.urlopen(f"http://127.0.0.1:{self.http}/rw/status", timeout=2) as r:
            return json.load(r)

    def stop(self):
        """SIGTERM, then (exit code, remaining stdout)."""
        if self.proc.poll() is None:
            self.proc.send_signal(signal.SIGTERM)
        out, _ = self.proc.communicate(timeout=5)
        return self.proc.returncode, out

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        if self.proc.poll() is None:
            self.proc.kill()
        self.proc.communicate()


def cell(*args, timeout=120):
    return subprocess.run([CELL, *args], capture_output=True, text=True, timeout=timeout)


def read_session(path):
    with open(path) as f:
        lines = [json.loads(l) for l in f if l.strip()]
    return lines[0], lines[1:]


def dist(a, b):
    return sum((x - y) ** 2 for x, y in zip(a, b)) ** 0.5


class CliTest(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def path(self, name, content=None):
        p = os.path.join(self.tmp.name, name)
        if content is not None:
            with open(p, "w") as f:
                f.write(content)
        return p

    def square(self):
        return self.path(
            "square.csv",
            "# x,y,z,qw,qx,qy,qz,gripper,annotation\n"
            f"540,30,760,{TOOL},close,item_completed\n"
            f"540,-30,760,{TOOL}\n"
            f"520,-30,730,{TOOL}\n"
            f"520,30,730,{TOOL},open,item_completed\n",
        )

    def test_run_reports_ports_and_stops_cleanly(self):
        with Server() as s:
            self.assertNotEqual(s.wire, 0)
            self.assertNotEqual(s.http, 0)
            self.assertEqual(s.status()["mode"], "DISCONNECTED")
            rc, out = s.stop()
            self.assertEqual(rc, 0)
            self.assertIn("stopped after", out)

    def test_sigint_exits_zero(self):
        with Server() as s:
            s.proc.send_signal(signal.SIGINT)
            self.assertEqual(s.proc.wait(timeout=5), 0)

    def test_port_in_use_is_usage_error(self):
        with Server() as s:
            r = cell("run", "--host", "127.0.0.1", "--wire-port", "0", "--http-port", str(s.http), "--duration-s", "1")
            self.assertEqual(r.returncode, 2)
            self.assertIn(str(s.http), r.stderr)

    def test_duration_limit(self):
        t0 = time.monotonic()
        r = cell("run", "--host", "127.0.0.1", "--wire-port", "0", "--http-port", "0", "--duration-s", "0.5")
        self.assertEqual(r.returncode, 0)
        self.assertLess(time.monotonic() - t0, 5)

    def test_usage_errors(self):
        self.assertEqual(cell().returncode, 2)
        self.assertEqual(cell("frobnicate").returncode, 2)
        self.assertEqual(cell("run", "--wire-port", "70000").returncode, 2)
        self.assertEqual(cell("fault").returncode, 2)
        self.assertEqual(cell("teleop").returncode, 2)
        self.assertEqual(cell("analyze", "sus", self.path("missing.csv")).returncode, 2)
        bad = self.path("bad.conf", "loop.rate_hz = fast\n")
        self.assertEqual(cell("run", "--config", bad, "--duration-s", "0.1").returncode, 2)

    def test_teleop_square_records_session(self):
        log = self.path("demo.cellsession")
        with Server() as s:
            r = cell("teleop", self.square(), "--wire-port", str(s.wire), "--http-port", str(s.http), "--record", log)
            self.assertEqual(r.returncode, 0, r.stderr)
            final = s.status()["actual"]["position_mm"]
            self.assertLess(dist(final, [520, 30, 730]), 0.5)
            self.assertEqual(s.status()["gripper"], "OPEN")
        header, records = read_session(log)
        self.assertEqual(header["schema"], "cell-session/1")
        self.assertGreater(len(records), 100)
        self.assertEqual(sum(1 for x in records if x.get("annotation") == "item_completed"), 2)
        times = [x["t_us"] for x in records]
        self.assertTrue(all(b > a for a, b in zip(times, times[1:])))

        m = cell("analyze", "metrics", log)
        self.assertEqual(m.returncode, 0, m.stderr)
        self.assertRegex(m.stdout, r"n_max\D+2")

    def test_unreachable_waypoint_fails_and_is_recorded(self):
        log = self.path("bad.cellsession")
        wp = self.path("far.csv", f"540,0,760,{TOOL}\n3000,0,760,{TOOL}\n")
        with Server() as s:
            r = cell("teleop", wp, "--wire-port", str(s.wire), "--http-port", str(s.http), "--record", log)
            self.assertEqual(r.returncode, 1)
            self.assertEqual(s.status()["mode"], "ERROR")
            # A controller in ERROR is refused up front.
            again = cell("teleop", self.square(), "--wire-port", str(s.wire), "--http-port", str(s.http))
            self.assertNotEqual(again.returncode, 0)
        _, records = read_session(log)
        self.assertEqual(records[-1]["mode"], "ERROR")

    def test_fault_reports_title_and_state(self):
        with Server() as s:
            r = cell("fault", "90518", "--http-port", str(s.http))
            self.assertEqual(r.returncode, 0, r.stderr)
            self.assertIn("Emergency Stop", r.stdout)
            self.assertIn("emergencystop", r.stdout)
            r = cell("fault", "50027", "--http-port", str(s.http))
            self.assertIn("motoroff", r.stdout)
            self.assertEqual(cell("fault", "12345", "--http-port", str(s.http)).returncode, 2)

    def test_replay_speed_scales_duration(self):
        log = self.path("demo.cellsession")
        with Server() as s:
            self.assertEqual(
                cell("teleop", self.square(), "--wire-port", str(s.wire), "--http-port", str(s.http), "--record", log).returncode, 0
            )
        _, records = read_session(log)
        recorded_s = (records[-1]["t_us"] - records[0]["t_us"]) / 1e6
        with Server() as s:
            t0 = time.monotonic()
            # At 2x the recorded path outruns the speed clamp, so only timing is checked here.
            r = cell("replay", log, "--speed", "2", "--wire-port", str(s.wire))
            elapsed = time.monotonic() - t0
            self.assertEqual(r.returncode, 0, r.stderr)
        # Process start-up is included in `elapsed`, so allow it on top of the 2% band.
        self.assertGreater(elapsed, recorded_s / 2 * 0.98)
        self.assertLess(elapsed, recorded_s / 2 * 1.02 + 0.3)

    def test_replay_rejects_foreign_file(self):
        other = self.path("other.jsonl", '{"schema":"something-else/3"}\n')
        self.assertEqual(cell("replay", other, "--wire-port", "9").returncode, 2)

    def test_analyze(self):
        sus = self.path("sus.csv", "# responses\n3,3,3,3,3,3,3,3,3,3\n5,1,5,1,5,1,5,1,5,1\n")
        r = cell("analyze", "sus", sus)
        self.assertEqual(r.returncode, 0)
        self.assertIn("mean: 75", r.stdout)
        bad = self.path("sus_bad.csv", "3,3,3,3,3,3,3,3,3,9\n")
        self.assertEqual(cell("analyze", "sus", bad).returncode, 2)
        cmp_ = self.path("cmp.csv", "AR,70.5,23.14,5\nSpaceMouse,63.0,17.54,5\n")
        r = cell("analyze", "compare", cmp_)
        self.assertEqual(r.returncode, 0)
        self.assertIn("t = 0.578", r.stdout)
        self.assertIn("d = 0.37", r.stdout)

    def test_synthetic_camera_streams_frames(self):
        with Server("--synth-scene", "plane:600,noise:2", "--seed", "3") as s:
            self.assertIn("pointcloud=on", s.banner)
            sock = socket.create_connection(("127.0.0.1", s.http), timeout=3)
            key = base64.b64encode(os.urandom(16)).decode()
            sock.sendall(
                (
                    "GET /stream/pointcloud HTTP/1.1\r\nHost: 127.0.0.1\r\nUpgrade: websocket\r\n"
                    f"Connection: Upgrade\r\nSec-WebSocket-Key: {key}\r\nSec-WebSocket-Version: 13\r\n\r\n"
                ).encode()
            )
            buf = b""
            while b"\r\n\r\n" not in buf:
                buf += sock.recv(4096)
            self.assertIn(b" 101 ", buf.split(b"\r\n")[0])
            rest = buf.split(b"\r\n\r\n", 1)[1]
            while len(rest) < 2:
                rest += sock.recv(4096)
            self.assertEqual(rest[0] & 0x0F, 2, "binary frame")
            sock.close()


if __name__ == "__main__":
    CELL = os.path.abspath(sys.argv.pop(1))
    unittest.main(verbosity=2)
