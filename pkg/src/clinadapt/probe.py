"""Bandwidth profiler: a chunk server and a windowed sampling client.

Wire protocol, one request per line on a persistent TCP connection::

    CHUNK <n>\\n   ->   exactly n bytes

Throughput is reported in kbps with 1 kilobit = 1024 bits, i.e.
1 byte = 0.0078125 kilobits, and the throttle uses the same unit.
"""

from __future__ import annotations

import logging
import os
import re
import socket
import socketserver
import tempfile
import threading
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from clinadapt.model import AdaptError
from clinadapt.simulate import BandwidthTrace, TraceSample, dumps_trace

log = logging.getLogger(__name__)

KILOBIT_PER_BYTE = Fraction(1, 128)  # 0.0078125
BYTES_PER_KILOBIT = 128
DEFAULT_PORT = 8080
MAX_CHUNK = 1 << 30
_REQUEST = re.compile(rb"CHUNK (\d{1,10})\r?\n")
_PAYLOAD = bytes(range(256)) * 256  # 64 KiB of filler


class BindFailure(AdaptError):
    pass


class ConnectFailure(AdaptError):
    pass


def bytes_to_kbps(n_bytes: int, seconds) -> Fraction:
    return n_bytes * KILOBIT_PER_BYTE / Fraction(seconds)


class TokenBucket:
    """Thread-safe byte bucket; callers may go into debt and then sleep it off."""

    def __init__(self, rate_bytes: float, burst: float):
        self.rate = float(rate_bytes)
        self.burst = float(burst)
        self.tokens = 0.0
        self.last = time.monotonic()
        self._lock = threading.Lock()

    def consume(self, n: int) -> None:
        with self._lock:
            now = time.monotonic()
            self.tokens = min(self.burst, self.tokens + (now - self.last) * self.rate)
            self.last = now
            self.tokens -= n
            wait = -self.tokens / self.rate if self.tokens < 0 else 0.0
        if wait > 0:
            time.sleep(wait)


class _ChunkHandler(socketserver.StreamRequestHandler):
    def handle(self):
        bucket: TokenBucket | None = self.server.bucket
        slice_size = self.server.slice_size
        while True:
            try:
                line = self.rfile.readline(32)
            except OSError:
                return
            if not line:
                return
            m = _REQUEST.fullmatch(line)
            if m is None or int(m.group(1)) > MAX_CHUNK:
                log.debug("malformed request %r, closing", line)
                return
            remaining = int(m.group(1))
            try:
                while remaining:
                    part = min(remaining, slice_size)
                    if bucket is not None:
                        bucket.consume(part)
                    self.wfile.write(_PAYLOAD[:part])
                    remaining -= part
                self.wfile.flush()
            except OSError:
                return


class ChunkServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, host: str = "127.0.0.1", port: int = DEFAULT_PORT, throttle_kbps: float | None = None):
        self.bucket = None
        self.slice_size = len(_PAYLOAD)
        if throttle_kbps:
            rate = float(throttle_kbps) * BYTES_PER_KILOBIT
            # small slices keep the aggregate rate smooth at low throttles
            self.slice_size = int(min(len(_PAYLOAD), max(512, rate / 50)))
            self.bucket = TokenBucket(rate, burst=self.slice_size)
        try:
            super().__init__((host, port), _ChunkHandler)
        except OSError as exc:
            raise BindFailure(f"cannot bind {host}:{port}: {exc}") from exc
        self._thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self.server_address[1]

    def start(self) -> ChunkServer:
        self._thread = threading.Thread(target=self.serve_forever, name="chunk-server", daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self.shutdown()
        self.server_close()
        if self._thread is not None:
            self._thread.join()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


def serve(port: int = DEFAULT_PORT, throttle_kbps: float | None = None, host: str = "0.0.0.0") -> None:
    with ChunkServer(host, port, throttle_kbps) as server:
        log.info("chunk server on %s:%d (throttle %s kbps)", host, server.port, throttle_kbps)
        try:
            while True:
                time.sleep(3600)
        except KeyboardInterrupt:
            pass


@dataclass(frozen=True)
class ProbeConfig:
    host: str = "127.0.0.1"
    port: int = DEFAULT_PORT
    connections: int = 4
    window_ms: int = 4000
    chunk_bytes: int = 125_000  # one megabit
    samples: int = 1
    connect_timeout: float = 3.0

    def __post_init__(self):
        if self.connections < 1:
            raise ValueError("connections must be >= 1")
        if self.window_ms < 100:
            raise ValueError("window_ms must be >= 100")
        if self.chunk_bytes < 1:
            raise ValueError("chunk_bytes must be >= 1")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")


@dataclass(frozen=True)
class WindowResult:
    kbps: Fraction
    n_bytes: int
    flag: str = ""  # "" or "disconnect"


def _connect(config: ProbeConfig) -> socket.socket:
    try:
        return socket.create_connection((config.host, config.port), timeout=config.connect_timeout)
    except OSError as exc:
        raise ConnectFailure(f"cannot connect to {config.host}:{config.port}: {exc}") from exc


def _pull(sock: socket.socket, config: ProbeConfig, deadline: float, out: list, slot: int) -> None:
    request = f"CHUNK {config.chunk_bytes}\n".encode()
    received = 0
    try:
        while True:
            if time.monotonic() >= deadline:
                break
            sock.sendall(request)
            left = config.chunk_bytes
            while left:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    out[slot] = (received, False)
                    return
                sock.settimeout(remaining)
                data = sock.recv(min(left, 65536))
                if not data:
                    out[slot] = (received, True)
                    return
                # partial chunks count: throughput is byte-counting
                received += len(data)
                left -= len(data)
    except socket.timeout:
        pass
    except OSError:
        out[slot] = (received, True)
        return
    out[slot] = (received, False)


def sample_window(config: ProbeConfig) -> WindowResult:
    socks = []
    try:
        for _ in range(config.connections):
            socks.append(_connect(config))
        out = [(0, False)] * len(socks)
        deadline = time.monotonic() + config.window_ms / 1000
        workers = [
            threading.Thread(target=_pull, args=(s, config, deadline, out, i), daemon=True)
            for i, s in enumerate(socks)
        ]
        for w in workers:
            w.start()
        for w in workers:
            w.join()
    finally:
        for s in socks:
            s.close()
    total = sum(n for n, _ in out)
    if any(dropped for _, dropped in out):
        log.warning("connection dropped mid-window after %d bytes; reporting 0 kbps", total)
        return WindowResult(Fraction(0), total, "disconnect")
    return WindowResult(bytes_to_kbps(total, Fraction(config.window_ms, 1000)), total)


def _kbps_value(k: Fraction):
    return k.numerator if k.denominator == 1 else float(k)


def run_probe(config: ProbeConfig, out_path: str | os.PathLike | None = None) -> tuple[BandwidthTrace, list[WindowResult]]:
    """Sample ``config.samples`` windows and write them as a trace CSV.

    A connection failure on the first window aborts without writing anything;
    later failures become flagged 0-kbps rows.
    """
    results = []
    for i in range(config.samples):
        try:
            results.append(sample_window(config))
        except ConnectFailure:
            if i == 0:
                raise
            log.warning("window %d: server unreachable, recording 0 kbps", i)
            results.append(WindowResult(Fraction(0), 0, "connect"))
    trace = BandwidthTrace(
        tuple(TraceSample(i * config.window_ms, _kbps_value(r.kbps)) for i, r in enumerate(results))
    )
    if out_path is not None:
        out_path = Path(out_path)
        fd, tmp = tempfile.mkstemp(dir=out_path.parent or ".", prefix=".probe-", suffix=".csv")
        with os.fdopen(fd, "w") as fh:
            fh.write(dumps_trace(trace))
        os.replace(tmp, out_path)
    return trace, results
