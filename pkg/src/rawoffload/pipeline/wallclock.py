"""Wall-clock mode: the same messages over a TCP byte stream.

Messages are framed as u32 little-endian length + body. The client runs
capture, demosaic, offload-send and result-receive as separate threads joined
by bounded queues, so demosaicing never blocks the offload path.
"""

from __future__ import annotations

import logging
import math
import queue
import socket
import struct
import threading
import time
from dataclasses import dataclass, field
from typing import Sequence

from ..controller import BandwidthSample, Controller, estimate_bandwidth
from ..rawframe import BoundingBox, demosaic_bilinear
from ..scene import SyntheticScene
from .endpoints import EdgeServer, FrameEncoder
from .messages import ResultMessage
from .simulation import FrameMetrics

log = logging.getLogger(__name__)

_LEN = struct.Struct("<I")
MAX_MESSAGE = 64 << 20
_DONE = object()


def send_message(sock: socket.socket, body: bytes) -> None:
    sock.sendall(_LEN.pack(len(body)) + body)


def _recv_exact(sock: socket.socket, n: int) -> bytes | None:
    chunks = bytearray()
    while len(chunks) < n:
        chunk = sock.recv(n - len(chunks))
        if not chunk:
            if chunks:
                raise ConnectionError(f"stream closed mid-message ({len(chunks)}/{n} bytes)")
            return None
        chunks += chunk
    return bytes(chunks)


def recv_message(sock: socket.socket) -> bytes | None:
    """Next message body, or None on a clean end of stream."""
    head = _recv_exact(sock, _LEN.size)
    if head is None:
        return None
    (length,) = _LEN.unpack(head)
    if length > MAX_MESSAGE:
        raise ConnectionError(f"message length {length} exceeds limit")
    body = _recv_exact(sock, length) if length else b""
    if body is None:
        raise ConnectionError("stream closed before message body")
    return body


class ServerThread(threading.Thread):
    """Serves one client connection at a time, requests in order."""

    def __init__(self, server: EdgeServer, host: str = "127.0.0.1", port: int = 0, max_connections: int | None = 1):
        super().__init__(daemon=True)
        self.server = server
        self.max_connections = max_connections
        self._listener = socket.create_server((host, port))
        self.address = self._listener.getsockname()[:2]
        self._stop = threading.Event()

    def run(self) -> None:
        served = 0
        self._listener.settimeout(0.2)
        with self._listener:
            while not self._stop.is_set():
                if self.max_connections is not None and served >= self.max_connections:
                    break
                try:
                    conn, _ = self._listener.accept()
                except socket.timeout:
                    continue
                served += 1
                with conn:
                    self._serve(conn)

    def _serve(self, conn: socket.socket) -> None:
        while not self._stop.is_set():
            try:
                body = recv_message(conn)
            except ConnectionError as exc:
                log.warning("connection dropped: %s", exc)
                return
            if body is None:
                return
            send_message(conn, self.server.handle(body))

    def stop(self) -> None:
        self._stop.set()


@dataclass
class _Sent:
    frame_id: int
    captured: float
    nbytes: int
    tiles: int
    config_id: int
    key_frame: bool
    eab: float
    dropped: bool = False


@dataclass
class WallClockRun:
    frames: list[FrameMetrics]
    detections: dict[int, list[BoundingBox]] = field(default_factory=dict)


def run_client(
    scenes: Sequence[SyntheticScene],
    controller: Controller,
    encoder: FrameEncoder,
    address: tuple[str, int],
    mode: str = "pipelined",
    queue_depth: int = 2,
    timeout: float = 30.0,
) -> WallClockRun:
    if mode not in ("pipelined", "serialized"):
        raise ValueError(f"unknown mode {mode!r}")
    serialized = mode == "serialized"
    offload_q: queue.Queue = queue.Queue(queue_depth)
    demosaic_q: queue.Queue = queue.Queue(queue_depth)
    results_q: queue.Queue = queue.Queue()
    demosaic_done: dict[int, float] = {}
    arrivals: dict[int, float] = {}
    replies: dict[int, ResultMessage] = {}
    sent: dict[int, _Sent] = {}
    lock = threading.Lock()

    sock = socket.create_connection(address, timeout=timeout)

    def capture() -> None:
        for k, scene in enumerate(scenes):
            t = time.perf_counter()
            if serialized:
                demosaic_bilinear(scene.frame)
                with lock:
                    demosaic_done[k] = time.perf_counter()
            else:
                demosaic_q.put((k, scene))
            offload_q.put((k, scene, t))
        offload_q.put(_DONE)
        demosaic_q.put(_DONE)

    def demosaic_worker() -> None:
        while (item := demosaic_q.get()) is not _DONE:
            k, scene = item
            demosaic_bilinear(scene.frame)
            with lock:
                demosaic_done[k] = time.perf_counter()

    def sender() -> None:
        eab = math.inf
        broken = False
        while (item := offload_q.get()) is not _DONE:
            k, scene, captured = item
            latest = None
            while True:
                try:
                    latest = results_q.get_nowait()
                except queue.Empty:
                    break
            if latest is not None:
                controller.receive(latest)
            plan = controller.adapt(eab)
            body = encoder.encode(scene.frame, plan, k).serialize()
            record = _Sent(k, captured, len(body), plan.tile_count, plan.config.id, plan.is_key_frame, eab)
            if broken:
                record.dropped = True
            else:
                try:
                    t0 = time.perf_counter()
                    send_message(sock, body)
                    t1 = time.perf_counter()
                    if t1 > t0:
                        eab = estimate_bandwidth(BandwidthSample(len(body), t0, t1))
                except OSError as exc:
                    log.warning("frame %d dropped: %s", k, exc)
                    record.dropped = broken = True
            with lock:
                sent[k] = record
        try:
            sock.shutdown(socket.SHUT_WR)
        except OSError:
            pass

    def receiver() -> None:
        while True:
            try:
                body = recv_message(sock)
            except (OSError, ConnectionError) as exc:
                log.warning("result stream failed: %s", exc)
                return
            if body is None:
                return
            now = time.perf_counter()
            msg = ResultMessage.deserialize(body)
            with lock:
                arrivals[msg.frame_id] = now
                replies[msg.frame_id] = msg
            if msg.ok:
                results_q.put(msg.detections)

    threads = [threading.Thread(target=f, daemon=True) for f in (capture, sender, receiver)]
    if not serialized:
        threads.append(threading.Thread(target=demosaic_worker, daemon=True))
    for t in threads:
        t.start()
    for t in threads:
        t.join(timeout)
    sock.close()

    frames = []
    for k in range(len(scenes)):
        s = sent.get(k)
        if s is None:
            continue
        arrived = arrivals.get(k)
        dropped = s.dropped or arrived is None or not replies[k].ok
        # render is a timestamp: it happens once both result and RGB exist
        rendered = max(arrived or s.captured, demosaic_done.get(k, s.captured))
        frames.append(
            FrameMetrics(k, s.captured, rendered, s.nbytes, s.tiles, s.config_id, s.key_frame, s.eab, dropped)
        )
    return WallClockRun(frames, {k: m.detections for k, m in replies.items()})
