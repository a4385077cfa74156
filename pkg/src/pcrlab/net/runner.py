"""Master and worker processes talking over localhost TCP.

The master listens; workers connect, say hello, receive their shards and
acknowledge. Each GD iteration the master broadcasts the query vector and
decodes as soon as the scheme's completion condition holds. Results are
tagged with their iteration so stale arrivals are recognised and dropped.
"""
from __future__ import annotations

import logging
import queue
import socket
import subprocess
import sys
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..gd import Dataset, GdConfig, GdTrajectory, run_gd
from ..schemes import Scheme, SchemeSpec, ShardSet, WorkerResult, worker_compute
from ..sim import StragglerModel
from ..tensor import partition
from .protocol import (
    MsgType,
    ProtocolError,
    WireMessage,
    read_message,
    send_message,
    shards_message,
    unpack_shards,
)

log = logging.getLogger(__name__)


class IterationTimeout(RuntimeError):
    def __init__(self, iteration: int, missing: Sequence[int], timeout_s: float):
        self.iteration = iteration
        self.missing = tuple(missing)
        super().__init__(f"iteration {iteration} timed out after {timeout_s:g} s; "
                         f"no result from workers {list(self.missing)}")


@dataclass
class RunnerConfig:
    n: int
    scheme: SchemeSpec
    host: str = "127.0.0.1"
    port: int = 0
    timeout_s: float = 30.0
    accept_timeout_s: float = 30.0
    artificial_delay: StragglerModel = field(default_factory=StragglerModel.none)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.timeout_s <= 0:
            raise ValueError("timeout_s must be positive")
        if self.scheme.n != self.n:
            raise ValueError("scheme.n must equal n")


@dataclass
class NetTrace:
    iteration: int
    waited_for: tuple[int, ...]
    recovery_size: int
    total_s: float
    stale_dropped: int = 0


class Master:
    """Binds on construction so callers can learn the port before launching workers."""

    def __init__(self, config: RunnerConfig, scheme: Scheme | None = None):
        self.config = config
        self.scheme = scheme or Scheme(config.scheme)
        self.server = socket.create_server((config.host, config.port))
        self.port = self.server.getsockname()[1]
        self.conns: dict[int, socket.socket] = {}
        self.dead: set[int] = set()
        self.inbox: queue.Queue = queue.Queue()
        self._t = 0
        self.stale_total = 0
        self._closing = False

    # -- setup -------------------------------------------------------------

    def accept_workers(self, shards: Sequence[ShardSet]) -> None:
        n = self.config.n
        self.server.settimeout(self.config.accept_timeout_s)
        pending: dict[int, socket.socket] = {}
        while len(pending) < n:
            try:
                conn, _ = self.server.accept()
            except socket.timeout:
                missing = sorted(set(range(n)) - set(pending))
                raise TimeoutError(f"workers {missing} never connected") from None
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            conn.settimeout(self.config.accept_timeout_s)
            hello = read_message(conn)
            if hello is None or hello.type is not MsgType.LOAD_SHARDS or hello.shape:
                conn.close()
                raise ProtocolError("expected empty LOAD_SHARDS hello", 0)
            wid = hello.worker_id
            if not 0 <= wid < n or wid in pending:
                conn.close()
                raise ProtocolError(f"bad or duplicate worker id {wid}", 0)
            pending[wid] = conn
        for wid, conn in pending.items():
            s = shards[wid]
            send_message(conn, shards_message(wid, s.shards, s.combo))
        for wid, conn in pending.items():
            ack = read_message(conn)
            if ack is None or ack.type is not MsgType.LOAD_SHARDS:
                raise ProtocolError(f"worker {wid} did not acknowledge its shards", 0)
            conn.settimeout(None)
        self.conns = pending
        for wid, conn in pending.items():
            threading.Thread(target=self._reader, args=(wid, conn), daemon=True).start()

    def _reader(self, wid: int, conn: socket.socket) -> None:
        try:
            while True:
                msg = read_message(conn)
                if msg is None:
                    break
                self.inbox.put((wid, msg))
        except (OSError, ProtocolError) as exc:
            if not self._closing:
                log.warning("worker %d reader stopped: %s", wid, exc)
        self.inbox.put((wid, None))

    # -- per-iteration -----------------------------------------------------

    def _broadcast(self, msg: WireMessage) -> None:
        for wid, conn in self.conns.items():
            if wid in self.dead:
                continue
            try:
                send_message(conn, msg)
            except OSError:
                self.dead.add(wid)

    def __call__(self, v: np.ndarray):
        t = self._t
        self._t += 1
        start = time.monotonic()
        self._broadcast(WireMessage(MsgType.WEIGHTS, t, 0, v.shape, v))
        received: list[int] = []
        results = {}
        stale = 0
        deadline = start + self.config.timeout_s
        while not (received and self.scheme.ready(received)):
            remaining = deadline - time.monotonic()
            try:
                if remaining <= 0:
                    raise queue.Empty
                wid, msg = self.inbox.get(timeout=remaining)
            except queue.Empty:
                missing = [j for j in range(self.config.n) if j not in results]
                raise IterationTimeout(t, missing, self.config.timeout_s) from None
            if msg is None:
                self.dead.add(wid)
                continue
            if msg.type is not MsgType.RESULT or msg.iteration != t:
                stale += 1
                continue
            if msg.worker_id in results:
                continue
            results[msg.worker_id] = WorkerResult(msg.worker_id, msg.data.copy())
            received.append(msg.worker_id)
        out = self.scheme.decode([results[j] for j in received])
        self.stale_total += stale
        trace = NetTrace(t, tuple(received), len(received), time.monotonic() - start, stale)
        return out.gradient_part, trace

    def stop(self) -> None:
        self._closing = True
        self._broadcast(WireMessage(MsgType.STOP, self._t))
        for conn in self.conns.values():
            try:
                conn.close()
            except OSError:
                pass
        self.server.close()

    def run(self, dataset: Dataset, gd_config: GdConfig,
            on_iteration: Callable[[int], None] | None = None,
            launch: Callable[[int], None] | None = None) -> GdTrajectory:
        """Place data, wait for the workers, run GD to completion, send STOP."""
        shards = self.scheme.place(partition(dataset.X, self.config.n))
        if launch is not None:
            launch(self.port)
        try:
            self.accept_workers(shards)
            executor = self
            if on_iteration is not None:
                def executor(v):
                    on_iteration(self._t)
                    return self(v)
            return run_gd(dataset, gd_config, executor)
        finally:
            self.stop()


def master_loop(config: RunnerConfig, dataset: Dataset, gd_config: GdConfig,
                on_iteration: Callable[[int], None] | None = None) -> GdTrajectory:
    return Master(config).run(dataset, gd_config, on_iteration)


def worker_loop(host: str, port: int, worker_id: int,
                delay: StragglerModel | None = None, connect_timeout_s: float = 10.0) -> int:
    """Serve one worker until STOP; returns the number of iterations answered.

    Raises ConnectionError if the master is unreachable or goes away.
    """
    delay = delay or StragglerModel.none()
    rng = np.random.default_rng([delay.seed, worker_id])
    deadline = time.monotonic() + connect_timeout_s
    while True:
        try:
            sock = socket.create_connection((host, port), timeout=max(0.1, connect_timeout_s))
            break
        except OSError as exc:
            if time.monotonic() >= deadline:
                raise ConnectionError(f"cannot reach master at {host}:{port}: {exc}") from exc
            time.sleep(0.05)
    sock.settimeout(None)
    sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    answered = 0
    with sock:
        send_message(sock, WireMessage(MsgType.LOAD_SHARDS, 0, worker_id))
        msg = read_message(sock)
        if msg is None or msg.type is not MsgType.LOAD_SHARDS:
            raise ConnectionError("master closed before sending shards")
        shards, combo = unpack_shards(msg)
        shard_set = ShardSet(worker_id, shards, np.zeros((shards.shape[0], 0)), combo)
        send_message(sock, WireMessage(MsgType.LOAD_SHARDS, 0, worker_id))
        while True:
            try:
                msg = read_message(sock)
            except OSError as exc:
                raise ConnectionError(f"lost master: {exc}") from exc
            if msg is None:
                raise ConnectionError("master closed the connection without STOP")
            if msg.type is MsgType.STOP:
                return answered
            if msg.type is not MsgType.WEIGHTS:
                continue
            pause = float(delay.sample(rng, 1)[0])
            if pause > 0:
                time.sleep(pause)
            res = worker_compute(shard_set, msg.data)
            send_message(sock, WireMessage(MsgType.RESULT, msg.iteration, worker_id,
                                           res.payload.shape, res.payload))
            answered += 1


def spawn_workers(n: int, port: int, host: str = "127.0.0.1",
                  delay: StragglerModel | None = None, connect_timeout_s: float = 10.0) -> list[subprocess.Popen]:
    """Launch ``n`` worker processes via the CLI entry point."""
    delay = delay or StragglerModel.none()
    procs = []
    for j in range(n):
        cmd = [sys.executable, "-m", "pcrlab", "work", "--host", host, "--port", str(port),
               "--worker-id", str(j), "--connect-timeout", str(connect_timeout_s),
               "--delay-p", repr(delay.p), "--delay-s", repr(delay.delay_s), "--seed", str(delay.seed)]
        procs.append(subprocess.Popen(cmd))
    return procs


def reap(procs: Sequence[subprocess.Popen], timeout: float = 5.0) -> list[int | None]:
    codes = []
    for p in procs:
        try:
            codes.append(p.wait(timeout=timeout))
        except subprocess.TimeoutExpired:
            p.kill()
            codes.append(p.wait())
    return codes
