"""Live control: a WebSocket server wrapped around one engine instance.

Two threads with strictly separated jobs: the audio thread owns the
engine and runs the block loop; the network side owns every socket.
They meet at two bounded queues.  Control messages are validated on
the network side, queued, and drained by the audio thread at block
starts (drop-oldest on overflow, so a flooding client loses its own
stale moves instead of stalling audio).  Snapshots and meter frames
travel the other way.  The audio thread never touches a socket and
never blocks on the network.

Protocol (JSON text frames):

    client -> server: {"type": "set", "param": "DF", "value": 0.6}
                      {"type": "step"}
                      {"type": "get_state"}
                      {"type": "load_steps", "text": "step a: ..."}
    server -> client: {"type": "state", ...}      on connect and on change
                      {"type": "meters", "in_db": ..., "out_db": ...}
                      {"type": "error", "reason": "..."}

The file-loop source exists so the whole live stack runs and tests
without sound hardware; a real device needs the optional sounddevice
package.
"""

from __future__ import annotations

import asyncio
import contextlib
import json
import logging
import math
import queue
import threading
import time
from dataclasses import dataclass

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .audiofile import extract_channel, read_wav
from .engine import DEFAULT_BLOCK_SIZE, Dl4Engine
from .errors import Dl4Error, DomainError, StepFileError
from .mapping import MappingMode
from .sequencer import (
    SCORE_KEYS,
    Sequencer,
    StepList,
    _check_score_value,
    params_to_score,
    parse_step_list,
)

log = logging.getLogger(__name__)

METER_WINDOW_MS = 100.0
METER_RATE_HZ = 10.0
METER_FLOOR_DB = -120.0
METER_CAP_DB = 6.0  # headroom indication above full scale

INBOUND_LIMIT = 64
OUTBOUND_LIMIT = 256


def _to_dbfs(peak: float) -> float:
    if peak <= 10.0 ** (METER_FLOOR_DB / 20.0):
        return METER_FLOOR_DB
    return min(20.0 * math.log10(peak), METER_CAP_DB)


class FileLoopSource:
    """Loops a WAV file as the live input; channel 0 of a stereo file."""

    def __init__(self, path):
        buffer = read_wav(path)
        if buffer.channels > 1:
            buffer = extract_channel(buffer, 0)
        if buffer.frames == 0:
            raise DomainError(f"{path}: file-loop source needs at least one frame")
        self._samples = np.ascontiguousarray(buffer.mono)
        self.sample_rate = buffer.sample_rate
        self._position = 0

    def fill(self, out: np.ndarray) -> None:
        n = len(self._samples)
        needed = len(out)
        written = 0
        while written < needed:
            take = min(needed - written, n - self._position)
            out[written : written + take] = self._samples[self._position : self._position + take]
            self._position = (self._position + take) % n
            written += take


class DeviceSource:
    """Capture from a real input device via the optional sounddevice package."""

    def __init__(self, device_name: str, sample_rate: int = 48000):
        try:
            import sounddevice
        except ImportError:
            raise Dl4Error(
                "device capture needs the 'sounddevice' package (pip install sounddevice)"
            ) from None
        self._sd = sounddevice
        self.device_name = device_name
        self.sample_rate = sample_rate
        self._stream = sounddevice.InputStream(
            device=device_name, channels=1, samplerate=sample_rate, dtype="float64"
        )
        self._stream.start()

    def fill(self, out: np.ndarray) -> None:
        data, overflowed = self._stream.read(len(out))
        if overflowed:
            log.warning("input device overflow; samples dropped")
        out[:] = data[:, 0]


@dataclass
class ServerConfig:
    steps: StepList
    source: object  # FileLoopSource or DeviceSource
    block_size: int = DEFAULT_BLOCK_SIZE
    mapping: MappingMode = MappingMode.RUSSEK
    pace: bool = True  # real-time pacing; tests may run free


class ControlServer:
    """Engine + sequencer + queues; builds the ASGI app that fronts them."""

    def __init__(self, config: ServerConfig):
        self.config = config
        self.sample_rate = config.source.sample_rate
        self._sequencer = Sequencer(config.steps, mapping=config.mapping)
        self._engine = Dl4Engine(self.sample_rate, params=self._sequencer.params)
        self._inbound: queue.Queue = queue.Queue(maxsize=INBOUND_LIMIT)
        self._outbound: queue.Queue = queue.Queue(maxsize=OUTBOUND_LIMIT)
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._snapshot_lock = threading.Lock()
        self._snapshot: dict = {}
        self.dropped_inbound = 0
        self.blocks_processed = 0

        block = config.block_size
        self._in_block = np.zeros(block)
        self._out_block = np.zeros(block)
        meter_blocks = max(1, int(round(METER_WINDOW_MS / 1000.0 * self.sample_rate / block)))
        self._peaks_in = np.zeros(meter_blocks)
        self._peaks_out = np.zeros(meter_blocks)
        self._meter_index = 0
        self._publish_snapshot()

    # -- audio side -------------------------------------------------

    def start(self) -> None:
        self._stop.clear()
        self._thread = threading.Thread(target=self._audio_loop, name="dl4sim-audio", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5.0)
            self._thread = None

    def _audio_loop(self) -> None:
        block = self.config.block_size
        period = block / self.sample_rate
        meter_every = max(1, int(round(self.sample_rate / METER_RATE_HZ / block)))
        deadline = time.perf_counter()
        while not self._stop.is_set():
            changed = self._drain_control()
            if changed:
                self._engine.set_params(self._sequencer.params)
                self._publish_snapshot()
            self.config.source.fill(self._in_block)
            self._engine.process_into(self._in_block, self._out_block, 0, block)
            self._meter_index = (self._meter_index + 1) % len(self._peaks_in)
            self._peaks_in[self._meter_index] = np.max(np.abs(self._in_block))
            self._peaks_out[self._meter_index] = np.max(np.abs(self._out_block))
            self.blocks_processed += 1
            if self.blocks_processed % meter_every == 0:
                self._push(
                    {
                        "type": "meters",
                        "in_db": _to_dbfs(float(self._peaks_in.max())),
                        "out_db": _to_dbfs(float(self._peaks_out.max())),
                    }
                )
            if self.config.pace:
                deadline += period
                pause = deadline - time.perf_counter()
                if pause > 0:
                    time.sleep(pause)
                else:
                    deadline = time.perf_counter()  # fell behind; don't spiral

    def _drain_control(self) -> bool:
        changed = False
        while True:
            try:
                message = self._inbound.get_nowait()
            except queue.Empty:
                return changed
            kind = message["type"]
            if kind == "set":
                self._sequencer.set_direct(message["param"], message["value"])
                changed = True
            elif kind == "step":
                if self._sequencer.advance():
                    changed = True
                else:
                    self._push({"type": "error", "reason": "sequence end"})
            elif kind == "load_steps":
                self._sequencer = Sequencer(message["steps"], mapping=self.config.mapping)
                changed = True

    def _publish_snapshot(self) -> None:
        snapshot = {
            "type": "state",
            "params": params_to_score(self._sequencer.params),
            "mapping": self.config.mapping.value,
            "step_index": self._sequencer.index + 1,
            "step_count": self._sequencer.step_count,
            "step_label": self._sequencer.label,
            "sample_rate": self.sample_rate,
            "in_db": _to_dbfs(float(self._peaks_in.max())),
            "out_db": _to_dbfs(float(self._peaks_out.max())),
        }
        with self._snapshot_lock:
            self._snapshot = snapshot
        self._push(snapshot)

    def _push(self, message: dict) -> None:
        try:
            self._outbound.put_nowait(message)
        except queue.Full:
            with contextlib.suppress(queue.Empty):
                self._outbound.get_nowait()
            with contextlib.suppress(queue.Full):
                self._outbound.put_nowait(message)

    # -- network side -----------------------------------------------

    def snapshot(self) -> dict:
        with self._snapshot_lock:
            return dict(self._snapshot)

    def enqueue(self, message: dict) -> None:
        """Queue a validated control message; drop the oldest on overflow."""
        try:
            self._inbound.put_nowait(message)
        except queue.Full:
            self.dropped_inbound += 1
            log.warning("control queue full; dropping oldest message")
            with contextlib.suppress(queue.Empty):
                self._inbound.get_nowait()
            with contextlib.suppress(queue.Full):
                self._inbound.put_nowait(message)

    def validate(self, message) -> dict | str:
        """Turn a client frame into a queueable message or an error string."""
        if not isinstance(message, dict) or "type" not in message:
            return "message must be an object with a 'type'"
        kind = message["type"]
        if kind == "set":
            param = message.get("param")
            if param not in SCORE_KEYS:
                return f"unknown param {param!r}"
            value = message.get("value")
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                return f"value for {param} must be a number"
            try:
                _check_score_value(param, float(value))
            except DomainError as exc:
                return str(exc)
            return {"type": "set", "param": param, "value": float(value)}
        if kind in ("step", "get_state"):
            return {"type": kind}
        if kind == "load_steps":
            text = message.get("text")
            if not isinstance(text, str):
                return "load_steps needs a 'text' field"
            try:
                steps = parse_step_list(text)
            except StepFileError as exc:
                return f"step file rejected: {exc}"
            return {"type": "load_steps", "steps": steps}
        return f"unknown message type {kind!r}"


def build_app(server: ControlServer, static_dir=None):
    """FastAPI app exposing /ws plus optional static faceplate files."""
    from contextlib import asynccontextmanager

    connections: set = set()
    connections_lock = asyncio.Lock()

    async def broadcast_loop():
        loop = asyncio.get_running_loop()
        while True:
            message = await loop.run_in_executor(None, _next_outbound)
            if message is None:
                continue
            text = json.dumps(message)
            async with connections_lock:
                targets = list(connections)
            for ws in targets:
                try:
                    await ws.send_text(text)
                except Exception:
                    async with connections_lock:
                        connections.discard(ws)

    def _next_outbound():
        try:
            return server._outbound.get(timeout=0.25)
        except queue.Empty:
            return None

    @asynccontextmanager
    async def lifespan(app):
        server.start()
        task = asyncio.create_task(broadcast_loop())
        try:
            yield
        finally:
            task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await task
            server.stop()

    app = FastAPI(lifespan=lifespan)

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        async with connections_lock:
            connections.add(ws)
        await ws.send_text(json.dumps(server.snapshot()))
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    frame = json.loads(raw)
                except json.JSONDecodeError:
                    await ws.send_text(json.dumps({"type": "error", "reason": "invalid JSON"}))
                    continue
                validated = server.validate(frame)
                if isinstance(validated, str):
                    await ws.send_text(json.dumps({"type": "error", "reason": validated}))
                    continue
                if validated["type"] == "get_state":
                    await ws.send_text(json.dumps(server.snapshot()))
                    continue
                server.enqueue(validated)
        except WebSocketDisconnect:
            pass
        finally:
            async with connections_lock:
                connections.discard(ws)

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="faceplate")
    return app


def serve(port: int, config: ServerConfig, static_dir=None, host: str = "127.0.0.1") -> None:
    """Run the control server until interrupted."""
    import uvicorn

    app = build_app(ControlServer(config), static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
