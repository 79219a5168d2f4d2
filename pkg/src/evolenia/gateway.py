"""Network gateway: frame encoding, command protocol, WebSocket server.

The simulation runs on its own thread as the single writer.  Clients talk
JSON over a WebSocket: they receive ``hello`` once, ``frame`` messages at
the service's pace, and one ``ack``/``error`` per command, matched by the
client-chosen ``id``.  Commands are validated before they reach the
queue and applied only between steps, so a malformed or mistimed command
can never corrupt a run.
"""

from __future__ import annotations

import asyncio
import base64
import json
import queue
import threading
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numba
import numpy as np

from .engine import Engine, PatternSample
from .fields import ConfigError
from .genome import N_PARAMS, PARAM_NAMES
from .worldio import _b64, _unb64, genome_gray8, phenotype_rgb8

PROTOCOL_VERSION = 1


class CommandError(ValueError):
    """Raised when a client command is malformed or out of range."""


@numba.njit(cache=True)
def _fnv1a64(data):  # pragma: no cover - compiled
    h = np.uint64(0xCBF29CE484222325)
    prime = np.uint64(0x100000001B3)
    for i in range(data.size):
        h = np.uint64(h ^ np.uint64(data[i]))
        h = np.uint64(h * prime)
    return h


def fnv1a64(data) -> int:
    """64-bit FNV-1a checksum of raw bytes (or any contiguous array's bytes)."""
    if isinstance(data, (bytes, bytearray, memoryview)):
        arr = np.frombuffer(data, dtype=np.uint8)
    else:
        arr = np.ascontiguousarray(data).view(np.uint8).reshape(-1)
    return int(_fnv1a64(arr))


def state_checksum(a: np.ndarray) -> str:
    """Hex checksum of the full-resolution phenospace, little-endian float32."""
    return f"{fnv1a64(np.ascontiguousarray(a, dtype='<f4')):016x}"


def encode_frame(
    engine: Engine,
    downsample: int = 1,
    genome_layer: Optional[tuple[int, int]] = None,
    since_step: int = -1,
) -> dict:
    """Build one frame message from the engine's current state.

    ``genome_layer`` selects a (param, kernel) gene plane to ship alongside
    the phenotype; ``since_step`` filters the event tail to fresh entries.
    ``image_checksum`` covers the encoded RGB bytes so a client can verify
    what it decoded; ``state_checksum`` covers the float state itself.
    """
    st = engine.state
    rgb = phenotype_rgb8(st.A, downsample)
    stats = engine.stats()
    # Controls shown in a UI must be traceable to the server, so every
    # frame restates the rates currently in force.
    stats["mutation_rate"] = engine.config.mutation_rate
    stats["penalization_rate"] = engine.config.penalization_rate
    msg = {
        "type": "frame",
        "step": st.step,
        "width": engine.config.width,
        "height": engine.config.height,
        "downsample": downsample,
        "stats": stats,
        "phenotype_rgb8": base64.b64encode(rgb.tobytes()).decode("ascii"),
        "genome_layer": None,
        "genome_gray8": None,
        "events": [ev.to_dict() for ev in st.events if ev.step >= since_step],
        "state_checksum": state_checksum(st.A),
        "image_checksum": f"{fnv1a64(rgb.tobytes()):016x}",
    }
    if genome_layer is not None:
        p, k = genome_layer
        gray = genome_gray8(st.P[p, k], downsample)
        msg["genome_layer"] = [p, k]
        msg["genome_gray8"] = base64.b64encode(gray.tobytes()).decode("ascii")
    return msg


# ------------------------------------------------------------------ commands


def _need(obj: dict, key: str, kind, what: str):
    if key not in obj:
        raise CommandError(f"{what}: missing field {key!r}")
    val = obj[key]
    if kind is float:
        if not isinstance(val, (int, float)) or isinstance(val, bool):
            raise CommandError(f"{what}: field {key!r} must be a number")
        return float(val)
    if kind is int:
        if not isinstance(val, int) or isinstance(val, bool):
            raise CommandError(f"{what}: field {key!r} must be an integer")
        return int(val)
    if kind is bool:
        if not isinstance(val, bool):
            raise CommandError(f"{what}: field {key!r} must be a boolean")
        return val
    if not isinstance(val, kind):
        raise CommandError(f"{what}: field {key!r} has the wrong type")
    return val


KNOWN_COMMANDS = (
    "set_rates",
    "set_walls",
    "set_view",
    "pause",
    "resume",
    "step",
    "restart",
    "sample",
    "paste",
    "stats",
)


def validate_command(obj) -> dict:
    """Check a decoded client message; returns it normalized or raises."""
    if not isinstance(obj, dict):
        raise CommandError("command must be a JSON object")
    cmd = obj.get("cmd")
    if cmd not in KNOWN_COMMANDS:
        raise CommandError(f"unknown command {cmd!r}")
    if cmd == "set_rates":
        for key in ("mutation_rate", "penalization_rate"):
            if key in obj:
                v = _need(obj, key, float, cmd)
                if not np.isfinite(v) or v < 0.0:
                    raise CommandError(f"{cmd}: {key} must be finite and >= 0")
    elif cmd == "set_walls":
        _need(obj, "enabled", bool, cmd)
        if "rects" in obj:
            rects = obj["rects"]
            if not isinstance(rects, list):
                raise CommandError("set_walls: rects must be a list")
            for r in rects:
                if not (isinstance(r, list) and len(r) == 4 and all(isinstance(v, int) for v in r)):
                    raise CommandError("set_walls: each rect must be [x, y, w, h] integers")
    elif cmd == "set_view":
        layer = obj.get("genome_layer")
        if layer is not None:
            if not (isinstance(layer, list) and len(layer) == 2 and all(isinstance(v, int) for v in layer)):
                raise CommandError("set_view: genome_layer must be [param, kernel]")
            if not (0 <= layer[0] < N_PARAMS):
                raise CommandError(f"set_view: param must be 0..{N_PARAMS - 1} ({', '.join(PARAM_NAMES)})")
        if "downsample" in obj:
            v = _need(obj, "downsample", int, cmd)
            if v < 1:
                raise CommandError("set_view: downsample must be >= 1")
    elif cmd == "step":
        if "n" in obj:
            v = _need(obj, "n", int, cmd)
            if not (1 <= v <= 10000):
                raise CommandError("step: n must be 1..10000")
    elif cmd == "restart":
        if "rng_seed" in obj:
            _need(obj, "rng_seed", int, cmd)
    elif cmd == "sample":
        for key in ("x", "y", "radius"):
            _need(obj, key, int, cmd)
        if obj["radius"] < 0:
            raise CommandError("sample: radius must be >= 0")
    elif cmd == "paste":
        for key in ("x", "y"):
            _need(obj, key, int, cmd)
        if not isinstance(obj.get("pattern"), dict):
            raise CommandError("paste: missing pattern object")
    return obj


def _pattern_to_wire(sample: PatternSample) -> dict:
    return {
        "channels": int(sample.phenotype.shape[0]),
        "n_kernels": int(sample.genotype.shape[1]),
        "side": int(sample.phenotype.shape[-1]),
        "radius": sample.radius,
        "center": list(sample.center),
        "phenotype": _b64(sample.phenotype),
        "genotype": _b64(sample.genotype),
        "averaged_genotype": None
        if sample.averaged_genotype is None
        else [[float(v) for v in row] for row in sample.averaged_genotype],
    }


def _pattern_from_wire(obj: dict) -> PatternSample:
    try:
        c, k, n = int(obj["channels"]), int(obj["n_kernels"]), int(obj["side"])
        radius = int(obj["radius"])
        pheno = _unb64(obj["phenotype"], (c, n, n))
        geno = _unb64(obj["genotype"], (N_PARAMS, k, n, n))
    except (KeyError, ValueError, ConfigError) as exc:
        raise CommandError(f"paste: bad pattern payload: {exc}") from exc
    return PatternSample(pheno, geno, None, (0, 0), radius)


def apply_command(engine: Engine, obj: dict, view: Optional[dict] = None) -> dict:
    """Apply one validated command to the engine; returns the ack result.

    ``view`` is the service's mutable view settings; pause and resume are
    handled by the service loop itself, not here.
    """
    cmd = obj["cmd"]
    try:
        if cmd == "set_rates":
            if "mutation_rate" in obj:
                engine.set_mutation_rate(float(obj["mutation_rate"]))
            if "penalization_rate" in obj:
                engine.set_penalization_rate(float(obj["penalization_rate"]))
            return {
                "mutation_rate": engine.config.mutation_rate,
                "penalization_rate": engine.config.penalization_rate,
            }
        if cmd == "set_walls":
            rects = None
            if "rects" in obj:
                rects = [tuple(r) for r in obj["rects"]]
            engine.set_walls(obj["enabled"], rects)
            return engine.config.walls.to_dict()
        if cmd == "set_view":
            if view is None:
                raise CommandError("set_view: no view to change")
            if "genome_layer" in obj:
                layer = obj["genome_layer"]
                if layer is not None:
                    p, k = layer
                    if not (0 <= k < engine.config.n_kernels):
                        raise CommandError(f"set_view: kernel must be 0..{engine.config.n_kernels - 1}")
                    layer = (p, k)
                view["genome_layer"] = layer
            if "downsample" in obj:
                f = int(obj["downsample"])
                if engine.config.width % f or engine.config.height % f:
                    raise CommandError(f"set_view: {f} does not divide the grid")
                view["downsample"] = f
            return {
                "genome_layer": list(view["genome_layer"]) if view["genome_layer"] else None,
                "downsample": view["downsample"],
            }
        if cmd == "restart":
            engine.restart(obj.get("rng_seed"))
            return {"step": engine.state.step}
        if cmd == "sample":
            sample = engine.sample_pattern(obj["x"], obj["y"], obj["radius"])
            return {"pattern": _pattern_to_wire(sample)}
        if cmd == "paste":
            engine.paste_pattern(_pattern_from_wire(obj["pattern"]), obj["x"], obj["y"])
            return {"step": engine.state.step}
        if cmd == "stats":
            return engine.stats()
    except ConfigError as exc:
        raise CommandError(str(exc)) from exc
    raise CommandError(f"command {cmd!r} is not applicable here")


def run_with_schedule(engine: Engine, schedule: list[dict], n_steps: int) -> list[dict]:
    """Drive a headless run, applying scheduled commands at step boundaries.

    ``schedule`` entries are ``{"step": int, "command": {...}}``; each is
    validated and applied when the engine is about to compute that step.
    Returns the ack results in application order.  Reapplying the same
    schedule to an identical engine reproduces the run bitwise.
    """
    pending = sorted(schedule, key=lambda e: int(e["step"]))  # stable: ties keep list order
    view = {"genome_layer": None, "downsample": 1}
    results = []
    i = 0
    for _ in range(n_steps):
        while i < len(pending) and int(pending[i]["step"]) <= engine.state.step:
            cmd = validate_command(pending[i]["command"])
            if cmd["cmd"] in ("pause", "resume", "step"):
                raise CommandError(f"{cmd['cmd']} has no meaning in a scheduled run")
            results.append(apply_command(engine, cmd, view))
            i += 1
        engine.step()
    return results


# ------------------------------------------------------------------- service


@dataclass
class _Client:
    deliver: Callable[[dict], None]
    since_step: int = -1


class SimulationService:
    """Runs the engine on a worker thread and publishes frames.

    Commands arrive through a bounded queue and apply between steps; each
    carries a reply callback invoked with the ack or error message.  The
    newest frame always wins: a slow client sees fewer frames, never stale
    ones.
    """

    def __init__(
        self,
        engine: Engine,
        steps_per_frame: int = 1,
        downsample: int = 1,
        max_fps: float = 20.0,
    ):
        if steps_per_frame < 1:
            raise ConfigError("steps_per_frame must be >= 1")
        if engine.config.width % downsample or engine.config.height % downsample:
            raise ConfigError(f"downsample {downsample} does not divide the grid")
        self.engine = engine
        self.steps_per_frame = steps_per_frame
        self.max_fps = max_fps
        self.view = {"genome_layer": None, "downsample": downsample}
        self.paused = False
        self._step_credits = 0
        self._commands: queue.Queue = queue.Queue(maxsize=256)
        self._clients: dict[int, _Client] = {}
        self._clients_lock = threading.Lock()
        self._next_client = 0
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None
        self.latest_frame: Optional[dict] = None

    # Client side (any thread) ------------------------------------------------

    def submit(self, obj: dict, reply: Callable[[dict], None]) -> None:
        """Queue one raw command; reply gets the ack/error message later."""
        cid = obj.get("id")
        try:
            validated = validate_command(obj)
        except CommandError as exc:
            reply({"type": "error", "id": cid, "ok": False, "message": str(exc)})
            return
        try:
            self._commands.put_nowait((validated, reply))
        except queue.Full:
            reply({"type": "error", "id": cid, "ok": False, "message": "command queue is full"})

    def add_client(self, deliver: Callable[[dict], None]) -> int:
        with self._clients_lock:
            handle = self._next_client
            self._next_client += 1
            self._clients[handle] = _Client(deliver)
        return handle

    def remove_client(self, handle: int) -> None:
        with self._clients_lock:
            self._clients.pop(handle, None)

    def hello(self) -> dict:
        return {
            "type": "hello",
            "protocol": PROTOCOL_VERSION,
            "config": self.engine.config.to_dict(),
            "view": {
                "genome_layer": self.view["genome_layer"],
                "downsample": self.view["downsample"],
            },
        }

    # Worker side -------------------------------------------------------------

    def start(self) -> None:
        self._thread = threading.Thread(target=self._run, name="evolenia-sim", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=10.0)

    def _apply(self, obj: dict, reply: Callable[[dict], None]) -> None:
        cid = obj.get("id")
        cmd = obj["cmd"]
        try:
            if cmd == "pause":
                self.paused = True
                result = {"paused": True}
            elif cmd == "resume":
                self.paused = False
                self._step_credits = 0
                result = {"paused": False}
            elif cmd == "step":
                self._step_credits += int(obj.get("n", 1))
                result = {"queued_steps": self._step_credits}
            else:
                result = apply_command(self.engine, obj, self.view)
            reply({"type": "ack", "id": cid, "ok": True, "cmd": cmd, "result": result})
        except CommandError as exc:
            reply({"type": "error", "id": cid, "ok": False, "message": str(exc)})

    def _publish(self) -> None:
        layer = self.view["genome_layer"]
        frame = encode_frame(
            self.engine,
            self.view["downsample"],
            tuple(layer) if layer else None,
            since_step=self.engine.state.step - self.steps_per_frame,
        )
        frame["paused"] = self.paused
        self.latest_frame = frame
        with self._clients_lock:
            receivers = list(self._clients.values())
        for client in receivers:
            client.deliver(frame)

    def _run(self) -> None:
        min_period = 1.0 / self.max_fps if self.max_fps > 0 else 0.0
        self._publish()
        while not self._stop.is_set():
            t0 = time.perf_counter()
            worked = False
            while True:
                try:
                    obj, reply = self._commands.get_nowait()
                except queue.Empty:
                    break
                self._apply(obj, reply)
                worked = True
            if not self.paused or self._step_credits > 0:
                for _ in range(self.steps_per_frame):
                    self.engine.step()
                    if self._step_credits > 0:
                        self._step_credits -= 1
                        if self._step_credits == 0:
                            break
                self._publish()
                worked = True
            elif worked:
                self._publish()
            if not worked:
                time.sleep(0.02)
                continue
            spent = time.perf_counter() - t0
            if min_period > spent:
                time.sleep(min_period - spent)


# -------------------------------------------------------------------- server


async def serve(service: SimulationService, host: str = "127.0.0.1", port: int = 8765):
    """Serve the simulation over WebSockets until cancelled."""
    import websockets.asyncio.server

    loop = asyncio.get_running_loop()

    async def handler(ws):
        outbox: asyncio.Queue = asyncio.Queue()
        frame_slot: dict = {"frame": None, "queued": False}

        def deliver(msg: dict) -> None:
            # Runs on the sim thread; coalesce frames, forward acks in order.
            def _post() -> None:
                if msg.get("type") == "frame":
                    frame_slot["frame"] = msg
                    if not frame_slot["queued"]:
                        frame_slot["queued"] = True
                        outbox.put_nowait(("frame", None))
                else:
                    outbox.put_nowait(("msg", msg))

            try:
                loop.call_soon_threadsafe(_post)
            except RuntimeError:
                pass  # loop shut down while the sim thread was publishing

        handle = service.add_client(deliver)
        try:
            await ws.send(json.dumps(service.hello()))
            if service.latest_frame is not None:
                deliver(service.latest_frame)

            async def writer():
                while True:
                    kind, payload = await outbox.get()
                    if kind == "frame":
                        frame_slot["queued"] = False
                        payload = frame_slot["frame"]
                    await ws.send(json.dumps(payload))

            async def reader():
                async for text in ws:
                    try:
                        obj = json.loads(text)
                    except json.JSONDecodeError:
                        deliver({"type": "error", "id": None, "ok": False, "message": "bad JSON"})
                        continue
                    service.submit(obj, deliver)

            done, pending_tasks = await asyncio.wait(
                [asyncio.create_task(writer()), asyncio.create_task(reader())],
                return_when=asyncio.FIRST_COMPLETED,
            )
            for task in pending_tasks:
                task.cancel()
            for task in done:
                exc = task.exception()
                if exc is not None and not isinstance(exc, Exception):
                    raise exc
        finally:
            service.remove_client(handle)

    async with websockets.asyncio.server.serve(handler, host, port) as server:
        await server.serve_forever()
