import asyncio
import base64
import json
import queue
import time

import numpy as np
import pytest

from evolenia.engine import Engine
from evolenia.gateway import (
    CommandError,
    SimulationService,
    apply_command,
    encode_frame,
    fnv1a64,
    run_with_schedule,
    serve,
    state_checksum,
    validate_command,
)

from conftest import blob_seed, small_config


def seeded_engine(rng, **overrides):
    cfg = small_config(**overrides)
    eng = Engine(cfg)
    eng.seed_world([blob_seed(rng, cfg)])
    return eng


# --------------------------------------------------------------- checksums


def test_fnv1a64_published_vectors():
    # classic reference values for the 64-bit FNV-1a function
    assert fnv1a64(b"") == 0xCBF29CE484222325
    assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a64(b"foobar") == 0x85944171F73967E8


def test_state_checksum_tracks_content():
    a = np.zeros((3, 4, 4), dtype=np.float32)
    before = state_checksum(a)
    assert before == f"{fnv1a64(a.tobytes()):016x}"
    a[1, 2, 3] = 0.5
    assert state_checksum(a) != before


# ------------------------------------------------------------------ frames


def test_encode_frame_payload(rng):
    eng = seeded_engine(rng)
    eng.run(3)
    frame = encode_frame(eng, downsample=2, genome_layer=(6, 1), since_step=2)

    assert frame["type"] == "frame" and frame["step"] == 3
    w, h = eng.config.width, eng.config.height
    rgb = np.frombuffer(base64.b64decode(frame["phenotype_rgb8"]), dtype=np.uint8)
    assert rgb.size == (w // 2) * (h // 2) * 3
    gray = np.frombuffer(base64.b64decode(frame["genome_gray8"]), dtype=np.uint8)
    assert gray.size == (w // 2) * (h // 2)
    assert frame["genome_layer"] == [6, 1]

    assert frame["state_checksum"] == state_checksum(eng.state.A)
    assert frame["image_checksum"] == f"{fnv1a64(rgb):016x}"
    assert all(ev["step"] >= 2 for ev in frame["events"])
    assert {ev["step"] for ev in frame["events"]} <= {2}
    # a UI shows only server-acknowledged control values, so the frame
    # restates the rates in force
    assert frame["stats"]["mutation_rate"] == eng.config.mutation_rate
    assert frame["stats"]["penalization_rate"] == eng.config.penalization_rate
    json.dumps(frame)  # wire-serializable as-is


def test_encode_frame_without_genome_layer(rng):
    eng = seeded_engine(rng)
    frame = encode_frame(eng)
    assert frame["genome_layer"] is None and frame["genome_gray8"] is None
    assert frame["stats"]["step"] == 0


# ---------------------------------------------------------------- commands


GOOD_COMMANDS = [
    {"cmd": "set_rates", "mutation_rate": 2.0},
    {"cmd": "set_rates", "penalization_rate": 0.0},
    {"cmd": "set_walls", "enabled": True, "rects": [[1, 2, 3, 4]]},
    {"cmd": "set_walls", "enabled": False},
    {"cmd": "set_view", "genome_layer": [6, 0]},
    {"cmd": "set_view", "genome_layer": None, "downsample": 2},
    {"cmd": "pause"},
    {"cmd": "resume"},
    {"cmd": "step", "n": 5},
    {"cmd": "restart", "rng_seed": 7},
    {"cmd": "sample", "x": 1, "y": 2, "radius": 3},
    {"cmd": "stats"},
]

BAD_COMMANDS = [
    "not a dict",
    {"cmd": "launch_missiles"},
    {"cmd": "set_rates", "mutation_rate": -1.0},
    {"cmd": "set_rates", "mutation_rate": float("nan")},
    {"cmd": "set_rates", "mutation_rate": True},
    {"cmd": "set_walls"},
    {"cmd": "set_walls", "enabled": True, "rects": [[1, 2, 3]]},
    {"cmd": "set_view", "genome_layer": [99, 0]},
    {"cmd": "set_view", "downsample": 0},
    {"cmd": "step", "n": 0},
    {"cmd": "step", "n": 2.5},
    {"cmd": "sample", "x": 1, "y": 2, "radius": -1},
    {"cmd": "sample", "x": 1},
    {"cmd": "paste", "x": 1, "y": 2},
]


@pytest.mark.parametrize("obj", GOOD_COMMANDS)
def test_validate_accepts(obj):
    assert validate_command(obj) is obj


@pytest.mark.parametrize("obj", BAD_COMMANDS)
def test_validate_rejects(obj):
    with pytest.raises(CommandError):
        validate_command(obj)


def test_apply_set_rates_and_stats(rng):
    eng = seeded_engine(rng)
    out = apply_command(eng, {"cmd": "set_rates", "mutation_rate": 3.0, "penalization_rate": 0.5})
    assert out == {"mutation_rate": 3.0, "penalization_rate": 0.5}
    assert eng.config.mutation_rate == 3.0
    stats = apply_command(eng, {"cmd": "stats"})
    assert stats["step"] == 0 and len(stats["mass"]) == eng.config.n_channels


def test_apply_sample_paste_wire_round_trip(rng):
    eng = seeded_engine(rng)
    eng.run(2)
    ack = apply_command(eng, {"cmd": "sample", "x": 24, "y": 24, "radius": 5})
    wire = json.loads(json.dumps(ack["pattern"]))

    other = seeded_engine(np.random.default_rng(7))
    before = other.state.A.copy()
    apply_command(other, {"cmd": "paste", "x": 10, "y": 30, "pattern": wire})
    assert not np.array_equal(other.state.A, before)

    back = apply_command(other, {"cmd": "sample", "x": 10, "y": 30, "radius": 5})["pattern"]
    assert back["phenotype"] == wire["phenotype"]


def test_apply_set_view_checks_divisibility(rng):
    eng = seeded_engine(rng)
    view = {"genome_layer": None, "downsample": 1}
    out = apply_command(eng, {"cmd": "set_view", "downsample": 4, "genome_layer": [0, 2]}, view)
    assert out == {"genome_layer": [0, 2], "downsample": 4}
    with pytest.raises(CommandError):
        apply_command(eng, {"cmd": "set_view", "downsample": 5}, view)
    with pytest.raises(CommandError):
        apply_command(eng, {"cmd": "set_view", "genome_layer": [0, 99]}, view)


def test_apply_restart_resets(rng):
    eng = seeded_engine(rng)
    eng.run(4)
    out = apply_command(eng, {"cmd": "restart"})
    assert out == {"step": 0} and eng.state.step == 0


# ---------------------------------------------------------------- schedules


def test_scheduled_run_is_reproducible(tmp_path):
    schedule = [
        {"step": 2, "command": {"cmd": "set_rates", "mutation_rate": 4.0}},
        {"step": 2, "command": {"cmd": "set_walls", "enabled": True, "rects": [[4, 4, 6, 6]]}},
        {"step": 5, "command": {"cmd": "set_rates", "penalization_rate": 0.0}},
    ]
    finals = []
    for _ in range(2):
        eng = seeded_engine(np.random.default_rng(42))
        acks = run_with_schedule(eng, schedule, 8)
        assert len(acks) == 3
        assert acks[0]["mutation_rate"] == 4.0  # ties at step 2 keep list order
        finals.append(eng.state.A.copy())
    assert np.array_equal(finals[0], finals[1])


def test_schedule_rejects_pacing_commands(rng):
    eng = seeded_engine(rng)
    with pytest.raises(CommandError):
        run_with_schedule(eng, [{"step": 0, "command": {"cmd": "pause"}}], 2)


# ------------------------------------------------------------------ service


def collect_until(pred, inbox, timeout=10.0):
    deadline = time.monotonic() + timeout
    seen = []
    while time.monotonic() < deadline:
        try:
            msg = inbox.get(timeout=0.1)
        except queue.Empty:
            continue
        seen.append(msg)
        if pred(msg):
            return seen, msg
    raise AssertionError(f"nothing matched within {timeout}s; saw {len(seen)} messages")


def test_service_frames_acks_and_pause(rng):
    eng = seeded_engine(rng)
    service = SimulationService(eng, steps_per_frame=2, max_fps=1000.0)
    inbox: queue.Queue = queue.Queue()
    service.add_client(inbox.put)
    service.start()
    try:
        collect_until(lambda m: m["type"] == "frame" and m["step"] >= 4, inbox)

        service.submit({"cmd": "pause", "id": "p1"}, inbox.put)
        _, ack = collect_until(lambda m: m.get("id") == "p1", inbox)
        assert ack["type"] == "ack" and ack["result"] == {"paused": True}

        # drain, then confirm the paused sim publishes nothing new
        time.sleep(0.3)
        while not inbox.empty():
            inbox.get()
        time.sleep(0.3)
        assert inbox.empty()
        frozen = service.engine.state.step

        service.submit({"cmd": "step", "n": 3, "id": "s1"}, inbox.put)
        _, ack = collect_until(lambda m: m.get("id") == "s1", inbox)
        assert ack["ok"]
        collect_until(lambda m: m["type"] == "frame", inbox)
        deadline = time.monotonic() + 5.0
        while service.engine.state.step < frozen + 3 and time.monotonic() < deadline:
            time.sleep(0.02)
        assert service.engine.state.step == frozen + 3  # credits spent, still paused

        service.submit({"cmd": "set_rates", "mutation_rate": 0.5, "id": "r1"}, inbox.put)
        _, ack = collect_until(lambda m: m.get("id") == "r1", inbox)
        assert ack["result"]["mutation_rate"] == 0.5

        service.submit({"cmd": "bogus", "id": "b1"}, inbox.put)
        _, err = collect_until(lambda m: m.get("id") == "b1", inbox)
        assert err["type"] == "error" and not err["ok"]
    finally:
        service.stop()
    assert not service._thread.is_alive()


def test_service_resume_continues(rng):
    eng = seeded_engine(rng)
    service = SimulationService(eng, max_fps=1000.0)
    inbox: queue.Queue = queue.Queue()
    service.add_client(inbox.put)
    service.start()
    try:
        service.submit({"cmd": "pause", "id": "p"}, inbox.put)
        collect_until(lambda m: m.get("id") == "p", inbox)
        service.submit({"cmd": "resume", "id": "r"}, inbox.put)
        _, ack = collect_until(lambda m: m.get("id") == "r", inbox)
        assert ack["result"] == {"paused": False}
        _, frame = collect_until(lambda m: m["type"] == "frame" and not m["paused"], inbox)
        start = frame["step"]
        collect_until(lambda m: m["type"] == "frame" and m["step"] > start, inbox)
    finally:
        service.stop()


def test_service_rejects_bad_downsample(rng):
    with pytest.raises(Exception):
        SimulationService(seeded_engine(rng), downsample=5)


# ------------------------------------------------------------------- server


def test_websocket_round_trip(rng):
    websockets = pytest.importorskip("websockets")

    eng = seeded_engine(rng)
    service = SimulationService(eng, max_fps=1000.0)
    service.start()

    async def scenario():
        import websockets.asyncio.server

        loop = asyncio.get_running_loop()
        server_task = None

        async def run_server():
            await serve(service, "127.0.0.1", 8931)

        server_task = loop.create_task(run_server())
        await asyncio.sleep(0.3)
        try:
            async with websockets.connect("ws://127.0.0.1:8931") as ws:
                hello = json.loads(await ws.recv())
                assert hello["type"] == "hello" and hello["protocol"] == 1
                assert hello["config"]["width"] == eng.config.width

                await ws.send(json.dumps({"cmd": "stats", "id": "q1"}))
                got_ack = got_frame = None
                for _ in range(50):
                    msg = json.loads(await asyncio.wait_for(ws.recv(), timeout=5.0))
                    if msg.get("id") == "q1":
                        got_ack = msg
                    elif msg["type"] == "frame":
                        got_frame = msg
                    if got_ack and got_frame:
                        break
                assert got_ack["type"] == "ack" and "mass" in got_ack["result"]
                assert got_frame["state_checksum"]
                rgb = base64.b64decode(got_frame["phenotype_rgb8"])
                assert f"{fnv1a64(rgb):016x}" == got_frame["image_checksum"]
        finally:
            server_task.cancel()
            try:
                await server_task
            except asyncio.CancelledError:
                pass

    try:
        asyncio.run(scenario())
    finally:
        service.stop()
