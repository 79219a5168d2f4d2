"""World persistence: binary snapshots, pattern files, run recordings.

Snapshot layout: magic ``LOEE``, little-endian int32 version, uint32
header length, UTF-8 JSON header (config, dims, step, rng state, event
tail, counters), then the raw float32 little-endian phenospace array
``(channels, width, height)`` followed by the genospace array
``(params, kernels, width, height)``, both C-order.  Loading a snapshot
and saving it again is byte-identical.
"""

from __future__ import annotations

import base64
import json
import os
import struct
from collections import deque
from typing import Optional

import numpy as np

from .engine import Engine, PatternSample, SimConfig, WorldState
from .evolution import EventRecord
from .fields import ConfigError
from .genome import N_PARAMS, GeneSchema

SNAPSHOT_MAGIC = b"LOEE"
SNAPSHOT_VERSION = 1
PATTERN_FORMAT = "evolenia-pattern"


class SnapshotError(ValueError):
    """Base class for unreadable snapshot files."""


class SnapshotMagicError(SnapshotError):
    pass


class SnapshotVersionError(SnapshotError):
    pass


class SnapshotSizeError(SnapshotError):
    pass


class SnapshotFormatError(SnapshotError):
    pass


def save_snapshot(path, config: SimConfig, state: WorldState) -> None:
    """Write the complete world to one self-describing binary file."""
    if state is None:
        raise ConfigError("cannot snapshot an unseeded engine")
    header = {
        "config": config.to_dict(),
        "width": config.width,
        "height": config.height,
        "channels": config.n_channels,
        "n_kernels": config.n_kernels,
        "n_params": N_PARAMS,
        "step": state.step,
        "rng_state": state.rng.bit_generator.state,
        "events": [ev.to_dict() for ev in state.events],
        "counters": {"mutations": state.mutations, "penalizations": state.penalizations},
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(SNAPSHOT_MAGIC)
        f.write(struct.pack("<i", SNAPSHOT_VERSION))
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        f.write(np.ascontiguousarray(state.A, dtype="<f4").tobytes())
        f.write(np.ascontiguousarray(state.P, dtype="<f4").tobytes())


def load_snapshot(path) -> tuple[SimConfig, WorldState]:
    """Read a snapshot back; inverse of save_snapshot, bit for bit."""
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != SNAPSHOT_MAGIC:
        raise SnapshotMagicError(f"{path}: not a snapshot file (magic {raw[:4]!r})")
    (version,) = struct.unpack_from("<i", raw, 4)
    if version != SNAPSHOT_VERSION:
        raise SnapshotVersionError(f"{path}: unsupported snapshot version {version}")
    (hlen,) = struct.unpack_from("<I", raw, 8)
    if len(raw) < 12 + hlen:
        raise SnapshotSizeError(f"{path}: truncated header")
    try:
        header = json.loads(raw[12 : 12 + hlen].decode("utf-8"))
        config = SimConfig.from_dict(header["config"])
        step = int(header["step"])
        rng_state = header["rng_state"]
        events = [EventRecord.from_dict(d) for d in header["events"]]
        counters = header.get("counters", {})
    except (KeyError, ValueError, TypeError) as exc:
        if isinstance(exc, SnapshotError):
            raise
        raise SnapshotFormatError(f"{path}: bad snapshot header: {exc}") from exc
    c, w, h, k = config.n_channels, config.width, config.height, config.n_kernels
    if (header["width"], header["height"], header["channels"], header["n_kernels"]) != (w, h, c, k):
        raise SnapshotFormatError(f"{path}: header dims disagree with embedded config")
    if header["n_params"] != N_PARAMS:
        raise SnapshotFormatError(f"{path}: unsupported gene count {header['n_params']}")
    a_bytes = c * w * h * 4
    p_bytes = N_PARAMS * k * w * h * 4
    body = raw[12 + hlen :]
    if len(body) != a_bytes + p_bytes:
        raise SnapshotSizeError(
            f"{path}: body holds {len(body)} bytes, expected {a_bytes + p_bytes}"
        )
    a = np.frombuffer(body[:a_bytes], dtype="<f4").reshape(c, w, h).copy()
    p = np.frombuffer(body[a_bytes:], dtype="<f4").reshape(N_PARAMS, k, w, h).copy()
    rng = np.random.default_rng()
    if rng_state.get("bit_generator") != rng.bit_generator.state["bit_generator"]:
        raise SnapshotFormatError(
            f"{path}: snapshot used rng {rng_state.get('bit_generator')!r}"
        )
    rng.bit_generator.state = rng_state
    state = WorldState(
        step=step,
        A=a,
        P=p,
        rng=rng,
        events=deque(events, maxlen=config.event_log_size),
        mutations=int(counters.get("mutations", 0)),
        penalizations=int(counters.get("penalizations", 0)),
    )
    return config, state


# ------------------------------------------------------------------ patterns


def _b64(arr: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(arr, dtype="<f4").tobytes()).decode("ascii")


def _unb64(text: str, shape: tuple[int, ...]) -> np.ndarray:
    flat = np.frombuffer(base64.b64decode(text), dtype="<f4")
    expected = int(np.prod(shape))
    if flat.size != expected:
        raise ConfigError(f"pattern payload holds {flat.size} floats, expected {expected}")
    return flat.reshape(shape).copy()


def save_pattern(path, sample: PatternSample, schema: GeneSchema) -> None:
    """Write a sampled creature as a portable JSON pattern file."""
    n = sample.phenotype.shape[-1]
    doc = {
        "format": PATTERN_FORMAT,
        "version": 1,
        "channels": int(sample.phenotype.shape[0]),
        "n_kernels": int(sample.genotype.shape[1]),
        "n_params": int(sample.genotype.shape[0]),
        "side": n,
        "radius": sample.radius,
        "center": list(sample.center),
        "schema": schema.to_dict(),
        "phenotype": _b64(sample.phenotype),
        "genotype": _b64(sample.genotype),
        "averaged_genotype": None
        if sample.averaged_genotype is None
        else [[float(v) for v in row] for row in sample.averaged_genotype],
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=1, sort_keys=True)
        f.write("\n")


def load_pattern(path) -> tuple[PatternSample, GeneSchema]:
    """Read a pattern file; returns the sample and the schema it was bred under."""
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    if doc.get("format") != PATTERN_FORMAT:
        raise ConfigError(f"{path}: not a pattern file")
    c, k, p, n = doc["channels"], doc["n_kernels"], doc["n_params"], doc["side"]
    pheno = _unb64(doc["phenotype"], (c, n, n))
    geno = _unb64(doc["genotype"], (p, k, n, n))
    averaged = doc.get("averaged_genotype")
    if averaged is not None:
        averaged = np.asarray(averaged, dtype=np.float64)
        if averaged.shape != (p, k):
            raise ConfigError(f"{path}: averaged genotype shape {averaged.shape}")
    sample = PatternSample(pheno, geno, averaged, tuple(doc.get("center") or (0, 0)), int(doc["radius"]))
    return sample, GeneSchema.from_dict(doc["schema"])


# ----------------------------------------------------------------- rendering


def block_mean(field: np.ndarray, factor: int) -> np.ndarray:
    """Downsample ``(..., width, height)`` by averaging factor x factor blocks."""
    if factor < 1:
        raise ConfigError(f"downsample factor must be >= 1, got {factor}")
    w, h = field.shape[-2:]
    if w % factor or h % factor:
        raise ConfigError(f"factor {factor} does not divide grid {w}x{h}")
    shape = field.shape[:-2] + (w // factor, factor, h // factor, factor)
    return field.reshape(shape).mean(axis=(-3, -1), dtype=np.float64)


def _quantize(img: np.ndarray) -> np.ndarray:
    # Round half up so the byte image is reproducible across platforms.
    return np.clip(np.floor(img * 255.0 + 0.5), 0.0, 255.0).astype(np.uint8)


def phenotype_rgb8(a: np.ndarray, factor: int = 1) -> np.ndarray:
    """Render channels to an ``(rows, cols, 3)`` byte image, row = y axis."""
    small = block_mean(a, factor)
    c = small.shape[0]
    rgb = np.zeros((3,) + small.shape[1:], dtype=np.float64)
    rgb[: min(c, 3)] = small[:3]
    return _quantize(rgb.transpose(2, 1, 0))


def genome_gray8(p_layer: np.ndarray, factor: int = 1) -> np.ndarray:
    """Render one gene layer to an ``(rows, cols)`` byte image."""
    return _quantize(block_mean(p_layer, factor).T)


class RecordingWriter:
    """Streams per-step stats (and optional PNG frames) into a directory.

    Produces ``config.json``, an append-only ``stats.jsonl`` with one line
    per step (stats, fresh events, commands applied before the step), and
    ``frames/NNNNNNNN.png`` every ``png_every`` steps when enabled.  Wall
    clock speed is deliberately left out so identical runs record
    identical bytes.
    """

    def __init__(self, directory, png_every: int = 0, downsample: int = 1):
        self.directory = str(directory)
        self.png_every = int(png_every)
        self.downsample = int(downsample)
        os.makedirs(self.directory, exist_ok=True)
        if self.png_every:
            os.makedirs(os.path.join(self.directory, "frames"), exist_ok=True)
        self._stats_file = open(os.path.join(self.directory, "stats.jsonl"), "w", encoding="utf-8")

    def write_config(self, config: SimConfig) -> None:
        with open(os.path.join(self.directory, "config.json"), "w", encoding="utf-8") as f:
            f.write(config.to_json())
            f.write("\n")

    def write_step(self, engine: Engine, commands: Optional[list[dict]] = None) -> None:
        st = engine.state
        stats = engine.stats()
        stats.pop("steps_per_sec", None)
        line = {
            "step": st.step,
            "stats": stats,
            "events": [ev.to_dict() for ev in st.events if ev.step == st.step - 1],
        }
        if commands:
            line["commands"] = commands
        self._stats_file.write(json.dumps(line, sort_keys=True))
        self._stats_file.write("\n")
        self._stats_file.flush()
        if self.png_every and st.step % self.png_every == 0:
            self.write_frame(engine)

    def write_frame(self, engine: Engine) -> None:
        from PIL import Image

        img = phenotype_rgb8(engine.state.A, self.downsample)
        name = os.path.join(self.directory, "frames", f"{engine.state.step:08d}.png")
        Image.fromarray(img, mode="RGB").save(name)

    def close(self) -> None:
        self._stats_file.close()

    def __enter__(self) -> "RecordingWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()
