"""
Binary checkpoint container.

Layout (little-endian):
    b"QIGLCKPT"              8-byte magic
    uint32                   format version
    uint64 + bytes           UTF-8 JSON header (sorted keys)
    [uint64 + float64 * n]   one record per array, in header["arrays"] order

The header holds the train config, metadata, epoch, loss history, RNG state,
Adam step counters, assignment, critic head and the array manifest
(name, shape). Arrays follow a fixed order: generator, critic, PCA,
generator Adam moments, critic Adam moments.
"""

from __future__ import annotations

import dataclasses
import json
import pathlib
import struct

import numpy as np

from config import logger
from critic import CriticParams
from errors import CheckpointError
from features import FeatureAssignment, PcaModel
from fileio import atomic_write_bytes
from qcircuit import CircuitSpec
from qgenerator import GeneratorEnsemble, SubGeneratorParams
from training import AdamState, BaselineGeneratorParams, Checkpoint, EpochMetrics, TrainConfig

MAGIC = b"QIGLCKPT"
VERSION = 1
SUFFIX = ".qckpt"

_PCA_FIELDS = ("mean", "axes", "singular_values", "explained_variance_ratio", "full_variance_ratio")


def _generator_arrays(generator):
    if isinstance(generator, GeneratorEnsemble):
        return [("generator.weights", generator.weights)]
    names = ["w1", "b1", "w2", "b2"] + (["gamma", "beta"] if generator.batch_norm else [])
    return [(f"generator.{name}", getattr(generator, name)) for name in names]


def _arrays(ckpt):
    arrays = _generator_arrays(ckpt.generator)
    arrays += [(f"critic.{name}", t) for name, t in zip(CriticParams.NAMES, ckpt.critic.tensors())]
    arrays += [(f"pca.{name}", getattr(ckpt.pca, name)) for name in _PCA_FIELDS]
    arrays.append(("pca.bounds", np.array([ckpt.pca.pca_min, ckpt.pca.pca_max])))
    for label, state in (("gen_adam", ckpt.gen_adam), ("critic_adam", ckpt.critic_adam)):
        arrays += [(f"{label}.m{i}", m) for i, m in enumerate(state.m)]
        arrays += [(f"{label}.v{i}", v) for i, v in enumerate(state.v)]
    return arrays


def _history_entry(metrics):
    return {
        "epoch": metrics.epoch,
        "loss_d": metrics.loss_d,
        "loss_g": metrics.loss_g,
        "frechet": metrics.frechet,
        "wall_seconds": metrics.wall_seconds,
    }


def encode_checkpoint(ckpt):
    arrays = _arrays(ckpt)
    header = {
        "config": dataclasses.asdict(ckpt.config),
        "metadata": ckpt.metadata,
        "epoch": ckpt.epoch,
        "history": [_history_entry(m) for m in ckpt.history],
        "rng_state": ckpt.rng_state,
        "adam_steps": {"gen_adam": ckpt.gen_adam.step, "critic_adam": ckpt.critic_adam.step},
        "critic_head": ckpt.critic.head,
        "arrays": [[name, list(np.shape(a))] for name, a in arrays],
    }
    if isinstance(ckpt.generator, GeneratorEnsemble):
        header["generator"] = {
            "kind": "quantum",
            "n_qubits": ckpt.generator.circuit_spec.n_qubits,
            "depth": ckpt.generator.circuit_spec.depth,
            "topology": [list(p) for p in ckpt.generator.circuit_spec.entangler_topology],
            "assignment": [list(s) for s in ckpt.generator.assignment.subsets],
            "assignment_mode": ckpt.generator.assignment.mode,
        }
    else:
        header["generator"] = {"kind": "classical", "slope": ckpt.generator.slope}

    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", VERSION), struct.pack("<Q", len(blob)), blob]
    for _, array in arrays:
        flat = np.ascontiguousarray(array, dtype="<f8").reshape(-1)
        parts.append(struct.pack("<Q", flat.size))
        parts.append(flat.tobytes())
    return b"".join(parts)


def _take(data, offset, size, what):
    end = offset + size
    if end > len(data):
        raise CheckpointError(f"checkpoint truncated while reading {what}")
    return data[offset:end], end


def decode_checkpoint(data):
    magic, offset = _take(data, 0, len(MAGIC), "magic")
    if magic != MAGIC:
        raise CheckpointError("not a QIGL checkpoint (bad magic)")
    raw, offset = _take(data, offset, 4, "version")
    (version,) = struct.unpack("<I", raw)
    if version > VERSION:
        raise CheckpointError(f"checkpoint version {version} is newer than supported version {VERSION}")
    raw, offset = _take(data, offset, 8, "header length")
    (length,) = struct.unpack("<Q", raw)
    raw, offset = _take(data, offset, length, "header")
    try:
        header = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"corrupt checkpoint header: {e}") from e

    try:
        manifest = [(str(name), [int(d) for d in shape]) for name, shape in header["arrays"]]
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"checkpoint header has a malformed array manifest: {e!r}") from e

    arrays = {}
    for name, shape in manifest:
        raw, offset = _take(data, offset, 8, name)
        (count,) = struct.unpack("<Q", raw)
        if count != int(np.prod(shape, dtype=np.int64)):
            raise CheckpointError(f"array {name} holds {count} values, manifest shape is {shape}")
        raw, offset = _take(data, offset, 8 * count, name)
        arrays[name] = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)
    if offset != len(data):
        raise CheckpointError(f"{len(data) - offset} trailing bytes after the last array")
    return _build(header, arrays)


def _build(header, arrays):
    try:
        return _assemble(header, arrays)
    except CheckpointError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as e:
        raise CheckpointError(f"checkpoint content is incomplete or malformed: {e!r}") from e


def _assemble(header, arrays):
    config = TrainConfig(**header["config"])
    gen_info = header["generator"]
    if gen_info["kind"] == "quantum":
        spec = CircuitSpec(gen_info["n_qubits"], gen_info["depth"], tuple(tuple(p) for p in gen_info["topology"]))
        assignment = FeatureAssignment(tuple(tuple(s) for s in gen_info["assignment"]), gen_info["assignment_mode"])
        generator = GeneratorEnsemble(
            [SubGeneratorParams(w) for w in arrays["generator.weights"]], spec, assignment
        )
    else:
        generator = BaselineGeneratorParams(
            arrays["generator.w1"], arrays["generator.b1"], arrays["generator.w2"], arrays["generator.b2"],
            arrays.get("generator.gamma"), arrays.get("generator.beta"), slope=gen_info["slope"],
        )

    critic = CriticParams(*(arrays[f"critic.{name}"] for name in CriticParams.NAMES), head=header["critic_head"])
    bounds = arrays["pca.bounds"]
    pca = PcaModel(
        **{name: arrays[f"pca.{name}"] for name in _PCA_FIELDS},
        pca_min=float(bounds[0]),
        pca_max=float(bounds[1]),
    )

    def adam(label):
        count = sum(1 for name in arrays if name.startswith(f"{label}.m"))
        return AdamState(
            [arrays[f"{label}.m{i}"] for i in range(count)],
            [arrays[f"{label}.v{i}"] for i in range(count)],
            header["adam_steps"][label],
        )

    history = [
        EpochMetrics(h["epoch"], h["loss_d"], h["loss_g"], h["frechet"], h.get("wall_seconds", 0.0))
        for h in header["history"]
    ]
    return Checkpoint(
        config=config,
        generator=generator,
        critic=critic,
        pca=pca,
        gen_adam=adam("gen_adam"),
        critic_adam=adam("critic_adam"),
        rng_state=header["rng_state"],
        epoch=header["epoch"],
        history=history,
        metadata=header["metadata"],
    )


def save_checkpoint(ckpt, path):
    path = pathlib.Path(path)
    atomic_write_bytes(path, encode_checkpoint(ckpt), CheckpointError)
    logger.info(f"Saved checkpoint for epoch {ckpt.epoch} to {path}")


def load_checkpoint(path):
    path = pathlib.Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
    return decode_checkpoint(data)


def checkpoint_path(directory, epoch):
    return pathlib.Path(directory) / f"epoch_{epoch:04d}{SUFFIX}"


def latest_checkpoint(directory):
    """Newest epoch_XXXX.qckpt in `directory`, or None."""
    directory = pathlib.Path(directory)
    if not directory.is_dir():
        return None
    candidates = sorted(directory.glob(f"epoch_*{SUFFIX}"))
    return candidates[-1] if candidates else None
