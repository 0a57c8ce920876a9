import json
import struct

import numpy as np
import pytest

from checkpoint import MAGIC, checkpoint_path, encode_checkpoint, latest_checkpoint, load_checkpoint, save_checkpoint
from errors import CheckpointError
from features import fit_pca
from training import TrainConfig, train

SMALL = dict(n_subgens=2, n_qubits=3, depth=2, batch_size=4, critic_steps=1, eval_samples=8, epochs=1)


def _trained(rng, **overrides):
    config = TrainConfig(**{**SMALL, **overrides})
    features = rng.random((8, 6))
    pca = fit_pca(rng.random((8, 16)), 6)
    return list(train(features, config, pca, metadata={"config_hash": "f00d", "width": 4, "height": 4},
                      wall_clock=False))[-1]


def _assert_same(a, b):
    assert a.config == b.config and a.epoch == b.epoch and a.metadata == b.metadata
    assert a.rng_state == b.rng_state
    for x, y in zip(a.critic.tensors(), b.critic.tensors()):
        assert np.array_equal(x, y)
    for x, y in zip(a.gen_adam.m + a.gen_adam.v, b.gen_adam.m + b.gen_adam.v):
        assert np.array_equal(x, y)
    assert a.gen_adam.step == b.gen_adam.step and a.critic_adam.step == b.critic_adam.step
    assert np.array_equal(a.pca.axes, b.pca.axes) and a.pca.pca_min == b.pca.pca_min
    assert [(m.epoch, m.loss_d, m.loss_g, m.frechet, m.wall_seconds) for m in a.history] == \
        [(m.epoch, m.loss_d, m.loss_g, m.frechet, m.wall_seconds) for m in b.history]


def test_quantum_checkpoint_save_load(tmp_path, rng):
    ckpt = _trained(rng)
    path = checkpoint_path(tmp_path, ckpt.epoch)
    save_checkpoint(ckpt, path)
    loaded = load_checkpoint(path)
    _assert_same(ckpt, loaded)
    assert np.array_equal(loaded.generator.weights, ckpt.generator.weights)
    assert loaded.generator.assignment == ckpt.generator.assignment
    assert loaded.generator.circuit_spec == ckpt.generator.circuit_spec
    # re-encoding the loaded checkpoint reproduces the file byte for byte
    assert encode_checkpoint(loaded) == path.read_bytes()


def test_classical_checkpoint_with_batch_norm(tmp_path, rng):
    ckpt = _trained(rng, generator_kind="classical", latent_dim=4, baseline_hidden=8, batch_norm=True)
    save_checkpoint(ckpt, tmp_path / "c.qckpt")
    loaded = load_checkpoint(tmp_path / "c.qckpt")
    _assert_same(ckpt, loaded)
    assert loaded.generator.batch_norm
    for x, y in zip(ckpt.generator.tensors(), loaded.generator.tensors()):
        assert np.array_equal(x, y)


def test_wall_seconds_survive_round_trip(tmp_path, rng):
    config = TrainConfig(**SMALL)
    ckpt = list(train(rng.random((8, 6)), config, fit_pca(rng.random((8, 16)), 6), wall_clock=True))[-1]
    assert ckpt.history[-1].wall_seconds > 0.0
    save_checkpoint(ckpt, tmp_path / "timed.qckpt")
    loaded = load_checkpoint(tmp_path / "timed.qckpt")
    assert [m.wall_seconds for m in loaded.history] == [m.wall_seconds for m in ckpt.history]


def _rewrite_header(data, edit):
    offset = len(MAGIC) + 4
    (length,) = struct.unpack("<Q", data[offset:offset + 8])
    header = json.loads(data[offset + 8:offset + 8 + length])
    edit(header)
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return data[:offset] + struct.pack("<Q", len(blob)) + blob + data[offset + 8 + length:]


def _drop_critic_head(header):
    del header["critic_head"]


def _rename_first_critic_array(header):
    for entry in header["arrays"]:
        if entry[0] == "critic.w1":
            entry[0] = "critic.wx"


def _break_manifest(header):
    header["arrays"] = 7


@pytest.mark.parametrize("edit", [_drop_critic_head, _rename_first_critic_array, _break_manifest])
def test_incomplete_header_raises_checkpoint_error(tmp_path, rng, edit):
    path = tmp_path / "broken.qckpt"
    path.write_bytes(_rewrite_header(encode_checkpoint(_trained(rng)), edit))
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "x.qckpt"
    path.write_bytes(b"NOTACKPT" + bytes(20))
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_newer_version_rejected(tmp_path, rng):
    data = bytearray(encode_checkpoint(_trained(rng)))
    data[len(MAGIC):len(MAGIC) + 4] = struct.pack("<I", 99)
    path = tmp_path / "future.qckpt"
    path.write_bytes(bytes(data))
    with pytest.raises(CheckpointError, match="newer"):
        load_checkpoint(path)


def test_truncated_file_rejected(tmp_path, rng):
    data = encode_checkpoint(_trained(rng))
    path = tmp_path / "cut.qckpt"
    path.write_bytes(data[:-5])
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_missing_file(tmp_path):
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "nope.qckpt")


def test_latest_checkpoint_picks_highest_epoch(tmp_path):
    assert latest_checkpoint(tmp_path) is None
    for epoch in (2, 10, 1):
        checkpoint_path(tmp_path, epoch).write_bytes(b"")
    assert latest_checkpoint(tmp_path).name == "epoch_0010.qckpt"
