"""
End-to-end checks. Parameter counts, equalisation fixtures and determinism on a
tiny config run in the default suite; the desk-scale training runs take minutes
and are marked slow (`pytest -m slow`).
"""

from pathlib import Path

import numpy as np
import pytest

from checkpoint import load_checkpoint
from config import RunConfig, load_run_config
from critic import critic_param_count
from evaluation import split_half_frechet
from imaging import GrayImage, histogram_equalize
from pipeline import cmd_ablate, cmd_train, dataset_from_spec, prepare_features
from qgenerator import generator_param_count
from training import TrainConfig, baseline_param_count, init_training_state

# two-blobs, 64 images of 8x8, 10 features; 8 batches per epoch keeps it under 300 generator steps
TOY = dict(
    synth_kind="two-blobs", synth_n=64, synth_size=8,
    n_subgens=2, n_qubits=5, depth=6, epochs=37, batch_size=8,
    loss_mode="wasserstein", eval_samples=64, seed=0, wall_clock=False,
    lr_generator=0.05, lr_critic=0.005, adam_beta1=0.5, clip_c=0.05, critic_steps=10,
    weight_init_scale=0.1,
)

TOY_CONF = Path(__file__).resolve().parents[1] / "toy_run.conf"

TINY = dict(
    synth_kind="two-blobs", synth_n=16, synth_size=4,
    n_subgens=2, n_qubits=3, depth=2, epochs=2, batch_size=4,
    critic_steps=2, eval_samples=8, seed=3, wall_clock=False,
)


def test_shipped_toy_config_matches_fixture():
    run = load_run_config(TOY_CONF)
    assert {key: getattr(run, key) for key in TOY if key != "wall_clock"} == \
        {key: value for key, value in TOY.items() if key != "wall_clock"}


def test_default_parameter_counts():
    quantum = init_training_state(TrainConfig())
    assert generator_param_count(quantum.generator) == 240
    assert critic_param_count(quantum.critic) == 3681
    classical = init_training_state(TrainConfig(generator_kind="classical"))
    assert baseline_param_count(classical.generator) == 144_424


def test_equalisation_fixtures_and_properties():
    assert np.all(histogram_equalize(GrayImage(4, 4, np.full((4, 4), 9))).pixels == 255)
    assert histogram_equalize(GrayImage(2, 2, [0, 0, 0, 255])).pixels.reshape(-1).tolist() == [191, 191, 191, 255]
    ramp = histogram_equalize(GrayImage(16, 16, np.arange(256))).pixels.reshape(-1).astype(int)
    assert ramp.min() == 1 and ramp.max() == 255 and np.all(np.diff(ramp) >= 0)

    rng = np.random.default_rng(9)
    for _ in range(100):
        image = GrayImage(6, 5, rng.integers(0, 256, size=(5, 6)))
        once = histogram_equalize(image).pixels.reshape(-1).astype(int)
        twice = histogram_equalize(GrayImage(6, 5, once)).pixels.reshape(-1).astype(int)
        assert np.max(np.abs(twice - once)) <= 1
        order = np.argsort(image.pixels.reshape(-1), kind="stable")
        assert np.all(np.diff(once[order]) >= 0)


def test_tiny_run_is_byte_identical(tmp_path):
    first = cmd_train(RunConfig(out_dir=str(tmp_path / "a"), **TINY))
    second = cmd_train(RunConfig(out_dir=str(tmp_path / "b"), **TINY))
    for name in sorted(p.name for p in (first.out_dir / "checkpoints").iterdir()):
        assert (first.out_dir / "checkpoints" / name).read_bytes() == (second.out_dir / "checkpoints" / name).read_bytes()
    assert (first.out_dir / "metrics.csv").read_bytes() == (second.out_dir / "metrics.csv").read_bytes()


@pytest.fixture(scope="module")
def toy_run(tmp_path_factory):
    run = RunConfig(out_dir=str(tmp_path_factory.mktemp("toy")), **TOY)
    return run, cmd_train(run)


@pytest.mark.slow
def test_toy_run_halves_frechet_and_nears_split_half(toy_run):
    run, summary = toy_run
    ckpt = load_checkpoint(summary.checkpoint)
    assert ckpt.gen_adam.step <= 300
    assert summary.final_frechet <= 0.5 * summary.initial_frechet

    dataset = dataset_from_spec(ckpt.metadata["dataset"])
    _, features = prepare_features(dataset, run.n_features, run.he_enabled)
    baseline = split_half_frechet(features, np.random.default_rng(run.seed))
    assert summary.final_frechet <= 4.0 * baseline


@pytest.mark.slow
def test_toy_run_is_byte_identical(toy_run, tmp_path):
    run, summary = toy_run
    again = cmd_train(run.with_overrides(out_dir=str(tmp_path)))
    assert again.checkpoint.read_bytes() == summary.checkpoint.read_bytes()
    assert (tmp_path / "metrics.csv").read_bytes() == (summary.out_dir / "metrics.csv").read_bytes()


@pytest.mark.slow
def test_balanced_wasserstein_beats_conventional_bce(tmp_path):
    rows = cmd_ablate(RunConfig(out_dir=str(tmp_path), **TOY))
    by_tag = {r["tag"]: r["frechet"] for r in rows}
    assert by_tag["balanced-wasserstein-he"] <= by_tag["conventional-bce-he"]
