"""
Command implementations behind the CLI and the tool server: preprocessing,
training runs with checkpoints and metric logs, image generation, evaluation
reports, the ablation grid and the circuit-depth sweep.

Every function raises QiglError subclasses; exit codes and user-facing
strings are the callers' business.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import itertools
import json
import pathlib

import numpy as np

from checkpoint import checkpoint_path, latest_checkpoint, load_checkpoint, save_checkpoint
from config import logger
from errors import ArgumentError, CheckpointError, ConfigError, ShapeError, TrainingDivergenceError
from evaluation import evaluate_model
from features import components_for_variance, fit_pca, inverse_transform, scale_scores, transform, unscale_scores
from fileio import atomic_write_text
from imaging import (
    Dataset,
    GrayImage,
    dataset_pixels,
    encode_pgm,
    equalize_dataset,
    load_dataset,
    read_exclusion_list,
    save_image,
    synth_dataset,
)
from qgenerator import generator_param_count
from training import TrainConfig, baseline_param_count, sample_features, train

METRICS_COLUMNS = ("epoch", "L_D", "L_G", "frechet", "wall_seconds", "config_hash")
ABLATION_COLUMNS = ("tag", "assignment", "loss", "he", "seed", "frechet", "config_hash")
ABLATION_GRID = (("conventional", "balanced"), ("wasserstein", "bce"), (True, False))
DEPTH_COLUMNS = ("tag", "generator", "depth", "n_parameters", "seed", "frechet", "config_hash")
DEPTH_GRID = (4, 6, 8, 10)
SAMPLES_MANIFEST = "samples.json"


@dataclasses.dataclass
class TrainSummary:
    out_dir: pathlib.Path
    checkpoint: pathlib.Path
    epoch: int
    initial_frechet: float
    final_frechet: float
    cumulative_variance: float
    components_for_threshold: int
    config_hash: str


# Datasets and features

def _dataset_spec(run):
    if run.dataset:
        return {
            "kind": "directory",
            "path": str(pathlib.Path(run.dataset).resolve()),
            "exclude_file": run.exclude_file,
        }
    return {
        "kind": "synthetic",
        "synth_kind": run.synth_kind,
        "n": run.synth_n,
        "size": run.synth_size,
        "jitter": run.synth_jitter,
        "seed": run.seed,
    }


def dataset_from_spec(spec, expected=None):
    """Rebuilds the dataset a run trained on from its recorded description."""
    if spec["kind"] == "directory":
        exclude = read_exclusion_list(spec["exclude_file"]) if spec.get("exclude_file") else None
        return load_dataset(spec["path"], expected=expected, exclude=exclude)
    rng = np.random.default_rng(spec["seed"])
    return synth_dataset(spec["synth_kind"], spec["n"], spec["size"], rng, spec["jitter"])


def to_train_config(run):
    return TrainConfig(**run.train_fields())


def prepare_features(dataset, n_components, he_enabled):
    """Fits PCA on the (optionally equalised) dataset; returns (pca, scaled features)."""
    pixels = dataset_pixels(dataset, he_enabled)
    pca = fit_pca(pixels, n_components)
    return pca, scale_scores(pca, transform(pca, pixels))


# CSV helpers

def _format(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def _render_csv(columns, rows):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_format(row[c]) for c in columns])
    return buffer.getvalue()


def _read_csv(path):
    path = pathlib.Path(path)
    if not path.exists():
        return []
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def _metrics_row(metrics, config_hash):
    return {
        "epoch": metrics.epoch,
        "L_D": metrics.loss_d,
        "L_G": metrics.loss_g,
        "frechet": metrics.frechet,
        "wall_seconds": metrics.wall_seconds,
        "config_hash": config_hash,
    }


# preprocess

def cmd_preprocess(input_dir, output_dir, he=True, exclude=None):
    """
    Loads a folder of grayscale images, applies the exclusion list and optional
    histogram equalisation, and writes PGM copies plus manifest.json.

    Args:
        input_dir: Folder of PGM/PNG files.
        output_dir: Destination folder (created if missing).
        he: Apply histogram equalisation.
        exclude: Path to an exclusion list, or an iterable of filenames.

    Returns:
        The manifest dict.
    """
    if exclude is None:
        excluded = set()
    elif isinstance(exclude, (str, pathlib.Path)):
        excluded = read_exclusion_list(exclude)
    else:
        excluded = set(exclude)

    dataset = load_dataset(input_dir, exclude=excluded)
    if he:
        dataset = equalize_dataset(dataset)

    output_dir = pathlib.Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for name, image in zip(dataset.names, dataset.images):
        data = encode_pgm(image)
        target = output_dir / f"{pathlib.Path(name).stem}.pgm"
        save_image(image, target, "pgm")
        files.append({"name": target.name, "source": name, "sha256": hashlib.sha256(data).hexdigest()})

    settings = {"he_enabled": bool(he), "excluded": sorted(excluded)}
    width, height = dataset.dimensions
    manifest = {
        "config_hash": hashlib.sha256(json.dumps(settings, sort_keys=True).encode("utf-8")).hexdigest(),
        "dimensions": [width, height],
        "excluded": sorted(excluded),
        "files": files,
        "he_enabled": bool(he),
    }
    atomic_write_text(output_dir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    logger.info(f"Preprocessed {len(files)} images into {output_dir} (HE {'on' if he else 'off'})")
    return manifest


# train

def _resume_point(run, ckpt_dir):
    latest = latest_checkpoint(ckpt_dir)
    if latest is None:
        raise CheckpointError(f"no checkpoint to resume from in {ckpt_dir}")
    ckpt = load_checkpoint(latest)
    recorded = ckpt.metadata.get("config_hash")
    if recorded != run.config_hash():
        raise ConfigError(
            f"checkpoint {latest.name} was written by config {str(recorded)[:12]}, "
            f"current config is {run.config_hash()[:12]}"
        )
    return ckpt


def cmd_train(run, resume=False):
    """
    Fits PCA, runs the adversarial loop and persists checkpoints plus metrics.csv.

    Output layout under run.resolved_out_dir():
        run.conf, manifest.json, metrics.csv, checkpoints/epoch_XXXX.qckpt,
        samples/ (when emit_images > 0), divergence.json (on divergence).
    """
    out_dir = run.resolved_out_dir()
    ckpt_dir = out_dir / "checkpoints"
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    config = to_train_config(run)
    config_hash = run.config_hash()
    start = _resume_point(run, ckpt_dir) if resume else None

    dataset_spec = _dataset_spec(run)
    dataset = dataset_from_spec(dataset_spec)
    pca, features = prepare_features(dataset, config.n_features, config.he_enabled)
    cumulative = pca.cumulative_variance()
    needed = components_for_variance(pca, run.variance_threshold)
    logger.info(
        f"PCA: {pca.n_components} components explain {cumulative:.4f} of the variance; "
        f"{needed} reach the {run.variance_threshold} threshold"
    )
    logger.info(
        f"Config {config_hash[:12]}: batch {config.batch_size}, lr {config.lr_generator}/{config.lr_critic}, "
        f"{config.n_qubits} qubits, {config.depth} layers, {config.n_subgens} sub-generators, "
        f"{config.n_features} features, {config.loss_mode} loss, {config.assignment_mode} assignment"
    )

    width, height = dataset.dimensions
    metadata = {
        "config_hash": config_hash,
        "dataset": dataset_spec,
        "width": width,
        "height": height,
    }
    atomic_write_text(out_dir / "run.conf", run.render())
    manifest = {
        "assignment_mode": config.assignment_mode,
        "config_hash": config_hash,
        "cumulative_variance": cumulative,
        "components_for_threshold": needed,
        "dataset": dataset_spec,
        "dimensions": [width, height],
        "generator_kind": config.generator_kind,
        "he_enabled": config.he_enabled,
        "loss_mode": config.loss_mode,
        "n_images": len(dataset),
    }
    atomic_write_text(out_dir / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    metrics_path = out_dir / "metrics.csv"
    rows = []
    if resume:
        rows = [_metrics_row(m, config_hash) for m in start.history]
        atomic_write_text(metrics_path, _render_csv(METRICS_COLUMNS, rows))

    last = start
    last_path = latest_checkpoint(ckpt_dir) if resume else None
    try:
        for ckpt in train(features, config, pca, resume=start, metadata=metadata, wall_clock=run.wall_clock):
            last = ckpt
            rows.append(_metrics_row(ckpt.history[-1], config_hash))
            atomic_write_text(metrics_path, _render_csv(METRICS_COLUMNS, rows))
            if ckpt.epoch % run.checkpoint_every == 0 or ckpt.epoch == config.epochs:
                last_path = checkpoint_path(ckpt_dir, ckpt.epoch)
                save_checkpoint(ckpt, last_path)
    except TrainingDivergenceError as e:
        atomic_write_text(out_dir / "divergence.json", json.dumps(e.diagnostics, indent=2, sort_keys=True) + "\n")
        logger.error(f"Training diverged: {e}; diagnostics in {out_dir / 'divergence.json'}")
        raise

    if run.emit_images:
        write_samples(last, run.emit_images, out_dir / "samples", config.seed)

    return TrainSummary(
        out_dir=out_dir,
        checkpoint=last_path,
        epoch=last.epoch,
        initial_frechet=last.history[0].frechet,
        final_frechet=last.history[-1].frechet,
        cumulative_variance=cumulative,
        components_for_threshold=needed,
        config_hash=config_hash,
    )


# generate

def generate_pixels(ckpt, n, rng):
    """n reconstructed images as (n, width*height) rows in [0, 1]."""
    pca = ckpt.pca
    features = sample_features(ckpt.generator, n, rng)
    if features.shape[1] != pca.n_components:
        raise ShapeError(
            f"generator produces {features.shape[1]} features, checkpoint PCA has {pca.n_components} components"
        )
    return inverse_transform(pca, unscale_scores(pca, features), clamp=True)


def write_samples(ckpt, n, out_dir, seed, fmt="pgm"):
    """
    Writes n sample_XXXXX images plus samples.json, which ties them to the
    checkpoint's config hash, epoch and sampling seed.
    """
    width, height = ckpt.metadata.get("width"), ckpt.metadata.get("height")
    if width is None or height is None or width * height != ckpt.pca.n_pixels:
        raise ShapeError(f"checkpoint records {width}x{height} images but PCA spans {ckpt.pca.n_pixels} pixels")
    out_dir = pathlib.Path(out_dir)
    if n == 0:
        return []
    out_dir.mkdir(parents=True, exist_ok=True)
    pixels = generate_pixels(ckpt, n, np.random.default_rng(seed))
    paths = []
    for i, row in enumerate(pixels):
        path = out_dir / f"sample_{i:05d}.{fmt}"
        save_image(GrayImage.from_unit(row.reshape(height, width)), path, fmt)
        paths.append(path)
    provenance = {
        "checkpoint_epoch": ckpt.epoch,
        "config_hash": ckpt.metadata.get("config_hash", ""),
        "files": [p.name for p in paths],
        "seed": seed,
    }
    atomic_write_text(out_dir / SAMPLES_MANIFEST, json.dumps(provenance, indent=2, sort_keys=True) + "\n")
    logger.info(f"Wrote {n} generated images to {out_dir}")
    return paths


def cmd_generate(checkpoint, n, out_dir, seed=None, fmt="pgm"):
    """Samples n images from a checkpoint; returns the written paths."""
    if n < 0:
        raise ArgumentError(f"image count must be >= 0, got {n}")
    ckpt = load_checkpoint(checkpoint)
    seed = ckpt.config.seed if seed is None else seed
    return write_samples(ckpt, n, out_dir, seed, fmt)


# evaluate

def cmd_evaluate(checkpoint, datasets=(), n=256, space="features", seed=None, out_path=None):
    """
    Writes a MetricsReport JSON for a checkpoint.

    Args:
        checkpoint: Checkpoint path.
        datasets: Dataset directories; empty means the dataset recorded in the
            checkpoint. With several, each directory name is a class label.
        n: Generated sample count.
        space: "features" or "pixels".
        seed: Sampling seed; defaults to the training seed.
        out_path: Report destination; defaults to <checkpoint>.metrics.json.
    """
    checkpoint = pathlib.Path(checkpoint)
    ckpt = load_checkpoint(checkpoint)
    expected = (ckpt.metadata.get("width"), ckpt.metadata.get("height"))
    expected = expected if None not in expected else None

    per_class = None
    if not datasets:
        if "dataset" not in ckpt.metadata:
            raise ArgumentError("checkpoint records no dataset; pass one explicitly")
        dataset = dataset_from_spec(ckpt.metadata["dataset"], expected)
    else:
        loaded = [load_dataset(d, expected=expected) for d in datasets]
        dataset = Dataset([img for ds in loaded for img in ds.images], None, loaded[0].provenance,
                          [name for ds in loaded for name in ds.names])
        if len(loaded) > 1:
            per_class = {ds.class_label: ds for ds in loaded}

    report = evaluate_model(ckpt, dataset, n, space=space, seed=seed, per_class=per_class)
    out_path = pathlib.Path(out_path) if out_path else checkpoint.with_suffix(".metrics.json")
    atomic_write_text(out_path, report.to_json() + "\n")
    logger.info(f"Wrote metrics report to {out_path}")
    return report


# ablate

def ablation_tag(assignment, loss, he):
    return f"{assignment}-{loss}-{'he' if he else 'nohe'}"


def _ablation_row(raw):
    return {
        **raw,
        "he": raw["he"] == "true",
        "seed": int(raw["seed"]),
        "frechet": float(raw["frechet"]),
    }


def cmd_ablate(run):
    """
    Trains every cell of {assignment} x {loss} x {he} with the shared seed and
    records one final Fréchet value per cell in ablation.csv. Cells already in
    the CSV are skipped, so an interrupted grid picks up where it stopped.
    """
    base = run.resolved_out_dir()
    base.mkdir(parents=True, exist_ok=True)
    csv_path = base / "ablation.csv"
    rows = [_ablation_row(r) for r in _read_csv(csv_path)]
    done = {r["tag"] for r in rows}

    for assignment, loss, he in itertools.product(*ABLATION_GRID):
        tag = ablation_tag(assignment, loss, he)
        if tag in done:
            logger.info(f"Ablation cell {tag} already recorded; skipping")
            continue
        cell = run.with_overrides(
            assignment_mode=assignment, loss_mode=loss, he_enabled=he, out_dir=str(base / tag)
        )
        logger.info(f"Ablation cell {tag}")
        summary = cmd_train(cell)
        rows.append({
            "tag": tag,
            "assignment": assignment,
            "loss": loss,
            "he": he,
            "seed": cell.seed,
            "frechet": summary.final_frechet,
            "config_hash": cell.config_hash(),
        })
        atomic_write_text(csv_path, _render_csv(ABLATION_COLUMNS, rows))
    return rows


# depth sweep

def _depth_row(raw):
    return {
        **raw,
        "depth": int(raw["depth"]) if raw["depth"] else None,
        "n_parameters": int(raw["n_parameters"]),
        "seed": int(raw["seed"]),
        "frechet": float(raw["frechet"]),
    }


def cmd_depth_sweep(run, depths=DEPTH_GRID):
    """
    Trains the quantum generator once per circuit depth, plus the classical
    baseline on the same data and seed, and records one final Fréchet value per
    row in depth_sweep.csv. Rows already in the CSV are skipped.
    """
    if not depths or any(d < 1 for d in depths):
        raise ArgumentError(f"depths must be a non-empty list of positive integers, got {list(depths)}")
    base = run.resolved_out_dir()
    base.mkdir(parents=True, exist_ok=True)
    csv_path = base / "depth_sweep.csv"
    rows = [_depth_row(r) for r in _read_csv(csv_path)]
    done = {r["tag"] for r in rows}

    cells = [(f"quantum-depth{d:02d}", run.with_overrides(generator_kind="quantum", depth=d)) for d in depths]
    cells.append(("classical", run.with_overrides(generator_kind="classical")))
    for tag, cell in cells:
        if tag in done:
            logger.info(f"Depth sweep row {tag} already recorded; skipping")
            continue
        cell = cell.with_overrides(out_dir=str(base / tag))
        logger.info(f"Depth sweep row {tag}")
        summary = cmd_train(cell)
        generator = load_checkpoint(summary.checkpoint).generator
        quantum = cell.generator_kind == "quantum"
        rows.append({
            "tag": tag,
            "generator": cell.generator_kind,
            "depth": cell.depth if quantum else None,
            "n_parameters": generator_param_count(generator) if quantum else baseline_param_count(generator),
            "seed": cell.seed,
            "frechet": summary.final_frechet,
            "config_hash": cell.config_hash(),
        })
        atomic_write_text(csv_path, _render_csv(DEPTH_COLUMNS, rows))
    return rows


# describe

def describe_checkpoint(checkpoint):
    """Summary dict of a checkpoint's configuration and training history."""
    ckpt = load_checkpoint(checkpoint)
    config = ckpt.config
    history = ckpt.history
    return {
        "epoch": ckpt.epoch,
        "config_hash": ckpt.metadata.get("config_hash", ""),
        "generator_kind": config.generator_kind,
        "loss_mode": config.loss_mode,
        "assignment_mode": config.assignment_mode,
        "he_enabled": config.he_enabled,
        "n_features": ckpt.pca.n_components,
        "image_size": [ckpt.metadata.get("width"), ckpt.metadata.get("height")],
        "explained_variance": ckpt.pca.cumulative_variance(),
        "initial_frechet": history[0].frechet if history else None,
        "latest_frechet": history[-1].frechet if history else None,
    }
