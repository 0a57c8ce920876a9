"""
Grayscale image handling: PGM/PNG codecs, histogram equalisation,
flattening to [0, 1] rows, synthetic desk-scale datasets, and image emission.
"""

from __future__ import annotations

import dataclasses
import io
import pathlib
import re

import numpy as np
import png

from config import logger
from errors import ArgumentError, DatasetError, EmptyDatasetError, ImageFormatError, ImageIOError
from fileio import atomic_write_bytes

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"
SUPPORTED_SUFFIXES = (".pgm", ".png")
LOADED = "loaded"
SYNTHETIC = "synthetic"


@dataclasses.dataclass
class GrayImage:
    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.size != self.width * self.height:
            raise ImageFormatError(
                f"{pixels.size} pixels do not fill a {self.width}x{self.height} image"
            )
        if pixels.size and (pixels.min() < 0 or pixels.max() > 255):
            raise ImageFormatError("pixel intensities must lie in [0, 255]")
        self.pixels = pixels.astype(np.uint8).reshape(self.height, self.width)

    @classmethod
    def from_unit(cls, values):
        """Builds an image from [0, 1] reals: clamp, scale by 255, round half-up."""
        values = np.asarray(values, dtype=np.float64)
        return cls(values.shape[1], values.shape[0], quantize(values))


@dataclasses.dataclass
class Dataset:
    images: list
    class_label: str | None = None
    provenance: str = LOADED
    names: list = dataclasses.field(default_factory=list)

    def __post_init__(self):
        shapes = {(img.width, img.height) for img in self.images}
        if len(shapes) > 1:
            raise DatasetError(f"images have mixed dimensions {sorted(shapes)}")

    def __len__(self):
        return len(self.images)

    @property
    def dimensions(self):
        return (self.images[0].width, self.images[0].height) if self.images else None


def quantize(values):
    """[0, 1] reals -> uint8 with clamping and half-up rounding."""
    clipped = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    return np.floor(clipped * 255.0 + 0.5).astype(np.uint8)


def histogram_equalize(image):
    """
    Maps intensity i to round_half_up(255 * CDF(i)), CDF being the cumulative
    normalised histogram. Integer arithmetic keeps the rounding exact.
    """
    flat = image.pixels.ravel()
    total = flat.size
    if total == 0:
        return GrayImage(image.width, image.height, image.pixels.copy())
    cdf = np.cumsum(np.bincount(flat, minlength=256)).astype(np.int64)
    table = (510 * cdf + total) // (2 * total)
    return GrayImage(image.width, image.height, table[image.pixels].astype(np.uint8))


def equalize_dataset(dataset):
    return dataclasses.replace(dataset, images=[histogram_equalize(img) for img in dataset.images])


def flatten_normalize(dataset):
    """(n, width*height) matrix of row-major pixels divided by 255."""
    if len(dataset) == 0:
        raise EmptyDatasetError("cannot flatten an empty dataset")
    return np.stack([img.pixels.reshape(-1) for img in dataset.images]).astype(np.float64) / 255.0


def dataset_pixels(dataset, he_enabled):
    """Flattened [0, 1] rows, histogram-equalised first when he_enabled."""
    return flatten_normalize(equalize_dataset(dataset) if he_enabled else dataset)


# Codecs

def encode_pgm(image):
    """Binary PGM: `P5\\n<width> <height>\\n255\\n` followed by row-major bytes."""
    header = f"P5\n{image.width} {image.height}\n255\n".encode("ascii")
    return header + image.pixels.tobytes()


_PGM_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n?)*(\S+)")


def _ascii_raster(data, pos, count, maxval):
    values = []
    while len(values) < count:
        match = _PGM_TOKEN.match(data, pos)
        if not match:
            raise ImageFormatError(f"PGM raster holds {len(values)} values, expected {count}")
        try:
            values.append(int(match.group(1)))
        except ValueError:
            raise ImageFormatError(f"non-numeric PGM sample {match.group(1)!r}") from None
        pos = match.end()
    pixels = np.array(values, dtype=np.int64)
    if np.any(pixels < 0) or np.any(pixels > maxval):
        raise ImageFormatError(f"PGM sample outside [0, {maxval}]")
    return pixels


def decode_pgm(data):
    """Binary (P5) or ASCII (P2) 8-bit PGM; comments are allowed in the header and, for P2, the raster."""
    tokens, pos = [], 0
    for _ in range(4):
        match = _PGM_TOKEN.match(data, pos)
        if not match:
            raise ImageFormatError("truncated PGM header")
        tokens.append(match.group(1))
        pos = match.end()
    if tokens[0] not in (b"P2", b"P5"):
        raise ImageFormatError(f"unsupported PGM magic {tokens[0]!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise ImageFormatError("malformed PGM header") from None
    if not 0 < maxval <= 255:
        raise ImageFormatError(f"only 8-bit PGM is supported, maxval is {maxval}")
    if tokens[0] == b"P2":
        pixels = _ascii_raster(data, pos, width * height, maxval)
    else:
        # exactly one whitespace byte separates the header from the raster
        payload = data[pos + 1:pos + 1 + width * height]
        if len(payload) != width * height:
            raise ImageFormatError(f"PGM raster holds {len(payload)} bytes, expected {width * height}")
        pixels = np.frombuffer(payload, dtype=np.uint8).astype(np.int64)
    if maxval != 255:
        pixels = (pixels * 510 + maxval) // (2 * maxval)
    return GrayImage(width, height, pixels)


def encode_png(image):
    buffer = io.BytesIO()
    writer = png.Writer(image.width, image.height, greyscale=True, bitdepth=8)
    writer.write(buffer, image.pixels.tolist())
    return buffer.getvalue()


def decode_png(data):
    try:
        width, height, rows, info = png.Reader(bytes=data).asDirect()
        raster = np.array([list(row) for row in rows], dtype=np.int64)
    except png.Error as e:
        raise ImageFormatError(f"invalid PNG: {e}") from e
    if not info.get("greyscale"):
        raise ImageFormatError("color PNG images are not supported")
    planes = info.get("planes", 1)
    raster = raster.reshape(height, width, planes)[:, :, 0]
    maxval = 2 ** info["bitdepth"] - 1
    if maxval != 255:
        raster = (raster * 510 + maxval) // (2 * maxval)
    return GrayImage(width, height, raster)


def decode_image(data):
    if data.startswith(PNG_SIGNATURE):
        return decode_png(data)
    if data[:2] in (b"P2", b"P5"):
        return decode_pgm(data)
    raise ImageFormatError("not a PGM or PNG file")


def load_image(path):
    path = pathlib.Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise ImageIOError(f"cannot read {path}: {e}", path) from e
    return decode_image(data)


def save_image(image, path, fmt=None):
    """Writes a PGM or PNG atomically; the format defaults to the file suffix."""
    path = pathlib.Path(path)
    fmt = (fmt or path.suffix.lstrip(".") or "pgm").upper()
    if fmt == "PGM":
        data = encode_pgm(image)
    elif fmt == "PNG":
        data = encode_png(image)
    else:
        raise ArgumentError(f"unsupported image format {fmt!r}")
    atomic_write_bytes(path, data)


# Datasets

def read_exclusion_list(path):
    """One filename per line (UTF-8); blank lines and # comments are ignored."""
    path = pathlib.Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise DatasetError(f"cannot read exclusion list {path}: {e}") from e
    return {line.strip() for line in lines if line.strip() and not line.strip().startswith("#")}


def load_dataset(directory, expected=None, exclude=None, class_label=None):
    """
    Loads every PGM/PNG in `directory` in filename order.

    Args:
        directory: Folder of grayscale images.
        expected: Optional (width, height); defaults to the first image's size.
        exclude: Optional set of filenames to skip.
        class_label: Tag for the dataset; defaults to the folder name.
    """
    directory = pathlib.Path(directory)
    if not directory.is_dir():
        raise DatasetError(f"dataset directory {directory} does not exist")
    exclude = exclude or set()

    images, names, errors = [], [], []
    for path in sorted(p for p in directory.iterdir() if p.suffix.lower() in SUPPORTED_SUFFIXES):
        if path.name in exclude:
            logger.warning(f"Skipping excluded file {path.name}")
            continue
        try:
            image = load_image(path)
        except (ImageFormatError, ImageIOError) as e:
            errors.append((path.name, str(e)))
            continue
        if expected is None:
            expected = (image.width, image.height)
        if (image.width, image.height) != tuple(expected):
            errors.append((path.name, f"dimensions {image.width}x{image.height}, expected {expected[0]}x{expected[1]}"))
            continue
        images.append(image)
        names.append(path.name)

    if errors:
        listing = "; ".join(f"{name}: {message}" for name, message in errors)
        raise DatasetError(f"{len(errors)} file(s) rejected in {directory}: {listing}", errors)
    if not images:
        raise EmptyDatasetError(f"no PGM/PNG images found in {directory}")
    logger.info(f"Loaded {len(images)} images of {expected[0]}x{expected[1]} from {directory}")
    return Dataset(images, class_label or directory.name, LOADED, names)


def _two_blobs(size, rng, jitter):
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    sigma = size / 6.0
    base = np.array([[(size - 1) / 3.0] * 2, [2.0 * (size - 1) / 3.0] * 2])
    centers = base + rng.normal(0.0, 1.0, size=(2, 2)) * jitter
    image = np.zeros((size, size))
    for cx, cy in centers:
        image += np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2.0 * sigma ** 2))
    return image


def _bars(size, rng, jitter):
    yy = np.arange(size, dtype=np.float64)[:, None]
    period = max(2.0, size / 2.0)
    phase = rng.uniform(0.0, 2.0 * np.pi) * min(1.0, jitter)
    return np.broadcast_to(0.5 + 0.5 * np.sin(2.0 * np.pi * yy / period + phase), (size, size))


def _ramps(size, rng, jitter):
    xx = np.arange(size, dtype=np.float64)[None, :]
    slope = rng.uniform(-1.0, 1.0) * min(1.0, jitter)
    return np.broadcast_to(0.5 + slope * (xx - (size - 1) / 2.0) / (size - 1), (size, size))


_SYNTH = {"two-blobs": _two_blobs, "bars": _bars, "ramps": _ramps}


def synth_dataset(kind, n, size, rng, jitter=0.75):
    """
    Deterministic-under-seed synthetic images with low-rank structure.

    kind: "two-blobs" (two Gaussian bumps with jittered centres), "bars"
    (horizontal stripes of random phase) or "ramps" (horizontal gradients of
    random slope). jitter scales the per-image variation; 0 gives identical images.
    """
    if kind not in _SYNTH:
        raise ArgumentError(f"unknown synthetic dataset kind {kind!r}")
    if n < 2:
        raise ArgumentError(f"synthetic datasets need n >= 2, got {n}")
    if size < 2:
        raise ArgumentError(f"synthetic images need size >= 2, got {size}")
    draw = _SYNTH[kind]
    images = [GrayImage.from_unit(draw(size, rng, jitter)) for _ in range(n)]
    names = [f"{kind}_{i:05d}.pgm" for i in range(n)]
    return Dataset(images, kind, SYNTHETIC, names)
