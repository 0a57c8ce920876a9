"""
Configuration module for the QIGL toolkit.
Handles path setup, environment variable loading, logging, and run configuration files.
"""

import dataclasses
import hashlib
import io
import logging
import os
import pathlib
import re
import sys

from dotenv import dotenv_values, load_dotenv

from errors import ConfigError

# Configure logging to output to stderr (stdout belongs to the MCP transport and CLI reports)
logging.basicConfig(
    level=logging.INFO,
    handlers=[logging.StreamHandler(sys.stderr)],
    format="%(asctime)s [QIGL] %(message)s"
)

logger = logging.getLogger(__name__)

# Load environment variables (.env files)
# Strategy: 1. Project-level .env, then 2. Global storage .env
script_dir = pathlib.Path(__file__).parent
load_dotenv(script_dir / ".env")

# Global storage directory for runs, checkpoints and generated images
# Default is ~/.qigl
DATA_DIR = pathlib.Path(os.getenv("QIGL_DATA_DIR") or pathlib.Path.home() / ".qigl")
DATA_DIR.mkdir(parents=True, exist_ok=True)
load_dotenv(DATA_DIR / ".env")

LOSS_MODES = ("wasserstein", "bce")
ASSIGNMENT_MODES = ("balanced", "conventional")
GENERATOR_KINDS = ("quantum", "classical")
SYNTH_KINDS = ("two-blobs", "bars", "ramps")

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def get_data_dir():
    """Returns the absolute path to the data storage directory."""
    return DATA_DIR


def get_thread_count():
    """Returns the parallelism cap from QIGL_THREADS (default 1)."""
    raw = os.getenv("QIGL_THREADS")
    if raw is None or raw.strip() == "":
        return 1
    try:
        threads = int(raw)
    except ValueError:
        logger.warning(f"QIGL_THREADS={raw!r} is not an integer. Using 1 thread.")
        return 1
    if threads < 1:
        logger.warning(f"QIGL_THREADS={threads} is below 1. Using 1 thread.")
        return 1
    return threads


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Every knob of a run: the training loop plus dataset, output and reporting settings."""

    # adversarial loop
    epochs: int = 50
    batch_size: int = 8
    lr_generator: float = 0.3
    lr_critic: float = 0.05
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    clip_c: float = 0.01
    critic_steps: int = 5
    loss_mode: str = "wasserstein"
    assignment_mode: str = "balanced"
    he_enabled: bool = True
    seed: int = 0
    # generator / critic shape
    n_qubits: int = 5
    depth: int = 6
    n_subgens: int = 8
    generator_kind: str = "quantum"
    latent_dim: int = 100
    baseline_hidden: int = 1024
    batch_norm: bool = False
    leaky_slope: float = 0.2
    weight_init_scale: float = 1.0
    critic_init_scale: float = 0.1
    eval_samples: int = 64
    # data
    dataset: str = ""
    synth_kind: str = "two-blobs"
    synth_n: int = 64
    synth_size: int = 8
    synth_jitter: float = 0.75
    exclude_file: str = ""
    # output
    out_dir: str = ""
    checkpoint_every: int = 1
    emit_images: int = 0
    variance_threshold: float = 0.98
    wall_clock: bool = True

    def __post_init__(self):
        _validate(self)

    @property
    def n_features(self):
        return self.n_subgens * self.n_qubits

    def train_fields(self):
        """Returns the subset of fields that parameterise the training loop."""
        return {name: getattr(self, name) for name in TRAIN_KEYS}

    def render(self, include_output=True):
        """Canonical `key = value` text, sorted by key."""
        lines = [f"{f.name} = {_render_value(getattr(self, f.name))}"
                 for f in sorted(dataclasses.fields(self), key=lambda f: f.name)
                 if include_output or f.name not in OUTPUT_KEYS]
        return "\n".join(lines) + "\n"

    def config_hash(self):
        """SHA-256 of the training, data and model fields; output settings are left out."""
        return hashlib.sha256(self.render(include_output=False).encode("utf-8")).hexdigest()

    def resolved_out_dir(self):
        """Output directory; defaults to a hash-named folder under the data directory."""
        if self.out_dir:
            return pathlib.Path(self.out_dir)
        return DATA_DIR / "runs" / self.config_hash()[:12]

    def with_overrides(self, **overrides):
        """Returns a validated copy with the given (non-None) fields replaced."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        unknown = set(changes) - {f.name for f in dataclasses.fields(self)}
        if unknown:
            raise ConfigError(f"unknown key(s) {sorted(unknown)}")
        return dataclasses.replace(self, **changes)


# where and how results are written; never part of the config hash
OUTPUT_KEYS = frozenset({"out_dir", "checkpoint_every", "emit_images", "wall_clock"})

TRAIN_KEYS = (
    "epochs", "batch_size", "lr_generator", "lr_critic", "adam_beta1", "adam_beta2",
    "adam_eps", "clip_c", "critic_steps", "loss_mode", "assignment_mode", "he_enabled",
    "seed", "n_qubits", "depth", "n_subgens", "generator_kind", "latent_dim",
    "baseline_hidden", "batch_norm", "leaky_slope", "weight_init_scale",
    "critic_init_scale", "eval_samples",
)


def _render_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _coerce(name, kind, raw, line):
    """Converts a raw string from the config file to the field's type."""
    if raw is None:
        raise ConfigError("missing value", field=name, line=line)
    text = raw.strip()
    if kind is bool:
        lowered = text.lower()
        if lowered in _TRUE:
            return True
        if lowered in _FALSE:
            return False
        raise ConfigError(f"expected a boolean, got {raw!r}", field=name, line=line)
    if kind is int:
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"expected an integer, got {raw!r}", field=name, line=line) from None
    if kind is float:
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"expected a number, got {raw!r}", field=name, line=line) from None
    return text


def _check(condition, field, message):
    if not condition:
        raise ConfigError(message, field=field)


def _validate(cfg):
    _check(cfg.epochs >= 0, "epochs", "must be >= 0")
    _check(cfg.batch_size >= 1, "batch_size", "must be >= 1")
    _check(cfg.lr_generator > 0, "lr_generator", "must be positive")
    _check(cfg.lr_critic > 0, "lr_critic", "must be positive")
    _check(0 < cfg.adam_beta1 < cfg.adam_beta2 < 1, "adam_beta1",
           "requires 0 < adam_beta1 < adam_beta2 < 1")
    _check(cfg.adam_eps > 0, "adam_eps", "must be positive")
    _check(cfg.clip_c > 0, "clip_c", "must be positive")
    _check(cfg.critic_steps >= 1, "critic_steps", "must be >= 1")
    _check(cfg.loss_mode in LOSS_MODES, "loss_mode", f"must be one of {LOSS_MODES}")
    _check(cfg.assignment_mode in ASSIGNMENT_MODES, "assignment_mode",
           f"must be one of {ASSIGNMENT_MODES}")
    _check(cfg.seed >= 0, "seed", "must be >= 0")
    _check(1 <= cfg.n_qubits <= 24, "n_qubits", "must be in [1, 24]")
    _check(cfg.depth >= 1, "depth", "must be >= 1")
    _check(cfg.n_subgens >= 1, "n_subgens", "must be >= 1")
    _check(cfg.generator_kind in GENERATOR_KINDS, "generator_kind",
           f"must be one of {GENERATOR_KINDS}")
    _check(cfg.latent_dim >= 1, "latent_dim", "must be >= 1")
    _check(cfg.baseline_hidden >= 1, "baseline_hidden", "must be >= 1")
    _check(0 <= cfg.leaky_slope < 1, "leaky_slope", "must be in [0, 1)")
    _check(cfg.weight_init_scale > 0, "weight_init_scale", "must be positive")
    _check(cfg.critic_init_scale > 0, "critic_init_scale", "must be positive")
    _check(cfg.eval_samples >= 2, "eval_samples", "must be >= 2")
    _check(cfg.synth_kind in SYNTH_KINDS, "synth_kind", f"must be one of {SYNTH_KINDS}")
    _check(cfg.synth_n >= 2, "synth_n", "must be >= 2")
    _check(cfg.synth_size >= 2, "synth_size", "must be >= 2")
    _check(cfg.synth_jitter >= 0, "synth_jitter", "must be >= 0")
    _check(cfg.checkpoint_every >= 1, "checkpoint_every", "must be >= 1")
    _check(cfg.emit_images >= 0, "emit_images", "must be >= 0")
    _check(0 < cfg.variance_threshold <= 1, "variance_threshold", "must be in (0, 1]")


def _line_numbers(text):
    """Maps each key to the (1-based) line it is defined on."""
    numbers = {}
    pattern = re.compile(r"^\s*(?:export\s+)?([A-Za-z_][A-Za-z0-9_.]*)\s*=?")
    for index, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        match = pattern.match(line)
        if match:
            numbers[match.group(1)] = index
    return numbers


def parse_run_config(text):
    """Parses `key = value` text into a validated RunConfig."""
    values = dotenv_values(stream=io.StringIO(text), interpolate=False)
    lines = _line_numbers(text)
    kinds = {f.name: f.type for f in dataclasses.fields(RunConfig)}

    parsed = {}
    for key, raw in values.items():
        line = lines.get(key)
        if key not in kinds:
            raise ConfigError("unknown key", field=key, line=line)
        parsed[key] = _coerce(key, kinds[key], raw, line)

    try:
        return RunConfig(**parsed)
    except ConfigError as e:
        if e.field is not None and e.line is None and e.field in lines:
            raise ConfigError(str(e).split(": ", 1)[-1], field=e.field, line=lines[e.field]) from None
        raise


def load_run_config(path):
    """Reads and validates a run configuration file."""
    path = pathlib.Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    logger.info(f"Loaded run configuration from {path}")
    return parse_run_config(text)
