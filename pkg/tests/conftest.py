import os
import sys
import tempfile
from pathlib import Path

import numpy as np
import pytest

# Ensure the project root is on sys.path so tests can import modules like
# `qcircuit`, `training`, and `server` when running via pytest.
PROJECT_ROOT = Path(__file__).resolve().parents[1]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

# Keep runs and samples out of the real ~/.qigl; must happen before `config` is imported.
os.environ.setdefault("QIGL_DATA_DIR", tempfile.mkdtemp(prefix="qigl-tests-"))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def write_pgm(path, width, height, pixels):
    header = f"P5\n{width} {height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + bytes(int(p) for p in pixels))
