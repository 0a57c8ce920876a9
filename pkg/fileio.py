"""
Atomic file writes: data goes to a temporary sibling first and is renamed
into place, so readers never see a partial file.
"""

import os
import pathlib
import tempfile

from errors import ImageIOError


def atomic_write_bytes(path, data, error_cls=ImageIOError):
    """Writes `data` to `path` via temp-file-then-rename; raises error_cls(message, path) on failure."""
    path = pathlib.Path(path)
    tmp_name = None
    try:
        with tempfile.NamedTemporaryFile("wb", dir=path.parent, prefix=f".{path.name}.", delete=False) as tmp:
            tmp_name = tmp.name
            tmp.write(data)
            tmp.flush()
            os.fsync(tmp.fileno())
        os.replace(tmp_name, path)
    except OSError as e:
        if tmp_name is not None and os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise error_cls(f"cannot write {path}: {e}", path) from e


def atomic_write_text(path, text, error_cls=ImageIOError):
    atomic_write_bytes(path, text.encode("utf-8"), error_cls)
