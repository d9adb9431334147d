"""Artifact persistence: atomic writes, dataset CSV, JSON/JSONL helpers."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .world import ACTION_DIM, EFFECT_DIM, OBJECT_DIM

DATASET_MAGIC = "# curiosym-dataset v1"
COLUMNS = (
    ["s_x", "s_y", "d", "t"]
    + [f"{k}{i}" for i in (1, 2, 3) for k in ("x", "y", "z", "g")]
    + ["dx", "dy", "dz"]
)


class ArtifactError(RuntimeError):
    """A required artifact is missing or unreadable."""


class ArtifactMismatch(ArtifactError):
    """Artifacts produced under different configurations were combined."""


def atomic_write_bytes(path: Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def sha256_hex(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def fmt(x: float) -> str:
    return repr(float(x))


@dataclass
class Dataset:
    """Transitions as three aligned arrays."""

    objects: np.ndarray
    actions: np.ndarray
    effects: np.ndarray

    @classmethod
    def empty(cls) -> "Dataset":
        return cls(np.zeros((0, OBJECT_DIM)), np.zeros((0, ACTION_DIM)), np.zeros((0, EFFECT_DIM)))

    def __len__(self) -> int:
        return len(self.objects)

    def subset(self, idx) -> "Dataset":
        return Dataset(self.objects[idx], self.actions[idx], self.effects[idx])

    def rows(self) -> np.ndarray:
        return np.concatenate([self.objects, self.actions, self.effects], axis=1)

    def digest(self) -> str:
        return sha256_hex(np.ascontiguousarray(self.rows(), dtype="<f8").tobytes())


class DatasetWriter:
    """Append-only CSV writer; the file is renamed into place on ``close``.

    Rows are flushed as they arrive to a temporary sibling so a crashed run
    never leaves a truncated file under the final name.
    """

    def __init__(self, path, config_hash: str = ""):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        fd, self._tmp = tempfile.mkstemp(prefix=f".{self.path.name}.", suffix=".tmp", dir=self.path.parent)
        self._fh = os.fdopen(fd, "w", newline="")
        self._fh.write(f"{DATASET_MAGIC} config={config_hash}\n")
        self._csv = csv.writer(self._fh, lineterminator="\n")
        self._csv.writerow(COLUMNS)
        self.count = 0

    def append(self, o, a, e) -> None:
        self._csv.writerow([fmt(v) for v in np.concatenate([o, a, e])])
        self._fh.flush()
        self.count += 1

    def close(self) -> None:
        self._fh.flush()
        os.fsync(self._fh.fileno())
        self._fh.close()
        os.replace(self._tmp, self.path)

    def abort(self) -> None:
        self._fh.close()
        if os.path.exists(self._tmp):
            os.unlink(self._tmp)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.close()
        else:
            self.abort()


def dataset_to_text(ds: Dataset, config_hash: str = "") -> str:
    buf = io.StringIO()
    buf.write(f"{DATASET_MAGIC} config={config_hash}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in ds.rows():
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_dataset(path, ds: Dataset, config_hash: str = "") -> None:
    atomic_write_text(Path(path), dataset_to_text(ds, config_hash))


def read_dataset(path) -> tuple[Dataset, str]:
    """Return the dataset and the config hash recorded in its first line."""
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"dataset not found: {path}")
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith(DATASET_MAGIC):
            raise ArtifactError(f"{path} is not a dataset file")
        config_hash = first.strip().partition("config=")[2]
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != COLUMNS:
            raise ArtifactError(f"{path} has an unexpected header")
        rows = [[float(v) for v in r] for r in reader if r]
    if not rows:
        return Dataset.empty(), config_hash
    arr = np.array(rows)
    if arr.shape[1] != len(COLUMNS):
        raise ArtifactError(f"{path} has malformed rows")
    return (
        Dataset(arr[:, :OBJECT_DIM], arr[:, OBJECT_DIM : OBJECT_DIM + ACTION_DIM], arr[:, -EFFECT_DIM:]),
        config_hash,
    )


def write_json(path, obj) -> None:
    atomic_write_text(Path(path), json.dumps(obj, sort_keys=True, indent=2) + "\n")


def read_json(path):
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"artifact not found: {path}")
    return json.loads(path.read_text())


def write_jsonl(path, records) -> None:
    atomic_write_text(Path(path), "".join(canonical_json(r) + "\n" for r in records))


def read_jsonl(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise ArtifactError(f"artifact not found: {path}")
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


def check_same_config(*hashes: str) -> str:
    """All non-empty hashes must agree; returns the shared one."""
    seen = {h for h in hashes if h}
    if len(seen) > 1:
        raise ArtifactMismatch(f"artifacts come from different configurations: {sorted(seen)}")
    return seen.pop() if seen else ""
