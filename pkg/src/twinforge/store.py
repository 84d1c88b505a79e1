"""On-disk data set storage: one CSV per data set plus a JSON manifest.

Layout of a store root::

    manifest.json         entries, id counter, format version
    data/<id>.csv         t,T_oven,T_A,T_B  (one header row, 17 significant digits)

The manifest is rewritten atomically; writers hold ``.lock`` for the duration
of a save.
"""

from __future__ import annotations

import contextlib
import hashlib
import io
import json
import os
import re
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DuplicateId,
    IOFailure,
    NotFound,
    ParseFailure,
    StoreLocked,
    ValidationError,
)
from .fom import DataSet
from .signals import ExcitationSignal, SignalKind, TimeGrid

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1
CSV_HEADER = ("t", "T_oven", "T_A", "T_B")
_ID_RE = re.compile(r"^[A-Za-z0-9_-]+$")
_SUFFIX_RE = re.compile(r"(\d+)$")


def fmt(x: float) -> str:
    """Decimal text that round-trips a float64 exactly."""
    return "%.17g" % x


def feature_digest(ds: DataSet) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(ds.excitation.values).tobytes())
    h.update(np.ascontiguousarray(ds.outputs).tobytes())
    return h.hexdigest()[:16]


def provenance_digest(ds: DataSet) -> str:
    blob = json.dumps(ds.provenance, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def dataset_to_csv(ds: DataSet) -> str:
    buf = io.StringIO()
    buf.write(",".join(CSV_HEADER) + "\n")
    t = ds.grid.times
    g = ds.excitation.values
    y = ds.outputs
    for k in range(ds.grid.n_samples):
        buf.write(f"{fmt(t[k])},{fmt(g[k])},{fmt(y[0, k])},{fmt(y[1, k])}\n")
    return buf.getvalue()


def parse_dataset_csv(text: str):
    """Parse dataset CSV text into ``(times, T_oven, outputs)``.

    Lines starting with ``#`` are ignored. Raises :class:`ParseFailure` with
    the offending line number.
    """
    rows = []
    header_seen = False
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        cells = [c.strip() for c in stripped.split(",")]
        if not header_seen:
            if tuple(cells) != CSV_HEADER:
                raise ParseFailure(f"expected header {','.join(CSV_HEADER)!r}", lineno)
            header_seen = True
            continue
        if len(cells) != len(CSV_HEADER):
            raise ParseFailure(f"expected {len(CSV_HEADER)} columns, got {len(cells)}", lineno)
        try:
            rows.append([float(c) for c in cells])
        except ValueError as exc:
            raise ParseFailure(f"not a number: {exc}", lineno) from None
    if not header_seen:
        raise ParseFailure("missing header row", 1)
    if len(rows) < 2:
        raise ParseFailure("need at least two data rows")
    arr = np.array(rows)
    return arr[:, 0], arr[:, 1], arr[:, 2:].T.copy()


def grid_from_times(t: np.ndarray) -> TimeGrid:
    dt = float(t[1] - t[0])
    grid = TimeGrid(len(t), dt, float(t[0]))
    if not np.allclose(grid.times, t, rtol=0, atol=1e-9 * max(1.0, abs(t).max())):
        raise ValidationError("time column is not a uniform grid")
    return grid


@dataclass
class StoreManifest:
    root: Path
    entries: list = field(default_factory=list)
    next_number: int = 1

    @classmethod
    def open(cls, root) -> "StoreManifest":
        """Open (or initialise) the store at ``root``."""
        root = Path(root)
        path = root / MANIFEST_NAME
        if not path.exists():
            return cls(root)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseFailure(f"unreadable manifest {path}: {exc}") from None
        return cls(root, list(doc.get("entries", [])), int(doc.get("next_number", 1)))

    @property
    def ids(self) -> list:
        return [e["id"] for e in self.entries]

    def entry(self, ds_id: str) -> dict:
        for e in self.entries:
            if e["id"] == ds_id:
                return e
        raise NotFound(f"no data set {ds_id!r} in store {self.root}")

    def __contains__(self, ds_id) -> bool:
        return any(e["id"] == ds_id for e in self.entries)

    def _write_manifest(self) -> None:
        doc = {"version": MANIFEST_VERSION, "next_number": self.next_number, "entries": self.entries}
        text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
        _atomic_write(self.root / MANIFEST_NAME, text)

    @contextlib.contextmanager
    def lock(self):
        self.root.mkdir(parents=True, exist_ok=True)
        lock_path = self.root / ".lock"
        try:
            fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise StoreLocked(f"store {self.root} is locked by another writer") from None
        try:
            os.write(fd, str(os.getpid()).encode())
            yield
        finally:
            os.close(fd)
            os.unlink(lock_path)

    def next_id(self, kind: SignalKind) -> str:
        return f"{SignalKind(kind).prefix}{self.next_number:04d}"


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise IOFailure(f"could not write {path}: {exc}") from None


def save_dataset(ds: DataSet, store: StoreManifest, ds_id: str | None = None) -> str:
    """Write ``ds`` to the store and return its id.

    The id is taken from ``ds_id``, then ``ds.id``; when both are empty a
    kind-prefixed consecutive number is assigned.
    """
    if not np.all(np.isfinite(ds.outputs)) or not np.all(np.isfinite(ds.excitation.values)):
        raise ValidationError("data set contains non-finite values")
    with store.lock():
        # reload so ids issued by an earlier writer are respected
        fresh = StoreManifest.open(store.root)
        store.entries, store.next_number = fresh.entries, fresh.next_number
        new_id = ds_id or ds.id or store.next_id(ds.excitation.kind)
        if not _ID_RE.match(new_id):
            raise ValidationError(f"id {new_id!r} is not alphanumeric")
        if new_id in store:
            raise DuplicateId(f"data set {new_id!r} already stored")
        m = _SUFFIX_RE.search(new_id)
        if m:
            store.next_number = max(store.next_number, int(m.group(1)) + 1)
        ds = ds.with_id(new_id) if ds.id != new_id else ds
        rel = Path("data") / f"{new_id}.csv"
        _atomic_write(store.root / rel, dataset_to_csv(ds))
        store.entries.append(
            {
                "id": new_id,
                "kind": ds.excitation.kind.value,
                "file": rel.as_posix(),
                "feature_digest": feature_digest(ds),
                "provenance_digest": provenance_digest(ds),
                "seed": int(ds.excitation.seed),
                "grid": ds.grid.to_dict(),
                "jumps": [[t, d] for t, d in ds.excitation.jumps],
                "provenance": ds.provenance,
            }
        )
        store._write_manifest()
    return new_id


def load_dataset(ds_id: str, store: StoreManifest) -> DataSet:
    entry = store.entry(ds_id)
    path = store.root / entry["file"]
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"could not read {path}: {exc}") from None
    t, g, y = parse_dataset_csv(text)
    grid = grid_from_times(t)
    if "grid" in entry:
        stored = TimeGrid.from_dict(entry["grid"])
        if stored.n_samples != grid.n_samples or not np.allclose(stored.times, t):
            raise ValidationError(f"{path}: time column disagrees with the manifest grid")
        grid = stored
    signal = ExcitationSignal(
        grid,
        g,
        SignalKind(entry.get("kind", "APRBS")),
        tuple(tuple(j) for j in entry.get("jumps", [])),
        int(entry.get("seed", 0)),
        ds_id,
    )
    try:
        return DataSet(ds_id, signal, y, dict(entry.get("provenance", {})))
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None


def load_all(store: StoreManifest, ids=None) -> list:
    return [load_dataset(i, store) for i in (store.ids if ids is None else ids)]
