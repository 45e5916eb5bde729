"""Synthetic multi-scale datasets, CSV input/output and matrix images."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .core import DimensionError, ParameterError, as_square, relabel_canonical
from .similarity import as_points

SHAPES = ("rectangle", "disk", "half_ring")


class ParseError(ValueError):
    """Malformed CSV input; the message carries the row and column."""


@dataclass(frozen=True)
class LabeledPoints:
    points: np.ndarray
    truth: Optional[np.ndarray]
    name: str = "data"

    def __post_init__(self):
        pts = as_points(self.points)
        object.__setattr__(self, "points", pts)
        if self.truth is not None:
            truth = np.asarray(self.truth, dtype=np.int64).ravel()
            if truth.size != pts.shape[0]:
                raise DimensionError("truth must have one label per point")
            object.__setattr__(self, "truth", truth)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def k(self) -> int:
        return 0 if self.truth is None else int(np.unique(self.truth).size)


@dataclass(frozen=True)
class ClusterSpec:
    """One uniformly filled region.

    ``extent`` is ``(width, height)`` for a rectangle, ``(radius,)`` for a
    disk and ``(inner, outer, start_angle, span)`` for a ring sector
    (angles in radians). ``center`` is the rectangle/disk centre or the
    ring centre.
    """

    shape: str
    center: tuple
    extent: tuple
    count: int

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ParameterError(f"unknown shape {self.shape!r}")
        if self.count < 1:
            raise ParameterError("cluster point count must be >= 1")
        need = {"rectangle": 2, "disk": 1, "half_ring": 4}[self.shape]
        if len(self.extent) != need:
            raise ParameterError(f"{self.shape} extent needs {need} values")

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        cx, cy = self.center
        if self.shape == "rectangle":
            w, h = self.extent
            u = rng.random((count, 2))
            return np.column_stack([cx + (u[:, 0] - 0.5) * w, cy + (u[:, 1] - 0.5) * h])
        if self.shape == "disk":
            (r,) = self.extent
            rad = r * np.sqrt(rng.random(count))
            ang = 2 * np.pi * rng.random(count)
            return np.column_stack([cx + rad * np.cos(ang), cy + rad * np.sin(ang)])
        r0, r1, start, span = self.extent
        rad = np.sqrt(r0 ** 2 + (r1 ** 2 - r0 ** 2) * rng.random(count))
        ang = start + span * rng.random(count)
        return np.column_stack([cx + rad * np.cos(ang), cy + rad * np.sin(ang)])

    def contains(self, pts: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        cx, cy = self.center
        dx, dy = pts[:, 0] - cx, pts[:, 1] - cy
        if self.shape == "rectangle":
            w, h = self.extent
            return (np.abs(dx) <= w / 2 + tol) & (np.abs(dy) <= h / 2 + tol)
        if self.shape == "disk":
            return np.hypot(dx, dy) <= self.extent[0] + tol
        r0, r1, start, span = self.extent
        rad = np.hypot(dx, dy)
        rel = np.mod(np.arctan2(dy, dx) - start, 2 * np.pi)
        in_span = (rel <= span + tol) | (span >= 2 * np.pi - tol) | (rel >= 2 * np.pi - tol)
        return (rad >= r0 - tol) & (rad <= r1 + tol) & in_span


@dataclass(frozen=True)
class SynParams:
    clusters: tuple
    delta_d: float = 0.0
    delta_s: float = 0.0
    target: int = 0
    seed: int = 0

    def __post_init__(self):
        if not self.clusters:
            raise ParameterError("at least one cluster is required")
        if not 0 <= self.target < len(self.clusters):
            raise ParameterError(f"target must index one of {len(self.clusters)} clusters")
        for name in ("delta_d", "delta_s"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= -0.99):
                raise ParameterError(f"{name} must be >= -0.99, got {v}")


def syn1_params(seed: int = 0, delta_d: float = 0.0, delta_s: float = 0.0,
                counts: tuple = (500, 80, 120), target: int = 0) -> SynParams:
    """A sparse strip (0) between a small dense disk (1) and a dense rectangle (2)."""
    strip, disk, block = counts
    return SynParams(
        clusters=(
            ClusterSpec("rectangle", (6.0, 0.0), (12.0, 3.0), strip),
            ClusterSpec("disk", (-1.0, 0.0), (0.7,), disk),
            ClusterSpec("rectangle", (13.1, 0.0), (1.6, 2.4), block),
        ),
        delta_d=delta_d, delta_s=delta_s, target=target, seed=seed,
    )


def syn2_params(seed: int = 0, delta_d: float = 0.0, delta_s: float = 0.0,
                counts: tuple = (150, 150, 120), target: int = 2) -> SynParams:
    """Two dense squares (0, 1) cradled by a sparse lower half ring (2)."""
    left, right, ring = counts
    return SynParams(
        clusters=(
            ClusterSpec("rectangle", (-1.3, 0.0), (1.2, 1.2), left),
            ClusterSpec("rectangle", (1.3, 0.0), (1.2, 1.2), right),
            ClusterSpec("half_ring", (0.0, 0.0), (2.2, 2.8, np.pi, np.pi), ring),
        ),
        delta_d=delta_d, delta_s=delta_s, target=target, seed=seed,
    )


def _scaled_count(count: int, factor: float) -> int:
    return max(1, int(round(count * factor)))


def _generate(params: SynParams, specs: list, name: str) -> LabeledPoints:
    pts, labels = [], []
    for idx, spec in enumerate(specs):
        rng = np.random.default_rng(np.random.SeedSequence((params.seed, idx)))
        pts.append(spec.sample(rng, spec.count))
        labels.append(np.full(spec.count, idx))
    return LabeledPoints(points=np.vstack(pts), truth=np.concatenate(labels), name=name)


def effective_clusters(params: SynParams, kind: str) -> list:
    """Cluster specs after applying the density and size changes to the target."""
    specs = list(params.clusters)
    t = params.target
    tgt = specs[t]
    factor = (1.0 + params.delta_d) * (1.0 + params.delta_s)
    count = _scaled_count(tgt.count, factor)
    if params.delta_s == 0.0:
        specs[t] = replace(tgt, count=count)
    elif kind == "syn1":
        if tgt.shape != "rectangle":
            raise ParameterError("syn1 stretches a rectangular target")
        w, h = tgt.extent
        grow = w * params.delta_s
        left = tgt.center[0] - w / 2
        specs[t] = replace(tgt, center=(left + (w + grow) / 2, tgt.center[1]),
                           extent=(w + grow, h), count=count)
        # clusters to the right of the strip move with its right edge
        for i, s in enumerate(specs):
            if i != t and s.center[0] > tgt.center[0]:
                specs[i] = replace(s, center=(s.center[0] + grow, s.center[1]))
    else:
        if tgt.shape != "half_ring":
            raise ParameterError("syn2 widens a ring-sector target")
        if params.delta_s > 1.0:
            raise ParameterError("delta_s above 1 would exceed a whole ring")
        r0, r1, start, span = tgt.extent
        specs[t] = replace(tgt, extent=(r0, r1, start, span * (1.0 + params.delta_s)), count=count)
    return specs


def gen_syn1(params: Optional[SynParams] = None) -> LabeledPoints:
    """Strip / disk / rectangle data; ``delta_s`` lengthens the strip at fixed density."""
    params = params or syn1_params()
    return _generate(params, effective_clusters(params, "syn1"), "syn1")


def gen_syn2(params: Optional[SynParams] = None) -> LabeledPoints:
    """Squares beside a ring sector spanning ``pi * (1 + delta_s)`` radians."""
    params = params or syn2_params()
    return _generate(params, effective_clusters(params, "syn2"), "syn2")


# ---------------------------------------------------------------- CSV

def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_csv(path, label_column: str = "last") -> LabeledPoints:
    """Read a numeric comma-separated table, optionally with a header row.

    With ``label_column="last"`` the final column holds integer labels,
    which are renamed to ``0..k-1`` in order of first appearance.
    """
    if label_column not in ("last", "none"):
        raise ParameterError(f"label_column must be 'last' or 'none', got {label_column!r}")
    path = Path(path)
    with path.open(newline="") as fh:
        rows = [(i + 1, [c.strip() for c in row]) for i, row in enumerate(csv.reader(fh)) if row]
    if rows and not all(_is_number(c) for c in rows[0][1]):
        rows = rows[1:]
    if not rows:
        raise ParseError(f"{path}: no data rows")
    width = len(rows[0][1])
    values = np.empty((len(rows), width))
    for r, (lineno, row) in enumerate(rows):
        if len(row) != width:
            raise ParseError(f"{path}: row {lineno} has {len(row)} columns, expected {width}")
        for c, cell in enumerate(row):
            try:
                values[r, c] = float(cell)
            except ValueError:
                raise ParseError(f"{path}: row {lineno}, column {c + 1}: not a number: {cell!r}") from None
    truth = None
    if label_column == "last":
        if width < 2:
            raise ParseError(f"{path}: a labeled file needs at least two columns")
        raw = values[:, -1]
        if not np.all(raw == np.round(raw)):
            bad = int(np.flatnonzero(raw != np.round(raw))[0])
            raise ParseError(f"{path}: row {rows[bad][0]}, column {width}: label is not an integer")
        truth = relabel_canonical(raw.astype(np.int64))
        values = values[:, :-1]
    return LabeledPoints(points=values, truth=truth, name=path.stem)


def save_csv(data: LabeledPoints, path) -> None:
    """Write points (and labels, if any) with a header; floats round-trip exactly."""
    d = data.points.shape[1]
    header = [f"x{j}" for j in range(d)] + (["label"] if data.truth is not None else [])
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(data.n):
            row = [repr(float(v)) for v in data.points[i]]
            if data.truth is not None:
                row.append(str(int(data.truth[i])))
            w.writerow(row)


# ---------------------------------------------------------------- images

def matrix_to_gray(M, order) -> np.ndarray:
    """8-bit image of ``M`` with rows and columns grouped by ``order`` (stable)."""
    M = as_square(M, "M")
    order = np.asarray(order).ravel()
    if order.size != M.shape[0]:
        raise DimensionError("order must have one entry per row of M")
    perm = np.argsort(order, kind="stable")
    A = M[np.ix_(perm, perm)]
    lo, hi = A.min(), A.max()
    if hi <= lo:
        return np.zeros(A.shape, dtype=np.uint8)
    return np.rint((A - lo) / (hi - lo) * 255.0).astype(np.uint8)


def dump_matrix_image(M, order, path) -> None:
    """Write ``M`` as a binary portable graymap (P5)."""
    img = matrix_to_gray(M, order)
    h, w = img.shape
    with Path(path).open("wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a P5 graymap written by :func:`dump_matrix_image`."""
    raw = Path(path).read_bytes()
    magic, dims, maxval, body = raw.split(b"\n", 3)
    if magic != b"P5" or maxval != b"255":
        raise ParseError(f"{path}: not an 8-bit P5 graymap")
    w, h = (int(v) for v in dims.split())
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w)
