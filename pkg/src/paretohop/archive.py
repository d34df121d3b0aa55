"""Dominance, the nondominated archive and the hypervolume indicator."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .errors import CapabilityError, InputError
from .serialize import dumps, fmt_float

__all__ = [
    "EvaluatedPoint",
    "Front",
    "dominates",
    "nondominated_filter",
    "hypervolume",
    "hypervolume_mc",
    "reporting_hypervolume",
]


@dataclass(frozen=True, eq=False)
class EvaluatedPoint:
    """A decision vector with its cached objective vector.

    ``origin`` is one of ``initial``, ``rs_trial(k,j)`` or ``rs_final(k)``.
    """

    x: np.ndarray
    fx: np.ndarray
    origin: str = "initial"

    @property
    def key(self):
        return np.ascontiguousarray(self.x, dtype=float).tobytes()


def dominates(a, b):
    """True iff ``a <= b`` componentwise and ``a != b``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise InputError("objective vectors must have equal length")
    return bool(np.all(a <= b) and np.any(a < b))


def _objectives(points):
    if isinstance(points, Front):
        points = points.points
    if isinstance(points, np.ndarray):
        return np.atleast_2d(points).astype(float)
    rows = [p.fx if isinstance(p, EvaluatedPoint) else p for p in points]
    if not rows:
        return np.zeros((0, 0))
    return np.array(rows, dtype=float)


def _nondominated_mask_2d(F):
    # Sweep by (f0, f1, input index): a point survives iff its f1 beats every earlier one.
    order = np.lexsort((np.arange(F.shape[0]), F[:, 1], F[:, 0]))
    keep = np.zeros(F.shape[0], dtype=bool)
    best = np.inf
    for i in order:
        if F[i, 1] < best:
            keep[i] = True
            best = F[i, 1]
    return keep


def _nondominated_mask(F):
    if F.shape[1] == 2:
        return _nondominated_mask_2d(F)
    k = F.shape[0]
    keep = np.ones(k, dtype=bool)
    for i in range(k):
        le = np.all(F <= F[i], axis=1)
        lt = np.any(F < F[i], axis=1)
        if np.any(le & lt):
            keep[i] = False
            continue
        # Objective-space duplicates: only the earliest survives.
        same = np.all(F[:i] == F[i], axis=1)
        if np.any(same & keep[:i]):
            keep[i] = False
    return keep


def nondominated_filter(points):
    """Points not dominated by any other input point, in input order.

    Among points with identical objective vectors the earliest is kept.
    """
    points = list(points.points if isinstance(points, Front) else points)
    if not points:
        return Front(())
    keep = _nondominated_mask(_objectives(points))
    return Front(tuple(p for p, k in zip(points, keep) if k))


def dedupe_points(points):
    """Drop points whose decision vector is bit-identical to an earlier one."""
    seen = set()
    out = []
    for p in points:
        if p.key in seen:
            continue
        seen.add(p.key)
        out.append(p)
    return out


class Front:
    """Immutable list of mutually nondominated evaluated points.

    Updates return new fronts (copy on write), so snapshots can be shared
    between concurrent readers.
    """

    def __init__(self, points=()):
        self._points = tuple(points)

    @property
    def points(self):
        return self._points

    def __len__(self):
        return len(self._points)

    def __iter__(self):
        return iter(self._points)

    def __getitem__(self, idx):
        return self._points[idx]

    @property
    def objectives(self):
        return _objectives(self._points)

    @property
    def decisions(self):
        return np.array([p.x for p in self._points], dtype=float)

    def merged(self, new_points):
        """Front of ``self`` plus ``new_points`` after dedupe and filtering."""
        return nondominated_filter(dedupe_points(list(self._points) + list(new_points)))

    def is_mutually_nondominated(self):
        F = self.objectives
        for f in F:
            if np.any(np.all(F <= f, axis=1) & np.any(F < f, axis=1)):
                return False
        return True

    # -- serialisation --------------------------------------------------
    def to_records(self):
        return [{"x": p.x.tolist(), "fx": p.fx.tolist(), "origin": p.origin} for p in self._points]

    def to_json(self):
        return dumps(self.to_records())

    @classmethod
    def from_json(cls, text):
        try:
            records = json.loads(text)
            points = [
                EvaluatedPoint(np.array(r["x"], dtype=float), np.array(r["fx"], dtype=float), str(r.get("origin", "initial")))
                for r in records
            ]
        except (ValueError, KeyError, TypeError) as exc:
            raise InputError(f"malformed front JSON: {exc}") from exc
        return cls(points)

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        if not self._points:
            writer.writerow(["origin"])
            return buf.getvalue()
        n, m = self._points[0].x.size, self._points[0].fx.size
        writer.writerow([f"x_{i}" for i in range(n)] + [f"f_{i}" for i in range(m)] + ["origin"])
        for p in self._points:
            writer.writerow([fmt_float(v) for v in p.x] + [fmt_float(v) for v in p.fx] + [p.origin])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise InputError("empty front CSV")
        header = rows[0]
        xi = [i for i, h in enumerate(header) if h.startswith("x_")]
        fi = [i for i, h in enumerate(header) if h.startswith("f_")]
        if "origin" not in header:
            raise InputError("front CSV lacks an origin column")
        oi = header.index("origin")
        points = []
        try:
            for row in rows[1:]:
                if not row:
                    continue
                points.append(EvaluatedPoint(
                    np.array([float(row[i]) for i in xi]),
                    np.array([float(row[i]) for i in fi]),
                    row[oi],
                ))
        except (ValueError, IndexError) as exc:
            raise InputError(f"malformed front CSV: {exc}") from exc
        return cls(points)


# ---------------------------------------------------------------------------
# hypervolume
# ---------------------------------------------------------------------------


def _hv2d(F, ref):
    order = np.lexsort((F[:, 1], F[:, 0]))
    area = 0.0
    level = ref[1]
    for f0, f1 in F[order]:
        if f1 < level:
            area += (ref[0] - f0) * (level - f1)
            level = f1
    return area


def _hv3d(F, ref):
    order = np.argsort(F[:, 2], kind="stable")
    F = F[order]
    volume = 0.0
    for k in range(len(F)):
        top = F[k + 1, 2] if k + 1 < len(F) else ref[2]
        depth = top - F[k, 2]
        if depth > 0:
            volume += _hv2d(F[: k + 1, :2], ref[:2]) * depth
    return volume


def hypervolume(points, ref):
    """Exact volume of the union of boxes ``[f, ref]`` over the given points (m = 2 or 3).

    Dominated members are allowed and contribute nothing extra.

    Raises
    ------
    InputError
        If some objective vector does not dominate ``ref``.
    CapabilityError
        For m > 3; use :func:`hypervolume_mc`.
    """
    F = _objectives(points)
    ref = np.asarray(ref, dtype=float)
    if F.size == 0:
        return 0.0
    m = F.shape[1]
    if ref.shape != (m,):
        raise InputError("reference point has the wrong length")
    for f in F:
        if not dominates(f, ref):
            raise InputError(f"objective vector {f} does not dominate the reference point {ref}")
    if m == 1:
        return float(ref[0] - F[:, 0].min())
    if m == 2:
        return float(_hv2d(F, ref))
    if m == 3:
        return float(_hv3d(F, ref))
    raise CapabilityError("exact hypervolume is implemented for m <= 3; use hypervolume_mc")


def reporting_hypervolume(points, ref):
    """Hypervolume counting only points inside the reference box.

    Returns ``(value, n_outside)``; points with some objective above ``ref``
    contribute zero volume and are counted in ``n_outside``.
    """
    F = _objectives(points)
    if F.size == 0:
        return 0.0, 0
    inside = np.all(F <= ref, axis=1) & np.any(F < ref, axis=1)
    outside = int(np.sum(~np.all(F <= ref, axis=1)))
    return hypervolume(F[inside], ref) if inside.any() else 0.0, outside


def hypervolume_mc(points, ref, samples=1_000_000, seed=0, chunk=100_000):
    """Monte-Carlo hypervolume estimate and its standard error.

    Samples uniformly in the box spanned by the componentwise front minimum
    and ``ref``; deterministic for a given seed.
    """
    F = _objectives(points)
    ref = np.asarray(ref, dtype=float)
    if F.size == 0:
        return 0.0, 0.0
    if samples < 1:
        raise InputError("samples must be at least 1")
    low = F.min(axis=0)
    box = float(np.prod(ref - low))
    rng = np.random.default_rng(seed)
    hits = 0
    remaining = int(samples)
    while remaining > 0:
        size = min(chunk, remaining)
        u = rng.uniform(low, ref, size=(size, F.shape[1]))
        dominated = np.zeros(size, dtype=bool)
        for f in F:
            dominated |= np.all(u >= f, axis=1)
        hits += int(dominated.sum())
        remaining -= size
    frac = hits / samples
    return box * frac, box * np.sqrt(frac * (1.0 - frac) / samples)
