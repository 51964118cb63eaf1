"""Grouping instruments by spectral width, and listener confusion matrices."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

MODES = ("plucked", "struck", "bowed")
RECORD_MODES = MODES + ("unknown",)


@dataclass(frozen=True)
class WidthRecord:
    instrument: str
    mode: str
    width: float

    def __post_init__(self):
        if self.mode not in RECORD_MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if not (np.isfinite(self.width) and self.width > 0):
            raise ValueError(f"width must be finite and positive, got {self.width!r}")


@dataclass(frozen=True)
class GroupRange:
    group: int
    mode: str
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"group {self.group}: need lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)


# width ranges read off the string-instrument study; groups 3 and 4 overlap
DEFAULT_RANGES = (
    GroupRange(1, "plucked", 0.55, 0.75),
    GroupRange(2, "plucked", 0.35, 0.50),
    GroupRange(3, "plucked", 0.80, 0.85),
    GroupRange(4, "bowed", 0.80, 0.90),
    GroupRange(5, "struck", 0.50, 0.55),
)

# (instrument, mode, group, width) for the 26 reference instruments
TABLE1 = (
    ("Banjo", "plucked", 1, 0.672),
    ("Cittern", "plucked", 1, 0.630),
    ("Dotara", "plucked", 1, 0.643),
    ("Ektara", "plucked", 1, 0.723),
    ("Harp", "plucked", 1, 0.686),
    ("Hawaian Guitar", "plucked", 1, 0.632),
    ("Kora", "plucked", 1, 0.626),
    ("Mohan Veena", "plucked", 1, 0.717),
    ("Spanish Guitar", "plucked", 1, 0.749),
    ("English Guitar", "plucked", 1, 0.716),
    ("Portuguese Guitar", "plucked", 1, 0.584),
    ("Harpichord", "plucked", 1, 0.675),
    ("Sarod", "plucked", 1, 0.702),
    ("Murchang", "plucked", 1, 0.715),
    ("Sitar", "plucked", 2, 0.428),
    ("Veena", "plucked", 2, 0.483),
    ("Rudra Veena", "plucked", 2, 0.387),
    ("Surbahar", "plucked", 2, 0.495),
    ("Tanpura", "plucked", 2, 0.506),
    ("Mandolin", "plucked", 3, 0.824),
    ("Mandriola", "plucked", 3, 0.812),
    ("Esraj", "bowed", 4, 0.803),
    ("Rawanhata", "bowed", 4, 0.896),
    ("Sarengi", "bowed", 4, 0.912),
    ("Piano", "struck", 5, 0.531),
    ("Santoor", "struck", 5, 0.515),
)

# listener percentages, rows = true mode, columns = perceived mode
TABLE2_PERCENT = (
    (73.14, 23.14, 3.71),
    (22.0, 78.0, 0.0),
    (4.0, 1.0, 95.0),
)


def table1_records() -> list[WidthRecord]:
    return [WidthRecord(name, mode, width) for name, mode, _, width in TABLE1]


def load_ranges(path) -> tuple[GroupRange, ...]:
    """Read group ranges from JSON: ``{"groups": [{"group", "mode", "lo", "hi"}, ...]}``."""
    doc = json.loads(Path(path).read_text())
    items = doc["groups"] if isinstance(doc, dict) else doc
    ranges = tuple(GroupRange(int(g["group"]), str(g["mode"]).lower(), float(g["lo"]), float(g["hi"])) for g in items)
    if not ranges:
        raise ValueError("no group ranges in configuration")
    return ranges


# -- clustering ---------------------------------------------------------------


@dataclass
class ClusterResult:
    """``labels[i]`` indexes ``centroids``, which are sorted ascending."""

    labels: np.ndarray
    centroids: np.ndarray
    inertia: float
    n_iter: int


def _assign(values, centroids):
    # nearest centroid; ties go to the lower one
    return np.argmin(np.abs(values[:, None] - centroids[None, :]), axis=1)


def kmeans_1d(values: Sequence[float], k: int, max_iter: int = 300) -> ClusterResult:
    """Lloyd iterations on scalars, started from quantiles of the distinct
    values and run until the assignment stops changing.

    The result depends only on the multiset of values, never on their order.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("need a non-empty 1-D array of widths")
    if not np.all(np.isfinite(x)):
        raise ValueError("widths must be finite")
    if int(k) != k or k < 1 or k > x.size:
        raise ValueError(f"k must be an integer in [1, {x.size}], got {k!r}")
    distinct = np.unique(x)
    if distinct.size < k:
        raise ValueError(f"fewer distinct values than k ({distinct.size} < {k})")

    order = np.argsort(x, kind="stable")
    xs = x[order]
    centroids = np.quantile(distinct, (np.arange(k) + 0.5) / k)
    labels = _assign(xs, centroids)
    for n_iter in range(1, max_iter + 1):
        for j in range(k):
            members = xs[labels == j]
            if members.size:
                centroids[j] = members.mean()
            else:
                # re-seed an empty cluster at the worst-fit point
                far = np.argmax(np.abs(xs - centroids[labels]))
                centroids[j] = xs[far]
        centroids = np.sort(centroids)
        new = _assign(xs, centroids)
        if np.array_equal(new, labels):
            break
        labels = new

    out = np.empty_like(labels)
    out[order] = labels
    inertia = float(np.sum((x - centroids[out]) ** 2))
    return ClusterResult(labels=out, centroids=centroids, inertia=inertia, n_iter=n_iter)


def optimal_kmeans_1d(values: Sequence[float], k: int) -> ClusterResult:
    """Globally optimal 1-D k-means by dynamic programming over sorted splits.

    The optimum is also a fixpoint of the Lloyd iteration, so it is a valid
    k-means solution; unlike Lloyd it cannot stall in a local minimum.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("need a non-empty 1-D array of widths")
    if not np.all(np.isfinite(x)):
        raise ValueError("widths must be finite")
    if int(k) != k or k < 1 or k > x.size:
        raise ValueError(f"k must be an integer in [1, {x.size}], got {k!r}")
    if np.unique(x).size < k:
        raise ValueError(f"fewer distinct values than k ({np.unique(x).size} < {k})")

    order = np.argsort(x, kind="stable")
    xs = x[order]
    n = xs.size
    c1 = np.concatenate([[0.0], np.cumsum(xs)])
    c2 = np.concatenate([[0.0], np.cumsum(xs * xs)])

    def sse(i, j):  # cost of xs[i:j]
        m = j - i
        return c2[j] - c2[i] - (c1[j] - c1[i]) ** 2 / m

    cost = np.full((k + 1, n + 1), np.inf)
    split = np.zeros((k + 1, n + 1), dtype=np.int64)
    cost[0, 0] = 0.0
    for c in range(1, k + 1):
        for j in range(c, n + 1):
            best, arg = np.inf, c - 1
            for i in range(c - 1, j):
                # equal values must share a cluster
                if 0 < i < n and xs[i - 1] == xs[i]:
                    continue
                v = cost[c - 1, i] + sse(i, j)
                if v < best:
                    best, arg = v, i
            cost[c, j], split[c, j] = best, arg

    labels_sorted = np.empty(n, dtype=np.int64)
    j = n
    for c in range(k, 0, -1):
        i = split[c, j]
        labels_sorted[i:j] = c - 1
        j = i
    centroids = np.array([xs[labels_sorted == c].mean() for c in range(k)])
    labels = np.empty_like(labels_sorted)
    labels[order] = labels_sorted
    inertia = float(np.sum((x - centroids[labels]) ** 2))
    return ClusterResult(labels=labels, centroids=centroids, inertia=inertia, n_iter=0)


def cluster_widths(records: Sequence[WidthRecord], k: int, method: str = "optimal") -> ClusterResult:
    """Cluster record widths; ``method`` is ``"optimal"`` (exact) or ``"lloyd"``."""
    widths = [r.width for r in records]
    if method == "optimal":
        return optimal_kmeans_1d(widths, k)
    if method == "lloyd":
        return kmeans_1d(widths, k)
    raise ValueError(f"unknown clustering method {method!r}")


# -- range lookup -------------------------------------------------------------


@dataclass(frozen=True)
class ModeCandidate:
    group: int
    mode: str
    distance: float  # from the interval midpoint
    in_range: bool


def assign_mode(width: float, ranges: Sequence[GroupRange] = DEFAULT_RANGES) -> list[ModeCandidate]:
    """Every group whose interval contains ``width``, closest midpoint first.

    When no interval contains it, the single nearest group is returned with
    ``in_range=False``.
    """
    if not ranges:
        raise ValueError("no group ranges given")
    hits = [
        ModeCandidate(g.group, g.mode, abs(width - g.midpoint), True)
        for g in ranges
        if g.lo <= width <= g.hi
    ]
    if hits:
        return sorted(hits, key=lambda c: (c.distance, c.group))
    nearest = min(ranges, key=lambda g: (min(abs(width - g.lo), abs(width - g.hi)), g.group))
    return [ModeCandidate(nearest.group, nearest.mode, abs(width - nearest.midpoint), False)]


# -- listener responses -------------------------------------------------------


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # (3, 3) true x perceived, float for fixtures
    percentages: np.ndarray
    empty_rows: list = field(default_factory=list)

    @classmethod
    def from_counts(cls, counts) -> "ConfusionMatrix":
        counts = np.asarray(counts, dtype=np.float64)
        if counts.shape != (len(MODES), len(MODES)):
            raise ValueError(f"confusion counts must be {len(MODES)}x{len(MODES)}")
        totals = counts.sum(axis=1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            pct = np.where(totals > 0, 100.0 * counts / totals, np.nan)
        empty = [MODES[i] for i in np.flatnonzero(totals[:, 0] == 0)]
        return cls(counts=counts, percentages=pct, empty_rows=empty)

    @classmethod
    def from_percentages(cls, percentages) -> "ConfusionMatrix":
        """Wrap an already tabulated percentage matrix (no raw counts)."""
        pct = np.asarray(percentages, dtype=np.float64)
        return cls(counts=np.full_like(pct, np.nan), percentages=pct)

    def render(self) -> str:
        """Text table: true mode per row, perceived mode per column, in percent."""
        header = ["", *(f"{m.capitalize()} (%)" for m in MODES)]
        rows = [header]
        for mode, row in zip(MODES, self.percentages):
            rows.append([mode.capitalize(), *("-" if np.isnan(v) else f"{round(float(v), 2):g}" for v in row)])
        widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
        return "\n".join("  ".join(cell.rjust(w) if i else cell.ljust(w) for i, (cell, w) in enumerate(zip(r, widths))) for r in rows)

    def to_dict(self) -> dict:
        def clean(a):
            return [[None if np.isnan(v) else float(v) for v in row] for row in a]

        return {
            "modes": list(MODES),
            "counts": clean(self.counts),
            "percentages": clean(self.percentages),
            "empty_rows": list(self.empty_rows),
        }


def confusion_matrix(responses: Iterable[tuple]) -> ConfusionMatrix:
    """Tally ``(listener, instrument, true_mode, perceived_mode)`` tuples."""
    counts = np.zeros((len(MODES), len(MODES)), dtype=np.int64)
    for _, _, true_mode, perceived in responses:
        try:
            counts[MODES.index(true_mode), MODES.index(perceived)] += 1
        except ValueError:
            raise ValueError(f"unknown mode in response: {true_mode!r} -> {perceived!r}") from None
    cm = ConfusionMatrix.from_counts(counts)
    cm.counts = counts
    return cm


# -- reporting ----------------------------------------------------------------


def group_report(records: Sequence[WidthRecord], labels: Sequence[int], ranges: Sequence[GroupRange] = DEFAULT_RANGES) -> dict:
    """Per-cluster instrument lists and width spans, plus plot triples."""
    if len(records) != len(labels):
        raise ValueError("records and labels differ in length")
    groups = []
    for label in sorted(set(int(v) for v in labels)):
        members = [r for r, lab in zip(records, labels) if lab == label]
        widths = [r.width for r in members]
        groups.append({
            "group": label + 1,
            "centroid": float(np.mean(widths)),
            "lo": float(min(widths)),
            "hi": float(max(widths)),
            "instruments": [r.instrument for r in members],
            "modes": sorted({r.mode for r in members}),
        })
    rows = []
    for r, lab in zip(records, labels):
        rows.append({
            "instrument": r.instrument,
            "mode": r.mode,
            "width": r.width,
            "group": int(lab) + 1,
            "candidates": [asdict(c) for c in assign_mode(r.width, ranges)],
        })
    return {
        "groups": groups,
        "records": rows,
        "plot": [(r.instrument, r.width, int(lab) + 1) for r, lab in zip(records, labels)],
    }
