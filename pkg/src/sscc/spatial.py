"""Window geometry, Poisson sampling, distances and the lens-area primitive."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Literal

import numpy as np
from scipy.spatial import cKDTree

EdgeMode = Literal["border_crop", "torus"]
EDGE_MODES = ("border_crop", "torus")


@dataclass(frozen=True)
class Window:
    """Square observation window ``[0, L]^2``.

    Metrics are read off the centred evaluation square of side
    ``evaluation_fraction * L`` so that edge effects of the cropped window do
    not leak into estimates. In ``torus`` mode the window wraps around and
    every point is interior.
    """

    side_length: float
    edge_mode: EdgeMode = "border_crop"
    evaluation_fraction: float = 1.0 / 3.0

    def __post_init__(self):
        if not np.isfinite(self.side_length) or self.side_length <= 0:
            raise ValueError(f"side_length must be positive, got {self.side_length}")
        if self.edge_mode not in EDGE_MODES:
            raise ValueError(f"edge_mode must be one of {EDGE_MODES}, got {self.edge_mode!r}")
        if not 0 < self.evaluation_fraction <= 1:
            raise ValueError("evaluation_fraction must lie in (0, 1]")

    @property
    def area(self) -> float:
        return self.side_length**2

    @property
    def evaluation_bounds(self) -> tuple[float, float]:
        half = 0.5 * self.evaluation_fraction * self.side_length
        centre = 0.5 * self.side_length
        return centre - half, centre + half

    @property
    def evaluation_area(self) -> float:
        lo, hi = self.evaluation_bounds
        return (hi - lo) ** 2

    def in_evaluation(self, xy: np.ndarray) -> np.ndarray:
        lo, hi = self.evaluation_bounds
        xy = np.asarray(xy, dtype=float)
        return np.all((xy >= lo) & (xy < hi), axis=-1)

    def contains(self, xy: np.ndarray) -> np.ndarray:
        xy = np.asarray(xy, dtype=float)
        return np.all((xy >= 0) & (xy <= self.side_length), axis=-1)

    def uniform(self, rng: np.random.Generator, n: int, evaluation_only: bool = False) -> np.ndarray:
        """``n`` uniform locations in the window or in its evaluation square."""
        if evaluation_only:
            lo, hi = self.evaluation_bounds
            return rng.uniform(lo, hi, size=(n, 2))
        return rng.uniform(0.0, self.side_length, size=(n, 2))

    def kdtree(self, xy: np.ndarray) -> cKDTree:
        if self.edge_mode == "torus":
            # cKDTree needs coordinates strictly below boxsize
            xy = np.mod(xy, self.side_length)
            return cKDTree(xy, boxsize=self.side_length)
        return cKDTree(xy)


@dataclass(frozen=True)
class Point2D:
    x: float
    y: float


@dataclass(frozen=True)
class MarkedPoint:
    location: Point2D
    mark: float = 0.0
    weight: float = 0.0

    def __post_init__(self):
        if self.mark < 0:
            raise ValueError("mark must be non-negative")
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError("weight must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class PointPattern:
    """Finite point set in a window, stored column-wise.

    ``coords`` is ``(n, 2)``; ``marks`` and ``weights`` are length ``n``.
    Arrays are made read-only so a pattern can be shared between items and
    threads.
    """

    window: Window
    coords: np.ndarray
    marks: np.ndarray = field(default=None)
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float).reshape(-1, 2)
        n = len(coords)
        marks = np.zeros(n) if self.marks is None else np.array(self.marks, dtype=float)
        weights = np.zeros(n) if self.weights is None else np.array(self.weights, dtype=float)
        if marks.shape != (n,) or weights.shape != (n,):
            raise ValueError("marks and weights must have one entry per point")
        if np.any(marks < 0):
            raise ValueError("marks must be non-negative")
        if np.any((weights < 0) | (weights > 1)):
            raise ValueError("weights must lie in [0, 1]")
        if not np.all(self.window.contains(coords)):
            raise ValueError("all points must lie inside the window")
        for name, arr in (("coords", coords), ("marks", marks), ("weights", weights)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.coords)

    def __iter__(self) -> Iterator[MarkedPoint]:
        return iter(self.points)

    @property
    def points(self) -> list[MarkedPoint]:
        return [
            MarkedPoint(Point2D(float(x), float(y)), float(m), float(v))
            for (x, y), m, v in zip(self.coords, self.marks, self.weights)
        ]

    def with_marks(self, marks=None, weights=None) -> "PointPattern":
        return PointPattern(
            self.window,
            self.coords,
            self.marks if marks is None else marks,
            self.weights if weights is None else weights,
        )

    def subset(self, index) -> "PointPattern":
        return PointPattern(self.window, self.coords[index], self.marks[index], self.weights[index])

    def evaluation_mask(self) -> np.ndarray:
        return self.window.in_evaluation(self.coords)


def sample_ppp(intensity: float, window: Window, rng: np.random.Generator) -> PointPattern:
    """Homogeneous Poisson point process of the given intensity on ``window``."""
    if not np.isfinite(intensity) or intensity <= 0:
        raise ValueError(f"intensity must be positive, got {intensity}")
    n = rng.poisson(intensity * window.area)
    return PointPattern(window, window.uniform(rng, n))


def distance(a: Point2D, b: Point2D, window: Window) -> float:
    """Euclidean distance, or the minimal wrapped distance on a torus window."""
    return float(pairwise_distance(np.array([a.x, a.y]), np.array([b.x, b.y]), window))


def pairwise_distance(a: np.ndarray, b: np.ndarray, window: Window) -> np.ndarray:
    delta = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    if window.edge_mode == "torus":
        delta = np.minimum(delta, window.side_length - delta)
    return np.hypot(delta[..., 0], delta[..., 1])


class PairIndex:
    """Unordered close pairs of a pattern sorted by distance.

    Built once per mother pattern; ``within(r)`` returns the prefix of pairs at
    distance ``<= r`` without another tree query. Asking for a radius beyond
    the one the index was built for triggers a rebuild.
    """

    def __init__(self, pattern: PointPattern, radius: float):
        self.pattern = pattern
        self._build(radius)

    def _build(self, radius: float):
        window = self.pattern.window
        if len(self.pattern) < 2 or radius <= 0:
            pairs = np.empty((0, 2), dtype=np.intp)
        else:
            tree = window.kdtree(self.pattern.coords)
            pairs = tree.query_pairs(radius, output_type="ndarray")
        d = pairwise_distance(self.pattern.coords[pairs[:, 0]], self.pattern.coords[pairs[:, 1]], window)
        order = np.argsort(d, kind="stable")
        self.radius = float(radius)
        self.i = pairs[order, 0]
        self.j = pairs[order, 1]
        self.d = d[order]

    def within(self, radius: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if radius > self.radius:
            self._build(max(radius, 1.5 * self.radius))
        k = np.searchsorted(self.d, radius, side="right")
        return self.i[:k], self.j[:k], self.d[:k]


def lens_area(r, delta):
    """Intersection area of a disk of radius ``r`` and one of radius ``delta``
    whose centre lies on the boundary of the first (centre separation ``r``).

    Equals ``pi r^2`` once ``delta >= 2 r`` (first disk swallowed).
    """
    r = np.asarray(r, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if np.any(r < 0) or np.any(delta < 0):
        raise ValueError("lens_area arguments must be non-negative")
    r, delta = np.broadcast_arrays(r, delta)
    out = np.array(np.pi * r**2, dtype=float)
    part = (delta < 2 * r) & (delta > 0)
    rp, dp = r[part], delta[part]
    out[~part & (delta == 0)] = 0.0
    # circle-circle formula rewritten in t = delta / (2 r) to avoid cancellation:
    # area = delta^2 acos(t) + 2 r^2 (asin t - t sqrt(1 - t^2))
    t = dp / (2.0 * rp)
    bracket = np.where(
        t < 1e-3,
        (2.0 / 3.0) * t**3 + 0.2 * t**5,
        np.arcsin(np.minimum(t, 1.0)) - t * np.sqrt(np.maximum(1.0 - t * t, 0.0)),
    )
    out[part] = dp**2 * np.arccos(np.minimum(t, 1.0)) + 2.0 * rp**2 * bracket
    return out if out.ndim else float(out)
