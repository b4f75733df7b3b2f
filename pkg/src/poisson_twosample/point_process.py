"""Poisson process simulation, pooling, and marks.

A process with intensity ``n * f`` (f a probability density) is simulated by
the conditional construction: draw the point count from Poisson(n), then that
many i.i.d. locations from f.  Counts come from ``numpy.random.Generator
.poisson`` (inversion-by-multiplication below mean 10, PTRS transformed
rejection above) -- fixed here for reproducibility.

Pooling two processes keeps the points of the first followed by the points of
the second, with marks +1 and -1 respectively.  Points are not sorted: every
downstream statistic is invariant under joint permutations of (points, marks),
and determinism comes from seeding alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .intensity import IntensityModel
from .streams import rademacher_matrix


@dataclass(frozen=True)
class PointPattern:
    """Event locations of one simulated process, with its intensity scale."""

    points: np.ndarray
    scale_n: float

    def __post_init__(self):
        object.__setattr__(self, "points", np.asarray(self.points, dtype=float))

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class MarkedPool:
    """Pooled points with +-1 marks recording the originating process."""

    points: np.ndarray
    marks: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        marks = np.asarray(self.marks, dtype=np.int8)
        if points.shape != marks.shape:
            raise ValueError("points and marks must have equal length")
        if marks.size and not np.all(np.abs(marks) == 1):
            raise ValueError("marks must be +1 or -1")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "marks", marks)

    def __len__(self) -> int:
        return len(self.points)


def simulate(model: IntensityModel, n: float, rng: np.random.Generator) -> PointPattern:
    """One realization of the process with intensity ``n * model``."""
    if n <= 0:
        raise ValueError("intensity scale n must be positive")
    if abs(model.total_mass - 1.0) > 1e-12:
        raise ValueError("model must have total mass 1")
    count = int(rng.poisson(n))
    points = model.sample(rng, count) if count else np.empty(0)
    return PointPattern(points=np.asarray(points, dtype=float), scale_n=float(n))


def pool(n1: PointPattern, n_minus1: PointPattern) -> MarkedPool:
    """Superpose two patterns; marks +1 for the first, -1 for the second."""
    if n1.scale_n != n_minus1.scale_n:
        raise ValueError("patterns must share the same intensity scale n")
    points = np.concatenate([n1.points, n_minus1.points])
    marks = np.concatenate(
        [np.ones(len(n1), dtype=np.int8), -np.ones(len(n_minus1), dtype=np.int8)]
    )
    return MarkedPool(points=points, marks=marks)


def split_by_mark(pooled: MarkedPool) -> tuple[np.ndarray, np.ndarray]:
    """Recover the two original point multisets from a pool."""
    return pooled.points[pooled.marks == 1], pooled.points[pooled.marks == -1]


def draw_rademacher(count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` i.i.d. fair +-1 signs (int8)."""
    if count < 0:
        raise ValueError("count must be nonnegative")
    if count == 0:
        return np.zeros(0, dtype=np.int8)
    return rademacher_matrix(rng, 1, count)[0]


# ---------------------------------------------------------------------------
# CSV serialization: one value per line, exact decimal round-trip via
# shortest-representation formatting (repr).  Patterns use header "x";
# pools use header "x,mark".
# ---------------------------------------------------------------------------


def write_pattern_csv(pattern: PointPattern, path) -> None:
    lines = ["x"] + [repr(float(v)) for v in pattern.points]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_pattern_csv(path, scale_n: float = 1.0) -> PointPattern:
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "x":
            raise ValueError(f"expected header 'x' in {path}, got {header!r}")
        points = [float(line) for line in fh if line.strip()]
    return PointPattern(points=np.array(points), scale_n=scale_n)


def write_pool_csv(pooled: MarkedPool, path) -> None:
    lines = ["x,mark"]
    for v, m in zip(pooled.points, pooled.marks):
        lines.append(f"{float(v)!r},{int(m)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_pool_csv(path) -> MarkedPool:
    points, marks = [], []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "x,mark":
            raise ValueError(f"expected header 'x,mark' in {path}, got {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            xs, ms = line.split(",")
            points.append(float(xs))
            marks.append(int(ms))
    return MarkedPool(points=np.array(points), marks=np.array(marks, dtype=np.int8))
