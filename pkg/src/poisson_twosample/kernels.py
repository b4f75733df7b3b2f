"""Kernel constructors, pointwise evaluation, and Gram matrices.

Three kernel families are supported on top of the Haar basis of L2([0,1]):

* ``HaarNested(J)`` -- projection kernel onto the span of the constant
  function and all Haar wavelets up to level J-1.  Evaluated in O(1) through
  the same-dyadic-cell closed form (equal to 2^J when both arguments fall in
  the same level-J cell of [0,1)); the explicit basis sum is kept in
  ``haar_nested_basis_sum`` for cross-checking.
* ``HaarSingle(idx)`` -- rank-one projection kernel of a single basis
  function, ``idx`` being 0 (the constant) or ``(j, k)``.
* ``ApproxKernel(base, h)`` -- (1/h) k((x-x')/h) with a Gaussian or
  Epanechnikov profile k.
* ``GaussianRKHS(sigma)`` -- the reproducing kernel exp(-(x-x')^2/(2 sigma^2)).

Dyadic boundary convention: the mother wavelet is +1 on [0,1/2) and -1 on
[1/2,1); the constant basis function uses the closed interval [0,1].  Gram
matrices are dense symmetric float64 arrays built with the same numpy
expressions ``evaluate`` uses, so they match per-pair evaluation exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import integrate

_GAUSS_NORM = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class HaarNested:
    """Projection kernel onto Haar resolution J (dimension 2^J)."""

    level: int

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("haar resolution must be >= 0")


@dataclass(frozen=True)
class HaarSingle:
    """Rank-one kernel of one Haar basis function: index 0 or (j, k)."""

    index: Union[int, tuple[int, int]]

    def __post_init__(self):
        if self.index == 0:
            return
        j, k = self.index
        if j < 0 or not 0 <= k < 2**j:
            raise ValueError(f"invalid haar index {self.index!r}")


@dataclass(frozen=True)
class ApproxKernel:
    """(1/h) k((x-x')/h) with k gaussian or epanechnikov."""

    base: str
    bandwidth: float

    def __post_init__(self):
        if self.base not in ("gaussian", "epanechnikov"):
            raise ValueError(f"unknown approximation kernel base {self.base!r}")
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")


@dataclass(frozen=True)
class GaussianRKHS:
    """exp(-(x-x')^2 / (2 sigma^2))."""

    sigma: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")


KernelSpec = Union[HaarNested, HaarSingle, ApproxKernel, GaussianRKHS]


def _wavelet_scale(j: int) -> float:
    return float(np.sqrt(2.0**j))


def haar_eval(index, x):
    """Haar basis function: constant on [0,1] for index 0, else 2^{j/2} psi(2^j x - k)."""
    x = np.asarray(x, dtype=float)
    if index == 0:
        return np.where((x >= 0.0) & (x <= 1.0), 1.0, 0.0)
    j, k = index
    if j < 0 or not 0 <= k < 2**j:
        raise ValueError(f"invalid haar index {index!r}")
    t = x * 2.0**j - k
    psi = np.where((t >= 0.0) & (t < 0.5), 1.0, np.where((t >= 0.5) & (t < 1.0), -1.0, 0.0))
    return _wavelet_scale(j) * psi


def _nested_eval(level: int, x, y):
    # closed form: phi0 phi0 plus (2^J 1{same level-J cell of [0,1)} - 1)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    unit_x = (x >= 0.0) & (x <= 1.0)
    unit_y = (y >= 0.0) & (y <= 1.0)
    half_x = (x >= 0.0) & (x < 1.0)
    half_y = (y >= 0.0) & (y < 1.0)
    ncell = 2.0**level
    cx = np.where(half_x, np.floor(x * ncell), -1.0)
    cy = np.where(half_y, np.floor(y * ncell), -2.0)
    out = (unit_x & unit_y).astype(float)
    wav = np.where(half_x & half_y, ncell * (cx == cy) - 1.0, 0.0)
    return out + wav


def _approx_profile(base: str, u):
    if base == "gaussian":
        return _GAUSS_NORM * np.exp(-0.5 * u * u)
    return np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u * u), 0.0)


def evaluate(spec: KernelSpec, x, y):
    """Kernel value K(x, y); symmetric in (x, y) exactly. Broadcasts."""
    if isinstance(spec, HaarNested):
        return _nested_eval(spec.level, x, y)
    if isinstance(spec, HaarSingle):
        return haar_eval(spec.index, x) * haar_eval(spec.index, y)
    if isinstance(spec, ApproxKernel):
        u = (np.asarray(x, dtype=float) - np.asarray(y, dtype=float)) / spec.bandwidth
        return _approx_profile(spec.base, u) / spec.bandwidth
    if isinstance(spec, GaussianRKHS):
        d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        return np.exp(-(d * d) / (2.0 * spec.sigma**2))
    raise TypeError(f"unknown kernel spec {spec!r}")


def haar_nested_basis_sum(level: int, x, y):
    """HaarNested kernel as the explicit basis sum (cross-check form)."""
    out = haar_eval(0, x) * haar_eval(0, y)
    for j in range(level):
        for k in range(2**j):
            out = out + haar_eval((j, k), x) * haar_eval((j, k), y)
    return out


def gram(spec: KernelSpec, points: np.ndarray) -> np.ndarray:
    """Dense symmetric Gram matrix K(points_i, points_j).

    The diagonal is stored; chaos statistics subtract it rather than skip it.
    """
    points = np.asarray(points, dtype=float)
    if points.size == 0:
        return np.zeros((0, 0))
    if isinstance(spec, HaarSingle):
        v = haar_eval(spec.index, points)
        return v[:, None] * v[None, :]
    return np.asarray(evaluate(spec, points[:, None], points[None, :]), dtype=float)


def haar_project(s, level: int) -> np.ndarray:
    """Averages of ``s`` over the 2^level dyadic cells of [0,1].

    This is the piecewise-constant projection of s onto the span of the
    nested kernel's basis; intended as an integration oracle for tests.
    """
    edges = np.linspace(0.0, 1.0, 2**level + 1)
    vals = []
    for a, b in zip(edges[:-1], edges[1:]):
        integral, _ = integrate.quad(s, a, b, limit=200)
        vals.append(integral / (b - a))
    return np.array(vals)


def kernel_id(spec: KernelSpec) -> str:
    """Canonical string id of a kernel spec (inverse of kernel_from_id)."""
    if isinstance(spec, HaarNested):
        return f"haar:J={spec.level}"
    if isinstance(spec, HaarSingle):
        if spec.index == 0:
            return "haar1:0"
        j, k = spec.index
        return f"haar1:j={j},k={k}"
    if isinstance(spec, ApproxKernel):
        prefix = "gauss" if spec.base == "gaussian" else "epan"
        return f"{prefix}:h={spec.bandwidth:g}"
    if isinstance(spec, GaussianRKHS):
        return f"rkhs-gauss:sigma={spec.sigma:g}"
    raise TypeError(f"unknown kernel spec {spec!r}")


def kernel_from_id(kernel_str: str) -> KernelSpec:
    """Parse ids like ``haar:J=5``, ``haar1:j=3,k=2``, ``gauss:h=0.125``."""
    s = kernel_str.strip()
    try:
        head, _, rest = s.partition(":")
        if head == "haar":
            return HaarNested(int(rest.removeprefix("J=")))
        if head == "haar1":
            if rest == "0":
                return HaarSingle(0)
            jpart, kpart = rest.split(",")
            return HaarSingle((int(jpart.removeprefix("j=")), int(kpart.removeprefix("k="))))
        if head == "gauss":
            return ApproxKernel("gaussian", float(rest.removeprefix("h=")))
        if head == "epan":
            return ApproxKernel("epanechnikov", float(rest.removeprefix("h=")))
        if head == "rkhs-gauss":
            return GaussianRKHS(float(rest.removeprefix("sigma=")))
    except (ValueError, TypeError) as exc:
        raise ValueError(f"cannot parse kernel id {kernel_str!r}") from exc
    raise ValueError(f"unknown kernel id {kernel_str!r}")
