"""Grid containers: periodic n-D scalar fields, 1D profiles, front polylines."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import TailError


@dataclass(frozen=True)
class ScalarField:
    """Samples of a real field on a periodic n-dimensional grid.

    `data[i, j, ...]` lives at x = (i + 1/2) * h in each axis (cell centers),
    with h = box / N and the same N along every axis.
    """

    data: np.ndarray
    box: float

    def __post_init__(self):
        object.__setattr__(self, "data", np.asarray(self.data, dtype=np.float64))
        if self.data.ndim < 1:
            raise ValueError("ScalarField needs at least one dimension")
        n0 = self.data.shape[0]
        if any(n != n0 for n in self.data.shape):
            raise ValueError("ScalarField requires equal grid size along every axis")

    @property
    def n(self) -> int:
        return self.data.ndim

    @property
    def npoints(self) -> int:
        return self.data.shape[0]

    @property
    def h(self) -> float:
        return self.box / self.npoints

    def axes(self):
        """Cell-center coordinates along one axis."""
        N = self.npoints
        return (np.arange(N) + 0.5) * self.h

    def meshgrid(self):
        ax = self.axes()
        return np.meshgrid(*([ax] * self.n), indexing="ij")

    def like(self, data: np.ndarray) -> "ScalarField":
        return ScalarField(data, self.box)


@dataclass(frozen=True)
class TailDescriptor:
    """Analytic description u(xi) ~ value + coeff * |xi|^(-decay) past one end of a profile grid.

    decay == 0 encodes a plain constant tail.
    """

    value: float
    coeff: float = 0.0
    decay: float = 0.0

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=np.float64)
        if self.decay == 0.0 or self.coeff == 0.0:
            return np.full_like(xi, self.value, dtype=np.float64)
        return self.value + self.coeff * np.abs(xi) ** (-self.decay)


@dataclass
class Profile1D:
    """A 1D profile on a (possibly nonuniform) symmetric grid with analytic tails.

    Periodic profiles set `periodic=True` and leave the tails as None; the grid
    is then uniform cell centers on [0, period).
    """

    xi: np.ndarray
    values: np.ndarray
    left_tail: Optional[TailDescriptor] = None
    right_tail: Optional[TailDescriptor] = None
    periodic: bool = False
    period: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.xi = np.asarray(self.xi, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.xi.shape != self.values.shape:
            raise ValueError("xi and values must have matching shapes")
        if np.any(np.isnan(self.values)):
            raise ValueError("profile contains NaN samples")
        if not self.periodic and np.any(np.diff(self.xi) <= 0):
            raise ValueError("xi grid must be strictly increasing")

    @property
    def half_width(self) -> float:
        return float(self.xi[-1])

    def require_tails(self):
        if self.periodic:
            return
        if self.left_tail is None or self.right_tail is None:
            raise TailError("profile is missing a tail descriptor")

    def evaluate(self, x):
        """Evaluate with monotone (pchip) interpolation inside, tails outside."""
        from scipy.interpolate import PchipInterpolator

        if self.periodic:
            raise ValueError("evaluate() is for line profiles; periodic profiles index directly")
        self.require_tails()
        interp = self.meta.get("_pchip")
        if interp is None:
            interp = PchipInterpolator(self.xi, self.values, extrapolate=False)
            self.meta["_pchip"] = interp
        x = np.asarray(x, dtype=np.float64)
        out = np.empty_like(x)
        lo = x < self.xi[0]
        hi = x > self.xi[-1]
        mid = ~(lo | hi)
        out[mid] = interp(x[mid])
        out[lo] = self.left_tail(x[lo])
        out[hi] = self.right_tail(x[hi])
        return out


@dataclass
class FrontCurve:
    """Closed/open polylines extracted from a level set, with ids per component.

    `curves` is a list of (k_i, 2) vertex arrays in physical coordinates,
    each closed implicitly (last vertex connects to first) when `closed[i]`.
    """

    curves: list
    closed: list

    def __post_init__(self):
        self.curves = [np.asarray(c, dtype=np.float64) for c in self.curves]
        if len(self.closed) != len(self.curves):
            raise ValueError("closed flags must match curves")

    @property
    def is_empty(self) -> bool:
        return len(self.curves) == 0

    def total_vertices(self) -> int:
        return int(sum(len(c) for c in self.curves))

    def all_vertices(self) -> np.ndarray:
        if self.is_empty:
            return np.zeros((0, 2))
        return np.concatenate(self.curves, axis=0)

    def segments(self) -> np.ndarray:
        """All segments as an (m, 2, 2) array (including closing segments)."""
        segs = []
        for c, cl in zip(self.curves, self.closed):
            if len(c) < 2:
                continue
            a = c
            b = np.roll(c, -1, axis=0)
            if not cl:
                a = c[:-1]
                b = c[1:]
            segs.append(np.stack([a, b], axis=1))
        if not segs:
            return np.zeros((0, 2, 2))
        return np.concatenate(segs, axis=0)


def stretched_grid(core_half: float, core_h: float, outer_half: float, ratio: float) -> np.ndarray:
    """Symmetric 1D grid: uniform spacing on [-core_half, core_half], then
    geometrically stretched cells out to +-outer_half. Always contains 0."""
    if outer_half < core_half:
        raise ValueError("outer_half must be >= core_half")
    ncore = int(round(core_half / core_h))
    core = np.arange(0, ncore + 1) * core_h
    pts = [core]
    x = core[-1]
    h = core_h
    while x < outer_half:
        h *= ratio
        x += h
        pts.append([x])
    right = np.concatenate(pts)
    return np.concatenate([-right[::-1][:-1], right])
