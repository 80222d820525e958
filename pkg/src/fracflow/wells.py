"""Double-well potentials with wells at 0 and 1."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class DoubleWell:
    """Smooth double-well W on [0,1] with W(0)=W(1)=0, W>0 inside,
    W'(0)=W'(1)=0 and W''(0)=W''(1)=alpha>0."""

    w: Callable
    dw: Callable
    ddw: Callable
    name: str = "well"

    def __post_init__(self):
        self.validate()

    @property
    def alpha(self) -> float:
        return float(self.ddw(0.0))

    @property
    def max_ddw(self) -> float:
        u = np.linspace(0.0, 1.0, 2001)
        return float(np.max(self.ddw(u)))

    @property
    def is_symmetric(self) -> bool:
        u = np.linspace(0.0, 1.0, 257)
        return bool(np.max(np.abs(self.dw(u) + self.dw(1.0 - u))) < 1e-12)

    def validate(self):
        u = np.linspace(0.0, 1.0, 2001)
        wu = self.w(u)
        if abs(wu[0]) > 1e-12 or abs(wu[-1]) > 1e-12:
            raise ValueError("W(0) and W(1) must vanish")
        if np.min(wu[1:-1]) <= 0:
            raise ValueError("W must be positive on (0,1)")
        if abs(self.dw(0.0)) > 1e-12 or abs(self.dw(1.0)) > 1e-12:
            raise ValueError("W'(0) and W'(1) must vanish")
        a0, a1 = self.ddw(0.0), self.ddw(1.0)
        if a0 <= 0 or abs(a0 - a1) > 1e-10 * max(1.0, abs(a0)):
            raise ValueError("W''(0) = W''(1) > 0 required")


def default_well() -> DoubleWell:
    """W(u) = u^2 (1-u)^2 / 2, the cleanest potential satisfying every hypothesis:
    W'(u) = u(1-u)(1-2u), W''(u) = 1 - 6u + 6u^2, alpha = 1."""
    return DoubleWell(
        w=lambda u: 0.5 * np.square(u) * np.square(1.0 - u),
        dw=lambda u: u * (1.0 - u) * (1.0 - 2.0 * u),
        ddw=lambda u: 1.0 - 6.0 * u + 6.0 * np.square(u),
        name="quartic",
    )
