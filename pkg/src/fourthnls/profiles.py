"""Spatial damping weight a(x) and temporal cutoff phi(t)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument
from .torus import TorusGrid

TWO_PI = 2 * np.pi


def smoothstep_c1(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3 - 2 * x)


def smoothstep_c2(x):
    x = np.clip(x, 0.0, 1.0)
    return x ** 3 * (10 - 15 * x + 6 * x * x)


@dataclass(frozen=True)
class DampingProfile:
    """Real weight a(x) >= 0 supported in a union of arcs of the torus.

    Each arc ``(start, stop)`` with ``start < stop <= start + 2pi`` carries a
    plateau ``level`` reached through a C^1 smoothstep of length ``width``
    measured inward from both ends, so a vanishes identically outside the
    arcs. ``floor`` is the constant eta with a^2 > eta on the plateau.
    An arc covering the whole circle gives the constant profile.
    """

    region: tuple = ((0.0, np.pi),)
    level: float = 1.0
    width: float = 0.3
    floor: float | None = None

    def __post_init__(self):
        arcs = tuple((float(lo), float(hi)) for lo, hi in self.region)
        if not arcs:
            raise InvalidArgument("damping region must contain at least one arc")
        for lo, hi in arcs:
            if not lo < hi <= lo + TWO_PI + 1e-12:
                raise InvalidArgument(f"bad arc ({lo}, {hi})")
            if hi - lo < TWO_PI - 1e-12 and 2 * self.width >= hi - lo:
                raise InvalidArgument(f"transition width {self.width} leaves no plateau on ({lo}, {hi})")
        if self.level < 0 or self.width < 0:
            raise InvalidArgument("level and width must be nonnegative")
        object.__setattr__(self, "region", arcs)
        eta = 0.5 * self.level ** 2 if self.floor is None else float(self.floor)
        if self.level > 0 and not 0 < eta < self.level ** 2:
            raise InvalidArgument(f"floor must satisfy 0 < eta < level^2, got {eta}")
        object.__setattr__(self, "floor", eta)

    @classmethod
    def constant(cls, level: float) -> DampingProfile:
        return cls(region=((0.0, TWO_PI),), level=level, width=0.0)

    @classmethod
    def zero(cls) -> DampingProfile:
        return cls(region=((0.0, TWO_PI),), level=0.0, width=0.0)

    @property
    def is_constant(self) -> bool:
        return any(hi - lo >= TWO_PI - 1e-12 for lo, hi in self.region)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for lo, hi in self.region:
            length = hi - lo
            if length >= TWO_PI - 1e-12:
                return np.full_like(x, self.level)
            d = np.mod(x - lo, TWO_PI)
            inside = d < length
            edge = np.minimum(d, length - d)
            ramp = smoothstep_c1(edge / self.width) if self.width > 0 else np.ones_like(x)
            out = np.maximum(out, np.where(inside, self.level * ramp, 0.0))
        return out

    def samples(self, grid: TorusGrid) -> np.ndarray:
        return self(grid.points)

    def plateau_mask(self, grid: TorusGrid) -> np.ndarray:
        """Grid points where the floor a^2 > eta is guaranteed."""
        return self.samples(grid) ** 2 > self.floor

    def support_mask(self, grid: TorusGrid) -> np.ndarray:
        return self.samples(grid) > 0

    def enlarged(self, margin: float) -> DampingProfile:
        """Same profile on arcs widened by ``margin`` at both ends."""
        arcs = tuple((lo - margin, min(hi + margin, lo - margin + TWO_PI)) for lo, hi in self.region)
        return DampingProfile(arcs, self.level, self.width, self.floor)

    def to_dict(self) -> dict:
        return {"region": [list(a) for a in self.region], "level": self.level,
                "width": self.width, "floor": self.floor}


@dataclass(frozen=True)
class CutoffProfile:
    """Temporal cutoff phi on [0, T].

    ``kind="bump"`` rises from 0 to 1 on [0, T/3] through a C^2 smoothstep,
    stays at 1 on [T/3, 2T/3] and falls back to 0 at T. ``kind="constant"``
    is phi = 1 everywhere, a test mode that skips the plateau construction.
    """

    T: float
    kind: str = "bump"
    _ramp: float = field(init=False, repr=False, default=0.0)

    def __post_init__(self):
        if not self.T > 0:
            raise InvalidArgument(f"cutoff horizon must be positive, got {self.T}")
        if self.kind not in ("bump", "constant"):
            raise InvalidArgument(f"unknown cutoff kind {self.kind!r}")
        object.__setattr__(self, "_ramp", self.T / 3)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "constant":
            return np.ones_like(t)
        up = smoothstep_c2(t / self._ramp)
        down = smoothstep_c2((self.T - t) / self._ramp)
        return np.where((t <= 0) | (t >= self.T), 0.0, np.minimum(up, down))

    def to_dict(self) -> dict:
        return {"T": self.T, "kind": self.kind}
