"""Named smooth boundary functions used by the CLI and the acceptance suite."""
from __future__ import annotations

import numpy as np

from .errors import InvalidArgumentError
from .geometry import circle_point


def constant(d: int):
    x0 = np.zeros(d + 1)
    x0[0] = 1.0

    def f(s):
        s = np.asarray(s, dtype=np.float64)
        return np.broadcast_to(x0, s.shape + (d + 1,)).copy()

    return f, f


def circle_sin():
    """Circle-valued data with angles sin(u) on the u-ray and v/2 on the v-ray."""
    return (lambda u: circle_point(np.sin(u))), (lambda v: circle_point(np.asarray(v) / 2.0))


def circle_sin_exact(u, v):
    """Exact wave map for ``circle_sin``: angles add on the circle."""
    return circle_point(np.sin(u) + np.asarray(v) / 2.0)


def great_circle_precession(rate_plus: float = 0.5, rate_minus: float = 0.3):
    """S^2 data: unit-speed great circles from e0 whose planes precess slowly about e0."""

    def plus(u):
        u = np.asarray(u, dtype=np.float64)
        return np.stack([np.cos(u), np.sin(u) * np.cos(rate_plus * u), np.sin(u) * np.sin(rate_plus * u)], axis=-1)

    def minus(v):
        v = np.asarray(v, dtype=np.float64)
        return np.stack([np.cos(v), np.sin(v) * np.sin(rate_minus * v), np.sin(v) * np.cos(rate_minus * v)], axis=-1)

    return plus, minus


PRESETS = ("constant", "circle-sin", "great-circle-precession")


def get(name: str, d: int):
    if name == "constant":
        return constant(d)
    if name == "circle-sin":
        if d != 1:
            raise InvalidArgumentError("preset circle-sin is circle-valued (d = 1)")
        return circle_sin()
    if name == "great-circle-precession":
        if d != 2:
            raise InvalidArgumentError("preset great-circle-precession needs d = 2")
        return great_circle_precession()
    raise InvalidArgumentError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
