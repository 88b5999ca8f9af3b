"""Vector geometry on the unit sphere S^d inside R^(d+1).

Points are plain float64 arrays whose last axis holds the d+1 ambient
coordinates; every function broadcasts over leading axes.
"""
from __future__ import annotations

import numpy as np

from .errors import DegenerateAxisError, DomainError, InvalidArgumentError

AXIS_ZERO_TOL = 1e-14
UNIT_TOL = 1e-12
TANGENT_TOL = 1e-10


def dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Inner product over the last axis.

    Summation runs component by component in a fixed order so that a
    batched call and a single call give bitwise-identical results.
    """
    s = a[..., 0] * b[..., 0]
    for i in range(1, a.shape[-1]):
        s = s + a[..., i] * b[..., i]
    return s


def norm(a: np.ndarray) -> np.ndarray:
    return np.sqrt(dot(a, a))


def as_sphere_point(coords, tol: float = UNIT_TOL) -> np.ndarray:
    """Validate ``coords`` as point(s) of S^d, d >= 1, and return a float array."""
    x = np.asarray(coords, dtype=np.float64)
    if x.ndim == 0 or x.shape[-1] < 2:
        raise InvalidArgumentError("sphere points need at least 2 ambient coordinates (d >= 1)")
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("non-finite coordinates")
    dev = np.abs(norm(x) - 1.0)
    if np.any(dev > tol):
        raise InvalidArgumentError(f"not on the unit sphere (max norm deviation {dev.max():.3e})")
    return x


def _finite(*arrays: np.ndarray) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise InvalidArgumentError("non-finite input")


def _reflect(axis: np.ndarray, p: np.ndarray) -> np.ndarray:
    # unchecked kernel shared with the solver
    a2 = dot(axis, axis)
    ok = a2 > AXIS_ZERO_TOL * AXIS_ZERO_TOL
    coef = np.where(ok, 2.0 * dot(axis, p) / np.where(ok, a2, 1.0), 0.0)
    return coef[..., None] * axis - p


def reflect_across(axis, p) -> np.ndarray:
    """Reflect ``p`` in the line spanned by ``axis``; a zero axis maps p to -p."""
    axis = np.asarray(axis, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    _finite(axis, p)
    return _reflect(axis, p)


def wave_step(p, q, s, renormalize: bool = False) -> np.ndarray:
    """One cell of the discrete wave map: the reflection of ``s`` across ``p + q``.

    ``p`` and ``q`` are the two neighbours of the new corner and ``s`` the
    opposite (already known) corner.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    _finite(p, q, s)
    out = _reflect(p + q, s)
    if renormalize:
        out = out / norm(out)[..., None]
    return out


def invert_in_sphere(q) -> np.ndarray:
    """Inversion in the unit sphere, q / |q|^2."""
    q = np.asarray(q, dtype=np.float64)
    _finite(q)
    q2 = dot(q, q)
    if np.any(q2 <= AXIS_ZERO_TOL * AXIS_ZERO_TOL):
        raise DegenerateAxisError("cannot invert a (near-)zero vector")
    return q / q2[..., None]


def reflection_formula(p, q, s) -> np.ndarray:
    """Linear-plus-correction form of the cell update.

    Equals ``wave_step(p, q, s)`` whenever p, q, s are unit vectors and
    p + q != 0: P + Q - S - 2[(S - P).(S - Q)] I(P + Q).
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    corr = dot(s - p, s - q)
    return p + q - s - 2.0 * corr[..., None] * invert_in_sphere(p + q)


def project_tangent(x: np.ndarray, v: np.ndarray) -> np.ndarray:
    return v - dot(v, x)[..., None] * x


def exp_map(x, v) -> np.ndarray:
    """Exponential map of the round sphere at ``x`` applied to tangent vector ``v``.

    ``v`` is projected onto the tangent plane first, so rounding-level
    normal components are harmless.
    """
    x = np.asarray(x, dtype=np.float64)
    v = project_tangent(x, np.asarray(v, dtype=np.float64))
    r = norm(v)
    small = r < 1e-15
    safe_r = np.where(small, 1.0, r)
    out = np.cos(r)[..., None] * x + (np.sin(r) / safe_r)[..., None] * v
    return np.where(small[..., None], x, out)


def distances(x, y) -> tuple[np.ndarray, np.ndarray]:
    """Chordal and geodesic distance between sphere points."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    chordal = norm(x - y)
    geodesic = np.arccos(np.clip(dot(x, y), -1.0, 1.0))
    # arccos loses accuracy near 0; the chordal value is the better estimate there
    geodesic = np.maximum(geodesic, chordal)
    return chordal, geodesic


def chordal(x, y) -> np.ndarray:
    return norm(np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64))


def angle(x) -> np.ndarray:
    """Polar angle of circle points (d = 1), in (-pi, pi]."""
    x = np.asarray(x, dtype=np.float64)
    return np.arctan2(x[..., 1], x[..., 0])


def circle_point(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def wrap_angle(theta) -> np.ndarray:
    """Wrap to (-pi, pi]."""
    w = np.mod(np.asarray(theta, dtype=np.float64) + np.pi, 2.0 * np.pi) - np.pi
    return np.where(w == -np.pi, np.pi, w)


def null_coords(t: float, x: float) -> tuple[float, float]:
    """(t, x) -> (u, v) = (t + x, t - x) on the future light cone |x| <= t."""
    if abs(x) > t:
        raise DomainError(f"(t, x) = ({t}, {x}) lies outside the light cone")
    return t + x, t - x


def from_null_coords(u: float, v: float) -> tuple[float, float]:
    return (u + v) / 2.0, (u - v) / 2.0
