"""Sphere-valued random boundary data and heat-kernel evaluation.

The heat kernel p(t, x, y) is the fundamental solution of df/dt = (1/2) Lap f
on S^d.  On the circle it is a 2*pi-periodised Gaussian of variance t and
can be sampled exactly; for d >= 2 steps are drawn by a geodesic random
walk with ``substeps`` Gaussian moves of covariance (t/substeps) * I on the
tangent plane.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy.special import ndtr

from . import geometry as geo
from .errors import DomainError, InvalidArgumentError, UnsupportedDimensionError
from .rng import as_generator

EXACT_WRAP = "exact-wrap"
GEODESIC_WALK = "geodesic-walk"
DEFAULT_SUBSTEPS = 64


@dataclass(frozen=True)
class HeatChainParams:
    t: float
    d: int
    method: str | None = None
    substeps: int = DEFAULT_SUBSTEPS

    def __post_init__(self):
        if not self.t > 0:
            raise InvalidArgumentError("heat time t must be positive")
        if self.d < 1:
            raise InvalidArgumentError("sphere dimension d must be >= 1")
        if self.substeps < 1:
            raise InvalidArgumentError("substeps must be >= 1")
        method = self.method or (EXACT_WRAP if self.d == 1 else GEODESIC_WALK)
        if method not in (EXACT_WRAP, GEODESIC_WALK):
            raise InvalidArgumentError(f"unknown sampler method {method!r}")
        if method == EXACT_WRAP and self.d != 1:
            raise InvalidArgumentError("exact-wrap sampling is only available for d = 1")
        object.__setattr__(self, "method", method)


@dataclass
class BoundaryPair:
    """Boundary data on the two null rays; ``y_plus[0]`` and ``y_minus[0]`` coincide."""

    y_plus: np.ndarray
    y_minus: np.ndarray

    def __post_init__(self):
        self.y_plus = np.ascontiguousarray(self.y_plus, dtype=np.float64)
        self.y_minus = np.ascontiguousarray(self.y_minus, dtype=np.float64)
        if self.y_plus.ndim != 2 or self.y_minus.ndim != 2:
            raise InvalidArgumentError("boundary sequences must be 2-D arrays (index, coordinate)")
        if self.y_plus.shape[1] != self.y_minus.shape[1] or self.y_plus.shape[1] < 2:
            raise InvalidArgumentError("boundary sequences must share an ambient dimension >= 2")
        if len(self.y_plus) == 0 or len(self.y_minus) == 0:
            raise InvalidArgumentError("boundary sequences must be non-empty")
        if not np.array_equal(self.y_plus[0], self.y_minus[0]):
            raise InvalidArgumentError("y_plus[0] and y_minus[0] must be identical")

    @property
    def M(self) -> int:
        return len(self.y_plus) - 1

    @property
    def N(self) -> int:
        return len(self.y_minus) - 1

    @property
    def d(self) -> int:
        return self.y_plus.shape[1] - 1

    def chain(self) -> np.ndarray:
        """Points in chain order: y_minus reversed, then y_plus from index 1."""
        return np.concatenate([self.y_minus[::-1], self.y_plus[1:]])

    @classmethod
    def from_chain(cls, chain: np.ndarray, junction: int) -> "BoundaryPair":
        chain = np.asarray(chain, dtype=np.float64)
        return cls(y_plus=chain[junction:].copy(), y_minus=chain[junction::-1].copy())


def uniform_point(rng, d: int, size=None) -> np.ndarray:
    """Uniform point(s) on S^d: normalised standard Gaussian vectors."""
    if d < 1:
        raise InvalidArgumentError("d must be >= 1")
    gen = as_generator(rng)
    shape = (() if size is None else tuple(np.atleast_1d(size))) + (d + 1,)
    g = gen.standard_normal(shape)
    return g / geo.norm(g)[..., None]


def _walk(x: np.ndarray, t: float, substeps: int, gen: np.random.Generator) -> np.ndarray:
    scale = math.sqrt(t / substeps)
    noise = gen.standard_normal((substeps,) + x.shape)
    for k in range(substeps):
        x = geo.exp_map(x, scale * noise[k])
    return x


def heat_step(x, params: HeatChainParams, rng) -> np.ndarray:
    """Move point(s) ``x`` by one heat-kernel transition of time ``params.t``."""
    gen = as_generator(rng)
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != params.d + 1:
        raise InvalidArgumentError("point dimension does not match params.d")
    if params.method == EXACT_WRAP:
        theta = geo.angle(x) + math.sqrt(params.t) * gen.standard_normal(x.shape[:-1])
        return geo.circle_point(np.mod(theta, 2.0 * np.pi))
    return _walk(x, params.t, params.substeps, gen)


def sample_heat_chain(x0, params: HeatChainParams, length: int, rng) -> np.ndarray:
    """Heat Markov chain X(0) = x0, ..., X(length); shape (length + 1, *x0.shape).

    ``x0`` may carry leading batch axes, giving independent chains.
    """
    if length < 0:
        raise InvalidArgumentError("length must be >= 0")
    gen = as_generator(rng)
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape[-1] != params.d + 1:
        raise InvalidArgumentError("point dimension does not match params.d")
    out = np.empty((length + 1,) + x0.shape)
    out[0] = x0
    if length == 0:
        return out
    if params.method == EXACT_WRAP:
        steps = math.sqrt(params.t) * gen.standard_normal((length,) + x0.shape[:-1])
        theta = geo.angle(x0) + np.cumsum(steps, axis=0)
        out[1:] = geo.circle_point(np.mod(theta, 2.0 * np.pi))
        return out
    x = x0
    for n in range(length):
        x = _walk(x, params.t, params.substeps, gen)
        out[n + 1] = x
    return out


def sample_brownian_boundary(mesh_exp: int, window_exp: int, d: int, rng,
                             substeps: int = DEFAULT_SUBSTEPS, method: str | None = None,
                             start=None) -> BoundaryPair:
    """Brownian boundary pair sampled at mesh 2^-mesh_exp on [0, 2^window_exp].

    One heat chain of parameter 2^-mesh_exp is run through the junction;
    ``y_minus`` is its first half reversed and ``y_plus`` its second half.
    The chain starts from a uniform point, or from ``start`` if given (which
    breaks stationarity and is only meant for negative controls).
    """
    if mesh_exp < 0 or window_exp < 0:
        raise InvalidArgumentError("mesh and window exponents must be >= 0")
    gen = as_generator(rng)
    half = 2 ** (mesh_exp + window_exp)
    params = HeatChainParams(t=2.0 ** -mesh_exp, d=d, method=method, substeps=substeps)
    if start is None:
        x0 = uniform_point(gen, d)
        chain = sample_heat_chain(x0, params, 2 * half, gen)
        return BoundaryPair.from_chain(chain, half)
    x0 = geo.as_sphere_point(start)
    # a fixed start sits at the junction, so both rays leave the same point
    fwd = sample_heat_chain(x0, params, half, gen)
    bwd = sample_heat_chain(x0, params, half, gen)
    return BoundaryPair(y_plus=fwd, y_minus=bwd)


# -- heat kernel density -------------------------------------------------

_TAIL_TOL = 1e-10


def _circle_terms(t: float) -> tuple[str, int]:
    if t <= 2.0:
        # images at distance >= 2*pi*k - pi
        k = 1
        while math.exp(-((2 * k - 1) * math.pi) ** 2 / (2 * t)) / math.sqrt(2 * math.pi * t) > _TAIL_TOL * 1e-6:
            k += 1
        return "images", k + 1
    n = 1
    while math.exp(-n * n * t / 2) > _TAIL_TOL * 1e-3:
        n += 1
    return "fourier", n


def _sphere2_terms(t: float) -> int:
    lmax = 1
    while True:
        tail = sum((2 * l + 1) / (4 * math.pi) * math.exp(-l * (l + 1) * t / 2)
                   for l in range(lmax + 1, lmax + 200))
        if tail < _TAIL_TOL * 1e-3:
            return lmax
        lmax += 1


def _legendre_series(c: np.ndarray, t: float, lmax: int) -> np.ndarray:
    p_prev = np.ones_like(c)
    p_cur = c.copy()
    total = (1.0 / (4 * math.pi)) * p_prev
    total = total + (3.0 / (4 * math.pi)) * math.exp(-t) * p_cur
    for l in range(1, lmax):
        p_next = ((2 * l + 1) * c * p_cur - l * p_prev) / (l + 1)
        p_prev, p_cur = p_cur, p_next
        k = l + 1
        total = total + (2 * k + 1) / (4 * math.pi) * math.exp(-k * (k + 1) * t / 2) * p_cur
    return total


def _legendre_series_mp(c: float, t: float, lmax: int, dps: int = 60) -> float:
    with mpmath.workdps(dps):
        c = mpmath.mpf(c)
        t = mpmath.mpf(t)
        p_prev, p_cur = mpmath.mpf(1), c
        total = (1 + 3 * mpmath.exp(-t) * c) / (4 * mpmath.pi)
        for l in range(1, lmax):
            p_prev, p_cur = p_cur, ((2 * l + 1) * c * p_cur - l * p_prev) / (l + 1)
            k = l + 1
            total += (2 * k + 1) * mpmath.exp(-k * (k + 1) * t / 2) * p_cur / (4 * mpmath.pi)
        return float(total)


def heat_kernel_density(t: float, x, y, d: int, truncation: int | None = None) -> np.ndarray:
    """Heat kernel p(t, x, y) on S^1 or S^2, density w.r.t. the Riemannian volume.

    On the circle the periodised Gaussian is summed over images for small t
    and as a Fourier series for large t.  On S^2 the Legendre expansion is
    used; where it cancels down to small values the sum is redone in
    extended precision, so the result stays accurate in relative terms.
    ``truncation`` overrides the automatically chosen number of terms.
    """
    if not t > 0:
        raise DomainError("heat time t must be positive")
    if d not in (1, 2):
        raise UnsupportedDimensionError(f"heat kernel density implemented for d in {{1, 2}}, got {d}")
    if truncation is not None and truncation < 1:
        raise InvalidArgumentError("truncation must be >= 1")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[-1] != d + 1 or y.shape[-1] != d + 1:
        raise InvalidArgumentError("point dimension does not match d")
    if d == 1:
        delta = geo.wrap_angle(geo.angle(y) - geo.angle(x))
        kind, terms = _circle_terms(t)
        if truncation is not None:
            terms = truncation
        if kind == "images":
            ks = np.arange(-terms, terms + 1)
            z = delta[..., None] + 2 * np.pi * ks
            return np.exp(-z * z / (2 * t)).sum(axis=-1) / math.sqrt(2 * math.pi * t)
        ns = np.arange(1, terms + 1)
        s = (np.exp(-ns * ns * t / 2) * np.cos(delta[..., None] * ns)).sum(axis=-1)
        return (1.0 + 2.0 * s) / (2 * math.pi)
    lmax = truncation if truncation is not None else _sphere2_terms(t)
    c = np.clip(geo.dot(x, y), -1.0, 1.0)
    out = np.atleast_1d(_legendre_series(np.atleast_1d(c), t, lmax))
    cflat = np.atleast_1d(c).ravel()
    flat = out.ravel()
    for i in np.flatnonzero(np.abs(flat) < 1e-5):
        flat[i] = _legendre_series_mp(float(cflat[i]), t, lmax)
    out = flat.reshape(out.shape)
    return out.reshape(np.shape(c)) if np.ndim(c) else float(out[0])


def kernel_reflection_identity_check(t: float, d: int, trials: int, rng,
                                     truncation: int | None = None, s_equals_p: bool = False) -> float:
    """Largest relative gap between p(P, RS) p(RS, Q) and p(P, S) p(S, Q), R = reflection across P + Q."""
    if not t > 0:
        raise DomainError("heat time t must be positive")
    gen = as_generator(rng)
    P = uniform_point(gen, d, trials)
    Q = uniform_point(gen, d, trials)
    S = P.copy() if s_equals_p else uniform_point(gen, d, trials)
    RS = geo.reflect_across(P + Q, S)
    lhs = heat_kernel_density(t, P, RS, d, truncation) * heat_kernel_density(t, RS, Q, d, truncation)
    rhs = heat_kernel_density(t, P, S, d, truncation) * heat_kernel_density(t, S, Q, d, truncation)
    rel = np.abs(lhs - rhs) / np.maximum(np.abs(rhs), np.finfo(float).tiny)
    return float(np.max(rel)) if trials else 0.0


def wrapped_normal_cdf(x, var: float, images: int = 6) -> np.ndarray:
    """CDF on (-pi, pi] of a centred normal of variance ``var`` wrapped onto the circle."""
    x = np.asarray(x, dtype=np.float64)
    sd = math.sqrt(var)
    total = np.zeros_like(x)
    for k in range(-images, images + 1):
        shift = 2 * np.pi * k
        total = total + ndtr((x + shift) / sd) - ndtr((-np.pi + shift) / sd)
    return total
