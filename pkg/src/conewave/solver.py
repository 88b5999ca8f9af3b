"""Discrete wave maps on a rectangular lattice.

Y(m+1, n+1) is the reflection of Y(m, n) across Y(m+1, n) + Y(m, n+1),
optionally plus an external forcing term.  Cells on one anti-diagonal
m + n = k depend only on the two previous diagonals, so each diagonal is
evaluated as a single vectorised update (and may be split across threads).
Every cell sees the same elementwise arithmetic whatever the batching or
chunking, so results are bitwise schedule-independent.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import geometry as geo
from .errors import DomainError, InvalidArgumentError
from .sampling import BoundaryPair

_THREAD_MIN_CELLS = 1 << 15

# Negative-control dynamics.  "identity-step": the new corner copies its
# neighbour Y(m+1, n), so nothing evolves along n.  "identity-map": the
# reflection is replaced by the identity, Y(m+1, n+1) = Y(m, n); this keeps
# the law along every staircase path (values there are a relabelled
# boundary chain), so path tests cannot detect it.
CORRUPTIONS = ("identity-step", "identity-map")


@dataclass
class DiscreteField:
    """Lattice values ``values[m, n]`` for 0 <= m <= M, 0 <= n <= N."""

    values: np.ndarray
    min_axis_norm: float = float("inf")
    forced: bool = False

    @property
    def M(self) -> int:
        return self.values.shape[0] - 1

    @property
    def N(self) -> int:
        return self.values.shape[1] - 1

    @property
    def d(self) -> int:
        return self.values.shape[2] - 1

    def norm_drift(self) -> float:
        return float(np.max(np.abs(geo.norm(self.values) - 1.0)))

    def boundary(self) -> BoundaryPair:
        return BoundaryPair(y_plus=self.values[:, 0].copy(), y_minus=self.values[0, :].copy())


def _cell(axis_a, axis_b, s, f, renormalize, corrupt):
    axis = axis_a + axis_b
    a2 = geo.dot(axis, axis)
    if corrupt == "identity-step":
        out = axis_a.copy()
    elif corrupt == "identity-map":
        out = s.copy()
    else:
        out = geo._reflect(axis, s)
    if f is not None:
        out = out + f
    if renormalize:
        out = out / geo.norm(out)[..., None]
    return out, a2


def _check_forcing(forcing, lead: tuple, M: int, N: int, D: int):
    if forcing is None:
        return None
    forcing = np.asarray(forcing, dtype=np.float64)
    if forcing.shape[-3:] != (M, N, D):
        raise InvalidArgumentError(f"forcing shape {forcing.shape[-3:]} does not match ({M}, {N}, {D})")
    if not np.all(np.isfinite(forcing)):
        raise InvalidArgumentError("non-finite forcing")
    return np.broadcast_to(forcing, lead + (M, N, D))


def solve_arrays(y_plus: np.ndarray, y_minus: np.ndarray, forcing=None, renormalize: bool = False,
                 corrupt: str | None = None, threads: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Fill the lattice for boundary arrays with optional leading batch axes.

    Returns ``(values, min_axis_norm)`` where ``values`` has shape
    (..., M+1, N+1, d+1) and ``min_axis_norm`` holds, per batch entry, the
    smallest |Y(m+1, n) + Y(m, n+1)| met by the recursion.
    """
    y_plus = np.asarray(y_plus, dtype=np.float64)
    y_minus = np.asarray(y_minus, dtype=np.float64)
    if y_plus.shape[:-2] != y_minus.shape[:-2] or y_plus.shape[-1] != y_minus.shape[-1]:
        raise InvalidArgumentError("y_plus and y_minus shapes are incompatible")
    if corrupt is not None and corrupt not in CORRUPTIONS:
        raise InvalidArgumentError(f"unknown corruption {corrupt!r}")
    lead = y_plus.shape[:-2]
    M, N, D = y_plus.shape[-2] - 1, y_minus.shape[-2] - 1, y_plus.shape[-1]
    F = _check_forcing(forcing, lead, M, N, D)
    V = np.empty(lead + (M + 1, N + 1, D))
    V[..., :, 0, :] = y_plus
    V[..., 0, :, :] = y_minus
    min_a2 = np.full(lead, np.inf)
    pool = ThreadPoolExecutor(threads) if threads > 1 else None

    def run(ms: np.ndarray) -> np.ndarray:
        ns = k - ms
        f = None if F is None else F[..., ms - 1, ns - 1, :]
        out, a2 = _cell(V[..., ms, ns - 1, :], V[..., ms - 1, ns, :], V[..., ms - 1, ns - 1, :],
                        f, renormalize, corrupt)
        V[..., ms, ns, :] = out
        return a2.min(axis=-1)

    try:
        for k in range(2, M + N + 1):
            ms = np.arange(max(1, k - N), min(M, k - 1) + 1)
            if pool is not None and ms.size * max(1, int(np.prod(lead))) >= _THREAD_MIN_CELLS:
                parts = np.array_split(ms, threads)
                mins = list(pool.map(run, [p for p in parts if p.size]))
                cur = np.minimum.reduce(mins)
            else:
                cur = run(ms)
            np.minimum(min_a2, cur, out=min_a2)
    finally:
        if pool is not None:
            pool.shutdown()
    return V, np.sqrt(min_a2)


def solve(boundary: BoundaryPair, forcing=None, renormalize: bool = False,
          corrupt: str | None = None, threads: int = 1) -> DiscreteField:
    """Unique discrete wave map with the given boundary data (and forcing, if any).

    ``forcing`` is an (M, N, d+1) array added to every cell update.
    ``corrupt`` selects one of ``CORRUPTIONS``; these exist only to build
    negative controls.
    """
    V, amin = solve_arrays(boundary.y_plus, boundary.y_minus, forcing, renormalize, corrupt, threads)
    return DiscreteField(values=V, min_axis_norm=float(amin), forced=forcing is not None)


def solve_linear(y_plus, y_minus, forcing) -> np.ndarray:
    """Closed-form solution of the linear problem with mixed difference ``forcing``.

    Y(m, n) = Y+(m) + Y-(n) - Y+(0) + sum_{j<m, k<n} F(j, k).
    """
    y_plus = np.asarray(y_plus, dtype=np.float64)
    y_minus = np.asarray(y_minus, dtype=np.float64)
    F = np.asarray(forcing, dtype=np.float64)
    M, N = len(y_plus) - 1, len(y_minus) - 1
    if F.shape != (M, N, y_plus.shape[1]) or y_minus.shape[1] != y_plus.shape[1]:
        raise InvalidArgumentError("dimension mismatch between boundary data and forcing")
    S = np.zeros((M + 1, N + 1, y_plus.shape[1]))
    S[1:, 1:] = F.cumsum(axis=0).cumsum(axis=1)
    return y_plus[:, None, :] + y_minus[None, :, :] - y_plus[0] + S


def mixed_difference(Y: np.ndarray) -> np.ndarray:
    """delta_m delta_n Y."""
    return Y[1:, 1:] - Y[1:, :-1] - Y[:-1, 1:] + Y[:-1, :-1]


@dataclass
class InterpolatedField:
    """Bilinear extension of a lattice field, rescaled to mesh 2^-mesh_exp."""

    base: DiscreteField
    mesh_exp: int
    origin: tuple[float, float] = (0.0, 0.0)

    @property
    def window(self) -> tuple[float, float]:
        h = 2.0 ** -self.mesh_exp
        return self.base.M * h, self.base.N * h

    def lattice_coords(self, u, v) -> tuple[np.ndarray, np.ndarray]:
        scale = 2.0 ** self.mesh_exp
        a = (np.asarray(u, dtype=np.float64) - self.origin[0]) * scale
        b = (np.asarray(v, dtype=np.float64) - self.origin[1]) * scale
        if np.any(a < 0) or np.any(a > self.base.M) or np.any(b < 0) or np.any(b > self.base.N):
            raise DomainError("evaluation point outside the field window")
        return a, b

    def __call__(self, u, v) -> np.ndarray:
        return extend_eval(self, u, v)


def extend_eval(field: InterpolatedField, u, v) -> np.ndarray:
    """Evaluate the bilinear extension at continuum coordinates (u, v)."""
    a, b = field.lattice_coords(u, v)
    Y = field.base.values
    M, N = field.base.M, field.base.N
    i = np.minimum(np.floor(a).astype(np.int64), max(M - 1, 0))
    j = np.minimum(np.floor(b).astype(np.int64), max(N - 1, 0))
    fa = (a - i)[..., None]
    fb = (b - j)[..., None]
    i1 = np.minimum(i + 1, M)
    j1 = np.minimum(j + 1, N)
    return ((1 - fa) * (1 - fb) * Y[i, j] + fa * (1 - fb) * Y[i1, j]
            + (1 - fa) * fb * Y[i, j1] + fa * fb * Y[i1, j1])


BoundaryFns = tuple[Callable[[np.ndarray], np.ndarray], Callable[[np.ndarray], np.ndarray]]


def sample_boundary_functions(fns: BoundaryFns, mesh_exp: int, window_exp: int) -> BoundaryPair:
    """Sample (phi_plus, phi_minus) at the dyadic points k 2^-mesh_exp of [0, 2^window_exp]."""
    n = 2 ** (mesh_exp + window_exp)
    s = np.arange(n + 1) * 2.0 ** -mesh_exp
    y_plus = np.asarray(fns[0](s), dtype=np.float64)
    y_minus = np.asarray(fns[1](s), dtype=np.float64)
    if np.max(np.abs(y_plus[0] - y_minus[0])) > 1e-12:
        raise InvalidArgumentError("boundary functions disagree at the origin")
    y_minus[0] = y_plus[0]
    return BoundaryPair(y_plus=y_plus, y_minus=y_minus)


def phi_n(source, mesh_exp: int, window_exp: int, rng=None, d: int | None = None,
          renormalize: bool = False, threads: int = 1) -> InterpolatedField:
    """Approximation at mesh 2^-mesh_exp on the window [0, 2^window_exp]^2.

    ``source`` is a BoundaryPair already sampled on the mesh, a pair of
    boundary functions, or None together with ``rng`` and ``d`` to draw a
    Brownian boundary.
    """
    if isinstance(source, BoundaryPair):
        boundary = source
    elif source is None:
        if rng is None or d is None:
            raise InvalidArgumentError("Brownian boundary needs both rng and d")
        from .sampling import sample_brownian_boundary

        boundary = sample_brownian_boundary(mesh_exp, window_exp, d, rng)
    else:
        boundary = sample_boundary_functions(source, mesh_exp, window_exp)
    return InterpolatedField(base=solve(boundary, renormalize=renormalize, threads=threads), mesh_exp=mesh_exp)


@dataclass
class ConservationReport:
    max_dev_m: float
    max_dev_n: float
    norm_drift: float
    cells: int = field(default=0)

    @property
    def max_deviation(self) -> float:
        return max(self.max_dev_m, self.max_dev_n)

    def to_dict(self) -> dict:
        return {"max_dev_m": self.max_dev_m, "max_dev_n": self.max_dev_n,
                "max_deviation": self.max_deviation, "norm_drift": self.norm_drift, "cells": self.cells}


def conservation_report(field: DiscreteField | np.ndarray) -> ConservationReport:
    """Per-cell length conservation of opposite sides of every lattice cell.

    For unforced fields |Y(m+1,n+1) - Y(m,n+1)| = |Y(m+1,n) - Y(m,n)| and
    |Y(m+1,n+1) - Y(m+1,n)| = |Y(m,n+1) - Y(m,n)|; reports the largest
    violation of each, plus the largest norm deviation from 1.
    """
    Y = field.values if isinstance(field, DiscreteField) else np.asarray(field)
    if Y.shape[0] < 2 or Y.shape[1] < 2:
        return ConservationReport(0.0, 0.0, float(np.max(np.abs(geo.norm(Y) - 1.0))), 0)
    top = geo.norm(Y[1:, 1:] - Y[:-1, 1:])
    bottom = geo.norm(Y[1:, :-1] - Y[:-1, :-1])
    right = geo.norm(Y[1:, 1:] - Y[1:, :-1])
    left = geo.norm(Y[:-1, 1:] - Y[:-1, :-1])
    return ConservationReport(
        max_dev_m=float(np.max(np.abs(top - bottom))),
        max_dev_n=float(np.max(np.abs(right - left))),
        norm_drift=float(np.max(np.abs(geo.norm(Y) - 1.0))),
        cells=int(top.size),
    )


def conservation_streaming(boundary: BoundaryPair, renormalize: bool = False) -> ConservationReport:
    """Conservation report computed diagonal by diagonal without storing the grid.

    Memory is O(M + N); the cell arithmetic is the same as in ``solve``.
    """
    M, N, D = boundary.M, boundary.N, boundary.d + 1
    # diagonals stored by m index; entries outside a diagonal are unused
    prev2 = np.full((M + 1, D), np.nan)
    prev = np.full((M + 1, D), np.nan)
    prev2[0] = boundary.y_plus[0]
    if M >= 1:
        prev[1] = boundary.y_plus[1]
    if N >= 1:
        prev[0] = boundary.y_minus[1]
    dev_m = dev_n = 0.0
    drift = float(np.max(np.abs(geo.norm(np.concatenate([boundary.y_plus, boundary.y_minus])) - 1.0)))
    cells = 0
    for k in range(2, M + N + 1):
        cur = np.full((M + 1, D), np.nan)
        if k <= N:
            cur[0] = boundary.y_minus[k]
        if k <= M:
            cur[k] = boundary.y_plus[k]
        ms = np.arange(max(1, k - N), min(M, k - 1) + 1)
        if ms.size:
            a, b, s = prev[ms], prev[ms - 1], prev2[ms - 1]
            out, _ = _cell(a, b, s, None, renormalize, None)
            cur[ms] = out
            dev_m = max(dev_m, float(np.max(np.abs(geo.norm(out - b) - geo.norm(a - s)))))
            dev_n = max(dev_n, float(np.max(np.abs(geo.norm(out - a) - geo.norm(b - s)))))
            drift = max(drift, float(np.max(np.abs(geo.norm(out) - 1.0))))
            cells += ms.size
        prev2, prev = prev, cur
    return ConservationReport(dev_m, dev_n, drift, cells)


def unit_l1_forcing(M: int, N: int, d: int, direction=None) -> np.ndarray:
    """Forcing grid of constant direction whose l1 norm (sum of cell norms) is 1."""
    if direction is None:
        direction = np.zeros(d + 1)
        direction[-1] = 1.0
    direction = np.asarray(direction, dtype=np.float64)
    direction = direction / geo.norm(direction)
    return np.broadcast_to(direction / (M * N), (M, N, d + 1)).copy()


def perturb_boundary(boundary: BoundaryPair, eps: float, delta: BoundaryPair | tuple) -> BoundaryPair:
    """Move boundary points by eps * delta and project back to the sphere."""
    dp, dm = (delta.y_plus, delta.y_minus) if isinstance(delta, BoundaryPair) else delta
    yp = boundary.y_plus + eps * np.asarray(dp)
    ym = boundary.y_minus + eps * np.asarray(dm)
    yp = yp / geo.norm(yp)[:, None]
    ym = ym / geo.norm(ym)[:, None]
    ym[0] = yp[0]
    return BoundaryPair(y_plus=yp, y_minus=ym)


def perturbation_experiment(boundary: BoundaryPair, eps: float, shape=None,
                            boundary_delta=None) -> tuple[float, float]:
    """Sup-norm response of the lattice field to forcing eps*shape and/or boundary shift eps*delta.

    Returns ``(sup_diff, sup_diff / eps)``; the ratio is NaN at eps = 0.
    """
    base = solve(boundary)
    pert_boundary = boundary if boundary_delta is None else perturb_boundary(boundary, eps, boundary_delta)
    forcing = None if shape is None else eps * np.asarray(shape, dtype=np.float64)
    pert = solve(pert_boundary, forcing=forcing)
    sup_diff = float(np.max(geo.norm(pert.values - base.values)))
    ratio = sup_diff / eps if eps > 0 else float("nan")
    return sup_diff, ratio
