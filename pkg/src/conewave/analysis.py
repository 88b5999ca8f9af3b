"""Statistical and deterministic checks on discrete wave-map fields."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from itertools import combinations
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy import stats

from . import geometry as geo
from .errors import DomainError, InvalidArgumentError
from .rng import STREAM_BOUNDARY, STREAM_PAIRS, RngStream, as_generator
from .sampling import HeatChainParams, sample_brownian_boundary, sample_heat_chain, uniform_point, wrapped_normal_cdf
from .solver import DiscreteField, InterpolatedField, extend_eval, phi_n, solve_arrays

_E_INV = math.exp(-1.0)
H_MAX = math.exp(-0.5)


def h_modulus(rho):
    """Levy-type modulus: sqrt(-rho log rho) up to rho = 1/e, constant e^{-1/2} beyond."""
    r = np.asarray(rho, dtype=np.float64)
    if np.any(r <= 0):
        raise DomainError("h_modulus needs rho > 0")
    rc = np.minimum(r, _E_INV)
    out = np.where(r >= _E_INV, H_MAX, np.sqrt(-rc * np.log(rc)))
    return float(out) if out.ndim == 0 else out


# -- staircase paths -------------------------------------------------------

@dataclass(frozen=True)
class StaircasePath:
    """Lattice path from (0, N) to (M, 0) moving right (m+1) or down (n-1)."""

    coords: tuple[tuple[int, int], ...]

    @property
    def M(self) -> int:
        return self.coords[-1][0]

    @property
    def N(self) -> int:
        return self.coords[0][1]

    def validate(self, M: int, N: int) -> None:
        c = self.coords
        if len(c) != M + N + 1 or c[0] != (0, N) or c[-1] != (M, 0):
            raise InvalidArgumentError(f"path must run from (0, {N}) to ({M}, 0) in {M + N} steps")
        for (m0, n0), (m1, n1) in zip(c, c[1:]):
            if (m1, n1) not in ((m0 + 1, n0), (m0, n0 - 1)):
                raise InvalidArgumentError(f"illegal step ({m0}, {n0}) -> ({m1}, {n1})")

    @classmethod
    def from_moves(cls, moves: str, M: int, N: int) -> "StaircasePath":
        m, n = 0, N
        coords = [(m, n)]
        for ch in moves:
            if ch == "R":
                m += 1
            elif ch == "D":
                n -= 1
            else:
                raise InvalidArgumentError(f"unknown move {ch!r}")
            coords.append((m, n))
        path = cls(tuple(coords))
        path.validate(M, N)
        return path

    @classmethod
    def boundary(cls, M: int, N: int) -> "StaircasePath":
        """Down the n-axis to the origin, then right along the m-axis."""
        return cls.from_moves("D" * N + "R" * M, M, N)

    @classmethod
    def far_corner(cls, M: int, N: int) -> "StaircasePath":
        """Right along n = N, then down m = M."""
        return cls.from_moves("R" * M + "D" * N, M, N)

    @classmethod
    def diagonal(cls, M: int, N: int) -> "StaircasePath":
        moves = []
        r, dn = M, N
        while r or dn:
            if r:
                moves.append("R")
                r -= 1
            if dn:
                moves.append("D")
                dn -= 1
        return cls.from_moves("".join(moves), M, N)

    @classmethod
    def random(cls, M: int, N: int, rng) -> "StaircasePath":
        gen = as_generator(rng)
        moves = np.array(["R"] * M + ["D"] * N)
        gen.shuffle(moves)
        return cls.from_moves("".join(moves), M, N)


def extract_path(field: DiscreteField | np.ndarray, path: StaircasePath) -> np.ndarray:
    """Field values along ``path``; ``field`` may be a batch of value arrays."""
    V = field.values if isinstance(field, DiscreteField) else np.asarray(field)
    path.validate(V.shape[-3] - 1, V.shape[-2] - 1)
    ms = np.array([c[0] for c in path.coords])
    ns = np.array([c[1] for c in path.coords])
    return V[..., ms, ns, :]


# -- reports -------------------------------------------------------------

@dataclass
class StatsReport:
    test: str
    params: dict
    seed: dict
    statistics: dict
    decision: bool
    sample_sizes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _ks_one(sample: np.ndarray, cdf: Callable) -> tuple[float, float]:
    res = stats.kstest(sample, cdf, method="asymp")
    return float(res.statistic), float(res.pvalue)


def _ks_two(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    res = stats.ks_2samp(a, b, method="asymp")
    return float(res.statistic), float(res.pvalue)


def _stream(rng) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng), STREAM_BOUNDARY)
    raise InvalidArgumentError("ensemble tests need an RngStream (or integer seed) for per-replica streams")


def brownian_boundaries(replicas: int, mesh_exp: int, window_exp: int, d: int, rng,
                        start=None, substeps: int = 64, first: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Stacked (y_plus, y_minus) of ``replicas`` boundaries; replica r uses substream first + r."""
    base = _stream(rng)
    K = 2 ** (mesh_exp + window_exp)
    yp = np.empty((replicas, K + 1, d + 1))
    ym = np.empty((replicas, K + 1, d + 1))
    for r in range(replicas):
        b = sample_brownian_boundary(mesh_exp, window_exp, d, base.substream(first + r), substeps=substeps, start=start)
        yp[r], ym[r] = b.y_plus, b.y_minus
    return yp, ym


def brownian_ensemble(replicas: int, mesh_exp: int, window_exp: int, d: int, rng, start=None,
                      corrupt: str | None = None, threads: int = 1,
                      chunk: int = 64) -> Iterable[tuple[np.ndarray, np.ndarray]]:
    """Yield (values, min_axis_norm) batches of solved Brownian-boundary fields."""
    base = _stream(rng)
    for lo in range(0, replicas, chunk):
        hi = min(replicas, lo + chunk)
        yp, ym = brownian_boundaries(hi - lo, mesh_exp, window_exp, d, base, start=start, first=lo)
        yield solve_arrays(yp, ym, corrupt=corrupt, threads=threads)


def _increments(points: np.ndarray, d: int) -> np.ndarray:
    """Signed angle steps (d = 1) or chordal step lengths along the path axis (-2)."""
    if d == 1:
        return geo.wrap_angle(np.diff(geo.angle(points), axis=-1))
    return geo.norm(np.diff(points, axis=-2))


def _lag1(incs: np.ndarray) -> tuple[float, int]:
    a = incs[..., :-1].ravel()
    b = incs[..., 1:].ravel()
    if a.size < 3:
        return 0.0, int(a.size)
    return float(np.corrcoef(a, b)[0, 1]), int(a.size)


def default_paths(M: int, N: int) -> dict[str, StaircasePath]:
    return {
        "boundary": StaircasePath.boundary(M, N),
        "diagonal": StaircasePath.diagonal(M, N),
        "far-corner": StaircasePath.far_corner(M, N),
    }


def chain_invariance_test(replicas: int, mesh_exp: int, window_exp: int, d: int,
                          paths: dict[str, StaircasePath] | None, rng, alpha: float = 0.01,
                          corrupt: str | None = None, threads: int = 1,
                          bias_budget: float = 0.01) -> StatsReport:
    """Check that field values along staircase paths form heat chains of parameter 2^-mesh_exp.

    d = 1: pooled signed angle increments are KS-tested against the wrapped
    normal N(0, 2^-mesh_exp), and lag-1 correlation of consecutive increments
    must satisfy |r| <= 4 / sqrt(pool size).  d >= 2: chordal step lengths are
    compared (two-sample KS) with boundary-path steps of an independent
    ensemble, the KS critical value widened by ``bias_budget``.
    """
    base = _stream(rng)
    K = 2 ** (mesh_exp + window_exp)
    paths = paths or default_paths(K, K)
    t = 2.0 ** -mesh_exp
    incs = {name: [] for name in paths}
    for values, _ in brownian_ensemble(replicas, mesh_exp, window_exp, d, base, corrupt=corrupt, threads=threads):
        for name, path in paths.items():
            incs[name].append(_increments(extract_path(values, path), d))
    level = alpha / len(paths)
    statistics = {}
    decision = True
    reference = None
    if d >= 2:
        yp, ym = brownian_boundaries(replicas, mesh_exp, window_exp, d, base.substream(1 << 30))
        reference = np.concatenate([geo.norm(np.diff(ym, axis=-2)), geo.norm(np.diff(yp, axis=-2))], axis=-1).ravel()
    for name in paths:
        pool = np.concatenate(incs[name], axis=0)
        entry = {}
        if d == 1:
            D, p = _ks_one(pool.ravel(), lambda x: wrapped_normal_cdf(x, t))
            r, n_pairs = _lag1(pool)
            entry.update(ks_statistic=D, ks_pvalue=p, ks_critical=float(stats.kstwobign.isf(level) / math.sqrt(pool.size)),
                         lag1_r=r, lag1_bound=4.0 / math.sqrt(n_pairs), pool_size=int(pool.size))
            ok = p >= level and abs(r) <= 4.0 / math.sqrt(n_pairs)
        else:
            D, p = _ks_two(pool.ravel(), reference)
            n, m = pool.size, reference.size
            crit = float(stats.kstwobign.isf(level) * math.sqrt((n + m) / (n * m))) + bias_budget
            r, n_pairs = _lag1(pool - pool.mean())
            entry.update(ks_statistic=D, ks_pvalue=p, ks_critical=crit, lag1_r=r,
                         lag1_bound=4.0 / math.sqrt(n_pairs), pool_size=int(pool.size))
            ok = D <= crit and abs(r) <= 4.0 / math.sqrt(n_pairs)
        entry["pass"] = bool(ok)
        statistics[name] = entry
        decision = decision and ok
    return StatsReport(
        test="chain-invariance",
        params={"replicas": replicas, "mesh_exp": mesh_exp, "window_exp": window_exp, "d": d,
                "alpha": alpha, "corrupt": corrupt, "paths": sorted(paths)},
        seed=base.to_dict(), statistics=statistics, decision=bool(decision),
        sample_sizes={name: statistics[name]["pool_size"] for name in paths},
    )


def _probe_stats(values: np.ndarray, probes: Sequence[tuple[int, int]], offset: tuple[int, int]) -> dict:
    pts = [values[:, m + offset[0], n + offset[1], :] for m, n in probes]
    out = {f"coord0@{i}": p[:, 0] for i, p in enumerate(pts)}
    for i, j in combinations(range(len(pts)), 2):
        out[f"dot@{i},{j}"] = geo.dot(pts[i], pts[j])
    return out


def _collect(replicas, mesh_exp, window_exp, d, rng, start, threads) -> np.ndarray:
    return np.concatenate([v for v, _ in brownian_ensemble(replicas, mesh_exp, window_exp, d, rng,
                                                           start=start, threads=threads)])


def translation_invariance_test(replicas: int, mesh_exp: int, window_exp: int, d: int,
                                offset: tuple[int, int], probes: Sequence[tuple[int, int]], rng,
                                alpha: float = 0.01, start=None, threads: int = 1) -> StatsReport:
    """Two-sample KS comparison of probe statistics and their translates by ``offset``.

    Base probes and translated probes come from two independent ensembles
    (the same ensemble when the offset is zero).  Statistics: first
    coordinate of each probe and pairwise dot products.
    """
    base = _stream(rng)
    K = 2 ** (mesh_exp + window_exp)
    for m, n in probes:
        if not (0 <= m and 0 <= n and m + offset[0] <= K and n + offset[1] <= K):
            raise InvalidArgumentError("probe or its translate lies outside the grid")
    first = _collect(replicas, mesh_exp, window_exp, d, base.substream(0), start, threads)
    if tuple(offset) == (0, 0):
        second = first
    else:
        second = _collect(replicas, mesh_exp, window_exp, d, base.substream(1), start, threads)
    a = _probe_stats(first, probes, (0, 0))
    b = _probe_stats(second, probes, tuple(offset))
    level = alpha / len(a)
    statistics = {}
    for key in a:
        D, p = _ks_two(a[key], b[key])
        statistics[key] = {"ks_statistic": D, "ks_pvalue": p, "pass": bool(p >= level)}
    return StatsReport(
        test="translation-invariance",
        params={"replicas": replicas, "mesh_exp": mesh_exp, "window_exp": window_exp, "d": d,
                "offset": list(offset), "probes": [list(p) for p in probes], "alpha": alpha,
                "stationary": start is None},
        seed=base.to_dict(), statistics=statistics,
        decision=all(s["pass"] for s in statistics.values()),
        sample_sizes={"per_statistic": replicas},
    )


# -- modulus of continuity ---------------------------------------------

@dataclass
class ModulusReport:
    sup_ratio: float
    per_scale: dict[int, tuple[float, float]]
    mesh_exp: int
    window_exp: int
    pairs: int = 0

    def cell_ratio(self) -> float:
        """max(|delta_m Y|, |delta_n Y|) / h(2^-N), the finest-scale entry."""
        return max(self.per_scale[0]) if 0 in self.per_scale else 0.0

    def to_dict(self) -> dict:
        return {"sup_ratio": self.sup_ratio, "per_scale": {str(k): list(v) for k, v in self.per_scale.items()},
                "mesh_exp": self.mesh_exp, "window_exp": self.window_exp, "pairs": self.pairs}


def _random_pairs(size: int, count: int, gen: np.random.Generator) -> tuple[np.ndarray, ...]:
    m0 = gen.integers(0, size, count)
    n0 = gen.integers(0, size, count)
    half = count // 2
    # half uniform partners, half at log-uniform separations
    m1 = gen.integers(0, size, count)
    n1 = gen.integers(0, size, count)
    scale = np.exp2(gen.uniform(0.0, math.log2(size), count - half))
    dm = np.rint(gen.uniform(-1, 1, count - half) * scale).astype(np.int64)
    dn = np.rint(gen.uniform(-1, 1, count - half) * scale).astype(np.int64)
    m1[half:] = np.clip(m0[half:] + dm, 0, size - 1)
    n1[half:] = np.clip(n0[half:] + dn, 0, size - 1)
    keep = (m0 != m1) | (n0 != n1)
    return m0[keep], n0[keep], m1[keep], n1[keep]


def modulus_report(field: DiscreteField | np.ndarray, mesh_exp: int, window_exp: int,
                   rng=None, pairs: int = 10**6) -> ModulusReport:
    """Dyadic-scale increment maxima and a sampled sup of |dY| / h(2^-N (|dm| + |dn|)).

    ``per_scale[M0]`` holds the largest increment between lattice points
    2^M0 apart along m and along n, divided by h(2^(M0 - N)), for
    0 <= M0 <= N - 3.  ``sup_ratio`` is the largest ratio over those
    dyadic pairs and ``pairs`` random pairs.
    """
    Y = field.values if isinstance(field, DiscreteField) else np.asarray(field)
    K = 2 ** (mesh_exp + window_exp)
    if Y.shape[0] != Y.shape[1]:
        raise InvalidArgumentError("modulus report needs a square field")
    if Y.shape[0] != K + 1:
        raise InvalidArgumentError(f"field side {Y.shape[0]} != 2^(N+L) + 1 = {K + 1}")
    per_scale = {}
    for M0 in range(0, mesh_exp - 2):
        step = 2 ** M0
        sub = Y[::step, ::step]
        h = h_modulus(2.0 ** (M0 - mesh_exp))
        a = float(np.max(geo.norm(sub[1:] - sub[:-1]))) / h
        b = float(np.max(geo.norm(sub[:, 1:] - sub[:, :-1]))) / h
        per_scale[M0] = (a, b)
    sup = max((max(v) for v in per_scale.values()), default=0.0)
    n_pairs = 0
    if pairs:
        gen = as_generator(rng if rng is not None else RngStream(0, STREAM_PAIRS))
        m0, n0, m1, n1 = _random_pairs(K + 1, pairs, gen)
        rho = 2.0 ** -mesh_exp * (np.abs(m1 - m0) + np.abs(n1 - n0))
        ratio = geo.norm(Y[m1, n1] - Y[m0, n0]) / h_modulus(rho)
        n_pairs = int(ratio.size)
        if n_pairs:
            sup = max(sup, float(ratio.max()))
    return ModulusReport(sup_ratio=sup, per_scale=per_scale, mesh_exp=mesh_exp, window_exp=window_exp, pairs=n_pairs)


def modulus_tail_curve(reports: Sequence[ModulusReport], A_grid: Sequence[float]) -> list[tuple[float, float]]:
    """Empirical probability of the modulus event at each A.

    The event is sup_ratio >= 32 A or a cell increment >= 8 A h(2^-N).
    """
    sup = np.array([r.sup_ratio for r in reports])
    cell = np.array([r.cell_ratio() for r in reports])
    return [(float(A), float(np.mean((sup >= 32 * A) | (cell >= 8 * A)))) for A in A_grid]


def modulus_ensemble(replicas: int, mesh_exp: int, window_exp: int, d: int, rng,
                     pairs: int = 10**6, threads: int = 1) -> list[ModulusReport]:
    base = _stream(rng)
    reports = []
    r = 0
    for values, _ in brownian_ensemble(replicas, mesh_exp, window_exp, d, base, threads=threads, chunk=16):
        for v in values:
            reports.append(modulus_report(v, mesh_exp, window_exp,
                                          rng=RngStream(base.seed, STREAM_PAIRS, (r,)), pairs=pairs))
            r += 1
    return reports


def heat_tail_exceedance(t: float, A_values: Sequence[float], steps: int, rng, d: int = 1,
                         substeps: int = 64) -> dict[float, float]:
    """Fraction of heat-chain steps with chordal length >= A sqrt(-t log t)."""
    params = HeatChainParams(t=t, d=d, substeps=substeps)
    gen = as_generator(rng)
    x0 = uniform_point(gen, d)
    chain = sample_heat_chain(x0, params, steps, gen)
    lengths = geo.norm(np.diff(chain, axis=0))
    scale = math.sqrt(-t * math.log(t))
    return {float(A): float(np.mean(lengths >= A * scale)) for A in A_values}


# -- convergence -----------------------------------------------------------

def convergence_study(boundary_fns, d: int, N_range: Sequence[int], eval_points: int = 65,
                      window_exp: int = 0, oracle: Callable | None = None,
                      reference_N: int | None = None) -> list[dict]:
    """Sup errors of Phi_N on a shared evaluation grid, one row per N.

    With an ``oracle(u, v)`` (exact solution), rows hold the error at the
    lattice points of mesh N (``grid_error``) and on the evaluation grid
    (``sup_error``).  Without one, ``sup_error`` is measured against Phi at
    ``reference_N`` (default max(N_range) + 2).
    """
    W = 2.0 ** window_exp
    s = np.linspace(0.0, W, eval_points)
    U, V = np.meshgrid(s, s, indexing="ij")
    ref = None
    if oracle is None:
        reference_N = reference_N or max(N_range) + 2
        ref = extend_eval(phi_n(boundary_fns, reference_N, window_exp), U, V)
    else:
        ref = oracle(U, V)
    rows = []
    for N in N_range:
        phi = phi_n(boundary_fns, N, window_exp)
        row = {"N": int(N), "sup_error": float(np.max(geo.norm(extend_eval(phi, U, V) - ref)))}
        if oracle is not None:
            g = np.arange(phi.base.M + 1) * 2.0 ** -N
            GU, GV = np.meshgrid(g, g, indexing="ij")
            row["grid_error"] = float(np.max(geo.norm(phi.base.values - oracle(GU, GV))))
        rows.append(row)
    return rows


def errors_nonincreasing(rows: Sequence[dict], key: str = "sup_error", slack: float = 0.05) -> bool:
    errs = [r[key] for r in rows]
    return all(b <= a * (1 + slack) for a, b in zip(errs, errs[1:]))


# -- exploratory slice diagnostic ------------------------------------------

def gibbs_slice_diagnostic(fields: InterpolatedField | Sequence[InterpolatedField], T: float,
                           spacing: float | None = None) -> dict:
    """Difference-quotient statistics of psi(T, x) = phi(T + x, T - x) on a fixed-time slice.

    Informational only.  ``var_x`` is the mean |psi(x + h) - psi(x)|^2 / (d h)
    along the slice and ``lag1_x`` the correlation of consecutive slice
    increments.  The time and space proxies at a point (u, v) of the slice
    both live on the cell [u - h, u] x [v - h, v]: its two diagonals
    Y(u, v) - Y(u - h, v - h) (a step h in t) and Y(u, v - h) - Y(u - h, v)
    (a step h in x).  ``var_t`` and ``corr_tx`` come from these.  Heuristically
    both variances are near 2 and both correlations near 0.
    """
    fields = [fields] if isinstance(fields, InterpolatedField) else list(fields)
    f0 = fields[0]
    h = spacing if spacing is not None else 2.0 ** -f0.mesh_exp
    n = int(round(2 * T / h))
    if n < 3:
        raise DomainError("slice too short for the given spacing")
    if 2 * T > min(f0.window) + 1e-12:
        raise DomainError("slice must lie in the field window")
    x = -T + h * np.arange(1, n)
    u, v = T + x, T - x
    d = f0.base.d
    sums = dict(tt=0.0, cx=0.0, xx=0.0, tx=0.0, lag=0.0, lag_norm=0.0, count_t=0, count_x=0)
    for f in fields:
        psi = extend_eval(f, u, v)
        dt = psi - extend_eval(f, u - h, v - h)
        cx = extend_eval(f, u, v - h) - extend_eval(f, u - h, v)
        dx = np.diff(psi, axis=0)
        sums["tt"] += float(geo.dot(dt, dt).sum())
        sums["cx"] += float(geo.dot(cx, cx).sum())
        sums["tx"] += float(geo.dot(dt, cx).sum())
        sums["xx"] += float(geo.dot(dx, dx).sum())
        sums["lag"] += float(geo.dot(dx[:-1], dx[1:]).sum())
        sums["lag_norm"] += float(geo.dot(dx[:-1], dx[:-1]).sum())
        sums["count_t"] += len(dt)
        sums["count_x"] += len(dx)
    tt, cx, xx = sums["tt"], sums["cx"], sums["xx"]
    return {
        "T": T, "spacing": h, "fields": len(fields),
        "var_t": tt / (sums["count_t"] * h * d),
        "var_x": xx / (sums["count_x"] * h * d),
        "lag1_x": sums["lag"] / sums["lag_norm"] if sums["lag_norm"] > 0 else 0.0,
        "corr_tx": sums["tx"] / math.sqrt(tt * cx) if tt > 0 and cx > 0 else 0.0,
    }
